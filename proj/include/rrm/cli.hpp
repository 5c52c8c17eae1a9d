#pragma once

// The `rrm` command-line tool: collect, train, eval, compare, mix,
// subsample and rerun. Every command writes a run manifest next to its
// primary output; `rerun` re-executes one and verifies the output hashes.

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rrm/baselines.hpp"
#include "rrm/dataset.hpp"
#include "rrm/env.hpp"
#include "rrm/error.hpp"
#include "rrm/kv_config.hpp"
#include "rrm/manifest.hpp"
#include "rrm/marl/act.hpp"
#include "rrm/marl/agent_nets.hpp"
#include "rrm/marl/config.hpp"
#include "rrm/marl/trainer.hpp"
#include "rrm/metrics.hpp"

namespace rrm::cli {

// Fully resolved configuration of one run.
struct Settings {
  NetConfig net;
  marl::TrainerConfig trainer;
  ItlinqParams itlinq;
  ScoreWeights weights;

  KeyValues eval_key_values() const {
    return {{"itlinq_m_db", format_double(itlinq.m_db)},
            {"itlinq_eta", format_double(itlinq.eta_itl)},
            {"mu1", format_double(weights.mu1)},
            {"mu2", format_double(weights.mu2)}};
  }
};

inline bool is_eval_key(const std::string& k) {
  return k == "itlinq_m_db" || k == "itlinq_eta" || k == "mu1" || k == "mu2";
}

inline Settings resolve_settings(const KeyValues& kv) {
  for (const auto& [k, v] : kv) {
    if (!NetConfig::is_key(k) && !marl::TrainerConfig::is_key(k) && !is_eval_key(k)) {
      throw ConfigError("unknown config key: " + k);
    }
  }
  Settings s;
  s.net.apply(kv);
  s.trainer.apply(kv);
  s.weights = ScoreWeights::for_users(s.net.num_ues);
  for (const auto& [k, v] : kv) {
    if (k == "itlinq_m_db") s.itlinq.m_db = parse_double(k, v);
    else if (k == "itlinq_eta") s.itlinq.eta_itl = parse_double(k, v);
    else if (k == "mu1") s.weights.mu1 = parse_double(k, v);
    else if (k == "mu2") s.weights.mu2 = parse_double(k, v);
  }
  s.net.validate();
  s.trainer.validate();
  s.itlinq.validate();
  if (s.weights.mu1 < 0.0 || s.weights.mu2 < 0.0) throw ConfigError("mu1 and mu2 must be >= 0");
  return s;
}

inline void save_model(const std::string& path, const marl::AgentNets& nets) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model: " + path);
  out << marl::to_json(nets).dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline marl::AgentNets load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read model: " + path);
  try {
    return marl::agent_nets_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed model " + path + ": " + e.what());
  }
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

// Trailing moving average over the last `window` present values.
inline std::vector<std::optional<double>> moving_average(const std::vector<std::optional<double>>& v,
                                                         int window) {
  std::vector<std::optional<double>> out(v.size());
  std::vector<double> recent;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k]) continue;
    recent.push_back(*v[k]);
    if (static_cast<int>(recent.size()) > window) recent.erase(recent.begin());
    double sum = 0.0;
    for (double x : recent) sum += x;
    out[k] = sum / static_cast<double>(recent.size());
  }
  return out;
}

inline void write_curve_csv(std::ostream& out, const std::vector<marl::CurveRow>& curve, int window) {
  const std::size_t n = curve.size();
  std::vector<std::vector<std::optional<double>>> cols(6, std::vector<std::optional<double>>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const auto& r = curve[k];
    if (r.eval) {
      cols[0][k] = r.eval->rsum;
      cols[1][k] = r.eval->rperc5;
      cols[2][k] = r.eval->rscore;
    }
    cols[3][k] = r.critic_loss;
    cols[4][k] = r.policy_loss;
    cols[5][k] = r.cql_penalty_mean;
  }
  for (auto& c : cols) c = moving_average(c, window);
  out << "iteration,eval_Rsum,eval_Rperc5,eval_Rscore,critic_loss,policy_loss,cql_penalty_mean\n";
  for (std::size_t k = 0; k < n; ++k) {
    out << curve[k].iteration;
    for (const auto& c : cols) out << ',' << (c[k] ? format_double(*c[k]) : std::string());
    out << '\n';
  }
}

inline nlohmann::json summary_json(const EvalSummary& s) {
  return {{"run_id", s.run_id},       {"episodes", s.episodes},   {"mu1", s.weights.mu1},
          {"mu2", s.weights.mu2},     {"Rsum_mean", s.rsum_mean}, {"Rsum_std", s.rsum_std},
          {"Rperc5", s.rperc5},       {"Rscore", s.rscore},       {"reward_mean", s.reward_mean}};
}

template <class Fn>
void write_file(const std::string& path, Fn&& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  body(out);
  if (!out) throw IoError("write failed: " + path);
}

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string policy;
  std::string algo;
  std::string dataset;
  std::optional<int> episodes;
  std::optional<int> iters;
  std::optional<int> grad_steps;
  std::string out;
  std::string csv;
  int window = 1;
  std::string weights;
  std::optional<std::size_t> size;
  std::string manifest;
};

class Runner {
 public:
  Runner(std::vector<std::string> args, std::ostream& out, std::ostream& err,
         const RunManifest* replay = nullptr)
      : args_(std::move(args)), out_(out), err_(err), replay_(replay) {}

  int run() {
    CLI::App app{"Multi-agent radio resource management: simulation, baselines and offline RL"};
    app.name("rrm");
    app.require_subcommand(1);
    Flags f;

    auto common = [&](CLI::App* sub) {
      sub->add_option("--config", f.config, "key = value config file");
      sub->add_option("--seed", f.seed, "master seed");
    };
    auto* collect = app.add_subcommand("collect", "collect an offline dataset with a behavior policy");
    common(collect);
    collect->add_option("--policy", f.policy, "rw|greedy|tdm|itlinq|model:<path>")->required();
    collect->add_option("--episodes", f.episodes, "episodes to run (default 80)");
    collect->add_option("--out", f.out, "dataset path (default dataset.jsonl)");

    auto* train = app.add_subcommand("train", "train a model online or from a dataset");
    common(train);
    train->add_option("--algo", f.algo, "sac-c|dqn-c|sac-i|sac-ctde|cql-c|cql-i|cql-ctde");
    train->add_option("--dataset", f.dataset, "offline dataset (cql-* only)");
    train->add_option("--iters", f.iters, "offline iterations K");
    train->add_option("--grad-steps", f.grad_steps, "gradient steps per iteration or episode");
    train->add_option("--episodes", f.episodes, "online training episodes");
    train->add_option("--out", f.out, "model path (default model.json)");
    train->add_option("--csv", f.csv, "learning-curve CSV (default <out>.curve.csv)");
    train->add_option("--window", f.window, "moving-average window for the curve")->check(CLI::PositiveNumber);

    auto* eval = app.add_subcommand("eval", "evaluate one policy or model");
    common(eval);
    eval->add_option("--policy", f.policy, "rw|greedy|tdm|itlinq|model:<path>")->required();
    eval->add_option("--episodes", f.episodes, "evaluation episodes (default 100)");
    eval->add_option("--csv", f.csv, "per-episode CSV (default eval.csv)");
    eval->add_option("--out", f.out, "summary JSON (default <csv>.summary.json)");

    auto* compare = app.add_subcommand("compare", "evaluate several policies on shared seeds");
    common(compare);
    compare->add_option("--policy", f.policy, "comma-separated policies (default rw,greedy,tdm,itlinq)");
    compare->add_option("--episodes", f.episodes, "evaluation episodes (default 100)");
    compare->add_option("--csv", f.csv, "comparison table (default compare.csv)");
    compare->add_option("--out", f.out, "summary JSON (default <csv>.summary.json)");

    auto* mixer = app.add_subcommand("mix", "mix datasets in given proportions");
    common(mixer);
    mixer->add_option("--dataset", f.dataset, "comma-separated dataset paths")->required();
    mixer->add_option("--weights", f.weights, "comma-separated proportions summing to 1")->required();
    mixer->add_option("--size", f.size, "records in the mix (default: size of the first dataset)");
    mixer->add_option("--out", f.out, "output dataset path")->required();

    auto* sub = app.add_subcommand("subsample", "uniform subsample of a dataset");
    common(sub);
    sub->add_option("--dataset", f.dataset, "source dataset")->required();
    sub->add_option("--size", f.size, "records to keep")->required();
    sub->add_option("--out", f.out, "output dataset path")->required();

    auto* rerun = app.add_subcommand("rerun", "re-execute a manifest and verify its outputs");
    rerun->add_option("manifest", f.manifest, "manifest path")->required();

    try {
      std::vector<const char*> argv{"rrm"};
      for (const auto& a : args_) argv.push_back(a.c_str());
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
      out_ << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out_ << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      err_ << "error: " << e.what() << '\n';
      return static_cast<int>(ExitCode::kUsage);
    }

    try {
      if (rerun->parsed()) return cmd_rerun(f);
      started_ = std::chrono::steady_clock::now();
      manifest_.started_at = utc_timestamp();
      manifest_.argv = args_;
      if (collect->parsed()) return cmd_collect(f);
      if (train->parsed()) return cmd_train(f);
      if (eval->parsed()) return cmd_eval(f);
      if (compare->parsed()) return cmd_compare(f);
      if (mixer->parsed()) return cmd_mix(f);
      if (sub->parsed()) return cmd_subsample(f);
    } catch (const Error& e) {
      err_ << "error: " << e.what() << '\n';
      return static_cast<int>(e.exit_code());
    } catch (const std::invalid_argument& e) {
      err_ << "error: " << e.what() << '\n';
      return static_cast<int>(ExitCode::kUsage);
    }
    return static_cast<int>(ExitCode::kUsage);
  }

 private:
  Settings settings(const Flags& f, const std::string& command) {
    KeyValues kv;
    if (replay_) {
      kv = replay_->net_config;
      kv.insert(replay_->trainer_config.begin(), replay_->trainer_config.end());
      kv.insert(replay_->eval_config.begin(), replay_->eval_config.end());
    } else if (!f.config.empty()) {
      kv = load_key_values(f.config);
    }
    if (f.seed) kv["seed"] = std::to_string(*f.seed);
    if (!f.algo.empty()) kv["algo"] = f.algo;
    if (f.iters) kv["iterations"] = std::to_string(*f.iters);
    const Settings s = resolve_settings(kv);
    manifest_.command = command;
    manifest_.seed = s.trainer.seed;
    manifest_.net_config = s.net.to_key_values();
    manifest_.trainer_config = s.trainer.to_key_values();
    manifest_.eval_config = s.eval_key_values();
    return s;
  }

  std::unique_ptr<Policy> make_policy(const std::string& spec, const Settings& s) {
    const std::string prefix = "model:";
    if (spec.rfind(prefix, 0) == 0) {
      const std::string path = spec.substr(prefix.size());
      auto nets = std::make_shared<marl::AgentNets>(load_model(path));
      if (nets->net_config_hash != s.net.hash()) {
        throw ConfigError("model " + path + " was trained with a different NetConfig");
      }
      manifest_.inputs.push_back(digest(path));
      return std::make_unique<marl::ModelPolicy>(nets, marl::ActMode::kGreedy, spec);
    }
    return std::make_unique<BaselinePolicy>(parse_baseline(spec), s.itlinq);
  }

  Dataset load_input(const std::string& path, const NetConfig& net) {
    Dataset d = read_dataset(path);
    if (d.meta.config_hash != net.hash()) {
      throw ConfigError("dataset " + path + " was generated with a different NetConfig");
    }
    manifest_.inputs.push_back(digest(path));
    return d;
  }

  int finish(const std::vector<std::string>& outputs) {
    for (const auto& p : outputs) manifest_.outputs.push_back(digest(p));
    manifest_.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    const std::string path = manifest_path_for(outputs.front());
    write_manifest(path, manifest_);
    out_ << "manifest: " << path << '\n';
    return 0;
  }

  int cmd_collect(const Flags& f) {
    const Settings s = settings(f, "collect");
    const int episodes = f.episodes.value_or(80);
    if (episodes < 0) throw UsageError("--episodes must be >= 0");
    auto policy = make_policy(f.policy, s);
    const Dataset d = collect(s.net, *policy, episodes, s.trainer.seed);
    const std::string path = f.out.empty() ? "dataset.jsonl" : f.out;
    write_dataset(path, d);
    double reward = 0.0;
    for (const auto& r : d.records) reward += r.reward;
    if (d.records.empty()) {
      err_ << "warning: no episodes collected; " << path << " holds an empty dataset\n";
    } else {
      reward /= static_cast<double>(d.records.size());
    }
    out_ << "records: " << d.records.size() << "\nmean reward: " << format_double(reward) << '\n';
    return finish({path});
  }

  int cmd_train(const Flags& f) {
    Settings s = settings(f, "train");
    const bool offline = marl::is_offline(s.trainer.algo);
    if (f.grad_steps) {
      if (offline) s.trainer.grad_steps = *f.grad_steps;
      else s.trainer.online_grad_steps = *f.grad_steps;
    }
    if (f.episodes) s.trainer.online_episodes = *f.episodes;
    s.trainer.validate();
    manifest_.trainer_config = s.trainer.to_key_values();
    if (offline && f.dataset.empty()) {
      throw UsageError("--algo " + marl::to_string(s.trainer.algo) + " needs --dataset");
    }
    if (!offline && !f.dataset.empty()) {
      throw UsageError("--algo " + marl::to_string(s.trainer.algo) + " trains online; drop --dataset");
    }
    const std::uint64_t eval_seed = derive_seed(s.trainer.seed, "train-eval");
    const marl::Evaluator evaluator = [&](const marl::AgentNets& nets) {
      marl::ModelPolicy policy(std::make_shared<marl::AgentNets>(nets), marl::ActMode::kGreedy);
      const EvalSummary e = evaluate(policy, s.net, s.trainer.eval_episodes, eval_seed, s.weights);
      out_ << "eval: Rsum " << format_double(e.rsum_mean) << " Rperc5 " << format_double(e.rperc5)
           << " Rscore " << format_double(e.rscore) << '\n';
      return marl::EvalPoint{e.rsum_mean, e.rperc5, e.rscore};
    };
    marl::AgentNets nets;
    std::vector<marl::CurveRow> curve;
    long long steps = 0;
    if (offline) {
      const Dataset d = load_input(f.dataset, s.net);
      auto result = marl::train_offline(s.trainer, s.net, d.records, evaluator);
      nets = std::move(result.nets);
      curve = std::move(result.curve);
      steps = result.gradient_steps;
    } else {
      auto result = marl::train_online(s.trainer, s.net, evaluator);
      nets = std::move(result.nets);
      curve = std::move(result.curve);
      steps = result.gradient_steps;
    }
    const std::string model_path = f.out.empty() ? "model.json" : f.out;
    const std::string csv_path = f.csv.empty() ? model_path + ".curve.csv" : f.csv;
    save_model(model_path, nets);
    write_file(csv_path, [&](std::ostream& o) { write_curve_csv(o, curve, f.window); });
    out_ << "algo: " << marl::to_string(s.trainer.algo) << "\ngradient steps: " << steps << '\n';
    return finish({model_path, csv_path});
  }

  int cmd_eval(const Flags& f) {
    const Settings s = settings(f, "eval");
    const int episodes = f.episodes.value_or(100);
    auto policy = make_policy(f.policy, s);
    const EvalSummary e = evaluate(*policy, s.net, episodes, s.trainer.seed, s.weights, f.policy);
    const std::string csv_path = f.csv.empty() ? "eval.csv" : f.csv;
    const std::string summary_path = f.out.empty() ? csv_path + ".summary.json" : f.out;
    write_file(csv_path, [&](std::ostream& o) { write_episode_csv(o, e); });
    nlohmann::json doc = summary_json(e);
    doc["format"] = "rrm-eval-summary";
    doc["seed"] = s.trainer.seed;
    write_file(summary_path, [&](std::ostream& o) { o << doc.dump(2) << '\n'; });
    out_ << f.policy << ": Rsum " << format_double(e.rsum_mean) << " +/- " << format_double(e.rsum_std)
         << "  Rperc5 " << format_double(e.rperc5) << "  Rscore " << format_double(e.rscore) << '\n';
    return finish({csv_path, summary_path});
  }

  int cmd_compare(const Flags& f) {
    const Settings s = settings(f, "compare");
    const int episodes = f.episodes.value_or(100);
    const auto specs = split_list(f.policy.empty() ? "rw,greedy,tdm,itlinq" : f.policy);
    if (specs.empty()) throw UsageError("--policy lists no policies");
    const std::string csv_path = f.csv.empty() ? "compare.csv" : f.csv;
    const std::string summary_path = f.out.empty() ? csv_path + ".summary.json" : f.out;
    std::ostringstream table;
    table << "policy,episodes,Rsum_mean,Rsum_std,Rperc5,Rscore\n";
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& spec : specs) {
      auto policy = make_policy(spec, s);
      const EvalSummary e = evaluate(*policy, s.net, episodes, s.trainer.seed, s.weights, spec);
      table << spec << ',' << episodes << ',' << format_double(e.rsum_mean) << ','
            << format_double(e.rsum_std) << ',' << format_double(e.rperc5) << ','
            << format_double(e.rscore) << '\n';
      rows.push_back(summary_json(e));
    }
    write_file(csv_path, [&](std::ostream& o) { o << table.str(); });
    const nlohmann::json doc = {{"format", "rrm-compare-summary"},
                                {"seed", s.trainer.seed},
                                {"episodes", episodes},
                                {"rows", rows}};
    write_file(summary_path, [&](std::ostream& o) { o << doc.dump(2) << '\n'; });
    out_ << table.str();
    return finish({csv_path, summary_path});
  }

  int cmd_mix(const Flags& f) {
    const Settings s = settings(f, "mix");
    const auto paths = split_list(f.dataset);
    std::vector<double> weights;
    for (const auto& w : split_list(f.weights)) weights.push_back(parse_double("--weights", w));
    if (paths.empty() || paths.size() != weights.size()) {
      throw UsageError("--dataset and --weights must list the same number of entries");
    }
    std::vector<Dataset> sources;
    for (const auto& p : paths) sources.push_back(load_input(p, s.net));
    std::vector<const Dataset*> ptrs;
    for (const auto& d : sources) ptrs.push_back(&d);
    const Dataset m = mix(ptrs, weights, f.size.value_or(sources.front().records.size()), s.trainer.seed);
    write_dataset(f.out, m);
    out_ << "records: " << m.records.size() << "\nbehavior: " << m.meta.behavior << '\n';
    return finish({f.out});
  }

  int cmd_subsample(const Flags& f) {
    const Settings s = settings(f, "subsample");
    const Dataset d = load_input(f.dataset, s.net);
    const Dataset out = subsample(d, *f.size, s.trainer.seed);
    write_dataset(f.out, out);
    out_ << "records: " << out.records.size() << '\n';
    return finish({f.out});
  }

  int cmd_rerun(const Flags& f) {
    const RunManifest m = read_manifest(f.manifest);
    for (const auto& in : m.inputs) {
      if (file_hash(in.path) != in.hash) {
        throw IoError("input " + in.path + " changed since the recorded run");
      }
    }
    Runner again(m.argv, out_, err_, &m);
    const int code = again.run();
    if (code != 0) return code;
    int mismatches = 0;
    for (const auto& o : m.outputs) {
      const bool same = file_hash(o.path) == o.hash;
      out_ << (same ? "reproduced " : "DIFFERS ") << o.path << '\n';
      mismatches += same ? 0 : 1;
    }
    if (mismatches > 0) {
      err_ << "error: " << mismatches << " output(s) differ from the manifest\n";
      return 1;
    }
    return 0;
  }

  std::vector<std::string> args_;
  std::ostream& out_;
  std::ostream& err_;
  const RunManifest* replay_;
  RunManifest manifest_;
  std::chrono::steady_clock::time_point started_;
};

inline int run(std::vector<std::string> args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  return Runner(std::move(args), out, err).run();
}

}  // namespace rrm::cli
