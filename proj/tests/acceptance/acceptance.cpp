// Prints one PASS/FAIL line per acceptance criterion. Pass criterion
// numbers as arguments to run a subset.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rrm/baselines.hpp"
#include "rrm/cli.hpp"
#include "rrm/dataset.hpp"
#include "rrm/env.hpp"
#include "rrm/marl/act.hpp"
#include "rrm/marl/codec.hpp"
#include "rrm/marl/losses.hpp"
#include "rrm/marl/trainer.hpp"
#include "rrm/metrics.hpp"
#include "support/fixtures.hpp"
#include "support/loss_checks.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace rrm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 5) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

Outcome path_loss_exact() {
  const double d[] = {1.0, 10.0, 100.0};
  const double expect[] = {25.3, 62.9, 100.5};
  double worst = 0.0;
  for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(path_loss_db(d[k]) - expect[k]));
  return {worst <= 1e-9, "max |error| " + fmt(worst) + " dB"};
}

Outcome oracle_equivalence() {
  Rng pick = make_rng(0, "acceptance-oracle");
  double worst = 0.0;
  for (int inst = 0; inst < 500; ++inst) {
    NetConfig cfg;
    cfg.num_aps = std::uniform_int_distribution<int>(1, 3)(pick);
    cfg.num_ues = std::uniform_int_distribution<int>(1, 4)(pick);
    cfg.top_n = std::uniform_int_distribution<int>(1, 3)(pick);
    cfg.episode_len = 5;
    const EnvState s = reset(cfg, make_rng(inst, "acceptance-instance"));
    JointAction a(cfg.num_aps);
    for (int& x : a) x = std::uniform_int_distribution<int>(0, cfg.top_n)(pick);
    const auto out = compute_sinr_and_rates(s, a);
    const auto expect = oracle::sinr_by_link(s.gains, schedule_from_actions(s, a),
                                             dbm_to_mw(cfg.tx_power_dbm), dbm_to_mw(cfg.noise_power_dbm));
    for (int j = 0; j < cfg.num_ues; ++j) {
      const double scale = std::max(std::abs(expect[j]), 1e-300);
      worst = std::max(worst, expect[j] == 0.0 ? std::abs(out.per_ue_sinr[j])
                                               : std::abs(out.per_ue_sinr[j] - expect[j]) / scale);
    }
  }
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(20, 400)(pick);
    const int distinct = std::uniform_int_distribution<int>(1, 50)(pick);
    std::vector<double> v(n);
    for (double& x : v) x = std::uniform_int_distribution<int>(0, distinct)(pick) * 0.37;
    if (percentile5(v) != oracle::percentile5_scan(v)) ++mismatches;
  }
  return {worst <= 1e-10 && mismatches == 0,
          "SINR max rel error " + fmt(worst) + ", percentile mismatches " + std::to_string(mismatches) +
              "/1000"};
}

Outcome gradient_fidelity() {
  double worst = 0.0;
  std::string worst_kind;
  for (auto kind : check::all_losses()) {
    Rng rng = make_rng(0, "acceptance-grad-" + check::name(kind));
    for (int trial = 0; trial < 50; ++trial) {
      const double e = check::loss_gradient_error(kind, rng);
      if (e > worst || !std::isfinite(e)) {
        worst = std::isfinite(e) ? e : INFINITY;
        worst_kind = check::name(kind);
      }
    }
  }
  return {worst <= 1e-4, "worst rel error " + fmt(worst) + " (" + worst_kind + "), " +
                             std::to_string(check::all_losses().size()) + " losses x 50 nets"};
}

Outcome algebraic_invariants() {
  using nn::Matrix;
  using nn::Vector;
  Rng rng = make_rng(0, "acceptance-invariants");
  double min_penalty = INFINITY;
  for (int row = 0; row < 100000; ++row) {
    const int n = std::uniform_int_distribution<int>(1, 8)(rng);
    const Matrix q = fixture::random_matrix(n, 1, rng, 100.0);
    min_penalty = std::min(min_penalty, marl::cql_penalty(q.col(0), std::uniform_int_distribution<int>(0, n - 1)(rng)));
  }

  double qtot_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<nn::DenseNet> critics;
    std::vector<Matrix> obs;
    std::vector<std::vector<int>> actions;
    for (int i = 0; i < 4; ++i) {
      critics.push_back(fixture::random_net({6, 16, 4}, rng));
      obs.push_back(fixture::random_matrix(6, 8, rng, 3.0));
      actions.push_back(fixture::random_actions(8, 4, rng));
    }
    const Vector total = marl::q_total(critics, obs, actions);
    for (int b = 0; b < 8; ++b) {
      double sum = 0.0;
      for (int i = 0; i < 4; ++i) sum += oracle::naive_forward(critics[i], {obs[i].col(b).data(), obs[i].col(b).data() + 6})[actions[i][b]];
      qtot_err = std::max(qtot_err, std::abs(total(b) - sum));
    }
  }

  const marl::JointActionCodec codec(4, 4);
  std::set<std::vector<int>> seen;
  bool codec_ok = codec.size() == 256;
  for (int k = 0; k < codec.size(); ++k) {
    const auto a = codec.decode(k);
    codec_ok = codec_ok && codec.encode(a) == k;
    seen.insert(a);
  }
  codec_ok = codec_ok && seen.size() == 256;

  NetConfig net;
  net.num_aps = 1;
  net.episode_len = 25;
  BaselinePolicy itlinq(BaselineKind::kItlinq);
  const Dataset data = collect(net, itlinq, 2, 3);
  double scope_err = 0.0;
  std::vector<std::vector<double>> params;
  for (auto algo : {marl::Algo::kCqlC, marl::Algo::kCqlI, marl::Algo::kCqlCtde}) {
    marl::TrainerConfig cfg;
    cfg.algo = algo;
    cfg.hidden_units = 16;
    cfg.batch_size = 16;
    cfg.iterations = 3;
    cfg.grad_steps = 5;
    const auto nets = marl::train_offline(cfg, net, data.records).nets;
    params.emplace_back();
    for (const auto* list : {&nets.critics, &nets.policies}) {
      for (const auto& n : *list) n.for_each_param([&](double v) { params.back().push_back(v); });
    }
  }
  for (std::size_t s = 1; s < params.size(); ++s) {
    if (params[s].size() != params[0].size()) {
      scope_err = INFINITY;
      continue;
    }
    for (std::size_t k = 0; k < params[0].size(); ++k) {
      scope_err = std::max(scope_err, std::abs(params[s][k] - params[0][k]));
    }
  }
  const bool pass = min_penalty >= 0.0 && qtot_err <= 1e-12 && codec_ok && scope_err <= 1e-10;
  return {pass, "min penalty " + fmt(min_penalty) + ", Q_tot error " + fmt(qtot_err) + ", codec " +
                    (codec_ok ? "bijective" : "BROKEN") + ", I=1 scope gap " + fmt(scope_err)};
}

Outcome baseline_ordering() {
  const NetConfig net;
  const ScoreWeights w = ScoreWeights::for_users(net.num_ues);
  int greedy_sum = 0, tdm_tail = 0, itlinq_score = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto run = [&](BaselineKind k) { return evaluate(BaselinePolicy(k), net, 200, seed, w); };
    const auto rw = run(BaselineKind::kRandomWalk);
    const auto greedy = run(BaselineKind::kGreedy);
    const auto tdm = run(BaselineKind::kTdm);
    const auto itl = run(BaselineKind::kItlinq);
    greedy_sum += greedy.rsum_mean > tdm.rsum_mean ? 1 : 0;
    tdm_tail += tdm.rperc5 > greedy.rperc5 ? 1 : 0;
    itlinq_score += itl.rscore >= rw.rscore ? 1 : 0;
    detail << " | seed " << seed << ": Rsum g/t " << fmt(greedy.rsum_mean, 4) << "/" << fmt(tdm.rsum_mean, 4)
           << ", R5 t/g " << fmt(tdm.rperc5, 3) << "/" << fmt(greedy.rperc5, 3) << ", Rscore i/rw "
           << fmt(itl.rscore, 4) << "/" << fmt(rw.rscore, 4);
  }
  const bool pass = greedy_sum >= 4 && tdm_tail >= 4 && itlinq_score >= 4;
  return {pass, "seeds holding: Rsum(greedy)>Rsum(TDM) " + std::to_string(greedy_sum) +
                    "/5, R5(TDM)>R5(greedy) " + std::to_string(tdm_tail) + "/5, Rscore(ITLinQ)>=Rscore(RW) " +
                    std::to_string(itlinq_score) + "/5" + detail.str()};
}

struct OfflineRun {
  double full = 0.0;
  double small = 0.0;
  double rw = 0.0;
  double itlinq = 0.0;
};

// Offline cql-ctde runs at the default configuration, shared by criteria 6 and 7.
std::vector<OfflineRun>& offline_runs() {
  static std::vector<OfflineRun> runs = [] {
    std::vector<OfflineRun> out;
    const NetConfig net;
    const ScoreWeights w = ScoreWeights::for_users(net.num_ues);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      BaselinePolicy itlinq(BaselineKind::kItlinq);
      const Dataset data = collect(net, itlinq, 80, seed);
      const Dataset small = subsample(data, 2000, seed);
      marl::TrainerConfig cfg;
      cfg.seed = seed;
      auto score = [&](const Dataset& d) {
        auto nets = std::make_shared<marl::AgentNets>(marl::train_offline(cfg, net, d.records).nets);
        return evaluate(marl::ModelPolicy(nets, marl::ActMode::kGreedy), net, 100, seed, w).rscore;
      };
      OfflineRun r;
      r.full = score(data);
      r.small = score(small);
      r.rw = evaluate(BaselinePolicy(BaselineKind::kRandomWalk), net, 100, seed, w).rscore;
      r.itlinq = evaluate(itlinq, net, 100, seed, w).rscore;
      std::cout << "  seed " << seed << ": cql-ctde 16k " << fmt(r.full) << ", 2k " << fmt(r.small)
                << ", RW " << fmt(r.rw) << ", ITLinQ " << fmt(r.itlinq) << std::endl;
      out.push_back(r);
    }
    return out;
  }();
  return runs;
}

Outcome offline_lifts_floor() {
  int ok = 0;
  std::string detail;
  for (const auto& r : offline_runs()) {
    const bool pass = r.full >= 1.10 * r.rw && r.full >= 0.90 * r.itlinq;
    ok += pass ? 1 : 0;
    detail += " | " + fmt(r.full) + " vs need " + fmt(std::max(1.10 * r.rw, 0.90 * r.itlinq)) +
              (pass ? " ok" : " short");
  }
  return {ok >= 2, std::to_string(ok) + "/3 seeds" + detail};
}

Outcome dataset_size_effect() {
  int ok = 0;
  std::string detail;
  for (const auto& r : offline_runs()) {
    ok += r.small < r.full ? 1 : 0;
    detail += " | 2k " + fmt(r.small) + " vs 16k " + fmt(r.full);
  }
  return {ok >= 2, std::to_string(ok) + "/3 seeds" + detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism_and_round_trips() {
  const fs::path dir = fs::temp_directory_path() / "rrm_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "run.cfg") << "episode_len = 50\nhidden_units = 32\neval_episodes = 2\n";
  auto cli = [&](const std::string& args) {
    const std::string cmd = "cd '" + dir.string() + "' && '" RRM_CLI_PATH "' " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  std::vector<std::string> failures;
  const std::vector<std::pair<std::string, std::vector<std::string>>> steps = {
      {"collect --policy itlinq --episodes 4 --seed 11 --config run.cfg --out d.jsonl", {"d.jsonl"}},
      {"train --algo cql-ctde --dataset d.jsonl --iters 3 --grad-steps 10 --seed 11 --config run.cfg "
       "--out m.json --csv curve.csv",
       {"m.json", "curve.csv"}},
      {"eval --policy model:m.json --episodes 5 --seed 11 --config run.cfg --csv e.csv", {"e.csv"}},
      {"compare --episodes 5 --seed 11 --config run.cfg --csv cmp.csv", {"cmp.csv"}},
  };
  std::vector<std::string> manifests;
  std::vector<std::pair<std::string, std::string>> first;
  for (const auto& [args, outputs] : steps) {
    if (cli(args) != 0) failures.push_back("run: " + args);
    for (const auto& o : outputs) first.emplace_back(o, slurp(dir / o));
    manifests.push_back(outputs.front() + ".manifest.json");
  }
  for (const auto& m : manifests) {
    if (cli("rerun " + m) != 0) failures.push_back("rerun " + m);
  }
  for (const auto& [name, bytes] : first) {
    if (slurp(dir / name) != bytes) failures.push_back(name + " changed on rerun");
  }

  const Dataset d = read_dataset((dir / "d.jsonl").string());
  std::ostringstream text;
  write_dataset(text, d);
  std::istringstream in(text.str());
  const Dataset back = read_dataset(in, "memory");
  if (!(back.meta == d.meta && back.records == d.records)) failures.push_back("dataset round-trip");
  if (text.str() != slurp(dir / "d.jsonl")) failures.push_back("dataset re-serialization");

  const marl::AgentNets nets = cli::load_model((dir / "m.json").string());
  const std::string model_text = marl::to_json(nets).dump();
  if (!(marl::agent_nets_from_json(nlohmann::json::parse(model_text)) == nets)) {
    failures.push_back("model round-trip");
  }
  fs::remove_all(dir);
  std::string detail = failures.empty() ? "4 commands rerun byte-identically; dataset and model round-trips exact"
                                        : "failures:";
  for (const auto& f : failures) detail += " [" + f + "]";
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {
      path_loss_exact,     oracle_equivalence,      gradient_fidelity,   algebraic_invariants,
      baseline_ordering,   offline_lifts_floor,     dataset_size_effect, determinism_and_round_trips};
  std::set<int> selected;
  for (int k = 1; k < argc; ++k) selected.insert(std::atoi(argv[k]));
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  ["
              << fmt(secs, 3) << " s]" << std::endl;
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
