#pragma once

// Offline datasets: collection with a behavior policy, line-delimited JSON
// persistence, mixing and subsampling.
//
// File layout: the first line is the DatasetMeta document, then one
// TransitionRecord object per line. Reals are written in shortest
// round-trip form, so load(write(d)) reproduces every field exactly.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rrm/env.hpp"
#include "rrm/policy.hpp"
#include "rrm/random.hpp"
#include "rrm/transition.hpp"

namespace rrm {

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetMeta {
  std::string config_hash;
  NetConfig net_config;
  std::string behavior;
  std::size_t record_count = 0;
  std::uint64_t creation_seed = 0;
  int format_version = kDatasetFormatVersion;
  std::vector<std::string> sources;  // provenance for mixed/subsampled sets

  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<TransitionRecord> records;
};

inline nlohmann::json to_json(const TransitionRecord& r) {
  return {{"episode_id", r.episode_id}, {"t", r.t},           {"obs", r.obs},
          {"action", r.action},         {"reward", r.reward}, {"next_obs", r.next_obs},
          {"done", r.done},             {"behavior_tag", r.behavior_tag}};
}

inline TransitionRecord record_from_json(const nlohmann::json& j) {
  TransitionRecord r;
  r.episode_id = j.at("episode_id").get<std::int64_t>();
  r.t = j.at("t").get<int>();
  r.obs = j.at("obs").get<std::vector<std::vector<double>>>();
  r.action = j.at("action").get<std::vector<int>>();
  r.reward = j.at("reward").get<double>();
  r.next_obs = j.at("next_obs").get<std::vector<std::vector<double>>>();
  r.done = j.at("done").get<bool>();
  r.behavior_tag = j.at("behavior_tag").get<std::string>();
  return r;
}

inline nlohmann::json to_json(const DatasetMeta& m) {
  return {{"format", "rrm-dataset"},
          {"format_version", m.format_version},
          {"config_hash", m.config_hash},
          {"net_config", m.net_config.to_key_values()},
          {"behavior", m.behavior},
          {"record_count", m.record_count},
          {"creation_seed", m.creation_seed},
          {"sources", m.sources}};
}

inline DatasetMeta meta_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "rrm-dataset") throw IoError("not a dataset file");
  DatasetMeta m;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != kDatasetFormatVersion) {
    throw IoError("unsupported dataset format_version " + std::to_string(m.format_version));
  }
  m.config_hash = j.at("config_hash").get<std::string>();
  m.net_config.apply(j.at("net_config").get<KeyValues>());
  m.behavior = j.at("behavior").get<std::string>();
  m.record_count = j.at("record_count").get<std::size_t>();
  m.creation_seed = j.at("creation_seed").get<std::uint64_t>();
  m.sources = j.value("sources", std::vector<std::string>{});
  return m;
}

inline void write_dataset(std::ostream& out, const Dataset& d) {
  out << to_json(d.meta).dump() << '\n';
  for (const auto& r : d.records) out << to_json(r).dump() << '\n';
}

inline void write_dataset(const std::string& path, const Dataset& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset: " + path);
  write_dataset(out, d);
  if (!out) throw IoError("write failed: " + path);
}

inline Dataset read_dataset(std::istream& in, const std::string& origin) {
  Dataset d;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file: " + origin);
  try {
    d.meta = meta_from_json(nlohmann::json::parse(line));
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      d.records.push_back(record_from_json(nlohmann::json::parse(line)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed dataset " + origin + ": " + e.what());
  }
  if (d.records.size() != d.meta.record_count) {
    throw IoError("dataset " + origin + ": header says " + std::to_string(d.meta.record_count) +
                  " records, body has " + std::to_string(d.records.size()));
  }
  if (d.meta.config_hash != d.meta.net_config.hash()) {
    throw IoError("dataset " + origin + ": config hash does not match its NetConfig");
  }
  return d;
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dataset: " + path);
  return read_dataset(in, path);
}

inline std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(ss.str())));
  return buf;
}

// Runs `episodes` full episodes with the behavior policy; one record per step.
inline Dataset collect(const NetConfig& cfg, Policy& policy, int episodes, std::uint64_t seed) {
  cfg.validate();
  if (episodes < 0) throw std::invalid_argument("collect: episodes must be >= 0");
  Dataset d;
  d.meta.net_config = cfg;
  d.meta.config_hash = cfg.hash();
  d.meta.behavior = policy.name();
  d.meta.creation_seed = seed;
  d.records.reserve(static_cast<std::size_t>(episodes) * cfg.episode_len);
  for (int e = 0; e < episodes; ++e) {
    EnvState state = reset(cfg, make_rng(seed, "collect-env", static_cast<std::uint64_t>(e)));
    Rng policy_rng = make_rng(seed, "collect-policy", static_cast<std::uint64_t>(e));
    policy.begin_episode(state);
    auto obs = observe(state);
    while (!state.done()) {
      const Decision decision = policy.decide(state, policy_rng);
      TransitionRecord rec;
      rec.episode_id = e;
      rec.t = state.t;
      rec.obs = obs;
      rec.action = decision.action;
      const StepOutcome out = step_schedule(state, decision.schedule);
      rec.reward = out.reward;
      rec.next_obs = out.observations;
      rec.done = out.done;
      rec.behavior_tag = policy.name();
      obs = out.observations;
      d.records.push_back(std::move(rec));
    }
  }
  d.meta.record_count = d.records.size();
  return d;
}

// Uniform sample of `size` records without replacement, in sampled order.
inline Dataset subsample(const Dataset& source, std::size_t size, std::uint64_t seed) {
  if (size > source.records.size()) {
    throw std::invalid_argument("subsample: requested " + std::to_string(size) +
                                " records from a source of " +
                                std::to_string(source.records.size()));
  }
  std::vector<std::size_t> idx(source.records.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = make_rng(seed, "subsample");
  std::shuffle(idx.begin(), idx.end(), rng);
  Dataset out;
  out.meta = source.meta;
  out.meta.creation_seed = seed;
  out.meta.sources = {source.meta.behavior + ":" + std::to_string(source.records.size())};
  out.records.reserve(size);
  for (std::size_t k = 0; k < size; ++k) out.records.push_back(source.records[idx[k]]);
  out.meta.record_count = out.records.size();
  return out;
}

// Per-source record counts for a mix: floor of p_k * total, the remainder
// assigned by largest fractional part (ties to the earlier source).
inline std::vector<std::size_t> mix_counts(const std::vector<double>& proportions,
                                           std::size_t total) {
  std::vector<std::size_t> counts(proportions.size());
  std::vector<double> frac(proportions.size());
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < proportions.size(); ++k) {
    const double exact = proportions[k] * static_cast<double>(total);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    frac[k] = exact - std::floor(exact);
    assigned += counts[k];
  }
  std::vector<std::size_t> order(proportions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < total && k < order.size(); ++k, ++assigned) ++counts[order[k]];
  return counts;
}

// Mixes datasets sharing one NetConfig. Each source contributes its share
// of `total` records sampled without replacement; the result is shuffled.
inline Dataset mix(const std::vector<const Dataset*>& sources, const std::vector<double>& proportions,
                   std::size_t total, std::uint64_t seed) {
  if (sources.empty() || sources.size() != proportions.size()) {
    throw std::invalid_argument("mix: need one proportion per dataset");
  }
  double sum = 0.0;
  for (double p : proportions) {
    if (p < 0.0) throw ConfigError("mix: proportions must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("mix: proportions must sum to 1");
  for (const auto* d : sources) {
    if (d->meta.config_hash != sources.front()->meta.config_hash) {
      throw ConfigError("mix: datasets were generated with different NetConfigs");
    }
  }
  const auto counts = mix_counts(proportions, total);
  Dataset out;
  out.meta = sources.front()->meta;
  out.meta.creation_seed = seed;
  out.meta.sources.clear();
  std::string behavior = "mix(";
  for (std::size_t k = 0; k < sources.size(); ++k) {
    const Dataset& src = *sources[k];
    if (counts[k] > src.records.size()) {
      throw ConfigError("mix: source " + std::to_string(k) + " has only " +
                        std::to_string(src.records.size()) + " records");
    }
    const Dataset part = subsample(src, counts[k], derive_seed(seed, "mix-source", k));
    out.records.insert(out.records.end(), part.records.begin(), part.records.end());
    out.meta.sources.push_back(src.meta.behavior + ":" + std::to_string(counts[k]));
    behavior += (k ? "," : "") + src.meta.behavior + "=" + format_double(proportions[k]);
  }
  out.meta.behavior = behavior + ")";
  Rng rng = make_rng(seed, "mix-shuffle");
  std::shuffle(out.records.begin(), out.records.end(), rng);
  out.meta.record_count = out.records.size();
  return out;
}

}  // namespace rrm
