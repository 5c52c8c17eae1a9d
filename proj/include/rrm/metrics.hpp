#pragma once

// Average, sum, tail (5-percentile) and score rates, plus the seeded
// evaluation harness shared by baselines and trained models.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "rrm/env.hpp"
#include "rrm/policy.hpp"
#include "rrm/random.hpp"

namespace rrm {

// rates[t][j] -> per-user mean over the episode.
inline std::vector<double> avg_user_rates(const std::vector<std::vector<double>>& rates) {
  if (rates.empty()) return {};
  std::vector<double> avg(rates.front().size(), 0.0);
  for (const auto& row : rates) {
    if (row.size() != avg.size()) throw DimensionMismatch("ragged episode rate matrix");
    for (std::size_t j = 0; j < row.size(); ++j) avg[j] += row[j];
  }
  for (double& a : avg) a /= static_cast<double>(rates.size());
  return avg;
}

inline double sum_rate(const std::vector<double>& user_avg) {
  if (user_avg.empty()) throw std::invalid_argument("sum_rate: need at least one user");
  return std::accumulate(user_avg.begin(), user_avg.end(), 0.0);
}

inline constexpr std::size_t kMinPercentileSamples = 20;

// Largest C such that at least 95% of the values are >= C. With the values
// sorted ascending that is the order statistic at index floor(n / 20).
inline double percentile5(std::vector<double> values) {
  if (values.size() < kMinPercentileSamples) {
    throw std::invalid_argument("percentile5: need at least 20 values, got " +
                                std::to_string(values.size()));
  }
  const std::size_t k = values.size() / 20;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k),
                   values.end());
  return values[k];
}

inline double rscore(double sum, double perc5, double mu1, double mu2) {
  return mu1 * sum + mu2 * perc5;
}

struct ScoreWeights {
  double mu1 = 0.05;  // 1 / J at the default 20 users
  double mu2 = 3.0;

  static ScoreWeights for_users(int num_ues) { return {1.0 / num_ues, 3.0}; }
};

struct EpisodeRow {
  int episode = 0;
  double rsum = 0.0;
  double rperc5_running = std::nan("");
  double rscore_running = std::nan("");
};

struct EvalSummary {
  std::string run_id;
  int episodes = 0;
  ScoreWeights weights;
  std::vector<double> pooled_user_rates;  // episodes x J, episode-major
  std::vector<double> episode_rsum;
  double rsum_mean = 0.0;
  double rsum_std = 0.0;
  double rperc5 = 0.0;
  double rscore = 0.0;
  double reward_mean = 0.0;
  std::vector<EpisodeRow> rows;

};

struct EpisodeResult {
  std::vector<double> user_avg;
  double mean_reward = 0.0;
};

// Runs one seeded episode. The topology, fading and mobility come from the
// env stream only, so every policy sees the same sequence for a seed.
inline EpisodeResult run_episode(Policy& policy, const NetConfig& cfg, std::uint64_t seed,
                                 int episode) {
  EnvState state = reset(cfg, make_rng(seed, "eval-env", static_cast<std::uint64_t>(episode)));
  Rng policy_rng = make_rng(seed, "eval-policy", static_cast<std::uint64_t>(episode));
  policy.begin_episode(state);
  std::vector<double> sum(cfg.num_ues, 0.0);
  double reward = 0.0;
  while (!state.done()) {
    const Decision d = policy.decide(state, policy_rng);
    const StepOutcome out = step_schedule(state, d.schedule);
    for (int j = 0; j < cfg.num_ues; ++j) sum[j] += out.per_ue_rate[j];
    reward += out.reward;
  }
  for (double& s : sum) s /= cfg.episode_len;
  return {std::move(sum), reward / cfg.episode_len};
}

inline int worker_count(int jobs) {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* cap = std::getenv("RRM_THREADS")) {
    const int v = std::atoi(cap);
    if (v >= 1) n = std::min(n, v);
  }
  return std::max(1, std::min(n, jobs));
}

inline EvalSummary summarize(std::vector<EpisodeResult> results, ScoreWeights weights,
                             std::string run_id) {
  EvalSummary s;
  s.run_id = std::move(run_id);
  s.episodes = static_cast<int>(results.size());
  s.weights = weights;
  double reward_total = 0.0;
  for (int e = 0; e < s.episodes; ++e) {
    const auto& r = results[e];
    s.pooled_user_rates.insert(s.pooled_user_rates.end(), r.user_avg.begin(), r.user_avg.end());
    s.episode_rsum.push_back(sum_rate(r.user_avg));
    reward_total += r.mean_reward;
    EpisodeRow row;
    row.episode = e;
    row.rsum = s.episode_rsum.back();
    const double mean_so_far =
        std::accumulate(s.episode_rsum.begin(), s.episode_rsum.end(), 0.0) / (e + 1);
    if (s.pooled_user_rates.size() >= kMinPercentileSamples) {
      row.rperc5_running = percentile5(s.pooled_user_rates);
      row.rscore_running = rscore(mean_so_far, row.rperc5_running, weights.mu1, weights.mu2);
    }
    s.rows.push_back(row);
  }
  if (s.episodes > 0) {
    s.rsum_mean = std::accumulate(s.episode_rsum.begin(), s.episode_rsum.end(), 0.0) / s.episodes;
    double var = 0.0;
    for (double v : s.episode_rsum) var += (v - s.rsum_mean) * (v - s.rsum_mean);
    s.rsum_std = s.episodes > 1 ? std::sqrt(var / (s.episodes - 1)) : 0.0;
    s.reward_mean = reward_total / s.episodes;
  }
  s.rperc5 = percentile5(s.pooled_user_rates);
  s.rscore = rscore(s.rsum_mean, s.rperc5, weights.mu1, weights.mu2);
  return s;
}

// Evaluates a policy over `episodes` seeded episodes. Episodes may fan out
// across RRM_THREADS workers; results are merged by episode index.
inline EvalSummary evaluate(const Policy& policy, const NetConfig& cfg, int episodes,
                            std::uint64_t seed, ScoreWeights weights, std::string run_id = "") {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  std::vector<EpisodeResult> results(episodes);
  const int workers = worker_count(episodes);
  if (workers == 1) {
    auto local = policy.clone();
    for (int e = 0; e < episodes; ++e) results[e] = run_episode(*local, cfg, seed, e);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          auto local = policy.clone();
          for (int e = w; e < episodes; e += workers) results[e] = run_episode(*local, cfg, seed, e);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }
  return summarize(std::move(results), weights, std::move(run_id));
}

inline void write_episode_csv(std::ostream& out, const EvalSummary& s) {
  auto cell = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  out << "run_id,episode,Rsum,Rperc5_running,Rscore_running\n";
  for (const auto& row : s.rows) {
    out << s.run_id << ',' << row.episode << ',' << format_double(row.rsum) << ','
        << cell(row.rperc5_running) << ',' << cell(row.rscore_running) << '\n';
  }
}

}  // namespace rrm
