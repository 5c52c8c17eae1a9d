#pragma once

// Downlink multi-AP scheduling environment: placement, association,
// channels, SINR and rates, proportional-fair weighting, observations.

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rrm/error.hpp"
#include "rrm/kv_config.hpp"
#include "rrm/random.hpp"

namespace rrm {

struct NetConfig {
  double area_side_m = 100.0;
  int num_aps = 4;
  int num_ues = 20;
  int top_n = 3;
  double min_ap_dist_m = 10.0;
  double min_ap_ue_dist_m = 1.0;
  double ue_speed_mps = 1.0;
  double tx_power_dbm = 10.0;
  double noise_power_dbm = -104.0;
  double shadowing_std_db = 7.0;
  double pl_offset_db = 10.0;
  int episode_len = 200;
  double pf_smoothing = 0.1;
  double fairness_exponent = 0.8;
  double rate_floor = 1e-3;

  int actions_per_agent() const { return top_n + 1; }
  int silent_action() const { return top_n; }
  int obs_dim() const { return 2 * top_n; }
  int state_dim() const { return 2 * top_n * num_aps; }

  // Throws ConfigError on a violated field invariant. AP packability is
  // left to the rejection sampler.
  void validate() const {
    auto require = [](bool ok, const char* msg) {
      if (!ok) throw ConfigError(std::string("invalid NetConfig: ") + msg);
    };
    require(area_side_m > 0, "area_side_m must be > 0");
    require(num_aps >= 1, "num_aps must be >= 1");
    require(num_ues >= 1, "num_ues must be >= 1");
    require(top_n >= 1, "top_n must be >= 1");
    require(min_ap_dist_m > 0, "min_ap_dist_m must be > 0");
    require(min_ap_ue_dist_m > 0, "min_ap_ue_dist_m must be > 0");
    require(ue_speed_mps >= 0, "ue_speed_mps must be >= 0");
    require(shadowing_std_db >= 0, "shadowing_std_db must be >= 0");
    require(episode_len >= 1, "episode_len must be >= 1");
    require(pf_smoothing > 0 && pf_smoothing <= 1, "pf_smoothing must be in (0, 1]");
    require(fairness_exponent >= 0 && fairness_exponent <= 1,
            "fairness_exponent must be in [0, 1]");
    require(rate_floor > 0, "rate_floor must be > 0");
  }

  // Canonical key=value text; the config hash is computed over it.
  KeyValues to_key_values() const {
    return {
        {"area_side_m", format_double(area_side_m)},
        {"num_aps", std::to_string(num_aps)},
        {"num_ues", std::to_string(num_ues)},
        {"top_n", std::to_string(top_n)},
        {"min_ap_dist_m", format_double(min_ap_dist_m)},
        {"min_ap_ue_dist_m", format_double(min_ap_ue_dist_m)},
        {"ue_speed_mps", format_double(ue_speed_mps)},
        {"tx_power_dbm", format_double(tx_power_dbm)},
        {"noise_power_dbm", format_double(noise_power_dbm)},
        {"shadowing_std_db", format_double(shadowing_std_db)},
        {"pl_offset_db", format_double(pl_offset_db)},
        {"episode_len", std::to_string(episode_len)},
        {"pf_smoothing", format_double(pf_smoothing)},
        {"fairness_exponent", format_double(fairness_exponent)},
        {"rate_floor", format_double(rate_floor)},
    };
  }

  // Applies every NetConfig key present in kv; other keys are ignored.
  void apply(const KeyValues& kv) {
    for (const auto& [k, v] : kv) {
      if (k == "area_side_m") area_side_m = parse_double(k, v);
      else if (k == "num_aps") num_aps = static_cast<int>(parse_int(k, v));
      else if (k == "num_ues") num_ues = static_cast<int>(parse_int(k, v));
      else if (k == "top_n") top_n = static_cast<int>(parse_int(k, v));
      else if (k == "min_ap_dist_m") min_ap_dist_m = parse_double(k, v);
      else if (k == "min_ap_ue_dist_m") min_ap_ue_dist_m = parse_double(k, v);
      else if (k == "ue_speed_mps") ue_speed_mps = parse_double(k, v);
      else if (k == "tx_power_dbm") tx_power_dbm = parse_double(k, v);
      else if (k == "noise_power_dbm") noise_power_dbm = parse_double(k, v);
      else if (k == "shadowing_std_db") shadowing_std_db = parse_double(k, v);
      else if (k == "pl_offset_db") pl_offset_db = parse_double(k, v);
      else if (k == "episode_len") episode_len = static_cast<int>(parse_int(k, v));
      else if (k == "pf_smoothing") pf_smoothing = parse_double(k, v);
      else if (k == "fairness_exponent") fairness_exponent = parse_double(k, v);
      else if (k == "rate_floor") rate_floor = parse_double(k, v);
    }
  }

  static bool is_key(const std::string& k) {
    static const NetConfig probe;
    return probe.to_key_values().count(k) > 0;
  }

  std::string hash() const {
    std::string text;
    for (const auto& [k, v] : to_key_values()) text += k + "=" + v + "\n";
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(text)));
    return buf;
  }

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Topology {
  std::vector<Point> ap_positions;
  std::vector<Point> ue_positions;
  std::vector<int> association;   // UE -> serving AP
  Eigen::MatrixXd shadowing_db;   // I x J, fixed for the episode

  // UEs associated to AP i, ascending index.
  std::vector<int> ues_of(int ap) const {
    std::vector<int> out;
    for (int j = 0; j < static_cast<int>(association.size()); ++j) {
      if (association[j] == ap) out.push_back(j);
    }
    return out;
  }
};

// Per-AP slot index in [0, N]; N means silent.
using JointAction = std::vector<int>;

// Per-AP served UE, or -1 when the AP is silent.
using Schedule = std::vector<int>;

struct EnvState {
  NetConfig cfg;
  Topology topology;
  int t = 0;
  Eigen::MatrixXd gains;                 // I x J, |h|^2 linear
  std::vector<double> probe_sinr;        // SNR of each UE from its own AP alone
  std::vector<double> long_term_rate;    // smoothed rate, valid once initialized
  bool long_term_initialized = false;
  std::vector<double> pf_weight;
  std::vector<std::vector<int>> topn_ranking;  // per AP, <= N UE indices
  Rng rng;

  int num_aps() const { return cfg.num_aps; }
  int num_ues() const { return cfg.num_ues; }
  bool done() const { return t >= cfg.episode_len; }
};

struct StepOutcome {
  std::vector<double> per_ue_rate;
  std::vector<double> per_ue_sinr;
  double reward = 0.0;
  std::vector<std::vector<double>> observations;  // post-step, I x 2N
  bool done = false;
};

namespace detail {
inline std::atomic<std::uint64_t>& env_step_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}
}  // namespace detail

// Number of environment steps taken in this process. Used by tests to
// confirm that offline training never touches the simulator.
inline std::uint64_t env_step_calls() { return detail::env_step_counter().load(); }

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

// 3GPP indoor path loss in dB for a distance in meters.
inline double path_loss_db(double d_m, double pl_offset_db = 10.0) {
  if (!(d_m > 0.0)) throw std::domain_error("path_loss_db: distance must be > 0");
  return 15.3 + 37.6 * std::log10(d_m) + pl_offset_db;
}

inline constexpr int kMaxPlacementAttempts = 10000;

inline Topology sample_topology(const NetConfig& cfg, Rng& rng) {
  cfg.validate();
  std::uniform_real_distribution<double> coord(0.0, cfg.area_side_m);
  Topology topo;
  topo.ap_positions.reserve(cfg.num_aps);
  for (int i = 0; i < cfg.num_aps; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      const Point p{coord(rng), coord(rng)};
      placed = std::all_of(topo.ap_positions.begin(), topo.ap_positions.end(),
                           [&](Point q) { return distance(p, q) >= cfg.min_ap_dist_m; });
      if (placed) topo.ap_positions.push_back(p);
    }
    if (!placed) {
      throw PlacementInfeasible("cannot place AP " + std::to_string(i) + " at distance >= " +
                                format_double(cfg.min_ap_dist_m) + " m from the others");
    }
  }
  topo.ue_positions.reserve(cfg.num_ues);
  for (int j = 0; j < cfg.num_ues; ++j) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      const Point p{coord(rng), coord(rng)};
      placed = std::all_of(topo.ap_positions.begin(), topo.ap_positions.end(),
                           [&](Point q) { return distance(p, q) >= cfg.min_ap_ue_dist_m; });
      if (placed) topo.ue_positions.push_back(p);
    }
    if (!placed) {
      throw PlacementInfeasible("cannot place UE " + std::to_string(j) + " at distance >= " +
                                format_double(cfg.min_ap_ue_dist_m) + " m from every AP");
    }
  }

  std::normal_distribution<double> shadow(0.0, cfg.shadowing_std_db);
  topo.shadowing_db.resize(cfg.num_aps, cfg.num_ues);
  for (int i = 0; i < cfg.num_aps; ++i) {
    for (int j = 0; j < cfg.num_ues; ++j) {
      topo.shadowing_db(i, j) = cfg.shadowing_std_db > 0 ? shadow(rng) : 0.0;
    }
  }

  // Max-RSRP association; RSRP excludes fast fading.
  topo.association.assign(cfg.num_ues, 0);
  for (int j = 0; j < cfg.num_ues; ++j) {
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < cfg.num_aps; ++i) {
      const double d = distance(topo.ap_positions[i], topo.ue_positions[j]);
      const double rsrp = cfg.tx_power_dbm - path_loss_db(d, cfg.pl_offset_db) -
                          topo.shadowing_db(i, j);
      if (rsrp > best) {
        best = rsrp;
        topo.association[j] = i;
      }
    }
  }
  return topo;
}

// Deterministic core of the channel: |h_ij|^2 = 10^(-(PL_ij + X_ij)/10) * F_ij.
// Distances below the AP-UE minimum are clamped to it.
inline Eigen::MatrixXd channel_gains(const NetConfig& cfg, const Topology& topo,
                                     const Eigen::MatrixXd& fading) {
  Eigen::MatrixXd g(cfg.num_aps, cfg.num_ues);
  for (int i = 0; i < cfg.num_aps; ++i) {
    for (int j = 0; j < cfg.num_ues; ++j) {
      const double d = std::max(distance(topo.ap_positions[i], topo.ue_positions[j]),
                                cfg.min_ap_ue_dist_m);
      const double loss_db = path_loss_db(d, cfg.pl_offset_db) + topo.shadowing_db(i, j);
      g(i, j) = std::pow(10.0, -loss_db / 10.0) * fading(i, j);
    }
  }
  return g;
}

inline Eigen::MatrixXd draw_rayleigh_power(int rows, int cols, Rng& rng) {
  std::exponential_distribution<double> unit_exp(1.0);
  Eigen::MatrixXd f(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) f(i, j) = unit_exp(rng);
  }
  return f;
}

inline Eigen::MatrixXd draw_channel_gains(EnvState& state, Rng& rng) {
  const auto fading = draw_rayleigh_power(state.cfg.num_aps, state.cfg.num_ues, rng);
  return channel_gains(state.cfg, state.topology, fading);
}

// SNR of every UE when only its own AP transmits, under the current gains.
inline void refresh_probe_sinr(EnvState& state) {
  const double p = dbm_to_mw(state.cfg.tx_power_dbm);
  const double noise = dbm_to_mw(state.cfg.noise_power_dbm);
  state.probe_sinr.assign(state.cfg.num_ues, 0.0);
  for (int j = 0; j < state.cfg.num_ues; ++j) {
    const int i = state.topology.association[j];
    state.probe_sinr[j] = state.gains(i, j) * p / noise;
  }
}

inline double pf_ratio(const EnvState& state, int ue) {
  return state.pf_weight[ue] * std::log2(1.0 + state.probe_sinr[ue]);
}

// Top-N associated UEs per AP by PF ratio, descending; ties -> lower UE index.
inline void rerank(EnvState& state) {
  const int n = state.cfg.top_n;
  state.topn_ranking.assign(state.cfg.num_aps, {});
  for (int i = 0; i < state.cfg.num_aps; ++i) {
    auto ues = state.topology.ues_of(i);
    std::stable_sort(ues.begin(), ues.end(),
                     [&](int a, int b) { return pf_ratio(state, a) > pf_ratio(state, b); });
    if (static_cast<int>(ues.size()) > n) ues.resize(n);
    state.topn_ranking[i] = std::move(ues);
  }
}

// Maps slot actions to served UEs. Empty slots are coerced to silence.
inline Schedule schedule_from_actions(const EnvState& state, const JointAction& action) {
  if (static_cast<int>(action.size()) != state.cfg.num_aps) {
    throw DimensionMismatch("joint action has " + std::to_string(action.size()) +
                            " entries, expected " + std::to_string(state.cfg.num_aps));
  }
  Schedule schedule(state.cfg.num_aps, -1);
  for (int i = 0; i < state.cfg.num_aps; ++i) {
    const int a = action[i];
    if (a < 0 || a > state.cfg.top_n) {
      throw InvalidAction("action " + std::to_string(a) + " for AP " + std::to_string(i) +
                          " outside [0, " + std::to_string(state.cfg.top_n) + "]");
    }
    const auto& ranking = state.topn_ranking[i];
    if (a < static_cast<int>(ranking.size())) schedule[i] = ranking[a];
  }
  return schedule;
}

// Slot of each scheduled UE in its AP's ranking, or the silent index when
// the AP is silent or its UE is outside the ranking.
inline JointAction actions_from_schedule(const EnvState& state, const Schedule& schedule) {
  JointAction action(state.cfg.num_aps, state.cfg.silent_action());
  for (int i = 0; i < state.cfg.num_aps; ++i) {
    const auto& ranking = state.topn_ranking[i];
    const auto it = std::find(ranking.begin(), ranking.end(), schedule[i]);
    if (schedule[i] >= 0 && it != ranking.end()) {
      action[i] = static_cast<int>(it - ranking.begin());
    }
  }
  return action;
}

struct LinkRates {
  std::vector<double> rate;
  std::vector<double> sinr;
};

// SINR/rate of every served UE under a schedule and gain matrix. Silent APs
// neither serve nor interfere.
inline LinkRates rates_for_schedule(const NetConfig& cfg, const Eigen::MatrixXd& gains,
                                    const Schedule& schedule) {
  const double p = dbm_to_mw(cfg.tx_power_dbm);
  const double noise = dbm_to_mw(cfg.noise_power_dbm);
  LinkRates out{std::vector<double>(cfg.num_ues, 0.0), std::vector<double>(cfg.num_ues, 0.0)};
  for (int i = 0; i < cfg.num_aps; ++i) {
    const int j = schedule[i];
    if (j < 0) continue;
    double interference = 0.0;
    for (int k = 0; k < cfg.num_aps; ++k) {
      if (k != i && schedule[k] >= 0) interference += gains(k, j) * p;
    }
    const double sinr = gains(i, j) * p / (interference + noise);
    out.sinr[j] = sinr;
    out.rate[j] = std::log2(1.0 + sinr);
  }
  return out;
}

inline double reward_for(const EnvState& state, const std::vector<double>& rate) {
  double r = 0.0;
  for (int j = 0; j < state.cfg.num_ues; ++j) {
    if (rate[j] != 0.0) r += std::pow(state.pf_weight[j], state.cfg.fairness_exponent) * rate[j];
  }
  return r;
}

// Rates, SINRs and reward for a joint slot action. The reward uses the PF
// weights currently in force. Does not advance the state.
inline StepOutcome compute_sinr_and_rates(const EnvState& state, const JointAction& action) {
  const auto schedule = schedule_from_actions(state, action);
  auto link = rates_for_schedule(state.cfg, state.gains, schedule);
  StepOutcome out;
  out.reward = reward_for(state, link.rate);
  out.per_ue_rate = std::move(link.rate);
  out.per_ue_sinr = std::move(link.sinr);
  return out;
}

// Long-term rate recursion, PF weights, then re-ranking from the current
// probe SINRs.
inline void update_pf_state(EnvState& state, const std::vector<double>& per_ue_rate) {
  const double eta = state.cfg.pf_smoothing;
  for (int j = 0; j < state.cfg.num_ues; ++j) {
    double& avg = state.long_term_rate[j];
    avg = state.long_term_initialized ? eta * per_ue_rate[j] + (1.0 - eta) * avg
                                      : per_ue_rate[j];
    state.pf_weight[j] = 1.0 / std::max(avg, state.cfg.rate_floor);
  }
  state.long_term_initialized = true;
  rerank(state);
}

// Moves p by `step` meters along `heading` radians, reflecting off the
// borders of [0, side]^2.
inline Point move_with_reflection(Point p, double heading, double step, double side) {
  auto reflect = [side](double c) {
    // Steps are far shorter than the side length; one fold per border
    // suffices, the loop covers the general case.
    while (c < 0.0 || c > side) {
      if (c < 0.0) c = -c;
      if (c > side) c = 2.0 * side - c;
    }
    return c;
  };
  return {reflect(p.x + step * std::cos(heading)), reflect(p.y + step * std::sin(heading))};
}

inline void advance_mobility(EnvState& state, Rng& rng) {
  std::uniform_real_distribution<double> heading(0.0, 2.0 * std::numbers::pi);
  for (auto& p : state.topology.ue_positions) {
    const double theta = heading(rng);
    p = move_with_reflection(p, theta, state.cfg.ue_speed_mps, state.cfg.area_side_m);
  }
}

inline constexpr double kObsClip = 10.0;

inline double normalize_feature(double x) {
  return std::clamp(std::log10(x + 1e-9), -kObsClip, kObsClip);
}

// Per-agent (SINR, weight) pairs over the AP's top-N ranking, log-scaled;
// missing slots hold the clip floor.
inline std::vector<std::vector<double>> observe(const EnvState& state) {
  const int n = state.cfg.top_n;
  std::vector<std::vector<double>> obs(state.cfg.num_aps,
                                       std::vector<double>(2 * n, -kObsClip));
  for (int i = 0; i < state.cfg.num_aps; ++i) {
    const auto& ranking = state.topn_ranking[i];
    for (int k = 0; k < static_cast<int>(ranking.size()); ++k) {
      const int j = ranking[k];
      obs[i][2 * k] = normalize_feature(state.probe_sinr[j]);
      obs[i][2 * k + 1] = normalize_feature(state.pf_weight[j]);
    }
  }
  return obs;
}

inline std::vector<double> global_state(const std::vector<std::vector<double>>& obs) {
  std::vector<double> s;
  for (const auto& o : obs) s.insert(s.end(), o.begin(), o.end());
  return s;
}

// Fresh episode. Weights start uniform at 1 until the first rates arrive.
inline EnvState reset(const NetConfig& cfg, Rng rng) {
  EnvState state;
  state.cfg = cfg;
  state.rng = std::move(rng);
  state.topology = sample_topology(cfg, state.rng);
  state.t = 0;
  state.long_term_rate.assign(cfg.num_ues, 0.0);
  state.long_term_initialized = false;
  state.pf_weight.assign(cfg.num_ues, 1.0);
  state.gains = draw_channel_gains(state, state.rng);
  refresh_probe_sinr(state);
  rerank(state);
  return state;
}

// One full environment step driven by an explicit schedule.
inline StepOutcome step_schedule(EnvState& state, const Schedule& schedule) {
  if (state.done()) throw std::logic_error("step called on a finished episode");
  if (static_cast<int>(schedule.size()) != state.cfg.num_aps) {
    throw DimensionMismatch("schedule size does not match num_aps");
  }
  detail::env_step_counter().fetch_add(1, std::memory_order_relaxed);
  auto link = rates_for_schedule(state.cfg, state.gains, schedule);
  StepOutcome out;
  out.reward = reward_for(state, link.rate);
  out.per_ue_rate = std::move(link.rate);
  out.per_ue_sinr = std::move(link.sinr);

  update_pf_state(state, out.per_ue_rate);
  advance_mobility(state, state.rng);
  ++state.t;
  state.gains = draw_channel_gains(state, state.rng);
  refresh_probe_sinr(state);
  rerank(state);
  out.observations = observe(state);
  out.done = state.done();
  return out;
}

inline StepOutcome step(EnvState& state, const JointAction& action) {
  return step_schedule(state, schedule_from_actions(state, action));
}

}  // namespace rrm
