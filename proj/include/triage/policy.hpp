#pragma once

// Observations, continuous-action decoders, and the pure strategies the
// players can field (trained networks and fixed baselines).

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "triage/env.hpp"
#include "triage/nn/mlp.hpp"
#include "triage/random.hpp"
#include "triage/scenario.hpp"

namespace triage {

enum class Player : int { Defender = +1, Attacker = -1 };

inline const char* to_string(Player p) { return p == Player::Defender ? "defender" : "attacker"; }

inline Player opponent_of(Player p) {
  return p == Player::Defender ? Player::Attacker : Player::Defender;
}

// ---------------------------------------------------------------------------
// Observations

inline std::size_t defender_obs_dim(const ScenarioConfig& cfg) { return cfg.num_types(); }

inline std::size_t attacker_obs_dim(const ScenarioConfig& cfg) {
  return cfg.num_types() + cfg.num_attacks() * (1 + cfg.num_types());
}

inline std::size_t action_dim(const ScenarioConfig& cfg, Player p) {
  return p == Player::Defender ? cfg.num_types() : cfg.num_attacks();
}

inline std::size_t obs_dim(const ScenarioConfig& cfg, Player p) {
  return p == Player::Defender ? defender_obs_dim(cfg) : attacker_obs_dim(cfg);
}

inline nn::Vector obs_defender(const AdeState& st, const ScenarioConfig& cfg) {
  nn::Vector o(static_cast<Eigen::Index>(cfg.num_types()));
  for (std::size_t t = 0; t < cfg.num_types(); ++t)
    o(static_cast<Eigen::Index>(t)) = static_cast<double>(st.n[t]) / cfg.obs_scale[t];
  return o;
}

/// [n / scale | m | s / scale, row-major by attack]
inline nn::Vector obs_attacker(const AdeState& st, const ScenarioConfig& cfg) {
  const std::size_t nt = cfg.num_types();
  const std::size_t na = cfg.num_attacks();
  nn::Vector o(static_cast<Eigen::Index>(attacker_obs_dim(cfg)));
  Eigen::Index i = 0;
  for (std::size_t t = 0; t < nt; ++t) o(i++) = static_cast<double>(st.n[t]) / cfg.obs_scale[t];
  for (std::size_t a = 0; a < na; ++a) o(i++) = st.m[a];
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t t = 0; t < nt; ++t)
      o(i++) = static_cast<double>(st.s_at(a, t)) / cfg.obs_scale[t];
  return o;
}

inline nn::Vector observe(Player p, const AdeState& st, const ScenarioConfig& cfg) {
  return p == Player::Defender ? obs_defender(st, cfg) : obs_attacker(st, cfg);
}

// ---------------------------------------------------------------------------
// Decoders

/// Maps per-type budget fractions in [0,1] to inspection counts. Fractions
/// summing above one are rescaled; counts are floored and capped by the
/// available alerts, so the result always satisfies both the budget and
/// the availability constraint.
inline DefAction decode_defender(std::span<const double> raw, std::span<const std::int64_t> n,
                                 const ScenarioConfig& cfg) {
  const std::size_t nt = cfg.num_types();
  if (raw.size() != nt || n.size() != nt)
    throw std::invalid_argument("decode_defender: dimension mismatch");
  const double budget = cfg.defense_budget;
  std::vector<double> b(nt);
  double total = 0.0;
  for (std::size_t t = 0; t < nt; ++t) {
    b[t] = std::clamp(raw[t], 0.0, 1.0) * budget;
    total += b[t];
  }
  if (total > budget && total > 0.0)
    for (auto& x : b) x *= budget / total;

  DefAction act;
  act.counts.assign(nt, 0);
  double spend = 0.0;
  for (std::size_t t = 0; t < nt; ++t) {
    const double c = cfg.alert_types[t].cost;
    std::int64_t k = n[t];
    if (c > 0.0) {
      const double afford = std::floor(b[t] / c);
      if (afford < static_cast<double>(n[t])) k = static_cast<std::int64_t>(afford);
    }
    act.counts[t] = std::max<std::int64_t>(0, k);
    spend += c * static_cast<double>(act.counts[t]);
  }
  // Floating-point rescaling can overshoot by an ulp; trim until feasible.
  while (spend > budget) {
    std::size_t worst = nt;
    for (std::size_t t = 0; t < nt; ++t)
      if (act.counts[t] > 0 && cfg.alert_types[t].cost > 0.0 &&
          (worst == nt || act.counts[t] * cfg.alert_types[t].cost >
                              act.counts[worst] * cfg.alert_types[worst].cost))
        worst = t;
    if (worst == nt) break;
    --act.counts[worst];
    spend = 0.0;
    for (std::size_t t = 0; t < nt; ++t)
      spend += cfg.alert_types[t].cost * static_cast<double>(act.counts[t]);
  }
  return act;
}

inline double expected_attack_cost(std::span<const double> probs, const ScenarioConfig& cfg) {
  double c = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) c += probs[a] * cfg.attacks[a].cost;
  return c;
}

/// Scales raw execution probabilities down so the expected execution cost
/// meets the attack budget.
inline std::vector<double> project_attacker(std::span<const double> raw,
                                            const ScenarioConfig& cfg) {
  if (raw.size() != cfg.num_attacks())
    throw std::invalid_argument("project_attacker: dimension mismatch");
  std::vector<double> p(raw.begin(), raw.end());
  for (auto& x : p) x = std::clamp(x, 0.0, 1.0);
  const double cost = expected_attack_cost(p, cfg);
  if (cost > cfg.attack_budget) {
    const double scale = cfg.attack_budget / cost;
    for (auto& x : p) x *= scale;
  }
  return p;
}

inline AttAction sample_attack(std::span<const double> probs, Rng& rng) {
  AttAction act;
  act.executed.resize(probs.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t a = 0; a < probs.size(); ++a) act.executed[a] = u(rng) < probs[a] ? 1 : 0;
  return act;
}

// ---------------------------------------------------------------------------
// Pure strategies

struct NeuralPolicy {
  std::shared_ptr<const nn::Mlp> net;
  Player role = Player::Defender;
};
struct UniformDefender {};
struct UniformAttacker {};
struct GreedyAttacker {};
struct StaticPriorityDefender {
  std::vector<std::size_t> order;  // alert types, inspected first to last
};
struct NoOp {};

struct PureStrategy {
  std::variant<NeuralPolicy, UniformDefender, UniformAttacker, GreedyAttacker,
               StaticPriorityDefender, NoOp>
      kind;
  std::string label;

  bool is_neural() const { return std::holds_alternative<NeuralPolicy>(kind); }
};

inline PureStrategy make_neural(std::shared_ptr<const nn::Mlp> net, Player role,
                                std::string label) {
  return {NeuralPolicy{std::move(net), role}, std::move(label)};
}
inline PureStrategy make_uniform_defender() { return {UniformDefender{}, "uniform"}; }
inline PureStrategy make_uniform_attacker() { return {UniformAttacker{}, "uniform"}; }
inline PureStrategy make_greedy_attacker() { return {GreedyAttacker{}, "greedy"}; }
inline PureStrategy make_noop() { return {NoOp{}, "none"}; }

/// Inspects alert types by ascending priority number (1 = most urgent);
/// types without a priority come last. Ties go to the lower type id.
inline PureStrategy make_priority_defender(const ScenarioConfig& cfg) {
  std::vector<std::size_t> order(cfg.num_types());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return cfg.alert_types[x].priority.value_or(256) < cfg.alert_types[y].priority.value_or(256);
  });
  return {StaticPriorityDefender{std::move(order)}, "priority"};
}

inline bool plays_as(const PureStrategy& s, Player p) {
  return std::visit(
      [&](const auto& v) -> bool {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, NeuralPolicy>) return v.role == p;
        else if constexpr (std::is_same_v<V, UniformDefender> ||
                           std::is_same_v<V, StaticPriorityDefender>)
          return p == Player::Defender;
        else if constexpr (std::is_same_v<V, UniformAttacker> || std::is_same_v<V, GreedyAttacker>)
          return p == Player::Attacker;
        else
          return true;
      },
      s.kind);
}

/// Greedy attack set: attacks ranked once by L_a * min(D / E_a, 1), taken in
/// that order whenever the remaining budget still covers them.
inline std::vector<std::uint8_t> greedy_attack_set(const ScenarioConfig& cfg) {
  const std::size_t na = cfg.num_attacks();
  const double budget = cfg.attack_budget;
  std::vector<double> score(na);
  for (std::size_t a = 0; a < na; ++a) {
    const double e = cfg.attacks[a].cost;
    const double frac = e > 0.0 ? std::min(budget / e, 1.0) : 1.0;
    score[a] = cfg.attacks[a].loss * frac;
  }
  std::vector<std::size_t> order(na);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return score[x] > score[y]; });
  std::vector<std::uint8_t> chosen(na, 0);
  double remaining = budget;
  for (std::size_t a : order) {
    if (cfg.attacks[a].cost <= remaining) {
      chosen[a] = 1;
      remaining -= cfg.attacks[a].cost;
    }
  }
  return chosen;
}

inline std::vector<double> uniform_attacker_raw(const ScenarioConfig& cfg) {
  const std::size_t na = cfg.num_attacks();
  std::vector<double> raw(na, 1.0);
  for (std::size_t a = 0; a < na; ++a) {
    const double e = cfg.attacks[a].cost;
    if (e > 0.0) raw[a] = std::min(1.0, cfg.attack_budget / (static_cast<double>(na) * e));
  }
  return raw;
}

inline DefAction priority_allocation(const std::vector<std::size_t>& order,
                                     const AdeState& st, const ScenarioConfig& cfg) {
  DefAction act;
  act.counts.assign(cfg.num_types(), 0);
  double remaining = cfg.defense_budget;
  for (std::size_t t : order) {
    const double c = cfg.alert_types[t].cost;
    std::int64_t k = st.n[t];
    if (c > 0.0) {
      const double afford = std::floor(remaining / c);
      if (afford < static_cast<double>(k)) k = static_cast<std::int64_t>(afford);
    }
    act.counts[t] = std::max<std::int64_t>(0, k);
    remaining -= c * static_cast<double>(act.counts[t]);
  }
  return act;
}

inline DefAction act_defender(const PureStrategy& s, const AdeState& st,
                              const ScenarioConfig& cfg) {
  return std::visit(
      [&](const auto& v) -> DefAction {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, NeuralPolicy>) {
          if (v.role != Player::Defender)
            throw std::invalid_argument("attacker network used as defender");
          const nn::Vector raw = v.net->forward(obs_defender(st, cfg));
          return decode_defender({raw.data(), static_cast<std::size_t>(raw.size())}, st.n, cfg);
        } else if constexpr (std::is_same_v<V, UniformDefender>) {
          std::vector<double> raw(cfg.num_types(), 1.0 / static_cast<double>(cfg.num_types()));
          return decode_defender(raw, st.n, cfg);
        } else if constexpr (std::is_same_v<V, StaticPriorityDefender>) {
          return priority_allocation(v.order, st, cfg);
        } else if constexpr (std::is_same_v<V, NoOp>) {
          return DefAction{std::vector<std::int64_t>(cfg.num_types(), 0)};
        } else {
          throw std::invalid_argument("attacker strategy '" + s.label + "' used as defender");
        }
      },
      s.kind);
}

/// Execution probabilities the attacker strategy would use in this state.
inline std::vector<double> attack_probabilities(const PureStrategy& s, const AdeState& st,
                                                const ScenarioConfig& cfg) {
  return std::visit(
      [&](const auto& v) -> std::vector<double> {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, NeuralPolicy>) {
          if (v.role != Player::Attacker)
            throw std::invalid_argument("defender network used as attacker");
          const nn::Vector raw = v.net->forward(obs_attacker(st, cfg));
          return project_attacker({raw.data(), static_cast<std::size_t>(raw.size())}, cfg);
        } else if constexpr (std::is_same_v<V, UniformAttacker>) {
          return project_attacker(uniform_attacker_raw(cfg), cfg);
        } else if constexpr (std::is_same_v<V, GreedyAttacker>) {
          auto chosen = greedy_attack_set(cfg);
          return std::vector<double>(chosen.begin(), chosen.end());
        } else if constexpr (std::is_same_v<V, NoOp>) {
          return std::vector<double>(cfg.num_attacks(), 0.0);
        } else {
          throw std::invalid_argument("defender strategy '" + s.label + "' used as attacker");
        }
      },
      s.kind);
}

inline AttAction act_attacker(const PureStrategy& s, const AdeState& st, const ScenarioConfig& cfg,
                              Rng& rng) {
  if (std::holds_alternative<GreedyAttacker>(s.kind)) return AttAction{greedy_attack_set(cfg)};
  if (std::holds_alternative<NoOp>(s.kind))
    return AttAction{std::vector<std::uint8_t>(cfg.num_attacks(), 0)};
  return sample_attack(attack_probabilities(s, st, cfg), rng);
}

// ---------------------------------------------------------------------------
// Mixed strategies

struct MixedStrategy {
  std::vector<PureStrategy> pures;
  std::vector<double> weights;

  static MixedStrategy pure(PureStrategy s) { return {{std::move(s)}, {1.0}}; }
};

inline void validate(const MixedStrategy& m) {
  if (m.pures.empty()) throw std::invalid_argument("mixed strategy has no pure strategies");
  if (m.pures.size() != m.weights.size())
    throw std::invalid_argument("mixed strategy weights do not match strategies");
  double s = 0.0;
  for (double w : m.weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("mixed strategy weight outside [0,1]");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("mixed strategy weights do not sum to 1");
}

inline std::size_t sample_index(std::span<const double> weights, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last = i;
    acc += weights[i];
    if (x < acc) return i;
  }
  return last;
}

inline const PureStrategy& sample_pure(const MixedStrategy& m, Rng& rng) {
  validate(m);
  return m.pures[sample_index(m.weights, rng)];
}

}  // namespace triage
