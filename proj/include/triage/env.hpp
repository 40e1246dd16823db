#pragma once

// Attack detection environment: typed alert counts, hidden attack state,
// and the per-period transition (inspect, attack, trigger).

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "triage/random.hpp"
#include "triage/scenario.hpp"

namespace triage {

struct AdeState {
  std::vector<std::int64_t> n;  // uninvestigated alerts per type
  std::vector<std::uint8_t> m;  // attack mounted last period
  std::vector<std::int64_t> s;  // row-major |A| x |T| attack-raised alerts
  std::int64_t k = 0;

  std::size_t num_types() const { return n.size(); }
  std::size_t num_attacks() const { return m.size(); }

  std::int64_t& s_at(std::size_t a, std::size_t t) { return s[a * n.size() + t]; }
  std::int64_t s_at(std::size_t a, std::size_t t) const { return s[a * n.size() + t]; }
  std::span<const std::int64_t> s_row(std::size_t a) const {
    return {s.data() + a * n.size(), n.size()};
  }

  bool operator==(const AdeState&) const = default;
};

struct DefAction {
  std::vector<std::int64_t> counts;
  bool operator==(const DefAction&) const = default;
};

struct AttAction {
  std::vector<std::uint8_t> executed;
  bool operator==(const AttAction&) const = default;
};

struct StepOutcome {
  AdeState next_state;
  double reward = 0.0;  // defender sign
  std::vector<std::uint8_t> detected;
  std::vector<std::uint8_t> survived;
};

inline AdeState init_state(const ScenarioConfig& cfg) {
  AdeState st;
  st.n.assign(cfg.num_types(), 0);
  st.m.assign(cfg.num_attacks(), 0);
  st.s.assign(cfg.num_types() * cfg.num_attacks(), 0);
  return st;
}

/// Checks the structural invariants; returns an empty string when they hold.
inline std::string check_state(const AdeState& st) {
  const std::size_t nt = st.num_types();
  const std::size_t na = st.num_attacks();
  if (st.s.size() != nt * na) return "s has wrong shape";
  if (st.k < 0) return "negative time index";
  for (std::size_t t = 0; t < nt; ++t) {
    if (st.n[t] < 0) return "negative alert count";
    std::int64_t attack_alerts = 0;
    for (std::size_t a = 0; a < na; ++a) {
      if (st.m[a] > 1) return "m is not binary";
      if (st.s_at(a, t) < 0) return "negative attack alert count";
      if (!st.m[a] && st.s_at(a, t) != 0) return "alerts recorded for an attack not mounted";
      attack_alerts += st.s_at(a, t);
    }
    if (attack_alerts > st.n[t]) return "attack alerts exceed total alerts";
  }
  return {};
}

/// Probability that an attack whose alerts are `s_a` escapes an inspection
/// of `alpha` uniformly chosen alerts out of `n` (per type, independent):
///   prod_t C(n_t - s_t, alpha_t) / C(n_t, alpha_t).
/// Each ratio is evaluated as prod_{i<alpha} (n-s-i)/(n-i), which stays in
/// [0,1] and cannot overflow.
inline double survival_prob(std::span<const std::int64_t> n, std::span<const std::int64_t> s_a,
                            std::span<const std::int64_t> alpha) {
  if (n.size() != s_a.size() || n.size() != alpha.size())
    throw std::invalid_argument("survival_prob: size mismatch");
  double p = 1.0;
  for (std::size_t t = 0; t < n.size(); ++t) {
    if (n[t] < 0 || s_a[t] < 0 || alpha[t] < 0 || s_a[t] > n[t] || alpha[t] > n[t])
      throw std::invalid_argument("survival_prob: requires 0 <= s_a <= n and 0 <= alpha <= n");
    const std::int64_t clean = n[t] - s_a[t];
    if (s_a[t] == 0 || alpha[t] == 0) continue;
    if (alpha[t] > clean) return 0.0;
    for (std::int64_t i = 0; i < alpha[t]; ++i)
      p *= static_cast<double>(clean - i) / static_cast<double>(n[t] - i);
  }
  return p;
}

inline void check_def_action(const AdeState& st, const DefAction& alpha) {
  if (alpha.counts.size() != st.num_types())
    throw std::invalid_argument("defender action has wrong dimension");
  for (std::size_t t = 0; t < st.num_types(); ++t)
    if (alpha.counts[t] < 0 || alpha.counts[t] > st.n[t])
      throw std::invalid_argument("defender action inspects more alerts than exist for type " +
                                  std::to_string(t));
}

inline void check_def_budget(const ScenarioConfig& cfg, const DefAction& alpha) {
  double spend = 0.0;
  for (std::size_t t = 0; t < cfg.num_types(); ++t)
    spend += cfg.alert_types[t].cost * static_cast<double>(alpha.counts[t]);
  if (spend > cfg.defense_budget)
    throw std::invalid_argument("defender action exceeds the defense budget");
}

struct InspectResult {
  std::vector<std::uint8_t> detected;
  std::vector<std::uint8_t> survived;
};

namespace detail {

/// Draws `k` distinct indices uniformly from [0, n) by a partial
/// Fisher-Yates shuffle over a sparse swap map. Calls `visit(index)`.
template <class Visit>
void sample_without_replacement(std::int64_t n, std::int64_t k, Rng& rng, Visit&& visit) {
  std::unordered_map<std::int64_t, std::int64_t> swapped;
  swapped.reserve(static_cast<std::size_t>(2 * k));
  auto value_at = [&](std::int64_t i) {
    auto it = swapped.find(i);
    return it == swapped.end() ? i : it->second;
  };
  for (std::int64_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::int64_t> pick(i, n - 1);
    const std::int64_t j = pick(rng);
    const std::int64_t vi = value_at(i);
    const std::int64_t vj = value_at(j);
    swapped[j] = vi;
    swapped[i] = vj;
    visit(vj);
  }
}

}  // namespace detail

/// Realizes one inspection: for each type a uniformly random alpha_t-subset
/// of the n_t alerts. An executed attack is detected iff any of its alerts
/// is drawn.
inline InspectResult inspect(const AdeState& st, const DefAction& alpha, Rng& rng) {
  check_def_action(st, alpha);
  const std::size_t nt = st.num_types();
  const std::size_t na = st.num_attacks();
  InspectResult res;
  res.detected.assign(na, 0);
  res.survived.assign(na, 0);

  // Alerts of type t are laid out as [attack 0 block][attack 1 block]...[false alarms].
  std::vector<std::int64_t> upper(na);
  for (std::size_t t = 0; t < nt; ++t) {
    const std::int64_t k = alpha.counts[t];
    if (k == 0) continue;
    std::int64_t total = 0;
    for (std::size_t a = 0; a < na; ++a) {
      total += st.m[a] ? st.s_at(a, t) : 0;
      upper[a] = total;
    }
    if (total == 0) continue;
    if (k == st.n[t]) {
      for (std::size_t a = 0; a < na; ++a)
        if (st.m[a] && st.s_at(a, t) > 0) res.detected[a] = 1;
      continue;
    }
    detail::sample_without_replacement(st.n[t], k, rng, [&](std::int64_t idx) {
      if (idx >= total) return;
      auto it = std::upper_bound(upper.begin(), upper.end(), idx);
      res.detected[static_cast<std::size_t>(it - upper.begin())] = 1;
    });
  }
  for (std::size_t a = 0; a < na; ++a) res.survived[a] = st.m[a] && !res.detected[a];
  return res;
}

inline std::int64_t sample_count(const TriggerDist& d, Rng& rng) {
  return std::visit(
      [&](const auto& v) -> std::int64_t {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, Deterministic>) {
          return v.count;
        } else if constexpr (std::is_same_v<V, Bernoulli>) {
          return std::bernoulli_distribution(v.p)(rng) ? 1 : 0;
        } else {
          std::discrete_distribution<std::int64_t> dist(v.probs.begin(), v.probs.end());
          return dist(rng);
        }
      },
      d);
}

inline std::int64_t sample_false_alarms(double mean, Rng& rng) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<std::int64_t>(mean)(rng);
}

struct StepOptions {
  // Uninspected alerts stay in the queue for the next period.
  bool carryover = false;
};

/// One period: inspect the current alerts, score surviving attacks, mount
/// the new attacks, raise their alerts plus false alarms.
inline StepOutcome step(const AdeState& st, const DefAction& alpha, const AttAction& att,
                        const ScenarioConfig& cfg, Rng& rng, StepOptions opts = {}) {
  const std::size_t nt = cfg.num_types();
  const std::size_t na = cfg.num_attacks();
  if (att.executed.size() != na) throw std::invalid_argument("attack action has wrong dimension");

  InspectResult ins = inspect(st, alpha, rng);
  StepOutcome out;
  for (std::size_t a = 0; a < na; ++a)
    if (ins.survived[a]) out.reward -= cfg.attacks[a].loss;
  out.detected = std::move(ins.detected);
  out.survived = std::move(ins.survived);

  AdeState& nx = out.next_state;
  nx.k = st.k + 1;
  nx.m.resize(na);
  nx.s.assign(na * nt, 0);
  nx.n.assign(nt, 0);
  for (std::size_t a = 0; a < na; ++a) {
    nx.m[a] = att.executed[a] ? 1 : 0;
    if (!nx.m[a]) continue;
    for (std::size_t t = 0; t < nt; ++t) {
      const std::int64_t c = sample_count(cfg.trigger_at(a, t), rng);
      nx.s_at(a, t) = c;
      nx.n[t] += c;
    }
  }
  for (std::size_t t = 0; t < nt; ++t) {
    nx.n[t] += sample_false_alarms(cfg.false_alarm_means[t], rng);
    if (opts.carryover) nx.n[t] += st.n[t] - alpha.counts[t];
  }
  return out;
}

/// sum_k discount^k * rewards[k]
inline double discounted_sum(std::span<const double> rewards, double discount) {
  double acc = 0.0;
  double w = 1.0;
  for (double r : rewards) {
    acc += w * r;
    w *= discount;
  }
  return acc;
}

}  // namespace triage
