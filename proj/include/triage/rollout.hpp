#pragma once

#include <stdexcept>

#include "triage/env.hpp"
#include "triage/policy.hpp"

namespace triage {

/// Plays `horizon` periods from the all-zero state and returns the
/// defender's discounted return sum_k discount^k R(k). The attacker's
/// return is its negation.
inline double rollout(const PureStrategy& defender, const PureStrategy& attacker,
                      const ScenarioConfig& cfg, int horizon, Rng& rng, StepOptions opts = {}) {
  if (horizon < 1) throw std::invalid_argument("rollout horizon must be >= 1");
  AdeState st = init_state(cfg);
  double ret = 0.0;
  double w = 1.0;
  for (int k = 0; k < horizon; ++k) {
    const DefAction d = act_defender(defender, st, cfg);
    const AttAction a = act_attacker(attacker, st, cfg, rng);
    StepOutcome out = step(st, d, a, cfg, rng, opts);
    ret += w * out.reward;
    w *= cfg.discount;
    st = std::move(out.next_state);
  }
  return ret;
}

/// Same, with each side's pure strategy drawn once per episode.
inline double rollout(const MixedStrategy& defender, const MixedStrategy& attacker,
                      const ScenarioConfig& cfg, int horizon, Rng& rng, StepOptions opts = {}) {
  const PureStrategy& d = sample_pure(defender, rng);
  const PureStrategy& a = sample_pure(attacker, rng);
  return rollout(d, a, cfg, horizon, rng, opts);
}

}  // namespace triage
