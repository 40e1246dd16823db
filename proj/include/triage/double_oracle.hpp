#pragma once

// Policy-space double oracle: grow each side's policy list with trained
// best responses, estimate the utility matrix by Monte Carlo, and re-solve
// the restricted game until neither oracle improves on the equilibrium.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "triage/matrix_game.hpp"
#include "triage/oracle.hpp"
#include "triage/parallel.hpp"
#include "triage/policy.hpp"
#include "triage/random.hpp"
#include "triage/rollout.hpp"

namespace triage {

struct UtilityEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

namespace detail {

// Deviations are taken from the first sample, so identical samples give a
// standard error of exactly zero.
inline UtilityEstimate summarize(const std::vector<double>& xs) {
  UtilityEstimate e;
  const double n = static_cast<double>(xs.size());
  const double x0 = xs.front();
  double shift = 0.0;
  for (double x : xs) shift += x - x0;
  shift /= n;
  e.mean = x0 + shift;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - x0 - shift) * (x - x0 - shift);
    e.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return e;
}

// Stream id for the shared rollout seeds of the utility matrix.
constexpr std::uint64_t kUtilityStream = 0x7574696c;

}  // namespace detail

/// Monte Carlo estimate of the defender's discounted return. Rollout r is
/// seeded from (seed, r) alone, so every matrix entry estimated with the
/// same seed shares its random numbers.
inline UtilityEstimate estimate_utility(const PureStrategy& defender, const PureStrategy& attacker,
                                        const ScenarioConfig& cfg, int rollouts, int horizon,
                                        std::uint64_t seed, int threads = 1,
                                        StepOptions opts = {}) {
  if (rollouts < 1) throw std::invalid_argument("rollouts must be >= 1");
  std::vector<double> returns(static_cast<std::size_t>(rollouts));
  parallel_for(returns.size(), threads, [&](std::size_t r) {
    Rng rng(derive_seed(seed, {r}));
    returns[r] = rollout(defender, attacker, cfg, horizon, rng, opts);
  });
  return detail::summarize(returns);
}

/// Same for mixed strategies; pure strategies are redrawn every episode.
inline UtilityEstimate estimate_utility(const MixedStrategy& defender,
                                        const MixedStrategy& attacker, const ScenarioConfig& cfg,
                                        int rollouts, int horizon, std::uint64_t seed,
                                        int threads = 1, StepOptions opts = {}) {
  if (rollouts < 1) throw std::invalid_argument("rollouts must be >= 1");
  validate(defender);
  validate(attacker);
  std::vector<double> returns(static_cast<std::size_t>(rollouts));
  parallel_for(returns.size(), threads, [&](std::size_t r) {
    Rng rng(derive_seed(seed, {r}));
    returns[r] = rollout(defender, attacker, cfg, horizon, rng, opts);
  });
  return detail::summarize(returns);
}

struct DoubleOracleConfig {
  int rollouts = 200;
  int eval_horizon = 400;
  double delta = -1.0;  // < 0: one combined standard error, floored
  int max_iterations = 30;
  OracleHyperparams defender_hp;
  OracleHyperparams attacker_hp;
  std::uint64_t master_seed = 0;
  int threads = 1;
  StepOptions env;
};

inline DoubleOracleConfig default_double_oracle_config(const ScenarioConfig& cfg) {
  DoubleOracleConfig doc;
  doc.eval_horizon = cfg.horizon;
  doc.defender_hp = default_hyperparams(cfg);
  doc.attacker_hp = default_hyperparams(cfg);
  return doc;
}

struct RestrictedGame {
  std::vector<PureStrategy> defenders;
  std::vector<PureStrategy> attackers;
  Eigen::MatrixXd utility;    // defender's utility, rows x cols
  Eigen::MatrixXd std_error;  // per entry
  Eigen::VectorXd sigma_def;
  Eigen::VectorXd sigma_att;
  double value = 0.0;
  int iterations = 0;
  int rollouts_per_entry = 0;
  bool converged = false;
  bool hit_max_iterations = false;

  MixedStrategy defender_mixed() const {
    return {defenders, std::vector<double>(sigma_def.data(), sigma_def.data() + sigma_def.size())};
  }
  MixedStrategy attacker_mixed() const {
    return {attackers, std::vector<double>(sigma_att.data(), sigma_att.data() + sigma_att.size())};
  }
};

struct IterationRecord {
  int iteration = 0;
  std::size_t num_defenders = 0;
  std::size_t num_attackers = 0;
  double value = 0.0;
  double defender_gain = 0.0;  // best-response utility minus equilibrium utility
  double attacker_gain = 0.0;
  double defender_threshold = 0.0;
  double attacker_threshold = 0.0;
  bool defender_added = false;
  bool attacker_added = false;
};

struct DoubleOracleResult {
  RestrictedGame game;
  std::vector<IterationRecord> history;
  // Training curves of every oracle call, in call order (defender first).
  std::vector<std::vector<EpisodeMetrics>> training;
};

namespace detail {

inline void solve_restricted(RestrictedGame& g) {
  const GameSolution sol = solve_zero_sum(g.utility);
  g.sigma_def = sol.defender;
  g.sigma_att = sol.attacker;
  g.value = sol.value;
}

inline double value_variance(const RestrictedGame& g) {
  double v = 0.0;
  for (Eigen::Index i = 0; i < g.utility.rows(); ++i)
    for (Eigen::Index j = 0; j < g.utility.cols(); ++j) {
      const double w = g.sigma_def(i) * g.sigma_att(j) * g.std_error(i, j);
      v += w * w;
    }
  return v;
}

}  // namespace detail

/// Runs the double-oracle loop from the uniform-budget policies. `progress`
/// is invoked after every iteration.
inline DoubleOracleResult run_double_oracle(
    const ScenarioConfig& cfg, const DoubleOracleConfig& doc,
    const std::function<void(const IterationRecord&)>& progress = {}) {
  if (doc.rollouts < 1 || doc.eval_horizon < 1 || doc.max_iterations < 1)
    throw std::invalid_argument("double oracle: rollouts, horizon and iterations must be >= 1");
  validate(cfg);
  const std::uint64_t util_seed = derive_seed(doc.master_seed, {detail::kUtilityStream});
  auto estimate = [&](const PureStrategy& d, const PureStrategy& a) {
    return estimate_utility(d, a, cfg, doc.rollouts, doc.eval_horizon, util_seed, 1, doc.env);
  };
  double max_loss = 0.0;
  for (const auto& a : cfg.attacks) max_loss = std::max(max_loss, a.loss);
  const double floor = 1e-3 * max_loss;

  DoubleOracleResult res;
  RestrictedGame& g = res.game;
  g.rollouts_per_entry = doc.rollouts;
  g.defenders.push_back(make_uniform_defender());
  g.attackers.push_back(make_uniform_attacker());
  const UtilityEstimate e0 = estimate(g.defenders[0], g.attackers[0]);
  g.utility = Eigen::MatrixXd::Constant(1, 1, e0.mean);
  g.std_error = Eigen::MatrixXd::Constant(1, 1, e0.std_error);

  for (int iter = 1; iter <= doc.max_iterations; ++iter) {
    detail::solve_restricted(g);
    g.iterations = iter;

    OracleHyperparams dhp = doc.defender_hp;
    OracleHyperparams ahp = doc.attacker_hp;
    dhp.seed = derive_seed(doc.master_seed, {static_cast<std::uint64_t>(iter), 1});
    ahp.seed = derive_seed(doc.master_seed, {static_cast<std::uint64_t>(iter), 2});
    dhp.env = ahp.env = doc.env;
    const MixedStrategy att_mix = g.attacker_mixed();
    const MixedStrategy def_mix = g.defender_mixed();
    OracleResult oracles[2];
    parallel_for(2, doc.threads, [&](std::size_t i) {
      oracles[i] = i == 0 ? best_response(Player::Defender, att_mix, cfg, dhp)
                          : best_response(Player::Attacker, def_mix, cfg, ahp);
    });
    PureStrategy new_def = oracles[0].policy;
    PureStrategy new_att = oracles[1].policy;
    new_def.label = "defender-oracle-" + std::to_string(iter);
    new_att.label = "attacker-oracle-" + std::to_string(iter);
    res.training.push_back(oracles[0].metrics);
    res.training.push_back(oracles[1].metrics);

    // New row (new defender vs every attacker) and new column.
    const std::size_t nd = g.defenders.size();
    const std::size_t na = g.attackers.size();
    std::vector<UtilityEstimate> cells(na + nd);
    parallel_for(cells.size(), doc.threads, [&](std::size_t i) {
      cells[i] = i < na ? estimate(new_def, g.attackers[i]) : estimate(g.defenders[i - na], new_att);
    });

    const double var_value = detail::value_variance(g);
    double def_util = 0.0;
    double def_var = var_value;
    for (std::size_t j = 0; j < na; ++j) {
      def_util += g.sigma_att(static_cast<Eigen::Index>(j)) * cells[j].mean;
      def_var += std::pow(g.sigma_att(static_cast<Eigen::Index>(j)) * cells[j].std_error, 2);
    }
    double att_util = 0.0;  // defender sign
    double att_var = var_value;
    for (std::size_t i = 0; i < nd; ++i) {
      att_util += g.sigma_def(static_cast<Eigen::Index>(i)) * cells[na + i].mean;
      att_var += std::pow(g.sigma_def(static_cast<Eigen::Index>(i)) * cells[na + i].std_error, 2);
    }

    IterationRecord rec;
    rec.iteration = iter;
    rec.num_defenders = nd;
    rec.num_attackers = na;
    rec.value = g.value;
    rec.defender_gain = def_util - g.value;
    rec.attacker_gain = g.value - att_util;
    rec.defender_threshold = doc.delta >= 0.0 ? doc.delta : std::max(floor, std::sqrt(def_var));
    rec.attacker_threshold = doc.delta >= 0.0 ? doc.delta : std::max(floor, std::sqrt(att_var));
    rec.defender_added = rec.defender_gain > rec.defender_threshold;
    rec.attacker_added = rec.attacker_gain > rec.attacker_threshold;
    res.history.push_back(rec);
    if (progress) progress(rec);

    if (!rec.defender_added && !rec.attacker_added) {
      g.converged = true;
      return res;
    }

    const Eigen::Index rows = g.utility.rows() + (rec.defender_added ? 1 : 0);
    const Eigen::Index cols = g.utility.cols() + (rec.attacker_added ? 1 : 0);
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(rows, cols);
    Eigen::MatrixXd se = Eigen::MatrixXd::Zero(rows, cols);
    u.topLeftCorner(g.utility.rows(), g.utility.cols()) = g.utility;
    se.topLeftCorner(g.utility.rows(), g.utility.cols()) = g.std_error;
    if (rec.defender_added) {
      for (std::size_t j = 0; j < na; ++j) {
        u(rows - 1, static_cast<Eigen::Index>(j)) = cells[j].mean;
        se(rows - 1, static_cast<Eigen::Index>(j)) = cells[j].std_error;
      }
      g.defenders.push_back(new_def);
    }
    if (rec.attacker_added) {
      for (std::size_t i = 0; i < nd; ++i) {
        u(static_cast<Eigen::Index>(i), cols - 1) = cells[na + i].mean;
        se(static_cast<Eigen::Index>(i), cols - 1) = cells[na + i].std_error;
      }
      g.attackers.push_back(new_att);
    }
    if (rec.defender_added && rec.attacker_added) {
      const UtilityEstimate corner = estimate(new_def, new_att);
      u(rows - 1, cols - 1) = corner.mean;
      se(rows - 1, cols - 1) = corner.std_error;
    }
    g.utility = std::move(u);
    g.std_error = std::move(se);
  }
  g.hit_max_iterations = true;
  detail::solve_restricted(g);
  return res;
}

// ---------------------------------------------------------------------------
// Evaluation against adversary models

enum class AttackerModel { BestResponseOracle, Uniform, Greedy, None };

inline const char* to_string(AttackerModel m) {
  switch (m) {
    case AttackerModel::BestResponseOracle: return "oracle";
    case AttackerModel::Uniform: return "uniform";
    case AttackerModel::Greedy: return "greedy";
    case AttackerModel::None: return "none";
  }
  return "?";
}

inline AttackerModel attacker_model_from_string(const std::string& s) {
  if (s == "oracle") return AttackerModel::BestResponseOracle;
  if (s == "uniform") return AttackerModel::Uniform;
  if (s == "greedy") return AttackerModel::Greedy;
  if (s == "none") return AttackerModel::None;
  throw std::invalid_argument("unknown attacker model: " + s);
}

struct EvalConfig {
  int seeds = 1;
  int rollouts = 200;
  int horizon = 400;
  OracleHyperparams attacker_hp;
  std::uint64_t seed = 0;
  int threads = 1;
  StepOptions env;
};

struct MatchupResult {
  double mean_loss = 0.0;
  double ci95 = 0.0;
  int seeds = 0;
  std::vector<double> per_seed_loss;
};

/// Defender's expected loss (negated discounted return) against an
/// adversary model. defender_for_seed supplies the defender evaluated under
/// seed s, so a defender trained per seed shares the attacker and rollout
/// seeds of a fixed one. For the oracle model a best-response attacker is
/// trained against the defender first, once per seed.
inline MatchupResult evaluate_matchup(const std::function<MixedStrategy(int)>& defender_for_seed,
                                      AttackerModel model, const ScenarioConfig& cfg,
                                      const EvalConfig& ec) {
  if (ec.seeds < 1) throw std::invalid_argument("evaluation needs at least one seed");
  MatchupResult out;
  out.seeds = ec.seeds;
  std::vector<UtilityEstimate> per_seed(static_cast<std::size_t>(ec.seeds));
  for (int s = 0; s < ec.seeds; ++s) {
    const auto su = static_cast<std::uint64_t>(s);
    const MixedStrategy defender = defender_for_seed(s);
    validate(defender);
    PureStrategy attacker;
    switch (model) {
      case AttackerModel::Uniform: attacker = make_uniform_attacker(); break;
      case AttackerModel::Greedy: attacker = make_greedy_attacker(); break;
      case AttackerModel::None: attacker = make_noop(); break;
      case AttackerModel::BestResponseOracle: {
        OracleHyperparams hp = ec.attacker_hp;
        hp.seed = derive_seed(ec.seed, {su, 1});
        hp.env = ec.env;
        attacker = best_response(Player::Attacker, defender, cfg, hp).policy;
        attacker.label = "oracle";
        break;
      }
    }
    per_seed[su] = estimate_utility(defender, MixedStrategy::pure(attacker), cfg, ec.rollouts,
                                    ec.horizon, derive_seed(ec.seed, {su, 2}), ec.threads, ec.env);
  }
  for (const auto& e : per_seed) {
    out.per_seed_loss.push_back(-e.mean);
    out.mean_loss += -e.mean;
  }
  out.mean_loss /= ec.seeds;
  if (ec.seeds > 1) {
    double ss = 0.0;
    for (double x : out.per_seed_loss) ss += (x - out.mean_loss) * (x - out.mean_loss);
    out.ci95 = 1.96 * std::sqrt(ss / (ec.seeds - 1) / ec.seeds);
  } else {
    out.ci95 = 1.96 * per_seed[0].std_error;
  }
  if (out.mean_loss == 0.0) out.mean_loss = 0.0;  // no negative zero in output
  return out;
}

inline MatchupResult evaluate_matchup(const MixedStrategy& defender, AttackerModel model,
                                      const ScenarioConfig& cfg, const EvalConfig& ec) {
  validate(defender);
  return evaluate_matchup([&](int) { return defender; }, model, cfg, ec);
}

}  // namespace triage
