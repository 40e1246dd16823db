#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "toy_game.hpp"
#include "triage/double_oracle.hpp"
#include "triage/scenario.hpp"

namespace triage {
namespace {

DoubleOracleConfig quick_config(const ScenarioConfig& cfg, std::uint64_t seed) {
  DoubleOracleConfig doc = default_double_oracle_config(cfg);
  doc.defender_hp.episodes = doc.attacker_hp.episodes = 20;
  doc.defender_hp.steps = doc.attacker_hp.steps = 60;
  doc.rollouts = 40;
  doc.eval_horizon = 60;
  doc.max_iterations = 4;
  doc.master_seed = seed;
  return doc;
}

void expect_distribution(const Eigen::VectorXd& p, std::size_t size) {
  ASSERT_EQ(static_cast<std::size_t>(p.size()), size);
  EXPECT_GE(p.minCoeff(), 0.0);
  EXPECT_NEAR(p.sum(), 1.0, 1e-9);
}

// ---------------------------------------------------------------------------
// estimate_utility

TEST(EstimateUtility, NoOpAttackerCostsNothing) {
  const ScenarioConfig cfg = builtin_fraud();
  for (const PureStrategy& d : {make_uniform_defender(), make_priority_defender(cfg), make_noop()}) {
    const UtilityEstimate e = estimate_utility(d, make_noop(), cfg, 50, 100, 1);
    EXPECT_EQ(e.mean, 0.0);
    EXPECT_EQ(e.std_error, 0.0);
  }
}

TEST(EstimateUtility, DeterministicScenarioHasNoSpread) {
  // Greedy mounts attack 0 every period; half an inspection buys nothing.
  ScenarioConfig cfg = toy::scenario();
  cfg.defense_budget = 0.5;
  const int horizon = 30;
  const UtilityEstimate e = estimate_utility(make_priority_defender(cfg), make_greedy_attacker(), cfg, 25, horizon, 4);
  double expected = 0.0;
  for (int k = 1; k < horizon; ++k) expected -= 10.0 * std::pow(cfg.discount, k);
  EXPECT_NEAR(e.mean, expected, 1e-9);
  EXPECT_EQ(e.std_error, 0.0);
}

TEST(EstimateUtility, ReproducibleToTheBitAcrossThreads) {
  const ScenarioConfig cfg = builtin_fraud();
  const UtilityEstimate a = estimate_utility(make_uniform_defender(), make_greedy_attacker(), cfg, 200, 400, 77);
  const UtilityEstimate b = estimate_utility(make_uniform_defender(), make_greedy_attacker(), cfg, 200, 400, 77);
  const UtilityEstimate c = estimate_utility(make_uniform_defender(), make_greedy_attacker(), cfg, 200, 400, 77, 3);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_EQ(a.mean, c.mean);
  EXPECT_EQ(a.std_error, c.std_error);
  EXPECT_GT(a.std_error, 0.0);
  EXPECT_THROW(estimate_utility(make_uniform_defender(), make_greedy_attacker(), cfg, 0, 10, 1), std::invalid_argument);
}

TEST(EstimateUtility, MixedDefenderIsResampledPerEpisode) {
  const ScenarioConfig cfg = builtin_fraud();
  const PureStrategy uni = make_uniform_defender();
  const PureStrategy pri = make_priority_defender(cfg);
  const UtilityEstimate eu = estimate_utility(uni, make_greedy_attacker(), cfg, 2000, 50, 5);
  const UtilityEstimate ep = estimate_utility(pri, make_greedy_attacker(), cfg, 2000, 50, 6);
  const UtilityEstimate em = estimate_utility(MixedStrategy{{uni, pri}, {0.5, 0.5}},
                                              MixedStrategy::pure(make_greedy_attacker()), cfg, 2000, 50, 7);
  const double mid = 0.5 * (eu.mean + ep.mean);
  // Per-episode mixing adds the spread between the two pure means.
  const double se = std::sqrt(0.25 * (eu.std_error * eu.std_error + ep.std_error * ep.std_error) +
                              0.25 * std::pow(eu.mean - ep.mean, 2) / 2000.0 + em.std_error * em.std_error);
  EXPECT_NEAR(em.mean, mid, 4.0 * se);
}

// ---------------------------------------------------------------------------
// run_double_oracle

TEST(DoubleOracle, ZeroAttackBudgetStopsAtOnce) {
  ScenarioConfig cfg = builtin_fraud();
  cfg.attack_budget = 0.0;
  const DoubleOracleResult r = run_double_oracle(cfg, quick_config(cfg, 1));
  EXPECT_EQ(r.game.iterations, 1);
  EXPECT_TRUE(r.game.converged);
  EXPECT_EQ(r.game.value, 0.0);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_FALSE(r.history[0].defender_added);
  EXPECT_FALSE(r.history[0].attacker_added);
}

TEST(DoubleOracle, ToyGameMatchesEnumeratedEquilibrium) {
  const ScenarioConfig cfg = toy::scenario();
  const toy::Enumerated exact = toy::enumerate(cfg);
  EXPECT_NEAR(exact.value, -0.25 * 8.0 * cfg.discount, 1e-9);
  DoubleOracleConfig doc = default_double_oracle_config(cfg);
  doc.defender_hp.episodes = doc.attacker_hp.episodes = 100;
  doc.defender_hp.steps = doc.attacker_hp.steps = 50;
  doc.rollouts = 2000;
  doc.master_seed = 0;
  const DoubleOracleResult r = run_double_oracle(cfg, doc);
  EXPECT_TRUE(r.game.converged);
  const double se = std::sqrt(detail::value_variance(r.game));
  EXPECT_NEAR(r.game.value, exact.value, 3.0 * se);
}

TEST(DoubleOracle, ReproducibleAndThreadIndependent) {
  const ScenarioConfig cfg = builtin_fraud();
  DoubleOracleConfig doc = quick_config(cfg, 3);
  const DoubleOracleResult a = run_double_oracle(cfg, doc);
  doc.threads = 3;
  const DoubleOracleResult b = run_double_oracle(cfg, doc);
  EXPECT_EQ(a.game.utility, b.game.utility);
  EXPECT_EQ(a.game.std_error, b.game.std_error);
  EXPECT_EQ(a.game.sigma_def, b.game.sigma_def);
  EXPECT_EQ(a.game.sigma_att, b.game.sigma_att);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].value, b.history[i].value);
    EXPECT_EQ(a.history[i].defender_gain, b.history[i].defender_gain);
    EXPECT_EQ(a.history[i].attacker_gain, b.history[i].attacker_gain);
  }
}

TEST(DoubleOracle, StoredEntriesEqualFreshEstimates) {
  const ScenarioConfig cfg = builtin_fraud();
  const DoubleOracleConfig doc = quick_config(cfg, 4);
  const DoubleOracleResult r = run_double_oracle(cfg, doc);
  const RestrictedGame& g = r.game;
  ASSERT_EQ(static_cast<std::size_t>(g.utility.rows()), g.defenders.size());
  ASSERT_EQ(static_cast<std::size_t>(g.utility.cols()), g.attackers.size());
  const std::uint64_t seed = derive_seed(doc.master_seed, {detail::kUtilityStream});
  for (std::size_t i = 0; i < g.defenders.size(); ++i)
    for (std::size_t j = 0; j < g.attackers.size(); ++j) {
      const UtilityEstimate e = estimate_utility(g.defenders[i], g.attackers[j], cfg, doc.rollouts, doc.eval_horizon, seed);
      EXPECT_EQ(g.utility(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), e.mean);
      EXPECT_EQ(g.std_error(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), e.std_error);
    }
}

TEST(DoubleOracle, ResultIsConsistent) {
  const ScenarioConfig cfg = builtin_fraud();
  const DoubleOracleResult r = run_double_oracle(cfg, quick_config(cfg, 5));
  const RestrictedGame& g = r.game;
  expect_distribution(g.sigma_def, g.defenders.size());
  expect_distribution(g.sigma_att, g.attackers.size());
  EXPECT_NEAR(g.value, g.sigma_def.dot(g.utility * g.sigma_att), 1e-9);
  EXPECT_EQ(static_cast<int>(r.history.size()), g.iterations);
  EXPECT_EQ(r.training.size(), 2 * r.history.size());
  EXPECT_NE(g.converged, g.hit_max_iterations);
  EXPECT_EQ(g.defenders.front().label, "uniform");
  EXPECT_EQ(g.attackers.front().label, "uniform");
  for (const auto& rec : r.history) {
    EXPECT_EQ(rec.defender_added, rec.defender_gain > rec.defender_threshold);
    EXPECT_EQ(rec.attacker_added, rec.attacker_gain > rec.attacker_threshold);
    EXPECT_GE(rec.defender_threshold, 1e-3 * 16.0);
  }
  if (g.converged) {
    EXPECT_FALSE(r.history.back().defender_added);
    EXPECT_FALSE(r.history.back().attacker_added);
  }
}

TEST(DoubleOracle, IterationCapIsFlaggedNotThrown) {
  const ScenarioConfig cfg = builtin_fraud();
  DoubleOracleConfig doc = quick_config(cfg, 6);
  doc.max_iterations = 1;
  doc.delta = 0.0;
  const DoubleOracleResult r = run_double_oracle(cfg, doc);
  EXPECT_EQ(r.game.iterations, 1);
  const bool improved = r.history[0].defender_added || r.history[0].attacker_added;
  EXPECT_EQ(r.game.hit_max_iterations, improved);
  EXPECT_EQ(r.game.converged, !improved);
  expect_distribution(r.game.sigma_def, r.game.defenders.size());
  expect_distribution(r.game.sigma_att, r.game.attackers.size());
}

TEST(DoubleOracle, RejectsBadConfig) {
  const ScenarioConfig cfg = builtin_fraud();
  DoubleOracleConfig doc = quick_config(cfg, 1);
  doc.rollouts = 0;
  EXPECT_THROW(run_double_oracle(cfg, doc), std::invalid_argument);
  doc = quick_config(cfg, 1);
  doc.max_iterations = 0;
  EXPECT_THROW(run_double_oracle(cfg, doc), std::invalid_argument);
}

TEST(RestrictedGame, ValueRisesAsDefenderPoliciesAreAdded) {
  // Exact toy matrix: adding rows with the columns fixed never lowers the value.
  const toy::Enumerated exact = toy::enumerate(toy::scenario(), 0.1);
  double previous = -1e300;
  for (Eigen::Index rows = 1; rows <= exact.utility.rows(); ++rows) {
    const double v = solve_zero_sum(Eigen::MatrixXd(exact.utility.topRows(rows))).value;
    EXPECT_GE(v, previous - 1e-9);
    previous = v;
  }
  EXPECT_NEAR(previous, exact.value, 1e-6);

  // Monte Carlo matrix with shared seeds: same property, same columns.
  const ScenarioConfig cfg = builtin_fraud();
  const std::vector<PureStrategy> defenders{make_uniform_defender(), make_priority_defender(cfg), make_noop()};
  const std::vector<PureStrategy> attackers{make_uniform_attacker(), make_greedy_attacker()};
  Eigen::MatrixXd u(3, 2);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 2; ++j)
      u(i, j) = estimate_utility(defenders[static_cast<std::size_t>(i)], attackers[static_cast<std::size_t>(j)], cfg, 100, 100, 8).mean;
  double v1 = solve_zero_sum(Eigen::MatrixXd(u.topRows(1))).value;
  double v2 = solve_zero_sum(Eigen::MatrixXd(u.topRows(2))).value;
  double v3 = solve_zero_sum(u).value;
  EXPECT_GE(v2, v1 - 1e-9);
  EXPECT_GE(v3, v2 - 1e-9);
}

// ---------------------------------------------------------------------------
// evaluate_matchup

EvalConfig quick_eval(std::uint64_t seed) {
  EvalConfig ec;
  ec.seeds = 3;
  ec.rollouts = 50;
  ec.horizon = 100;
  ec.seed = seed;
  return ec;
}

TEST(EvaluateMatchup, NoAttackerMeansNoLoss) {
  const ScenarioConfig cfg = builtin_fraud();
  const MatchupResult m = evaluate_matchup(MixedStrategy::pure(make_uniform_defender()), AttackerModel::None, cfg, quick_eval(1));
  EXPECT_EQ(m.mean_loss, 0.0);
  EXPECT_EQ(m.ci95, 0.0);
  EXPECT_EQ(m.seeds, 3);
  EXPECT_FALSE(std::signbit(m.mean_loss));
}

TEST(EvaluateMatchup, PriorityAgainstGreedyIsDeterministic) {
  const ScenarioConfig cfg = builtin_fraud();
  const MixedStrategy pri = MixedStrategy::pure(make_priority_defender(cfg));
  const MatchupResult a = evaluate_matchup(pri, AttackerModel::Greedy, cfg, quick_eval(2));
  const MatchupResult b = evaluate_matchup(pri, AttackerModel::Greedy, cfg, quick_eval(2));
  EXPECT_EQ(a.mean_loss, b.mean_loss);
  EXPECT_EQ(a.per_seed_loss, b.per_seed_loss);
  EXPECT_GT(a.mean_loss, 0.0);
}

TEST(EvaluateMatchup, UniformAgainstUniformRegressionAnchor) {
  const ScenarioConfig cfg = builtin_fraud();
  EvalConfig ec;
  ec.seeds = 5;
  ec.rollouts = 200;
  ec.horizon = 400;
  ec.seed = 2024;
  const MatchupResult m = evaluate_matchup(MixedStrategy::pure(make_uniform_defender()), AttackerModel::Uniform, cfg, ec);
  // Pinned from the first verified run, to 9 significant digits.
  EXPECT_NEAR(m.mean_loss, 178.904883, 1e-6);
}

TEST(EvaluateMatchup, OracleAttackerIsTrainedPerSeed) {
  const ScenarioConfig cfg = builtin_fraud();
  EvalConfig ec = quick_eval(3);
  ec.seeds = 2;
  ec.attacker_hp = default_hyperparams(cfg);
  ec.attacker_hp.episodes = 10;
  ec.attacker_hp.steps = 60;
  int calls = 0;
  const MatchupResult m = evaluate_matchup(
      [&](int s) {
        EXPECT_EQ(s, calls++);
        return MixedStrategy::pure(make_uniform_defender());
      },
      AttackerModel::BestResponseOracle, cfg, ec);
  EXPECT_EQ(calls, 2);
  ASSERT_EQ(m.per_seed_loss.size(), 2u);
  EXPECT_NE(m.per_seed_loss[0], m.per_seed_loss[1]);
  EXPECT_GT(m.ci95, 0.0);
}

TEST(EvaluateMatchup, ModelNames) {
  for (AttackerModel m : {AttackerModel::BestResponseOracle, AttackerModel::Uniform, AttackerModel::Greedy, AttackerModel::None})
    EXPECT_EQ(attacker_model_from_string(to_string(m)), m);
  EXPECT_THROW(attacker_model_from_string("random"), std::invalid_argument);
}

}  // namespace
}  // namespace triage
