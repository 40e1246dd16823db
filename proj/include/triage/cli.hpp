#pragma once

// Command-line front end: train, eval, solve and scenario utilities. Every
// CSV it writes depends only on the run manifest, never on --threads.

#include <bit>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "triage/bundle.hpp"
#include "triage/csv.hpp"
#include "triage/double_oracle.hpp"
#include "triage/matrix_game.hpp"
#include "triage/scenario.hpp"

namespace triage::cli {

inline constexpr const char* kVersion = "1.0.0";

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string out;
  int episodes = 500;
  int steps = 400;
  int rollouts = 200;
  std::optional<int> horizon;  // defaults to the scenario horizon
  std::vector<double> def_budgets;
  std::vector<double> att_budgets;
  std::optional<double> train_att_budget;
  int max_iterations = 30;
  double delta = -1.0;
  int threads = 1;
  bool carryover = false;
  // eval only
  std::string defender;
  std::vector<std::string> attackers{"oracle", "uniform", "greedy"};
  int seeds = 20;
};

namespace detail {

inline ScenarioConfig load_scenario_checked(const std::string& path) {
  if (path.empty()) throw UsageError("--scenario is required");
  if (!std::filesystem::is_regular_file(path)) throw UsageError("scenario file not found: " + path);
  return load_scenario(path);
}

inline int horizon_of(const RunOptions& o, const ScenarioConfig& cfg) {
  return o.horizon ? *o.horizon : cfg.horizon;
}

inline DoubleOracleConfig double_oracle_config(const RunOptions& o, const ScenarioConfig& cfg,
                                               std::uint64_t master_seed) {
  DoubleOracleConfig doc = default_double_oracle_config(cfg);
  doc.rollouts = o.rollouts;
  doc.eval_horizon = horizon_of(o, cfg);
  doc.delta = o.delta;
  doc.max_iterations = o.max_iterations;
  doc.defender_hp.episodes = doc.attacker_hp.episodes = o.episodes;
  doc.defender_hp.steps = doc.attacker_hp.steps = o.steps;
  doc.master_seed = master_seed;
  doc.threads = o.threads;
  doc.env.carryover = o.carryover;
  return doc;
}

inline nlohmann::ordered_json hyperparams_json(const OracleHyperparams& hp) {
  nlohmann::ordered_json j;
  j["episodes"] = hp.episodes;
  j["steps"] = hp.steps;
  j["policy_lr"] = hp.policy_lr;
  j["value_lr"] = hp.value_lr;
  j["discount"] = hp.discount;
  j["buffer_capacity"] = hp.buffer_capacity;
  j["batch_size"] = hp.batch_size;
  j["eps_start"] = hp.eps_start;
  j["eps_end"] = hp.eps_end;
  j["eps_decay_fraction"] = hp.eps_decay_fraction;
  j["policy_hidden"] = hp.policy_hidden;
  j["value_hidden"] = hp.value_hidden;
  j["reward_scale"] = hp.reward_scale;
  j["target_networks"] = hp.target_networks;
  return j;
}

inline nlohmann::ordered_json manifest(const std::string& subcommand, const RunOptions& o,
                                       const ScenarioConfig& cfg) {
  const DoubleOracleConfig doc = double_oracle_config(o, cfg, o.seed);
  nlohmann::ordered_json j;
  j["tool"] = "triage";
  j["version"] = kVersion;
  j["subcommand"] = subcommand;
  j["scenario_path"] = o.scenario;
  j["master_seed"] = o.seed;
  j["output_dir"] = o.out;
  nlohmann::ordered_json c;
  c["def_budget"] = o.def_budgets;
  c["att_budget"] = o.att_budgets;
  if (o.train_att_budget) c["train_att_budget"] = *o.train_att_budget;
  c["rollouts"] = doc.rollouts;
  c["horizon"] = doc.eval_horizon;
  c["max_iterations"] = doc.max_iterations;
  c["delta"] = doc.delta < 0.0 ? nlohmann::ordered_json("auto") : nlohmann::ordered_json(doc.delta);
  c["carryover"] = o.carryover;
  c["threads"] = o.threads;
  c["oracle"] = hyperparams_json(doc.defender_hp);
  if (subcommand == "eval") {
    c["defender"] = o.defender;
    c["attackers"] = o.attackers;
    c["seeds"] = o.seeds;
  }
  j["config"] = c;
  j["scenario"] = to_json(cfg);
  return j;
}

inline void write_manifest(const std::filesystem::path& dir, const nlohmann::ordered_json& m) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  out << m.dump(2) << "\n";
}

inline std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

inline void resolve_budgets(RunOptions& o, const ScenarioConfig& cfg) {
  if (o.def_budgets.empty()) o.def_budgets = {cfg.defense_budget};
  if (o.att_budgets.empty()) o.att_budgets = {cfg.attack_budget};
  for (double b : o.def_budgets)
    if (!(b >= 0.0)) throw UsageError("--def-budget must be >= 0");
  for (double d : o.att_budgets)
    if (!(d >= 0.0)) throw UsageError("--att-budget must be >= 0");
  if (o.train_att_budget && !(*o.train_att_budget >= 0.0))
    throw UsageError("--train-att-budget must be >= 0");
}

inline ScenarioConfig with_budgets(ScenarioConfig cfg, double b, double d) {
  cfg.defense_budget = b;
  cfg.attack_budget = d;
  return cfg;
}

inline std::string bool_cell(bool b) { return b ? "1" : "0"; }

}  // namespace detail

inline int cmd_train(RunOptions o, std::ostream& out, std::ostream& err) {
  if (o.out.empty()) throw UsageError("--out is required");
  const ScenarioConfig base = detail::load_scenario_checked(o.scenario);
  detail::resolve_budgets(o, base);
  if (o.def_budgets.size() != 1 || o.att_budgets.size() != 1)
    throw UsageError("train takes a single --def-budget and --att-budget");
  const ScenarioConfig cfg = detail::with_budgets(base, o.def_budgets[0], o.att_budgets[0]);
  validate(cfg);

  const std::filesystem::path dir(o.out);
  detail::write_manifest(dir, detail::manifest("train", o, cfg));

  std::ofstream iters = detail::open_csv(dir / "iterations.csv");
  csv::write_row(iters, {"iteration", "defenders", "attackers", "value", "defender_gain",
                         "defender_threshold", "attacker_gain", "attacker_threshold",
                         "defender_added", "attacker_added"});
  const DoubleOracleConfig doc = detail::double_oracle_config(o, cfg, o.seed);
  const DoubleOracleResult res = run_double_oracle(cfg, doc, [&](const IterationRecord& r) {
    csv::write_row(iters, {csv::number(r.iteration), csv::number(r.num_defenders),
                           csv::number(r.num_attackers), csv::number(r.value),
                           csv::number(r.defender_gain), csv::number(r.defender_threshold),
                           csv::number(r.attacker_gain), csv::number(r.attacker_threshold),
                           detail::bool_cell(r.defender_added), detail::bool_cell(r.attacker_added)});
    iters.flush();
    err << "iteration " << r.iteration << ": |D|=" << r.num_defenders
        << " |A|=" << r.num_attackers << " value=" << csv::number(r.value)
        << " defender_gain=" << csv::number(r.defender_gain)
        << " attacker_gain=" << csv::number(r.attacker_gain) << "\n";
  });

  std::ofstream training = detail::open_csv(dir / "training.csv");
  csv::write_row(training, {"oracle_call", "iteration", "player", "episode", "mean_reward",
                            "critic_loss", "epsilon"});
  for (std::size_t call = 0; call < res.training.size(); ++call) {
    const char* player = call % 2 == 0 ? "defender" : "attacker";
    for (const EpisodeMetrics& m : res.training[call])
      csv::write_row(training, {csv::number(call + 1), csv::number(call / 2 + 1), player,
                                csv::number(m.episode), csv::number(m.mean_reward),
                                csv::number(m.critic_loss), csv::number(m.epsilon)});
  }

  const RestrictedGame& g = res.game;
  UtilityMatrix u;
  u.values = g.utility;
  for (const auto& d : g.defenders) u.row_labels.push_back(d.label);
  for (const auto& a : g.attackers) u.col_labels.push_back(a.label);
  std::ofstream ucsv = detail::open_csv(dir / "utility.csv");
  csv::write_matrix(ucsv, u);

  save_bundle(bundle_from_game(g, cfg.name), dir / "strategies");

  out << (g.converged ? "converged" : "stopped at max iterations") << " after " << g.iterations
      << " iterations, value " << csv::number(g.value) << "\n";
  out << "defender mix:";
  for (Eigen::Index i = 0; i < g.sigma_def.size(); ++i)
    out << " " << g.defenders[static_cast<std::size_t>(i)].label << "=" << csv::number(g.sigma_def(i));
  out << "\nattacker mix:";
  for (Eigen::Index j = 0; j < g.sigma_att.size(); ++j)
    out << " " << g.attackers[static_cast<std::size_t>(j)].label << "=" << csv::number(g.sigma_att(j));
  out << "\n";
  return kOk;
}

inline int cmd_eval(RunOptions o, std::ostream& out, std::ostream& err) {
  const ScenarioConfig base = detail::load_scenario_checked(o.scenario);
  detail::resolve_budgets(o, base);
  if (o.seeds < 1) throw UsageError("--seeds must be >= 1");
  std::vector<AttackerModel> models;
  for (const auto& a : o.attackers) {
    try {
      models.push_back(attacker_model_from_string(a));
    } catch (const std::invalid_argument&) {
      throw UsageError("unknown attacker model: " + a + " (expected oracle, uniform, greedy or none)");
    }
  }
  enum class DefKind { Uniform, Priority, Arl, Bundle };
  DefKind kind;
  std::optional<StrategyBundle> bundle;
  if (o.defender == "uniform") {
    kind = DefKind::Uniform;
  } else if (o.defender == "priority") {
    kind = DefKind::Priority;
  } else if (o.defender == "arl") {
    kind = DefKind::Arl;
  } else if (!o.defender.empty() && std::filesystem::exists(o.defender)) {
    kind = DefKind::Bundle;
    bundle = load_bundle(o.defender);
  } else {
    throw UsageError("unknown defender: '" + o.defender +
                     "' (expected uniform, priority, arl or a strategy bundle path)");
  }
  const std::string def_label = kind == DefKind::Bundle ? "bundle" : o.defender;
  if (o.train_att_budget && kind != DefKind::Arl)
    throw UsageError("--train-att-budget only applies to --defender arl");

  std::ofstream file;
  if (!o.out.empty()) {
    const std::filesystem::path dir(o.out);
    detail::write_manifest(dir, detail::manifest("eval", o, base));
    file = detail::open_csv(dir / "eval.csv");
  }
  std::ostream& sink = o.out.empty() ? out : static_cast<std::ostream&>(file);
  csv::write_row(sink, {"defender", "attacker_model", "B", "D", "mean_loss", "ci95", "seeds"});

  for (double b : o.def_budgets) {
    for (double d : o.att_budgets) {
      const ScenarioConfig cfg = detail::with_budgets(base, b, d);
      validate(cfg);
      // Seeds follow the budget values, so a cell's result does not depend
      // on which other cells share the sweep.
      const std::uint64_t cell_seed =
          derive_seed(o.seed, {std::bit_cast<std::uint64_t>(b), std::bit_cast<std::uint64_t>(d)});
      EvalConfig ec;
      ec.seeds = o.seeds;
      ec.rollouts = o.rollouts;
      ec.horizon = detail::horizon_of(o, cfg);
      ec.attacker_hp = default_hyperparams(cfg);
      ec.attacker_hp.episodes = o.episodes;
      ec.attacker_hp.steps = o.steps;
      ec.seed = cell_seed;
      ec.threads = o.threads;
      ec.env.carryover = o.carryover;

      std::map<int, MixedStrategy> trained;
      auto defender_for_seed = [&](int s) -> MixedStrategy {
        switch (kind) {
          case DefKind::Uniform: return MixedStrategy::pure(make_uniform_defender());
          case DefKind::Priority: return MixedStrategy::pure(make_priority_defender(cfg));
          case DefKind::Bundle: return bundle->defender;
          case DefKind::Arl: break;
        }
        auto it = trained.find(s);
        if (it != trained.end()) return it->second;
        const ScenarioConfig train_cfg =
            detail::with_budgets(cfg, b, o.train_att_budget ? *o.train_att_budget : d);
        const DoubleOracleConfig doc = detail::double_oracle_config(
            o, train_cfg, derive_seed(cell_seed, {static_cast<std::uint64_t>(s), 0x61726c}));
        const DoubleOracleResult r = run_double_oracle(train_cfg, doc);
        err << "B=" << csv::number(b) << " D=" << csv::number(d) << " seed " << s
            << ": trained defender in " << r.game.iterations << " iterations, value "
            << csv::number(r.game.value) << "\n";
        return trained.emplace(s, r.game.defender_mixed()).first->second;
      };

      for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const MatchupResult m = evaluate_matchup(defender_for_seed, models[mi], cfg, ec);
        csv::write_row(sink, {def_label, to_string(models[mi]), csv::number(b), csv::number(d),
                              csv::number(m.mean_loss), csv::number(m.ci95), csv::number(m.seeds)});
        sink.flush();
      }
    }
  }
  return kOk;
}

inline int cmd_solve(const std::string& path, std::ostream& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("matrix file not found: " + path);
  const UtilityMatrix u = csv::read_matrix(in);
  const GameSolution s = solve_zero_sum(u);
  out << "value: " << csv::number(s.value) << "\n";
  out << "exploitability: " << csv::number(exploitability(u.values, s.defender, s.attacker)) << "\n";
  out << "defender:\n";
  for (Eigen::Index i = 0; i < s.defender.size(); ++i)
    out << "  " << u.row_labels[static_cast<std::size_t>(i)] << " " << csv::number(s.defender(i)) << "\n";
  out << "attacker:\n";
  for (Eigen::Index j = 0; j < s.attacker.size(); ++j)
    out << "  " << u.col_labels[static_cast<std::size_t>(j)] << " " << csv::number(s.attacker(j)) << "\n";
  return kOk;
}

inline int cmd_scenario_validate(const std::string& path, std::ostream& out) {
  const ScenarioConfig cfg = detail::load_scenario_checked(path);
  out << "ok: " << cfg.name << " (" << cfg.num_types() << " alert types, " << cfg.num_attacks()
      << " attacks, B=" << csv::number(cfg.defense_budget)
      << ", D=" << csv::number(cfg.attack_budget) << ")\n";
  return kOk;
}

inline int cmd_scenario_export(const std::string& name, const std::string& path, std::ostream& out) {
  const auto cfg = builtin_scenario(name);
  if (!cfg) throw UsageError("unknown built-in scenario: " + name + " (expected fraud, ids, fraud-raw or ids-raw)");
  if (path.empty()) {
    out << serialize(*cfg);
  } else {
    save_scenario(*cfg, path);
  }
  return kOk;
}

inline int cmd_scenario_prune(const std::string& path, double epsilon, const std::string& dest,
                              std::ostream& out) {
  const ScenarioConfig raw = detail::load_scenario_checked(path);
  PruneResult p = prune_always_inspect(raw, epsilon);
  p.config.defense_budget = std::max(0.0, raw.defense_budget - p.reserved_budget);
  if (dest.empty()) {
    out << serialize(p.config);
  } else {
    save_scenario(p.config, dest);
  }
  std::ostream& note = dest.empty() ? std::cerr : out;
  note << "pruned " << p.pruned_types.size() << " alert types, removed "
       << p.removed_attacks.size() << " attacks, reserved budget "
       << csv::number(p.reserved_budget) << "\n";
  return kOk;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Alert triage under adversarial attack: double-oracle training and evaluation",
               "triage"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RunOptions o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario, "Scenario file")->required();
    sub->add_option("--seed", o.seed, "Master seed")->capture_default_str();
    sub->add_option("--episodes", o.episodes, "Training episodes per oracle call")
        ->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--steps", o.steps, "Steps per training episode")
        ->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--rollouts", o.rollouts, "Monte Carlo rollouts per estimate")
        ->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--horizon", o.horizon, "Evaluation horizon (default: scenario horizon)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--def-budget", o.def_budgets, "Defense budget B (list for sweeps)")
        ->delimiter(',');
    sub->add_option("--att-budget", o.att_budgets, "Attack budget D (list for sweeps)")
        ->delimiter(',');
    sub->add_option("--max-iterations", o.max_iterations, "Double-oracle iteration cap")
        ->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--delta", o.delta, "Termination tolerance (negative: one standard error)")
        ->capture_default_str();
    sub->add_option("--threads", o.threads, "Worker threads")
        ->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_flag("--carryover", o.carryover, "Uninspected alerts stay queued");
  };

  auto* train = app.add_subcommand("train", "Run the double oracle and save the strategy bundle");
  add_common(train);
  train->add_option("--out", o.out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a defender against attacker models");
  add_common(eval);
  eval->add_option("--out", o.out, "Output directory (default: CSV to stdout)");
  eval->add_option("--defender", o.defender, "uniform, priority, arl or a strategy bundle path")
      ->required();
  eval->add_option("--attacker", o.attackers, "Attacker models: oracle, uniform, greedy, none")
      ->delimiter(',')->capture_default_str();
  eval->add_option("--seeds", o.seeds, "Independent seeds per cell")
      ->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--train-att-budget", o.train_att_budget,
                   "Attack budget the arl defender is trained against");

  std::string matrix_path;
  auto* solve = app.add_subcommand("solve", "Solve a zero-sum matrix game from CSV");
  solve->add_option("matrix", matrix_path, "Matrix CSV file")->required();

  auto* scenario = app.add_subcommand("scenario", "Scenario file utilities");
  scenario->require_subcommand(1);
  std::string scn_path, scn_name, scn_out;
  double epsilon = 0.0;
  auto* validate_cmd = scenario->add_subcommand("validate", "Check a scenario file");
  validate_cmd->add_option("path", scn_path, "Scenario file")->required();
  auto* export_cmd = scenario->add_subcommand("export", "Write a built-in scenario");
  export_cmd->add_option("name", scn_name, "fraud, ids, fraud-raw or ids-raw")->required();
  export_cmd->add_option("--out", scn_out, "Destination file (default: stdout)");
  auto* prune_cmd = scenario->add_subcommand("prune", "Remove always-inspected alert types");
  prune_cmd->add_option("path", scn_path, "Raw scenario file")->required();
  prune_cmd->add_option("--epsilon", epsilon, "Benign trigger-rate threshold")->required();
  prune_cmd->add_option("--out", scn_out, "Destination file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(o, out, err);
    if (*eval) return cmd_eval(o, out, err);
    if (*solve) return cmd_solve(matrix_path, out);
    if (*validate_cmd) return cmd_scenario_validate(scn_path, out);
    if (*export_cmd) return cmd_scenario_export(scn_name, scn_out, out);
    if (*prune_cmd) return cmd_scenario_prune(scn_path, epsilon, scn_out, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace triage::cli
