#pragma once

// Game configuration: alert types, attacks, trigger and false-alarm
// distributions, budgets. Loaded from and saved to `.scn` documents (JSON).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace triage {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AlertType {
  int id = 0;
  std::string name;
  double cost = 1.0;                  // C_t
  std::optional<int> priority;        // static IDS priority, 1 = highest
  std::optional<double> benign_rate;  // only consumed by pruning

  bool operator==(const AlertType&) const = default;
};

struct Attack {
  int id = 0;
  std::string name;
  double cost = 0.0;  // E_a
  double loss = 0.0;  // L_a

  bool operator==(const Attack&) const = default;
};

struct Deterministic {
  std::int64_t count = 0;
  bool operator==(const Deterministic&) const = default;
};

struct Bernoulli {
  double p = 0.0;
  bool operator==(const Bernoulli&) const = default;
};

// General count table: probs[n] = P(count == n).
struct Categorical {
  std::vector<double> probs;
  bool operator==(const Categorical&) const = default;
};

using TriggerDist = std::variant<Deterministic, Bernoulli, Categorical>;

inline double mean_count(const TriggerDist& d) {
  return std::visit(
      [](const auto& v) -> double {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, Deterministic>) {
          return static_cast<double>(v.count);
        } else if constexpr (std::is_same_v<V, Bernoulli>) {
          return v.p;
        } else {
          double m = 0.0;
          for (std::size_t n = 0; n < v.probs.size(); ++n) m += static_cast<double>(n) * v.probs[n];
          return m;
        }
      },
      d);
}

/// True when the distribution puts positive mass on counts >= 1.
inline bool can_trigger(const TriggerDist& d) {
  return std::visit(
      [](const auto& v) -> bool {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, Deterministic>) {
          return v.count > 0;
        } else if constexpr (std::is_same_v<V, Bernoulli>) {
          return v.p > 0.0;
        } else {
          for (std::size_t n = 1; n < v.probs.size(); ++n)
            if (v.probs[n] > 0.0) return true;
          return false;
        }
      },
      d);
}

struct ScenarioConfig {
  std::string name;
  std::vector<AlertType> alert_types;
  std::vector<Attack> attacks;
  std::vector<TriggerDist> trigger;  // row-major |A| x |T|
  std::vector<double> false_alarm_means;
  double defense_budget = 0.0;
  double attack_budget = 0.0;
  double discount = 0.95;
  int horizon = 400;
  std::vector<double> obs_scale;

  std::size_t num_types() const { return alert_types.size(); }
  std::size_t num_attacks() const { return attacks.size(); }

  const TriggerDist& trigger_at(std::size_t a, std::size_t t) const {
    return trigger[a * num_types() + t];
  }

  bool operator==(const ScenarioConfig&) const = default;
};

inline std::vector<double> default_obs_scale(const std::vector<double>& means) {
  std::vector<double> out(means.size());
  std::transform(means.begin(), means.end(), out.begin(),
                 [](double m) { return std::max(1.0, m); });
  return out;
}

namespace detail {

inline void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ScenarioError("invalid scenario field '" + field + "': " + what);
}

inline bool nonneg_finite(double x) { return std::isfinite(x) && x >= 0.0; }

}  // namespace detail

inline void validate(const ScenarioConfig& cfg) {
  using detail::nonneg_finite;
  using detail::require;
  const std::size_t nt = cfg.num_types();
  const std::size_t na = cfg.num_attacks();
  require(nt >= 1, "alert_types", "at least one alert type required");
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& at = cfg.alert_types[t];
    const std::string f = "alert_types[" + std::to_string(t) + "]";
    require(at.id == static_cast<int>(t), f + ".id", "ids must be dense and ordered (expected " +
                                                         std::to_string(t) + ")");
    require(nonneg_finite(at.cost), f + ".cost", "must be finite and >= 0");
    if (at.benign_rate)
      require(*at.benign_rate >= 0.0 && *at.benign_rate <= 1.0, f + ".benign_rate",
              "must lie in [0,1]");
    if (at.priority) require(*at.priority >= 1 && *at.priority <= 255, f + ".priority",
                             "must lie in [1,255]");
  }
  for (std::size_t a = 0; a < na; ++a) {
    const auto& ak = cfg.attacks[a];
    const std::string f = "attacks[" + std::to_string(a) + "]";
    require(ak.id == static_cast<int>(a), f + ".id", "ids must be dense and ordered (expected " +
                                                         std::to_string(a) + ")");
    require(nonneg_finite(ak.cost), f + ".cost", "must be finite and >= 0");
    require(nonneg_finite(ak.loss), f + ".loss", "must be finite and >= 0");
  }
  require(cfg.trigger.size() == na * nt, "trigger", "must have |A| rows of |T| entries");
  for (std::size_t i = 0; i < cfg.trigger.size(); ++i) {
    const std::string f = "trigger[" + std::to_string(i / std::max<std::size_t>(nt, 1)) + "][" +
                          std::to_string(i % std::max<std::size_t>(nt, 1)) + "]";
    std::visit(
        [&](const auto& v) {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, Deterministic>) {
            require(v.count >= 0, f, "deterministic count must be >= 0");
          } else if constexpr (std::is_same_v<V, Bernoulli>) {
            require(v.p >= 0.0 && v.p <= 1.0, f, "bernoulli probability must lie in [0,1]");
          } else {
            require(!v.probs.empty(), f, "count table must be non-empty");
            double s = 0.0;
            for (double p : v.probs) {
              require(p >= 0.0 && p <= 1.0, f, "count table entries must lie in [0,1]");
              s += p;
            }
            require(std::abs(s - 1.0) <= 1e-9, f, "count table must sum to 1");
          }
        },
        cfg.trigger[i]);
  }
  require(cfg.false_alarm_means.size() == nt, "false_alarm_means", "must have |T| entries");
  for (double m : cfg.false_alarm_means)
    require(nonneg_finite(m), "false_alarm_means", "must be finite and >= 0");
  require(nonneg_finite(cfg.defense_budget), "defense_budget", "must be finite and >= 0");
  require(nonneg_finite(cfg.attack_budget), "attack_budget", "must be finite and >= 0");
  require(cfg.discount > 0.0 && cfg.discount < 1.0, "discount", "must lie strictly in (0,1)");
  require(cfg.horizon >= 1, "horizon", "must be >= 1");
  require(cfg.obs_scale.size() == nt, "obs_scale", "must have |T| entries");
  for (double s : cfg.obs_scale)
    require(std::isfinite(s) && s > 0.0, "obs_scale", "must be finite and > 0");
}

// ---------------------------------------------------------------------------
// Document format

using ordered_json = nlohmann::ordered_json;

inline ordered_json trigger_to_json(const TriggerDist& d) {
  return std::visit(
      [](const auto& v) -> ordered_json {
        using V = std::decay_t<decltype(v)>;
        ordered_json j = ordered_json::object();
        if constexpr (std::is_same_v<V, Deterministic>) {
          j["deterministic"] = v.count;
        } else if constexpr (std::is_same_v<V, Bernoulli>) {
          j["bernoulli"] = v.p;
        } else {
          j["table"] = v.probs;
        }
        return j;
      },
      d);
}

inline TriggerDist trigger_from_json(const ordered_json& j, const std::string& field) {
  detail::require(j.is_object() && j.size() == 1, field,
                  "expected one of {\"deterministic\": n}, {\"bernoulli\": p}, {\"table\": [...]}");
  if (j.contains("deterministic")) return Deterministic{j.at("deterministic").get<std::int64_t>()};
  if (j.contains("bernoulli")) return Bernoulli{j.at("bernoulli").get<double>()};
  if (j.contains("table")) return Categorical{j.at("table").get<std::vector<double>>()};
  throw ScenarioError("invalid scenario field '" + field + "': unknown trigger family");
}

inline ordered_json to_json(const ScenarioConfig& cfg) {
  ordered_json j;
  j["name"] = cfg.name;
  j["alert_types"] = ordered_json::array();
  for (const auto& t : cfg.alert_types) {
    ordered_json e;
    e["id"] = t.id;
    e["name"] = t.name;
    e["cost"] = t.cost;
    if (t.priority) e["priority"] = *t.priority;
    if (t.benign_rate) e["benign_rate"] = *t.benign_rate;
    j["alert_types"].push_back(std::move(e));
  }
  j["attacks"] = ordered_json::array();
  for (const auto& a : cfg.attacks) {
    ordered_json e;
    e["id"] = a.id;
    e["name"] = a.name;
    e["cost"] = a.cost;
    e["loss"] = a.loss;
    j["attacks"].push_back(std::move(e));
  }
  j["trigger"] = ordered_json::array();
  for (std::size_t a = 0; a < cfg.num_attacks(); ++a) {
    ordered_json row = ordered_json::array();
    for (std::size_t t = 0; t < cfg.num_types(); ++t) row.push_back(trigger_to_json(cfg.trigger_at(a, t)));
    j["trigger"].push_back(std::move(row));
  }
  j["false_alarm_means"] = cfg.false_alarm_means;
  j["defense_budget"] = cfg.defense_budget;
  j["attack_budget"] = cfg.attack_budget;
  j["discount"] = cfg.discount;
  j["horizon"] = cfg.horizon;
  j["obs_scale"] = cfg.obs_scale;
  return j;
}

inline std::string serialize(const ScenarioConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

inline ScenarioConfig scenario_from_json(const ordered_json& j) {
  ScenarioConfig cfg;
  try {
    cfg.name = j.value("name", std::string{});
    for (const auto& e : j.at("alert_types")) {
      AlertType t;
      t.id = e.at("id").get<int>();
      t.name = e.at("name").get<std::string>();
      t.cost = e.at("cost").get<double>();
      if (e.contains("priority")) t.priority = e.at("priority").get<int>();
      if (e.contains("benign_rate")) t.benign_rate = e.at("benign_rate").get<double>();
      cfg.alert_types.push_back(std::move(t));
    }
    for (const auto& e : j.at("attacks")) {
      Attack a;
      a.id = e.at("id").get<int>();
      a.name = e.at("name").get<std::string>();
      a.cost = e.at("cost").get<double>();
      a.loss = e.at("loss").get<double>();
      cfg.attacks.push_back(std::move(a));
    }
    const auto& rows = j.at("trigger");
    detail::require(rows.is_array() && rows.size() == cfg.attacks.size(), "trigger",
                    "must have one row per attack");
    for (std::size_t a = 0; a < rows.size(); ++a) {
      detail::require(rows[a].is_array() && rows[a].size() == cfg.alert_types.size(),
                      "trigger[" + std::to_string(a) + "]", "must have one entry per alert type");
      for (std::size_t t = 0; t < rows[a].size(); ++t)
        cfg.trigger.push_back(trigger_from_json(
            rows[a][t], "trigger[" + std::to_string(a) + "][" + std::to_string(t) + "]"));
    }
    cfg.false_alarm_means = j.at("false_alarm_means").get<std::vector<double>>();
    cfg.defense_budget = j.at("defense_budget").get<double>();
    cfg.attack_budget = j.at("attack_budget").get<double>();
    cfg.discount = j.at("discount").get<double>();
    cfg.horizon = j.value("horizon", 400);
    cfg.obs_scale = j.contains("obs_scale") ? j.at("obs_scale").get<std::vector<double>>()
                                            : default_obs_scale(cfg.false_alarm_means);
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("malformed scenario document: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

inline ScenarioConfig parse_scenario(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(std::string("scenario parse failure: ") + e.what());
  }
  return scenario_from_json(j);
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

inline void save_scenario(const ScenarioConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ScenarioError("cannot write scenario file: " + path);
  out << serialize(cfg);
}

// ---------------------------------------------------------------------------
// Preprocessing

/// Probability that benign traffic raises at least one alert of type t.
/// Uses the explicit benign_rate when present, otherwise P(Poisson(lambda) >= 1).
inline double benign_trigger_rate(const ScenarioConfig& cfg, std::size_t t) {
  if (cfg.alert_types[t].benign_rate) return *cfg.alert_types[t].benign_rate;
  return -std::expm1(-cfg.false_alarm_means[t]);
}

struct PruneResult {
  ScenarioConfig config;
  double reserved_budget = 0.0;
  std::vector<int> pruned_types;    // ids in the raw config, always inspected
  std::vector<int> removed_attacks;  // ids in the raw config, always detected
};

/// Removes alert types that benign traffic triggers with rate <= epsilon.
/// Those alerts are inspected unconditionally; reserved_budget is their
/// expected inspection cost per period when every attack is mounted, and
/// the caller is expected to subtract it from the defense budget. Attacks
/// left with no remaining triggerable alert type are dropped. Ids are
/// renumbered densely.
inline PruneResult prune_always_inspect(const ScenarioConfig& raw, double epsilon) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  validate(raw);
  const std::size_t nt = raw.num_types();
  const std::size_t na = raw.num_attacks();

  std::vector<std::size_t> keep_t;
  PruneResult res;
  for (std::size_t t = 0; t < nt; ++t) {
    if (benign_trigger_rate(raw, t) <= epsilon) {
      res.pruned_types.push_back(static_cast<int>(t));
      double expected = raw.false_alarm_means[t];
      for (std::size_t a = 0; a < na; ++a) expected += mean_count(raw.trigger_at(a, t));
      res.reserved_budget += raw.alert_types[t].cost * expected;
    } else {
      keep_t.push_back(t);
    }
  }
  std::vector<std::size_t> keep_a;
  for (std::size_t a = 0; a < na; ++a) {
    bool visible = false;
    for (std::size_t t : keep_t) visible = visible || can_trigger(raw.trigger_at(a, t));
    if (visible) {
      keep_a.push_back(a);
    } else {
      res.removed_attacks.push_back(static_cast<int>(a));
    }
  }
  if (res.reserved_budget > raw.defense_budget)
    throw ScenarioError("pruning reserves " + std::to_string(res.reserved_budget) +
                        " which exceeds the defense budget " +
                        std::to_string(raw.defense_budget));

  ScenarioConfig& out = res.config;
  out.name = raw.name;
  out.defense_budget = raw.defense_budget;
  out.attack_budget = raw.attack_budget;
  out.discount = raw.discount;
  out.horizon = raw.horizon;
  for (std::size_t i = 0; i < keep_t.size(); ++i) {
    AlertType t = raw.alert_types[keep_t[i]];
    t.id = static_cast<int>(i);
    out.alert_types.push_back(std::move(t));
    out.false_alarm_means.push_back(raw.false_alarm_means[keep_t[i]]);
    out.obs_scale.push_back(raw.obs_scale[keep_t[i]]);
  }
  for (std::size_t i = 0; i < keep_a.size(); ++i) {
    Attack a = raw.attacks[keep_a[i]];
    a.id = static_cast<int>(i);
    out.attacks.push_back(std::move(a));
    for (std::size_t t : keep_t) out.trigger.push_back(raw.trigger_at(keep_a[i], t));
  }
  if (out.alert_types.empty()) throw ScenarioError("pruning removed every alert type");
  return res;
}

// ---------------------------------------------------------------------------
// Built-in case studies

namespace detail {

inline ScenarioConfig assemble(std::string name, const std::vector<std::string>& type_names,
                               const std::vector<std::optional<int>>& priorities,
                               const std::vector<std::string>& attack_names,
                               const std::vector<double>& attack_costs,
                               const std::vector<double>& losses,
                               std::vector<TriggerDist> trigger, std::vector<double> means,
                               double def_budget, double att_budget) {
  ScenarioConfig cfg;
  cfg.name = std::move(name);
  for (std::size_t t = 0; t < type_names.size(); ++t)
    cfg.alert_types.push_back(AlertType{static_cast<int>(t), type_names[t], 1.0,
                                        priorities.empty() ? std::nullopt : priorities[t],
                                        std::nullopt});
  for (std::size_t a = 0; a < attack_names.size(); ++a)
    cfg.attacks.push_back(Attack{static_cast<int>(a), attack_names[a], attack_costs[a], losses[a]});
  cfg.trigger = std::move(trigger);
  cfg.obs_scale = default_obs_scale(means);
  cfg.false_alarm_means = std::move(means);
  cfg.defense_budget = def_budget;
  cfg.attack_budget = att_budget;
  cfg.discount = 0.95;
  cfg.horizon = 400;
  return cfg;
}

inline std::vector<TriggerDist> bernoulli_rows(const std::vector<std::vector<double>>& p) {
  std::vector<TriggerDist> out;
  for (const auto& row : p)
    for (double x : row) out.emplace_back(Bernoulli{x});
  return out;
}

inline std::vector<TriggerDist> count_rows(const std::vector<std::vector<std::int64_t>>& c) {
  std::vector<TriggerDist> out;
  for (const auto& row : c)
    for (auto x : row) out.emplace_back(Deterministic{x});
  return out;
}

}  // namespace detail

/// Credit-card fraud case study after pruning: 3 alert types, 3 fraud types.
inline ScenarioConfig builtin_fraud() {
  return detail::assemble(
      "fraud", {"fraud-alert-1", "fraud-alert-2", "fraud-alert-3"}, {},
      {"fraud-1", "fraud-2", "fraud-3"}, {1.0, 3.0, 2.0}, {9.4, 12.1, 16.0},
      detail::bernoulli_rows({{0.9, 0.61, 0.0}, {0.09, 0.87, 0.12}, {0.0, 0.41, 0.85}}),
      {10.0, 47.0, 39.0}, 20.0, 2.0);
}

/// Suricata / CICIDS2017 intrusion-detection case study after pruning.
inline ScenarioConfig builtin_ids() {
  return detail::assemble(
      "ids",
      {"attempted-recon", "attempted-user", "bad-unknown", "misc-activity", "not-suspicious",
       "policy-violation", "protocol-command-decode"},
      {2, 1, 2, 3, 3, 1, 3},
      {"Brute Force", "Botnet", "DoS", "Heartbleed", "Infiltration", "PortScan", "Web Attack"},
      {120.0, 60.0, 74.0, 20.0, 52.0, 80.0, 62.0}, {3.6, 6.0, 4.0, 3.6, 1.4, 1.4, 2.7},
      detail::count_rows({{1230, 0, 0, 0, 0, 0, 0},
                          {0, 4, 2, 106, 0, 54, 0},
                          {0, 0, 0, 0, 0, 24, 0},
                          {0, 0, 4, 0, 10, 0, 0},
                          {710, 2, 862, 12, 0, 80, 600},
                          {138, 0, 320, 30, 0, 0, 0},
                          {0, 0, 6, 0, 0, 0, 0}}),
      {7200.0, 44100.0, 1600.0, 7300.0, 17400.0, 4000.0, 10200.0}, 1000.0, 120.0);
}

/// Fraud case study before pruning: six alert types and six fraud clusters.
/// Types 4-6 never fire on genuine transactions; clusters 4-6 raise only
/// those alerts (modelled as one certain alert each).
inline ScenarioConfig builtin_fraud_raw() {
  auto cfg = detail::assemble(
      "fraud-raw",
      {"fraud-alert-1", "fraud-alert-2", "fraud-alert-3", "fraud-alert-4", "fraud-alert-5",
       "fraud-alert-6"},
      {}, {"fraud-1", "fraud-2", "fraud-3", "fraud-4", "fraud-5", "fraud-6"},
      {1.0, 3.0, 2.0, 1.0, 1.0, 1.0}, {9.4, 12.1, 16.0, 1.0, 1.0, 1.0},
      detail::bernoulli_rows({{0.9, 0.61, 0.0, 0.0, 0.0, 0.0},
                              {0.09, 0.87, 0.12, 0.0, 0.0, 0.0},
                              {0.0, 0.41, 0.85, 0.0, 0.0, 0.0},
                              {0.0, 0.0, 0.0, 1.0, 0.0, 0.0},
                              {0.0, 0.0, 0.0, 0.0, 1.0, 0.0},
                              {0.0, 0.0, 0.0, 0.0, 0.0, 1.0}}),
      {10.0, 47.0, 39.0, 0.0, 0.0, 0.0}, 20.0, 2.0);
  return cfg;
}

/// IDS case study before pruning: the ten most common Suricata alert
/// classes and eight CICIDS2017 attack classes. DDoS raises no alerts.
inline ScenarioConfig builtin_ids_raw() {
  return detail::assemble(
      "ids-raw",
      {"attempted-recon", "attempted-user", "bad-unknown", "misc-activity", "not-suspicious",
       "policy-violation", "protocol-command-decode", "trojan-activity", "unsuccessful-user",
       "web-application-attack"},
      {2, 1, 2, 3, 3, 1, 3, 1, 1, 1},
      {"Brute Force", "Botnet", "DDoS", "DoS", "Heartbleed", "Infiltration", "PortScan",
       "Web Attack"},
      {120.0, 60.0, 1.0, 74.0, 20.0, 52.0, 80.0, 62.0},
      {3.6, 6.0, 0.0, 4.0, 3.6, 1.4, 1.4, 2.7},
      detail::count_rows({{1230, 0, 0, 0, 0, 0, 0, 0, 0, 0},
                          {0, 4, 2, 106, 0, 54, 0, 0, 0, 0},
                          {0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
                          {0, 0, 0, 0, 0, 24, 0, 0, 0, 0},
                          {0, 0, 4, 0, 10, 0, 0, 0, 0, 0},
                          {710, 2, 862, 12, 0, 80, 600, 0, 0, 0},
                          {138, 0, 320, 30, 0, 0, 0, 0, 0, 0},
                          {0, 0, 6, 0, 0, 0, 0, 0, 0, 0}}),
      {7200.0, 44100.0, 1600.0, 7300.0, 17400.0, 4000.0, 10200.0, 0.0, 0.0, 0.0}, 1000.0,
      120.0);
}

inline std::optional<ScenarioConfig> builtin_scenario(const std::string& name) {
  if (name == "fraud") return builtin_fraud();
  if (name == "ids") return builtin_ids();
  if (name == "fraud-raw") return builtin_fraud_raw();
  if (name == "ids-raw") return builtin_ids_raw();
  return std::nullopt;
}

}  // namespace triage
