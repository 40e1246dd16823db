#pragma once

// Strategy bundles: a directory holding bundle.json (policy list, mixing
// probabilities, restricted-game value) plus one .net file per neural policy.

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "triage/double_oracle.hpp"
#include "triage/nn/checkpoint.hpp"
#include "triage/policy.hpp"

namespace triage {

class BundleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StrategyBundle {
  std::string scenario;
  double value = 0.0;
  MixedStrategy defender;
  MixedStrategy attacker;
};

namespace detail {

inline nlohmann::ordered_json pure_to_json(const PureStrategy& s, double weight,
                                           const std::filesystem::path& dir) {
  nlohmann::ordered_json j;
  j["label"] = s.label;
  j["weight"] = weight;
  std::visit(
      [&](const auto& v) {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, NeuralPolicy>) {
          const std::string file = s.label + ".net";
          j["kind"] = "neural";
          j["role"] = to_string(v.role);
          j["file"] = file;
          nn::save_mlp(*v.net, (dir / file).string());
        } else if constexpr (std::is_same_v<V, UniformDefender>) {
          j["kind"] = "uniform-defender";
        } else if constexpr (std::is_same_v<V, UniformAttacker>) {
          j["kind"] = "uniform-attacker";
        } else if constexpr (std::is_same_v<V, GreedyAttacker>) {
          j["kind"] = "greedy";
        } else if constexpr (std::is_same_v<V, StaticPriorityDefender>) {
          j["kind"] = "priority";
          j["order"] = v.order;
        } else {
          j["kind"] = "none";
        }
      },
      s.kind);
  return j;
}

inline PureStrategy pure_from_json(const nlohmann::json& j, const std::filesystem::path& dir) {
  const std::string kind = j.at("kind").get<std::string>();
  const std::string label = j.at("label").get<std::string>();
  PureStrategy s;
  if (kind == "neural") {
    const std::string role = j.at("role").get<std::string>();
    if (role != "defender" && role != "attacker") throw BundleError("unknown role: " + role);
    const auto path = dir / j.at("file").get<std::string>();
    auto net = std::make_shared<const nn::Mlp>(nn::load_mlp(path.string()));
    s = make_neural(std::move(net), role == "defender" ? Player::Defender : Player::Attacker, label);
  } else if (kind == "uniform-defender") {
    s = make_uniform_defender();
  } else if (kind == "uniform-attacker") {
    s = make_uniform_attacker();
  } else if (kind == "greedy") {
    s = make_greedy_attacker();
  } else if (kind == "priority") {
    s = {StaticPriorityDefender{j.at("order").get<std::vector<std::size_t>>()}, label};
  } else if (kind == "none") {
    s = make_noop();
  } else {
    throw BundleError("unknown strategy kind: " + kind);
  }
  s.label = label;
  return s;
}

inline MixedStrategy mixed_from_json(const nlohmann::json& arr, const std::filesystem::path& dir,
                                     const char* side) {
  if (!arr.is_array() || arr.empty()) throw BundleError(std::string("bundle has no ") + side + " strategies");
  MixedStrategy m;
  for (const auto& e : arr) {
    m.pures.push_back(pure_from_json(e, dir));
    m.weights.push_back(e.at("weight").get<double>());
  }
  try {
    validate(m);
  } catch (const std::invalid_argument& e) {
    throw BundleError(std::string(side) + " weights: " + e.what());
  }
  return m;
}

}  // namespace detail

/// Writes bundle.json and the network files into dir (created if needed).
inline void save_bundle(const StrategyBundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json j;
  j["scenario"] = b.scenario;
  j["value"] = b.value;
  j["defender"] = nlohmann::ordered_json::array();
  j["attacker"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < b.defender.pures.size(); ++i)
    j["defender"].push_back(detail::pure_to_json(b.defender.pures[i], b.defender.weights[i], dir));
  for (std::size_t i = 0; i < b.attacker.pures.size(); ++i)
    j["attacker"].push_back(detail::pure_to_json(b.attacker.pures[i], b.attacker.weights[i], dir));
  std::ofstream out(dir / "bundle.json", std::ios::binary);
  if (!out) throw BundleError("cannot write " + (dir / "bundle.json").string());
  out << j.dump(2) << "\n";
}

inline StrategyBundle bundle_from_game(const RestrictedGame& g, const std::string& scenario) {
  return {scenario, g.value, g.defender_mixed(), g.attacker_mixed()};
}

/// Accepts a run directory, its strategies/ directory, or bundle.json itself.
inline StrategyBundle load_bundle(const std::filesystem::path& where) {
  std::filesystem::path file = where;
  if (std::filesystem::is_directory(file)) {
    file = std::filesystem::exists(where / "bundle.json") ? where / "bundle.json"
                                                          : where / "strategies" / "bundle.json";
  }
  std::ifstream in(file, std::ios::binary);
  if (!in) throw BundleError("cannot open strategy bundle: " + where.string());
  StrategyBundle b;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    const auto dir = file.parent_path();
    b.scenario = j.at("scenario").get<std::string>();
    b.value = j.at("value").get<double>();
    b.defender = detail::mixed_from_json(j.at("defender"), dir, "defender");
    b.attacker = detail::mixed_from_json(j.at("attacker"), dir, "attacker");
  } catch (const nlohmann::json::exception& e) {
    throw BundleError("malformed strategy bundle " + file.string() + ": " + e.what());
  }
  return b;
}

}  // namespace triage
