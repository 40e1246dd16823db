#pragma once

// Actor-critic best-response oracle. The opponent's mixed strategy is part
// of the environment: one of its pure strategies is drawn per episode.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "triage/env.hpp"
#include "triage/nn/adam.hpp"
#include "triage/nn/mlp.hpp"
#include "triage/nn/replay_buffer.hpp"
#include "triage/policy.hpp"
#include "triage/random.hpp"

namespace triage {

struct OracleHyperparams {
  int episodes = 500;
  int steps = 400;
  double policy_lr = 0.001;
  double value_lr = 0.002;
  double discount = 0.95;
  std::size_t buffer_capacity = 40000;
  std::size_t batch_size = 64;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_decay_fraction = 0.5;  // share of training spent annealing
  std::uint64_t seed = 0;
  int policy_hidden = 16;
  int value_hidden = 32;
  double reward_scale = 1.0;  // multiplies rewards before they reach the critic
  bool target_networks = false;
  double target_rate = 0.01;  // soft-update rate when target networks are on
  bool relu_value_output = false;
  StepOptions env;
};

/// Layer widths per case-study size: 16/32 for small alert sets, 32/64 for
/// IDS-sized ones.
inline OracleHyperparams default_hyperparams(const ScenarioConfig& cfg) {
  OracleHyperparams hp;
  hp.discount = cfg.discount;
  hp.steps = cfg.horizon;
  if (cfg.num_types() > 4) {
    hp.policy_hidden = 32;
    hp.value_hidden = 64;
  }
  return hp;
}

inline void validate(const OracleHyperparams& hp) {
  if (hp.episodes < 1 || hp.steps < 1) throw std::invalid_argument("episodes and steps must be >= 1");
  if (!(hp.policy_lr > 0.0) || !(hp.value_lr > 0.0))
    throw std::invalid_argument("learning rates must be > 0");
  if (!(hp.discount > 0.0 && hp.discount < 1.0))
    throw std::invalid_argument("discount must lie in (0,1)");
  if (!(hp.eps_start >= 0.0 && hp.eps_start <= 1.0 && hp.eps_end >= 0.0 && hp.eps_end <= 1.0))
    throw std::invalid_argument("exploration rates must lie in [0,1]");
  if (hp.batch_size < 1 || hp.buffer_capacity < 1)
    throw std::invalid_argument("batch size and buffer capacity must be >= 1");
}

/// The relaxed action the critic sees: raw network outputs scaled onto the
/// budget face, p = raw * min(1, budget / (w . raw)). For the defender these
/// are budget fractions (w = 1, budget = 1); for the attacker, execution
/// probabilities (w = E, budget = D). Raw outputs along one ray past the
/// budget face map to the same p.
struct ActionProjection {
  nn::Vector weight;
  double budget = 1.0;

  nn::Matrix apply(const nn::Matrix& raw) const {
    nn::Matrix p = raw.cwiseMax(0.0).cwiseMin(1.0);
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      const double cost = weight.dot(p.col(c));
      if (cost > budget) p.col(c) *= budget / cost;
    }
    return p;
  }

  /// Vector-Jacobian product: maps d/dp to d/d(raw) at each column of raw.
  nn::Matrix pullback(const nn::Matrix& raw, const nn::Matrix& grad) const {
    nn::Matrix out = grad;
    for (Eigen::Index c = 0; c < raw.cols(); ++c) {
      const nn::Vector r = raw.col(c).cwiseMax(0.0).cwiseMin(1.0);
      const double cost = weight.dot(r);
      if (cost > budget) {
        const double s = budget / cost;
        out.col(c) = s * (grad.col(c) - weight * (r.dot(grad.col(c)) / cost));
      }
      for (Eigen::Index i = 0; i < raw.rows(); ++i)
        if (raw(i, c) < 0.0 || raw(i, c) > 1.0) out(i, c) = 0.0;
    }
    return out;
  }
};

inline ActionProjection action_projection(Player player, const ScenarioConfig& cfg) {
  ActionProjection p;
  if (player == Player::Defender) {
    p.weight = nn::Vector::Ones(static_cast<Eigen::Index>(cfg.num_types()));
    p.budget = 1.0;
  } else {
    p.weight.resize(static_cast<Eigen::Index>(cfg.num_attacks()));
    for (std::size_t a = 0; a < cfg.num_attacks(); ++a)
      p.weight(static_cast<Eigen::Index>(a)) = cfg.attacks[a].cost;
    p.budget = cfg.attack_budget;
  }
  return p;
}

struct Transition {
  nn::Vector obs;
  nn::Vector action;  // projected action fed to the critic
  double reward = 0.0;
  nn::Vector next_obs;
};

struct Batch {
  nn::Matrix obs;       // obs_dim x N
  nn::Matrix action;    // act_dim x N
  nn::Vector reward;    // N
  nn::Matrix next_obs;  // obs_dim x N
};

inline Batch make_batch(const nn::ReplayBuffer<Transition>& buf,
                        const std::vector<std::size_t>& idx) {
  const auto& first = buf.at(idx.front());
  const auto n = static_cast<Eigen::Index>(idx.size());
  Batch b{nn::Matrix(first.obs.size(), n), nn::Matrix(first.action.size(), n), nn::Vector(n),
          nn::Matrix(first.obs.size(), n)};
  for (Eigen::Index c = 0; c < n; ++c) {
    const Transition& tr = buf.at(idx[static_cast<std::size_t>(c)]);
    b.obs.col(c) = tr.obs;
    b.action.col(c) = tr.action;
    b.reward(c) = tr.reward;
    b.next_obs.col(c) = tr.next_obs;
  }
  return b;
}

inline nn::Matrix stack(const nn::Matrix& top, const nn::Matrix& bottom) {
  nn::Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

/// y = r + discount * Q(o', proj(actor(o'))) for one transition.
inline double td_target(double reward, const nn::Vector& next_obs, const nn::Mlp& actor,
                        const nn::Mlp& critic, const ActionProjection& proj, double discount) {
  const nn::Matrix a = proj.apply(actor.forward(nn::Matrix(next_obs)));
  return reward + discount * critic.forward(stack(next_obs, a))(0, 0);
}

inline nn::Vector td_targets(const Batch& b, const nn::Mlp& actor, const nn::Mlp& critic,
                             const ActionProjection& proj, double discount) {
  const nn::Matrix next_a = proj.apply(actor.forward(b.next_obs));
  const nn::Matrix q = critic.forward(stack(b.next_obs, next_a));
  return b.reward + discount * q.row(0).transpose();
}

struct CriticGrad {
  double loss = 0.0;
  nn::Gradients grad;
};

/// Mean squared TD error and its parameter gradient.
inline CriticGrad critic_loss_gradient(const nn::Matrix& obs, const nn::Matrix& action,
                                       const nn::Vector& targets, const nn::Mlp& critic) {
  nn::ForwardCache cache;
  const nn::Matrix q = critic.forward(stack(obs, action), cache);
  const double n = static_cast<double>(targets.size());
  const nn::Vector err = q.row(0).transpose() - targets;
  CriticGrad out;
  out.loss = err.squaredNorm() / n;
  nn::Matrix dq = (2.0 / n) * err.transpose();
  out.grad = critic.backward(cache, dq);
  return out;
}

/// One Adam descent step on the critic; returns the pre-update loss.
inline double critic_update(const nn::Matrix& obs, const nn::Matrix& action,
                            const nn::Vector& targets, nn::Mlp& critic, nn::Adam& opt) {
  if (targets.size() == 0) throw std::invalid_argument("critic_update: empty batch");
  CriticGrad g = critic_loss_gradient(obs, action, targets, critic);
  opt.step(critic.param_blocks(), nn::grad_blocks(g.grad));
  return g.loss;
}

/// d/d(theta) of mean_i Q(o_i, proj(actor(o_i))): the critic's
/// action-gradient pulled back through the projection and the actor.
inline nn::Gradients actor_objective_gradient(const nn::Matrix& obs, const nn::Mlp& actor,
                                              const nn::Mlp& critic,
                                              const ActionProjection& proj) {
  nn::ForwardCache actor_cache;
  const nn::Matrix raw = actor.forward(obs, actor_cache);
  const nn::Matrix act = proj.apply(raw);
  nn::ForwardCache critic_cache;
  critic.forward(stack(obs, act), critic_cache);
  const double n = static_cast<double>(obs.cols());
  const nn::Gradients cg =
      critic.backward(critic_cache, nn::Matrix::Constant(1, obs.cols(), 1.0 / n));
  const nn::Matrix dq_da = cg.input.bottomRows(act.rows());
  return actor.backward(actor_cache, proj.pullback(raw, dq_da));
}

/// One Adam ascent step on the actor; returns the gradient norm.
inline double actor_update(const nn::Matrix& obs, nn::Mlp& actor, const nn::Mlp& critic,
                           const ActionProjection& proj, nn::Adam& opt) {
  if (obs.cols() == 0) throw std::invalid_argument("actor_update: empty batch");
  nn::Gradients g = actor_objective_gradient(obs, actor, critic, proj);
  double sq = 0.0;
  for (std::size_t i = 0; i < g.weight.size(); ++i) {
    sq += g.weight[i].squaredNorm() + g.bias[i].squaredNorm();
    g.weight[i] = -g.weight[i];
    g.bias[i] = -g.bias[i];
  }
  opt.step(actor.param_blocks(), nn::grad_blocks(g));
  return std::sqrt(sq);
}

inline void soft_update(nn::Mlp& target, const nn::Mlp& source, double rate) {
  for (std::size_t i = 0; i < target.layers().size(); ++i) {
    auto& t = target.layers()[i];
    const auto& s = source.layers()[i];
    t.weight = (1.0 - rate) * t.weight + rate * s.weight;
    t.bias = (1.0 - rate) * t.bias + rate * s.bias;
  }
}

/// Linear anneal from eps_start to eps_end over the first
/// eps_decay_fraction of all steps, constant afterwards.
inline double exploration_rate(const OracleHyperparams& hp, std::int64_t global_step) {
  const double total = static_cast<double>(hp.episodes) * hp.steps;
  const double span = hp.eps_decay_fraction * total;
  if (span <= 0.0) return hp.eps_end;
  const double f = std::min(1.0, static_cast<double>(global_step) / span);
  return hp.eps_start + (hp.eps_end - hp.eps_start) * f;
}

struct EpisodeMetrics {
  int episode = 0;
  double mean_reward = 0.0;  // player's own utility per step, unscaled
  double critic_loss = 0.0;  // mean over the episode's updates (0 if none)
  double epsilon = 0.0;
};

/// Observer for every executed action pair. attack_probs is empty when the
/// attacker is a fixed opponent strategy.
using ActionHook = std::function<void(const AdeState&, const DefAction&, const AttAction&,
                                      std::span<const double> attack_probs)>;

struct OracleResult {
  PureStrategy policy;
  std::shared_ptr<const nn::Mlp> actor;
  std::shared_ptr<const nn::Mlp> critic;
  std::vector<EpisodeMetrics> metrics;
  std::size_t buffer_size = 0;
};

/// Trains a best response for `player` against the opponent mixed strategy.
inline OracleResult best_response(Player player, const MixedStrategy& opponent,
                                  const ScenarioConfig& cfg, const OracleHyperparams& hp,
                                  const ActionHook& hook = {}) {
  validate(hp);
  validate(opponent);
  for (const auto& s : opponent.pures)
    if (!plays_as(s, opponent_of(player)))
      throw std::invalid_argument("opponent strategy '" + s.label + "' has the wrong role");

  Rng rng(hp.seed);
  const auto od = static_cast<Eigen::Index>(obs_dim(cfg, player));
  const auto ad = static_cast<Eigen::Index>(action_dim(cfg, player));
  nn::Mlp actor = nn::init_policy_net(od, hp.policy_hidden, ad, rng);
  nn::Mlp critic = nn::init_value_net(od + ad, hp.value_hidden, rng, hp.relu_value_output);
  std::optional<nn::Mlp> actor_target;
  std::optional<nn::Mlp> critic_target;
  if (hp.target_networks) {
    actor_target = actor;
    critic_target = critic;
  }
  nn::Adam actor_opt(nn::AdamConfig{hp.policy_lr});
  nn::Adam critic_opt(nn::AdamConfig{hp.value_lr});
  nn::ReplayBuffer<Transition> buffer(hp.buffer_capacity);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const ActionProjection proj = action_projection(player, cfg);

  OracleResult result;
  std::int64_t global_step = 0;
  for (int ep = 0; ep < hp.episodes; ++ep) {
    AdeState st = init_state(cfg);
    const PureStrategy& opp = sample_pure(opponent, rng);
    double reward_sum = 0.0;
    double loss_sum = 0.0;
    int updates = 0;
    double eps = hp.eps_start;
    for (int k = 0; k < hp.steps; ++k, ++global_step) {
      nn::Vector obs = observe(player, st, cfg);
      eps = exploration_rate(hp, global_step);
      nn::Vector raw(ad);
      if (unit(rng) < eps) {
        for (Eigen::Index i = 0; i < ad; ++i) raw(i) = unit(rng);
      } else {
        raw = actor.forward(obs);
      }

      DefAction d;
      AttAction a;
      std::vector<double> probs;
      if (player == Player::Defender) {
        d = decode_defender({raw.data(), static_cast<std::size_t>(ad)}, st.n, cfg);
        a = act_attacker(opp, st, cfg, rng);
      } else {
        d = act_defender(opp, st, cfg);
        probs = project_attacker({raw.data(), static_cast<std::size_t>(ad)}, cfg);
        a = sample_attack(probs, rng);
      }
      if (hook) hook(st, d, a, probs);

      StepOutcome out = step(st, d, a, cfg, rng, hp.env);
      const double r = player == Player::Defender ? out.reward : -out.reward;
      reward_sum += r;
      st = std::move(out.next_state);
      buffer.push(Transition{std::move(obs), proj.apply(raw).col(0), r * hp.reward_scale,
                             observe(player, st, cfg)});

      if (buffer.size() >= hp.batch_size) {
        const Batch b = make_batch(buffer, buffer.sample_indices(hp.batch_size, rng));
        const nn::Vector y =
            hp.target_networks ? td_targets(b, *actor_target, *critic_target, proj, hp.discount)
                               : td_targets(b, actor, critic, proj, hp.discount);
        loss_sum += critic_update(b.obs, b.action, y, critic, critic_opt);
        actor_update(b.obs, actor, critic, proj, actor_opt);
        ++updates;
        if (hp.target_networks) {
          soft_update(*actor_target, actor, hp.target_rate);
          soft_update(*critic_target, critic, hp.target_rate);
        }
      }
    }
    result.metrics.push_back(EpisodeMetrics{ep, reward_sum / hp.steps,
                                            updates > 0 ? loss_sum / updates : 0.0, eps});
  }

  result.buffer_size = buffer.size();
  auto actor_ptr = std::make_shared<const nn::Mlp>(std::move(actor));
  result.actor = actor_ptr;
  result.critic = std::make_shared<const nn::Mlp>(std::move(critic));
  result.policy = make_neural(actor_ptr, player, "");
  return result;
}

}  // namespace triage
