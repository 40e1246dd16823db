#pragma once

// Two-player zero-sum matrix games. Rows belong to the maximizing
// defender, columns to the minimizing attacker.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "triage/policy.hpp"

namespace triage {

struct UtilityMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

struct GameSolution {
  Eigen::VectorXd defender;  // over rows
  Eigen::VectorXd attacker;  // over columns
  double value = 0.0;
};

namespace detail {

inline void check_finite(const Eigen::MatrixXd& u) {
  if (u.size() == 0) throw std::invalid_argument("utility matrix is empty");
  if (!u.allFinite()) throw std::invalid_argument("utility matrix has non-finite entries");
}

inline void clean_distribution(Eigen::VectorXd& p) {
  p = p.cwiseMax(0.0);
  const double s = p.sum();
  if (s > 0.0) {
    p /= s;
  } else {
    p.setZero();
    p(0) = 1.0;
  }
}

}  // namespace detail

/// Solves max_x min_y x'Uy by the dense simplex method on
///   max 1'y  s.t.  A y <= 1, y >= 0,
/// where A is U mapped affinely onto [1, 2]. The optimal y gives the
/// attacker's strategy and the slack prices give the defender's. Bland's
/// rule keeps the pivoting finite on degenerate games.
inline GameSolution solve_zero_sum(const Eigen::MatrixXd& u) {
  detail::check_finite(u);
  const Eigen::Index m = u.rows();
  const Eigen::Index n = u.cols();
  const double lo = u.minCoeff();
  const double range = u.maxCoeff() - lo;
  Eigen::MatrixXd a = Eigen::MatrixXd::Ones(m, n);
  if (range > 0.0) a = ((u.array() - lo) / range + 1.0).matrix();

  const Eigen::Index width = n + m + 1;
  const Eigen::Index rhs = n + m;
  Eigen::MatrixXd tab = Eigen::MatrixXd::Zero(m + 1, width);
  tab.topLeftCorner(m, n) = a;
  tab.block(0, n, m, m).setIdentity();
  tab.col(rhs).head(m).setOnes();
  tab.row(m).head(n).setConstant(-1.0);
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = n + i;

  constexpr double eps = 1e-12;
  for (int iter = 0; iter < 100000; ++iter) {
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < n + m; ++j)
      if (tab(m, j) < -eps) {
        enter = j;
        break;
      }
    if (enter < 0) break;
    Eigen::Index leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (tab(i, enter) <= eps) continue;
      const double ratio = tab(i, rhs) / tab(i, enter);
      const bool tie = leave >= 0 && std::abs(ratio - best) <= eps;
      if (leave < 0 || ratio < best - eps ||
          (tie && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
        best = std::min(best, ratio);
        leave = i;
      }
    }
    if (leave < 0) throw std::logic_error("solve_zero_sum: LP unexpectedly unbounded");
    tab.row(leave) /= tab(leave, enter);
    for (Eigen::Index i = 0; i <= m; ++i) {
      if (i == leave) continue;
      const double f = tab(i, enter);
      if (f != 0.0) tab.row(i) -= f * tab.row(leave);
    }
    basis[static_cast<std::size_t>(leave)] = enter;
  }

  GameSolution sol;
  sol.attacker = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index b = basis[static_cast<std::size_t>(i)];
    if (b < n) sol.attacker(b) = tab(i, rhs);
  }
  sol.defender = tab.row(m).segment(n, m).transpose();
  detail::clean_distribution(sol.attacker);
  detail::clean_distribution(sol.defender);
  sol.value = sol.defender.dot(u * sol.attacker);
  return sol;
}

inline GameSolution solve_zero_sum(const UtilityMatrix& u) { return solve_zero_sum(u.values); }

/// (best row payoff against the column strategy) - (worst column payoff
/// against the row strategy). Zero exactly at an equilibrium.
inline double exploitability(const Eigen::MatrixXd& u, const Eigen::VectorXd& defender,
                             const Eigen::VectorXd& attacker) {
  if (defender.size() != u.rows() || attacker.size() != u.cols())
    throw std::invalid_argument("exploitability: strategy dimensions do not match the matrix");
  const double best_row = (u * attacker).maxCoeff();
  const double worst_col = (defender.transpose() * u).minCoeff();
  return best_row - worst_col;
}

struct PureResponse {
  Eigen::Index index = 0;
  double value = 0.0;  // in the responding player's own utility
};

/// Best pure response of `player` to the opponent's mixed strategy; ties go
/// to the lowest index.
inline PureResponse best_pure_response_value(const Eigen::MatrixXd& u,
                                             const Eigen::VectorXd& opponent, Player player) {
  Eigen::VectorXd payoff;
  if (player == Player::Defender) {
    if (opponent.size() != u.cols()) throw std::invalid_argument("best response: dimension mismatch");
    payoff = u * opponent;
  } else {
    if (opponent.size() != u.rows()) throw std::invalid_argument("best response: dimension mismatch");
    payoff = -(u.transpose() * opponent);
  }
  PureResponse r{0, payoff(0)};
  for (Eigen::Index i = 1; i < payoff.size(); ++i)
    if (payoff(i) > r.value) r = {i, payoff(i)};
  return r;
}

}  // namespace triage
