#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace triage::nn {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a fixed list of parameter blocks. Moments are
/// laid out flat in block order; the block sizes are fixed by the first step.
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return t_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

  /// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps). Pass negated
  /// gradients for ascent.
  void step(const std::vector<std::span<double>>& params,
            const std::vector<std::span<const double>>& grads) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam: block count mismatch");
    std::size_t total = 0;
    for (std::size_t b = 0; b < params.size(); ++b) {
      if (params[b].size() != grads[b].size()) throw std::invalid_argument("adam: block size mismatch");
      total += params[b].size();
    }
    if (m_.empty()) {
      m_.assign(total, 0.0);
      v_.assign(total, 0.0);
    } else if (m_.size() != total) {
      throw std::invalid_argument("adam: parameter layout changed");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::size_t off = 0;
    for (std::size_t b = 0; b < params.size(); ++b) {
      for (std::size_t i = 0; i < params[b].size(); ++i, ++off) {
        const double g = grads[b][i];
        m_[off] = cfg_.beta1 * m_[off] + (1.0 - cfg_.beta1) * g;
        v_[off] = cfg_.beta2 * v_[off] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m_[off] / c1;
        const double vhat = v_[off] / c2;
        params[b][i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
};

}  // namespace triage::nn
