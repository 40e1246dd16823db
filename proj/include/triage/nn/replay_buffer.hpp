#pragma once

#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

#include "triage/random.hpp"

namespace triage::nn {

/// Fixed-capacity FIFO ring of transitions with uniform sampling.
template <class T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be >= 1");
    items_.reserve(capacity < 65536 ? capacity : 65536);
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

  void push(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[head_] = std::move(item);
      head_ = (head_ + 1) % capacity_;
    }
  }

  /// i = 0 is the oldest stored item.
  const T& at(std::size_t i) const { return items_.at((head_ + i) % items_.size()); }

  /// Uniform draw with replacement; returns positions into at().
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    if (items_.empty()) throw std::logic_error("cannot sample from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<std::size_t> out(n);
    for (auto& i : out) i = pick(rng);
    return out;
  }

  std::vector<T> sample(std::size_t n, Rng& rng) const {
    std::vector<T> out;
    out.reserve(n);
    for (std::size_t i : sample_indices(n, rng)) out.push_back(at(i));
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<T> items_;
};

}  // namespace triage::nn
