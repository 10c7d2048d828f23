#pragma once

#include <vector>

#include "chemo/env.hpp"
#include "chemo/rng.hpp"

namespace chemo {

/// One stored interaction. `a` is the discrete action index (DQN) or the
/// normalized dose (DDPG); `r` is the reward as fed to the learner.
/// `terminal` is true only when the episode ended by cure — truncated
/// episodes keep bootstrapping through their last transition.
struct Transition {
  Observation s{};
  Observation s2{};
  double a = 0.0;
  double r = 0.0;
  bool terminal = false;
};

/// Fixed-capacity FIFO ring: once full, each push evicts the oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);

  void push(const Transition& t);
  int size() const { return count_; }
  int capacity() const { return static_cast<int>(storage_.size()); }

  /// Logical indexing, oldest first: at(0) is the oldest retained item.
  const Transition& at(int i) const;

  /// Uniform sample with replacement; draw order is the rng stream order.
  std::vector<Transition> sample(int batch, RngStream& rng) const;

 private:
  std::vector<Transition> storage_;
  int write_ = 0;
  int count_ = 0;
};

}  // namespace chemo
