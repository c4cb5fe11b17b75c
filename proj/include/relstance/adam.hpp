#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace relstance {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer over a fixed list of parameter blocks.
class Adam {
 public:
  Adam(AdamConfig cfg, std::span<const std::span<double>> params);

  /// One update; `grads` must mirror the block layout given at construction.
  void step(std::span<const std::span<double>> params, std::span<const std::span<double>> grads);

  std::size_t steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace relstance
