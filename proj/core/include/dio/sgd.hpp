#pragma once

#include <vector>

#include "dio/tensor.hpp"

namespace dio {

/// SGD with heavy-ball momentum and L2 weight decay:
///   v <- momentum * v + (g + weight_decay * theta)
///   theta <- theta - lr * v
class Sgd {
 public:
  Sgd(double lr, double momentum = 0.0, double weight_decay = 0.0)
      : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}

  /// Applies one update to every parameter and clears its gradient. Throws
  /// GradError if any parameter lacks a gradient. Velocity buffers are
  /// created lazily and keyed by position, so the parameter list must keep
  /// its order across calls.
  void step(std::vector<Tensor>& params);

  double lr() const noexcept { return lr_; }
  void set_lr(double lr) noexcept { lr_ = lr; }
  double momentum() const noexcept { return momentum_; }
  double weight_decay() const noexcept { return weight_decay_; }

  const std::vector<std::vector<double>>& velocity() const noexcept { return velocity_; }
  std::vector<std::vector<double>>& velocity() noexcept { return velocity_; }

 private:
  double lr_;
  double momentum_;
  double weight_decay_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace dio
