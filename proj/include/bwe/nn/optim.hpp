#pragma once

#include <cstdint>
#include <vector>

#include "bwe/nn/tensor.hpp"

namespace bwe::nn {

/// Moment estimates for AdamW, one pair per parameter in registration order.
struct OptimizerState {
  double beta1 = 0.8;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<Real>> first_moment;
  std::vector<std::vector<Real>> second_moment;

  /// Zeroed moments sized for `params`.
  static OptimizerState for_params(const std::vector<Tensor>& params);
};

/// One decoupled-weight-decay Adam update with bias correction, reading each
/// parameter's current gradient (a parameter with no gradient is treated as
/// having a zero gradient).
void adamw_step(std::vector<Tensor>& params, OptimizerState& state, double lr);

/// Exponential per-epoch decay: lr(epoch) = gamma^epoch * lr_init.
struct LrSchedule {
  double lr_init = 1.5e-4;
  double gamma = 0.999;
};

double lr_at(const LrSchedule& sched, std::int64_t epoch);

}  // namespace bwe::nn
