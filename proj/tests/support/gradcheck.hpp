#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bwe/nn/tensor.hpp"

namespace gradcheck {

using bwe::nn::Tensor;
using Fn = std::function<Tensor(const std::vector<Tensor>&)>;

/// Compares reverse-mode gradients of sum(f(inputs) * R), R a fixed random
/// weighting, with central differences on every input element. Returns the
/// largest norm-wise relative error over inputs.
double max_relative_error(const Fn& f, const std::vector<Tensor>& inputs, std::uint64_t seed, double h = 1e-6);

/// Leaf tensor with normal(0, scale) entries and gradients enabled.
Tensor random_leaf(bwe::nn::Shape shape, std::uint64_t seed, double scale = 1.0);

/// Like random_leaf but every entry has magnitude at least `margin`, for ops
/// with a kink at zero.
Tensor random_leaf_away_from_zero(bwe::nn::Shape shape, std::uint64_t seed, double margin = 0.05);

}  // namespace gradcheck
