#pragma once

#include <cstddef>

#include "bwe/nn/tensor.hpp"

namespace bwe::nn {

// Elementwise arithmetic. Binary ops require identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real factor);
Tensor add_scalar(const Tensor& a, Real value);
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);

Tensor leaky_relu(const Tensor& x, Real slope = 0.1);
Tensor tanh(const Tensor& x);

// Reductions to a one-element tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Shares no storage; the element order is unchanged.
Tensor reshape(const Tensor& x, Shape shape);

/// x: [batch, channels, time]. Keeps time samples [begin, begin + length).
Tensor slice_time(const Tensor& x, std::size_t begin, std::size_t length);

/// x: [batch, channels, time]. Reflects `right` samples past the end (excluding the edge sample).
Tensor reflect_pad_right(const Tensor& x, std::size_t right);

/// x: [batch, channels, time]. Average pooling with implicit zero padding
/// counted in the divisor.
Tensor avg_pool1d(const Tensor& x, std::size_t kernel, std::size_t stride, std::size_t padding = 0);

struct Conv1dOptions {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
};

/// input [batch, in, time], weight [out, in/groups, k], bias [out] or undefined.
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, const Conv1dOptions& opt = {});

std::size_t conv1d_output_length(std::size_t time, std::size_t kernel, const Conv1dOptions& opt);

struct ConvTranspose1dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// input [batch, in, time], weight [in, out, k], bias [out] or undefined.
/// Output length (time - 1) * stride - 2 * padding + k.
Tensor conv_transpose1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        const ConvTranspose1dOptions& opt = {});

struct Conv2dOptions {
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t padding_h = 0, padding_w = 0;
};

/// input [batch, in, h, w], weight [out, in, kh, kw], bias [out] or undefined.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, const Conv2dOptions& opt = {});

}  // namespace bwe::nn
