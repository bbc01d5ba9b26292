#include <cmath>
#include <stdexcept>

#include "bwe/nn/ops.hpp"

namespace bwe::nn {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.dim() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                                shape_string(x.shape()));
  }
}

// Elementwise op whose derivative depends only on the input value and output value.
template <typename F, typename DF>
Tensor unary(const Tensor& x, F f, DF df) {
  std::vector<Real> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [df](detail::Node& self) {
    auto& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(p.value[i], self.value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<Real> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<Real> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    const Real sign[2] = {1.0, -1.0};
    for (std::size_t j = 0; j < 2; ++j) {
      auto& p = *self.parents[j];
      if (!p.requires_grad) continue;
      auto& g = p.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign[j] * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<Real> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& a, Real factor) {
  return unary(a, [factor](Real v) { return v * factor; }, [factor](Real, Real) { return factor; });
}

Tensor add_scalar(const Tensor& a, Real value) {
  return unary(a, [value](Real v) { return v + value; }, [](Real, Real) { return Real{1}; });
}

Tensor square(const Tensor& a) {
  return unary(a, [](Real v) { return v * v; }, [](Real v, Real) { return 2 * v; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, [](Real v) { return std::abs(v); },
      [](Real v, Real) { return v > 0 ? Real{1} : (v < 0 ? Real{-1} : Real{0}); });
}

Tensor leaky_relu(const Tensor& x, Real slope) {
  return unary(
      x, [slope](Real v) { return v > 0 ? v : slope * v; },
      [slope](Real v, Real) { return v > 0 ? Real{1} : slope; });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](Real v) { return std::tanh(v); }, [](Real, Real y) { return 1 - y * y; });
}

Tensor sum(const Tensor& x) {
  Real acc = 0;
  for (Real v : x.data()) acc += v;
  return Tensor::make_result({1}, {acc}, {x}, [](detail::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    const Real s = self.grad[0];
    for (Real& v : g) v += s;
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(x), Real{1} / static_cast<Real>(x.numel()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw std::invalid_argument("reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  std::vector<Real> out(x.data().begin(), x.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [](detail::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor slice_time(const Tensor& x, std::size_t begin, std::size_t length) {
  require_rank(x, 3, "slice_time");
  const std::size_t rows = x.size(0) * x.size(1);
  const std::size_t t_in = x.size(2);
  if (begin + length > t_in) throw std::invalid_argument("slice_time: range exceeds time axis");
  std::vector<Real> out(rows * length);
  const auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < length; ++t) out[r * length + t] = in[r * t_in + begin + t];
  }
  return Tensor::make_result({x.size(0), x.size(1), length}, std::move(out), {x},
                             [rows, t_in, begin, length](detail::Node& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               for (std::size_t r = 0; r < rows; ++r) {
                                 for (std::size_t t = 0; t < length; ++t) {
                                   g[r * t_in + begin + t] += self.grad[r * length + t];
                                 }
                               }
                             });
}

Tensor reflect_pad_right(const Tensor& x, std::size_t right) {
  require_rank(x, 3, "reflect_pad_right");
  const std::size_t rows = x.size(0) * x.size(1);
  const std::size_t t_in = x.size(2);
  if (right >= t_in) throw std::invalid_argument("reflect_pad_right: pad must be shorter than the signal");
  const std::size_t t_out = t_in + right;
  auto source = [t_in](std::size_t t) { return t < t_in ? t : 2 * (t_in - 1) - t; };
  std::vector<Real> out(rows * t_out);
  const auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < t_out; ++t) out[r * t_out + t] = in[r * t_in + source(t)];
  }
  return Tensor::make_result({x.size(0), x.size(1), t_out}, std::move(out), {x},
                             [rows, t_in, t_out, source](detail::Node& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               for (std::size_t r = 0; r < rows; ++r) {
                                 for (std::size_t t = 0; t < t_out; ++t) {
                                   g[r * t_in + source(t)] += self.grad[r * t_out + t];
                                 }
                               }
                             });
}

Tensor avg_pool1d(const Tensor& x, std::size_t kernel, std::size_t stride, std::size_t padding) {
  require_rank(x, 3, "avg_pool1d");
  if (kernel == 0 || stride == 0) throw std::invalid_argument("avg_pool1d: kernel and stride must be positive");
  if (padding * 2 > kernel) throw std::invalid_argument("avg_pool1d: padding must be at most half the kernel");
  const std::size_t rows = x.size(0) * x.size(1);
  const std::size_t t_in = x.size(2);
  if (t_in + 2 * padding < kernel) throw std::invalid_argument("avg_pool1d: input shorter than kernel");
  const std::size_t t_out = (t_in + 2 * padding - kernel) / stride + 1;
  const Real inv = Real{1} / static_cast<Real>(kernel);
  std::vector<Real> out(rows * t_out, 0.0);
  const auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < t_out; ++t) {
      Real acc = 0;
      for (std::size_t k = 0; k < kernel; ++k) {
        const std::size_t p = t * stride + k;
        if (p >= padding && p - padding < t_in) acc += in[r * t_in + p - padding];
      }
      out[r * t_out + t] = acc * inv;
    }
  }
  return Tensor::make_result({x.size(0), x.size(1), t_out}, std::move(out), {x},
                             [=](detail::Node& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               for (std::size_t r = 0; r < rows; ++r) {
                                 for (std::size_t t = 0; t < t_out; ++t) {
                                   const Real go = self.grad[r * t_out + t] * inv;
                                   for (std::size_t k = 0; k < kernel; ++k) {
                                     const std::size_t p = t * stride + k;
                                     if (p >= padding && p - padding < t_in) g[r * t_in + p - padding] += go;
                                   }
                                 }
                               }
                             });
}

}  // namespace bwe::nn
