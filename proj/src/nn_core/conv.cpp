#include <algorithm>
#include <stdexcept>

#include "bwe/nn/ops.hpp"

namespace bwe::nn {
namespace {

using Index = std::ptrdiff_t;

Index ceil_div(Index a, Index b) { return (a + b - 1) / b; }

// Geometry of a grouped, strided, dilated 1-D convolution over `batch` rows.
struct Conv1dGeom {
  std::size_t batch, in_ch, time, out_ch, kernel, stride, dilation, padding, groups, out_time;

  std::size_t in_per_group() const { return in_ch / groups; }
  std::size_t out_per_group() const { return out_ch / groups; }
  Index offset(std::size_t k) const {
    return static_cast<Index>(k * dilation) - static_cast<Index>(padding);
  }
  // Output positions t with 0 <= t * stride + off < time.
  std::pair<std::size_t, std::size_t> valid(Index off) const {
    const Index s = static_cast<Index>(stride);
    const Index t0 = off >= 0 ? 0 : ceil_div(-off, s);
    const Index span = static_cast<Index>(time) - off;
    const Index t1 = span <= 0 ? 0 : std::min<Index>(static_cast<Index>(out_time), ceil_div(span, s));
    if (t1 <= t0) return {0, 0};
    return {static_cast<std::size_t>(t0), static_cast<std::size_t>(t1)};
  }
};

// Four partial sums so the reduction vectorizes; the order is fixed, so results stay reproducible.
Real dot(const Real* a, const Real* b, std::size_t n) {
  Real acc[4] = {0, 0, 0, 0};
  std::size_t t = 0;
  for (; t + 4 <= n; t += 4) {
    for (std::size_t j = 0; j < 4; ++j) acc[j] += a[t + j] * b[t + j];
  }
  for (; t < n; ++t) acc[0] += a[t] * b[t];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

Real strided_dot(const Real* a, const Real* b, std::size_t stride, std::size_t n) {
  Real acc[4] = {0, 0, 0, 0};
  std::size_t t = 0;
  for (; t + 4 <= n; t += 4) {
    for (std::size_t j = 0; j < 4; ++j) acc[j] += a[t + j] * b[(t + j) * stride];
  }
  for (; t < n; ++t) acc[0] += a[t] * b[t * stride];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void conv1d_forward(const Conv1dGeom& g, const Real* x, const Real* w, Real* y) {
  const std::size_t cin_g = g.in_per_group();
  const std::size_t cout_g = g.out_per_group();
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t o = 0; o < g.out_ch; ++o) {
      Real* out = y + (b * g.out_ch + o) * g.out_time;
      const std::size_t group = o / cout_g;
      for (std::size_t i = 0; i < cin_g; ++i) {
        const Real* in = x + (b * g.in_ch + group * cin_g + i) * g.time;
        const Real* wk = w + (o * cin_g + i) * g.kernel;
        for (std::size_t k = 0; k < g.kernel; ++k) {
          const Index off = g.offset(k);
          const auto [t0, t1] = g.valid(off);
          const Real wv = wk[k];
          if (g.stride == 1) {
            for (std::size_t t = t0; t < t1; ++t) out[t] += wv * in[static_cast<Index>(t) + off];
          } else {
            for (std::size_t t = t0; t < t1; ++t) out[t] += wv * in[static_cast<Index>(t * g.stride) + off];
          }
        }
      }
    }
  }
}

void conv1d_backward_input(const Conv1dGeom& g, const Real* gy, const Real* w, Real* gx) {
  const std::size_t cin_g = g.in_per_group();
  const std::size_t cout_g = g.out_per_group();
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t o = 0; o < g.out_ch; ++o) {
      const Real* go = gy + (b * g.out_ch + o) * g.out_time;
      const std::size_t group = o / cout_g;
      for (std::size_t i = 0; i < cin_g; ++i) {
        Real* gin = gx + (b * g.in_ch + group * cin_g + i) * g.time;
        const Real* wk = w + (o * cin_g + i) * g.kernel;
        for (std::size_t k = 0; k < g.kernel; ++k) {
          const Index off = g.offset(k);
          const auto [t0, t1] = g.valid(off);
          const Real wv = wk[k];
          if (g.stride == 1) {
            for (std::size_t t = t0; t < t1; ++t) gin[static_cast<Index>(t) + off] += wv * go[t];
          } else {
            for (std::size_t t = t0; t < t1; ++t) gin[static_cast<Index>(t * g.stride) + off] += wv * go[t];
          }
        }
      }
    }
  }
}

void conv1d_backward_weight(const Conv1dGeom& g, const Real* gy, const Real* x, Real* gw) {
  const std::size_t cin_g = g.in_per_group();
  const std::size_t cout_g = g.out_per_group();
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t o = 0; o < g.out_ch; ++o) {
      const Real* go = gy + (b * g.out_ch + o) * g.out_time;
      const std::size_t group = o / cout_g;
      for (std::size_t i = 0; i < cin_g; ++i) {
        const Real* in = x + (b * g.in_ch + group * cin_g + i) * g.time;
        Real* gwk = gw + (o * cin_g + i) * g.kernel;
        for (std::size_t k = 0; k < g.kernel; ++k) {
          const Index off = g.offset(k);
          const auto [t0, t1] = g.valid(off);
          gwk[k] += g.stride == 1 ? dot(go + t0, in + static_cast<Index>(t0) + off, t1 - t0)
                                  : strided_dot(go + t0, in + static_cast<Index>(t0 * g.stride) + off, g.stride,
                                                t1 - t0);
        }
      }
    }
  }
}

void add_bias(Real* y, const Real* bias, std::size_t rows, std::size_t channels, std::size_t len) {
  for (std::size_t r = 0; r < rows; ++r) {
    const Real b = bias[r % channels];
    std::fill(y + r * len, y + (r + 1) * len, b);
  }
}

void accumulate_bias_grad(const Real* gy, Real* gb, std::size_t rows, std::size_t channels, std::size_t len) {
  for (std::size_t r = 0; r < rows; ++r) {
    Real acc = 0;
    for (std::size_t t = 0; t < len; ++t) acc += gy[r * len + t];
    gb[r % channels] += acc;
  }
}

void check_bias(const Tensor& bias, std::size_t out_ch, const char* op) {
  if (bias.defined() && bias.shape() != Shape{out_ch}) {
    throw std::invalid_argument(std::string(op) + ": bias must have shape [" + std::to_string(out_ch) + "]");
  }
}

Tensor conv1d_impl(const Tensor& input, const Tensor& weight, const Tensor& bias, const Conv1dGeom& g,
                   Shape out_shape) {
  std::vector<Real> out(g.batch * g.out_ch * g.out_time, 0.0);
  if (bias.defined()) add_bias(out.data(), bias.data().data(), g.batch * g.out_ch, g.out_ch, g.out_time);
  conv1d_forward(g, input.data().data(), weight.data().data(), out.data());

  std::vector<Tensor> parents{input, weight};
  if (bias.defined()) parents.push_back(bias);
  return Tensor::make_result(std::move(out_shape), std::move(out), std::move(parents), [g](detail::Node& self) {
    auto& x = *self.parents[0];
    auto& w = *self.parents[1];
    if (x.requires_grad) conv1d_backward_input(g, self.grad.data(), w.value.data(), x.ensure_grad().data());
    if (w.requires_grad) conv1d_backward_weight(g, self.grad.data(), x.value.data(), w.ensure_grad().data());
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      accumulate_bias_grad(self.grad.data(), self.parents[2]->ensure_grad().data(), g.batch * g.out_ch, g.out_ch,
                           g.out_time);
    }
  });
}

}  // namespace

std::size_t conv1d_output_length(std::size_t time, std::size_t kernel, const Conv1dOptions& opt) {
  const std::size_t span = opt.dilation * (kernel - 1) + 1;
  if (time + 2 * opt.padding < span) return 0;
  return (time + 2 * opt.padding - span) / opt.stride + 1;
}

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, const Conv1dOptions& opt) {
  if (input.dim() != 3 || weight.dim() != 3) {
    throw std::invalid_argument("conv1d: expected input [B, C, T] and weight [O, C/groups, K], got " +
                                shape_string(input.shape()) + " and " + shape_string(weight.shape()));
  }
  if (opt.stride == 0 || opt.dilation == 0 || opt.groups == 0) {
    throw std::invalid_argument("conv1d: stride, dilation and groups must be >= 1");
  }
  Conv1dGeom g{input.size(0), input.size(1), input.size(2), weight.size(0), weight.size(2), opt.stride,
               opt.dilation, opt.padding, opt.groups, 0};
  if (g.in_ch % g.groups != 0 || g.out_ch % g.groups != 0 || weight.size(1) != g.in_ch / g.groups) {
    throw std::invalid_argument("conv1d: channel mismatch between input " + shape_string(input.shape()) +
                                " and weight " + shape_string(weight.shape()) + " with " +
                                std::to_string(g.groups) + " groups");
  }
  check_bias(bias, g.out_ch, "conv1d");
  g.out_time = conv1d_output_length(g.time, g.kernel, opt);
  if (g.out_time == 0) throw std::invalid_argument("conv1d: input too short for kernel");
  return conv1d_impl(input, weight, bias, g, {g.batch, g.out_ch, g.out_time});
}

Tensor conv_transpose1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        const ConvTranspose1dOptions& opt) {
  if (input.dim() != 3 || weight.dim() != 3 || weight.size(0) != input.size(1)) {
    throw std::invalid_argument("conv_transpose1d: expected input [B, C, T] and weight [C, O, K], got " +
                                shape_string(input.shape()) + " and " + shape_string(weight.shape()));
  }
  if (opt.stride == 0) throw std::invalid_argument("conv_transpose1d: stride must be >= 1");
  const std::size_t batch = input.size(0), in_ch = input.size(1), time = input.size(2);
  const std::size_t out_ch = weight.size(1), kernel = weight.size(2), stride = opt.stride, pad = opt.padding;
  check_bias(bias, out_ch, "conv_transpose1d");
  const Index full = static_cast<Index>((time - 1) * stride + kernel);
  const Index out_len = full - 2 * static_cast<Index>(pad);
  if (time == 0 || out_len <= 0) throw std::invalid_argument("conv_transpose1d: empty output");
  const auto out_time = static_cast<std::size_t>(out_len);

  // Input positions t with 0 <= t * stride + off < out_time.
  auto valid = [=](Index off) -> std::pair<std::size_t, std::size_t> {
    const Index s = static_cast<Index>(stride);
    const Index t0 = off >= 0 ? 0 : ceil_div(-off, s);
    const Index span = static_cast<Index>(out_time) - off;
    const Index t1 = span <= 0 ? 0 : std::min<Index>(static_cast<Index>(time), ceil_div(span, s));
    if (t1 <= t0) return {0, 0};
    return {static_cast<std::size_t>(t0), static_cast<std::size_t>(t1)};
  };

  std::vector<Real> out(batch * out_ch * out_time, 0.0);
  if (bias.defined()) add_bias(out.data(), bias.data().data(), batch * out_ch, out_ch, out_time);
  const Real* x = input.data().data();
  const Real* w = weight.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < in_ch; ++i) {
      const Real* in = x + (b * in_ch + i) * time;
      for (std::size_t o = 0; o < out_ch; ++o) {
        Real* dst = out.data() + (b * out_ch + o) * out_time;
        const Real* wk = w + (i * out_ch + o) * kernel;
        for (std::size_t k = 0; k < kernel; ++k) {
          const Index off = static_cast<Index>(k) - static_cast<Index>(pad);
          const auto [t0, t1] = valid(off);
          const Real wv = wk[k];
          for (std::size_t t = t0; t < t1; ++t) dst[static_cast<Index>(t * stride) + off] += wv * in[t];
        }
      }
    }
  }

  std::vector<Tensor> parents{input, weight};
  if (bias.defined()) parents.push_back(bias);
  return Tensor::make_result(
      {batch, out_ch, out_time}, std::move(out), std::move(parents), [=](detail::Node& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        const Real* gy = self.grad.data();
        Real* gx = xn.requires_grad ? xn.ensure_grad().data() : nullptr;
        Real* gw = wn.requires_grad ? wn.ensure_grad().data() : nullptr;
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t i = 0; i < in_ch; ++i) {
            const Real* in = xn.value.data() + (b * in_ch + i) * time;
            for (std::size_t o = 0; o < out_ch; ++o) {
              const Real* go = gy + (b * out_ch + o) * out_time;
              const Real* wk = wn.value.data() + (i * out_ch + o) * kernel;
              for (std::size_t k = 0; k < kernel; ++k) {
                const Index off = static_cast<Index>(k) - static_cast<Index>(pad);
                const auto [t0, t1] = valid(off);
                if (gx) {
                  Real* gin = gx + (b * in_ch + i) * time;
                  const Real wv = wk[k];
                  for (std::size_t t = t0; t < t1; ++t) gin[t] += wv * go[static_cast<Index>(t * stride) + off];
                }
                if (gw) {
                  Real acc = 0;
                  for (std::size_t t = t0; t < t1; ++t) acc += in[t] * go[static_cast<Index>(t * stride) + off];
                  gw[(i * out_ch + o) * kernel + k] += acc;
                }
              }
            }
          }
        }
        if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
          accumulate_bias_grad(gy, self.parents[2]->ensure_grad().data(), batch * out_ch, out_ch, out_time);
        }
      });
}

namespace {

// [B, C, H, W] <-> [B, W, C, H] so that a (k x 1) 2-D convolution becomes a
// 1-D convolution over H with the W columns folded into the batch.
std::vector<Real> to_columns(std::span<const Real> x, std::size_t b, std::size_t c, std::size_t h, std::size_t w) {
  std::vector<Real> out(x.size());
  for (std::size_t ib = 0; ib < b; ++ib)
    for (std::size_t ic = 0; ic < c; ++ic)
      for (std::size_t ih = 0; ih < h; ++ih)
        for (std::size_t iw = 0; iw < w; ++iw)
          out[((ib * w + iw) * c + ic) * h + ih] = x[((ib * c + ic) * h + ih) * w + iw];
  return out;
}

void from_columns(const Real* cols, Real* out, std::size_t b, std::size_t c, std::size_t h, std::size_t w,
                  bool accumulate) {
  for (std::size_t ib = 0; ib < b; ++ib)
    for (std::size_t ic = 0; ic < c; ++ic)
      for (std::size_t ih = 0; ih < h; ++ih)
        for (std::size_t iw = 0; iw < w; ++iw) {
          const Real v = cols[((ib * w + iw) * c + ic) * h + ih];
          Real& dst = out[((ib * c + ic) * h + ih) * w + iw];
          dst = accumulate ? dst + v : v;
        }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, const Conv2dOptions& opt) {
  if (input.dim() != 4 || weight.dim() != 4 || weight.size(1) != input.size(1)) {
    throw std::invalid_argument("conv2d: expected input [B, C, H, W] and weight [O, C, KH, KW], got " +
                                shape_string(input.shape()) + " and " + shape_string(weight.shape()));
  }
  if (opt.stride_h == 0 || opt.stride_w == 0) throw std::invalid_argument("conv2d: strides must be >= 1");
  const std::size_t batch = input.size(0), in_ch = input.size(1), h = input.size(2), w = input.size(3);
  const std::size_t out_ch = weight.size(0), kh = weight.size(2), kw = weight.size(3);
  check_bias(bias, out_ch, "conv2d");
  if (h + 2 * opt.padding_h < kh || w + 2 * opt.padding_w < kw) {
    throw std::invalid_argument("conv2d: input too small for kernel");
  }
  const std::size_t ho = (h + 2 * opt.padding_h - kh) / opt.stride_h + 1;
  const std::size_t wo = (w + 2 * opt.padding_w - kw) / opt.stride_w + 1;

  if (kw == 1 && opt.stride_w == 1 && opt.padding_w == 0) {
    // Column-wise 1-D convolution on transposed data.
    const Conv1dGeom g{batch * w, in_ch, h, out_ch, kh, opt.stride_h, 1, opt.padding_h, 1, ho};
    std::vector<Real> cols = to_columns(input.data(), batch, in_ch, h, w);
    std::vector<Real> out_cols(batch * w * out_ch * ho, 0.0);
    if (bias.defined()) add_bias(out_cols.data(), bias.data().data(), batch * w * out_ch, out_ch, ho);
    conv1d_forward(g, cols.data(), weight.data().data(), out_cols.data());
    std::vector<Real> out(out_cols.size());
    from_columns(out_cols.data(), out.data(), batch, out_ch, ho, w, false);

    std::vector<Tensor> parents{input, weight};
    if (bias.defined()) parents.push_back(bias);
    return Tensor::make_result(
        {batch, out_ch, ho, wo}, std::move(out), std::move(parents),
        [g, cols = std::move(cols), batch, in_ch, h, w, out_ch, ho](detail::Node& self) {
          const std::vector<Real> gy_cols = to_columns(self.grad, batch, out_ch, ho, w);
          auto& xn = *self.parents[0];
          auto& wn = *self.parents[1];
          if (xn.requires_grad) {
            std::vector<Real> gx_cols(cols.size(), 0.0);
            conv1d_backward_input(g, gy_cols.data(), wn.value.data(), gx_cols.data());
            from_columns(gx_cols.data(), xn.ensure_grad().data(), batch, in_ch, h, w, true);
          }
          if (wn.requires_grad) conv1d_backward_weight(g, gy_cols.data(), cols.data(), wn.ensure_grad().data());
          if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
            accumulate_bias_grad(gy_cols.data(), self.parents[2]->ensure_grad().data(), batch * w * out_ch, out_ch,
                                 ho);
          }
        });
  }

  // General direct form.
  const Index sh = static_cast<Index>(opt.stride_h), sw = static_cast<Index>(opt.stride_w);
  const Index ph = static_cast<Index>(opt.padding_h), pw = static_cast<Index>(opt.padding_w);
  auto at_in = [=](std::size_t oh, std::size_t ow, std::size_t a, std::size_t c, Index& ih, Index& iw) {
    ih = static_cast<Index>(oh) * sh + static_cast<Index>(a) - ph;
    iw = static_cast<Index>(ow) * sw + static_cast<Index>(c) - pw;
    return ih >= 0 && ih < static_cast<Index>(h) && iw >= 0 && iw < static_cast<Index>(w);
  };
  std::vector<Real> out(batch * out_ch * ho * wo, 0.0);
  if (bias.defined()) add_bias(out.data(), bias.data().data(), batch * out_ch, out_ch, ho * wo);
  const Real* x = input.data().data();
  const Real* wt = weight.data().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_ch; ++o)
      for (std::size_t i = 0; i < in_ch; ++i)
        for (std::size_t a = 0; a < kh; ++a)
          for (std::size_t c = 0; c < kw; ++c) {
            const Real wv = wt[((o * in_ch + i) * kh + a) * kw + c];
            for (std::size_t oh = 0; oh < ho; ++oh)
              for (std::size_t ow = 0; ow < wo; ++ow) {
                Index ih, iw;
                if (!at_in(oh, ow, a, c, ih, iw)) continue;
                out[((b * out_ch + o) * ho + oh) * wo + ow] +=
                    wv * x[((b * in_ch + i) * h + static_cast<std::size_t>(ih)) * w + static_cast<std::size_t>(iw)];
              }
          }

  std::vector<Tensor> parents{input, weight};
  if (bias.defined()) parents.push_back(bias);
  return Tensor::make_result({batch, out_ch, ho, wo}, std::move(out), std::move(parents), [=](detail::Node& self) {
    auto& xn = *self.parents[0];
    auto& wn = *self.parents[1];
    Real* gx = xn.requires_grad ? xn.ensure_grad().data() : nullptr;
    Real* gw = wn.requires_grad ? wn.ensure_grad().data() : nullptr;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t o = 0; o < out_ch; ++o)
        for (std::size_t i = 0; i < in_ch; ++i)
          for (std::size_t a = 0; a < kh; ++a)
            for (std::size_t c = 0; c < kw; ++c) {
              const std::size_t widx = ((o * in_ch + i) * kh + a) * kw + c;
              for (std::size_t oh = 0; oh < ho; ++oh)
                for (std::size_t ow = 0; ow < wo; ++ow) {
                  Index ih, iw;
                  if (!at_in(oh, ow, a, c, ih, iw)) continue;
                  const Real go = self.grad[((b * out_ch + o) * ho + oh) * wo + ow];
                  const std::size_t xi =
                      ((b * in_ch + i) * h + static_cast<std::size_t>(ih)) * w + static_cast<std::size_t>(iw);
                  if (gx) gx[xi] += wn.value[widx] * go;
                  if (gw) gw[widx] += xn.value[xi] * go;
                }
            }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      accumulate_bias_grad(self.grad.data(), self.parents[2]->ensure_grad().data(), batch * out_ch, out_ch,
                           ho * wo);
    }
  });
}

}  // namespace bwe::nn
