#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "bwe/dsp.hpp"

namespace bwe::dsp {

std::complex<double> SosFilter::response(double normalized_freq) const {
  const std::complex<double> z1 = std::polar(1.0, -std::numbers::pi * normalized_freq);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const auto& s : sections) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return h;
}

std::vector<std::complex<double>> SosFilter::poles() const {
  std::vector<std::complex<double>> out;
  for (const auto& s : sections) {
    const std::complex<double> disc = std::sqrt(std::complex<double>(s.a1 * s.a1 - 4.0 * s.a2));
    out.push_back((-s.a1 + disc) / 2.0);
    out.push_back((-s.a1 - disc) / 2.0);
  }
  return out;
}

RatioSpec::RatioSpec(std::int64_t num, std::int64_t den, double f_high)
    : num_(num), den_(den), f_high_(f_high) {
  if (num <= 0 || den <= 0) throw std::invalid_argument("RatioSpec: ratio terms must be positive");
  if (num <= den) throw std::invalid_argument("RatioSpec: ratio must exceed 1");
  if (!(f_high > 0.0)) throw std::invalid_argument("RatioSpec: wideband rate must be positive");
  const std::int64_t g = std::gcd(num_, den_);
  num_ /= g;
  den_ /= g;
}

SosFilter design_cheby1_lowpass(int order, double ripple_db, double cutoff) {
  if (!(cutoff > 0.0 && cutoff < 1.0)) {
    throw std::invalid_argument("design_cheby1_lowpass: cutoff must lie in (0, 1)");
  }
  if (!(ripple_db > 0.0)) throw std::invalid_argument("design_cheby1_lowpass: ripple must be positive");
  if (order < 2 || order % 2 != 0) {
    throw std::invalid_argument("design_cheby1_lowpass: order must be even and >= 2");
  }

  // Analog prototype poles, prewarped cutoff, bilinear map with fs = 2 so
  // that the digital cutoff is `cutoff` in Nyquist units.
  const double eps = std::sqrt(std::pow(10.0, ripple_db / 10.0) - 1.0);
  const double mu = std::asinh(1.0 / eps) / order;
  const double warped = 4.0 * std::tan(std::numbers::pi * cutoff / 2.0);
  constexpr double fs2 = 4.0;

  SosFilter f;
  f.order = order;
  f.ripple_db = ripple_db;
  f.cutoff = cutoff;
  // Poles with k = 1..order/2 lie in the upper half plane; conjugates complete each pair.
  for (int k = 1; k <= order / 2; ++k) {
    const double theta = std::numbers::pi * (2.0 * k - 1.0) / (2.0 * order);
    const std::complex<double> analog(-std::sinh(mu) * std::sin(theta), std::cosh(mu) * std::cos(theta));
    const std::complex<double> p = analog * warped;
    const std::complex<double> z = (fs2 + p) / (fs2 - p);
    Biquad s;
    s.a1 = -2.0 * z.real();
    s.a2 = std::norm(z);
    const double gain = (1.0 + s.a1 + s.a2) / 4.0;
    s.b0 = gain;
    s.b1 = 2.0 * gain;
    s.b2 = gain;
    f.sections.push_back(s);
  }
  return f;
}

SosFilter antialias_filter(std::int64_t s) {
  if (s < 2) throw std::invalid_argument("antialias_filter: ratio must be >= 2");
  return design_cheby1_lowpass(8, 0.05, 0.8 / static_cast<double>(s));
}

std::vector<double> sosfilt(const SosFilter& filter, std::span<const double> x,
                            std::span<const double> initial_state) {
  const std::size_t n_sec = filter.sections.size();
  std::vector<double> state(2 * n_sec, 0.0);
  if (!initial_state.empty()) {
    if (initial_state.size() != state.size()) throw std::invalid_argument("sosfilt: state size mismatch");
    std::copy(initial_state.begin(), initial_state.end(), state.begin());
  }
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t k = 0; k < n_sec; ++k) {
    const Biquad& s = filter.sections[k];
    double z1 = state[2 * k];
    double z2 = state[2 * k + 1];
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

std::vector<double> sosfilt_zi(const SosFilter& filter) {
  std::vector<double> zi;
  double scale = 1.0;  // steady-state level entering the current section
  for (const auto& s : filter.sections) {
    const double g = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double z2 = (s.b2 - s.a2 * g) * scale;
    const double z1 = (s.b1 - s.a1 * g) * scale + z2;
    zi.push_back(z1);
    zi.push_back(z2);
    scale *= g;
  }
  return zi;
}

AudioBuffer sosfiltfilt(const SosFilter& filter, const AudioBuffer& buf) {
  const std::size_t pad = 3 * static_cast<std::size_t>(filter.order);
  const std::size_t n = buf.size();
  if (n <= pad) {
    throw std::invalid_argument("sosfiltfilt: buffer must be longer than 3 x filter order");
  }
  const auto& x = buf.samples;
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const std::vector<double> zi = sosfilt_zi(filter);
  auto scaled = [&](double v) {
    std::vector<double> out(zi);
    for (double& z : out) z *= v;
    return out;
  };
  std::vector<double> fwd = sosfilt(filter, ext, scaled(ext.front()));
  std::reverse(fwd.begin(), fwd.end());
  std::vector<double> bwd = sosfilt(filter, fwd, scaled(fwd.front()));
  std::reverse(bwd.begin(), bwd.end());

  AudioBuffer out;
  out.sample_rate = buf.sample_rate;
  out.samples.assign(bwd.begin() + static_cast<std::ptrdiff_t>(pad),
                     bwd.begin() + static_cast<std::ptrdiff_t>(pad + n));
  return out;
}

}  // namespace bwe::dsp
