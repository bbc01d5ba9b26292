#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "bwe/dsp.hpp"
#include "bwe/fft.hpp"

namespace bwe::dsp {

AudioBuffer decimate(const AudioBuffer& buf, const RatioSpec& ratio) {
  if (!ratio.is_integer()) {
    throw std::invalid_argument("decimate: non-integer ratio; use fft_resample");
  }
  if (std::abs(buf.sample_rate - ratio.f_high()) > 1e-9 * ratio.f_high()) {
    throw std::invalid_argument("decimate: buffer rate " + std::to_string(buf.sample_rate) +
                                " does not match wideband rate " + std::to_string(ratio.f_high()));
  }
  const auto s = static_cast<std::size_t>(ratio.numerator());
  const AudioBuffer filtered = sosfiltfilt(antialias_filter(ratio.numerator()), buf);
  AudioBuffer out;
  out.sample_rate = ratio.f_low();
  out.samples.resize(buf.size() / s);
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] = filtered.samples[i * s];
  return out;
}

AudioBuffer fft_resample(const AudioBuffer& buf, double target_rate) {
  if (buf.empty()) throw std::invalid_argument("fft_resample: empty buffer");
  if (!(target_rate > 0.0) || !(buf.sample_rate > 0.0)) {
    throw std::invalid_argument("fft_resample: rates must be positive");
  }
  const std::size_t n_in = buf.size();
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_in) * target_rate / buf.sample_rate));
  if (n_out == 0) throw std::invalid_argument("fft_resample: output would be empty");

  AudioBuffer out;
  out.sample_rate = target_rate;
  if (n_out == n_in) {
    out.samples = buf.samples;
    return out;
  }

  const auto spectrum = fft::rfft(buf.samples);
  std::vector<std::complex<double>> resized(n_out / 2 + 1, {0.0, 0.0});
  const std::size_t shared = std::min(n_in, n_out);
  const std::size_t copy = shared / 2 + 1;
  for (std::size_t k = 0; k < copy; ++k) resized[k] = spectrum[k];
  // The bin at shared/2 is a Nyquist bin on the shorter side when `shared`
  // is even: split its energy when growing, fold the mirror image back when
  // shrinking.
  if (shared % 2 == 0) {
    if (n_out > n_in) {
      resized[shared / 2] *= 0.5;
    } else {
      resized[shared / 2] *= 2.0;
    }
  }
  std::vector<double> y = fft::irfft_unnormalized(resized, n_out);
  const double scale = 1.0 / static_cast<double>(n_in);
  for (double& v : y) v *= scale;
  out.samples = std::move(y);
  return out;
}

}  // namespace bwe::dsp
