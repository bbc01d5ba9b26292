#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "bwe/audio_io.hpp"

namespace bwe::dsp {

using audio::AudioBuffer;

/// One biquad in transposed direct form II. a0 is implicitly 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

struct SosFilter {
  std::vector<Biquad> sections;
  int order = 0;
  double ripple_db = 0.0;
  double cutoff = 0.0;  // fraction of Nyquist

  /// Complex response at a normalized frequency (1.0 == Nyquist).
  std::complex<double> response(double normalized_freq) const;
  /// Roots of every section's denominator.
  std::vector<std::complex<double>> poles() const;
};

/// Upsampling ratio s = num/den between a wideband and a narrowband rate.
///
/// The wideband rate is stored exactly; the narrowband rate is derived so
/// that f_high == s * f_low holds by construction.
class RatioSpec {
 public:
  RatioSpec(std::int64_t num, std::int64_t den, double f_high);
  static RatioSpec integer(std::int64_t s, double f_high) { return {s, 1, f_high}; }

  double s() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::int64_t numerator() const { return num_; }
  std::int64_t denominator() const { return den_; }
  bool is_integer() const { return den_ == 1; }
  double f_high() const { return f_high_; }
  double f_low() const { return f_high_ * static_cast<double>(den_) / static_cast<double>(num_); }
  double b_high() const { return f_high() / 2.0; }
  double b_low() const { return f_low() / 2.0; }

 private:
  std::int64_t num_;
  std::int64_t den_;
  double f_high_;
};

/// Even-order Chebyshev type I low-pass as cascaded second-order sections.
/// Each section is scaled to unity gain at DC, so the cascade has 0 dB at DC
/// and rises to +ripple_db at the passband ripple peaks.
SosFilter design_cheby1_lowpass(int order, double ripple_db, double cutoff);

/// Anti-alias filter used ahead of integer subsampling by s: order 8,
/// 0.05 dB ripple, cutoff at 0.8 of the post-decimation Nyquist.
SosFilter antialias_filter(std::int64_t s);

/// Single causal pass with optional initial section states (2 per section).
std::vector<double> sosfilt(const SosFilter& filter, std::span<const double> x,
                            std::span<const double> initial_state = {});

/// Steady-state section states for a unit step input.
std::vector<double> sosfilt_zi(const SosFilter& filter);

/// Zero-phase forward-backward filtering with odd reflection padding of
/// 3 x order samples at each edge.
AudioBuffer sosfiltfilt(const SosFilter& filter, const AudioBuffer& buf);

/// Anti-alias filter then keep every s-th sample. Output length floor(n/s).
AudioBuffer decimate(const AudioBuffer& buf, const RatioSpec& ratio);

/// Frequency-domain resampling: spectrum zero-padded or truncated to
/// round(n * target / source) bins; FFT length equals the signal length.
AudioBuffer fft_resample(const AudioBuffer& buf, double target_rate);

}  // namespace bwe::dsp
