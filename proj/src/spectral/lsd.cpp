#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bwe/spectral.hpp"

namespace bwe::spectral {

PowerSpectrogram log_power_spectrogram(std::span<const double> samples, const StftConfig& cfg) {
  const ComplexSpectrogram spec = stft(samples, cfg);
  PowerSpectrogram out{Matrix(spec.frames, spec.bins), cfg};
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    out.values.values[i] = std::log10(std::max(std::norm(spec.values[i]), kPowerFloor));
  }
  return out;
}

double log_spectral_distance(const AudioBuffer& reference, const AudioBuffer& estimate,
                             const StftConfig& cfg) {
  if (reference.empty() || estimate.empty()) throw std::invalid_argument("lsd: zero-length signal");
  if (reference.size() != estimate.size()) {
    throw std::invalid_argument("lsd: length mismatch (" + std::to_string(reference.size()) + " vs " +
                                std::to_string(estimate.size()) + ")");
  }
  if (reference.sample_rate != estimate.sample_rate) throw std::invalid_argument("lsd: sample rate mismatch");

  const PowerSpectrogram a = log_power_spectrogram(reference.samples, cfg);
  const PowerSpectrogram b = log_power_spectrogram(estimate.samples, cfg);
  const std::size_t frames = a.values.rows;
  const std::size_t bins = a.values.cols;
  double total = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    const auto ra = a.values.row(t);
    const auto rb = b.values.row(t);
    double sq = 0.0;
    for (std::size_t f = 0; f < bins; ++f) {
      const double d = ra[f] - rb[f];
      sq += d * d;
    }
    total += std::sqrt(sq / static_cast<double>(bins));
  }
  return total / static_cast<double>(frames);
}

}  // namespace bwe::spectral
