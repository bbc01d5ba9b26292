#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bwe/fft.hpp"
#include "bwe/spectral.hpp"

namespace bwe::spectral {

void StftConfig::validate() const {
  if (hop == 0) throw std::invalid_argument("stft: hop must be positive");
  if (fft_size < 2) throw std::invalid_argument("stft: fft_size must be >= 2");
  if (win_size == 0 || win_size > fft_size) {
    throw std::invalid_argument("stft: window must be non-empty and no longer than fft_size");
  }
  if (hop > win_size) throw std::invalid_argument("stft: hop must not exceed the window");
}

std::size_t StftConfig::pad_left() const {
  return padding == FramePadding::kCenter ? fft_size / 2 : (fft_size - hop) / 2;
}

std::size_t StftConfig::pad_right() const {
  return padding == FramePadding::kCenter ? fft_size / 2 : (fft_size - hop) - (fft_size - hop) / 2;
}

std::size_t StftConfig::frame_count(std::size_t n) const {
  const std::size_t padded = n + pad_left() + pad_right();
  if (padded < fft_size) return 0;
  return 1 + (padded - fft_size) / hop;
}

StftConfig training_stft_config() {
  return StftConfig{1024, 1024, 256, FramePadding::kHopAligned};
}

StftConfig lsd_stft_config() {
  return StftConfig{2048, 2048, 512, FramePadding::kCenter};
}

std::vector<double> hann_window(std::size_t win_size) {
  std::vector<double> w(win_size);
  for (std::size_t i = 0; i < win_size; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(win_size));
  }
  return w;
}

std::vector<std::size_t> reflect_pad_indices(std::size_t n, std::size_t left, std::size_t right) {
  if (n == 0) throw std::invalid_argument("reflect_pad_indices: empty signal");
  std::vector<std::size_t> idx(n + left + right);
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  for (std::size_t p = 0; p < idx.size(); ++p) {
    if (n == 1) {
      idx[p] = 0;
      continue;
    }
    std::ptrdiff_t j = static_cast<std::ptrdiff_t>(p) - static_cast<std::ptrdiff_t>(left);
    j = ((j % period) + period) % period;
    if (j >= static_cast<std::ptrdiff_t>(n)) j = period - j;
    idx[p] = static_cast<std::size_t>(j);
  }
  return idx;
}

ComplexSpectrogram stft(std::span<const double> samples, const StftConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw std::invalid_argument("stft: empty signal");
  const std::size_t frames = cfg.frame_count(samples.size());
  if (frames == 0) throw std::invalid_argument("stft: signal shorter than one frame");

  const auto index = reflect_pad_indices(samples.size(), cfg.pad_left(), cfg.pad_right());
  const auto win = hann_window(cfg.win_size);
  const std::size_t offset = (cfg.fft_size - cfg.win_size) / 2;

  ComplexSpectrogram out;
  out.frames = frames;
  out.bins = cfg.bins();
  out.values.resize(frames * out.bins);
  std::vector<double> frame(cfg.fft_size);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    const std::size_t start = t * cfg.hop;
    for (std::size_t i = 0; i < cfg.win_size; ++i) {
      frame[offset + i] = win[i] * samples[index[start + offset + i]];
    }
    const auto spec = fft::rfft(frame);
    std::copy(spec.begin(), spec.end(), out.values.begin() + static_cast<std::ptrdiff_t>(t * out.bins));
  }
  return out;
}

ComplexSpectrogram stft(const AudioBuffer& buf, const StftConfig& cfg) {
  return stft(std::span<const double>(buf.samples), cfg);
}

}  // namespace bwe::spectral
