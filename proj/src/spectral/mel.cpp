#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bwe/fft.hpp"
#include "bwe/spectral.hpp"

namespace bwe::spectral {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_edges_hz(std::size_t n_mels, double sample_rate) {
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  return edges;
}

}  // namespace

std::vector<double> mel_center_frequencies(std::size_t n_mels, double sample_rate) {
  const auto edges = mel_edges_hz(n_mels, sample_rate);
  return {edges.begin() + 1, edges.end() - 1};
}

Matrix mel_filterbank(std::size_t n_mels, std::size_t fft_size, double sample_rate) {
  if (n_mels == 0 || fft_size < 2 || n_mels >= fft_size / 2) {
    throw std::invalid_argument("mel_filterbank: need 0 < n_mels < fft_size / 2");
  }
  if (!(sample_rate > 0.0)) throw std::invalid_argument("mel_filterbank: sample rate must be positive");

  const auto edges = mel_edges_hz(n_mels, sample_rate);
  const std::size_t bins = fft_size / 2 + 1;
  Matrix fb(n_mels, bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    double area = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
      const double w = std::max(0.0, std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid)));
      fb(m, k) = w;
      area += w;
    }
    if (!(area > 0.0)) {
      throw std::invalid_argument("mel_filterbank: filter " + std::to_string(m) +
                                  " covers no FFT bin; use fewer bands or a longer FFT");
    }
  }
  return fb;
}

LogMelAnalyzer::LogMelAnalyzer(const StftConfig& cfg, std::size_t n_mels, double sample_rate)
    : cfg_(cfg), n_mels_(n_mels), window_(cfg.fft_size, 0.0),
      filters_(mel_filterbank(n_mels, cfg.fft_size, sample_rate)) {
  cfg_.validate();
  const auto win = hann_window(cfg.win_size);
  const std::size_t offset = (cfg.fft_size - cfg.win_size) / 2;
  std::copy(win.begin(), win.end(), window_.begin() + static_cast<std::ptrdiff_t>(offset));
}

Matrix LogMelAnalyzer::forward(std::span<const double> samples) const {
  if (samples.empty()) throw std::invalid_argument("mel_spectrogram: empty signal");
  const std::size_t frames = cfg_.frame_count(samples.size());
  if (frames == 0) throw std::invalid_argument("mel_spectrogram: signal shorter than one frame");
  const auto index = reflect_pad_indices(samples.size(), cfg_.pad_left(), cfg_.pad_right());
  const std::size_t n_fft = cfg_.fft_size;
  const std::size_t bins = cfg_.bins();

  Matrix out(frames, n_mels_);
  std::vector<double> frame(n_fft);
  std::vector<double> power(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * cfg_.hop;
    for (std::size_t i = 0; i < n_fft; ++i) frame[i] = window_[i] * samples[index[start + i]];
    const auto spec = fft::rfft(frame);
    for (std::size_t k = 0; k < bins; ++k) power[k] = std::norm(spec[k]);
    for (std::size_t m = 0; m < n_mels_; ++m) {
      const auto row = filters_.row(m);
      double acc = 0.0;
      for (std::size_t k = 0; k < bins; ++k) acc += row[k] * power[k];
      out(t, m) = std::log(std::max(acc, kPowerFloor));
    }
  }
  return out;
}

void LogMelAnalyzer::backward(std::span<const double> samples, const Matrix& grad_out,
                              std::span<double> grad_samples) const {
  const std::size_t frames = cfg_.frame_count(samples.size());
  if (grad_out.rows != frames || grad_out.cols != n_mels_ || grad_samples.size() != samples.size()) {
    throw std::invalid_argument("LogMelAnalyzer::backward: shape mismatch");
  }
  const auto index = reflect_pad_indices(samples.size(), cfg_.pad_left(), cfg_.pad_right());
  const std::size_t n_fft = cfg_.fft_size;
  const std::size_t bins = cfg_.bins();

  std::vector<double> frame(n_fft);
  std::vector<double> grad_power(bins);
  std::vector<double> grad_mel(n_mels_);
  std::vector<std::complex<double>> weighted(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * cfg_.hop;
    for (std::size_t i = 0; i < n_fft; ++i) frame[i] = window_[i] * samples[index[start + i]];
    const auto spec = fft::rfft(frame);

    // d log(max(mel, floor)) / d mel is 1/mel above the floor and 0 on it.
    for (std::size_t m = 0; m < n_mels_; ++m) {
      const auto row = filters_.row(m);
      double mel = 0.0;
      for (std::size_t k = 0; k < bins; ++k) mel += row[k] * std::norm(spec[k]);
      grad_mel[m] = mel > kPowerFloor ? grad_out(t, m) / mel : 0.0;
    }
    std::fill(grad_power.begin(), grad_power.end(), 0.0);
    for (std::size_t m = 0; m < n_mels_; ++m) {
      if (grad_mel[m] == 0.0) continue;
      const auto row = filters_.row(m);
      for (std::size_t k = 0; k < bins; ++k) grad_power[k] += grad_mel[m] * row[k];
    }

    // dP_k/du_n = 2 Re(X_k e^{+2 pi i k n / N}); the sum over one-sided bins
    // is an inverse real transform once DC and Nyquist carry double weight.
    for (std::size_t k = 0; k < bins; ++k) weighted[k] = grad_power[k] * spec[k];
    weighted[0] *= 2.0;
    if (n_fft % 2 == 0) weighted[bins - 1] *= 2.0;
    const auto grad_frame = fft::irfft_unnormalized(weighted, n_fft);
    for (std::size_t i = 0; i < n_fft; ++i) {
      grad_samples[index[start + i]] += window_[i] * grad_frame[i];
    }
  }
}

MelSpectrogram mel_spectrogram(const AudioBuffer& buf, const StftConfig& cfg, std::size_t n_mels) {
  LogMelAnalyzer analyzer(cfg, n_mels, buf.sample_rate);
  return MelSpectrogram{analyzer.forward(buf.samples), cfg, buf.sample_rate};
}

}  // namespace bwe::spectral
