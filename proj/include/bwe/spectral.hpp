#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "bwe/audio_io.hpp"

namespace bwe::spectral {

using audio::AudioBuffer;

/// How a signal is extended before framing.
///  - kCenter: fft_size/2 reflected samples each side; frames = 1 + floor(n / hop).
///  - kHopAligned: (fft_size - hop)/2 reflected samples each side; frames = n / hop
///    when n is a multiple of hop. Used for the generator's input so that
///    frames x hop equals the waveform length.
enum class FramePadding { kCenter, kHopAligned };

/// Hann-windowed analysis settings. A window shorter than fft_size is centered
/// and zero-padded inside the FFT frame.
struct StftConfig {
  std::size_t fft_size = 1024;
  std::size_t win_size = 1024;
  std::size_t hop = 256;
  FramePadding padding = FramePadding::kCenter;

  void validate() const;
  std::size_t bins() const { return fft_size / 2 + 1; }
  std::size_t pad_left() const;
  std::size_t pad_right() const;
  std::size_t frame_count(std::size_t n) const;
};

/// Mel front-end used for training and inference: 1024/1024/256, 80 bands.
StftConfig training_stft_config();
/// LSD analysis: 2048-sample frames, hop 512, center padding.
StftConfig lsd_stft_config();

constexpr std::size_t kMelBands = 80;
constexpr double kPowerFloor = 1e-10;

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

struct ComplexSpectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<double>> values;  // frames x bins

  std::complex<double> operator()(std::size_t t, std::size_t f) const { return values[t * bins + f]; }
};

/// Periodic Hann window of length win_size.
std::vector<double> hann_window(std::size_t win_size);

/// Index of the source sample for each position of the padded signal
/// (numpy-style "reflect", repeated when the pad exceeds the signal).
std::vector<std::size_t> reflect_pad_indices(std::size_t n, std::size_t left, std::size_t right);

ComplexSpectrogram stft(std::span<const double> samples, const StftConfig& cfg);
ComplexSpectrogram stft(const AudioBuffer& buf, const StftConfig& cfg);

/// Triangular HTK-mel filters from 0 Hz to Nyquist, unit peak (no area
/// normalization). Shape n_mels x (fft_size/2 + 1).
Matrix mel_filterbank(std::size_t n_mels, std::size_t fft_size, double sample_rate);

/// Center frequency (Hz) of each mel filter.
std::vector<double> mel_center_frequencies(std::size_t n_mels, double sample_rate);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Natural-log mel power, frames x n_mels, floored at kPowerFloor.
struct MelSpectrogram {
  Matrix values;
  StftConfig config;
  double sample_rate = 0.0;

  std::size_t frames() const { return values.rows; }
  std::size_t bands() const { return values.cols; }
};

MelSpectrogram mel_spectrogram(const AudioBuffer& buf, const StftConfig& cfg,
                               std::size_t n_mels = kMelBands);

/// log10 of |STFT|^2 floored at kPowerFloor, frames x bins.
struct PowerSpectrogram {
  Matrix values;
  StftConfig config;
};

PowerSpectrogram log_power_spectrogram(std::span<const double> samples, const StftConfig& cfg);

/// Mean over frames of the RMS (over bins) log10-power difference.
double log_spectral_distance(const AudioBuffer& reference, const AudioBuffer& estimate,
                             const StftConfig& cfg = lsd_stft_config());

/// Log-mel front end with a reverse-mode derivative, for use inside training
/// objectives. Holds the window and filterbank for one configuration.
class LogMelAnalyzer {
 public:
  LogMelAnalyzer(const StftConfig& cfg, std::size_t n_mels, double sample_rate);

  const StftConfig& config() const { return cfg_; }
  std::size_t bands() const { return n_mels_; }

  /// Frames x bands natural-log mel power.
  Matrix forward(std::span<const double> samples) const;

  /// Adds d(sum(grad_out * forward(samples)))/d(samples) into grad_samples.
  void backward(std::span<const double> samples, const Matrix& grad_out,
                std::span<double> grad_samples) const;

 private:
  StftConfig cfg_;
  std::size_t n_mels_;
  std::vector<double> window_;  // fft_size long, zero outside the centered win_size span
  Matrix filters_;
};

}  // namespace bwe::spectral
