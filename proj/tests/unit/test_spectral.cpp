#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "bwe/spectral.hpp"
#include "oracles.hpp"

using namespace bwe;
using namespace bwe::spectral;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  return oracle::random_vector(n, rng, scale);
}

}  // namespace

TEST_CASE("Frame counts for both padding modes", "[spectral]") {
  const StftConfig center{1024, 1024, 256, FramePadding::kCenter};
  const StftConfig aligned{1024, 1024, 256, FramePadding::kHopAligned};
  for (std::size_t n : {256u, 4096u, 8192u, 16000u}) {
    CHECK(center.frame_count(n) == 1 + n / 256);
    CHECK(stft(noise(n, 1), center).frames == 1 + n / 256);
  }
  for (std::size_t n : {256u, 4096u, 8192u}) {
    CHECK(aligned.frame_count(n) == n / 256);
    CHECK(stft(noise(n, 2), aligned).frames == n / 256);
  }
  CHECK(aligned.pad_left() == 384);
  CHECK(aligned.pad_right() == 384);
}

TEST_CASE("Config presets", "[spectral]") {
  const auto t = training_stft_config();
  CHECK(t.fft_size == 1024);
  CHECK(t.win_size == 1024);
  CHECK(t.hop == 256);
  CHECK(t.padding == FramePadding::kHopAligned);
  const auto l = lsd_stft_config();
  CHECK(l.fft_size == 2048);
  CHECK(l.hop == 512);
  CHECK(l.padding == FramePadding::kCenter);
  CHECK_THROWS_AS((StftConfig{1024, 2048, 256}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((StftConfig{1024, 1024, 0}.validate()), std::invalid_argument);
}

TEST_CASE("Reflect padding follows numpy, including pads longer than the signal", "[spectral]") {
  for (std::size_t n : {1u, 2u, 3u, 5u, 10u}) {
    for (std::size_t pad : {0u, 1u, 4u, 13u}) {
      const auto idx = reflect_pad_indices(n, pad, pad + 1);
      REQUIRE(idx.size() == n + 2 * pad + 1);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        CHECK(idx[i] == oracle::reflect_index(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(pad), n));
      }
    }
  }
}

TEST_CASE("Periodic Hann window", "[spectral]") {
  const auto w = hann_window(8);
  CHECK(w[0] == 0.0);
  CHECK(w[4] == Catch::Approx(1.0));
  CHECK(w[2] == Catch::Approx(0.5));
  CHECK(w[6] == Catch::Approx(0.5));
}

TEST_CASE("STFT power matches a direct DFT", "[spectral]") {
  const auto x = noise(1500, 5);
  for (const auto& cfg : {StftConfig{256, 256, 64, FramePadding::kCenter},
                          StftConfig{256, 160, 64, FramePadding::kHopAligned}}) {
    const auto spec = stft(x, cfg);
    const auto ref = oracle::power_frames(x, cfg.fft_size, cfg.win_size, cfg.hop,
                                          cfg.padding == FramePadding::kCenter);
    REQUIRE(spec.frames == ref.size());
    for (std::size_t t = 0; t < spec.frames; ++t)
      for (std::size_t k = 0; k < spec.bins; ++k) CHECK(std::norm(spec(t, k)) == Catch::Approx(ref[t][k]).epsilon(1e-9).margin(1e-9));
  }
}

TEST_CASE("Mel filterbank matches an independent construction", "[spectral]") {
  const auto fb = mel_filterbank(80, 1024, 16000.0);
  const auto ref = oracle::mel_filters(80, 1024, 16000.0);
  REQUIRE(fb.rows == 80);
  REQUIRE(fb.cols == 513);
  for (std::size_t m = 0; m < 80; ++m) {
    double peak = 0.0;
    for (std::size_t k = 0; k < 513; ++k) {
      CHECK(fb(m, k) == Catch::Approx(ref[m][k]).margin(1e-12));
      peak = std::max(peak, fb(m, k));
    }
    CHECK(peak <= 1.0);
    CHECK(peak > 0.0);
  }
  CHECK(hz_to_mel(mel_to_hz(1234.5)) == Catch::Approx(1234.5));
  CHECK(hz_to_mel(700.0) == Catch::Approx(2595.0 * std::log10(2.0)));
  CHECK_THROWS_AS(mel_filterbank(512, 1024, 16000.0), std::invalid_argument);
}

TEST_CASE("Log-mel analyzer matches the oracle", "[spectral]") {
  const auto x = noise(2048, 7);
  for (const auto& cfg : {StftConfig{256, 256, 64, FramePadding::kHopAligned},
                          StftConfig{256, 200, 64, FramePadding::kCenter}}) {
    const LogMelAnalyzer an(cfg, 20, 16000.0);
    const auto got = an.forward(x);
    const auto ref = oracle::log_mel(x, cfg.fft_size, cfg.win_size, cfg.hop, cfg.padding == FramePadding::kCenter, 20,
                                     16000.0);
    REQUIRE(got.rows == ref.size());
    for (std::size_t t = 0; t < got.rows; ++t)
      for (std::size_t m = 0; m < 20; ++m) CHECK(got(t, m) == Catch::Approx(ref[t][m]).margin(1e-9));
  }
}

TEST_CASE("mel_spectrogram floors silence at the power floor", "[spectral]") {
  AudioBuffer silent{std::vector<double>(2048, 0.0), 16000.0};
  const auto mel = mel_spectrogram(silent, training_stft_config());
  CHECK(mel.frames() == 8);
  CHECK(mel.bands() == 80);
  for (double v : mel.values.values) CHECK(v == std::log(kPowerFloor));
}

TEST_CASE("LSD matches the direct double-loop definition", "[spectral]") {
  const auto a = noise(4000, 21), b = noise(4000, 22);
  const AudioBuffer ra{a, 16000.0}, rb{b, 16000.0};
  CHECK(log_spectral_distance(ra, rb) == Catch::Approx(oracle::lsd(a, b)).margin(1e-9));
  CHECK(log_spectral_distance(ra, ra) == 0.0);
  CHECK(log_spectral_distance(ra, rb) == Catch::Approx(log_spectral_distance(rb, ra)).margin(1e-12));
  CHECK_THROWS_AS(log_spectral_distance(ra, AudioBuffer{std::vector<double>(10), 16000.0}), std::invalid_argument);
}

TEST_CASE("LSD of a uniformly scaled signal is the dB gain in bels", "[spectral]") {
  auto a = noise(8000, 4);
  auto b = a;
  for (auto& v : b) v *= 10.0;
  // A factor of 10 in amplitude is exactly 2 in log10 power at every bin.
  CHECK(log_spectral_distance({a, 16000.0}, {b, 16000.0}) == Catch::Approx(2.0).margin(1e-9));
}
