#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "bwe/dsp.hpp"
#include "bwe/fft.hpp"

using namespace bwe;
using namespace bwe::dsp;

namespace {

AudioBuffer tone(double freq, double rate, std::size_t n, double amp = 1.0) {
  AudioBuffer b{std::vector<double>(n), rate};
  for (std::size_t i = 0; i < n; ++i) b.samples[i] = amp * std::sin(2.0 * std::numbers::pi * freq * i / rate);
  return b;
}

double rms(const std::vector<double>& x, std::size_t from, std::size_t to) {
  double acc = 0.0;
  for (std::size_t i = from; i < to; ++i) acc += x[i] * x[i];
  return std::sqrt(acc / static_cast<double>(to - from));
}

double db(std::complex<double> h) { return 20.0 * std::log10(std::abs(h)); }

}  // namespace

TEST_CASE("Chebyshev design has unity DC gain and equiripple passband", "[dsp]") {
  const auto f = design_cheby1_lowpass(8, 0.05, 0.4);
  REQUIRE(f.sections.size() == 4);
  CHECK(std::abs(f.response(0.0)) == Catch::Approx(1.0).margin(1e-12));
  double hi = -1e9, lo = 1e9;
  for (int i = 0; i <= 400; ++i) {
    const double g = db(f.response(0.4 * i / 400.0));
    hi = std::max(hi, g);
    lo = std::min(lo, g);
  }
  CHECK(hi <= 0.05 + 1e-9);
  CHECK(lo >= -1e-9);
  CHECK(db(f.response(0.4)) == Catch::Approx(0.0).margin(1e-6));
  // Ripple peaks reach +0.05 dB: the passband edge sits on the bottom of the ripple.
  CHECK(hi == Catch::Approx(0.05).margin(1e-4));
  CHECK(db(f.response(0.6)) < -40.0);
  for (const auto& p : f.poles()) CHECK(std::abs(p) < 1.0);
}

TEST_CASE("Anti-alias filter matches the decimation cutoff", "[dsp]") {
  for (std::int64_t s : {2, 3, 4, 8}) {
    const auto f = antialias_filter(s);
    CHECK(f.order == 8);
    CHECK(f.ripple_db == 0.05);
    CHECK(f.cutoff == Catch::Approx(0.8 / static_cast<double>(s)));
  }
  CHECK_THROWS_AS(antialias_filter(1), std::invalid_argument);
}

TEST_CASE("sosfilt with steady-state initial conditions passes a constant", "[dsp]") {
  const auto f = antialias_filter(4);
  std::vector<double> ones(200, 1.0);
  auto zi = sosfilt_zi(f);
  const auto y = sosfilt(f, ones, zi);
  for (double v : y) CHECK(v == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("sosfiltfilt has zero phase", "[dsp]") {
  const auto f = design_cheby1_lowpass(8, 0.05, 0.5);
  const auto x = tone(500.0, 16000.0, 4000);
  const auto y = sosfiltfilt(f, x);
  REQUIRE(y.size() == x.size());
  double worst = 0.0;
  for (std::size_t i = 500; i < 3500; ++i) worst = std::max(worst, std::abs(y.samples[i] - x.samples[i]));
  CHECK(worst < 0.01);
}

TEST_CASE("Decimating a 7 kHz tone by 2 removes it", "[dsp][a7]") {
  const auto x = tone(7000.0, 16000.0, 16000);
  const auto y = decimate(x, RatioSpec::integer(2, 16000.0));
  REQUIRE(y.size() == 8000);
  CHECK(y.sample_rate == 8000.0);
  CHECK(rms(y.samples, 0, y.size()) / rms(x.samples, 0, x.size()) < 0.02);
}

TEST_CASE("Decimating a 1 kHz tone keeps its amplitude", "[dsp][a7]") {
  const auto x = tone(1000.0, 16000.0, 16000, 0.8);
  const auto y = decimate(x, RatioSpec::integer(2, 16000.0));
  const double amp = std::sqrt(2.0) * rms(y.samples, 400, y.size() - 400);
  CHECK(std::abs(amp - 0.8) / 0.8 < 0.01);
}

TEST_CASE("Decimated length is floor(n / s)", "[dsp][a7]") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.1);
  for (std::size_t len : {97u, 100u, 1001u, 4096u}) {
    AudioBuffer x{std::vector<double>(len), 16000.0};
    for (auto& v : x.samples) v = n(rng);
    for (std::int64_t s : {2, 3, 4, 5, 6, 8}) {
      const auto y = decimate(x, RatioSpec::integer(s, 16000.0));
      CHECK(y.size() == len / static_cast<std::size_t>(s));
      CHECK(y.sample_rate == Catch::Approx(16000.0 / static_cast<double>(s)));
    }
  }
}

TEST_CASE("RatioSpec keeps f_high exact", "[dsp]") {
  const RatioSpec r(3, 1, 16000.0);
  CHECK(r.f_high() == 16000.0);
  CHECK(r.f_low() * 3.0 == Catch::Approx(16000.0));
  CHECK(r.b_low() == Catch::Approx(16000.0 / 6.0));
  const RatioSpec frac(5, 2, 16000.0);
  CHECK(frac.s() == 2.5);
  CHECK_FALSE(frac.is_integer());
}

TEST_CASE("fft_resample length and band-limited round trip", "[dsp]") {
  const auto x = tone(1000.0, 8000.0, 800);
  const auto up = fft_resample(x, 16000.0);
  REQUIRE(up.size() == 1600);
  CHECK(up.sample_rate == 16000.0);
  // A tone on an exact bin is reproduced exactly at the new rate.
  const auto expect = tone(1000.0, 16000.0, 1600);
  for (std::size_t i = 0; i < up.size(); ++i) CHECK(up.samples[i] == Catch::Approx(expect.samples[i]).margin(1e-9));
  const auto down = fft_resample(up, 8000.0);
  REQUIRE(down.size() == 800);
  for (std::size_t i = 0; i < down.size(); ++i) CHECK(down.samples[i] == Catch::Approx(x.samples[i]).margin(1e-9));

  const auto odd = fft_resample(tone(300.0, 16000.0 / 3.0, 533), 16000.0);
  CHECK(odd.size() == 1599);
}

TEST_CASE("rfft matches a direct DFT", "[dsp]") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t len : {7u, 16u, 45u}) {
    std::vector<double> x(len);
    for (auto& v : x) v = n(rng);
    const auto X = fft::rfft(x);
    REQUIRE(X.size() == len / 2 + 1);
    for (std::size_t k = 0; k < X.size(); ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t j = 0; j < len; ++j) acc += x[j] * std::polar(1.0, -2.0 * std::numbers::pi * k * j / len);
      CHECK(std::abs(X[k] - acc) < 1e-10);
    }
    const auto back = fft::irfft_unnormalized(X, len);
    for (std::size_t j = 0; j < len; ++j) CHECK(back[j] / len == Catch::Approx(x[j]).margin(1e-12));
  }
}
