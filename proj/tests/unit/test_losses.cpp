#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "bwe/errors.hpp"
#include "bwe/losses.hpp"
#include "bwe/nn/ops.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace bwe;
using namespace bwe::losses;
using gradcheck::max_relative_error;
using gradcheck::random_leaf;
using nn::Shape;

namespace {

std::vector<Tensor> filled(std::initializer_list<Shape> shapes, double v) {
  std::vector<Tensor> out;
  for (const auto& s : shapes) out.push_back(Tensor::full(s, v));
  return out;
}

const std::initializer_list<Shape> kScoreShapes{{2, 1, 7, 2}, {2, 1, 5, 3}, {2, 1, 31}};

}  // namespace

TEST_CASE("Least-squares discriminator loss reference values", "[losses][a5]") {
  CHECK(discriminator_loss(filled(kScoreShapes, 1.0), filled(kScoreShapes, 0.0)).item() == 0.0);
  CHECK(discriminator_loss(filled(kScoreShapes, 0.0), filled(kScoreShapes, 1.0)).item() == 2.0);
  CHECK(discriminator_loss(filled(kScoreShapes, 0.5), filled(kScoreShapes, 0.5)).item() == 0.5);
  CHECK_THROWS_AS(discriminator_loss(filled(kScoreShapes, 1.0), filled({{2, 1, 31}}, 0.0)), std::invalid_argument);
}

TEST_CASE("Generator adversarial loss reference values", "[losses][a5]") {
  CHECK(generator_adversarial_loss(filled(kScoreShapes, 1.0)).item() == 0.0);
  CHECK(generator_adversarial_loss(filled(kScoreShapes, 0.0)).item() == 1.0);
  CHECK(generator_adversarial_loss(filled(kScoreShapes, 0.5)).item() == 0.25);
}

TEST_CASE("Loss weights combine unit components to 53.1", "[losses][a5]") {
  const LossWeights w;
  CHECK(w.adv == 1.1);
  CHECK(w.mel == 50.0);
  CHECK(w.feat == 2.0);
  const auto b = total_generator_loss(1.0, 1.0, 1.0);
  CHECK(b.total == 53.1);
  const auto t = weighted_generator_loss(Tensor::scalar(1.0), Tensor::scalar(1.0), Tensor::scalar(1.0));
  CHECK(t.item() == 53.1);
  CHECK_THROWS_AS(total_generator_loss(std::numeric_limits<double>::quiet_NaN(), 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS((LossWeights{-1.0, 1.0, 1.0}.validate()), std::invalid_argument);
}

TEST_CASE("Feature matching sums per-layer mean absolute differences", "[losses]") {
  std::vector<std::vector<Tensor>> real{{Tensor::full({1, 2}, 1.0), Tensor::full({3}, 0.0)}, {Tensor::full({4}, 2.0)}};
  std::vector<std::vector<Tensor>> fake{{Tensor::full({1, 2}, 0.5), Tensor::full({3}, -1.0)}, {Tensor::full({4}, 2.0)}};
  CHECK(feature_matching_loss(real, fake).item() == 0.5 + 1.0 + 0.0);
  CHECK(feature_matching_loss(real, real).item() == 0.0);
}

TEST_CASE("L2 waveform loss", "[losses]") {
  const auto a = Tensor::from({1, 1, 4}, {0, 1, 2, 3});
  const auto b = Tensor::from({1, 1, 4}, {1, 1, 2, 1});
  CHECK(l2_waveform_loss(a, b).item() == (1.0 + 0.0 + 0.0 + 4.0) / 4.0);
}

TEST_CASE("Differentiable log-mel matches the oracle", "[losses]") {
  const spectral::StftConfig cfg{128, 96, 32, spectral::FramePadding::kHopAligned};
  const spectral::LogMelAnalyzer an(cfg, 8, 16000.0);
  const auto wave = random_leaf({2, 1, 256}, 3, 0.3);
  const auto m = log_mel(wave, an);
  REQUIRE(m.shape() == Shape{2, 8, 8});
  for (std::size_t b = 0; b < 2; ++b) {
    std::vector<double> x(wave.data().begin() + b * 256, wave.data().begin() + (b + 1) * 256);
    const auto ref = oracle::log_mel(x, 128, 96, 32, false, 8, 16000.0);
    for (std::size_t t = 0; t < 8; ++t)
      for (std::size_t k = 0; k < 8; ++k) CHECK(m.data()[(b * 8 + t) * 8 + k] == Catch::Approx(ref[t][k]).margin(1e-9));
  }
}

TEST_CASE("Loss functions pass finite-difference checks", "[losses][grad]") {
  const spectral::StftConfig cfg{64, 48, 16, spectral::FramePadding::kHopAligned};
  const spectral::LogMelAnalyzer an(cfg, 6, 16000.0);
  const spectral::StftConfig centered{64, 64, 16, spectral::FramePadding::kCenter};
  const spectral::LogMelAnalyzer an_c(centered, 6, 16000.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto wave = random_leaf({2, 1, 96}, seed, 0.3);
    CHECK(max_relative_error([&an](auto& in) { return log_mel(in[0], an); }, {wave}, seed) < 1e-4);
    CHECK(max_relative_error([&an_c](auto& in) { return log_mel(in[0], an_c); }, {wave}, seed) < 1e-4);

    // The reference and the real features are constants of these losses.
    auto ref = random_leaf({2, 1, 96}, seed + 50, 0.3);
    ref.set_requires_grad(false);
    CHECK(max_relative_error([&an](auto& in) { return mel_reconstruction_loss(in[1], in[0], an); }, {wave, ref},
                             seed) < 1e-4);

    auto r1 = random_leaf({2, 1, 4, 2}, seed), r2 = random_leaf({2, 1, 9}, seed + 1);
    auto f1 = random_leaf({2, 1, 4, 2}, seed + 2), f2 = random_leaf({2, 1, 9}, seed + 3);
    CHECK(max_relative_error([](auto& in) { return discriminator_loss({in[0], in[1]}, {in[2], in[3]}); },
                             {r1, r2, f1, f2}, seed) < 1e-4);
    CHECK(max_relative_error([](auto& in) { return generator_adversarial_loss({in[0], in[1]}); }, {f1, f2}, seed) <
          1e-4);
    auto c1 = r1.detach(), c2 = r2.detach();
    CHECK(max_relative_error([](auto& in) { return feature_matching_loss({{in[0]}, {in[1]}}, {{in[2]}, {in[3]}}); },
                             {c1, c2, f1, f2}, seed) < 1e-4);
    CHECK(max_relative_error([](auto& in) { return l2_waveform_loss(in[0], in[1]); }, {f2, r2}, seed) < 1e-4);
    CHECK(max_relative_error([](auto& in) { return weighted_generator_loss(in[0], in[1], in[2]); },
                             {random_leaf({1}, seed), random_leaf({1}, seed + 1), random_leaf({1}, seed + 2)},
                             seed) < 1e-4);
  }
}

TEST_CASE("Real features and the mel reference receive no gradient", "[losses]") {
  auto real = random_leaf({3}, 1), fake = random_leaf({3}, 2);
  feature_matching_loss({{real}}, {{fake}}).backward();
  CHECK_FALSE(real.has_grad());
  CHECK(fake.has_grad());

  const spectral::LogMelAnalyzer an({64, 64, 16, spectral::FramePadding::kHopAligned}, 6, 16000.0);
  auto ref = random_leaf({1, 1, 64}, 3), gen = random_leaf({1, 1, 64}, 4);
  mel_reconstruction_loss(ref, gen, an).backward();
  CHECK_FALSE(ref.has_grad());
  CHECK(gen.has_grad());
}
