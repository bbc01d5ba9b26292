#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "bwe/errors.hpp"
#include "bwe/nn/checkpoint.hpp"
#include "bwe/nn/ops.hpp"
#include "bwe/nn/optim.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace bwe;
using namespace bwe::nn;
using gradcheck::max_relative_error;
using gradcheck::random_leaf;
using gradcheck::random_leaf_away_from_zero;

namespace {

constexpr double kTol = 1e-4;
constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("Elementwise ops pass finite-difference checks", "[nn][grad]") {
  for (auto seed : kSeeds) {
    const Shape s{2, 3, 5};
    auto a = random_leaf(s, seed), b = random_leaf(s, seed + 100);
    CHECK(max_relative_error([](auto& in) { return add(in[0], in[1]); }, {a, b}, seed) < kTol);
    CHECK(max_relative_error([](auto& in) { return sub(in[0], in[1]); }, {a, b}, seed) < kTol);
    CHECK(max_relative_error([](auto& in) { return mul(in[0], in[1]); }, {a, b}, seed) < kTol);
    CHECK(max_relative_error([](auto& in) { return scale(in[0], -1.7); }, {a}, seed) < kTol);
    CHECK(max_relative_error([](auto& in) { return add_scalar(in[0], 0.3); }, {a}, seed) < kTol);
    CHECK(max_relative_error([](auto& in) { return square(in[0]); }, {a}, seed) < kTol);
    CHECK(max_relative_error([](auto& in) { return tanh(in[0]); }, {a}, seed) < kTol);
    auto k = random_leaf_away_from_zero(s, seed);
    CHECK(max_relative_error([](auto& in) { return abs(in[0]); }, {k}, seed) < kTol);
    CHECK(max_relative_error([](auto& in) { return leaky_relu(in[0], 0.1); }, {k}, seed) < kTol);
    CHECK(max_relative_error([](auto& in) { return sum(in[0]); }, {a}, seed) < kTol);
    CHECK(max_relative_error([](auto& in) { return mean(in[0]); }, {a}, seed) < kTol);
    CHECK(max_relative_error([](auto& in) { return reshape(in[0], {6, 5}); }, {a}, seed) < kTol);
    // A value reused along two paths accumulates both contributions.
    CHECK(max_relative_error([](auto& in) { return mul(in[0], tanh(in[0])); }, {a}, seed) < kTol);
  }
}

TEST_CASE("Time-axis ops pass finite-difference checks", "[nn][grad]") {
  for (auto seed : kSeeds) {
    auto x = random_leaf({2, 3, 11}, seed);
    CHECK(max_relative_error([](auto& in) { return slice_time(in[0], 2, 6); }, {x}, seed) < kTol);
    CHECK(max_relative_error([](auto& in) { return reflect_pad_right(in[0], 4); }, {x}, seed) < kTol);
    CHECK(max_relative_error([](auto& in) { return avg_pool1d(in[0], 4, 2, 2); }, {x}, seed) < kTol);
    CHECK(max_relative_error([](auto& in) { return avg_pool1d(in[0], 3, 1, 0); }, {x}, seed) < kTol);
  }
}

TEST_CASE("conv1d gradients across stride, dilation, padding and groups", "[nn][grad]") {
  struct Case {
    std::size_t cin, cout, k;
    Conv1dOptions opt;
  };
  const Case cases[] = {
      {3, 4, 3, {1, 1, 1, 1}}, {4, 4, 5, {2, 1, 2, 2}}, {2, 3, 3, {1, 3, 3, 1}}, {4, 2, 4, {3, 1, 0, 2}}};
  for (auto seed : kSeeds) {
    for (const auto& c : cases) {
      auto x = random_leaf({2, c.cin, 13}, seed);
      auto w = random_leaf({c.cout, c.cin / c.opt.groups, c.k}, seed + 7, 0.5);
      auto b = random_leaf({c.cout}, seed + 9);
      const auto opt = c.opt;
      CHECK(max_relative_error([opt](auto& in) { return conv1d(in[0], in[1], in[2], opt); }, {x, w, b}, seed) < kTol);
    }
  }
}

TEST_CASE("conv_transpose1d gradients", "[nn][grad]") {
  for (auto seed : kSeeds) {
    for (auto [stride, k, pad] : {std::tuple<std::size_t, std::size_t, std::size_t>{2, 4, 1}, {3, 3, 0}, {4, 8, 2}}) {
      auto x = random_leaf({2, 3, 6}, seed);
      auto w = random_leaf({3, 2, k}, seed + 3, 0.5);
      auto b = random_leaf({2}, seed + 4);
      const ConvTranspose1dOptions opt{stride, pad};
      CHECK(max_relative_error([opt](auto& in) { return conv_transpose1d(in[0], in[1], in[2], opt); }, {x, w, b},
                               seed) < kTol);
    }
  }
}

TEST_CASE("conv2d gradients on the column fast path and the general path", "[nn][grad]") {
  for (auto seed : kSeeds) {
    // (k x 1) kernels with width-1 stride/padding hit the per-column path.
    auto x = random_leaf({2, 2, 10, 3}, seed);
    auto w = random_leaf({3, 2, 5, 1}, seed + 1, 0.5);
    auto b = random_leaf({3}, seed + 2);
    const Conv2dOptions column{3, 1, 2, 0};
    CHECK(max_relative_error([column](auto& in) { return conv2d(in[0], in[1], in[2], column); }, {x, w, b}, seed) <
          kTol);
    auto wg = random_leaf({3, 2, 3, 2}, seed + 5, 0.5);
    const Conv2dOptions general{2, 1, 1, 1};
    CHECK(max_relative_error([general](auto& in) { return conv2d(in[0], in[1], in[2], general); }, {x, wg, b},
                             seed) < kTol);
  }
}

TEST_CASE("conv1d agrees with the direct sum", "[nn]") {
  std::mt19937_64 rng(9);
  for (const Conv1dOptions opt : {Conv1dOptions{1, 1, 0, 1}, Conv1dOptions{2, 2, 3, 2}, Conv1dOptions{4, 1, 20, 4}}) {
    const std::size_t cin = 4, cout = 8, k = 5, t = 37;
    auto xv = oracle::random_vector(2 * cin * t, rng);
    auto wv = oracle::random_vector(cout * (cin / opt.groups) * k, rng);
    auto bv = oracle::random_vector(cout, rng);
    const auto y = conv1d(Tensor::from({2, cin, t}, xv), Tensor::from({cout, cin / opt.groups, k}, wv),
                          Tensor::from({cout}, bv), opt);
    std::size_t tout = 0;
    const auto ref = oracle::conv1d(xv, 2, cin, t, wv, cout, k, bv, opt.stride, opt.dilation, opt.padding, opt.groups,
                                    &tout);
    REQUIRE(y.shape() == Shape{2, cout, tout});
    CHECK(tout == conv1d_output_length(t, k, opt));
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.data()[i] == Catch::Approx(ref[i]).margin(1e-12));
  }
}

TEST_CASE("conv_transpose1d agrees with the direct sum", "[nn]") {
  std::mt19937_64 rng(10);
  const std::size_t cin = 3, cout = 2, k = 16, t = 9;
  for (auto [stride, pad] : {std::pair<std::size_t, std::size_t>{8, 4}, {2, 7}, {1, 0}}) {
    auto xv = oracle::random_vector(cin * t, rng);
    auto wv = oracle::random_vector(cin * cout * k, rng);
    auto bv = oracle::random_vector(cout, rng);
    const auto y = conv_transpose1d(Tensor::from({1, cin, t}, xv), Tensor::from({cin, cout, k}, wv),
                                    Tensor::from({cout}, bv), {stride, pad});
    std::size_t tout = 0;
    const auto ref = oracle::conv_transpose1d(xv, 1, cin, t, wv, cout, k, bv, stride, pad, &tout);
    REQUIRE(y.shape() == Shape{1, cout, tout});
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.data()[i] == Catch::Approx(ref[i]).margin(1e-12));
  }
}

TEST_CASE("Transposed convolution is the adjoint of convolution", "[nn]") {
  std::mt19937_64 rng(12);
  const std::size_t cin = 3, cout = 5, k = 4, stride = 2, t = 20;
  const auto w = oracle::random_vector(cout * cin * k, rng);
  const auto x = oracle::random_vector(cin * t, rng);
  const Tensor W = Tensor::from({cout, cin, k}, w);
  const Tensor y = conv1d(Tensor::from({1, cin, t}, x), W, Tensor{}, {stride, 1, 1, 1});
  const auto u = oracle::random_vector(y.numel(), rng);
  // <conv(x), u> == <x, conv^T(u)>, with conv^T weight laid out [cout, cin, k].
  const Tensor z = conv_transpose1d(Tensor::from(y.shape(), u), W, Tensor{}, {stride, 1});
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) lhs += y.data()[i] * u[i];
  for (std::size_t i = 0; i < std::min(x.size(), z.numel()); ++i) rhs += x[i] * z.data()[i];
  REQUIRE(z.size(2) >= t - 1);
  CHECK(lhs == Catch::Approx(rhs).margin(1e-10));
}

TEST_CASE("conv2d agrees with the direct sum", "[nn]") {
  std::mt19937_64 rng(13);
  for (const Conv2dOptions opt : {Conv2dOptions{3, 1, 2, 0}, Conv2dOptions{1, 2, 1, 1}}) {
    const std::size_t cin = 2, cout = 3, h = 17, wd = 5, kh = opt.stride_w == 1 ? 5 : 3, kw = opt.stride_w == 1 ? 1 : 3;
    auto xv = oracle::random_vector(cin * h * wd, rng);
    auto wv = oracle::random_vector(cout * cin * kh * kw, rng);
    auto bv = oracle::random_vector(cout, rng);
    const auto y = conv2d(Tensor::from({1, cin, h, wd}, xv), Tensor::from({cout, cin, kh, kw}, wv),
                          Tensor::from({cout}, bv), opt);
    std::size_t oh = 0, ow = 0;
    const auto ref = oracle::conv2d(xv, 1, cin, h, wd, wv, cout, kh, kw, bv, opt.stride_h, opt.stride_w, opt.padding_h,
                                    opt.padding_w, &oh, &ow);
    REQUIRE(y.shape() == Shape{1, cout, oh, ow});
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.data()[i] == Catch::Approx(ref[i]).margin(1e-12));
  }
}

TEST_CASE("Shape mismatches are rejected", "[nn]") {
  const auto a = Tensor::zeros({2, 3}), b = Tensor::zeros({3, 2});
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(reshape(a, {5}), std::invalid_argument);
  CHECK_THROWS_AS(conv1d(Tensor::zeros({1, 2, 8}), Tensor::zeros({1, 3, 3}), Tensor{}), std::invalid_argument);
  CHECK_THROWS_AS(slice_time(Tensor::zeros({1, 1, 4}), 2, 3), std::invalid_argument);
}

TEST_CASE("NoGradGuard stops graph construction", "[nn]") {
  auto a = random_leaf({4}, 1);
  Tensor y;
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    y = square(a);
  }
  CHECK(grad_enabled());
  CHECK_FALSE(y.requires_grad());
  CHECK(square(a).requires_grad());
}

TEST_CASE("AdamW update matches a hand computation", "[nn][optim]") {
  auto p = Tensor::from({2}, {1.0, -2.0}, true);
  std::vector<Tensor> params{p};
  auto state = OptimizerState::for_params(params);
  CHECK(state.beta1 == 0.8);
  CHECK(state.beta2 == 0.999);
  CHECK(state.weight_decay == 0.01);

  sum(scale(p, 0.5)).backward();  // gradient 0.5 for both entries
  adamw_step(params, state, 0.1);
  // Step 1: m_hat = g, v_hat = g^2, so the Adam move is lr * g / (|g| + eps).
  const double move = 0.1 * 0.5 / (0.5 + 1e-8);
  CHECK(p.data()[0] == Catch::Approx(1.0 - 0.1 * 0.01 * 1.0 - move).epsilon(1e-14));
  CHECK(p.data()[1] == Catch::Approx(-2.0 - 0.1 * 0.01 * -2.0 - move).epsilon(1e-14));

  // Step 2 with the same gradient.
  const double p0 = p.data()[0];
  p.zero_grad();
  sum(scale(p, 0.5)).backward();
  adamw_step(params, state, 0.1);
  const double m = 0.8 * 0.1 + 0.2 * 0.5, v = 0.999 * 0.00025 + 0.001 * 0.25;
  const double m_hat = m / (1 - 0.64), v_hat = v / (1 - 0.999 * 0.999);
  CHECK(p.data()[0] == Catch::Approx(p0 - 0.1 * 0.01 * p0 - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8)).epsilon(1e-13));
}

TEST_CASE("Learning rate decays once per epoch", "[nn][optim]") {
  const LrSchedule s;
  CHECK(lr_at(s, 0) == 1.5e-4);
  CHECK(lr_at(s, 1) == Catch::Approx(0.999 * 1.5e-4));
  CHECK(lr_at(s, 10) == Catch::Approx(std::pow(0.999, 10) * 1.5e-4));
  CHECK_THROWS_AS(lr_at(s, -1), std::invalid_argument);
}

TEST_CASE("Checkpoint round trip is exact", "[nn][checkpoint]") {
  const auto path = std::filesystem::temp_directory_path() / "bwe_nn_roundtrip.ckpt";
  Checkpoint c;
  c.metadata = {{"step", 42}, {"note", "x"}};
  c.arrays.push_back({"a", {2, 3}, {1.0, -0.0, 3.5, 1e-300, -7.25, 0.1}});
  c.arrays.push_back({"b.weight", {1}, {std::nextafter(1.0, 2.0)}});
  save_checkpoint(path, c);
  const auto back = load_checkpoint(path);
  CHECK(back.metadata == c.metadata);
  REQUIRE(back.arrays.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.arrays[i].name == c.arrays[i].name);
    CHECK(back.arrays[i].shape == c.arrays[i].shape);
    CHECK(back.arrays[i].values == c.arrays[i].values);
  }
  CHECK(back.at("b.weight").values[0] == std::nextafter(1.0, 2.0));
  CHECK_THROWS_AS(back.at("missing"), DataError);

  const auto junk = std::filesystem::temp_directory_path() / "bwe_nn_junk.ckpt";
  { std::ofstream(junk) << "garbage"; }
  CHECK_THROWS_AS(load_checkpoint(junk), DataError);
}

TEST_CASE("Tensor values are copied on clone and shared on copy", "[nn]") {
  auto a = Tensor::from({3}, {1, 2, 3});
  auto shared = a;
  auto deep = a.clone();
  a.data()[0] = 9;
  CHECK(values(shared)[0] == 9);
  CHECK(values(deep)[0] == 1);
}
