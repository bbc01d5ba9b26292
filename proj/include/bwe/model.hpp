#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bwe/nn/checkpoint.hpp"
#include "bwe/nn/ops.hpp"
#include "bwe/nn/tensor.hpp"
#include "bwe/spectral.hpp"

namespace bwe::model {

using nn::Tensor;
using Rng = std::mt19937_64;

/// Named parameters in registration order. Tensors are shared handles, so
/// layers and the store see the same storage.
class ParameterStore {
 public:
  Tensor add(std::string name, Tensor t);

  const std::vector<std::pair<std::string, Tensor>>& named() const { return params_; }
  std::vector<Tensor> tensors() const;
  std::size_t numel() const;

  void set_requires_grad(bool flag);
  void zero_grad();

  /// Appends every parameter to `out` with `prefix` prepended to its name.
  void export_to(std::vector<nn::NamedArray>& out, const std::string& prefix) const;
  /// Copies values from a checkpoint; every parameter must be present with a matching shape.
  void import_from(const nn::Checkpoint& ckpt, const std::string& prefix);

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
};

/// Weights ~ normal(0, 0.01), biases zero.
Tensor init_normal(nn::Shape shape, Rng& rng, double stddev = 0.01);

struct Conv1dLayer {
  Tensor weight, bias;
  nn::Conv1dOptions options;
  Tensor operator()(const Tensor& x) const { return nn::conv1d(x, weight, bias, options); }
};

struct ConvTranspose1dLayer {
  Tensor weight, bias;
  nn::ConvTranspose1dOptions options;
  Tensor operator()(const Tensor& x) const { return nn::conv_transpose1d(x, weight, bias, options); }
};

struct Conv2dLayer {
  Tensor weight, bias;
  nn::Conv2dOptions options;
  Tensor operator()(const Tensor& x) const { return nn::conv2d(x, weight, bias, options); }
};

Conv1dLayer make_conv1d(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                        std::size_t kernel, nn::Conv1dOptions opt, Rng& rng);

/// Padding that keeps the length unchanged for a stride-1 dilated convolution.
constexpr std::size_t same_padding(std::size_t kernel, std::size_t dilation) {
  return (kernel * dilation - dilation) / 2;
}

constexpr double kLeakySlope = 0.1;

// ---------------------------------------------------------------------------
// Generator

struct GeneratorConfig {
  std::vector<std::size_t> upsample_rates{8, 8, 2, 2};
  std::vector<std::size_t> upsample_kernel_sizes{16, 16, 4, 4};
  std::size_t initial_channels = 32;
  std::vector<std::size_t> mrf_kernel_sizes{3, 7, 11};
  std::vector<std::vector<std::size_t>> mrf_dilations{{1, 3, 5}, {1, 3, 5}, {1, 3, 5}};
  std::size_t n_mels = spectral::kMelBands;
  std::size_t pre_kernel = 7;
  std::size_t post_kernel = 7;

  /// Desk-scale defaults.
  static GeneratorConfig toy();
  /// Published V1 sizes (512 channels); not trained by the test suite.
  static GeneratorConfig paper();

  std::size_t hop() const;
  void validate() const;
  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

/// Stacked dilated convolutions with leaky-ReLU and skip connections:
/// for each dilation d, x = x + conv_1(lrelu(conv_d(lrelu(x)))).
struct ResidualBranch {
  std::size_t kernel = 0;
  std::vector<std::size_t> dilations;
  std::vector<Conv1dLayer> dilated;
  std::vector<Conv1dLayer> plain;

  Tensor forward(const Tensor& x) const;
};

ResidualBranch make_residual_branch(ParameterStore& store, const std::string& name, std::size_t channels,
                                    std::size_t kernel, const std::vector<std::size_t>& dilations, Rng& rng);

/// Multi-receptive-field fusion: the arithmetic mean of the branch outputs.
Tensor mrf_block(const Tensor& x, std::span<const ResidualBranch> branches);

/// Span of the dilated convolutions alone: 1 + (k - 1) * sum(d).
std::size_t dilated_receptive_field(std::size_t kernel, std::span<const std::size_t> dilations);
/// Span of a whole branch including its dilation-1 convolutions.
std::size_t branch_receptive_field(std::size_t kernel, std::span<const std::size_t> dilations);

class Generator {
 public:
  Generator(GeneratorConfig cfg, std::uint64_t seed);

  /// mel [batch, n_mels, frames] -> waveform [batch, 1, frames * hop] in (-1, 1).
  Tensor forward(const Tensor& mel) const;

  const GeneratorConfig& config() const { return cfg_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

 private:
  struct Stage {
    ConvTranspose1dLayer upsample;
    std::vector<ResidualBranch> branches;
  };

  GeneratorConfig cfg_;
  ParameterStore params_;
  Conv1dLayer conv_pre_;
  std::vector<Stage> stages_;
  Conv1dLayer conv_post_;
};

/// [frames x bands] matrix -> [1, bands, frames] tensor.
Tensor mel_to_tensor(const spectral::MelSpectrogram& mel);

/// Single-utterance inference: returns [1, 1, frames * hop].
Tensor generator_forward(const spectral::MelSpectrogram& mel, const Generator& gen);

// ---------------------------------------------------------------------------
// Discriminators

struct ConvSpec {
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t groups = 1;
  std::size_t padding = 0;
};

struct DiscriminatorConfig {
  std::vector<std::size_t> mpd_periods{2, 3, 5, 7, 11};
  // Channels of each (kernel x 1) layer; all but the last use mpd_stride.
  std::vector<std::size_t> mpd_channels{8, 16, 32, 32, 32};
  std::size_t mpd_kernel = 5;
  std::size_t mpd_stride = 3;
  std::size_t msd_scales = 3;
  std::vector<ConvSpec> msd_layers;
  std::size_t pool_kernel = 4;
  std::size_t pool_stride = 2;
  std::size_t pool_padding = 2;
  std::size_t post_kernel = 3;

  static DiscriminatorConfig toy();
  static DiscriminatorConfig paper();

  void validate() const;
  nlohmann::json to_json() const;
  static DiscriminatorConfig from_json(const nlohmann::json& j);
};

/// Score maps plus every intermediate activation. `features[d]` holds the
/// post-activation output of each layer of sub-discriminator d, ending with
/// its score map.
struct DiscriminatorOutput {
  std::vector<Tensor> scores;
  std::vector<std::vector<Tensor>> features;

  std::size_t feature_count() const;
  void append(DiscriminatorOutput&& other);
};

class PeriodDiscriminator {
 public:
  PeriodDiscriminator(ParameterStore& store, const std::string& name, std::size_t period,
                      const DiscriminatorConfig& cfg, Rng& rng);

  /// wave [batch, 1, time] -> (score, features).
  std::pair<Tensor, std::vector<Tensor>> forward(const Tensor& wave) const;
  std::size_t period() const { return period_; }
  std::size_t layer_count() const { return convs_.size() + 1; }

 private:
  std::size_t period_;
  std::vector<Conv2dLayer> convs_;
  Conv2dLayer post_;
};

class ScaleDiscriminator {
 public:
  ScaleDiscriminator(ParameterStore& store, const std::string& name, const DiscriminatorConfig& cfg, Rng& rng);

  std::pair<Tensor, std::vector<Tensor>> forward(const Tensor& wave) const;
  std::size_t layer_count() const { return convs_.size() + 1; }
  /// Length of the score map for an input of `time` samples (0 if too short).
  std::size_t score_length(std::size_t time) const;

 private:
  std::vector<Conv1dLayer> convs_;
  Conv1dLayer post_;
};

/// Both discriminator families sharing one parameter store.
class Discriminators {
 public:
  Discriminators(DiscriminatorConfig cfg, std::uint64_t seed);

  const DiscriminatorConfig& config() const { return cfg_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  const std::vector<PeriodDiscriminator>& period_discriminators() const { return mpd_; }
  const std::vector<ScaleDiscriminator>& scale_discriminators() const { return msd_; }

  /// Shortest waveform every sub-discriminator accepts.
  std::size_t min_length() const;
  /// MPD followed by MSD outputs.
  DiscriminatorOutput forward(const Tensor& wave) const;

 private:
  DiscriminatorConfig cfg_;
  ParameterStore params_;
  std::vector<PeriodDiscriminator> mpd_;
  std::vector<ScaleDiscriminator> msd_;
};

DiscriminatorOutput mpd_forward(const Tensor& wave, const Discriminators& disc);
DiscriminatorOutput msd_forward(const Tensor& wave, const Discriminators& disc);

/// Reflection padding and reshape used by a period sub-discriminator:
/// [batch, 1, time] -> [batch, 1, ceil(time / period), period].
Tensor fold_by_period(const Tensor& wave, std::size_t period);

}  // namespace bwe::model
