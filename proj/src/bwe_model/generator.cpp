#include <numeric>
#include <stdexcept>

#include "bwe/model.hpp"

namespace bwe::model {

GeneratorConfig GeneratorConfig::toy() { return GeneratorConfig{}; }

GeneratorConfig GeneratorConfig::paper() {
  GeneratorConfig c;
  c.initial_channels = 512;
  return c;
}

std::size_t GeneratorConfig::hop() const {
  return std::accumulate(upsample_rates.begin(), upsample_rates.end(), std::size_t{1}, std::multiplies<>());
}

void GeneratorConfig::validate() const {
  if (upsample_rates.empty() || upsample_rates.size() != upsample_kernel_sizes.size()) {
    throw std::invalid_argument("GeneratorConfig: need one kernel size per upsampling rate");
  }
  for (std::size_t i = 0; i < upsample_rates.size(); ++i) {
    const std::size_t r = upsample_rates[i], k = upsample_kernel_sizes[i];
    if (r == 0 || k < r || (k - r) % 2 != 0) {
      throw std::invalid_argument("GeneratorConfig: upsampling kernel " + std::to_string(k) +
                                  " must be >= rate " + std::to_string(r) + " with an even difference");
    }
  }
  if (initial_channels >> upsample_rates.size() == 0 ||
      initial_channels % (std::size_t{1} << upsample_rates.size()) != 0) {
    throw std::invalid_argument("GeneratorConfig: channels must halve cleanly at every stage");
  }
  if (mrf_kernel_sizes.empty() || mrf_kernel_sizes.size() != mrf_dilations.size()) {
    throw std::invalid_argument("GeneratorConfig: need one dilation list per MRF kernel");
  }
  for (std::size_t k : mrf_kernel_sizes) {
    if (k % 2 == 0) throw std::invalid_argument("GeneratorConfig: MRF kernels must be odd");
  }
  for (const auto& d : mrf_dilations) {
    if (d.empty()) throw std::invalid_argument("GeneratorConfig: empty dilation list");
  }
  if (n_mels == 0 || pre_kernel % 2 == 0 || post_kernel % 2 == 0) {
    throw std::invalid_argument("GeneratorConfig: invalid input/output convolution");
  }
}

nlohmann::json GeneratorConfig::to_json() const {
  return {{"upsample_rates", upsample_rates},
          {"upsample_kernel_sizes", upsample_kernel_sizes},
          {"initial_channels", initial_channels},
          {"mrf_kernel_sizes", mrf_kernel_sizes},
          {"mrf_dilations", mrf_dilations},
          {"n_mels", n_mels},
          {"pre_kernel", pre_kernel},
          {"post_kernel", post_kernel}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  j.at("upsample_rates").get_to(c.upsample_rates);
  j.at("upsample_kernel_sizes").get_to(c.upsample_kernel_sizes);
  j.at("initial_channels").get_to(c.initial_channels);
  j.at("mrf_kernel_sizes").get_to(c.mrf_kernel_sizes);
  j.at("mrf_dilations").get_to(c.mrf_dilations);
  j.at("n_mels").get_to(c.n_mels);
  j.at("pre_kernel").get_to(c.pre_kernel);
  j.at("post_kernel").get_to(c.post_kernel);
  c.validate();
  return c;
}

Tensor ResidualBranch::forward(const Tensor& x) const {
  Tensor out = x;
  for (std::size_t i = 0; i < dilated.size(); ++i) {
    Tensor h = dilated[i](nn::leaky_relu(out, kLeakySlope));
    h = plain[i](nn::leaky_relu(h, kLeakySlope));
    out = nn::add(out, h);
  }
  return out;
}

ResidualBranch make_residual_branch(ParameterStore& store, const std::string& name, std::size_t channels,
                                    std::size_t kernel, const std::vector<std::size_t>& dilations, Rng& rng) {
  ResidualBranch b;
  b.kernel = kernel;
  b.dilations = dilations;
  for (std::size_t i = 0; i < dilations.size(); ++i) {
    const std::size_t d = dilations[i];
    b.dilated.push_back(make_conv1d(store, name + ".dilated" + std::to_string(i), channels, channels, kernel,
                                    {.stride = 1, .dilation = d, .padding = same_padding(kernel, d)}, rng));
    b.plain.push_back(make_conv1d(store, name + ".plain" + std::to_string(i), channels, channels, kernel,
                                  {.stride = 1, .dilation = 1, .padding = same_padding(kernel, 1)}, rng));
  }
  return b;
}

Tensor mrf_block(const Tensor& x, std::span<const ResidualBranch> branches) {
  if (branches.empty()) throw std::invalid_argument("mrf_block: no branches");
  Tensor acc = branches[0].forward(x);
  for (std::size_t i = 1; i < branches.size(); ++i) {
    Tensor y = branches[i].forward(x);
    if (y.shape() != acc.shape()) throw std::invalid_argument("mrf_block: branch output shapes differ");
    acc = nn::add(acc, y);
  }
  return nn::scale(acc, 1.0 / static_cast<double>(branches.size()));
}

std::size_t dilated_receptive_field(std::size_t kernel, std::span<const std::size_t> dilations) {
  const std::size_t total = std::accumulate(dilations.begin(), dilations.end(), std::size_t{0});
  return 1 + (kernel - 1) * total;
}

std::size_t branch_receptive_field(std::size_t kernel, std::span<const std::size_t> dilations) {
  return dilated_receptive_field(kernel, dilations) + (kernel - 1) * dilations.size();
}

Generator::Generator(GeneratorConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(seed);
  conv_pre_ = make_conv1d(params_, "conv_pre", cfg_.n_mels, cfg_.initial_channels, cfg_.pre_kernel,
                          {.padding = same_padding(cfg_.pre_kernel, 1)}, rng);
  std::size_t ch = cfg_.initial_channels;
  for (std::size_t i = 0; i < cfg_.upsample_rates.size(); ++i) {
    const std::size_t rate = cfg_.upsample_rates[i];
    const std::size_t k = cfg_.upsample_kernel_sizes[i];
    const std::string stage = "stage" + std::to_string(i);
    Stage s;
    s.upsample.weight = params_.add(stage + ".upsample.weight", init_normal({ch, ch / 2, k}, rng));
    s.upsample.bias = params_.add(stage + ".upsample.bias", Tensor::zeros({ch / 2}));
    s.upsample.options = {.stride = rate, .padding = (k - rate) / 2};
    ch /= 2;
    for (std::size_t j = 0; j < cfg_.mrf_kernel_sizes.size(); ++j) {
      s.branches.push_back(make_residual_branch(params_, stage + ".mrf" + std::to_string(j), ch,
                                                cfg_.mrf_kernel_sizes[j], cfg_.mrf_dilations[j], rng));
    }
    stages_.push_back(std::move(s));
  }
  conv_post_ = make_conv1d(params_, "conv_post", ch, 1, cfg_.post_kernel,
                           {.padding = same_padding(cfg_.post_kernel, 1)}, rng);
}

Tensor Generator::forward(const Tensor& mel) const {
  if (mel.dim() != 3 || mel.size(1) != cfg_.n_mels || mel.size(2) == 0) {
    throw std::invalid_argument("Generator: expected mel [batch, " + std::to_string(cfg_.n_mels) +
                                ", frames >= 1], got " + nn::shape_string(mel.shape()));
  }
  Tensor x = conv_pre_(mel);
  for (const auto& s : stages_) {
    x = s.upsample(nn::leaky_relu(x, kLeakySlope));
    x = mrf_block(x, s.branches);
  }
  // The output activation uses the framework-default 0.01 slope of the recipe.
  x = conv_post_(nn::leaky_relu(x, 0.01));
  return nn::tanh(x);
}

Tensor mel_to_tensor(const spectral::MelSpectrogram& mel) {
  const std::size_t frames = mel.frames();
  const std::size_t bands = mel.bands();
  std::vector<nn::Real> values(frames * bands);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t m = 0; m < bands; ++m) values[m * frames + t] = mel.values(t, m);
  }
  return Tensor::from({1, bands, frames}, std::move(values));
}

Tensor generator_forward(const spectral::MelSpectrogram& mel, const Generator& gen) {
  if (mel.frames() == 0) throw std::invalid_argument("generator_forward: empty mel spectrogram");
  return gen.forward(mel_to_tensor(mel));
}

}  // namespace bwe::model
