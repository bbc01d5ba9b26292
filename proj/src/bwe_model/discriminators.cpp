#include <algorithm>
#include <set>
#include <stdexcept>

#include "bwe/model.hpp"

namespace bwe::model {

DiscriminatorConfig DiscriminatorConfig::toy() {
  DiscriminatorConfig c;
  c.msd_layers = {{8, 15, 1, 1, 7},  {16, 41, 2, 4, 20}, {32, 41, 2, 8, 20}, {32, 41, 4, 8, 20},
                  {32, 41, 4, 8, 20}, {32, 41, 1, 8, 20}, {32, 5, 1, 1, 2}};
  return c;
}

DiscriminatorConfig DiscriminatorConfig::paper() {
  DiscriminatorConfig c;
  c.mpd_channels = {32, 128, 512, 1024, 1024};
  c.msd_layers = {{128, 15, 1, 1, 7},    {128, 41, 2, 4, 20},   {256, 41, 2, 16, 20}, {512, 41, 4, 16, 20},
                  {1024, 41, 4, 16, 20}, {1024, 41, 1, 16, 20}, {1024, 5, 1, 1, 2}};
  return c;
}

void DiscriminatorConfig::validate() const {
  if (mpd_periods.empty()) throw std::invalid_argument("DiscriminatorConfig: no periods");
  if (std::set<std::size_t>(mpd_periods.begin(), mpd_periods.end()).size() != mpd_periods.size()) {
    throw std::invalid_argument("DiscriminatorConfig: periods must be pairwise distinct");
  }
  for (std::size_t p : mpd_periods) {
    if (p < 2) throw std::invalid_argument("DiscriminatorConfig: periods must be >= 2");
  }
  if (mpd_channels.empty() || mpd_kernel % 2 == 0 || mpd_stride == 0) {
    throw std::invalid_argument("DiscriminatorConfig: invalid period sub-discriminator layers");
  }
  if (msd_scales < 1) throw std::invalid_argument("DiscriminatorConfig: need at least one scale");
  if (msd_layers.empty()) throw std::invalid_argument("DiscriminatorConfig: no scale sub-discriminator layers");
  std::size_t in = 1;
  for (const auto& l : msd_layers) {
    if (l.out_channels == 0 || l.kernel == 0 || l.stride == 0 || l.groups == 0 || in % l.groups != 0 ||
        l.out_channels % l.groups != 0) {
      throw std::invalid_argument("DiscriminatorConfig: invalid scale layer");
    }
    in = l.out_channels;
  }
  if (post_kernel % 2 == 0 || pool_kernel == 0 || pool_stride == 0 || 2 * pool_padding > pool_kernel) {
    throw std::invalid_argument("DiscriminatorConfig: invalid pooling or output layer");
  }
}

nlohmann::json DiscriminatorConfig::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : msd_layers) {
    layers.push_back({{"out_channels", l.out_channels},
                      {"kernel", l.kernel},
                      {"stride", l.stride},
                      {"groups", l.groups},
                      {"padding", l.padding}});
  }
  return {{"mpd_periods", mpd_periods},   {"mpd_channels", mpd_channels}, {"mpd_kernel", mpd_kernel},
          {"mpd_stride", mpd_stride},     {"msd_scales", msd_scales},     {"msd_layers", layers},
          {"pool_kernel", pool_kernel},   {"pool_stride", pool_stride},   {"pool_padding", pool_padding},
          {"post_kernel", post_kernel}};
}

DiscriminatorConfig DiscriminatorConfig::from_json(const nlohmann::json& j) {
  DiscriminatorConfig c;
  j.at("mpd_periods").get_to(c.mpd_periods);
  j.at("mpd_channels").get_to(c.mpd_channels);
  j.at("mpd_kernel").get_to(c.mpd_kernel);
  j.at("mpd_stride").get_to(c.mpd_stride);
  j.at("msd_scales").get_to(c.msd_scales);
  c.msd_layers.clear();
  for (const auto& l : j.at("msd_layers")) {
    c.msd_layers.push_back({l.at("out_channels").get<std::size_t>(), l.at("kernel").get<std::size_t>(),
                            l.at("stride").get<std::size_t>(), l.at("groups").get<std::size_t>(),
                            l.at("padding").get<std::size_t>()});
  }
  j.at("pool_kernel").get_to(c.pool_kernel);
  j.at("pool_stride").get_to(c.pool_stride);
  j.at("pool_padding").get_to(c.pool_padding);
  j.at("post_kernel").get_to(c.post_kernel);
  c.validate();
  return c;
}

std::size_t DiscriminatorOutput::feature_count() const {
  std::size_t k = 0;
  for (const auto& f : features) k += f.size();
  return k;
}

void DiscriminatorOutput::append(DiscriminatorOutput&& other) {
  for (auto& s : other.scores) scores.push_back(std::move(s));
  for (auto& f : other.features) features.push_back(std::move(f));
}

Tensor fold_by_period(const Tensor& wave, std::size_t period) {
  if (wave.dim() != 3 || wave.size(1) != 1) {
    throw std::invalid_argument("fold_by_period: expected [batch, 1, time], got " + nn::shape_string(wave.shape()));
  }
  const std::size_t time = wave.size(2);
  if (time == 0) throw std::invalid_argument("fold_by_period: empty input");
  if (time < period) throw std::invalid_argument("fold_by_period: input shorter than the period");
  Tensor x = wave;
  const std::size_t rem = time % period;
  if (rem != 0) x = nn::reflect_pad_right(x, period - rem);
  const std::size_t padded = x.size(2);
  return nn::reshape(x, {wave.size(0), 1, padded / period, period});
}

PeriodDiscriminator::PeriodDiscriminator(ParameterStore& store, const std::string& name, std::size_t period,
                                         const DiscriminatorConfig& cfg, Rng& rng)
    : period_(period) {
  std::size_t in = 1;
  const std::size_t k = cfg.mpd_kernel;
  for (std::size_t i = 0; i < cfg.mpd_channels.size(); ++i) {
    const std::size_t out = cfg.mpd_channels[i];
    const bool last = i + 1 == cfg.mpd_channels.size();
    Conv2dLayer layer;
    const std::string lname = name + ".conv" + std::to_string(i);
    layer.weight = store.add(lname + ".weight", init_normal({out, in, k, 1}, rng));
    layer.bias = store.add(lname + ".bias", Tensor::zeros({out}));
    layer.options = {.stride_h = last ? 1 : cfg.mpd_stride, .stride_w = 1, .padding_h = same_padding(k, 1),
                     .padding_w = 0};
    convs_.push_back(std::move(layer));
    in = out;
  }
  post_.weight = store.add(name + ".post.weight", init_normal({1, in, cfg.post_kernel, 1}, rng));
  post_.bias = store.add(name + ".post.bias", Tensor::zeros({1}));
  post_.options = {.padding_h = same_padding(cfg.post_kernel, 1)};
}

std::pair<Tensor, std::vector<Tensor>> PeriodDiscriminator::forward(const Tensor& wave) const {
  Tensor x = fold_by_period(wave, period_);
  std::vector<Tensor> features;
  for (const auto& conv : convs_) {
    x = nn::leaky_relu(conv(x), kLeakySlope);
    features.push_back(x);
  }
  x = post_(x);
  features.push_back(x);
  return {x, std::move(features)};
}

ScaleDiscriminator::ScaleDiscriminator(ParameterStore& store, const std::string& name,
                                       const DiscriminatorConfig& cfg, Rng& rng) {
  std::size_t in = 1;
  for (std::size_t i = 0; i < cfg.msd_layers.size(); ++i) {
    const ConvSpec& l = cfg.msd_layers[i];
    convs_.push_back(make_conv1d(store, name + ".conv" + std::to_string(i), in, l.out_channels, l.kernel,
                                 {.stride = l.stride, .dilation = 1, .padding = l.padding, .groups = l.groups}, rng));
    in = l.out_channels;
  }
  post_ = make_conv1d(store, name + ".post", in, 1, cfg.post_kernel, {.padding = same_padding(cfg.post_kernel, 1)},
                      rng);
}

std::pair<Tensor, std::vector<Tensor>> ScaleDiscriminator::forward(const Tensor& wave) const {
  if (score_length(wave.size(2)) == 0) {
    throw std::invalid_argument("scale discriminator: input of " + std::to_string(wave.size(2)) +
                                " samples is too short");
  }
  Tensor x = wave;
  std::vector<Tensor> features;
  for (const auto& conv : convs_) {
    x = nn::leaky_relu(conv(x), kLeakySlope);
    features.push_back(x);
  }
  x = post_(x);
  features.push_back(x);
  return {x, std::move(features)};
}

std::size_t ScaleDiscriminator::score_length(std::size_t time) const {
  std::size_t t = time;
  for (const auto& conv : convs_) {
    if (t == 0) return 0;
    t = nn::conv1d_output_length(t, conv.weight.size(2), conv.options);
  }
  return t == 0 ? 0 : nn::conv1d_output_length(t, post_.weight.size(2), post_.options);
}

Discriminators::Discriminators(DiscriminatorConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  if (cfg_.msd_layers.empty()) cfg_.msd_layers = DiscriminatorConfig::toy().msd_layers;
  cfg_.validate();
  Rng rng(seed);
  for (std::size_t p : cfg_.mpd_periods) {
    mpd_.emplace_back(params_, "mpd.p" + std::to_string(p), p, cfg_, rng);
  }
  for (std::size_t s = 0; s < cfg_.msd_scales; ++s) {
    msd_.emplace_back(params_, "msd.s" + std::to_string(s), cfg_, rng);
  }
}

std::size_t Discriminators::min_length() const {
  const std::size_t max_period = *std::max_element(cfg_.mpd_periods.begin(), cfg_.mpd_periods.end());
  auto accepted = [&](std::size_t n) {
    std::size_t t = n;
    for (std::size_t s = 0; s < msd_.size(); ++s) {
      if (s > 0) {
        if (t + 2 * cfg_.pool_padding < cfg_.pool_kernel) return false;
        t = (t + 2 * cfg_.pool_padding - cfg_.pool_kernel) / cfg_.pool_stride + 1;
      }
      if (msd_[s].score_length(t) == 0) return false;
    }
    return true;
  };
  std::size_t n = max_period;
  while (!accepted(n)) ++n;
  return n;
}

DiscriminatorOutput Discriminators::forward(const Tensor& wave) const {
  DiscriminatorOutput out = mpd_forward(wave, *this);
  out.append(msd_forward(wave, *this));
  return out;
}

DiscriminatorOutput mpd_forward(const Tensor& wave, const Discriminators& disc) {
  if (!wave.defined() || wave.numel() == 0) throw std::invalid_argument("mpd_forward: empty input");
  DiscriminatorOutput out;
  for (const auto& d : disc.period_discriminators()) {
    auto [score, features] = d.forward(wave);
    out.scores.push_back(std::move(score));
    out.features.push_back(std::move(features));
  }
  return out;
}

DiscriminatorOutput msd_forward(const Tensor& wave, const Discriminators& disc) {
  if (!wave.defined() || wave.numel() == 0) throw std::invalid_argument("msd_forward: empty input");
  const auto& cfg = disc.config();
  DiscriminatorOutput out;
  Tensor x = wave;
  const auto& subs = disc.scale_discriminators();
  for (std::size_t s = 0; s < subs.size(); ++s) {
    if (s > 0) x = nn::avg_pool1d(x, cfg.pool_kernel, cfg.pool_stride, cfg.pool_padding);
    auto [score, features] = subs[s].forward(x);
    out.scores.push_back(std::move(score));
    out.features.push_back(std::move(features));
  }
  return out;
}

}  // namespace bwe::model
