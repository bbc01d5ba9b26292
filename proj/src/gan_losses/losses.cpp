#include "bwe/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "bwe/nn/ops.hpp"

namespace bwe::losses {

void LossWeights::validate() const {
  for (double v : {adv, mel, feat}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("LossWeights: weights must be finite and >= 0");
  }
}

Tensor l2_waveform_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) throw std::invalid_argument("l2_waveform_loss: shape mismatch");
  return nn::mean(nn::square(nn::sub(pred, target)));
}

Tensor discriminator_loss(const std::vector<Tensor>& real_scores, const std::vector<Tensor>& fake_scores) {
  if (real_scores.empty() || real_scores.size() != fake_scores.size()) {
    throw std::invalid_argument("discriminator_loss: need matching, non-empty score lists");
  }
  Tensor acc;
  for (std::size_t i = 0; i < real_scores.size(); ++i) {
    Tensor real_term = nn::mean(nn::square(nn::add_scalar(nn::scale(real_scores[i], -1.0), 1.0)));
    Tensor fake_term = nn::mean(nn::square(fake_scores[i]));
    Tensor d = nn::add(real_term, fake_term);
    acc = acc.defined() ? nn::add(acc, d) : d;
  }
  return nn::scale(acc, 1.0 / static_cast<double>(real_scores.size()));
}

Tensor generator_adversarial_loss(const std::vector<Tensor>& fake_scores) {
  if (fake_scores.empty()) throw std::invalid_argument("generator_adversarial_loss: no scores");
  Tensor acc;
  for (const auto& s : fake_scores) {
    Tensor term = nn::mean(nn::square(nn::add_scalar(nn::scale(s, -1.0), 1.0)));
    acc = acc.defined() ? nn::add(acc, term) : term;
  }
  return nn::scale(acc, 1.0 / static_cast<double>(fake_scores.size()));
}

Tensor log_mel(const Tensor& wave, const spectral::LogMelAnalyzer& analyzer) {
  if (wave.dim() != 3 || wave.size(1) != 1 || wave.size(2) == 0) {
    throw std::invalid_argument("log_mel: expected [batch, 1, time], got " + nn::shape_string(wave.shape()));
  }
  const std::size_t batch = wave.size(0);
  const std::size_t time = wave.size(2);
  const std::size_t frames = analyzer.config().frame_count(time);
  const std::size_t bands = analyzer.bands();
  std::vector<nn::Real> out(batch * frames * bands);
  const auto in = wave.data();
  for (std::size_t b = 0; b < batch; ++b) {
    const spectral::Matrix m = analyzer.forward(in.subspan(b * time, time));
    std::copy(m.values.begin(), m.values.end(), out.begin() + static_cast<std::ptrdiff_t>(b * frames * bands));
  }
  return Tensor::make_result({batch, frames, bands}, std::move(out), {wave},
                             [&analyzer, batch, time, frames, bands](nn::detail::Node& self) {
                               auto& parent = *self.parents[0];
                               auto& g = parent.ensure_grad();
                               for (std::size_t b = 0; b < batch; ++b) {
                                 spectral::Matrix go(frames, bands);
                                 std::copy_n(self.grad.begin() + static_cast<std::ptrdiff_t>(b * frames * bands),
                                             frames * bands, go.values.begin());
                                 analyzer.backward(std::span<const double>(parent.value).subspan(b * time, time), go,
                                                   std::span<double>(g).subspan(b * time, time));
                               }
                             });
}

Tensor mel_reconstruction_loss(const Tensor& reference, const Tensor& generated,
                               const spectral::LogMelAnalyzer& analyzer) {
  if (reference.shape() != generated.shape()) {
    throw std::invalid_argument("mel_reconstruction_loss: lengths differ (" + nn::shape_string(reference.shape()) +
                                " vs " + nn::shape_string(generated.shape()) + ")");
  }
  Tensor ref_mel;
  {
    nn::NoGradGuard guard;
    ref_mel = log_mel(reference.detach(), analyzer);
  }
  return nn::mean(nn::abs(nn::sub(log_mel(generated, analyzer), ref_mel)));
}

Tensor feature_matching_loss(const std::vector<std::vector<Tensor>>& real_features,
                             const std::vector<std::vector<Tensor>>& fake_features) {
  if (real_features.size() != fake_features.size()) {
    throw std::invalid_argument("feature_matching_loss: sub-discriminator counts differ");
  }
  Tensor acc;
  for (std::size_t d = 0; d < real_features.size(); ++d) {
    if (real_features[d].size() != fake_features[d].size()) {
      throw std::invalid_argument("feature_matching_loss: layer counts differ");
    }
    for (std::size_t k = 0; k < real_features[d].size(); ++k) {
      const Tensor& r = real_features[d][k];
      const Tensor& f = fake_features[d][k];
      if (r.shape() != f.shape()) throw std::invalid_argument("feature_matching_loss: feature shapes differ");
      Tensor term = nn::mean(nn::abs(nn::sub(r.detach(), f)));
      acc = acc.defined() ? nn::add(acc, term) : term;
    }
  }
  if (!acc.defined()) throw std::invalid_argument("feature_matching_loss: no features");
  return acc;
}

LossBreakdown total_generator_loss(double adv, double mel, double feat, const LossWeights& w) {
  if (!std::isfinite(adv) || !std::isfinite(mel) || !std::isfinite(feat)) {
    throw std::invalid_argument("total_generator_loss: non-finite component");
  }
  w.validate();
  LossBreakdown b;
  b.adv = adv;
  b.mel = mel;
  b.feat = feat;
  b.total = w.adv * adv + w.mel * mel + w.feat * feat;
  return b;
}

Tensor weighted_generator_loss(const Tensor& adv, const Tensor& mel, const Tensor& feat, const LossWeights& w) {
  w.validate();
  return nn::add(nn::add(nn::scale(adv, w.adv), nn::scale(mel, w.mel)), nn::scale(feat, w.feat));
}

}  // namespace bwe::losses
