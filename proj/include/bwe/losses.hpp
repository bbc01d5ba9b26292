#pragma once

#include <vector>

#include "bwe/nn/tensor.hpp"
#include "bwe/spectral.hpp"

namespace bwe::losses {

using nn::Tensor;

struct LossWeights {
  double adv = 1.1;
  double mel = 50.0;
  double feat = 2.0;

  void validate() const;
};

struct LossBreakdown {
  double adv = 0.0;
  double mel = 0.0;
  double feat = 0.0;
  double total = 0.0;
  double disc = 0.0;
};

/// Mean squared sample difference. Ablation objective only.
Tensor l2_waveform_loss(const Tensor& pred, const Tensor& target);

/// Least-squares discriminator objective: the mean over sub-discriminators of
/// mean((1 - D(x))^2) + mean(D(G(x^))^2). Scores must be paired by index.
Tensor discriminator_loss(const std::vector<Tensor>& real_scores, const std::vector<Tensor>& fake_scores);

/// Mean over sub-discriminators of mean((1 - D(G(x^)))^2).
Tensor generator_adversarial_loss(const std::vector<Tensor>& fake_scores);

/// Differentiable natural-log mel spectrogram of a [batch, 1, time] waveform.
/// Returns [batch, frames, bands]. The analyzer must outlive the graph.
Tensor log_mel(const Tensor& wave, const spectral::LogMelAnalyzer& analyzer);

/// Mean absolute difference of log-mel spectrograms. The reference is treated
/// as a constant.
Tensor mel_reconstruction_loss(const Tensor& reference, const Tensor& generated,
                               const spectral::LogMelAnalyzer& analyzer);

/// Sum over layers of mean |real_k - fake_k|, flattened across
/// sub-discriminators. Real features are detached.
Tensor feature_matching_loss(const std::vector<std::vector<Tensor>>& real_features,
                             const std::vector<std::vector<Tensor>>& fake_features);

/// Weighted combination of scalar components.
LossBreakdown total_generator_loss(double adv, double mel, double feat, const LossWeights& w = {});

/// Same combination on tensors, keeping the graph for the generator step.
Tensor weighted_generator_loss(const Tensor& adv, const Tensor& mel, const Tensor& feat,
                               const LossWeights& w = {});

}  // namespace bwe::losses
