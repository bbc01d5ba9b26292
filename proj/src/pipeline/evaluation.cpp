#include <algorithm>
#include <set>

#include "bwe/errors.hpp"
#include "bwe/pipeline.hpp"

namespace bwe::pipeline {
namespace {

AudioBuffer head(const AudioBuffer& buf, std::size_t n) {
  return AudioBuffer{std::vector<double>(buf.samples.begin(), buf.samples.begin() + static_cast<std::ptrdiff_t>(n)),
                     buf.sample_rate};
}

RatioResult evaluate_ratio(const model::Generator* gen, const CorpusManifest& manifest,
                           const std::vector<const ManifestEntry*>& entries, std::size_t ratio, bool seen) {
  RatioResult row;
  row.ratio = ratio;
  row.seen_in_training = seen;
  for (const ManifestEntry* e : entries) {
    const AudioBuffer wb = load_wideband(manifest, *e);
    const AudioBuffer pre = preprocess_narrowband(load_narrowband(manifest, *e, ratio), manifest.target_rate);
    // Trim, never pad: padding would add spectral content the LSD would then score.
    const std::size_t n = std::min(wb.size(), pre.size());
    const AudioBuffer ref = head(wb, n);

    UtteranceResult u;
    u.utterance_id = e->utterance_id;
    u.length = n;
    u.baseline_lsd = spectral::log_spectral_distance(ref, head(pre, n));
    if (gen) {
      const AudioBuffer out = head(run_generator(*gen, pre), n);
      if (out.size() != ref.size()) throw NumericalError("generator output length differs from the reference");
      u.model_lsd = spectral::log_spectral_distance(ref, out);
    }
    row.model_lsd += u.model_lsd;
    row.baseline_lsd += u.baseline_lsd;
    row.utterances.push_back(std::move(u));
  }
  const auto count = static_cast<double>(row.utterances.size());
  row.model_lsd /= count;
  row.baseline_lsd /= count;
  return row;
}

EvalReport run_report(std::string kind, const model::Generator* gen, const CorpusManifest& manifest,
                      std::vector<std::size_t> ratios, Split split, const std::vector<std::size_t>& trained) {
  if (ratios.empty()) throw ConfigError("no ratios to evaluate");
  std::sort(ratios.begin(), ratios.end());
  ratios.erase(std::unique(ratios.begin(), ratios.end()), ratios.end());
  for (std::size_t s : ratios) {
    if (s < 2) throw ConfigError("ratios must be >= 2");
  }
  const auto entries = manifest.entries_in(split);
  if (entries.empty()) throw DataError(std::string("manifest has no ") + to_string(split) + " utterances");

  EvalReport report;
  report.kind = std::move(kind);
  report.has_model = gen != nullptr;
  const std::set<std::size_t> seen(trained.begin(), trained.end());
  for (std::size_t s : ratios) report.rows.push_back(evaluate_ratio(gen, manifest, entries, s, seen.count(s) > 0));

  const auto lsd = spectral::lsd_stft_config();
  report.metadata = {{"tool_version", kToolVersion},
                     {"split", to_string(split)},
                     {"manifest_fingerprint", fingerprint_string(manifest.to_json().dump())},
                     {"trained_ratios", trained},
                     {"lsd", {{"fft_size", lsd.fft_size}, {"hop", lsd.hop}, {"window", "hann"}, {"log", "log10"},
                              {"power_floor", spectral::kPowerFloor}}}};
  return report;
}

}  // namespace

EvalReport evaluate(const model::Generator& gen, const CorpusManifest& manifest, const std::vector<std::size_t>& ratios,
                    Split split, const std::vector<std::size_t>& trained_ratios) {
  return run_report("eval", &gen, manifest, ratios, split, trained_ratios);
}

EvalReport evaluate(const fs::path& checkpoint, const CorpusManifest& manifest, const std::vector<std::size_t>& ratios,
                    Split split) {
  const LoadedModel m = load_generator(checkpoint);
  EvalReport r = run_report("eval", &m.generator, manifest, ratios, split, m.run.ratios);
  r.metadata["checkpoint_fingerprint"] = fingerprint_file(checkpoint);
  r.metadata["training_mode"] = m.run.mode_string();
  return r;
}

EvalReport baseline_report(const CorpusManifest& manifest, const std::vector<std::size_t>& ratios, Split split) {
  return run_report("baseline", nullptr, manifest, ratios, split, {});
}

std::vector<std::size_t> default_sweep_grid() { return {2, 3, 4, 5, 6, 8}; }

EvalReport zero_shot_sweep(const fs::path& checkpoint, const CorpusManifest& manifest,
                           const std::vector<std::size_t>& grid, Split split) {
  const LoadedModel m = load_generator(checkpoint);
  EvalReport r = run_report("sweep", &m.generator, manifest, grid, split, m.run.ratios);
  r.metadata["checkpoint_fingerprint"] = fingerprint_file(checkpoint);
  r.metadata["training_mode"] = m.run.mode_string();
  return r;
}

}  // namespace bwe::pipeline
