#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bwe/audio_io.hpp"
#include "bwe/losses.hpp"
#include "bwe/model.hpp"
#include "bwe/nn/optim.hpp"
#include "bwe/spectral.hpp"

namespace bwe::pipeline {

namespace fs = std::filesystem;
using audio::AudioBuffer;
using Rng = std::mt19937_64;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr double kTargetRate = 16000.0;

/// 64-bit FNV-1a, used for content fingerprints in reports.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string fingerprint_file(const fs::path& path);
std::string fingerprint_string(std::string_view text);

/// Parses "2,4,8" into a sorted, de-duplicated list of ratios >= 2.
std::vector<std::size_t> parse_ratio_list(const std::string& text);

// ---------------------------------------------------------------------------
// Corpus

enum class Split { kTrain, kTest };
const char* to_string(Split split);
Split split_from_string(const std::string& text);

struct ManifestEntry {
  std::string utterance_id;  // "<speaker>/<stem>"
  std::string speaker_id;
  std::string wideband;  // relative to the manifest directory
  std::size_t wideband_length = 0;
  std::map<std::size_t, std::string> narrowband;  // ratio -> relative path
  Split split = Split::kTrain;
};

/// Prepared corpus description, stored as JSON next to the audio it lists.
///
/// Schema (format_version 1):
///   { "format_version": 1, "tool_version": str, "target_rate": 16000,
///     "ratios": [int], "peak": real,
///     "filter": { "type": "cheby1", "order": 8, "ripple_db": 0.05,
///                 "cutoff_of_narrowband_nyquist": 0.8 },
///     "splits": { "train": [speaker], "test": [speaker] },
///     "entries": [ { "utterance_id", "speaker_id", "split", "wideband",
///                    "wideband_length", "narrowband": { "<s>": path } } ] }
struct CorpusManifest {
  static constexpr int kFormatVersion = 1;

  double target_rate = kTargetRate;
  std::vector<std::size_t> ratios;
  double peak = 0.95;
  std::string tool_version = kToolVersion;
  std::vector<ManifestEntry> entries;
  fs::path root;  // directory the relative paths resolve against; not serialized

  std::vector<const ManifestEntry*> entries_in(Split split) const;
  std::vector<std::string> speakers(Split split) const;
  fs::path resolve(const std::string& relative) const { return root / relative; }

  nlohmann::json to_json() const;
  static CorpusManifest from_json(const nlohmann::json& j, fs::path root);
  void save(const fs::path& file) const;
  static CorpusManifest load(const fs::path& file);
};

struct PrepareOptions {
  std::vector<std::size_t> ratios{2, 4, 8};
  double target_rate = kTargetRate;
  double peak = 0.95;
  // Share of speakers (rounded, at least one when there are two or more
  // speakers) held out for testing, taken from the end of the sorted list.
  double test_fraction = 0.1;
};

/// Resamples every WAV under `input_dir` to the target rate, peak-normalizes,
/// quantizes to 16 bits and writes one decimated variant per ratio. The
/// speaker is the first directory below `input_dir`, or for files directly in
/// it, the filename up to the first '_'. Writes out_dir/manifest.json.
CorpusManifest prepare_corpus(const fs::path& input_dir, const fs::path& out_dir, const PrepareOptions& opt = {});

AudioBuffer load_wideband(const CorpusManifest& manifest, const ManifestEntry& entry);
/// Stored variant if present, otherwise decimated from the wideband file.
/// The returned rate is exactly target_rate / s.
AudioBuffer load_narrowband(const CorpusManifest& manifest, const ManifestEntry& entry, std::size_t ratio);

/// Narrowband signal brought back to the wideband rate by FFT interpolation:
/// the model's input and the baseline's output.
AudioBuffer preprocess_narrowband(const AudioBuffer& narrowband, double target_rate = kTargetRate);

// ---------------------------------------------------------------------------
// Synthetic speech-like corpus

struct SynthOptions {
  std::size_t speakers = 5;
  std::size_t clips_per_speaker = 2;
  double seconds = 1.0;
  std::uint64_t seed = 7;
  // Clips cycle through these rates so preparation exercises resampling.
  std::vector<double> sample_rates{16000.0, 48000.0};
};

/// One utterance: voiced segments (glottal pulses through formant
/// resonators), fricative noise bursts, pauses and a low background floor.
AudioBuffer synthesize_utterance(std::size_t speaker, double seconds, double sample_rate, Rng& rng);

/// Writes out_dir/<speaker>/<speaker>_<nnn>.wav; returns the paths written.
std::vector<fs::path> synthesize_corpus(const fs::path& out_dir, const SynthOptions& opt = {});

// ---------------------------------------------------------------------------
// Training

enum class TrainMode { kSingle, kUnified };

struct TrainRun {
  TrainMode mode = TrainMode::kSingle;
  std::vector<std::size_t> ratios{2};  // one ratio in single mode
  std::size_t steps = 5000;
  std::size_t batch_size = 4;
  std::size_t segment_length = 8192;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 1000;  // 0: final checkpoint only
  Split split = Split::kTrain;
  nn::LrSchedule schedule;
  losses::LossWeights weights;
  model::GeneratorConfig generator = model::GeneratorConfig::toy();
  model::DiscriminatorConfig discriminator = model::DiscriminatorConfig::toy();

  /// "single:4" or "unified" (ratios 2, 4, 8).
  static TrainRun from_mode(const std::string& mode);
  std::string mode_string() const;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainRun from_json(const nlohmann::json& j);
};

struct TrainingPair {
  spectral::MelSpectrogram mel;  // segment_length / 256 frames
  AudioBuffer wideband;          // segment_length samples
  std::size_t ratio = 0;
  std::size_t wideband_start = 0;
  std::size_t narrowband_start = 0;  // wideband_start / ratio
};

/// Random aligned crop. `preprocessed` is the whole narrowband utterance after
/// preprocess_narrowband; the crop starts on a multiple of `ratio` so that
/// the narrowband region begins at wideband_start / ratio. Clips shorter than
/// the segment are used whole and zero-padded.
TrainingPair make_training_pair(const AudioBuffer& wideband, const AudioBuffer& preprocessed, std::size_t ratio,
                                std::size_t segment_length, Rng& rng);
TrainingPair make_training_pair(const CorpusManifest& manifest, const ManifestEntry& entry, std::size_t ratio,
                                std::size_t segment_length, Rng& rng);

/// Uniform draw over a fixed ratio set.
class RatioSampler {
 public:
  explicit RatioSampler(std::vector<std::size_t> ratios);
  std::size_t operator()(Rng& rng) const;
  const std::vector<std::size_t>& ratios() const { return ratios_; }

 private:
  std::vector<std::size_t> ratios_;
};

/// Independent, reproducible seeds for the parts of a run.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct TrainResult {
  fs::path checkpoint;
  fs::path loss_log;
  std::size_t steps = 0;
  losses::LossBreakdown last;
};

/// Alternating LSGAN updates. Writes out_dir/loss_log.jsonl (one record per
/// step), step checkpoints at the configured cadence and out_dir/final.ckpt.
/// A non-finite loss writes out_dir/nan_dump.json and throws NumericalError.
/// Optional side channels of a training run.
struct TrainObserver {
  std::ostream* progress = nullptr;  // one line every progress_every steps
  std::size_t progress_every = 50;
  // Called every hook_every steps after the update; returning true ends the
  // run early (the final checkpoint then records the step reached).
  std::size_t hook_every = 0;
  std::function<bool(std::size_t step, const model::Generator& gen)> hook;
};

TrainResult train(const TrainRun& run, const CorpusManifest& manifest, const fs::path& out_dir,
                  const TrainObserver& observer = {});

struct LoadedModel {
  model::Generator generator;
  TrainRun run;
  nlohmann::json metadata;
};

nn::Checkpoint make_checkpoint(const model::Generator& gen, const model::Discriminators& disc, const TrainRun& run,
                               std::size_t step);
LoadedModel load_generator(const fs::path& checkpoint);

/// Model inference on a preprocessed narrowband signal: zero-pads to a
/// multiple of the hop, runs the generator and trims to the input length.
AudioBuffer run_generator(const model::Generator& gen, const AudioBuffer& preprocessed);

// ---------------------------------------------------------------------------
// Evaluation and reports

struct UtteranceResult {
  std::string utterance_id;
  std::size_t length = 0;
  double model_lsd = 0.0;
  double baseline_lsd = 0.0;
};

struct RatioResult {
  std::size_t ratio = 0;
  bool seen_in_training = false;
  double model_lsd = 0.0;     // mean over utterances
  double baseline_lsd = 0.0;  // mean over utterances
  std::vector<UtteranceResult> utterances;
};

struct EvalReport {
  std::string kind;  // "eval", "sweep" or "baseline"
  bool has_model = false;
  std::vector<RatioResult> rows;  // ascending ratio
  nlohmann::json metadata = nlohmann::json::object();
};

/// Per ratio and utterance: narrowband -> preprocess -> generator -> trim ->
/// LSD against the equally trimmed reference, alongside the FFT baseline.
EvalReport evaluate(const fs::path& checkpoint, const CorpusManifest& manifest, const std::vector<std::size_t>& ratios,
                    Split split = Split::kTest);
EvalReport evaluate(const model::Generator& gen, const CorpusManifest& manifest, const std::vector<std::size_t>& ratios,
                    Split split = Split::kTest, const std::vector<std::size_t>& trained_ratios = {});

/// FFT-interpolation baseline only.
EvalReport baseline_report(const CorpusManifest& manifest, const std::vector<std::size_t>& ratios,
                           Split split = Split::kTest);

std::vector<std::size_t> default_sweep_grid();
EvalReport zero_shot_sweep(const fs::path& checkpoint, const CorpusManifest& manifest,
                           const std::vector<std::size_t>& grid = default_sweep_grid(), Split split = Split::kTest);

/// report.csv (ratio, model_lsd, baseline_lsd, n_utterances), report.json
/// (metadata, rows, per-utterance values) and plot_data.csv.
void emit_report(const EvalReport& report, const fs::path& out_dir);

// ---------------------------------------------------------------------------
// Spectrogram images

struct RenderOptions {
  std::size_t fft_size = 512;
  std::size_t hop = 128;
  double dynamic_range_db = 80.0;
};

/// 8-bit RGB raster, row 0 at the top.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  std::array<std::uint8_t, 3> pixel(std::size_t x, std::size_t y) const {
    const std::size_t i = 3 * (y * width + x);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
};

/// "hot" colormap: black -> red -> yellow -> white as v goes 0 -> 1.
std::array<std::uint8_t, 3> hot_colormap(double v);

/// Log-power spectrogram image: one column per frame, one row per bin, with
/// 0 Hz on the bottom row and Nyquist on the top. Levels are in dB relative
/// to the loudest bin, clipped to the dynamic range; a signal whose peak lies
/// below the power floor + dynamic range maps to the floor instead.
Image spectrogram_image(const AudioBuffer& buf, const RenderOptions& opt = {});
void write_png(const Image& image, const fs::path& path);
void render_spectrogram(const AudioBuffer& buf, const fs::path& out, const RenderOptions& opt = {});

}  // namespace bwe::pipeline
