#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "bwe/errors.hpp"
#include "bwe/nn/checkpoint.hpp"
#include "bwe/pipeline.hpp"

namespace bwe::pipeline {

TrainRun TrainRun::from_mode(const std::string& mode) {
  TrainRun run;
  if (mode.rfind("single:", 0) == 0) {
    run.mode = TrainMode::kSingle;
    run.ratios = parse_ratio_list(mode.substr(7));
    if (run.ratios.size() != 1) throw ConfigError("single mode takes exactly one ratio, got '" + mode + "'");
  } else if (mode == "unified") {
    run.mode = TrainMode::kUnified;
    run.ratios = {2, 4, 8};
  } else if (mode.rfind("unified:", 0) == 0) {
    run.mode = TrainMode::kUnified;
    run.ratios = parse_ratio_list(mode.substr(8));
  } else {
    throw ConfigError("mode must be 'single:<s>', 'unified' or 'unified:<list>', got '" + mode + "'");
  }
  return run;
}

std::string TrainRun::mode_string() const {
  if (mode == TrainMode::kSingle) return "single:" + std::to_string(ratios.at(0));
  std::string list;
  for (std::size_t s : ratios) list += (list.empty() ? "" : ",") + std::to_string(s);
  return "unified:" + list;
}

void TrainRun::validate() const {
  if (ratios.empty()) throw ConfigError("TrainRun: no ratios");
  if (mode == TrainMode::kSingle && ratios.size() != 1) throw ConfigError("TrainRun: single mode needs one ratio");
  for (std::size_t s : ratios) {
    if (s < 2) throw ConfigError("TrainRun: ratios must be >= 2");
  }
  if (batch_size == 0) throw ConfigError("TrainRun: batch size must be >= 1");
  try {
    generator.validate();
    discriminator.validate();
    weights.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  const std::size_t hop = spectral::training_stft_config().hop;
  if (generator.hop() != hop) throw ConfigError("TrainRun: generator upsampling must total the mel hop");
  if (generator.n_mels != spectral::kMelBands) throw ConfigError("TrainRun: generator expects 80 mel bands");
  if (segment_length == 0 || segment_length % hop != 0) {
    throw ConfigError("TrainRun: segment length must be a positive multiple of " + std::to_string(hop));
  }
  if (!(schedule.lr_init > 0.0) || !(schedule.gamma > 0.0 && schedule.gamma <= 1.0)) {
    throw ConfigError("TrainRun: need lr_init > 0 and gamma in (0, 1]");
  }
}

nlohmann::json TrainRun::to_json() const {
  return {{"mode", mode_string()},
          {"steps", steps},
          {"batch_size", batch_size},
          {"segment_length", segment_length},
          {"seed", seed},
          {"checkpoint_every", checkpoint_every},
          {"split", to_string(split)},
          {"lr_init", schedule.lr_init},
          {"gamma", schedule.gamma},
          {"lambda_adv", weights.adv},
          {"lambda_mel", weights.mel},
          {"lambda_feat", weights.feat},
          {"generator", generator.to_json()},
          {"discriminator", discriminator.to_json()}};
}

TrainRun TrainRun::from_json(const nlohmann::json& j) {
  try {
    TrainRun run = from_mode(j.at("mode").get<std::string>());
    j.at("steps").get_to(run.steps);
    j.at("batch_size").get_to(run.batch_size);
    j.at("segment_length").get_to(run.segment_length);
    j.at("seed").get_to(run.seed);
    j.at("checkpoint_every").get_to(run.checkpoint_every);
    run.split = split_from_string(j.at("split").get<std::string>());
    j.at("lr_init").get_to(run.schedule.lr_init);
    j.at("gamma").get_to(run.schedule.gamma);
    j.at("lambda_adv").get_to(run.weights.adv);
    j.at("lambda_mel").get_to(run.weights.mel);
    j.at("lambda_feat").get_to(run.weights.feat);
    run.generator = model::GeneratorConfig::from_json(j.at("generator"));
    run.discriminator = model::DiscriminatorConfig::from_json(j.at("discriminator"));
    run.validate();
    return run;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed run description: ") + ex.what());
  }
}

TrainingPair make_training_pair(const AudioBuffer& wideband, const AudioBuffer& preprocessed, std::size_t ratio,
                                std::size_t segment_length, Rng& rng) {
  if (ratio < 2 || segment_length == 0) throw std::invalid_argument("make_training_pair: bad ratio or segment");
  if (wideband.sample_rate != preprocessed.sample_rate) {
    throw std::invalid_argument("make_training_pair: wideband and preprocessed rates differ");
  }
  const std::size_t usable = std::min(wideband.size(), preprocessed.size());
  if (usable == 0) throw std::invalid_argument("make_training_pair: empty clip");

  TrainingPair pair;
  pair.ratio = ratio;
  if (usable >= segment_length) {
    std::uniform_int_distribution<std::size_t> dist(0, (usable - segment_length) / ratio);
    pair.wideband_start = dist(rng) * ratio;
  }
  pair.narrowband_start = pair.wideband_start / ratio;

  const std::size_t take = std::min(segment_length, usable - pair.wideband_start);
  const auto begin = static_cast<std::ptrdiff_t>(pair.wideband_start);
  AudioBuffer nb_seg{std::vector<double>(segment_length, 0.0), preprocessed.sample_rate};
  pair.wideband = AudioBuffer{std::vector<double>(segment_length, 0.0), wideband.sample_rate};
  std::copy_n(wideband.samples.begin() + begin, take, pair.wideband.samples.begin());
  std::copy_n(preprocessed.samples.begin() + begin, take, nb_seg.samples.begin());
  pair.mel = spectral::mel_spectrogram(nb_seg, spectral::training_stft_config());
  return pair;
}

TrainingPair make_training_pair(const CorpusManifest& manifest, const ManifestEntry& entry, std::size_t ratio,
                                std::size_t segment_length, Rng& rng) {
  const AudioBuffer wb = load_wideband(manifest, entry);
  const AudioBuffer pre = preprocess_narrowband(load_narrowband(manifest, entry, ratio), manifest.target_rate);
  return make_training_pair(wb, pre, ratio, segment_length, rng);
}

RatioSampler::RatioSampler(std::vector<std::size_t> ratios) : ratios_(std::move(ratios)) {
  if (ratios_.empty()) throw std::invalid_argument("RatioSampler: no ratios");
}

std::size_t RatioSampler::operator()(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> dist(0, ratios_.size() - 1);
  return ratios_[dist(rng)];
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over a stream-offset seed
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

nn::Checkpoint make_checkpoint(const model::Generator& gen, const model::Discriminators& disc, const TrainRun& run,
                               std::size_t step) {
  nn::Checkpoint ckpt;
  ckpt.metadata = {{"kind", "bwe-gan"}, {"tool_version", kToolVersion}, {"step", step}, {"run", run.to_json()}};
  gen.params().export_to(ckpt.arrays, "generator.");
  disc.params().export_to(ckpt.arrays, "discriminator.");
  return ckpt;
}

LoadedModel load_generator(const fs::path& checkpoint) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint);
  if (!ckpt.metadata.contains("run")) throw DataError(checkpoint.string() + ": not a model checkpoint");
  TrainRun run = TrainRun::from_json(ckpt.metadata.at("run"));
  LoadedModel loaded{model::Generator(run.generator, 0), run, ckpt.metadata};
  loaded.generator.params().import_from(ckpt, "generator.");
  return loaded;
}

AudioBuffer run_generator(const model::Generator& gen, const AudioBuffer& preprocessed) {
  if (preprocessed.empty()) throw std::invalid_argument("run_generator: empty input");
  const std::size_t hop = gen.config().hop();
  const std::size_t n = preprocessed.size();
  AudioBuffer padded = preprocessed;
  padded.samples.resize((n + hop - 1) / hop * hop, 0.0);
  nn::NoGradGuard no_grad;
  const auto mel = spectral::mel_spectrogram(padded, spectral::training_stft_config(), gen.config().n_mels);
  const nn::Tensor wave = model::generator_forward(mel, gen);
  const auto y = wave.data();
  return AudioBuffer{std::vector<double>(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n)),
                     preprocessed.sample_rate};
}

namespace {

struct CachedClip {
  const ManifestEntry* entry;
  AudioBuffer wideband;
  std::map<std::size_t, AudioBuffer> preprocessed;
};

struct Batch {
  nn::Tensor mel;   // [B, bands, frames]
  nn::Tensor wave;  // [B, 1, segment]
  nlohmann::json description = nlohmann::json::array();
};

bool all_finite(std::initializer_list<double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

TrainResult train(const TrainRun& run, const CorpusManifest& manifest, const fs::path& out_dir,
                  const TrainObserver& observer) {
  run.validate();
  const auto entries = manifest.entries_in(run.split);
  if (entries.empty()) throw DataError(std::string("manifest has no ") + to_string(run.split) + " utterances");

  model::Generator gen(run.generator, derive_seed(run.seed, 1));
  model::Discriminators disc(run.discriminator, derive_seed(run.seed, 2));
  if (run.segment_length < disc.min_length()) {
    throw ConfigError("segment length " + std::to_string(run.segment_length) + " is shorter than the " +
                      std::to_string(disc.min_length()) + " samples the discriminators need");
  }
  Rng data_rng(derive_seed(run.seed, 3));
  const RatioSampler sampler(run.ratios);

  std::vector<CachedClip> clips;
  for (const ManifestEntry* e : entries) {
    CachedClip c{e, load_wideband(manifest, *e), {}};
    for (std::size_t s : run.ratios) {
      c.preprocessed[s] = preprocess_narrowband(load_narrowband(manifest, *e, s), manifest.target_rate);
    }
    clips.push_back(std::move(c));
  }

  fs::create_directories(out_dir);
  TrainResult result;
  result.loss_log = out_dir / "loss_log.jsonl";
  std::ofstream log(result.loss_log, std::ios::trunc);
  if (!log) throw DataError("cannot write " + result.loss_log.string());

  auto save = [&](const fs::path& path, std::size_t step) {
    nn::save_checkpoint(path, make_checkpoint(gen, disc, run, step));
  };

  std::vector<nn::Tensor> gen_params = gen.params().tensors();
  std::vector<nn::Tensor> disc_params = disc.params().tensors();
  nn::OptimizerState gen_opt = nn::OptimizerState::for_params(gen_params);
  nn::OptimizerState disc_opt = nn::OptimizerState::for_params(disc_params);
  const spectral::LogMelAnalyzer analyzer(spectral::training_stft_config(), run.generator.n_mels,
                                          manifest.target_rate);

  std::vector<std::size_t> order(clips.size());
  std::size_t cursor = order.size();  // forces a shuffle before the first draw
  std::size_t consumed = 0;

  auto next_batch = [&]() {
    const std::size_t seg = run.segment_length;
    const std::size_t frames = seg / run.generator.hop();
    const std::size_t bands = run.generator.n_mels;
    std::vector<nn::Real> mel(run.batch_size * bands * frames);
    std::vector<nn::Real> wave(run.batch_size * seg);
    Batch batch;
    for (std::size_t b = 0; b < run.batch_size; ++b) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), data_rng);
        cursor = 0;
      }
      const CachedClip& clip = clips[order[cursor++]];
      const std::size_t s = sampler(data_rng);
      const TrainingPair pair = make_training_pair(clip.wideband, clip.preprocessed.at(s), s, seg, data_rng);
      for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t m = 0; m < bands; ++m) mel[(b * bands + m) * frames + t] = pair.mel.values(t, m);
      }
      std::copy(pair.wideband.samples.begin(), pair.wideband.samples.end(),
                wave.begin() + static_cast<std::ptrdiff_t>(b * seg));
      batch.description.push_back(
          {{"utterance_id", clip.entry->utterance_id}, {"ratio", s}, {"wideband_start", pair.wideband_start}});
    }
    batch.mel = nn::Tensor::from({run.batch_size, bands, frames}, std::move(mel));
    batch.wave = nn::Tensor::from({run.batch_size, 1, seg}, std::move(wave));
    return batch;
  };

  for (std::size_t step = 1; step <= run.steps; ++step) {
    const auto epoch = static_cast<std::int64_t>(consumed / clips.size());
    const double lr = nn::lr_at(run.schedule, epoch);
    const Batch batch = next_batch();
    consumed += run.batch_size;

    const nn::Tensor fake = gen.forward(batch.mel);

    // Discriminator update on real vs detached generated audio.
    const auto d_real = disc.forward(batch.wave);
    const auto d_fake = disc.forward(fake.detach());
    const nn::Tensor d_loss = losses::discriminator_loss(d_real.scores, d_fake.scores);
    disc.params().zero_grad();
    d_loss.backward();
    adamw_step(disc_params, disc_opt, lr);

    // Generator update; the discriminator is frozen so its gradients stay untouched.
    disc.params().set_requires_grad(false);
    model::DiscriminatorOutput real_feats;
    {
      nn::NoGradGuard no_grad;
      real_feats = disc.forward(batch.wave);
    }
    const auto g_fake = disc.forward(fake);
    const nn::Tensor adv = losses::generator_adversarial_loss(g_fake.scores);
    const nn::Tensor mel = losses::mel_reconstruction_loss(batch.wave, fake, analyzer);
    const nn::Tensor feat = losses::feature_matching_loss(real_feats.features, g_fake.features);
    const nn::Tensor total = losses::weighted_generator_loss(adv, mel, feat, run.weights);

    losses::LossBreakdown b;
    b.disc = d_loss.item();
    b.adv = adv.item();
    b.mel = mel.item();
    b.feat = feat.item();
    b.total = total.item();
    if (!all_finite({b.disc, b.adv, b.mel, b.feat, b.total})) {
      disc.params().set_requires_grad(true);
      const fs::path dump = out_dir / "nan_dump.json";
      const auto fake_values = fake.data();
      std::size_t bad_samples = 0;
      for (double v : fake_values) bad_samples += std::isfinite(v) ? 0 : 1;
      nlohmann::json j = {{"step", step},   {"lr", lr},         {"disc", b.disc},     {"adv", b.adv},
                          {"mel", b.mel},   {"feat", b.feat},   {"total", b.total},   {"batch", batch.description},
                          {"non_finite_generated_samples", bad_samples}};
      std::ofstream(dump) << j.dump(2) << '\n';
      throw NumericalError("non-finite loss at step " + std::to_string(step) + "; diagnostics in " + dump.string());
    }

    gen.params().zero_grad();
    total.backward();
    adamw_step(gen_params, gen_opt, lr);
    disc.params().set_requires_grad(true);

    nlohmann::ordered_json rec;
    rec["step"] = step;
    rec["disc"] = b.disc;
    rec["adv"] = b.adv;
    rec["mel"] = b.mel;
    rec["feat"] = b.feat;
    rec["total"] = b.total;
    rec["lr"] = lr;
    log << rec.dump() << '\n';
    result.last = b;
    result.steps = step;

    if (observer.progress && observer.progress_every > 0 &&
        (step % observer.progress_every == 0 || step == run.steps)) {
      *observer.progress << "step " << step << "/" << run.steps << "  disc " << b.disc << "  adv " << b.adv << "  mel "
                << b.mel << "  feat " << b.feat << "  total " << b.total << "  lr " << lr << std::endl;
    }
    if (run.checkpoint_every > 0 && step % run.checkpoint_every == 0 && step != run.steps) {
      char name[32];
      std::snprintf(name, sizeof name, "ckpt_%07zu.ckpt", step);
      save(out_dir / name, step);
    }
    if (observer.hook && observer.hook_every > 0 && step % observer.hook_every == 0 && observer.hook(step, gen)) {
      break;
    }
  }
  log.flush();
  if (!log) throw DataError("failed writing " + result.loss_log.string());

  result.checkpoint = out_dir / "final.ckpt";
  save(result.checkpoint, result.steps);
  return result;
}

}  // namespace bwe::pipeline
