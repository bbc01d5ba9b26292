// bwe: corpus preparation, training, evaluation and rendering for the
// bandwidth-expansion toolkit.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
// 3 data error, 4 numerical failure.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bwe/errors.hpp"
#include "bwe/pipeline.hpp"

namespace {

using namespace bwe;

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kNumerical = 4 };

void print_report(const pipeline::EvalReport& r) {
  std::printf("ratio  model_lsd  baseline_lsd  n\n");
  for (const auto& row : r.rows) {
    if (r.has_model) {
      std::printf("%5zu  %9.4f  %12.4f  %zu%s\n", row.ratio, row.model_lsd, row.baseline_lsd, row.utterances.size(),
                  row.seen_in_training ? "" : "  (unseen)");
    } else {
      std::printf("%5zu  %9s  %12.4f  %zu\n", row.ratio, "-", row.baseline_lsd, row.utterances.size());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speech bandwidth expansion toolkit"};
  app.require_subcommand(1);

  // synth
  pipeline::SynthOptions synth_opt;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic speech-like corpus");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--speakers", synth_opt.speakers, "Number of speakers")->check(CLI::PositiveNumber);
  synth->add_option("--clips", synth_opt.clips_per_speaker, "Clips per speaker")->check(CLI::PositiveNumber);
  synth->add_option("--seconds", synth_opt.seconds, "Clip duration")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_opt.seed, "Random seed");

  // prepare
  pipeline::PrepareOptions prep_opt;
  std::string prep_in, prep_out, prep_ratios = "2,4,8";
  auto* prepare = app.add_subcommand("prepare", "Resample, normalize and decimate a WAV corpus");
  prepare->add_option("--in", prep_in, "Input directory of per-speaker WAV files")->required();
  prepare->add_option("--out", prep_out, "Output directory")->required();
  prepare->add_option("--ratios", prep_ratios, "Comma-separated upsampling ratios");
  prepare->add_option("--peak", prep_opt.peak, "Peak level after normalization")->check(CLI::Range(1e-6, 1.0));
  prepare->add_option("--test-fraction", prep_opt.test_fraction, "Share of speakers held out");

  // train
  std::string train_manifest, train_mode = "single:2", train_out, train_split = "train";
  std::size_t train_steps = 5000, train_batch = 4, train_segment = 8192, train_every = 1000;
  std::uint64_t train_seed = 0;
  double train_lr = 1.5e-4, train_gamma = 0.999;
  bool paper_size = false;
  auto* train = app.add_subcommand("train", "Train a generator and its discriminators");
  train->add_option("--manifest", train_manifest, "Corpus manifest")->required();
  train->add_option("--mode", train_mode, "single:<s>, unified or unified:<list>");
  train->add_option("--steps", train_steps, "Training steps");
  train->add_option("--seed", train_seed, "Random seed");
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--batch", train_batch, "Batch size")->check(CLI::PositiveNumber);
  train->add_option("--segment", train_segment, "Wideband samples per example (multiple of 256)");
  train->add_option("--lr", train_lr, "Initial learning rate");
  train->add_option("--gamma", train_gamma, "Per-epoch learning-rate decay");
  train->add_option("--checkpoint-every", train_every, "Checkpoint cadence in steps (0: final only)");
  train->add_option("--split", train_split, "Manifest split to train on");
  train->add_flag("--paper-size", paper_size, "Use the full-width generator and discriminators");

  // eval / sweep / baseline
  std::string eval_ckpt, eval_manifest, eval_ratios = "2,4,8", eval_out, eval_split = "test";
  auto* eval = app.add_subcommand("eval", "Score a checkpoint against the FFT baseline");
  eval->add_option("--ckpt", eval_ckpt, "Checkpoint")->required();
  eval->add_option("--manifest", eval_manifest, "Corpus manifest")->required();
  eval->add_option("--ratios", eval_ratios, "Comma-separated ratios");
  eval->add_option("--out", eval_out, "Report directory");
  eval->add_option("--split", eval_split, "Manifest split to evaluate");

  std::string sweep_grid = "2,3,4,5,6,8";
  auto* sweep = app.add_subcommand("sweep", "Evaluate a unified checkpoint over seen and unseen ratios");
  sweep->add_option("--ckpt", eval_ckpt, "Checkpoint")->required();
  sweep->add_option("--manifest", eval_manifest, "Corpus manifest")->required();
  sweep->add_option("--grid", sweep_grid, "Comma-separated ratios");
  sweep->add_option("--out", eval_out, "Report directory");
  sweep->add_option("--split", eval_split, "Manifest split to evaluate");

  auto* baseline = app.add_subcommand("baseline", "FFT-interpolation baseline only");
  baseline->add_option("--manifest", eval_manifest, "Corpus manifest")->required();
  baseline->add_option("--ratios", eval_ratios, "Comma-separated ratios");
  baseline->add_option("--out", eval_out, "Report directory");
  baseline->add_option("--split", eval_split, "Manifest split to evaluate");

  // render
  std::string render_wav, render_out;
  auto* render = app.add_subcommand("render", "Write a log-power spectrogram PNG");
  render->add_option("--wav", render_wav, "Input WAV")->required();
  render->add_option("--out", render_out, "Output PNG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*synth) {
      const auto files = pipeline::synthesize_corpus(synth_out, synth_opt);
      std::cout << "wrote " << files.size() << " clips to " << synth_out << "\n";
    } else if (*prepare) {
      prep_opt.ratios = pipeline::parse_ratio_list(prep_ratios);
      const auto m = pipeline::prepare_corpus(prep_in, prep_out, prep_opt);
      std::cout << "prepared " << m.entries.size() << " utterances (" << m.speakers(pipeline::Split::kTrain).size()
                << " train / " << m.speakers(pipeline::Split::kTest).size() << " test speakers) in " << prep_out
                << "\n";
    } else if (*train) {
      auto run = pipeline::TrainRun::from_mode(train_mode);
      run.steps = train_steps;
      run.seed = train_seed;
      run.batch_size = train_batch;
      run.segment_length = train_segment;
      run.checkpoint_every = train_every;
      run.split = pipeline::split_from_string(train_split);
      run.schedule.lr_init = train_lr;
      run.schedule.gamma = train_gamma;
      if (paper_size) {
        run.generator = model::GeneratorConfig::paper();
        run.discriminator = model::DiscriminatorConfig::paper();
      }
      const auto manifest = pipeline::CorpusManifest::load(train_manifest);
      pipeline::TrainObserver observer;
      observer.progress = &std::cerr;
      const auto result = pipeline::train(run, manifest, train_out, observer);
      std::cout << "checkpoint " << result.checkpoint.string() << " after " << result.steps << " steps\n";
    } else if (*eval || *sweep || *baseline) {
      const auto manifest = pipeline::CorpusManifest::load(eval_manifest);
      const auto split = pipeline::split_from_string(eval_split);
      pipeline::EvalReport report;
      if (*eval) {
        report = pipeline::evaluate(eval_ckpt, manifest, pipeline::parse_ratio_list(eval_ratios), split);
      } else if (*sweep) {
        report = pipeline::zero_shot_sweep(eval_ckpt, manifest, pipeline::parse_ratio_list(sweep_grid), split);
      } else {
        report = pipeline::baseline_report(manifest, pipeline::parse_ratio_list(eval_ratios), split);
      }
      print_report(report);
      if (!eval_out.empty()) pipeline::emit_report(report, eval_out);
    } else if (*render) {
      pipeline::render_spectrogram(audio::read_wav(render_wav), render_out);
      std::cout << "wrote " << render_out << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOk;
}
