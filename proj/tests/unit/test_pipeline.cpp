#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>

#include "bwe/dsp.hpp"
#include "bwe/errors.hpp"
#include "bwe/pipeline.hpp"

using namespace bwe;
using namespace bwe::pipeline;

namespace {

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "bwe_pipeline_tests";
  return dir;
}

// Six half-second clips from three speakers, one of them held out.
const CorpusManifest& corpus() {
  static const CorpusManifest m = [] {
    const fs::path root = work_dir();
    fs::remove_all(root);
    SynthOptions so;
    so.speakers = 3;
    so.clips_per_speaker = 2;
    so.seconds = 0.6;
    synthesize_corpus(root / "raw", so);
    PrepareOptions po;
    po.test_fraction = 0.34;
    return prepare_corpus(root / "raw", root / "prepared", po);
  }();
  return m;
}

AudioBuffer tone(double freq, double rate, std::size_t n, double amp = 0.5) {
  AudioBuffer b{std::vector<double>(n), rate};
  for (std::size_t i = 0; i < n; ++i) b.samples[i] = amp * std::sin(2.0 * std::numbers::pi * freq * i / rate);
  return b;
}

TrainRun quick_run(std::size_t steps) {
  TrainRun run = TrainRun::from_mode("single:2");
  run.steps = steps;
  run.batch_size = 1;
  run.segment_length = 4096;
  run.checkpoint_every = 0;
  return run;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream f(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(f, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("Ratio lists parse, sort and reject bad values", "[pipeline]") {
  CHECK(parse_ratio_list("4,2,2,8") == std::vector<std::size_t>{2, 4, 8});
  CHECK(parse_ratio_list(" 3 ") == std::vector<std::size_t>{3});
  CHECK_THROWS_AS(parse_ratio_list("1"), ConfigError);
  CHECK_THROWS_AS(parse_ratio_list("2,x"), ConfigError);
  CHECK_THROWS_AS(parse_ratio_list(""), ConfigError);
}

TEST_CASE("FNV-1a reference values", "[pipeline]") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fingerprint_string("a") == "af63dc4c8601ec8c");
}

TEST_CASE("Seed streams differ and repeat", "[pipeline]") {
  CHECK(derive_seed(0, 1) == derive_seed(0, 1));
  const std::set<std::uint64_t> s{derive_seed(0, 1), derive_seed(0, 2), derive_seed(0, 3), derive_seed(1, 1)};
  CHECK(s.size() == 4);
}

TEST_CASE("Synthetic utterances are reproducible", "[pipeline]") {
  Rng a(5), b(5);
  const auto x = synthesize_utterance(1, 0.5, 16000.0, a);
  const auto y = synthesize_utterance(1, 0.5, 16000.0, b);
  CHECK(x.size() == 8000);
  CHECK(x.samples == y.samples);
  double peak = 0.0;
  for (double v : x.samples) peak = std::max(peak, std::abs(v));
  CHECK(peak > 0.3);
  CHECK(peak < 1.0);
}

TEST_CASE("Prepared corpus layout and split", "[pipeline]") {
  const auto& m = corpus();
  REQUIRE(m.entries.size() == 6);
  CHECK(m.ratios == std::vector<std::size_t>{2, 4, 8});
  const auto train = m.speakers(Split::kTrain), test = m.speakers(Split::kTest);
  CHECK(train.size() == 2);
  CHECK(test.size() == 1);
  for (const auto& s : test) CHECK(std::find(train.begin(), train.end(), s) == train.end());
  for (const auto& e : m.entries) {
    const bool in_test = std::find(test.begin(), test.end(), e.speaker_id) != test.end();
    CHECK(in_test == (e.split == Split::kTest));
    const auto wb = load_wideband(m, e);
    CHECK(wb.sample_rate == 16000.0);
    CHECK(wb.size() == e.wideband_length);
    CHECK(wb.size() == 9600);
    double peak = 0.0;
    for (double v : wb.samples) peak = std::max(peak, std::abs(v));
    CHECK(peak == Catch::Approx(0.95).margin(1.0 / 32768.0));
    for (std::size_t s : m.ratios) {
      const auto nb = load_narrowband(m, e, s);
      CHECK(nb.size() == wb.size() / s);
      CHECK(nb.sample_rate == 16000.0 / static_cast<double>(s));
    }
  }
}

TEST_CASE("Narrowband variants are the decimated wideband", "[pipeline]") {
  const auto& m = corpus();
  const auto& e = m.entries.front();
  const auto wb = load_wideband(m, e);
  const auto stored = load_narrowband(m, e, 4);
  const auto direct = audio::quantize_pcm16(dsp::decimate(wb, dsp::RatioSpec::integer(4, 16000.0)));
  REQUIRE(stored.size() == direct.size());
  for (std::size_t i = 0; i < stored.size(); ++i) CHECK(stored.samples[i] == direct.samples[i]);
  // Ratio 3 is not stored and is derived on demand.
  const auto nb3 = load_narrowband(m, e, 3);
  CHECK(nb3.size() == wb.size() / 3);
  CHECK(nb3.sample_rate == 16000.0 / 3.0);
}

TEST_CASE("Manifest JSON round trip", "[pipeline]") {
  const auto& m = corpus();
  const auto loaded = CorpusManifest::load(m.root / "manifest.json");
  CHECK(loaded.to_json() == m.to_json());
  CHECK(loaded.root == m.root);
  auto j = m.to_json();
  j["format_version"] = 99;
  CHECK_THROWS_AS(CorpusManifest::from_json(j, m.root), DataError);
  CHECK_THROWS_AS(CorpusManifest::load(work_dir() / "nope.json"), DataError);
}

TEST_CASE("Preparing an empty directory is a data error", "[pipeline]") {
  const auto empty = work_dir() / "empty_in";
  fs::create_directories(empty);
  CHECK_THROWS_AS(prepare_corpus(empty, work_dir() / "empty_out"), DataError);
}

TEST_CASE("Training pairs are aligned crops", "[pipeline]") {
  const auto& m = corpus();
  const auto& e = *m.entries_in(Split::kTrain).front();
  const auto wb = load_wideband(m, e);
  const auto pre = preprocess_narrowband(load_narrowband(m, e, 4));
  REQUIRE(pre.size() == wb.size());
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng r1(seed), r2(seed);
    const auto p = make_training_pair(wb, pre, 4, 4096, r1);
    const auto q = make_training_pair(wb, pre, 4, 4096, r2);
    CHECK(p.wideband_start == q.wideband_start);
    CHECK(p.wideband_start % 4 == 0);
    CHECK(p.narrowband_start * 4 == p.wideband_start);
    CHECK(p.wideband_start + 4096 <= wb.size());
    REQUIRE(p.wideband.size() == 4096);
    for (std::size_t i = 0; i < 4096; i += 97) CHECK(p.wideband.samples[i] == wb.samples[p.wideband_start + i]);
    CHECK(p.mel.frames() == 16);
    CHECK(p.mel.bands() == 80);
    AudioBuffer seg{std::vector<double>(pre.samples.begin() + p.wideband_start,
                                        pre.samples.begin() + p.wideband_start + 4096),
                    16000.0};
    CHECK(spectral::mel_spectrogram(seg, spectral::training_stft_config()).values.values == p.mel.values.values);
  }
  Rng r(1);
  const auto whole = make_training_pair(wb, pre, 4, 16384, r);
  CHECK(whole.wideband_start == 0);
  CHECK(whole.wideband.size() == 16384);
  CHECK(whole.wideband.samples[wb.size()] == 0.0);
}

TEST_CASE("Unified ratio sampling is uniform", "[pipeline]") {
  const RatioSampler sampler({2, 4, 8});
  Rng rng(123);
  std::map<std::size_t, int> counts;
  const int n = 3000;
  for (int i = 0; i < n; ++i) counts[sampler(rng)]++;
  REQUIRE(counts.size() == 3);
  for (const auto& [s, c] : counts) CHECK(std::abs(c / static_cast<double>(n) - 1.0 / 3.0) < 0.05);
}

TEST_CASE("Run descriptions", "[pipeline]") {
  const auto single = TrainRun::from_mode("single:4");
  CHECK(single.ratios == std::vector<std::size_t>{4});
  CHECK(single.mode_string() == "single:4");
  const auto unified = TrainRun::from_mode("unified");
  CHECK(unified.ratios == std::vector<std::size_t>{2, 4, 8});
  CHECK(TrainRun::from_json(unified.to_json()).to_json() == unified.to_json());
  CHECK_THROWS_AS(TrainRun::from_mode("double:2"), ConfigError);
  auto bad = single;
  bad.segment_length = 1000;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = single;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("A zero-step run saves the initial generator", "[pipeline][train]") {
  const auto& m = corpus();
  auto run = quick_run(0);
  run.seed = 9;
  const auto out = work_dir() / "train0";
  const auto res = train(run, m, out);
  CHECK(res.steps == 0);
  CHECK(read_lines(res.loss_log).empty());
  const auto loaded = load_generator(res.checkpoint);
  const model::Generator init(run.generator, derive_seed(9, 1));
  const auto& a = loaded.generator.params().named();
  const auto& b = init.params().named();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::equal(a[i].second.data().begin(), a[i].second.data().end(), b[i].second.data().begin()));
  }
  CHECK(loaded.metadata.at("step") == 0);
}

TEST_CASE("A short run logs every step and checkpoints on cadence", "[pipeline][train]") {
  const auto& m = corpus();
  auto run = quick_run(3);
  run.checkpoint_every = 2;
  const auto out = work_dir() / "train3";
  fs::remove_all(out);
  const auto res = train(run, m, out);
  CHECK(res.steps == 3);
  CHECK(fs::exists(out / "ckpt_0000002.ckpt"));
  CHECK(fs::exists(out / "final.ckpt"));
  const auto lines = read_lines(res.loss_log);
  REQUIRE(lines.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto j = nlohmann::json::parse(lines[i]);
    CHECK(j.at("step") == i + 1);
    for (const char* key : {"disc", "adv", "mel", "feat", "total", "lr"}) CHECK(std::isfinite(j.at(key).get<double>()));
    const double total = j.at("total"), adv = j.at("adv"), mel = j.at("mel"), feat = j.at("feat");
    CHECK(total == Catch::Approx(1.1 * adv + 50.0 * mel + 2.0 * feat));
  }
  CHECK(std::isfinite(res.last.total));
}

TEST_CASE("Observer hook can stop a run", "[pipeline][train]") {
  TrainObserver obs;
  obs.hook_every = 1;
  std::size_t calls = 0;
  obs.hook = [&](std::size_t step, const model::Generator&) {
    ++calls;
    return step >= 2;
  };
  const auto res = train(quick_run(10), corpus(), work_dir() / "hook", obs);
  CHECK(res.steps == 2);
  CHECK(calls == 2);
}

TEST_CASE("Generator inference keeps the input length", "[pipeline]") {
  const model::Generator gen(model::GeneratorConfig::toy(), 1);
  for (std::size_t n : {1000u, 4096u, 5001u}) {
    const auto y = run_generator(gen, tone(500.0, 16000.0, n));
    CHECK(y.size() == n);
    CHECK(y.sample_rate == 16000.0);
  }
}

TEST_CASE("Report means equal per-utterance means", "[pipeline][eval]") {
  const auto& m = corpus();
  const model::Generator gen(model::GeneratorConfig::toy(), 1);
  const auto rep = evaluate(gen, m, {2, 3}, Split::kTrain, {2});
  CHECK(rep.has_model);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].seen_in_training);
  CHECK_FALSE(rep.rows[1].seen_in_training);
  for (const auto& row : rep.rows) {
    REQUIRE(row.utterances.size() == 4);
    double mm = 0.0, bb = 0.0;
    for (const auto& u : row.utterances) {
      mm += u.model_lsd;
      bb += u.baseline_lsd;
      CHECK(u.length == 9600);
    }
    CHECK(row.model_lsd == Catch::Approx(mm / 4.0).epsilon(1e-14));
    CHECK(row.baseline_lsd == Catch::Approx(bb / 4.0).epsilon(1e-14));
  }
}

TEST_CASE("Baseline reports and emitted files", "[pipeline][eval]") {
  const auto& m = corpus();
  const auto rep = baseline_report(m, {2, 4, 8}, Split::kTest);
  CHECK_FALSE(rep.has_model);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.rows[0].baseline_lsd < rep.rows[1].baseline_lsd);
  CHECK(rep.rows[1].baseline_lsd < rep.rows[2].baseline_lsd);
  const auto out = work_dir() / "report";
  emit_report(rep, out);
  const auto csv = read_lines(out / "report.csv");
  REQUIRE(csv.size() == 4);
  CHECK(csv[0] == "ratio,model_lsd,baseline_lsd,n_utterances");
  CHECK(csv[1].starts_with("2,,"));
  CHECK(fs::exists(out / "plot_data.csv"));
  const auto j = nlohmann::json::parse(std::ifstream(out / "report.json"));
  CHECK(j.at("rows").size() == 3);
}

TEST_CASE("Spectrogram image puts a tone on the right row", "[pipeline][render]") {
  RenderOptions opt;
  const auto img = spectrogram_image(tone(2000.0, 16000.0, 8000), opt);
  CHECK(img.height == 257);
  CHECK(img.width == 1 + 8000 / 128);
  // 2 kHz is bin 64 of a 512-point FFT at 16 kHz.
  const std::size_t x = img.width / 2;
  std::size_t best = 0;
  int best_sum = -1;
  for (std::size_t y = 0; y < img.height; ++y) {
    const auto p = img.pixel(x, y);
    const int s = p[0] + p[1] + p[2];
    if (s > best_sum) {
      best_sum = s;
      best = y;
    }
  }
  CHECK(best == img.height - 1 - 64);
  CHECK(img.pixel(x, 0) == std::array<std::uint8_t, 3>{0, 0, 0});
}

TEST_CASE("Silence renders uniformly black", "[pipeline][render]") {
  const auto img = spectrogram_image(AudioBuffer{std::vector<double>(4000, 0.0), 16000.0});
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) CHECK(img.pixel(x, y) == std::array<std::uint8_t, 3>{0, 0, 0});
}

TEST_CASE("Decimated audio is dark above the narrowband Nyquist", "[pipeline][render]") {
  const auto& m = corpus();
  const auto& e = m.entries.front();
  const auto pre = preprocess_narrowband(load_narrowband(m, e, 4));
  const auto img = spectrogram_image(pre);
  // Rows are bins from the top; 2 kHz is bin 64.
  auto band_level = [&](std::size_t y0, std::size_t y1) {
    double acc = 0.0;
    for (std::size_t y = y0; y < y1; ++y)
      for (std::size_t x = 0; x < img.width; ++x) acc += img.pixel(x, y)[0];
    return acc / static_cast<double>((y1 - y0) * img.width);
  };
  const double upper = band_level(0, img.height - 1 - 80);
  const double lower = band_level(img.height - 60, img.height);
  CHECK(lower > upper + 50.0);

  const auto png = work_dir() / "spec.png";
  render_spectrogram(pre, png);
  std::ifstream f(png, std::ios::binary);
  char magic[8] = {};
  f.read(magic, 8);
  CHECK(std::string(magic + 1, 3) == "PNG");
}
