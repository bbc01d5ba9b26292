#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "bwe/errors.hpp"
#include "bwe/pipeline.hpp"

namespace bwe::pipeline {
namespace {

constexpr double kPi = std::numbers::pi;

// Two-pole resonator, unity gain at DC.
class Resonator {
 public:
  Resonator(double freq, double bandwidth, double rate) {
    const double r = std::exp(-kPi * bandwidth / rate);
    a1_ = 2.0 * r * std::cos(2.0 * kPi * freq / rate);
    a2_ = -r * r;
    gain_ = 1.0 - a1_ - a2_;
  }
  double operator()(double x) {
    const double y = gain_ * x + a1_ * y1_ + a2_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a1_, a2_, gain_;
  double y1_ = 0.0, y2_ = 0.0;
};

struct Vowel {
  std::array<double, 3> formants;
};

// Rough adult formant targets (Hz).
constexpr std::array<Vowel, 6> kVowels{{{{730, 1090, 2440}},
                                        {{270, 2290, 3010}},
                                        {{300, 870, 2240}},
                                        {{530, 1840, 2480}},
                                        {{570, 840, 2410}},
                                        {{660, 1720, 2410}}}};

struct Voice {
  double f0;
  double formant_scale;
  double fricative_center;
  double breath;
};

Voice voice_for(std::size_t speaker) {
  static constexpr std::array<double, 5> kF0{118.0, 205.0, 142.0, 176.0, 98.0};
  const std::size_t i = speaker % kF0.size();
  const double f0 = kF0[i] * (1.0 + 0.04 * static_cast<double>(speaker / kF0.size()));
  const double scale = 0.9 + 0.06 * static_cast<double>(i);
  return {f0, scale, 4200.0 + 450.0 * static_cast<double>(i), 0.02 + 0.01 * static_cast<double>(i % 3)};
}

void raised_cosine_envelope(std::span<double> seg, std::size_t ramp) {
  ramp = std::min(ramp, seg.size() / 2);
  for (std::size_t i = 0; i < ramp; ++i) {
    const double g = 0.5 - 0.5 * std::cos(kPi * static_cast<double>(i) / static_cast<double>(ramp));
    seg[i] *= g;
    seg[seg.size() - 1 - i] *= g;
  }
}

void voiced(std::span<double> out, const Voice& v, double rate, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, kVowels.size() - 1);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const Vowel& vowel = kVowels[pick(rng)];
  const double fs = v.formant_scale;
  std::array<Resonator, 5> formants{Resonator(vowel.formants[0] * fs, 80.0, rate),
                                    Resonator(vowel.formants[1] * fs, 110.0, rate),
                                    Resonator(vowel.formants[2] * fs, 160.0, rate),
                                    Resonator(3500.0 * fs, 250.0, rate), Resonator(4700.0 * fs, 350.0, rate)};
  const double start_f0 = v.f0 * (0.9 + 0.2 * uni(rng));
  const double slope = (uni(rng) - 0.6) * 0.3;  // mild declination on average
  const double vibrato = 4.0 + 2.0 * uni(rng);
  const double tilt = std::exp(-2.0 * kPi * 700.0 / rate);
  double phase = 0.0, lp1 = 0.0, lp2 = 0.0, prev = 0.0;
  const auto n = out.size();
  for (std::size_t t = 0; t < n; ++t) {
    const double pos = static_cast<double>(t) / static_cast<double>(n);
    const double sec = static_cast<double>(t) / rate;
    const double f0 = start_f0 * (1.0 + slope * pos) * (1.0 + 0.01 * std::sin(2.0 * kPi * vibrato * sec));
    phase += f0 / rate;
    double src = v.breath * noise(rng);
    if (phase >= 1.0) {
      phase -= 1.0;
      src += 1.0 + 0.05 * noise(rng);  // jittered pulse amplitude
    }
    lp1 = (1.0 - tilt) * src + tilt * lp1;
    lp2 = (1.0 - tilt) * lp1 + tilt * lp2;
    double y = lp2;
    double mix = 0.0;
    const std::array<double, 5> weights{1.0, 0.7, 0.45, 0.25, 0.15};
    for (std::size_t k = 0; k < formants.size(); ++k) mix += weights[k] * formants[k](y);
    out[t] = mix - prev;  // radiation
    prev = mix;
  }
  raised_cosine_envelope(out, static_cast<std::size_t>(0.02 * rate));
}

void fricative(std::span<double> out, const Voice& v, double rate, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double center = std::min(v.fricative_center * (0.85 + 0.3 * uni(rng)), 0.45 * rate);
  Resonator band(center, 1800.0, rate);
  Resonator upper(std::min(center * 1.45, 0.45 * rate), 2500.0, rate);
  double prev = 0.0;
  for (auto& y : out) {
    const double x = noise(rng);
    const double hp = x - prev;  // keep it out of the low band
    prev = x;
    y = 0.3 * (band(hp) + 0.6 * upper(hp));
  }
  raised_cosine_envelope(out, static_cast<std::size_t>(0.012 * rate));
}

}  // namespace

AudioBuffer synthesize_utterance(std::size_t speaker, double seconds, double sample_rate, Rng& rng) {
  if (!(seconds > 0.0) || !(sample_rate >= 8000.0)) {
    throw std::invalid_argument("synthesize_utterance: need seconds > 0 and a rate of at least 8 kHz");
  }
  const Voice v = voice_for(speaker);
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  AudioBuffer buf{std::vector<double>(n, 0.0), sample_rate};
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  auto len = [&](double lo, double hi) {
    return static_cast<std::size_t>((lo + (hi - lo) * uni(rng)) * sample_rate);
  };
  std::size_t pos = len(0.03, 0.08);
  while (pos < n) {
    const double r = uni(rng);
    std::size_t seg_len;
    std::vector<double> seg;
    if (r < 0.6) {
      seg_len = std::min(len(0.12, 0.28), n - pos);
      seg.assign(seg_len, 0.0);
      voiced(seg, v, sample_rate, rng);
      const double gain = 0.6 + 0.4 * uni(rng);
      for (double& s : seg) s *= gain;
    } else if (r < 0.85) {
      seg_len = std::min(len(0.06, 0.14), n - pos);
      seg.assign(seg_len, 0.0);
      fricative(seg, v, sample_rate, rng);
    } else {
      seg_len = std::min(len(0.04, 0.1), n - pos);  // pause
    }
    for (std::size_t i = 0; i < seg.size(); ++i) buf.samples[pos + i] += seg[i];
    pos += seg_len;
  }

  double peak = 0.0;
  for (double s : buf.samples) peak = std::max(peak, std::abs(s));
  const double gain = peak > 0.0 ? 0.5 / peak : 1.0;
  std::normal_distribution<double> floor_noise(0.0, 4e-4);
  for (double& s : buf.samples) s = s * gain + floor_noise(rng);
  return buf;
}

std::vector<fs::path> synthesize_corpus(const fs::path& out_dir, const SynthOptions& opt) {
  if (opt.speakers == 0 || opt.clips_per_speaker == 0) throw ConfigError("synthesize_corpus: nothing to generate");
  if (opt.sample_rates.empty()) throw ConfigError("synthesize_corpus: no sample rates");
  Rng rng(opt.seed);
  std::vector<fs::path> written;
  std::size_t clip = 0;
  for (std::size_t s = 0; s < opt.speakers; ++s) {
    char speaker[16];
    std::snprintf(speaker, sizeof speaker, "spk%02zu", s + 1);
    fs::create_directories(out_dir / speaker);
    for (std::size_t c = 0; c < opt.clips_per_speaker; ++c, ++clip) {
      const double rate = opt.sample_rates[clip % opt.sample_rates.size()];
      const AudioBuffer buf = synthesize_utterance(s, opt.seconds, rate, rng);
      char name[48];
      std::snprintf(name, sizeof name, "%s_%03zu.wav", speaker, c + 1);
      const fs::path path = out_dir / speaker / name;
      audio::write_wav(buf, path);
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace bwe::pipeline
