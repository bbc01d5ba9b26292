#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "bwe/dsp.hpp"
#include "bwe/errors.hpp"
#include "bwe/pipeline.hpp"

namespace bwe::pipeline {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fingerprint_string(std::string_view text) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(text);
  return os.str();
}

std::string fingerprint_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return fingerprint_string(buf.str());
}

std::vector<std::size_t> parse_ratio_list(const std::string& text) {
  std::set<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    item = first == std::string::npos ? "" : item.substr(first, item.find_last_not_of(" \t") - first + 1);
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("invalid ratio '" + item + "' in '" + text + "'");
    }
    if (used != item.size() || v < 2) throw ConfigError("ratios must be integers >= 2, got '" + item + "'");
    out.insert(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ConfigError("empty ratio list");
  return {out.begin(), out.end()};
}

const char* to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split split_from_string(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "test") return Split::kTest;
  throw ConfigError("split must be 'train' or 'test', got '" + text + "'");
}

std::vector<const ManifestEntry*> CorpusManifest::entries_in(Split split) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(&e);
  }
  return out;
}

std::vector<std::string> CorpusManifest::speakers(Split split) const {
  std::set<std::string> s;
  for (const auto& e : entries) {
    if (e.split == split) s.insert(e.speaker_id);
  }
  return {s.begin(), s.end()};
}

nlohmann::json CorpusManifest::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json nb = nlohmann::json::object();
    for (const auto& [s, path] : e.narrowband) nb[std::to_string(s)] = path;
    list.push_back({{"utterance_id", e.utterance_id},
                    {"speaker_id", e.speaker_id},
                    {"split", to_string(e.split)},
                    {"wideband", e.wideband},
                    {"wideband_length", e.wideband_length},
                    {"narrowband", nb}});
  }
  const dsp::SosFilter f = dsp::antialias_filter(2);
  return {{"format_version", kFormatVersion},
          {"tool_version", tool_version},
          {"target_rate", target_rate},
          {"ratios", ratios},
          {"peak", peak},
          {"filter",
           {{"type", "cheby1"},
            {"order", f.order},
            {"ripple_db", f.ripple_db},
            {"cutoff_of_narrowband_nyquist", 0.8}}},
          {"splits", {{"train", speakers(Split::kTrain)}, {"test", speakers(Split::kTest)}}},
          {"entries", list}};
}

CorpusManifest CorpusManifest::from_json(const nlohmann::json& j, fs::path root) {
  try {
    if (j.at("format_version").get<int>() != kFormatVersion) {
      throw DataError("unsupported manifest format_version " + j.at("format_version").dump());
    }
    CorpusManifest m;
    m.root = std::move(root);
    j.at("tool_version").get_to(m.tool_version);
    j.at("target_rate").get_to(m.target_rate);
    j.at("ratios").get_to(m.ratios);
    j.at("peak").get_to(m.peak);
    for (const auto& je : j.at("entries")) {
      ManifestEntry e;
      je.at("utterance_id").get_to(e.utterance_id);
      je.at("speaker_id").get_to(e.speaker_id);
      e.split = split_from_string(je.at("split").get<std::string>());
      je.at("wideband").get_to(e.wideband);
      je.at("wideband_length").get_to(e.wideband_length);
      for (const auto& [key, path] : je.at("narrowband").items()) {
        e.narrowband[static_cast<std::size_t>(std::stoul(key))] = path.get<std::string>();
      }
      m.entries.push_back(std::move(e));
    }
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed manifest: ") + ex.what());
  } catch (const ConfigError& ex) {
    throw DataError(std::string("malformed manifest: ") + ex.what());
  }
}

void CorpusManifest::save(const fs::path& file) const {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + file.string());
  out << to_json().dump(2) << '\n';
  if (!out) throw DataError("cannot write manifest " + file.string());
}

CorpusManifest CorpusManifest::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open manifest " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("manifest " + file.string() + " is not valid JSON: " + ex.what());
  }
  return from_json(j, file.parent_path());
}

namespace {

bool is_wav(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".wav";
}

std::string speaker_of(const fs::path& relative) {
  auto it = relative.begin();
  if (std::next(it) != relative.end()) return it->string();
  const std::string stem = relative.stem().string();
  return stem.substr(0, stem.find('_'));
}

void write_audio(const AudioBuffer& buf, const fs::path& path) {
  fs::create_directories(path.parent_path());
  audio::write_wav(buf, path);
}

}  // namespace

CorpusManifest prepare_corpus(const fs::path& input_dir, const fs::path& out_dir, const PrepareOptions& opt) {
  if (opt.ratios.empty()) throw ConfigError("prepare_corpus: no ratios requested");
  for (std::size_t s : opt.ratios) {
    if (s < 2) throw ConfigError("prepare_corpus: ratios must be >= 2");
  }
  if (!(opt.target_rate > 0.0)) throw ConfigError("prepare_corpus: target rate must be positive");
  if (!(opt.test_fraction >= 0.0 && opt.test_fraction < 1.0)) {
    throw ConfigError("prepare_corpus: test fraction must lie in [0, 1)");
  }
  if (!fs::is_directory(input_dir)) throw DataError("input directory " + input_dir.string() + " does not exist");

  std::vector<fs::path> files;
  for (const auto& de : fs::recursive_directory_iterator(input_dir)) {
    if (de.is_regular_file() && is_wav(de.path())) files.push_back(fs::relative(de.path(), input_dir));
  }
  std::sort(files.begin(), files.end());

  CorpusManifest m;
  m.root = out_dir;
  m.target_rate = opt.target_rate;
  m.ratios = opt.ratios;
  std::sort(m.ratios.begin(), m.ratios.end());
  m.ratios.erase(std::unique(m.ratios.begin(), m.ratios.end()), m.ratios.end());
  m.peak = opt.peak;

  for (const auto& rel : files) {
    AudioBuffer wb;
    try {
      wb = audio::read_wav(input_dir / rel);
      if (wb.sample_rate != opt.target_rate) wb = dsp::fft_resample(wb, opt.target_rate);
      wb.sample_rate = opt.target_rate;
      wb = audio::quantize_pcm16(audio::peak_normalize(wb, opt.peak));
    } catch (const std::exception& ex) {
      std::cerr << "warning: skipping " << rel.generic_string() << ": " << ex.what() << '\n';
      continue;
    }

    ManifestEntry e;
    e.speaker_id = speaker_of(rel);
    fs::path id = rel;
    id.replace_extension();
    e.utterance_id = id.generic_string();
    if (rel.begin() == std::prev(rel.end())) e.utterance_id = e.speaker_id + "/" + e.utterance_id;
    e.wideband = "wideband/" + e.utterance_id + ".wav";
    e.wideband_length = wb.size();

    std::map<std::size_t, AudioBuffer> variants;
    try {
      for (std::size_t s : m.ratios) {
        variants[s] = dsp::decimate(wb, dsp::RatioSpec::integer(static_cast<std::int64_t>(s), opt.target_rate));
      }
    } catch (const std::invalid_argument& ex) {
      std::cerr << "warning: skipping " << rel.generic_string() << ": " << ex.what() << '\n';
      continue;
    }
    write_audio(wb, out_dir / e.wideband);
    for (const auto& [s, nb] : variants) {
      e.narrowband[s] = "nb" + std::to_string(s) + "/" + e.utterance_id + ".wav";
      write_audio(nb, out_dir / e.narrowband[s]);
    }
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) throw DataError("no usable WAV files under " + input_dir.string());

  std::set<std::string> speaker_set;
  for (const auto& e : m.entries) speaker_set.insert(e.speaker_id);
  const std::vector<std::string> speakers(speaker_set.begin(), speaker_set.end());
  const std::size_t n = speakers.size();
  std::size_t n_test = 0;
  if (n >= 2 && opt.test_fraction > 0.0) {
    n_test = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(opt.test_fraction * n)), 1, n - 1);
  }
  const std::set<std::string> test(speakers.end() - static_cast<std::ptrdiff_t>(n_test), speakers.end());
  for (auto& e : m.entries) e.split = test.count(e.speaker_id) ? Split::kTest : Split::kTrain;

  fs::create_directories(out_dir);
  m.save(out_dir / "manifest.json");
  return m;
}

AudioBuffer load_wideband(const CorpusManifest& manifest, const ManifestEntry& entry) {
  AudioBuffer wb = audio::read_wav(manifest.resolve(entry.wideband));
  if (std::llround(wb.sample_rate) != std::llround(manifest.target_rate)) {
    throw DataError(entry.wideband + ": expected " + std::to_string(manifest.target_rate) + " Hz");
  }
  wb.sample_rate = manifest.target_rate;
  return wb;
}

AudioBuffer load_narrowband(const CorpusManifest& manifest, const ManifestEntry& entry, std::size_t ratio) {
  if (ratio < 2) throw std::invalid_argument("load_narrowband: ratio must be >= 2");
  const double rate = manifest.target_rate / static_cast<double>(ratio);
  if (auto it = entry.narrowband.find(ratio); it != entry.narrowband.end()) {
    AudioBuffer nb = audio::read_wav(manifest.resolve(it->second));
    if (std::llround(nb.sample_rate) != std::llround(rate)) {
      throw DataError(it->second + ": sample rate does not match ratio " + std::to_string(ratio));
    }
    nb.sample_rate = rate;
    return nb;
  }
  return dsp::decimate(load_wideband(manifest, entry),
                       dsp::RatioSpec::integer(static_cast<std::int64_t>(ratio), manifest.target_rate));
}

AudioBuffer preprocess_narrowband(const AudioBuffer& narrowband, double target_rate) {
  return dsp::fft_resample(narrowband, target_rate);
}

}  // namespace bwe::pipeline
