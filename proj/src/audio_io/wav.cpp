#include "bwe/audio_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <stdexcept>

namespace bwe::audio {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

double decode_sample(const std::uint8_t* p, const FormatChunk& fmt) {
  if (fmt.format == kFormatFloat) {
    if (fmt.bits == 32) {
      std::uint32_t raw = read_u32(p);
      return static_cast<double>(std::bit_cast<float>(raw));
    }
    std::uint64_t raw = static_cast<std::uint64_t>(read_u32(p)) |
                        (static_cast<std::uint64_t>(read_u32(p + 4)) << 32);
    return std::bit_cast<double>(raw);
  }
  switch (fmt.bits) {
    case 8:
      return (static_cast<double>(p[0]) - 128.0) / 128.0;
    case 16:
      return static_cast<double>(static_cast<std::int16_t>(read_u16(p))) / 32768.0;
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v -= 0x1000000;
      return static_cast<double>(v) / 8388608.0;
    }
    default:
      return static_cast<double>(static_cast<std::int32_t>(read_u32(p))) / 2147483648.0;
  }
}

}  // namespace

const char* to_string(WavErrorCode code) {
  switch (code) {
    case WavErrorCode::kMissingFile: return "missing file";
    case WavErrorCode::kMalformedHeader: return "malformed header";
    case WavErrorCode::kUnsupportedCodec: return "unsupported codec";
    case WavErrorCode::kInvalidSamples: return "invalid samples";
    case WavErrorCode::kUnwritable: return "unwritable path";
  }
  return "unknown";
}

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw WavError(WavErrorCode::kMissingFile, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError(WavErrorCode::kMissingFile, path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw WavError(WavErrorCode::kMalformedHeader, path.string() + " is not RIFF/WAVE");
  }

  std::optional<FormatChunk> fmt;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    std::size_t size = read_u32(chunk + 4);
    std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) {
        throw WavError(WavErrorCode::kMalformedHeader, "truncated fmt chunk");
      }
      FormatChunk f;
      f.format = read_u16(bytes.data() + body);
      f.channels = read_u16(bytes.data() + body + 2);
      f.sample_rate = read_u32(bytes.data() + body + 4);
      f.block_align = read_u16(bytes.data() + body + 12);
      f.bits = read_u16(bytes.data() + body + 14);
      if (f.format == kFormatExtensible) {
        if (size < 40) throw WavError(WavErrorCode::kMalformedHeader, "short extensible fmt");
        // First two bytes of the sub-format GUID carry the actual format tag.
        f.format = read_u16(bytes.data() + body + 24);
      }
      fmt = f;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      // Tolerate writers that leave the data size field larger than the file.
      data_size = std::min(size, bytes.size() - body);
    }
    pos = body + size + (size & 1u);
  }

  if (!fmt) throw WavError(WavErrorCode::kMalformedHeader, "missing fmt chunk");
  if (data == nullptr) throw WavError(WavErrorCode::kMalformedHeader, "missing data chunk");
  if (fmt->sample_rate == 0) throw WavError(WavErrorCode::kMalformedHeader, "zero sample rate");

  const bool pcm_ok = fmt->format == kFormatPcm &&
                      (fmt->bits == 8 || fmt->bits == 16 || fmt->bits == 24 || fmt->bits == 32);
  const bool float_ok = fmt->format == kFormatFloat && (fmt->bits == 32 || fmt->bits == 64);
  if (!pcm_ok && !float_ok) {
    throw WavError(WavErrorCode::kUnsupportedCodec,
                   "format " + std::to_string(fmt->format) + " with " +
                       std::to_string(fmt->bits) + " bits");
  }
  if (fmt->channels < 1 || fmt->channels > 2) {
    throw WavError(WavErrorCode::kUnsupportedCodec,
                   std::to_string(fmt->channels) + " channels");
  }
  const std::size_t sample_bytes = fmt->bits / 8;
  const std::size_t frame_bytes = sample_bytes * fmt->channels;
  if (fmt->block_align != frame_bytes) {
    throw WavError(WavErrorCode::kMalformedHeader, "block alignment mismatch");
  }

  AudioBuffer buf;
  buf.sample_rate = fmt->sample_rate;
  const std::size_t frames = data_size / frame_bytes;
  buf.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::uint8_t* frame = data + i * frame_bytes;
    double acc = 0.0;
    for (std::size_t c = 0; c < fmt->channels; ++c) {
      acc += decode_sample(frame + c * sample_bytes, *fmt);
    }
    double v = acc / fmt->channels;
    if (!std::isfinite(v)) {
      throw WavError(WavErrorCode::kInvalidSamples, "non-finite sample at frame " + std::to_string(i));
    }
    buf.samples[i] = std::clamp(v, -1.0, 1.0);
  }
  return buf;
}

void write_wav(const AudioBuffer& buf, const std::filesystem::path& path, int bits) {
  if (bits != 16) throw std::invalid_argument("write_wav supports 16-bit PCM only");
  if (!(buf.sample_rate > 0.0)) throw std::invalid_argument("write_wav: sample rate must be positive");

  const auto rate = static_cast<std::uint32_t>(std::llround(buf.sample_rate));
  const auto data_bytes = static_cast<std::uint32_t>(buf.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : buf.samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("write_wav: non-finite sample");
    put_u16(out, static_cast<std::uint16_t>(pcm16_code(s)));
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw WavError(WavErrorCode::kUnwritable, path.string());
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw WavError(WavErrorCode::kUnwritable, path.string());
}

std::int16_t pcm16_code(double sample) {
  return static_cast<std::int16_t>(std::clamp(std::nearbyint(sample * 32768.0), -32768.0, 32767.0));
}

AudioBuffer quantize_pcm16(const AudioBuffer& buf) {
  AudioBuffer out = buf;
  for (double& s : out.samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("quantize_pcm16: non-finite sample");
    s = static_cast<double>(pcm16_code(s)) / 32768.0;
  }
  return out;
}

AudioBuffer peak_normalize(const AudioBuffer& buf, double target) {
  if (buf.empty()) throw std::invalid_argument("peak_normalize: empty buffer");
  if (!(target > 0.0 && target <= 1.0)) {
    throw std::invalid_argument("peak_normalize: target must lie in (0, 1]");
  }
  double peak = 0.0;
  for (double s : buf.samples) peak = std::max(peak, std::abs(s));
  if (peak == 0.0) return buf;
  AudioBuffer out = buf;
  const double gain = target / peak;
  for (double& s : out.samples) s *= gain;
  return out;
}

}  // namespace bwe::audio
