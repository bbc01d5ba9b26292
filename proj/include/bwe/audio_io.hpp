#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bwe/errors.hpp"

namespace bwe::audio {

/// Mono waveform with amplitudes nominally in [-1, 1].
///
/// The sample rate is a positive real: narrowband variants for ratios that do
/// not divide the wideband rate (16000 / 3) have a fractional rate.
struct AudioBuffer {
  std::vector<double> samples;
  double sample_rate = 0.0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_seconds() const {
    return sample_rate > 0.0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

enum class WavErrorCode {
  kMissingFile,
  kMalformedHeader,
  kUnsupportedCodec,
  kInvalidSamples,
  kUnwritable,
};

const char* to_string(WavErrorCode code);

class WavError : public DataError {
 public:
  WavError(WavErrorCode code, const std::string& what)
      : DataError(std::string(to_string(code)) + ": " + what), code_(code) {}
  WavErrorCode code() const { return code_; }

 private:
  WavErrorCode code_;
};

/// Reads PCM (8/16/24/32-bit) or IEEE float (32/64-bit) RIFF/WAVE data with one
/// or two channels. Channels are averaged to mono; integer samples are scaled
/// by 1/2^(bits-1).
AudioBuffer read_wav(const std::filesystem::path& path);

/// Writes 16-bit little-endian mono PCM. The sample rate is rounded to the
/// nearest integer Hz.
void write_wav(const AudioBuffer& buf, const std::filesystem::path& path, int bits = 16);

/// Integer code written for one sample: round(x * 32768) clamped to int16.
std::int16_t pcm16_code(double sample);

/// The values a 16-bit write followed by a read would return.
AudioBuffer quantize_pcm16(const AudioBuffer& buf);

/// Scales so that max |sample| == target. All-zero input is returned unchanged.
AudioBuffer peak_normalize(const AudioBuffer& buf, double target);

}  // namespace bwe::audio
