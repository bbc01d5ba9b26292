#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bwe/nn/tensor.hpp"

namespace bwe::nn {

// Checkpoint file layout (all integers and reals little-endian):
//
//   bytes  0..7    magic "BWECKPT\0"
//   bytes  8..11   uint32 format version (currently 1)
//   bytes 12..15   uint32 reserved, zero
//   bytes 16..23   uint64 header length H
//   bytes 24..     H bytes of UTF-8 JSON:
//                    { "format_version": 1,
//                      "metadata": { ... free-form ... },
//                      "arrays": [ { "name", "shape", "offset", "count" }, ... ] }
//   then zero padding to an 8-byte boundary, then the payload: every array's
//   values as float64, at `offset` bytes from the payload start.

constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<Real> values;
};

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
  const NamedArray& at(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bwe::nn
