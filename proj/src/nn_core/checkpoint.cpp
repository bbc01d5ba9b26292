#include "bwe/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "bwe/errors.hpp"

namespace bwe::nn {
namespace {

constexpr char kMagic[8] = {'B', 'W', 'E', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put_le(std::vector<char>& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const char* p) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

const NamedArray& Checkpoint::at(const std::string& name) const {
  const NamedArray* a = find(name);
  if (!a) throw DataError("checkpoint has no array named '" + name + "'");
  return *a;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["metadata"] = ckpt.metadata;
  header["arrays"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& a : ckpt.arrays) {
    if (shape_numel(a.shape) != a.values.size()) {
      throw std::invalid_argument("save_checkpoint: array '" + a.name + "' shape does not match its values");
    }
    header["arrays"].push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}, {"count", a.values.size()}});
    offset += a.values.size() * sizeof(double);
  }
  const std::string text = header.dump();

  std::vector<char> out(kMagic, kMagic + 8);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, 0);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  while (out.size() % 8 != 0) out.push_back('\0');
  out.reserve(out.size() + offset);
  for (const auto& a : ckpt.arrays) {
    for (Real v : a.values) put_le<double>(out, static_cast<double>(v));
  }

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw DataError(path.string() + " is not a checkpoint file");
  }
  const auto version = get_le<std::uint32_t>(bytes.data() + 8);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint64_t>(bytes.data() + 16);
  if (24 + header_len > bytes.size()) throw DataError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 24, bytes.begin() + 24 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  }
  std::uint64_t payload = 24 + header_len;
  payload = (payload + 7) / 8 * 8;

  Checkpoint ckpt;
  ckpt.metadata = header.value("metadata", nlohmann::json::object());
  for (const auto& entry : header.at("arrays")) {
    NamedArray a;
    a.name = entry.at("name").get<std::string>();
    a.shape = entry.at("shape").get<Shape>();
    const auto off = entry.at("offset").get<std::uint64_t>();
    const auto count = entry.at("count").get<std::uint64_t>();
    if (shape_numel(a.shape) != count || payload + off + count * 8 > bytes.size()) {
      throw DataError("checkpoint array '" + a.name + "' is inconsistent with the file");
    }
    a.values.resize(count);
    const char* p = bytes.data() + payload + off;
    for (std::size_t i = 0; i < count; ++i) a.values[i] = get_le<double>(p + 8 * i);
    ckpt.arrays.push_back(std::move(a));
  }
  return ckpt;
}

}  // namespace bwe::nn
