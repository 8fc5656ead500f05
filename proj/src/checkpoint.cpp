#include "ctssl/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace ctssl {
namespace {

constexpr std::array<char, 8> kMagic{'C', 'T', 'S', 'S', 'L', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (!in) throw ContractError("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

bool header_matches(const NetConfig& stored, const NetConfig& net) {
  return stored.depth == net.depth && stored.base_channels == net.base_channels &&
         stored.kernel_size == net.kernel_size &&
         stored.skip_connections == net.skip_connections &&
         static_cast<float>(stored.leaky_slope) == static_cast<float>(net.leaky_slope);
}

void write_checkpoint(std::ostream& out, const NetConfig& net, const ParamVector& params) {
  require(params.size() == param_count(net), "checkpoint: parameter count does not match config");
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.depth));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.base_channels));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.kernel_size));
  put_le<std::uint32_t>(out, net.skip_connections ? 1u : 0u);
  put_le<float>(out, static_cast<float>(net.leaky_slope));
  put_le<std::uint64_t>(out, params.size());
  for (double v : params) put_le<float>(out, static_cast<float>(v));
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ContractError("checkpoint: bad magic");
  if (get_le<std::uint32_t>(in) != kVersion) throw ContractError("checkpoint: unsupported version");
  Checkpoint ck;
  ck.net.depth = static_cast<int>(get_le<std::uint32_t>(in));
  ck.net.base_channels = static_cast<int>(get_le<std::uint32_t>(in));
  ck.net.kernel_size = static_cast<int>(get_le<std::uint32_t>(in));
  ck.net.skip_connections = get_le<std::uint32_t>(in) != 0;
  ck.net.leaky_slope = static_cast<double>(get_le<float>(in));
  const auto n = get_le<std::uint64_t>(in);
  if (n != param_count(ck.net)) throw ContractError("checkpoint: parameter count does not match header");
  ck.params.resize(n);
  for (auto& v : ck.params) v = static_cast<double>(get_le<float>(in));
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const NetConfig& net,
                     const ParamVector& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  write_checkpoint(out, net, params);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace ctssl
