#include "manifest.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "qkm/error.hpp"
#include "qkm/kernels.hpp"

namespace qkm::cli {

std::string fnv1a_file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
      hash *= 0x100000001b3ULL;
    }
  }
  std::array<char, 17> hex{};
  std::snprintf(hex.data(), hex.size(), "%016llx", static_cast<unsigned long long>(hash));
  return hex.data();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::array<char, 32> buf{};
  std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf.data();
}

nlohmann::json to_json(const RunManifest& manifest) {
  nlohmann::json params = manifest.params;
  params["version"] = kVersion;
  params["kernel_isa"] = std::string(simd::isa_name(simd::active_isa()));
  return {{"command", manifest.command},
          {"params", params},
          {"timestamp", manifest.timestamp},
          {"input_digest", manifest.input_digest}};
}

}  // namespace qkm::cli
