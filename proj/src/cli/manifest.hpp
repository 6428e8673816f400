#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

namespace qkm::cli {

/// Provenance block embedded in every output file. Two runs with equal
/// manifests (timestamp aside) produce identical payloads.
struct RunManifest {
  std::string command;
  nlohmann::json params = nlohmann::json::object();
  std::string timestamp;
  std::string input_digest;  // FNV-1a 64 of the input file bytes, hex
};

std::string fnv1a_file_digest(const std::filesystem::path& path);
std::string utc_timestamp();
nlohmann::json to_json(const RunManifest& manifest);

inline constexpr const char* kVersion = "1.0.0";

}  // namespace qkm::cli
