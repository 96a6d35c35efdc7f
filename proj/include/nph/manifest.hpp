#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nph {

inline constexpr const char* kToolVersion = "0.1.0";

/// One manifest per command run: what ran, on what, with which parameters.
/// Timestamps live here and only here, so primary outputs stay bitwise
/// reproducible.
struct RunManifest {
  std::string command;
  std::string config_hash;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;
  std::string tool_version = kToolVersion;
  std::vector<std::uint64_t> rng_seeds;
};

void save_manifest(const RunManifest& manifest, const std::filesystem::path& path);

}  // namespace nph
