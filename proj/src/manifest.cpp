#include "nph/manifest.hpp"

#include "nph/errors.hpp"

#include "json.hpp"

#include <fstream>

namespace nph {

void save_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["config_hash"] = manifest.config_hash;
  j["inputs"] = manifest.inputs;
  j["outputs"] = manifest.outputs;
  j["wall_seconds"] = manifest.wall_seconds;
  j["tool_version"] = manifest.tool_version;
  j["rng_seeds"] = manifest.rng_seeds;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace nph
