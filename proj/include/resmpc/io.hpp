#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

namespace resmpc {

inline constexpr const char* kToolkitVersion = "0.1.0";

// FNV-1a 64-bit content digest, hex encoded. Not cryptographic; identifies
// outputs in run manifests.
std::string Fnv1a64File(const std::string& path);

// Every CLI run writes exactly one manifest next to its outputs: the
// subcommand, the fully resolved configuration, the seed, and a digest per
// output file. A run is reproducible from its manifest alone.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string version = kToolkitVersion;
  std::map<std::string, std::string> output_digests;

  void AddOutput(const std::string& path) { output_digests[path] = Fnv1a64File(path); }
  void Write(const std::string& path) const;
};

}  // namespace resmpc
