#include "resmpc/io.hpp"

#include <cstdio>
#include <fstream>

#include "resmpc/errors.hpp"

namespace resmpc {

std::string Fnv1a64File(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("digest: cannot open '" + path + "'");
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
  return hex;
}

void RunManifest::Write(const std::string& path) const {
  nlohmann::json j{{"command", command},
                   {"config", config},
                   {"seed", seed},
                   {"version", version},
                   {"outputs", output_digests}};
  std::ofstream out(path);
  if (!out) throw ConfigError("manifest: cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace resmpc
