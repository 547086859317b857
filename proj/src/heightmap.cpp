#include "resmpc/heightmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "resmpc/errors.hpp"

namespace resmpc {

void HeightMap::Validate() const {
  if (z.rows() == 0 || z.cols() == 0) throw ConfigError("height map: empty grid");
  if (!(resolution > 0.0)) throw ConfigError("height map: resolution must be positive");
  if (!z.allFinite()) throw ConfigError("height map: non-finite heights");
}

HeightMap HeightMap::LoadCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("height map: cannot open '" + path + "'");
  std::string header, meta;
  std::getline(in, header);
  std::getline(in, meta);
  std::replace(meta.begin(), meta.end(), ',', ' ');
  std::istringstream ms(meta);
  HeightMap map;
  long rows = 0, cols = 0;
  if (!(ms >> map.origin_x >> map.origin_y >> map.resolution >> rows >> cols))
    throw ConfigError("height map: bad metadata line in '" + path + "'");
  if (rows <= 0 || cols <= 0) throw ConfigError("height map: empty grid in '" + path + "'");
  map.z.resize(rows, cols);
  for (long i = 0; i < rows; ++i) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("height map: truncated grid in '" + path + "'");
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    for (long j = 0; j < cols; ++j) {
      if (!(ls >> map.z(i, j))) throw ConfigError("height map: short row in '" + path + "'");
    }
  }
  map.Validate();
  return map;
}

void HeightMap::SaveCsv(const std::string& path) const {
  Validate();
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (f == nullptr) throw ConfigError("height map: cannot write '" + path + "'");
  std::fprintf(f, "origin_x,origin_y,resolution,rows,cols\n");
  std::fprintf(f, "%.17g,%.17g,%.17g,%ld,%ld\n", origin_x, origin_y, resolution,
               static_cast<long>(z.rows()), static_cast<long>(z.cols()));
  for (long i = 0; i < z.rows(); ++i) {
    for (long j = 0; j < z.cols(); ++j)
      std::fprintf(f, "%.17g%c", z(i, j), j + 1 == z.cols() ? '\n' : ',');
  }
  std::fclose(f);
}

Eigen::Matrix3d HeightmapLocalPatch(const HeightMap& map, const Eigen::Vector3d& p_wb) {
  map.Validate();
  const long ci = static_cast<long>(std::floor((p_wb.x() - map.origin_x) / map.resolution));
  const long cj = static_cast<long>(std::floor((p_wb.y() - map.origin_y) / map.resolution));
  Eigen::Matrix3d patch;
  for (int di = -1; di <= 1; ++di) {
    for (int dj = -1; dj <= 1; ++dj) {
      const long i = std::clamp(ci + di, 0L, static_cast<long>(map.z.rows()) - 1);
      const long j = std::clamp(cj + dj, 0L, static_cast<long>(map.z.cols()) - 1);
      patch(di + 1, dj + 1) = map.z(i, j);
    }
  }
  return patch;
}

Eigen::VectorXd GroundEffectFeatures(double z_wb, const Eigen::Matrix3d& patch) {
  Eigen::VectorXd f(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) f[i * 3 + j] = z_wb - patch(i, j);
  return f;
}

}  // namespace resmpc
