#pragma once

#include <Eigen/Dense>
#include <string>

namespace resmpc {

// Regular grid of terrain heights in the world frame. Cell (i, j) covers
// x ∈ [origin_x + i·res, origin_x + (i+1)·res), same for y; z(i, j) is the
// terrain height of that cell in meters.
struct HeightMap {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double resolution = 0.1;
  Eigen::MatrixXd z;  // rows index x, cols index y

  void Validate() const;

  // CSV layout: one header line "origin_x,origin_y,resolution,rows,cols",
  // one line with those five values, then `rows` lines of `cols` heights.
  static HeightMap LoadCsv(const std::string& path);
  void SaveCsv(const std::string& path) const;
};

// 3x3 patch of cells centered on the cell containing p; indices outside the
// map are clamped to the nearest edge cell.
Eigen::Matrix3d HeightmapLocalPatch(const HeightMap& map, const Eigen::Vector3d& p_wb);

// Ground-effect feature block: z_WB·1 − patch, flattened row-major to 9.
Eigen::VectorXd GroundEffectFeatures(double z_wb, const Eigen::Matrix3d& patch);

}  // namespace resmpc
