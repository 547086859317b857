#pragma once


#include <cmath>
#include <Eigen/Dense>

namespace resmpc {

// Quaternions are scalar-first (w, x, y, z) and use the Hamilton product.
// Rotation formulas assume unit norm but are applied verbatim to whatever
// quaternion is passed in, so they stay smooth under small perturbations.

inline Eigen::Vector4d QuatIdentity() { return {1.0, 0.0, 0.0, 0.0}; }

inline Eigen::Vector4d QuatConjugate(const Eigen::Vector4d& q) {
  return {q[0], -q[1], -q[2], -q[3]};
}

inline Eigen::Vector4d QuatNormalized(const Eigen::Vector4d& q) { return q / q.norm(); }

inline Eigen::Vector4d QuatMul(const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
  return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
          a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
          a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
          a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

inline Eigen::Matrix3d SkewSym(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0;
  return s;
}

inline Eigen::Matrix3d QuatToRot(const Eigen::Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d r;
  r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
       2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
       2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
  return r;
}

// q ⊙ v (rotate v from body to world for q = q_WB).
inline Eigen::Vector3d QuatRotate(const Eigen::Vector4d& q, const Eigen::Vector3d& v) {
  return QuatToRot(q) * v;
}

inline Eigen::Vector3d QuatRotateInv(const Eigen::Vector4d& q, const Eigen::Vector3d& v) {
  return QuatToRot(q).transpose() * v;
}

// dR/dq_j as four 3x3 matrices stacked by component (w, x, y, z).
inline void QuatRotDerivatives(const Eigen::Vector4d& q, Eigen::Matrix3d out[4]) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  out[0] << 0, -2 * z, 2 * y,
            2 * z, 0, -2 * x,
            -2 * y, 2 * x, 0;
  out[1] << 0, 2 * y, 2 * z,
            2 * y, -4 * x, -2 * w,
            2 * z, 2 * w, -4 * x;
  out[2] << -4 * y, 2 * x, 2 * w,
            2 * x, 0, 2 * z,
            -2 * w, 2 * z, -4 * y;
  out[3] << -4 * z, -2 * w, 2 * x,
            2 * w, -4 * z, 2 * y,
            2 * x, 2 * y, 0;
}

// d(q ⊙ v)/dq, 3x4.
inline Eigen::Matrix<double, 3, 4> QuatRotateJacQ(const Eigen::Vector4d& q,
                                                  const Eigen::Vector3d& v) {
  Eigen::Matrix3d dr[4];
  QuatRotDerivatives(q, dr);
  Eigen::Matrix<double, 3, 4> j;
  for (int i = 0; i < 4; ++i) j.col(i) = dr[i] * v;
  return j;
}

// d(q⁻¹ ⊙ v)/dq, 3x4.
inline Eigen::Matrix<double, 3, 4> QuatRotateInvJacQ(const Eigen::Vector4d& q,
                                                     const Eigen::Vector3d& v) {
  Eigen::Matrix3d dr[4];
  QuatRotDerivatives(q, dr);
  Eigen::Matrix<double, 3, 4> j;
  for (int i = 0; i < 4; ++i) j.col(i) = dr[i].transpose() * v;
  return j;
}

// Shepperd's method; returns a unit quaternion with nonnegative scalar part.
inline Eigen::Vector4d RotToQuat(const Eigen::Matrix3d& r) {
  Eigen::Vector4d q;
  const double tr = r.trace();
  if (tr > 0.0) {
    const double s = std::sqrt(tr + 1.0) * 2.0;
    q << 0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    const double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q << (r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    const double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q << (r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s;
  } else {
    const double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q << (r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s;
  }
  if (q[0] < 0.0) q = -q;
  return q / q.norm();
}

// q̇ = ½ q ⊗ (0, ω).
inline Eigen::Vector4d QuatKinematics(const Eigen::Vector4d& q, const Eigen::Vector3d& w) {
  return 0.5 * QuatMul(q, {0.0, w[0], w[1], w[2]});
}

// ∂q̇/∂q for fixed ω.
inline Eigen::Matrix4d QuatKinematicsJacQ(const Eigen::Vector3d& w) {
  Eigen::Matrix4d j;
  j << 0, -w[0], -w[1], -w[2],
       w[0], 0, w[2], -w[1],
       w[1], -w[2], 0, w[0],
       w[2], w[1], -w[0], 0;
  return 0.5 * j;
}

// ∂q̇/∂ω for fixed q.
inline Eigen::Matrix<double, 4, 3> QuatKinematicsJacOmega(const Eigen::Vector4d& q) {
  Eigen::Matrix<double, 4, 3> j;
  j << -q[1], -q[2], -q[3],
       q[0], -q[3], q[2],
       q[3], q[0], -q[1],
       -q[2], q[1], q[0];
  return 0.5 * j;
}

}  // namespace resmpc
