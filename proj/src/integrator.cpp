#include "resmpc/integrator.hpp"

#include <cmath>
#include <stdexcept>

#include "resmpc/quat.hpp"

namespace resmpc {

namespace {

void CheckFinite(const Eigen::VectorXd& k, const char* stage) {
  if (!k.allFinite())
    throw std::runtime_error(std::string("rk4: non-finite derivative at stage ") + stage);
}

void RenormalizeQuat(Eigen::VectorXd& x, int quat_row) {
  if (quat_row < 0) return;
  x.segment<4>(quat_row).normalize();
}

}  // namespace

Eigen::VectorXd Rk4Step(const DynFn& f, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                        double dt, int quat_row, FevalCounter* counter) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4: dt must be positive");
  const Eigen::VectorXd k1 = f(x, u);
  CheckFinite(k1, "1");
  const Eigen::VectorXd k2 = f(x + 0.5 * dt * k1, u);
  CheckFinite(k2, "2");
  const Eigen::VectorXd k3 = f(x + 0.5 * dt * k2, u);
  CheckFinite(k3, "3");
  const Eigen::VectorXd k4 = f(x + dt * k3, u);
  CheckFinite(k4, "4");
  if (counter != nullptr) counter->values += 4;
  Eigen::VectorXd next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  RenormalizeQuat(next, quat_row);
  return next;
}

SensitivityResult Rk4Sensitivities(const DynFn& f, const DynJacFn& df, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u, double dt, int quat_row,
                                   FevalCounter* counter) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4: dt must be positive");
  const Eigen::Index nx = x.size();
  const Eigen::Index nu = u.size();
  Eigen::MatrixXd jx(nx, nx), ju(nx, nu);

  // stage 1
  const Eigen::VectorXd k1 = f(x, u);
  CheckFinite(k1, "1");
  df(x, u, jx, ju);
  const Eigen::MatrixXd dk1_dx = jx;
  const Eigen::MatrixXd dk1_du = ju;

  // stage 2
  const Eigen::VectorXd x2 = x + 0.5 * dt * k1;
  const Eigen::VectorXd k2 = f(x2, u);
  CheckFinite(k2, "2");
  df(x2, u, jx, ju);
  const Eigen::MatrixXd dk2_dx =
      jx * (Eigen::MatrixXd::Identity(nx, nx) + 0.5 * dt * dk1_dx);
  const Eigen::MatrixXd dk2_du = jx * (0.5 * dt * dk1_du) + ju;

  // stage 3
  const Eigen::VectorXd x3 = x + 0.5 * dt * k2;
  const Eigen::VectorXd k3 = f(x3, u);
  CheckFinite(k3, "3");
  df(x3, u, jx, ju);
  const Eigen::MatrixXd dk3_dx =
      jx * (Eigen::MatrixXd::Identity(nx, nx) + 0.5 * dt * dk2_dx);
  const Eigen::MatrixXd dk3_du = jx * (0.5 * dt * dk2_du) + ju;

  // stage 4
  const Eigen::VectorXd x4 = x + dt * k3;
  const Eigen::VectorXd k4 = f(x4, u);
  CheckFinite(k4, "4");
  df(x4, u, jx, ju);
  const Eigen::MatrixXd dk4_dx = jx * (Eigen::MatrixXd::Identity(nx, nx) + dt * dk3_dx);
  const Eigen::MatrixXd dk4_du = jx * (dt * dk3_du) + ju;

  if (counter != nullptr) {
    counter->values += 4;
    counter->jacobians += 4;
  }

  SensitivityResult res;
  res.phi_bar = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  RenormalizeQuat(res.phi_bar, quat_row);
  res.a = Eigen::MatrixXd::Identity(nx, nx) +
          (dt / 6.0) * (dk1_dx + 2.0 * dk2_dx + 2.0 * dk3_dx + dk4_dx);
  res.b = (dt / 6.0) * (dk1_du + 2.0 * dk2_du + 2.0 * dk3_du + dk4_du);
  return res;
}

void QuadNominalJacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                          const QuadParams& params, Eigen::MatrixXd& fx, Eigen::MatrixXd& fu) {
  const Eigen::Vector4d q = x.segment<4>(kQuatRow);
  const Eigen::Vector3d w = x.segment<3>(kOmegaRow);
  const Eigen::Matrix<double, 6, 4> mix = MixingMatrix(params);
  const Eigen::Vector3d t_b = mix.topRows<3>() * u;
  const Eigen::Vector3d j = params.inertia;

  fx = Eigen::MatrixXd::Zero(kQuadNx, kQuadNx);
  fu = Eigen::MatrixXd::Zero(kQuadNx, kQuadNu);

  // ṗ = v
  fx.block<3, 3>(0, kVelRow).setIdentity();

  // q̇ = ½ q ⊗ (0, ω)
  fx.block<4, 4>(kQuatRow, kQuatRow) = QuatKinematicsJacQ(w);
  fx.block<4, 3>(kQuatRow, kOmegaRow) = QuatKinematicsJacOmega(q);

  // v̇ = R(q)·T_B/m + g
  fx.block<3, 4>(kVelRow, kQuatRow) = QuatRotateJacQ(q, t_b) / params.mass;
  fu.block<3, 4>(kVelRow, 0) = QuatToRot(q) * mix.topRows<3>() / params.mass;

  // ω̇ = J⁻¹(τ − ω × Jω)
  const Eigen::Vector3d jw = j.cwiseProduct(w);
  const Eigen::Matrix3d dcross = SkewSym(w) * j.asDiagonal().toDenseMatrix() - SkewSym(jw);
  fx.block<3, 3>(kOmegaRow, kOmegaRow) = j.cwiseInverse().asDiagonal() * (-dcross);
  fu.block<3, 4>(kOmegaRow, 0) = j.cwiseInverse().asDiagonal() * mix.bottomRows<3>();
}

void DoubleIntegratorJacobians(Eigen::MatrixXd& fx, Eigen::MatrixXd& fu) {
  fx = Eigen::MatrixXd::Zero(2, 2);
  fx(0, 1) = 1.0;
  fu = Eigen::MatrixXd::Zero(2, 1);
  fu(1, 0) = 1.0;
}

}  // namespace resmpc
