#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "resmpc/heightmap.hpp"

namespace resmpc {

inline constexpr int kQuadNx = 13;
inline constexpr int kQuadNu = 4;
inline constexpr double kGravity = 9.81;  // m/s², g_W = (0, 0, -kGravity)

// State layout within the 13-vector: p (0..2), q (3..6, scalar first),
// v world frame (7..9), ω body frame (10..12).
inline constexpr int kQuatRow = 3;
inline constexpr int kVelRow = 7;
inline constexpr int kOmegaRow = 10;

struct QuadState {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector4d q = {1.0, 0.0, 0.0, 0.0};
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d w = Eigen::Vector3d::Zero();

  static QuadState FromVector(const Eigen::VectorXd& x);
  Eigen::VectorXd ToVector() const;
  void Renormalize() { q /= q.norm(); }
};

struct RotorThrusts {
  Eigen::Vector4d t = Eigen::Vector4d::Zero();  // newtons, one per rotor
};

// Rotor layout is an X configuration in a body frame with x forward, y left,
// z up; d = l_arm/√2:
//   rotor 0 front-right (+d, -d)   rotor 1 rear-left  (-d, +d)
//   rotor 2 front-left  (+d, +d)   rotor 3 rear-right (-d, -d)
// rotor_sign[i] is the sign of the yaw torque per unit thrust (diagonal
// pairs spin together: default +1, +1, -1, -1).
struct QuadParams {
  double mass = 0.75;                                    // kg
  Eigen::Vector3d inertia = {2.5e-3, 2.5e-3, 4.3e-3};    // kg·m², diagonal
  double arm_length = 0.14;                              // m
  double torque_coeff = 0.016;                           // m, τ_z = sign·κ·T
  double thrust_max = 6.0;                               // N per rotor
  Eigen::Vector4d rotor_sign = {1.0, 1.0, -1.0, -1.0};

  void Validate() const;
  double HoverThrustPerRotor() const { return mass * kGravity / 4.0; }
};

struct DoubleIntegratorState {
  double p = 0.0;
  double p_dot = 0.0;
};

// [T_B; τ_B] as a linear map of the four rotor thrusts.
Eigen::Matrix<double, 6, 4> MixingMatrix(const QuadParams& params);
std::pair<Eigen::Vector3d, Eigen::Vector3d> MixThrustTorque(const Eigen::Vector4d& u,
                                                            const QuadParams& params);

// Rigid-body quadrotor derivative; throws InputDomainError when |‖q‖−1| is
// beyond 1e-3 (loose enough for finite-difference probes).
Eigen::VectorXd QuadNominalDynamics(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                    const QuadParams& params);

Eigen::Vector2d DoubleIntegratorDynamics(const Eigen::Vector2d& x, double u);

enum class ResidualVariant { kA, kAU, kFull, kGround };

ResidualVariant ParseResidualVariant(const std::string& tag);
std::string ResidualVariantTag(ResidualVariant v);
int ResidualInputDim(ResidualVariant v);
int ResidualOutputDim(ResidualVariant v);

// Feature vector fed to the residual network. Layouts (frozen; recorded in
// trained model files):
//   a      : v_B (3)
//   a_u    : v_B (3), u (4)
//   full   : x (13), u (4)
//   ground : x (13), u (4), z_WB·1 − patch (9, row-major)
// `ground_patch` is required for kGround and ignored otherwise.
Eigen::VectorXd ResidualInput(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                              ResidualVariant variant,
                              const Eigen::Matrix3d* ground_patch = nullptr);

// Jacobian of ResidualInput wrt (x, u), size dim(variant) x 17. The ground
// patch is treated as a frozen exogenous parameter, so its rows only carry
// the altitude dependence ∂(z_WB·1)/∂p_z = 1.
Eigen::MatrixXd ResidualInputJacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                      ResidualVariant variant);

// Rows of the state derivative the network output lands in.
std::vector<int> ResidualOutputRows(ResidualVariant v);

// Places the network output into a 13-vector (v̇ rows; ω̇ rows too for kFull),
// zero elsewhere.
Eigen::VectorXd ResidualOutputEmbed(const Eigen::VectorXd& net_out, ResidualVariant variant);

// f = f_F + f_D, with a dimension check.
Eigen::VectorXd CombinedDynamics(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>& nominal,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>& residual,
    const Eigen::VectorXd& x, const Eigen::VectorXd& u);

}  // namespace resmpc
