#include "resmpc/dynamics.hpp"

#include <cmath>

#include "resmpc/errors.hpp"
#include "resmpc/quat.hpp"

namespace resmpc {

QuadState QuadState::FromVector(const Eigen::VectorXd& x) {
  if (x.size() != kQuadNx) throw InputDomainError("quad state must have 13 entries");
  QuadState s;
  s.p = x.segment<3>(0);
  s.q = x.segment<4>(kQuatRow);
  s.v = x.segment<3>(kVelRow);
  s.w = x.segment<3>(kOmegaRow);
  return s;
}

Eigen::VectorXd QuadState::ToVector() const {
  Eigen::VectorXd x(kQuadNx);
  x.segment<3>(0) = p;
  x.segment<4>(kQuatRow) = q;
  x.segment<3>(kVelRow) = v;
  x.segment<3>(kOmegaRow) = w;
  return x;
}

void QuadParams::Validate() const {
  if (!(mass > 0.0) || !(arm_length > 0.0) || !(torque_coeff > 0.0) || !(thrust_max > 0.0))
    throw ConfigError("quad params: mass, arm_length, torque_coeff, thrust_max must be positive");
  if (!(inertia.minCoeff() > 0.0)) throw ConfigError("quad params: inertia must be positive");
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (rotor_sign[i] != 1.0 && rotor_sign[i] != -1.0)
      throw ConfigError("quad params: rotor_sign entries must be +1 or -1");
    sum += rotor_sign[i];
  }
  if (sum != 0.0) throw ConfigError("quad params: need two rotors of each spin direction");
}

Eigen::Matrix<double, 6, 4> MixingMatrix(const QuadParams& params) {
  const double d = params.arm_length / std::sqrt(2.0);
  // Rotor positions (x_i, y_i) per the layout documented on QuadParams.
  const double rx[4] = {d, -d, d, -d};
  const double ry[4] = {-d, d, d, -d};
  Eigen::Matrix<double, 6, 4> m = Eigen::Matrix<double, 6, 4>::Zero();
  for (int i = 0; i < 4; ++i) {
    m(2, i) = 1.0;                                   // collective thrust, z only
    m(3, i) = ry[i];                                 // roll torque τ_x = Σ y_i T_i
    m(4, i) = -rx[i];                                // pitch torque τ_y = -Σ x_i T_i
    m(5, i) = params.rotor_sign[i] * params.torque_coeff;  // yaw drag torque
  }
  return m;
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> MixThrustTorque(const Eigen::Vector4d& u,
                                                            const QuadParams& params) {
  const Eigen::Matrix<double, 6, 4> m = MixingMatrix(params);
  const Eigen::Matrix<double, 6, 1> wrench = m * u;
  return {wrench.head<3>(), wrench.tail<3>()};
}

Eigen::VectorXd QuadNominalDynamics(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                    const QuadParams& params) {
  if (x.size() != kQuadNx || u.size() != kQuadNu)
    throw InputDomainError("quad dynamics: bad state/input size");
  const Eigen::Vector4d q = x.segment<4>(kQuatRow);
  // Loose enough for RK4 interior stages (‖q + dt·q̇‖ drifts by up to ~0.12
  // at ω = 20 rad/s, dt = 0.05 s) while still catching unnormalized inputs.
  if (std::abs(q.norm() - 1.0) > 0.25)
    throw InputDomainError("quad dynamics: quaternion norm too far from unit");
  const Eigen::Vector3d v = x.segment<3>(kVelRow);
  const Eigen::Vector3d w = x.segment<3>(kOmegaRow);

  const auto [t_b, tau_b] = MixThrustTorque(u, params);
  const Eigen::Vector3d g_w(0.0, 0.0, -kGravity);
  const Eigen::Vector3d j = params.inertia;

  Eigen::VectorXd dx(kQuadNx);
  dx.segment<3>(0) = v;
  dx.segment<4>(kQuatRow) = QuatKinematics(q, w);
  dx.segment<3>(kVelRow) = QuatRotate(q, t_b) / params.mass + g_w;
  const Eigen::Vector3d jw = j.cwiseProduct(w);
  dx.segment<3>(kOmegaRow) = (tau_b - w.cross(jw)).cwiseQuotient(j);
  return dx;
}

Eigen::Vector2d DoubleIntegratorDynamics(const Eigen::Vector2d& x, double u) {
  return {x[1], u};
}

ResidualVariant ParseResidualVariant(const std::string& tag) {
  if (tag == "a") return ResidualVariant::kA;
  if (tag == "a_u") return ResidualVariant::kAU;
  if (tag == "full") return ResidualVariant::kFull;
  if (tag == "ground") return ResidualVariant::kGround;
  throw ConfigError("unknown residual variant '" + tag + "' (expected a, a_u, full, ground)");
}

std::string ResidualVariantTag(ResidualVariant v) {
  switch (v) {
    case ResidualVariant::kA: return "a";
    case ResidualVariant::kAU: return "a_u";
    case ResidualVariant::kFull: return "full";
    case ResidualVariant::kGround: return "ground";
  }
  return "?";
}

int ResidualInputDim(ResidualVariant v) {
  switch (v) {
    case ResidualVariant::kA: return 3;
    case ResidualVariant::kAU: return 7;
    case ResidualVariant::kFull: return 17;
    case ResidualVariant::kGround: return 26;
  }
  return 0;
}

int ResidualOutputDim(ResidualVariant v) {
  return v == ResidualVariant::kFull ? 6 : 3;
}

Eigen::VectorXd ResidualInput(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                              ResidualVariant variant, const Eigen::Matrix3d* ground_patch) {
  const Eigen::Vector4d q = x.segment<4>(kQuatRow);
  const Eigen::Vector3d v_w = x.segment<3>(kVelRow);
  Eigen::VectorXd z(ResidualInputDim(variant));
  switch (variant) {
    case ResidualVariant::kA:
      z = QuatRotateInv(q, v_w);
      break;
    case ResidualVariant::kAU:
      z.head<3>() = QuatRotateInv(q, v_w);
      z.tail<4>() = u;
      break;
    case ResidualVariant::kFull:
      z.head(kQuadNx) = x;
      z.tail(kQuadNu) = u;
      break;
    case ResidualVariant::kGround: {
      if (ground_patch == nullptr)
        throw InputDomainError("residual input: ground variant needs a height-map patch");
      z.head(kQuadNx) = x;
      z.segment(kQuadNx, kQuadNu) = u;
      z.tail(9) = GroundEffectFeatures(x[2], *ground_patch);
      break;
    }
  }
  return z;
}

Eigen::MatrixXd ResidualInputJacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                      ResidualVariant variant) {
  (void)u;
  const int nf = ResidualInputDim(variant);
  Eigen::MatrixXd jz = Eigen::MatrixXd::Zero(nf, kQuadNx + kQuadNu);
  const Eigen::Vector4d q = x.segment<4>(kQuatRow);
  const Eigen::Vector3d v_w = x.segment<3>(kVelRow);
  switch (variant) {
    case ResidualVariant::kA:
      jz.block<3, 4>(0, kQuatRow) = QuatRotateInvJacQ(q, v_w);
      jz.block<3, 3>(0, kVelRow) = QuatToRot(q).transpose();
      break;
    case ResidualVariant::kAU:
      jz.block<3, 4>(0, kQuatRow) = QuatRotateInvJacQ(q, v_w);
      jz.block<3, 3>(0, kVelRow) = QuatToRot(q).transpose();
      jz.block<4, 4>(3, kQuadNx).setIdentity();
      break;
    case ResidualVariant::kFull:
      jz.setIdentity();
      break;
    case ResidualVariant::kGround:
      jz.topLeftCorner(kQuadNx + kQuadNu, kQuadNx + kQuadNu).setIdentity();
      jz.block(kQuadNx + kQuadNu, 2, 9, 1).setOnes();  // ∂(z_WB·1 − patch)/∂p_z
      break;
  }
  return jz;
}

std::vector<int> ResidualOutputRows(ResidualVariant v) {
  std::vector<int> rows = {kVelRow, kVelRow + 1, kVelRow + 2};
  if (v == ResidualVariant::kFull) {
    rows.push_back(kOmegaRow);
    rows.push_back(kOmegaRow + 1);
    rows.push_back(kOmegaRow + 2);
  }
  return rows;
}

Eigen::VectorXd ResidualOutputEmbed(const Eigen::VectorXd& net_out, ResidualVariant variant) {
  const auto rows = ResidualOutputRows(variant);
  if (net_out.size() != static_cast<int>(rows.size()))
    throw ConfigError("residual embed: output size " + std::to_string(net_out.size()) +
                      " does not match variant '" + ResidualVariantTag(variant) + "'");
  Eigen::VectorXd dx = Eigen::VectorXd::Zero(kQuadNx);
  for (size_t i = 0; i < rows.size(); ++i) dx[rows[i]] = net_out[static_cast<int>(i)];
  return dx;
}

Eigen::VectorXd CombinedDynamics(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>& nominal,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>& residual,
    const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  Eigen::VectorXd f = nominal(x, u);
  const Eigen::VectorXd r = residual(x, u);
  if (r.size() != f.size()) throw InputDomainError("combined dynamics: dimension mismatch");
  f += r;
  return f;
}

}  // namespace resmpc
