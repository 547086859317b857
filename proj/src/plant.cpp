#include "resmpc/plant.hpp"

#include "resmpc/errors.hpp"

namespace resmpc {

Plant MakeDoubleIntegratorPlant() {
  Plant p;
  p.name = "double_integrator";
  p.nx = 2;
  p.nu = 1;
  p.f = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return DoubleIntegratorDynamics(x.head<2>(), u[0]);
  };
  p.df = [](const Eigen::VectorXd&, const Eigen::VectorXd&, Eigen::MatrixXd& fx,
            Eigen::MatrixXd& fu) { DoubleIntegratorJacobians(fx, fu); };
  p.steady_input = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(1); };
  p.variant_tag = "full";
  p.feature_dim = 3;
  p.residual_dim = 2;
  p.features = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                  const Eigen::VectorXd&) -> Eigen::VectorXd {
    Eigen::VectorXd z(3);
    z << x[0], x[1], u[0];
    return z;
  };
  p.features_jac = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Identity(3, 3).eval();
  };
  p.embed = Eigen::MatrixXd::Identity(2, 2);
  return p;
}

Plant MakeQuadrotorPlant(const QuadParams& params, ResidualVariant variant,
                         std::shared_ptr<const HeightMap> height_map) {
  params.Validate();
  if (variant == ResidualVariant::kGround && height_map == nullptr)
    throw ConfigError("quadrotor plant: ground variant needs a height map");
  if (height_map != nullptr) height_map->Validate();

  Plant p;
  p.name = "quadrotor";
  p.nx = kQuadNx;
  p.nu = kQuadNu;
  p.quat_row = kQuatRow;
  p.f = [params](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    return QuadNominalDynamics(x, u, params);
  };
  p.df = [params](const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::MatrixXd& fx,
                  Eigen::MatrixXd& fu) { QuadNominalJacobians(x, u, params, fx, fu); };
  p.steady_input = [params](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Constant(kQuadNu, params.HoverThrustPerRotor());
  };

  p.variant_tag = ResidualVariantTag(variant);
  p.feature_dim = ResidualInputDim(variant);
  p.residual_dim = ResidualOutputDim(variant);
  if (variant == ResidualVariant::kGround) {
    p.residual_aux = [height_map](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      const Eigen::Matrix3d patch = HeightmapLocalPatch(*height_map, x.head<3>());
      return Eigen::Map<const Eigen::VectorXd>(patch.transpose().data(), 9);  // row-major
    };
    p.features = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& aux) -> Eigen::VectorXd {
      if (aux.size() != 9)
        throw InputDomainError("quadrotor plant: ground features need a 9-entry patch aux");
      Eigen::VectorXd z(26);
      z.head(kQuadNx) = x;
      z.segment(kQuadNx, kQuadNu) = u;
      z.tail(9) = Eigen::VectorXd::Constant(9, x[2]) - aux;
      return z;
    };
  } else {
    p.features = [variant](const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           const Eigen::VectorXd&) {
      return ResidualInput(x, u, variant);
    };
  }
  p.features_jac = [variant](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    return ResidualInputJacobian(x, u, variant);
  };

  const auto rows = ResidualOutputRows(variant);
  p.embed = Eigen::MatrixXd::Zero(kQuadNx, p.residual_dim);
  for (size_t i = 0; i < rows.size(); ++i) p.embed(rows[i], static_cast<int>(i)) = 1.0;
  return p;
}

}  // namespace resmpc
