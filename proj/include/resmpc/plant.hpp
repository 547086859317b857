#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>

#include "resmpc/dynamics.hpp"
#include "resmpc/integrator.hpp"

namespace resmpc {

// Everything the OCP layer needs to know about a controlled system: nominal
// dynamics with analytic Jacobians plus the residual-model wiring (feature
// map, its Jacobian, and the embedding of network outputs into state rows).
//
// `residual_aux` captures per-node exogenous context (the ground variant's
// height-map patch); it is frozen at the node's expansion point and passed
// back into `features` for evaluations inside the node.
struct Plant {
  std::string name;
  int nx = 0, nu = 0;
  DynFn f;
  DynJacFn df;
  int quat_row = -1;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> steady_input;  // from x_ref

  std::string variant_tag = "full";
  int feature_dim = 0;
  int residual_dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residual_aux;  // may be null
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                const Eigen::VectorXd&)>
      features;  // (x, u, aux) -> feature vector
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>
      features_jac;          // feature_dim x (nx + nu)
  Eigen::MatrixXd embed;     // nx x residual_dim

  Eigen::VectorXd NodeAux(const Eigen::VectorXd& x) const {
    return residual_aux ? residual_aux(x) : Eigen::VectorXd();
  }
};

// §-style benchmark system: state (p, ṗ), input p̈; the residual acts on the
// full 2-dim derivative and sees (x, u) as features.
Plant MakeDoubleIntegratorPlant();

// 13-state quadrotor with single-rotor-thrust inputs. The residual feature
// layout follows `variant`; kGround requires a height map.
Plant MakeQuadrotorPlant(const QuadParams& params, ResidualVariant variant,
                         std::shared_ptr<const HeightMap> height_map = nullptr);

}  // namespace resmpc
