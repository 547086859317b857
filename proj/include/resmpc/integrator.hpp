#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "resmpc/dynamics.hpp"

namespace resmpc {

using DynFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
// Fills fx (n x n) and fu (n x m) at (x, u).
using DynJacFn = std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                    Eigen::MatrixXd&, Eigen::MatrixXd&)>;

// Dynamics-function call tally, merged per controller cycle.
struct FevalCounter {
  std::uint64_t values = 0;
  std::uint64_t jacobians = 0;
};

// Classical RK4 with exactly 4 evaluations of f. When quat_row >= 0 the
// quaternion block starting there is renormalized in the returned state.
Eigen::VectorXd Rk4Step(const DynFn& f, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                        double dt, int quat_row = -1, FevalCounter* counter = nullptr);

struct SensitivityResult {
  Eigen::VectorXd phi_bar;  // next-state prediction (quaternion renormalized)
  Eigen::MatrixXd a;        // ∂φ/∂x of the raw (un-renormalized) map
  Eigen::MatrixXd b;        // ∂φ/∂u of the raw map
};

// First-order sensitivities chained through the 4 RK4 stages. The terminal
// quaternion renormalization is applied to phi_bar only, not differentiated.
SensitivityResult Rk4Sensitivities(const DynFn& f, const DynJacFn& df, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u, double dt, int quat_row = -1,
                                   FevalCounter* counter = nullptr);

// Closed-form Jacobians of the nominal quadrotor derivative wrt (x, u).
void QuadNominalJacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                          const QuadParams& params, Eigen::MatrixXd& fx, Eigen::MatrixXd& fu);

void DoubleIntegratorJacobians(Eigen::MatrixXd& fx, Eigen::MatrixXd& fu);

}  // namespace resmpc
