#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace resmpc {

// Blockwise linearization of the horizon: continuity pairs (A_k, B_k) with
// residuals phi_res_k = φ̄_k − x_{k+1}, diagonal Gauss-Newton cost blocks, and
// per-node input bounds expressed on the step Δu. General polyhedral rows
// (gx, gu, g_bar) can be carried but the condensing solver rejects them.
struct QpData {
  int nx = 0, nu = 0, horizon = 0;
  std::vector<Eigen::MatrixXd> a;         // N of nx x nx
  std::vector<Eigen::MatrixXd> b;         // N of nx x nu
  std::vector<Eigen::VectorXd> phi_res;   // N of nx
  std::vector<Eigen::VectorXd> q;         // N+1 cost gradients wrt Δx
  std::vector<Eigen::VectorXd> r;         // N cost gradients wrt Δu
  std::vector<Eigen::VectorXd> hx_diag;   // N+1 diagonal Hessian blocks (Δx)
  std::vector<Eigen::VectorXd> hu_diag;   // N diagonal Hessian blocks (Δu)
  std::vector<Eigen::VectorXd> du_lb;     // N bounds on Δu
  std::vector<Eigen::VectorXd> du_ub;
  std::vector<Eigen::MatrixXd> gx, gu;    // optional general rows (out of scope)
  std::vector<Eigen::VectorXd> g_bar;

  void Validate() const;
};

// Dense QP in the stacked input step after eliminating the states through
// the continuity equalities. Recovery: Δx_k = recover_m[k]·Δu + recover_c[k].
struct CondensedQp {
  Eigen::MatrixXd hessian;   // Nm x Nm, symmetric
  Eigen::VectorXd gradient;  // Nm
  Eigen::VectorXd lb, ub;    // Nm
  std::vector<Eigen::MatrixXd> recover_m;  // N+1 of nx x Nm
  std::vector<Eigen::VectorXd> recover_c;  // N+1 of nx
  int nu = 0;
};

CondensedQp Condense(const QpData& qp, const Eigen::VectorXd& dx0);

enum class QpStatus { kOptimal, kMaxIter };

struct BoxQpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd lam_lb, lam_ub;  // nonnegative bound multipliers
  QpStatus status = QpStatus::kOptimal;
  int iterations = 0;
  bool regularized = false;        // Cholesky needed a diagonal bump
  std::vector<std::int8_t> active;  // -1 lower, 0 free, +1 upper (warm-start hint)
};

// Primal active-set method for min ½xᵀHx + gᵀx s.t. lb ≤ x ≤ ub. Pivoting is
// deterministic (lowest index wins ties). `warm_start` seeds the working set.
BoxQpResult SolveBoxQp(const CondensedQp& qp,
                       const std::vector<std::int8_t>* warm_start = nullptr,
                       int max_iterations = 200);

}  // namespace resmpc
