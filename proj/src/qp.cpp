#include "resmpc/qp.hpp"

#include <algorithm>
#include <cmath>

#include "resmpc/errors.hpp"

namespace resmpc {

void QpData::Validate() const {
  if (horizon < 1 || nx < 1 || nu < 1) throw ConfigError("qp data: bad dimensions");
  const size_t n = static_cast<size_t>(horizon);
  if (a.size() != n || b.size() != n || phi_res.size() != n || q.size() != n + 1 ||
      r.size() != n || hx_diag.size() != n + 1 || hu_diag.size() != n || du_lb.size() != n ||
      du_ub.size() != n)
    throw ConfigError("qp data: inconsistent block counts");
  for (size_t k = 0; k < n; ++k) {
    if (a[k].rows() != nx || a[k].cols() != nx || b[k].rows() != nx || b[k].cols() != nu)
      throw ConfigError("qp data: continuity block shape mismatch at node " + std::to_string(k));
    if ((du_lb[k].array() > du_ub[k].array()).any())
      throw ConfigError("qp data: crossed input bounds at node " + std::to_string(k));
  }
  if (!gx.empty() || !gu.empty() || !g_bar.empty()) {
    for (const auto& m : gx)
      if (m.size() != 0)
        throw UnsupportedError(
            "qp data: general constraint rows are represented but not solvable here; only "
            "input bounds are supported");
  }
}

CondensedQp Condense(const QpData& qp, const Eigen::VectorXd& dx0) {
  qp.Validate();
  if (dx0.size() != qp.nx) throw ConfigError("condense: dx0 has wrong dimension");
  const int n = qp.horizon;
  const int nv = n * qp.nu;

  CondensedQp c;
  c.nu = qp.nu;
  c.recover_m.assign(n + 1, Eigen::MatrixXd::Zero(qp.nx, nv));
  c.recover_c.assign(n + 1, Eigen::VectorXd::Zero(qp.nx));
  c.recover_c[0] = dx0;
  for (int k = 0; k < n; ++k) {
    c.recover_m[k + 1] = qp.a[k] * c.recover_m[k];
    c.recover_m[k + 1].middleCols(k * qp.nu, qp.nu) += qp.b[k];
    c.recover_c[k + 1] = qp.a[k] * c.recover_c[k] + qp.phi_res[k];
  }

  c.hessian = Eigen::MatrixXd::Zero(nv, nv);
  c.gradient = Eigen::VectorXd::Zero(nv);
  for (int k = 0; k <= n; ++k) {
    const auto& m = c.recover_m[k];
    const Eigen::MatrixXd hm = qp.hx_diag[k].asDiagonal() * m;
    c.hessian.noalias() += m.transpose() * hm;
    c.gradient.noalias() +=
        m.transpose() * (qp.q[k] + qp.hx_diag[k].cwiseProduct(c.recover_c[k]));
  }
  c.lb.resize(nv);
  c.ub.resize(nv);
  for (int k = 0; k < n; ++k) {
    c.hessian.diagonal().segment(k * qp.nu, qp.nu) += qp.hu_diag[k];
    c.gradient.segment(k * qp.nu, qp.nu) += qp.r[k];
    c.lb.segment(k * qp.nu, qp.nu) = qp.du_lb[k];
    c.ub.segment(k * qp.nu, qp.nu) = qp.du_ub[k];
  }
  // keep the Hessian exactly symmetric against accumulation drift
  c.hessian = 0.5 * (c.hessian + c.hessian.transpose()).eval();
  return c;
}

namespace {

// Solves the equality-restricted subproblem for the free variables; bound
// variables are held at their working-set values.
Eigen::VectorXd SolveFreeSubproblem(const Eigen::MatrixXd& h, const Eigen::VectorXd& g,
                                    const Eigen::VectorXd& x,
                                    const std::vector<std::int8_t>& active,
                                    const std::vector<int>& free_idx, bool* regularized) {
  const int nf = static_cast<int>(free_idx.size());
  Eigen::MatrixXd hff(nf, nf);
  Eigen::VectorXd rhs(nf);
  for (int i = 0; i < nf; ++i) {
    rhs[i] = -g[free_idx[i]];
    for (int j = 0; j < nf; ++j) hff(i, j) = h(free_idx[i], free_idx[j]);
  }
  for (int i = 0; i < nf; ++i) {
    double dot = 0.0;
    for (int j = 0; j < h.cols(); ++j)
      if (active[j] != 0) dot += h(free_idx[i], j) * x[j];
    rhs[i] -= dot;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(hff);
  if (llt.info() != Eigen::Success) {
    const double bump = 1e-9 * std::max(1.0, hff.trace() / std::max(1, nf));
    hff.diagonal().array() += bump;
    llt.compute(hff);
    if (regularized != nullptr) *regularized = true;
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("box qp: Hessian not positive definite even after regularization");
  }
  return llt.solve(rhs);
}

}  // namespace

BoxQpResult SolveBoxQp(const CondensedQp& qp, const std::vector<std::int8_t>* warm_start,
                       int max_iterations) {
  const int n = static_cast<int>(qp.gradient.size());
  if ((qp.lb.array() > qp.ub.array()).any())
    throw ConfigError("box qp: crossed bounds");

  BoxQpResult res;
  res.active.assign(n, 0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (warm_start != nullptr && static_cast<int>(warm_start->size()) == n)
    res.active = *warm_start;
  for (int i = 0; i < n; ++i) {
    if (res.active[i] < 0 && !std::isfinite(qp.lb[i])) res.active[i] = 0;
    if (res.active[i] > 0 && !std::isfinite(qp.ub[i])) res.active[i] = 0;
    if (res.active[i] < 0) x[i] = qp.lb[i];
    if (res.active[i] > 0) x[i] = qp.ub[i];
    if (res.active[i] == 0) x[i] = std::clamp(0.0, qp.lb[i], qp.ub[i]);
  }

  constexpr double kTol = 1e-11;
  for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
    std::vector<int> free_idx;
    for (int i = 0; i < n; ++i)
      if (res.active[i] == 0) free_idx.push_back(i);

    bool at_subproblem_optimum = true;
    if (!free_idx.empty()) {
      const Eigen::VectorXd xf =
          SolveFreeSubproblem(qp.hessian, qp.gradient, x, res.active, free_idx, &res.regularized);
      // ratio test toward the subproblem solution
      double alpha = 1.0;
      int blocking = -1;
      std::int8_t blocking_side = 0;
      for (size_t i = 0; i < free_idx.size(); ++i) {
        const int idx = free_idx[i];
        const double step = xf[static_cast<int>(i)] - x[idx];
        if (step > kTol && std::isfinite(qp.ub[idx])) {
          const double a = (qp.ub[idx] - x[idx]) / step;
          if (a < alpha - kTol) {
            alpha = a;
            blocking = idx;
            blocking_side = 1;
          }
        } else if (step < -kTol && std::isfinite(qp.lb[idx])) {
          const double a = (qp.lb[idx] - x[idx]) / step;
          if (a < alpha - kTol) {
            alpha = a;
            blocking = idx;
            blocking_side = -1;
          }
        }
      }
      for (size_t i = 0; i < free_idx.size(); ++i) {
        const int idx = free_idx[i];
        x[idx] += alpha * (xf[static_cast<int>(i)] - x[idx]);
      }
      if (blocking >= 0) {
        res.active[blocking] = blocking_side;
        x[blocking] = blocking_side > 0 ? qp.ub[blocking] : qp.lb[blocking];
        at_subproblem_optimum = false;
      }
    }

    if (at_subproblem_optimum) {
      // multipliers for the working set; release the worst violator
      const Eigen::VectorXd grad = qp.hessian * x + qp.gradient;
      int worst = -1;
      double worst_val = -1e-10;
      for (int i = 0; i < n; ++i) {
        if (res.active[i] == 0) continue;
        const double lam = res.active[i] < 0 ? grad[i] : -grad[i];
        if (lam < worst_val) {
          worst_val = lam;
          worst = i;
        }
      }
      if (worst < 0) {
        res.lam_lb = Eigen::VectorXd::Zero(n);
        res.lam_ub = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) {
          if (res.active[i] < 0) res.lam_lb[i] = std::max(0.0, grad[i]);
          if (res.active[i] > 0) res.lam_ub[i] = std::max(0.0, -grad[i]);
        }
        res.x = x;
        res.status = QpStatus::kOptimal;
        ++res.iterations;
        return res;
      }
      res.active[worst] = 0;
    }
  }

  const Eigen::VectorXd grad = qp.hessian * x + qp.gradient;
  res.lam_lb = Eigen::VectorXd::Zero(n);
  res.lam_ub = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (res.active[i] < 0) res.lam_lb[i] = std::max(0.0, grad[i]);
    if (res.active[i] > 0) res.lam_ub[i] = std::max(0.0, -grad[i]);
  }
  res.x = x;
  res.status = QpStatus::kMaxIter;
  return res;
}

}  // namespace resmpc
