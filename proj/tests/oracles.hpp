// Independent reference implementations the test suites check against. Each
// oracle deliberately avoids the code path it verifies.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "resmpc/neural.hpp"

namespace oracles {

using VecFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Central finite differences, one column per perturbed input.
inline Eigen::MatrixXd FdJacobian(const VecFn& f, const Eigen::VectorXd& x, double h = 1e-5) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (int j = 0; j < x.size(); ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

inline double RelError(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).lpNorm<Eigen::Infinity>() / (1.0 + b.lpNorm<Eigen::Infinity>());
}

// Rotation matrix from axis-angle via Rodrigues' formula; used to check the
// quaternion rotation helpers without touching them.
inline Eigen::Matrix3d RodriguesRotation(const Eigen::Vector3d& axis, double angle) {
  const Eigen::Vector3d n = axis.normalized();
  Eigen::Matrix3d k;
  k << 0, -n.z(), n.y(), n.z(), 0, -n.x(), -n.y(), n.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

// Torque from explicitly listed rotor positions and drag signs; independent
// of the mixing-matrix assembly under test.
inline Eigen::Vector3d TorqueFromGeometry(const Eigen::Vector4d& thrusts, double arm_length,
                                          double kappa, const Eigen::Vector4d& spin_sign) {
  const double d = arm_length / std::sqrt(2.0);
  const Eigen::Vector3d pos[4] = {{d, -d, 0}, {-d, d, 0}, {d, d, 0}, {-d, -d, 0}};
  Eigen::Vector3d tau = Eigen::Vector3d::Zero();
  for (int i = 0; i < 4; ++i) {
    tau += pos[i].cross(Eigen::Vector3d(0, 0, thrusts[i]));
    tau.z() += spin_sign[i] * kappa * thrusts[i];
  }
  return tau;
}

// Straightforward column-major Eigen forward pass; duplicates the network
// math without the batched kernels.
inline Eigen::VectorXd NaiveMlpForward(const resmpc::MlpModel& m, const Eigen::VectorXd& z) {
  Eigen::VectorXd x = (z - m.in_mean).cwiseQuotient(m.in_scale);
  for (size_t l = 0; l < m.weights.size(); ++l) {
    const Eigen::MatrixXd w = m.weights[l];  // convert away from row-major storage
    x = (w * x + m.biases[l]).eval();
    if (l + 1 < m.weights.size()) {
      if (m.activation == resmpc::Activation::kTanh) {
        x = x.array().tanh();
      } else {
        x = x.cwiseMax(0.0);
      }
    }
  }
  return m.out_scale.cwiseProduct(x) + m.out_mean;
}

// Finite-horizon discrete Riccati recursion for cost Σ xᵀQx + uᵀRu with
// terminal weight Qf. Returns the time-zero feedback gain of u = -K x.
inline Eigen::MatrixXd RiccatiGain(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                   const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                                   const Eigen::MatrixXd& qf, int horizon) {
  Eigen::MatrixXd p = qf;
  Eigen::MatrixXd k;
  for (int i = 0; i < horizon; ++i) {
    k = (r + b.transpose() * p * b).ldlt().solve(b.transpose() * p * a);
    p = q + a.transpose() * p * (a - b * k);
  }
  return k;
}

// Exhaustive working-set enumeration for box QPs: tries every
// lower/free/upper assignment and returns the unique KKT point.
inline bool BruteForceBoxQp(const Eigen::MatrixXd& h, const Eigen::VectorXd& g,
                            const Eigen::VectorXd& lb, const Eigen::VectorXd& ub,
                            Eigen::VectorXd* solution) {
  const int n = static_cast<int>(g.size());
  long patterns = 1;
  for (int i = 0; i < n; ++i) patterns *= 3;
  double best_obj = std::numeric_limits<double>::infinity();
  bool found = false;
  for (long p = 0; p < patterns; ++p) {
    long code = p;
    std::vector<int> state(n);  // 0 free, 1 lower, 2 upper
    for (int i = 0; i < n; ++i) {
      state[i] = static_cast<int>(code % 3);
      code /= 3;
    }
    Eigen::VectorXd x(n);
    std::vector<int> free_idx;
    for (int i = 0; i < n; ++i) {
      if (state[i] == 1) {
        x[i] = lb[i];
      } else if (state[i] == 2) {
        x[i] = ub[i];
      } else {
        free_idx.push_back(i);
      }
    }
    const int nf = static_cast<int>(free_idx.size());
    if (nf > 0) {
      Eigen::MatrixXd hff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (int i = 0; i < nf; ++i) {
        rhs[i] = -g[free_idx[i]];
        for (int j = 0; j < nf; ++j) hff(i, j) = h(free_idx[i], free_idx[j]);
        for (int j = 0; j < n; ++j)
          if (state[j] != 0) rhs[i] -= h(free_idx[i], j) * x[j];
      }
      const Eigen::VectorXd xf = hff.ldlt().solve(rhs);
      for (int i = 0; i < nf; ++i) x[free_idx[i]] = xf[i];
    }
    // primal feasibility
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) ok = x[i] >= lb[i] - 1e-10 && x[i] <= ub[i] + 1e-10;
    if (!ok) continue;
    // dual feasibility
    const Eigen::VectorXd grad = h * x + g;
    for (int i = 0; i < n && ok; ++i) {
      if (state[i] == 0) ok = std::abs(grad[i]) < 1e-8;
      if (state[i] == 1) ok = grad[i] >= -1e-10;
      if (state[i] == 2) ok = grad[i] <= 1e-10;
    }
    if (!ok) continue;
    const double obj = 0.5 * x.dot(h * x) + g.dot(x);
    if (obj < best_obj) {
      best_obj = obj;
      *solution = x;
      found = true;
    }
  }
  return found;
}

// Degree-4 truncated matrix exponential: the exact RK4 discretization of a
// linear time-invariant system.
inline Eigen::MatrixXd Rk4LtiStateMatrix(const Eigen::MatrixXd& f, double dt) {
  const int n = static_cast<int>(f.rows());
  const Eigen::MatrixXd fdt = f * dt;
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= 4; ++k) {
    term = (term * fdt / k).eval();
    a += term;
  }
  return a;
}

inline std::mt19937_64 Rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline Eigen::VectorXd RandomVector(std::mt19937_64& rng, int n, double lo = -1.0,
                                    double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

inline resmpc::MlpModel RandomNet(std::mt19937_64& rng, const std::vector<int>& sizes,
                                  resmpc::Activation act = resmpc::Activation::kTanh,
                                  bool random_normalization = true) {
  resmpc::MlpModel m = resmpc::MakeMlp(sizes, act, "full", rng());
  if (random_normalization) {
    std::uniform_real_distribution<double> mean_d(-0.5, 0.5), scale_d(0.5, 2.0);
    for (int i = 0; i < m.in_mean.size(); ++i) {
      m.in_mean[i] = mean_d(rng);
      m.in_scale[i] = scale_d(rng);
    }
    for (int i = 0; i < m.out_mean.size(); ++i) {
      m.out_mean[i] = mean_d(rng);
      m.out_scale[i] = scale_d(rng);
    }
  }
  return m;
}

}  // namespace oracles
