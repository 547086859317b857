#include <doctest.h>

#include "oracles.hpp"
#include "resmpc/errors.hpp"
#include "resmpc/qp.hpp"

using namespace resmpc;

namespace {

QpData RandomQpData(std::mt19937_64& rng, int nx, int nu, int horizon) {
  QpData qp;
  qp.nx = nx;
  qp.nu = nu;
  qp.horizon = horizon;
  for (int k = 0; k < horizon; ++k) {
    Eigen::MatrixXd a(nx, nx), b(nx, nu);
    for (int i = 0; i < nx; ++i) {
      a.row(i) = 0.3 * oracles::RandomVector(rng, nx).transpose();
      a(i, i) += 1.0;
    }
    for (int i = 0; i < nx; ++i) b.row(i) = oracles::RandomVector(rng, nu).transpose();
    qp.a.push_back(a);
    qp.b.push_back(b);
    qp.phi_res.push_back(0.1 * oracles::RandomVector(rng, nx));
    qp.q.push_back(oracles::RandomVector(rng, nx));
    qp.r.push_back(oracles::RandomVector(rng, nu));
    qp.hx_diag.push_back(oracles::RandomVector(rng, nx, 0.5, 2.0));
    qp.hu_diag.push_back(oracles::RandomVector(rng, nu, 0.5, 2.0));
    qp.du_lb.push_back(Eigen::VectorXd::Constant(nu, -1.0));
    qp.du_ub.push_back(Eigen::VectorXd::Constant(nu, 1.0));
  }
  qp.q.push_back(oracles::RandomVector(rng, nx));
  qp.hx_diag.push_back(oracles::RandomVector(rng, nx, 0.5, 2.0));
  return qp;
}

// Full sparse objective evaluated by rolling the dynamics forward.
double FullObjective(const QpData& qp, const Eigen::VectorXd& dx0, const Eigen::VectorXd& du) {
  double obj = 0.0;
  Eigen::VectorXd dx = dx0;
  for (int k = 0; k <= qp.horizon; ++k) {
    obj += qp.q[k].dot(dx) + 0.5 * dx.dot(qp.hx_diag[k].cwiseProduct(dx));
    if (k < qp.horizon) {
      const Eigen::VectorXd duk = du.segment(k * qp.nu, qp.nu);
      obj += qp.r[k].dot(duk) + 0.5 * duk.dot(qp.hu_diag[k].cwiseProduct(duk));
      dx = qp.a[k] * dx + qp.b[k] * duk + qp.phi_res[k];
    }
  }
  return obj;
}

}  // namespace

TEST_CASE("condensing: recovery maps satisfy the continuity equalities") {
  auto rng = oracles::Rng(1);
  const QpData qp = RandomQpData(rng, 3, 2, 6);
  const Eigen::VectorXd dx0 = oracles::RandomVector(rng, 3);
  const CondensedQp c = Condense(qp, dx0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd du = oracles::RandomVector(rng, 6 * 2);
    Eigen::VectorXd dx = dx0;
    for (int k = 0; k < qp.horizon; ++k) {
      const Eigen::VectorXd recovered = c.recover_m[k] * du + c.recover_c[k];
      CHECK((recovered - dx).lpNorm<Eigen::Infinity>() < 1e-10);
      dx = qp.a[k] * dx + qp.b[k] * du.segment(k * 2, 2) + qp.phi_res[k];
    }
    CHECK((c.recover_m[qp.horizon] * du + c.recover_c[qp.horizon] - dx)
              .lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("condensed objective equals the full sparse objective") {
  auto rng = oracles::Rng(2);
  const QpData qp = RandomQpData(rng, 4, 2, 5);
  const Eigen::VectorXd dx0 = oracles::RandomVector(rng, 4);
  const CondensedQp c = Condense(qp, dx0);
  // constant offset of the condensed form (value at du = 0)
  const double c0 = FullObjective(qp, dx0, Eigen::VectorXd::Zero(10));
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd du = oracles::RandomVector(rng, 10);
    const double condensed = 0.5 * du.dot(c.hessian * du) + c.gradient.dot(du) + c0;
    const double full = FullObjective(qp, dx0, du);
    CHECK(std::abs(condensed - full) < 1e-9 * (1.0 + std::abs(full)));
  }
}

TEST_CASE("N=1 condensing matches the hand-eliminated two-variable form") {
  auto rng = oracles::Rng(3);
  QpData qp = RandomQpData(rng, 2, 1, 1);
  const Eigen::VectorXd dx0 = Eigen::Vector2d(0.3, -0.1);
  const CondensedQp c = Condense(qp, dx0);
  // by hand: dx1 = A dx0 + B du + r; H = Bᵀ Hx1 B + Hu; g = Bᵀ(q1 + Hx1 (A dx0 + r)) + r0
  const Eigen::MatrixXd b = qp.b[0];
  const Eigen::VectorXd roll = qp.a[0] * dx0 + qp.phi_res[0];
  const Eigen::MatrixXd h_expected =
      b.transpose() * qp.hx_diag[1].asDiagonal() * b +
      Eigen::MatrixXd(qp.hu_diag[0].asDiagonal());
  const Eigen::VectorXd g_expected =
      b.transpose() * (qp.q[1] + qp.hx_diag[1].cwiseProduct(roll)) + qp.r[0];
  CHECK((c.hessian - h_expected).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((c.gradient - g_expected).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("identity-A zero-B: gradient has no dynamics coupling") {
  auto rng = oracles::Rng(4);
  QpData qp = RandomQpData(rng, 2, 1, 3);
  for (int k = 0; k < 3; ++k) {
    qp.a[k].setIdentity();
    qp.b[k].setZero();
    qp.phi_res[k].setZero();
  }
  const CondensedQp c = Condense(qp, Eigen::Vector2d::Zero());
  // states are unreachable from du, so only the input cost remains
  for (int k = 0; k < 3; ++k) {
    CHECK((c.gradient.segment(k, 1) - qp.r[k]).norm() == 0.0);
    CHECK(c.hessian(k, k) == doctest::Approx(qp.hu_diag[k][0]));
  }
}

TEST_CASE("general constraint rows are rejected, not dropped") {
  auto rng = oracles::Rng(5);
  QpData qp = RandomQpData(rng, 2, 1, 2);
  qp.gx.push_back(Eigen::MatrixXd::Ones(1, 2));
  CHECK_THROWS_AS(qp.Validate(), UnsupportedError);
}

TEST_CASE("unconstrained box qp solves the normal equations") {
  auto rng = oracles::Rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 5;
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) m.row(i) = oracles::RandomVector(rng, n).transpose();
    CondensedQp qp;
    qp.hessian = m * m.transpose() + Eigen::MatrixXd::Identity(n, n);
    qp.gradient = oracles::RandomVector(rng, n);
    qp.lb = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
    qp.ub = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    const BoxQpResult r = SolveBoxQp(qp);
    CHECK(r.status == QpStatus::kOptimal);
    const Eigen::VectorXd expected = -qp.hessian.ldlt().solve(qp.gradient);
    CHECK((r.x - expected).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("1-D binding upper bound gives the closed-form multiplier") {
  CondensedQp qp;
  qp.hessian = Eigen::MatrixXd::Constant(1, 1, 2.0);
  qp.gradient = Eigen::VectorXd::Constant(1, -10.0);  // unconstrained minimum at 5
  qp.lb = Eigen::VectorXd::Constant(1, -1.0);
  qp.ub = Eigen::VectorXd::Constant(1, 1.0);
  const BoxQpResult r = SolveBoxQp(qp);
  CHECK(r.status == QpStatus::kOptimal);
  CHECK(r.x[0] == 1.0);  // exactly at the bound
  CHECK(r.lam_ub[0] == doctest::Approx(-(2.0 * 1.0 - 10.0)));
  CHECK(r.lam_lb[0] == 0.0);
}

TEST_CASE("random box qps match exhaustive enumeration and satisfy KKT") {
  auto rng = oracles::Rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(oracles::RandomVector(rng, 1, 0, 6.99)[0]);
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) m.row(i) = oracles::RandomVector(rng, n).transpose();
    CondensedQp qp;
    qp.hessian = m * m.transpose() + 0.3 * Eigen::MatrixXd::Identity(n, n);
    qp.gradient = 2.0 * oracles::RandomVector(rng, n);
    qp.lb.resize(n);
    qp.ub.resize(n);
    for (int i = 0; i < n; ++i) {
      const double a = oracles::RandomVector(rng, 1)[0];
      const double b = oracles::RandomVector(rng, 1)[0];
      qp.lb[i] = std::min(a, b);
      qp.ub[i] = std::max(a, b) + 0.05;
    }
    Eigen::VectorXd expected;
    REQUIRE(oracles::BruteForceBoxQp(qp.hessian, qp.gradient, qp.lb, qp.ub, &expected));
    const BoxQpResult r = SolveBoxQp(qp);
    CHECK(r.status == QpStatus::kOptimal);
    CHECK((r.x - expected).lpNorm<Eigen::Infinity>() < 1e-9);
    // KKT: stationarity with the returned multipliers, complementarity, feasibility
    const Eigen::VectorXd stat = qp.hessian * r.x + qp.gradient - r.lam_lb + r.lam_ub;
    CHECK(stat.lpNorm<Eigen::Infinity>() < 1e-8);
    for (int i = 0; i < n; ++i) {
      CHECK(r.x[i] >= qp.lb[i]);
      CHECK(r.x[i] <= qp.ub[i]);
      CHECK(std::abs(r.lam_lb[i] * (r.x[i] - qp.lb[i])) < 1e-8);
      CHECK(std::abs(r.lam_ub[i] * (r.x[i] - qp.ub[i])) < 1e-8);
      CHECK(r.lam_lb[i] >= 0.0);
      CHECK(r.lam_ub[i] >= 0.0);
    }
  }
}

TEST_CASE("warm starts and identical inputs give identical active-set paths") {
  auto rng = oracles::Rng(8);
  const int n = 6;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) m.row(i) = oracles::RandomVector(rng, n).transpose();
  CondensedQp qp;
  qp.hessian = m * m.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
  qp.gradient = 3.0 * oracles::RandomVector(rng, n);
  qp.lb = Eigen::VectorXd::Constant(n, -0.4);
  qp.ub = Eigen::VectorXd::Constant(n, 0.4);
  const BoxQpResult r1 = SolveBoxQp(qp);
  const BoxQpResult r2 = SolveBoxQp(qp);
  CHECK(r1.iterations == r2.iterations);
  CHECK((r1.x - r2.x).norm() == 0.0);
  // warm starting from the solution's active set converges immediately
  const BoxQpResult r3 = SolveBoxQp(qp, &r1.active);
  CHECK(r3.iterations <= 2);
  CHECK((r3.x - r1.x).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("crossed bounds are rejected") {
  CondensedQp qp;
  qp.hessian = Eigen::MatrixXd::Identity(2, 2);
  qp.gradient = Eigen::VectorXd::Zero(2);
  qp.lb = Eigen::VectorXd::Constant(2, 1.0);
  qp.ub = Eigen::VectorXd::Constant(2, -1.0);
  CHECK_THROWS_AS(SolveBoxQp(qp), ConfigError);
}
