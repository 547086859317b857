#include <doctest.h>

#include "oracles.hpp"
#include "resmpc/taylor.hpp"

using namespace resmpc;

TEST_CASE("prepared nodes equal unbatched calls and cost one batched call") {
  auto rng = oracles::Rng(1);
  const MlpModel m = oracles::RandomNet(rng, {4, 16, 3});
  const int n = 10;
  Eigen::MatrixXd z(n, 4);
  for (int k = 0; k < n; ++k) z.row(k) = oracles::RandomVector(rng, 4, -1, 1).transpose();

  EvalCounters counters;
  const auto approxes = PrepareNodes(m, z, 1, &counters);
  CHECK(counters.batched_calls == 1);
  CHECK(counters.batched_points == 10);
  CHECK(counters.value_evals == 0);
  CHECK(counters.jacobian_evals == 0);
  REQUIRE(approxes.size() == 10);
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd zk = z.row(k).transpose();
    CHECK(approxes[k].node == k);
    CHECK((approxes[k].f_bar - MlpForward(m, zk)).norm() == 0.0);
    CHECK((approxes[k].jac - MlpJacobian(m, zk)).norm() == 0.0);
  }
}

TEST_CASE("zero-output model prepares all-zero approximations") {
  auto rng = oracles::Rng(9);
  MlpModel m = oracles::RandomNet(rng, {3, 8, 2}, Activation::kTanh, false);
  m.weights.back().setZero();
  m.biases.back().setZero();
  Eigen::MatrixXd z = Eigen::MatrixXd::Random(5, 3);
  const auto approxes = PrepareNodes(m, z, 1, nullptr);
  for (const auto& a : approxes) {
    CHECK(a.f_bar.norm() == 0.0);
    CHECK(a.jac.norm() == 0.0);
  }
}

TEST_CASE("identical nodes produce identical approximations") {
  auto rng = oracles::Rng(2);
  const MlpModel m = oracles::RandomNet(rng, {3, 12, 2});
  Eigen::MatrixXd z(4, 3);
  const Eigen::VectorXd row = oracles::RandomVector(rng, 3);
  for (int k = 0; k < 4; ++k) z.row(k) = row.transpose();
  const auto approxes = PrepareNodes(m, z, 2, nullptr);
  for (int k = 1; k < 4; ++k) {
    CHECK((approxes[k].f_bar - approxes[0].f_bar).norm() == 0.0);
    CHECK((approxes[k].jac - approxes[0].jac).norm() == 0.0);
    for (size_t o = 0; o < approxes[k].hess.size(); ++o)
      CHECK((approxes[k].hess[o] - approxes[0].hess[o]).norm() == 0.0);
  }
}

TEST_CASE("expansion point evaluation returns f_bar exactly") {
  auto rng = oracles::Rng(3);
  const MlpModel m = oracles::RandomNet(rng, {4, 10, 2});
  Eigen::MatrixXd z(1, 4);
  z.row(0) = oracles::RandomVector(rng, 4).transpose();
  for (int order : {1, 2}) {
    const auto approxes = PrepareNodes(m, z, order, nullptr);
    CHECK((EvalTaylor(approxes[0], z.row(0).transpose()) - approxes[0].f_bar).norm() == 0.0);
    CHECK((EvalTaylorJacobian(approxes[0], z.row(0).transpose()) - approxes[0].jac).norm() ==
          0.0);
  }
}

TEST_CASE("taylor of a linear model equals the model everywhere") {
  MlpModel m = MakeMlp({3, 2}, Activation::kTanh, "full", 7);
  m.weights[0] << 1.0, 0.5, -2.0, 0.0, 1.5, 0.25;
  m.biases[0] << -0.5, 2.0;
  auto rng = oracles::Rng(4);
  Eigen::MatrixXd z0(1, 3);
  z0.row(0) = oracles::RandomVector(rng, 3).transpose();
  for (int order : {1, 2}) {
    const auto approxes = PrepareNodes(m, z0, order, nullptr);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd z = oracles::RandomVector(rng, 3, -4, 4);
      CHECK((EvalTaylor(approxes[0], z) - MlpForward(m, z)).lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }
}

TEST_CASE("order-2 jacobian of the expansion matches finite differences") {
  auto rng = oracles::Rng(5);
  const MlpModel m = oracles::RandomNet(rng, {3, 14, 2});
  Eigen::MatrixXd z0(1, 3);
  z0.row(0) = oracles::RandomVector(rng, 3).transpose();
  const auto approxes = PrepareNodes(m, z0, 2, nullptr);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd z = z0.row(0).transpose() + 0.3 * oracles::RandomVector(rng, 3);
    const Eigen::MatrixXd jac = EvalTaylorJacobian(approxes[0], z);
    const Eigen::MatrixXd fd = oracles::FdJacobian(
        [&](const Eigen::VectorXd& v) { return EvalTaylor(approxes[0], v); }, z, 1e-6);
    CHECK(oracles::RelError(jac, fd) < 1e-6);
  }
}

TEST_CASE("remainder shrinks at the expected order when the step halves") {
  // first order: remainder ~ δ² (ratio 4); second order: ~ δ³ (ratio 8)
  auto rng = oracles::Rng(6);
  std::vector<double> ratios1, ratios2;
  for (int trial = 0; trial < 40; ++trial) {
    const MlpModel m = oracles::RandomNet(rng, {3, 16, 16, 2});
    Eigen::MatrixXd z0(1, 3);
    z0.row(0) = oracles::RandomVector(rng, 3, -0.5, 0.5).transpose();
    const auto a1 = PrepareNodes(m, z0, 1, nullptr);
    const auto a2 = PrepareNodes(m, z0, 2, nullptr);
    const Eigen::VectorXd dir = oracles::RandomVector(rng, 3).normalized();
    const double delta = 0.02;
    auto remainder = [&](const TaylorApprox& a, double step) {
      const Eigen::VectorXd z = z0.row(0).transpose() + step * dir;
      return (EvalTaylor(a, z) - MlpForward(m, z)).lpNorm<Eigen::Infinity>();
    };
    const double r1_full = remainder(a1[0], delta);
    const double r1_half = remainder(a1[0], delta / 2.0);
    const double r2_full = remainder(a2[0], delta);
    const double r2_half = remainder(a2[0], delta / 2.0);
    if (r1_half > 1e-12) ratios1.push_back(r1_full / r1_half);
    if (r2_half > 1e-12) ratios2.push_back(r2_full / r2_half);
  }
  REQUIRE(ratios1.size() > 20);
  REQUIRE(ratios2.size() > 20);
  std::nth_element(ratios1.begin(), ratios1.begin() + ratios1.size() / 2, ratios1.end());
  std::nth_element(ratios2.begin(), ratios2.begin() + ratios2.size() / 2, ratios2.end());
  const double med1 = ratios1[ratios1.size() / 2];
  const double med2 = ratios2[ratios2.size() / 2];
  CHECK(med1 > 3.5);
  CHECK(med1 < 4.5);
  CHECK(med2 > 6.5);
  CHECK(med2 < 9.5);
}

TEST_CASE("validation catches malformed approximations") {
  TaylorApprox a;
  a.order = 2;
  a.z0 = Eigen::Vector3d::Zero();
  a.f_bar = Eigen::Vector2d::Zero();
  a.jac = Eigen::MatrixXd::Zero(2, 3);
  CHECK_THROWS(a.Validate());  // order 2 without hessians
  a.order = 1;
  CHECK_NOTHROW(a.Validate());
  a.jac = Eigen::MatrixXd::Zero(3, 3);
  CHECK_THROWS(a.Validate());
}

TEST_CASE("json debug dump mentions the node and order") {
  TaylorApprox a;
  a.node = 3;
  a.order = 1;
  a.z0 = Eigen::Vector2d(1, 2);
  a.f_bar = Eigen::VectorXd::Constant(1, 0.5);
  a.jac = Eigen::MatrixXd::Zero(1, 2);
  const std::string j = a.ToJson();
  CHECK(j.find("\"node\":3") != std::string::npos);
  CHECK(j.find("\"order\":1") != std::string::npos);
}
