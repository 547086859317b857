#include <doctest.h>

#include <cstdio>

#include "oracles.hpp"
#include "resmpc/errors.hpp"
#include "resmpc/neural.hpp"

using namespace resmpc;

TEST_CASE("single linear layer is exactly Wz + b") {
  MlpModel m = MakeMlp({3, 2}, Activation::kTanh, "full", 1);
  m.weights[0] << 1.0, -2.0, 0.5, 0.0, 3.0, 1.0;
  m.biases[0] << 0.25, -1.0;
  const Eigen::Vector3d z(0.3, -0.7, 2.0);
  const Eigen::VectorXd y = MlpForward(m, z);
  const Eigen::MatrixXd w = m.weights[0];
  CHECK((y - (w * z + m.biases[0])).norm() < 1e-15);
  CHECK((MlpJacobian(m, z) - w).norm() == 0.0);
}

TEST_CASE("all-zero weights force a zero output for any input") {
  MlpModel m = MakeMlp({4, 8, 8, 3}, Activation::kTanh, "full", 2);
  for (auto& w : m.weights) w.setZero();
  for (auto& b : m.biases) b.setZero();
  auto rng = oracles::Rng(5);
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd z = oracles::RandomVector(rng, 4, -3.0, 3.0);
    CHECK(MlpForward(m, z).norm() == 0.0);
    CHECK(MlpJacobian(m, z).norm() == 0.0);
  }
}

TEST_CASE("forward pass agrees with an independent reimplementation") {
  auto rng = oracles::Rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const MlpModel m = oracles::RandomNet(rng, {5, 16, 16, 3});
    const Eigen::VectorXd z = oracles::RandomVector(rng, 5, -2.0, 2.0);
    const Eigen::VectorXd got = MlpForward(m, z);
    const Eigen::VectorXd expected = oracles::NaiveMlpForward(m, z);
    CHECK((got - expected).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("jacobian matches central finite differences") {
  auto rng = oracles::Rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const MlpModel m = oracles::RandomNet(rng, {4, 12, 12, 2});
    const Eigen::VectorXd z = oracles::RandomVector(rng, 4, -1.5, 1.5);
    const Eigen::MatrixXd jac = MlpJacobian(m, z);
    const Eigen::MatrixXd fd = oracles::FdJacobian(
        [&m](const Eigen::VectorXd& v) { return MlpForward(m, v); }, z, 1e-5);
    worst = std::max(worst, oracles::RelError(jac, fd));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("relu jacobian matches finite differences away from kinks") {
  auto rng = oracles::Rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const MlpModel m = oracles::RandomNet(rng, {3, 10, 2}, Activation::kRelu);
    const Eigen::VectorXd z = oracles::RandomVector(rng, 3, -1.0, 1.0);
    const Eigen::MatrixXd fd = oracles::FdJacobian(
        [&m](const Eigen::VectorXd& v) { return MlpForward(m, v); }, z, 1e-7);
    CHECK(oracles::RelError(MlpJacobian(m, z), fd) < 1e-4);
  }
}

TEST_CASE("hessians: zero for linear nets, symmetric, and FD-consistent") {
  SUBCASE("linear layer has zero hessians") {
    MlpModel m = MakeMlp({3, 2}, Activation::kTanh, "full", 3);
    const auto h = MlpHessian(m, Eigen::Vector3d(1, 2, 3));
    for (const auto& hm : h) CHECK(hm.norm() == 0.0);
  }
  SUBCASE("scalar one-hidden-unit tanh net matches the closed form") {
    // y = w2 tanh(w1 z + b1) + b2; y'' = w2 w1² σ''(pre), σ'' = -2 t (1 - t²)
    MlpModel m = MakeMlp({1, 1, 1}, Activation::kTanh, "full", 4);
    const double w1 = 0.8, b1 = -0.3, w2 = 1.7;
    m.weights[0](0, 0) = w1;
    m.biases[0][0] = b1;
    m.weights[1](0, 0) = w2;
    const double z = 0.45;
    const double pre = w1 * z + b1;
    const double t = std::tanh(pre);
    const double expected = w2 * w1 * w1 * (-2.0 * t * (1.0 - t * t));
    const auto h = MlpHessian(m, Eigen::VectorXd::Constant(1, z));
    CHECK(h[0](0, 0) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("random nets: exact symmetry and directional FD agreement") {
    auto rng = oracles::Rng(31);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const MlpModel m = oracles::RandomNet(rng, {3, 8, 2});
      const Eigen::VectorXd z = oracles::RandomVector(rng, 3, -1.0, 1.0);
      const auto hess = MlpHessian(m, z);
      for (const auto& hm : hess) CHECK((hm - hm.transpose()).norm() == 0.0);
      // directional second derivative of the jacobian
      const Eigen::VectorXd dir = oracles::RandomVector(rng, 3).normalized();
      const double h = 1e-5;
      const Eigen::MatrixXd jp = MlpJacobian(m, z + h * dir);
      const Eigen::MatrixXd jm = MlpJacobian(m, z - h * dir);
      const Eigen::MatrixXd fd = (jp - jm) / (2.0 * h);  // out x in
      for (int o = 0; o < m.output_dim(); ++o) {
        const Eigen::VectorXd analytic = hess[o] * dir;
        worst = std::max(worst,
                         (analytic.transpose() - fd.row(o)).norm() / (1.0 + fd.row(o).norm()));
      }
    }
    CHECK(worst < 1e-4);
  }
  SUBCASE("relu hessian is rejected") {
    auto rng = oracles::Rng(77);
    const MlpModel m = oracles::RandomNet(rng, {3, 4, 1}, Activation::kRelu);
    CHECK_THROWS_AS(MlpHessian(m, Eigen::Vector3d::Zero()), UnsupportedError);
  }
}

TEST_CASE("batched evaluation equals looped single calls bit for bit") {
  auto rng = oracles::Rng(23);
  const MlpModel m = oracles::RandomNet(rng, {6, 32, 32, 4});
  const int k = 13;
  Eigen::MatrixXd z(k, 6);
  for (int i = 0; i < k; ++i) z.row(i) = oracles::RandomVector(rng, 6, -2.0, 2.0).transpose();
  // two identical rows must give identical results
  z.row(k - 1) = z.row(0);

  EvalCounters counters;
  const BatchEval batch = MlpBatchedEval(m, z, EvalOrder::kHessian, &counters);
  CHECK(counters.batched_calls == 1);
  CHECK(counters.batched_points == static_cast<std::uint64_t>(k));
  CHECK(counters.value_evals == 0);

  for (int i = 0; i < k; ++i) {
    const Eigen::VectorXd zi = z.row(i).transpose();
    const Eigen::VectorXd v = MlpForward(m, zi);
    const Eigen::MatrixXd j = MlpJacobian(m, zi);
    const auto h = MlpHessian(m, zi);
    CHECK((batch.values.row(i).transpose() - v).norm() == 0.0);
    CHECK((batch.jacobians[i] - j).norm() == 0.0);
    for (size_t o = 0; o < h.size(); ++o) CHECK((batch.hessians[i][o] - h[o]).norm() == 0.0);
  }
  CHECK((batch.values.row(0) - batch.values.row(k - 1)).norm() == 0.0);
  CHECK((batch.jacobians[0] - batch.jacobians[k - 1]).norm() == 0.0);
}

TEST_CASE("ragged or mismatched batch is rejected") {
  auto rng = oracles::Rng(3);
  const MlpModel m = oracles::RandomNet(rng, {4, 8, 2});
  CHECK_THROWS_AS(MlpBatchedEval(m, Eigen::MatrixXd::Zero(3, 5), EvalOrder::kValue),
                  InputDomainError);
}

TEST_CASE("training: all-zero labels give a near-zero model") {
  auto rng = oracles::Rng(100);
  ResidualDataset d;
  d.variant = "a";
  d.inputs.resize(512, 3);
  for (int i = 0; i < 512; ++i) d.inputs.row(i) = oracles::RandomVector(rng, 3, -5, 5);
  d.labels = Eigen::MatrixXd::Zero(512, 3);
  TrainOptions opts;
  opts.max_epochs = 30;
  opts.seed = 9;
  TrainReport report;
  const MlpModel m = TrainResidual(d, {8, 8}, Activation::kTanh, opts, &report);
  CHECK(report.best_val_mse < 1e-6);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd z = oracles::RandomVector(rng, 3, -5, 5);
    CHECK(MlpForward(m, z).norm() < 1e-3);
  }
}

TEST_CASE("training: linear drag labels reach small validation error") {
  auto rng = oracles::Rng(200);
  const int n = 4000;
  ResidualDataset d;
  d.variant = "a";
  d.inputs.resize(n, 3);
  d.labels.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd v = oracles::RandomVector(rng, 3, -5.0, 5.0);
    d.inputs.row(i) = v.transpose();
    d.labels.row(i) = (-0.3 * v).transpose();
  }
  TrainOptions opts;
  opts.max_epochs = 500;
  opts.patience = 50;
  opts.seed = 11;
  TrainReport report;
  const MlpModel m = TrainResidual(d, {18, 18}, Activation::kTanh, opts, &report);
  CHECK(report.best_val_mse < 1e-4);
  CHECK(report.epochs_run <= 500);
}

TEST_CASE("early stopping halts on a rising validation loss and keeps the best model") {
  // adversarial split: validation labels contradict the training labels, so
  // the validation loss rises as soon as the model starts fitting
  auto rng = oracles::Rng(300);
  const int n = 400;
  ResidualDataset d;
  d.variant = "a";
  d.inputs.resize(n, 3);
  d.labels.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd v = oracles::RandomVector(rng, 3, -2.0, 2.0);
    d.inputs.row(i) = v.transpose();
    const bool val_half = i >= n / 2;
    d.labels.row(i) = ((val_half ? 2.0 : -2.0) * v).transpose();
  }
  for (int i = 0; i < n / 2; ++i) d.train_idx.push_back(i);
  for (int i = n / 2; i < n; ++i) d.val_idx.push_back(i);
  TrainOptions opts;
  opts.max_epochs = 5000;
  opts.patience = 10;
  opts.learning_rate = 1e-2;  // fit fast so the validation loss turns early
  opts.seed = 4;
  TrainReport report;
  const MlpModel m = TrainResidual(d, {12}, Activation::kTanh, opts, &report);
  CHECK(report.epochs_run < 5000);
  CHECK(report.epochs_run - report.best_epoch >= 10);
  // returned model is the best-validation snapshot, not the last epoch
  std::vector<int> val(d.val_idx);
  double mse = 0.0;
  for (int i : val) mse += (MlpForward(m, d.inputs.row(i).transpose()).transpose() -
                            d.labels.row(i))
                               .squaredNorm();
  mse /= static_cast<double>(val.size()) * 3.0;
  CHECK(mse == doctest::Approx(report.best_val_mse).epsilon(1e-9));
}

TEST_CASE("model file round trip preserves everything") {
  auto rng = oracles::Rng(55);
  MlpModel m = oracles::RandomNet(rng, {7, 10, 3});
  m.input_variant = "a_u";
  m.seed = 1234;
  const std::string path = "/tmp/resmpc_test_model.bin";
  SaveModel(m, path);
  const MlpModel loaded = LoadModel(path);
  CHECK(loaded.layer_sizes == m.layer_sizes);
  CHECK(loaded.input_variant == "a_u");
  CHECK(loaded.seed == 1234);
  for (size_t l = 0; l < m.weights.size(); ++l) {
    CHECK((loaded.weights[l] - m.weights[l]).norm() == 0.0);
    CHECK((loaded.biases[l] - m.biases[l]).norm() == 0.0);
  }
  CHECK((loaded.in_mean - m.in_mean).norm() == 0.0);
  CHECK((loaded.in_scale - m.in_scale).norm() == 0.0);
  auto rng2 = oracles::Rng(56);
  for (int i = 0; i < 5; ++i) {
    const Eigen::VectorXd z = oracles::RandomVector(rng2, 7, -2, 2);
    CHECK((MlpForward(loaded, z) - MlpForward(m, z)).norm() == 0.0);
  }
  // sidecar exists and echoes the arch
  std::FILE* side = std::fopen((path + ".json").c_str(), "r");
  REQUIRE(side != nullptr);
  std::fclose(side);
}

TEST_CASE("dataset file round trip") {
  auto rng = oracles::Rng(60);
  ResidualDataset d;
  d.variant = "a";
  d.inputs.resize(50, 3);
  d.labels.resize(50, 3);
  for (int i = 0; i < 50; ++i) {
    d.inputs.row(i) = oracles::RandomVector(rng, 3).transpose();
    d.labels.row(i) = oracles::RandomVector(rng, 3).transpose();
  }
  const std::string path = "/tmp/resmpc_test_dataset.bin";
  d.Save(path);
  const ResidualDataset loaded = ResidualDataset::Load(path);
  CHECK(loaded.variant == "a");
  CHECK((loaded.inputs - d.inputs).norm() == 0.0);
  CHECK((loaded.labels - d.labels).norm() == 0.0);
}

TEST_CASE("arch strings parse") {
  CHECK(ParseArch("3x32") == std::vector<int>({32, 32, 32}));
  CHECK(ParseArch("18,18") == std::vector<int>({18, 18}));
  CHECK(ParseArch("64") == std::vector<int>({64}));
  CHECK_THROWS(ParseArch("0x4"));
}

TEST_CASE("normalization constants are used identically at train and eval time") {
  auto rng = oracles::Rng(70);
  const int n = 300;
  ResidualDataset d;
  d.variant = "a";
  d.inputs.resize(n, 3);
  d.labels.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    d.inputs.row(i) = (oracles::RandomVector(rng, 3) * 10.0 +
                       Eigen::Vector3d(100.0, -50.0, 3.0))
                          .transpose();  // far from standardized
    d.labels.row(i) = (0.01 * d.inputs.row(i));
  }
  TrainOptions opts;
  opts.max_epochs = 200;
  opts.patience = 200;
  opts.seed = 2;
  const MlpModel m = TrainResidual(d, {8}, Activation::kTanh, opts, nullptr);
  // training and evaluation share the stored constants, so the fit transfers
  double mse = 0.0;
  for (int i = 0; i < n; ++i)
    mse += (MlpForward(m, d.inputs.row(i).transpose()).transpose() - d.labels.row(i))
               .squaredNorm();
  mse /= n * 3.0;
  CHECK(mse < 1e-2);
  CHECK(m.in_mean.x() == doctest::Approx(100.0).epsilon(0.2));
}
