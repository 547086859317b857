#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace resmpc {

enum class Activation { kTanh, kRelu };

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense feed-forward network with per-feature input/output standardization.
// The forward map is
//   y = out_scale ⊙ net((z − in_mean) ⊘ in_scale) + out_mean
// with `activation` on hidden layers and identity output. Models are
// immutable after training/loading; evaluation is reentrant.
struct MlpModel {
  std::vector<int> layer_sizes;           // [in, h1, ..., out]
  std::vector<RowMatrixXd> weights;       // weights[l]: sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> biases;
  Activation activation = Activation::kTanh;
  std::string input_variant = "full";     // feature layout this model expects
  Eigen::VectorXd in_mean, in_scale, out_mean, out_scale;
  std::uint64_t seed = 0;                 // RNG seed used at init/training

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int hidden_layers() const { return static_cast<int>(layer_sizes.size()) - 2; }
  std::int64_t ParameterCount() const;
  std::string ArchName() const;  // e.g. "N-3-32" for 3 hidden layers of 32
  void Validate() const;
};

// Tallies kept by whoever owns the evaluation (one controller, one trainer,
// one bench run); the model itself stays immutable.
struct EvalCounters {
  std::uint64_t value_evals = 0;
  std::uint64_t jacobian_evals = 0;
  std::uint64_t hessian_evals = 0;
  std::uint64_t batched_calls = 0;
  std::uint64_t batched_points = 0;
};

Eigen::VectorXd MlpForward(const MlpModel& m, const Eigen::VectorXd& z,
                           EvalCounters* counters = nullptr);

// Exact analytic Jacobian dy/dz, out_dim x in_dim.
Eigen::MatrixXd MlpJacobian(const MlpModel& m, const Eigen::VectorXd& z,
                            EvalCounters* counters = nullptr);

// Per-output Hessians (out_dim matrices of in_dim x in_dim), tanh only.
std::vector<Eigen::MatrixXd> MlpHessian(const MlpModel& m, const Eigen::VectorXd& z,
                                        EvalCounters* counters = nullptr);

enum class EvalOrder { kValue, kJacobian, kHessian };

struct BatchEval {
  Eigen::MatrixXd values;                              // K x out
  std::vector<Eigen::MatrixXd> jacobians;              // K entries (may be empty)
  std::vector<std::vector<Eigen::MatrixXd>> hessians;  // K entries (may be empty)
};

// Evaluates K feature rows in one call. Row i of the result is bit-identical
// to the corresponding single-input call: the batch runs the same per-sample
// accumulation kernel, only spread across the worker pool.
BatchEval MlpBatchedEval(const MlpModel& m, const Eigen::MatrixXd& z_rows, EvalOrder order,
                         EvalCounters* counters = nullptr);

// ---------------------------------------------------------------------------
// Training

struct ResidualDataset {
  Eigen::MatrixXd inputs;   // n x feature_dim
  Eigen::MatrixXd labels;   // n x label_dim
  std::string variant = "full";
  std::vector<int> train_idx, val_idx;  // optional; filled by training if empty

  int size() const { return static_cast<int>(inputs.rows()); }
  void Validate() const;
  void Save(const std::string& path) const;  // binary + JSON sidecar
  static ResidualDataset Load(const std::string& path);
};

struct TrainOptions {
  double learning_rate = 1e-4;
  int batch_size = 64;
  int max_epochs = 500;
  int patience = 20;          // epochs without val improvement before stopping
  double val_fraction = 0.1;  // used when the dataset has no split
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::string log_path;       // per-epoch CSV when non-empty
};

struct TrainReport {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_mse = 0.0;
  double final_train_mse = 0.0;
};

// Fan-in-scaled uniform init, zero biases, identity normalization.
MlpModel MakeMlp(const std::vector<int>& layer_sizes, Activation activation,
                 const std::string& variant, std::uint64_t seed);

// Adam minibatch training with early stopping on the validation split;
// returns the parameters of the best validation epoch. MSE is reported in
// raw label units.
MlpModel TrainResidual(const ResidualDataset& data, const std::vector<int>& hidden_sizes,
                       Activation activation, const TrainOptions& opts,
                       TrainReport* report = nullptr);

// Self-describing binary format plus a JSON sidecar at path + ".json".
void SaveModel(const MlpModel& m, const std::string& path);
MlpModel LoadModel(const std::string& path);

// "3x32" or "32,32,32" -> hidden layer sizes.
std::vector<int> ParseArch(const std::string& arch);

}  // namespace resmpc
