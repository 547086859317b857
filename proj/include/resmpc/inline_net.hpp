#pragma once

#include <Eigen/Dense>
#include <vector>

#include "resmpc/neural.hpp"

namespace resmpc {

// Network evaluation the way a generic optimization-modeling stack executes
// it once the trained weights have been lowered into its expression graph:
// flat scalar loops, value and Jacobian as separate function objects, the
// Jacobian recomputing its own forward sweep. This is the engine behind the
// controller's naive mode; the batched engine in neural.hpp is the fast
// path the prepared mode uses.
class InlineNet {
 public:
  explicit InlineNet(const MlpModel& m);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }

  Eigen::VectorXd Value(const Eigen::VectorXd& z, EvalCounters* counters = nullptr) const;
  Eigen::MatrixXd Jacobian(const Eigen::VectorXd& z, EvalCounters* counters = nullptr) const;

 private:
  std::vector<int> sizes_;
  std::vector<std::vector<double>> w_;  // row-major per layer
  std::vector<std::vector<double>> b_;
  bool tanh_act_ = true;
  std::vector<double> in_mean_, in_scale_, out_mean_, out_scale_;
};

}  // namespace resmpc
