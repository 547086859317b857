#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "resmpc/neural.hpp"

namespace resmpc {

// Local expansion of the residual network around one shooting node. These
// are the only values the QP construction sees from the network.
struct TaylorApprox {
  int node = 0;
  int order = 1;                       // 1 or 2
  Eigen::VectorXd z0;                  // expansion point in feature space
  Eigen::VectorXd f_bar;               // network value at z0
  Eigen::MatrixXd jac;                 // out x in at z0
  std::vector<Eigen::MatrixXd> hess;   // per-output, present iff order == 2

  void Validate() const;
  std::string ToJson() const;  // debugging aid
};

// One batched network call covering every shooting node; row k of
// `node_features` is the expansion point for node k.
std::vector<TaylorApprox> PrepareNodes(const MlpModel& model,
                                       const Eigen::MatrixXd& node_features, int order,
                                       EvalCounters* counters = nullptr);

// f̄ + J·Δ (+ ½ Δᵀ H Δ per output for order 2).
Eigen::VectorXd EvalTaylor(const TaylorApprox& a, const Eigen::VectorXd& z);

// Constant J for order 1; J + H·Δ rows for order 2.
Eigen::MatrixXd EvalTaylorJacobian(const TaylorApprox& a, const Eigen::VectorXd& z);

}  // namespace resmpc
