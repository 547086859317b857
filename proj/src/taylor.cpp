#include "resmpc/taylor.hpp"

#include <json.hpp>

#include "resmpc/errors.hpp"

namespace resmpc {

void TaylorApprox::Validate() const {
  if (order != 1 && order != 2) throw ConfigError("taylor: order must be 1 or 2");
  if (jac.rows() != f_bar.size() || jac.cols() != z0.size())
    throw ConfigError("taylor: jacobian shape mismatch");
  if (order == 2 && static_cast<int>(hess.size()) != f_bar.size())
    throw ConfigError("taylor: hessian stack missing for order 2");
  if (order == 1 && !hess.empty()) throw ConfigError("taylor: order 1 must not carry hessians");
}

std::string TaylorApprox::ToJson() const {
  nlohmann::json j{{"node", node}, {"order", order}};
  j["z0"] = std::vector<double>(z0.data(), z0.data() + z0.size());
  j["f_bar"] = std::vector<double>(f_bar.data(), f_bar.data() + f_bar.size());
  auto mat = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      rows.emplace_back(m.row(r).begin(), m.row(r).end());
    }
    return rows;
  };
  j["jac"] = mat(jac);
  if (!hess.empty()) {
    auto& h = j["hess"] = nlohmann::json::array();
    for (const auto& hm : hess) h.push_back(mat(hm));
  }
  return j.dump();
}

std::vector<TaylorApprox> PrepareNodes(const MlpModel& model,
                                       const Eigen::MatrixXd& node_features, int order,
                                       EvalCounters* counters) {
  if (order != 1 && order != 2) throw ConfigError("prepare nodes: order must be 1 or 2");
  const BatchEval batch = MlpBatchedEval(
      model, node_features, order == 2 ? EvalOrder::kHessian : EvalOrder::kJacobian, counters);
  std::vector<TaylorApprox> approxes(node_features.rows());
  for (Eigen::Index k = 0; k < node_features.rows(); ++k) {
    TaylorApprox& a = approxes[k];
    a.node = static_cast<int>(k);
    a.order = order;
    a.z0 = node_features.row(k).transpose();
    a.f_bar = batch.values.row(k).transpose();
    a.jac = batch.jacobians[k];
    if (order == 2) a.hess = batch.hessians[k];
    a.Validate();
  }
  return approxes;
}

Eigen::VectorXd EvalTaylor(const TaylorApprox& a, const Eigen::VectorXd& z) {
  const Eigen::VectorXd dz = z - a.z0;
  Eigen::VectorXd y = a.f_bar + a.jac * dz;
  if (a.order == 2) {
    for (size_t o = 0; o < a.hess.size(); ++o)
      y[static_cast<Eigen::Index>(o)] += 0.5 * dz.dot(a.hess[o] * dz);
  }
  return y;
}

Eigen::MatrixXd EvalTaylorJacobian(const TaylorApprox& a, const Eigen::VectorXd& z) {
  if (a.order == 1) return a.jac;
  const Eigen::VectorXd dz = z - a.z0;
  Eigen::MatrixXd j = a.jac;
  for (size_t o = 0; o < a.hess.size(); ++o)
    j.row(static_cast<Eigen::Index>(o)) += (a.hess[o] * dz).transpose();
  return j;
}

}  // namespace resmpc
