#include "resmpc/inline_net.hpp"

#include <cmath>

#include "resmpc/errors.hpp"

namespace resmpc {

InlineNet::InlineNet(const MlpModel& m) {
  m.Validate();
  sizes_ = m.layer_sizes;
  tanh_act_ = m.activation == Activation::kTanh;
  for (size_t l = 0; l < m.weights.size(); ++l) {
    w_.emplace_back(m.weights[l].data(), m.weights[l].data() + m.weights[l].size());
    b_.emplace_back(m.biases[l].data(), m.biases[l].data() + m.biases[l].size());
  }
  in_mean_.assign(m.in_mean.data(), m.in_mean.data() + m.in_mean.size());
  in_scale_.assign(m.in_scale.data(), m.in_scale.data() + m.in_scale.size());
  out_mean_.assign(m.out_mean.data(), m.out_mean.data() + m.out_mean.size());
  out_scale_.assign(m.out_scale.data(), m.out_scale.data() + m.out_scale.size());
}

Eigen::VectorXd InlineNet::Value(const Eigen::VectorXd& z, EvalCounters* counters) const {
  if (z.size() != input_dim()) throw InputDomainError("inline net: feature dim mismatch");
  if (counters != nullptr) ++counters->value_evals;
  const int layers = static_cast<int>(w_.size());
  std::vector<double> cur(input_dim());
  for (int k = 0; k < input_dim(); ++k) cur[k] = (z[k] - in_mean_[k]) / in_scale_[k];
  std::vector<double> next;
  for (int l = 0; l < layers; ++l) {
    const int rows = sizes_[l + 1];
    const int cols = sizes_[l];
    next.assign(rows, 0.0);
    for (int j = 0; j < rows; ++j) {
      double acc = b_[l][j];
      const double* wrow = w_[l].data() + static_cast<size_t>(j) * cols;
      for (int k = 0; k < cols; ++k) acc += wrow[k] * cur[k];
      if (l + 1 < layers) acc = tanh_act_ ? std::tanh(acc) : (acc > 0.0 ? acc : 0.0);
      next[j] = acc;
    }
    cur.swap(next);
  }
  Eigen::VectorXd y(output_dim());
  for (int o = 0; o < output_dim(); ++o) y[o] = out_scale_[o] * cur[o] + out_mean_[o];
  return y;
}

Eigen::MatrixXd InlineNet::Jacobian(const Eigen::VectorXd& z, EvalCounters* counters) const {
  if (z.size() != input_dim()) throw InputDomainError("inline net: feature dim mismatch");
  if (counters != nullptr) ++counters->jacobian_evals;
  const int layers = static_cast<int>(w_.size());
  const int in = input_dim();
  const int out = output_dim();

  // forward sweep, keeping activation slopes per hidden unit
  std::vector<std::vector<double>> slope(layers - 1);
  std::vector<double> cur(in);
  for (int k = 0; k < in; ++k) cur[k] = (z[k] - in_mean_[k]) / in_scale_[k];
  std::vector<double> next;
  for (int l = 0; l < layers; ++l) {
    const int rows = sizes_[l + 1];
    const int cols = sizes_[l];
    next.assign(rows, 0.0);
    if (l + 1 < layers) slope[l].assign(rows, 0.0);
    for (int j = 0; j < rows; ++j) {
      double acc = b_[l][j];
      const double* wrow = w_[l].data() + static_cast<size_t>(j) * cols;
      for (int k = 0; k < cols; ++k) acc += wrow[k] * cur[k];
      if (l + 1 < layers) {
        if (tanh_act_) {
          const double t = std::tanh(acc);
          slope[l][j] = 1.0 - t * t;
          acc = t;
        } else {
          slope[l][j] = acc > 0.0 ? 1.0 : 0.0;
          acc = acc > 0.0 ? acc : 0.0;
        }
      }
      next[j] = acc;
    }
    cur.swap(next);
  }

  // reverse sweep: G starts as the last weight matrix
  std::vector<double> g(w_.back());
  int g_cols = sizes_[layers - 1];
  std::vector<double> g_next;
  for (int l = layers - 2; l >= 0; --l) {
    const int cols = sizes_[l];
    for (int o = 0; o < out; ++o)
      for (int i = 0; i < g_cols; ++i) g[static_cast<size_t>(o) * g_cols + i] *= slope[l][i];
    g_next.assign(static_cast<size_t>(out) * cols, 0.0);
    for (int o = 0; o < out; ++o) {
      double* orow = g_next.data() + static_cast<size_t>(o) * cols;
      const double* grow = g.data() + static_cast<size_t>(o) * g_cols;
      for (int i = 0; i < g_cols; ++i) {
        const double gi = grow[i];
        const double* wrow = w_[l].data() + static_cast<size_t>(i) * cols;
        for (int k = 0; k < cols; ++k) orow[k] += gi * wrow[k];
      }
    }
    g.swap(g_next);
    g_cols = cols;
  }

  Eigen::MatrixXd jac(out, in);
  for (int o = 0; o < out; ++o)
    for (int k = 0; k < in; ++k)
      jac(o, k) = out_scale_[o] * g[static_cast<size_t>(o) * in + k] / in_scale_[k];
  return jac;
}

}  // namespace resmpc
