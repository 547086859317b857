#include "resmpc/neural.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "resmpc/errors.hpp"
#include "resmpc/threadpool.hpp"

namespace resmpc {
namespace {

// ---------------------------------------------------------------------------
// Dense kernels.
//
// Every output element is accumulated by exactly one thread in a fixed order
// (std::fma over ascending k), so results do not depend on the batch size or
// the pool size: batch row i is bit-identical to a single-sample call.

// OUT(s, j) = b[j] + Σ_k W(j, k) · X(s, k); X, OUT col-major (K rows).
void DenseForward(const RowMatrixXd& w, const Eigen::VectorXd& b, const Eigen::MatrixXd& x,
                  Eigen::MatrixXd& out, ThreadPool* pool) {
  const std::int64_t k_count = w.cols();
  const std::int64_t m = w.rows();
  const std::int64_t samples = x.rows();
  out.resize(samples, m);
  const double* xd = x.data();
  double* od = out.data();
  auto body = [&](std::int64_t j0, std::int64_t j1) {
    for (std::int64_t j = j0; j < j1; ++j) {
      double* oj = od + j * samples;
      const double* wrow = w.data() + j * k_count;
      const double bj = b[j];
      for (std::int64_t s = 0; s < samples; ++s) oj[s] = bj;
      for (std::int64_t k = 0; k < k_count; ++k) {
        const double wk = wrow[k];
        const double* xk = xd + k * samples;
        for (std::int64_t s = 0; s < samples; ++s) oj[s] = std::fma(wk, xk[s], oj[s]);
      }
    }
  };
  if (pool != nullptr) {
    pool->ParallelFor(m, body);
  } else {
    body(0, m);
  }
}

// OUT(r, :) = Σ_i G(r, i) · W(i, :); G, OUT row-major.
void DenseReverse(const RowMatrixXd& g, const RowMatrixXd& w, RowMatrixXd& out,
                  ThreadPool* pool) {
  const std::int64_t rows = g.rows();
  const std::int64_t m = w.rows();
  const std::int64_t n = w.cols();
  out.resize(rows, n);
  auto body = [&](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t r = r0; r < r1; ++r) {
      double* orow = out.data() + r * n;
      const double* grow = g.data() + r * m;
      for (std::int64_t k = 0; k < n; ++k) orow[k] = 0.0;
      for (std::int64_t i = 0; i < m; ++i) {
        const double gi = grow[i];
        const double* wrow = w.data() + i * n;
        for (std::int64_t k = 0; k < n; ++k) orow[k] = std::fma(gi, wrow[k], orow[k]);
      }
    }
  };
  if (pool != nullptr) {
    pool->ParallelFor(rows, body);
  } else {
    body(0, rows);
  }
}

inline double ActValue(Activation a, double x) {
  return a == Activation::kTanh ? std::tanh(x) : (x > 0.0 ? x : 0.0);
}

inline double ActSlopeFromPre(Activation a, double pre) {
  if (a == Activation::kTanh) {
    const double t = std::tanh(pre);
    return 1.0 - t * t;
  }
  return pre > 0.0 ? 1.0 : 0.0;
}

struct ForwardPass {
  std::vector<Eigen::MatrixXd> pre;  // per layer, K x sizes[l+1]
  std::vector<Eigen::MatrixXd> act;  // hidden activations (last entry = output)
};

// Runs the normalized forward pass for all samples; z_rows is K x in (raw).
ForwardPass RunForward(const MlpModel& m, const Eigen::MatrixXd& z_rows, ThreadPool* pool) {
  const std::int64_t samples = z_rows.rows();
  const int layers = static_cast<int>(m.weights.size());
  ForwardPass fp;
  fp.pre.resize(layers);
  fp.act.resize(layers);
  Eigen::MatrixXd x(samples, m.input_dim());
  for (int k = 0; k < m.input_dim(); ++k)
    x.col(k) = (z_rows.col(k).array() - m.in_mean[k]) / m.in_scale[k];
  for (int l = 0; l < layers; ++l) {
    DenseForward(m.weights[l], m.biases[l], x, fp.pre[l], pool);
    if (l + 1 < layers) {
      fp.act[l] = fp.pre[l].unaryExpr(
          [a = m.activation](double v) { return ActValue(a, v); });
      x = fp.act[l];
    } else {
      fp.act[l] = fp.pre[l];  // identity output layer
    }
  }
  return fp;
}

Eigen::MatrixXd DenormalizeOutputs(const MlpModel& m, const Eigen::MatrixXd& raw) {
  Eigen::MatrixXd y(raw.rows(), raw.cols());
  for (int o = 0; o < m.output_dim(); ++o)
    y.col(o) = raw.col(o).array() * m.out_scale[o] + m.out_mean[o];
  return y;
}

// Stacked reverse sweep: returns (K·out) x in row-major Jacobians of the
// normalized network; caller applies the normalization chain.
RowMatrixXd RunReverse(const MlpModel& m, const ForwardPass& fp, ThreadPool* pool) {
  const int layers = static_cast<int>(m.weights.size());
  const std::int64_t samples = fp.pre[0].rows();
  const int out = m.output_dim();
  const std::int64_t rows = samples * out;

  RowMatrixXd g(rows, m.layer_sizes[layers - 1]);
  for (std::int64_t s = 0; s < samples; ++s)
    for (int o = 0; o < out; ++o) g.row(s * out + o) = m.weights[layers - 1].row(o);

  RowMatrixXd next;
  for (int l = layers - 2; l >= 0; --l) {
    const Eigen::MatrixXd& pre = fp.pre[l];
    const std::int64_t width = pre.cols();
    auto scale = [&](std::int64_t r0, std::int64_t r1) {
      for (std::int64_t r = r0; r < r1; ++r) {
        const std::int64_t s = r / out;
        double* grow = g.data() + r * width;
        for (std::int64_t i = 0; i < width; ++i)
          grow[i] *= ActSlopeFromPre(m.activation, pre(s, i));
      }
    };
    if (pool != nullptr) {
      pool->ParallelFor(rows, scale);
    } else {
      scale(0, rows);
    }
    DenseReverse(g, m.weights[l], next, pool);
    g.swap(next);
  }
  return g;
}

Eigen::MatrixXd ExtractJacobian(const MlpModel& m, const RowMatrixXd& g, std::int64_t sample) {
  const int out = m.output_dim();
  const int in = m.input_dim();
  Eigen::MatrixXd j(out, in);
  for (int o = 0; o < out; ++o)
    for (int k = 0; k < in; ++k)
      j(o, k) = m.out_scale[o] * g(sample * out + o, k) / m.in_scale[k];
  return j;
}

std::vector<Eigen::MatrixXd> HessianSingle(const MlpModel& m, const Eigen::VectorXd& z) {
  if (m.activation != Activation::kTanh)
    throw UnsupportedError("mlp hessian: only tanh networks are twice differentiable here");
  const int in = m.input_dim();
  const int layers = static_cast<int>(m.weights.size());

  Eigen::VectorXd x = (z - m.in_mean).cwiseQuotient(m.in_scale);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(in, in);
  std::vector<Eigen::MatrixXd> hess(in, Eigen::MatrixXd::Zero(in, in));

  for (int l = 0; l < layers; ++l) {
    const RowMatrixXd& w = m.weights[l];
    const int width = static_cast<int>(w.rows());
    const Eigen::VectorXd pre = w * x + m.biases[l];
    Eigen::MatrixXd jac_next = w * jac;
    std::vector<Eigen::MatrixXd> hess_next(width, Eigen::MatrixXd::Zero(in, in));
    for (int j = 0; j < width; ++j)
      for (int i = 0; i < static_cast<int>(w.cols()); ++i)
        if (w(j, i) != 0.0) hess_next[j] += w(j, i) * hess[i];
    if (l + 1 < layers) {
      x = pre.array().tanh();
      for (int j = 0; j < width; ++j) {
        const double t = x[j];
        const double sp = 1.0 - t * t;
        const double spp = -2.0 * t * sp;
        hess_next[j] = sp * hess_next[j] + spp * (jac_next.row(j).transpose() * jac_next.row(j));
        jac_next.row(j) *= sp;
      }
    } else {
      x = pre;
    }
    jac = std::move(jac_next);
    hess = std::move(hess_next);
  }

  // Denormalize and enforce exact symmetry by mirroring the upper triangle
  // (the lower one only differs by rounding noise from the packetized sums).
  const Eigen::VectorXd inv_scale = m.in_scale.cwiseInverse();
  std::vector<Eigen::MatrixXd> result(m.output_dim());
  for (int o = 0; o < m.output_dim(); ++o) {
    result[o].resize(in, in);
    for (int a = 0; a < in; ++a) {
      for (int b = a; b < in; ++b) {
        const double v = m.out_scale[o] * (inv_scale[a] * inv_scale[b]) * hess[o](a, b);
        result[o](a, b) = v;
        result[o](b, a) = v;
      }
    }
  }
  return result;
}

BatchEval BatchedCore(const MlpModel& m, const Eigen::MatrixXd& z_rows, EvalOrder order,
                      ThreadPool* pool) {
  m.Validate();
  if (z_rows.cols() != m.input_dim())
    throw InputDomainError("mlp eval: feature dim " + std::to_string(z_rows.cols()) +
                           " does not match model input " + std::to_string(m.input_dim()));
  const std::int64_t samples = z_rows.rows();
  BatchEval result;
  const ForwardPass fp = RunForward(m, z_rows, pool);
  result.values = DenormalizeOutputs(m, fp.act.back());
  if (order == EvalOrder::kValue) return result;

  const RowMatrixXd g = RunReverse(m, fp, pool);
  result.jacobians.resize(samples);
  for (std::int64_t s = 0; s < samples; ++s) result.jacobians[s] = ExtractJacobian(m, g, s);
  if (order == EvalOrder::kJacobian) return result;

  result.hessians.resize(samples);
  auto body = [&](std::int64_t s0, std::int64_t s1) {
    for (std::int64_t s = s0; s < s1; ++s)
      result.hessians[s] = HessianSingle(m, z_rows.row(s).transpose());
  };
  if (pool != nullptr) {
    pool->ParallelFor(samples, body);
  } else {
    body(0, samples);
  }
  return result;
}

}  // namespace

ThreadPool& ThreadPool::Global() {
  static ThreadPool pool([] {
    if (const char* env = std::getenv("RESMPC_THREADS")) {
      const int n = std::atoi(env);
      if (n >= 1) return n - 1;
    }
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency())) - 1;
  }());
  return pool;
}

std::int64_t MlpModel::ParameterCount() const {
  std::int64_t n = 0;
  for (size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    n += static_cast<std::int64_t>(layer_sizes[l + 1]) * (layer_sizes[l] + 1);
  return n;
}

std::string MlpModel::ArchName() const {
  std::ostringstream os;
  os << "N-" << hidden_layers() << "-" << (hidden_layers() > 0 ? layer_sizes[1] : 0);
  return os.str();
}

void MlpModel::Validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("mlp: need at least input and output layers");
  if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size())
    throw ConfigError("mlp: weight/bias count does not match layer sizes");
  for (size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l])
      throw ConfigError("mlp: layer " + std::to_string(l) + " has incompatible shape");
    if (biases[l].size() != layer_sizes[l + 1])
      throw ConfigError("mlp: bias " + std::to_string(l) + " has incompatible shape");
  }
  if (in_mean.size() != input_dim() || in_scale.size() != input_dim() ||
      out_mean.size() != output_dim() || out_scale.size() != output_dim())
    throw ConfigError("mlp: normalization vectors do not match layer sizes");
  if (!(in_scale.minCoeff() > 0.0) || !(out_scale.minCoeff() > 0.0))
    throw ConfigError("mlp: normalization scales must be strictly positive");
}

Eigen::VectorXd MlpForward(const MlpModel& m, const Eigen::VectorXd& z, EvalCounters* counters) {
  if (counters != nullptr) ++counters->value_evals;
  const BatchEval r = BatchedCore(m, z.transpose(), EvalOrder::kValue, nullptr);
  return r.values.row(0).transpose();
}

Eigen::MatrixXd MlpJacobian(const MlpModel& m, const Eigen::VectorXd& z, EvalCounters* counters) {
  if (counters != nullptr) ++counters->jacobian_evals;
  const BatchEval r = BatchedCore(m, z.transpose(), EvalOrder::kJacobian, nullptr);
  return r.jacobians[0];
}

std::vector<Eigen::MatrixXd> MlpHessian(const MlpModel& m, const Eigen::VectorXd& z,
                                        EvalCounters* counters) {
  if (counters != nullptr) ++counters->hessian_evals;
  m.Validate();
  if (z.size() != m.input_dim()) throw InputDomainError("mlp hessian: feature dim mismatch");
  return HessianSingle(m, z);
}

BatchEval MlpBatchedEval(const MlpModel& m, const Eigen::MatrixXd& z_rows, EvalOrder order,
                         EvalCounters* counters) {
  if (counters != nullptr) {
    ++counters->batched_calls;
    counters->batched_points += static_cast<std::uint64_t>(z_rows.rows());
  }
  return BatchedCore(m, z_rows, order, &ThreadPool::Global());
}

// ---------------------------------------------------------------------------
// Dataset

void ResidualDataset::Validate() const {
  if (inputs.rows() != labels.rows())
    throw ConfigError("dataset: inputs and labels must have equal length");
  if (inputs.rows() == 0) throw ConfigError("dataset: empty");
  if (!train_idx.empty() || !val_idx.empty()) {
    std::vector<char> seen(inputs.rows(), 0);
    for (int i : train_idx) {
      if (i < 0 || i >= size() || seen[i]) throw ConfigError("dataset: bad train split");
      seen[i] = 1;
    }
    for (int i : val_idx) {
      if (i < 0 || i >= size() || seen[i]) throw ConfigError("dataset: bad val split");
      seen[i] = 1;
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
      throw ConfigError("dataset: split does not cover all rows");
  }
}

namespace {

template <typename T>
void WriteRaw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T ReadRaw(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ConfigError("unexpected end of file");
  return v;
}

void WriteString(std::ofstream& out, const std::string& s) {
  WriteRaw<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string ReadString(std::ifstream& in) {
  const auto n = ReadRaw<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw ConfigError("unexpected end of file");
  return s;
}

void WriteVec(std::ofstream& out, const Eigen::VectorXd& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * v.size()));
}

void ReadVec(std::ifstream& in, Eigen::VectorXd& v) {
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * v.size()));
  if (!in) throw ConfigError("unexpected end of file");
}

}  // namespace

void ResidualDataset::Save(const std::string& path) const {
  Validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("dataset: cannot write '" + path + "'");
  out.write("RDSB", 4);
  WriteRaw<std::uint32_t>(out, 1);
  WriteString(out, variant);
  WriteRaw<std::uint32_t>(out, static_cast<std::uint32_t>(inputs.cols()));
  WriteRaw<std::uint32_t>(out, static_cast<std::uint32_t>(labels.cols()));
  WriteRaw<std::uint64_t>(out, static_cast<std::uint64_t>(inputs.rows()));
  const RowMatrixXd in_rm = inputs, lb_rm = labels;
  out.write(reinterpret_cast<const char*>(in_rm.data()),
            static_cast<std::streamsize>(sizeof(double) * in_rm.size()));
  out.write(reinterpret_cast<const char*>(lb_rm.data()),
            static_cast<std::streamsize>(sizeof(double) * lb_rm.size()));
  WriteRaw<std::uint64_t>(out, train_idx.size());
  out.write(reinterpret_cast<const char*>(train_idx.data()),
            static_cast<std::streamsize>(sizeof(int) * train_idx.size()));
  WriteRaw<std::uint64_t>(out, val_idx.size());
  out.write(reinterpret_cast<const char*>(val_idx.data()),
            static_cast<std::streamsize>(sizeof(int) * val_idx.size()));
  if (!out) throw ConfigError("dataset: write failed for '" + path + "'");
  out.close();

  nlohmann::json meta{{"format", "RDSB"},
                      {"version", 1},
                      {"variant", variant},
                      {"feature_dim", inputs.cols()},
                      {"label_dim", labels.cols()},
                      {"count", inputs.rows()},
                      {"train_count", train_idx.size()},
                      {"val_count", val_idx.size()}};
  std::ofstream side(path + ".json");
  side << meta.dump(2) << "\n";
}

ResidualDataset ResidualDataset::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("dataset: cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "RDSB", 4) != 0)
    throw ConfigError("dataset: '" + path + "' is not a residual dataset file");
  if (ReadRaw<std::uint32_t>(in) != 1) throw ConfigError("dataset: unsupported version");
  ResidualDataset d;
  d.variant = ReadString(in);
  const auto fdim = ReadRaw<std::uint32_t>(in);
  const auto ldim = ReadRaw<std::uint32_t>(in);
  const auto count = ReadRaw<std::uint64_t>(in);
  RowMatrixXd in_rm(count, fdim), lb_rm(count, ldim);
  in.read(reinterpret_cast<char*>(in_rm.data()),
          static_cast<std::streamsize>(sizeof(double) * in_rm.size()));
  in.read(reinterpret_cast<char*>(lb_rm.data()),
          static_cast<std::streamsize>(sizeof(double) * lb_rm.size()));
  if (!in) throw ConfigError("dataset: truncated data in '" + path + "'");
  d.inputs = in_rm;
  d.labels = lb_rm;
  const auto ntr = ReadRaw<std::uint64_t>(in);
  d.train_idx.resize(ntr);
  in.read(reinterpret_cast<char*>(d.train_idx.data()),
          static_cast<std::streamsize>(sizeof(int) * ntr));
  const auto nva = ReadRaw<std::uint64_t>(in);
  d.val_idx.resize(nva);
  in.read(reinterpret_cast<char*>(d.val_idx.data()),
          static_cast<std::streamsize>(sizeof(int) * nva));
  if (!in) throw ConfigError("dataset: truncated split in '" + path + "'");
  d.Validate();
  return d;
}

// ---------------------------------------------------------------------------
// Init and training

MlpModel MakeMlp(const std::vector<int>& layer_sizes, Activation activation,
                 const std::string& variant, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw ConfigError("mlp: need at least input and output layers");
  MlpModel m;
  m.layer_sizes = layer_sizes;
  m.activation = activation;
  m.input_variant = variant;
  m.seed = seed;
  std::mt19937_64 rng(seed);
  for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    RowMatrixXd w(layer_sizes[l + 1], layer_sizes[l]);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(Eigen::VectorXd::Zero(layer_sizes[l + 1]));
  }
  m.in_mean = Eigen::VectorXd::Zero(layer_sizes.front());
  m.in_scale = Eigen::VectorXd::Ones(layer_sizes.front());
  m.out_mean = Eigen::VectorXd::Zero(layer_sizes.back());
  m.out_scale = Eigen::VectorXd::Ones(layer_sizes.back());
  m.Validate();
  return m;
}

namespace {

struct AdamState {
  std::vector<RowMatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  double beta1_t = 1.0, beta2_t = 1.0;
};

void AdamStep(MlpModel& m, const std::vector<RowMatrixXd>& dw,
              const std::vector<Eigen::VectorXd>& db, const TrainOptions& o, AdamState& s) {
  s.beta1_t *= o.beta1;
  s.beta2_t *= o.beta2;
  const double c1 = 1.0 / (1.0 - s.beta1_t);
  const double c2 = 1.0 / (1.0 - s.beta2_t);
  for (size_t l = 0; l < m.weights.size(); ++l) {
    s.mw[l] = o.beta1 * s.mw[l] + (1.0 - o.beta1) * dw[l];
    s.vw[l] = o.beta2 * s.vw[l] + (1.0 - o.beta2) * dw[l].cwiseProduct(dw[l]);
    m.weights[l] -= o.learning_rate *
                    (s.mw[l] * c1).cwiseQuotient(((s.vw[l] * c2).cwiseSqrt().array() + o.epsilon)
                                                     .matrix());
    s.mb[l] = o.beta1 * s.mb[l] + (1.0 - o.beta1) * db[l];
    s.vb[l] = o.beta2 * s.vb[l] + (1.0 - o.beta2) * db[l].cwiseProduct(db[l]);
    m.biases[l] -= o.learning_rate *
                   (s.mb[l] * c1).cwiseQuotient(((s.vb[l] * c2).cwiseSqrt().array() + o.epsilon)
                                                    .matrix());
  }
}

double EvalRawMse(const MlpModel& m, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& labels,
                  const std::vector<int>& idx) {
  if (idx.empty()) return 0.0;
  Eigen::MatrixXd z(idx.size(), inputs.cols());
  for (size_t i = 0; i < idx.size(); ++i) z.row(static_cast<int>(i)) = inputs.row(idx[i]);
  const BatchEval r = BatchedCore(m, z, EvalOrder::kValue, nullptr);
  double sum = 0.0;
  for (size_t i = 0; i < idx.size(); ++i)
    sum += (r.values.row(static_cast<int>(i)) - labels.row(idx[i])).squaredNorm();
  return sum / (static_cast<double>(idx.size()) * labels.cols());
}

}  // namespace

MlpModel TrainResidual(const ResidualDataset& data, const std::vector<int>& hidden_sizes,
                       Activation activation, const TrainOptions& opts, TrainReport* report) {
  data.Validate();
  const int n = data.size();
  const int in_dim = static_cast<int>(data.inputs.cols());
  const int out_dim = static_cast<int>(data.labels.cols());

  std::vector<int> train = data.train_idx, val = data.val_idx;
  std::mt19937_64 rng(opts.seed);
  if (train.empty() && val.empty()) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    const int n_val = std::max(1, static_cast<int>(std::lround(n * opts.val_fraction)));
    if (n_val >= n) throw ConfigError("train: dataset too small for a validation split");
    val.assign(idx.begin(), idx.begin() + n_val);
    train.assign(idx.begin() + n_val, idx.end());
  }
  if (train.empty() || val.empty())
    throw ConfigError("train: both train and validation splits must be non-empty");

  std::vector<int> sizes = {in_dim};
  sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
  sizes.push_back(out_dim);
  MlpModel m = MakeMlp(sizes, activation, data.variant, opts.seed);

  // Standardize features and labels on the training split only.
  auto standardize = [&](const Eigen::MatrixXd& src, const std::vector<int>& rows,
                         Eigen::VectorXd& mean, Eigen::VectorXd& scale) {
    mean = Eigen::VectorXd::Zero(src.cols());
    for (int i : rows) mean += src.row(i).transpose();
    mean /= static_cast<double>(rows.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(src.cols());
    for (int i : rows) {
      const Eigen::VectorXd d = src.row(i).transpose() - mean;
      var += d.cwiseProduct(d);
    }
    var /= static_cast<double>(rows.size());
    scale = var.cwiseSqrt().cwiseMax(1e-8);
  };
  standardize(data.inputs, train, m.in_mean, m.in_scale);
  standardize(data.labels, train, m.out_mean, m.out_scale);

  Eigen::MatrixXd norm_in(n, in_dim), norm_lab(n, out_dim);
  for (int k = 0; k < in_dim; ++k)
    norm_in.col(k) = (data.inputs.col(k).array() - m.in_mean[k]) / m.in_scale[k];
  for (int k = 0; k < out_dim; ++k)
    norm_lab.col(k) = (data.labels.col(k).array() - m.out_mean[k]) / m.out_scale[k];

  const int layers = static_cast<int>(m.weights.size());
  AdamState adam;
  for (int l = 0; l < layers; ++l) {
    adam.mw.emplace_back(RowMatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
    adam.vw.emplace_back(RowMatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
    adam.mb.emplace_back(Eigen::VectorXd::Zero(m.biases[l].size()));
    adam.vb.emplace_back(Eigen::VectorXd::Zero(m.biases[l].size()));
  }

  std::FILE* log = nullptr;
  if (!opts.log_path.empty()) {
    log = std::fopen(opts.log_path.c_str(), "w");
    if (log == nullptr) throw ConfigError("train: cannot write log '" + opts.log_path + "'");
    std::fprintf(log, "epoch,train_mse,val_mse,wall_ms\n");
  }

  MlpModel best = m;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int epoch = 0;
  const auto t_start = std::chrono::steady_clock::now();

  for (; epoch < opts.max_epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    double raw_sq_sum = 0.0;
    std::int64_t seen = 0;
    for (size_t start = 0; start < train.size(); start += opts.batch_size) {
      const int bs = static_cast<int>(std::min<size_t>(opts.batch_size, train.size() - start));
      Eigen::MatrixXd xb(bs, in_dim), yb(bs, out_dim);
      for (int i = 0; i < bs; ++i) {
        xb.row(i) = norm_in.row(train[start + i]);
        yb.row(i) = norm_lab.row(train[start + i]);
      }
      // forward (normalized space)
      std::vector<Eigen::MatrixXd> pre(layers), act(layers);
      Eigen::MatrixXd cur = xb;
      for (int l = 0; l < layers; ++l) {
        DenseForward(m.weights[l], m.biases[l], cur, pre[l], nullptr);
        if (l + 1 < layers) {
          act[l] = pre[l].unaryExpr([a = m.activation](double v) { return ActValue(a, v); });
          cur = act[l];
        } else {
          act[l] = pre[l];
        }
      }
      const Eigen::MatrixXd err = act.back() - yb;  // B x out, normalized
      for (int o = 0; o < out_dim; ++o)
        raw_sq_sum += err.col(o).squaredNorm() * m.out_scale[o] * m.out_scale[o];
      seen += bs;

      // backward, fixed reduction order
      std::vector<RowMatrixXd> dw(layers);
      std::vector<Eigen::VectorXd> db(layers);
      Eigen::MatrixXd delta = err * (2.0 / (static_cast<double>(bs) * out_dim));
      for (int l = layers - 1; l >= 0; --l) {
        const Eigen::MatrixXd& below = l > 0 ? act[l - 1] : xb;
        dw[l] = delta.transpose() * below;
        db[l] = delta.colwise().sum().transpose();
        if (l > 0) {
          delta = (delta * m.weights[l]).eval();
          delta.array() *= pre[l - 1].unaryExpr([a = m.activation](double v) {
                                       return ActSlopeFromPre(a, v);
                                     }).array();
        }
      }
      AdamStep(m, dw, db, opts, adam);
    }
    const double train_mse = raw_sq_sum / (static_cast<double>(seen) * out_dim);
    const double val_mse = EvalRawMse(m, data.inputs, data.labels, val);
    if (!std::isfinite(train_mse) || !std::isfinite(val_mse)) {
      if (log != nullptr) std::fclose(log);
      throw std::runtime_error("train: loss became non-finite at epoch " +
                               std::to_string(epoch) + " (lr too high or bad data)");
    }
    if (log != nullptr) {
      const double wall =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
              .count();
      std::fprintf(log, "%d,%.17g,%.17g,%.3f\n", epoch, train_mse, val_mse, wall);
    }
    if (val_mse < best_val) {
      best_val = val_mse;
      best_epoch = epoch;
      best = m;
    } else if (epoch - best_epoch >= opts.patience) {
      ++epoch;
      break;
    }
    if (report != nullptr) report->final_train_mse = train_mse;
  }
  if (log != nullptr) std::fclose(log);

  if (report != nullptr) {
    report->epochs_run = epoch;
    report->best_epoch = best_epoch;
    report->best_val_mse = best_val;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Model file I/O

void SaveModel(const MlpModel& m, const std::string& path) {
  m.Validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("model: cannot write '" + path + "'");
  out.write("RMLP", 4);
  WriteRaw<std::uint32_t>(out, 1);
  WriteRaw<std::uint8_t>(out, m.activation == Activation::kTanh ? 0 : 1);
  WriteString(out, m.input_variant);
  WriteRaw<std::uint64_t>(out, m.seed);
  WriteRaw<std::uint32_t>(out, static_cast<std::uint32_t>(m.layer_sizes.size()));
  for (int s : m.layer_sizes) WriteRaw<std::uint32_t>(out, static_cast<std::uint32_t>(s));
  WriteVec(out, m.in_mean);
  WriteVec(out, m.in_scale);
  WriteVec(out, m.out_mean);
  WriteVec(out, m.out_scale);
  for (size_t l = 0; l < m.weights.size(); ++l) {
    out.write(reinterpret_cast<const char*>(m.weights[l].data()),
              static_cast<std::streamsize>(sizeof(double) * m.weights[l].size()));
    WriteVec(out, m.biases[l]);
  }
  if (!out) throw ConfigError("model: write failed for '" + path + "'");
  out.close();

  nlohmann::json meta{{"format", "RMLP"},
                      {"version", 1},
                      {"activation", m.activation == Activation::kTanh ? "tanh" : "relu"},
                      {"input_variant", m.input_variant},
                      {"layer_sizes", m.layer_sizes},
                      {"arch", m.ArchName()},
                      {"parameter_count", m.ParameterCount()},
                      {"seed", m.seed}};
  std::ofstream side(path + ".json");
  side << meta.dump(2) << "\n";
}

MlpModel LoadModel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("model: cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "RMLP", 4) != 0)
    throw ConfigError("model: '" + path + "' is not a model file");
  if (ReadRaw<std::uint32_t>(in) != 1) throw ConfigError("model: unsupported version");
  MlpModel m;
  m.activation = ReadRaw<std::uint8_t>(in) == 0 ? Activation::kTanh : Activation::kRelu;
  m.input_variant = ReadString(in);
  m.seed = ReadRaw<std::uint64_t>(in);
  const auto n_sizes = ReadRaw<std::uint32_t>(in);
  m.layer_sizes.resize(n_sizes);
  for (auto& s : m.layer_sizes) s = static_cast<int>(ReadRaw<std::uint32_t>(in));
  m.in_mean.resize(m.input_dim());
  m.in_scale.resize(m.input_dim());
  m.out_mean.resize(m.output_dim());
  m.out_scale.resize(m.output_dim());
  ReadVec(in, m.in_mean);
  ReadVec(in, m.in_scale);
  ReadVec(in, m.out_mean);
  ReadVec(in, m.out_scale);
  for (size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    RowMatrixXd w(m.layer_sizes[l + 1], m.layer_sizes[l]);
    in.read(reinterpret_cast<char*>(w.data()),
            static_cast<std::streamsize>(sizeof(double) * w.size()));
    Eigen::VectorXd b(m.layer_sizes[l + 1]);
    ReadVec(in, b);
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  if (!in) throw ConfigError("model: truncated weights in '" + path + "'");
  m.Validate();
  return m;
}

std::vector<int> ParseArch(const std::string& arch) {
  std::vector<int> sizes;
  const auto x_pos = arch.find('x');
  if (x_pos != std::string::npos && arch.find(',') == std::string::npos) {
    const int depth = std::stoi(arch.substr(0, x_pos));
    const int width = std::stoi(arch.substr(x_pos + 1));
    if (depth < 1 || width < 1) throw ConfigError("arch: bad depth/width in '" + arch + "'");
    sizes.assign(depth, width);
    return sizes;
  }
  std::istringstream is(arch);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    const int w = std::stoi(tok);
    if (w < 1) throw ConfigError("arch: bad width in '" + arch + "'");
    sizes.push_back(w);
  }
  if (sizes.empty()) throw ConfigError("arch: empty spec '" + arch + "'");
  return sizes;
}

}  // namespace resmpc
