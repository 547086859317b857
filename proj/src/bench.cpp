#include "resmpc/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "resmpc/errors.hpp"
#include "resmpc/integrator.hpp"
#include "resmpc/plant.hpp"

namespace resmpc {

void BenchSpec::Validate() const {
  if (widths.empty() || depths.empty() || modes.empty())
    throw ConfigError("bench spec: widths, depths and modes must be non-empty");
  for (int w : widths)
    if (w < 1) throw ConfigError("bench spec: widths must be positive");
  for (int d : depths)
    if (d < 1) throw ConfigError("bench spec: depths must be positive");
  if (repetitions < 10) throw ConfigError("bench spec: need at least 10 repetitions");
  if (warmup < 0 || horizon < 1 || !(dt > 0.0) || !(timeout_s > 0.0))
    throw ConfigError("bench spec: bad warmup/horizon/dt/timeout");
}

MlpModel MakeZeroNetwork(int depth, int width, int in_dim, int out_dim, std::uint64_t seed) {
  if (depth < 1 || width < 1 || in_dim < 1 || out_dim < 1)
    throw ConfigError("zero network: dimensions must be positive");
  std::vector<int> sizes;
  sizes.push_back(in_dim);
  for (int l = 0; l < depth; ++l) sizes.push_back(width);
  sizes.push_back(out_dim);
  MlpModel m = MakeMlp(sizes, Activation::kTanh, "full", seed);
  m.weights.back().setZero();
  m.biases.back().setZero();
  return m;
}

namespace {

struct DiProblem {
  Plant plant;
  OcpConfig cfg;

  ReferenceWindow Window(double t) const {
    ReferenceWindow w;
    for (int k = 0; k <= cfg.horizon; ++k) {
      const double tk = t + k * cfg.dt;
      Eigen::VectorXd x(2);
      x << 0.8 * std::sin(0.6 * tk), 0.48 * std::cos(0.6 * tk);
      w.xs.push_back(x);
      if (k < cfg.horizon)
        w.us.push_back(Eigen::VectorXd::Constant(1, -0.288 * std::sin(0.6 * tk)));
    }
    return w;
  }
};

DiProblem MakeDiProblem(int horizon, double dt) {
  DiProblem p;
  p.plant = MakeDoubleIntegratorPlant();
  p.cfg.horizon = horizon;
  p.cfg.dt = dt;
  p.cfg.q_diag = Eigen::Vector2d(100.0, 10.0);
  p.cfg.r_diag = Eigen::VectorXd::Constant(1, 1.0);
  p.cfg.u_min = Eigen::VectorXd::Constant(1, -4.0);
  p.cfg.u_max = Eigen::VectorXd::Constant(1, 4.0);
  return p;
}

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
    m = 0.5 * (m + v[mid - 1]);
  }
  return m;
}

double Percentile95(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const size_t idx = static_cast<size_t>(std::ceil(0.95 * v.size())) - 1;
  std::nth_element(v.begin(), v.begin() + idx, v.end());
  return v[idx];
}

struct RunResult {
  std::vector<double> prep_dd, prep_qp, feedback, total;
  std::vector<Eigen::VectorXd> commands;  // warmup + timed
  CycleTelemetry last_telemetry;
  bool timed_out = false;
};

RunResult RunCycles(const DiProblem& prob, std::shared_ptr<const MlpModel> net,
                    ControllerMode mode, int warmup, int reps, double timeout_s) {
  OcpConfig cfg = prob.cfg;
  cfg.mode = mode;
  RtiController ctrl(prob.plant, cfg, std::move(net));
  Eigen::VectorXd x = Eigen::Vector2d(0.0, 0.48);
  ctrl.Initialize(x, prob.Window(0.0));
  const DynFn f = prob.plant.f;

  RunResult res;
  const int cycles = warmup + reps;
  res.commands.reserve(cycles);
  for (int k = 0; k < cycles; ++k) {
    const double t = k * cfg.dt;
    const Eigen::VectorXd u = ctrl.Cycle(x, prob.Window(t));
    const CycleTelemetry& tel = ctrl.telemetry();
    res.commands.push_back(u);
    if (k >= warmup) {
      const double total = tel.prep_dd_ms + tel.prep_qp_ms + tel.feedback_ms;
      res.prep_dd.push_back(tel.prep_dd_ms);
      res.prep_qp.push_back(tel.prep_qp_ms);
      res.feedback.push_back(tel.feedback_ms);
      res.total.push_back(total);
      if (total > timeout_s * 1000.0) {
        res.timed_out = true;
        res.last_telemetry = tel;
        return res;
      }
    }
    res.last_telemetry = tel;
    x = Rk4Step(f, x, u, cfg.dt);  // model-plant match: no mismatch, no noise
  }
  return res;
}

}  // namespace

std::vector<BenchRow> RunSweep(const BenchSpec& spec) {
  spec.Validate();
  const DiProblem prob = MakeDiProblem(spec.horizon, spec.dt);

  // No-network baseline commands for the equivalence check.
  const RunResult baseline = RunCycles(prob, nullptr, ControllerMode::kRtn, spec.warmup,
                                       spec.repetitions, spec.timeout_s);

  std::vector<BenchRow> rows;
  for (int depth : spec.depths) {
    for (int width : spec.widths) {
      auto net = std::make_shared<const MlpModel>(
          MakeZeroNetwork(depth, width, prob.plant.feature_dim, prob.plant.residual_dim,
                          spec.seed + static_cast<std::uint64_t>(depth) * 1000 + width));
      for (ControllerMode mode : spec.modes) {
        const RunResult run = RunCycles(prob, net, mode, spec.warmup, spec.repetitions,
                                        spec.timeout_s);
        BenchRow row;
        row.depth = depth;
        row.width = width;
        row.params = net->ParameterCount();
        row.mode = ControllerModeTag(mode);
        row.prep_dd_ms = Median(run.prep_dd);
        row.prep_qp_ms = Median(run.prep_qp);
        row.feedback_ms = Median(run.feedback);
        row.total_ms = Median(run.total);
        row.p95_ms = Percentile95(run.total);
        row.freq_hz = row.total_ms > 0.0 ? 1000.0 / row.total_ms : 0.0;
        row.value_evals = run.last_telemetry.net_evals.value_evals;
        row.jacobian_evals = run.last_telemetry.net_evals.jacobian_evals;
        row.batched_calls = run.last_telemetry.net_evals.batched_calls;
        row.batched_points = run.last_telemetry.net_evals.batched_points;
        row.timed_out = run.timed_out;
        row.equivalence_pass = !run.timed_out;
        const size_t n_cmp = std::min(run.commands.size(), baseline.commands.size());
        for (size_t k = 0; k < n_cmp; ++k) {
          if ((run.commands[k] - baseline.commands[k]).lpNorm<Eigen::Infinity>() >= 1e-8) {
            row.equivalence_pass = false;
            break;
          }
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

void SaveBenchCsv(const std::vector<BenchRow>& rows, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (f == nullptr) throw ConfigError("bench: cannot write '" + path + "'");
  std::fprintf(f,
               "depth,width,params,mode,prep_dd_ms,prep_qp_ms,feedback_ms,total_ms,p95_ms,"
               "freq_hz,value_evals,jacobian_evals,batched_calls,batched_points,"
               "equivalence_pass,timed_out\n");
  for (const auto& r : rows) {
    std::fprintf(f, "%d,%d,%lld,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.3f,%llu,%llu,%llu,%llu,%d,%d\n",
                 r.depth, r.width, static_cast<long long>(r.params), r.mode.c_str(),
                 r.prep_dd_ms, r.prep_qp_ms, r.feedback_ms, r.total_ms, r.p95_ms, r.freq_hz,
                 static_cast<unsigned long long>(r.value_evals),
                 static_cast<unsigned long long>(r.jacobian_evals),
                 static_cast<unsigned long long>(r.batched_calls),
                 static_cast<unsigned long long>(r.batched_points),
                 r.equivalence_pass ? 1 : 0, r.timed_out ? 1 : 0);
  }
  std::fclose(f);
}

}  // namespace resmpc
