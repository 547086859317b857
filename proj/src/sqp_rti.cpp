#include "resmpc/sqp_rti.hpp"

#include <chrono>
#include <stdexcept>

#include "resmpc/errors.hpp"

namespace resmpc {

namespace {
using Clock = std::chrono::steady_clock;
double MsSince(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}
}  // namespace

ControllerMode ParseControllerMode(const std::string& tag) {
  if (tag == "rtn") return ControllerMode::kRtn;
  if (tag == "naive") return ControllerMode::kNaive;
  throw ConfigError("unknown controller mode '" + tag + "' (expected rtn or naive)");
}

std::string ControllerModeTag(ControllerMode m) {
  return m == ControllerMode::kRtn ? "rtn" : "naive";
}

void OcpConfig::Validate(int nx, int nu) const {
  if (horizon < 1) throw ConfigError("ocp config: horizon must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("ocp config: dt must be positive");
  if (q_diag.size() != nx || r_diag.size() != nu)
    throw ConfigError("ocp config: weight dimensions do not match the plant");
  if (q_terminal.size() != 0 && q_terminal.size() != nx)
    throw ConfigError("ocp config: terminal weight dimension mismatch");
  if (q_diag.minCoeff() < 0.0 || r_diag.minCoeff() < 0.0)
    throw ConfigError("ocp config: weights must be nonnegative");
  if (u_min.size() != nu || u_max.size() != nu)
    throw ConfigError("ocp config: input bound dimensions do not match the plant");
  if ((u_min.array() >= u_max.array()).any())
    throw ConfigError("ocp config: u_min must be below u_max");
  if (taylor_order != 1 && taylor_order != 2)
    throw ConfigError("ocp config: taylor_order must be 1 or 2");
}

Iterate InitIterate(const Plant& plant, const OcpConfig& cfg, const Eigen::VectorXd& x0,
                    const ReferenceWindow& refs) {
  if (static_cast<int>(refs.xs.size()) != cfg.horizon + 1 ||
      static_cast<int>(refs.us.size()) != cfg.horizon)
    throw ConfigError("init iterate: reference window size mismatch");
  if (x0.size() != plant.nx) throw ConfigError("init iterate: bad x0 dimension");
  Iterate it;
  it.xs = refs.xs;
  it.xs[0] = x0;
  it.us.reserve(cfg.horizon);
  for (int k = 0; k < cfg.horizon; ++k) it.us.push_back(plant.steady_input(refs.xs[k]));
  return it;
}

QpData BuildQp(const Plant& plant, const OcpConfig& cfg, const Iterate& it,
               const ReferenceWindow& refs, const std::vector<TaylorApprox>* approxes,
               const InlineNet* naive_net, EvalCounters* net_counters,
               FevalCounter* f_counters) {
  cfg.Validate(plant.nx, plant.nu);
  const int n = cfg.horizon;
  if (static_cast<int>(it.xs.size()) != n + 1 || static_cast<int>(it.us.size()) != n)
    throw ConfigError("build qp: iterate size mismatch");
  if (static_cast<int>(refs.xs.size()) != n + 1 || static_cast<int>(refs.us.size()) != n)
    throw ConfigError("build qp: reference window size mismatch");
  const bool has_residual = approxes != nullptr || naive_net != nullptr;
  if (cfg.mode == ControllerMode::kRtn && naive_net != nullptr)
    throw ConfigError("build qp: rtn mode takes prepared approximations, not a network");
  if (approxes != nullptr && static_cast<int>(approxes->size()) != n)
    throw ConfigError("build qp: need one prepared approximation per shooting node");

  QpData qp;
  qp.nx = plant.nx;
  qp.nu = plant.nu;
  qp.horizon = n;
  qp.a.resize(n);
  qp.b.resize(n);
  qp.phi_res.resize(n);
  qp.q.resize(n + 1);
  qp.r.resize(n);
  qp.hx_diag.resize(n + 1);
  qp.hu_diag.resize(n);
  qp.du_lb.resize(n);
  qp.du_ub.resize(n);

  for (int k = 0; k < n; ++k) {
    DynFn fk;
    DynJacFn dfk;
    if (!has_residual) {
      fk = plant.f;
      dfk = plant.df;
    } else {
      const Eigen::VectorXd aux = plant.NodeAux(it.xs[k]);
      if (approxes != nullptr) {
        const TaylorApprox* node_approx = &(*approxes)[k];
        fk = [&plant, node_approx, aux](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
          Eigen::VectorXd f = plant.f(x, u);
          f.noalias() += plant.embed * EvalTaylor(*node_approx, plant.features(x, u, aux));
          return f;
        };
        dfk = [&plant, node_approx, aux](const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                         Eigen::MatrixXd& fx, Eigen::MatrixXd& fu) {
          plant.df(x, u, fx, fu);
          const Eigen::MatrixXd jn =
              EvalTaylorJacobian(*node_approx, plant.features(x, u, aux));
          const Eigen::MatrixXd jz = plant.features_jac(x, u);
          const Eigen::MatrixXd chain = plant.embed * jn;
          fx.noalias() += chain * jz.leftCols(plant.nx);
          fu.noalias() += chain * jz.rightCols(plant.nu);
        };
      } else {
        fk = [&plant, naive_net, net_counters, aux](const Eigen::VectorXd& x,
                                                    const Eigen::VectorXd& u) {
          Eigen::VectorXd f = plant.f(x, u);
          f.noalias() += plant.embed * naive_net->Value(plant.features(x, u, aux), net_counters);
          return f;
        };
        dfk = [&plant, naive_net, net_counters, aux](const Eigen::VectorXd& x,
                                                     const Eigen::VectorXd& u,
                                                     Eigen::MatrixXd& fx, Eigen::MatrixXd& fu) {
          plant.df(x, u, fx, fu);
          const Eigen::MatrixXd jn =
              naive_net->Jacobian(plant.features(x, u, aux), net_counters);
          const Eigen::MatrixXd jz = plant.features_jac(x, u);
          const Eigen::MatrixXd chain = plant.embed * jn;
          fx.noalias() += chain * jz.leftCols(plant.nx);
          fu.noalias() += chain * jz.rightCols(plant.nu);
        };
      }
    }

    SensitivityResult sens;
    try {
      sens = Rk4Sensitivities(fk, dfk, it.xs[k], it.us[k], cfg.dt, plant.quat_row, f_counters);
    } catch (const std::exception& e) {
      throw std::runtime_error("build qp: node " + std::to_string(k) + ": " + e.what());
    }
    qp.a[k] = std::move(sens.a);
    qp.b[k] = std::move(sens.b);
    qp.phi_res[k] = sens.phi_bar - it.xs[k + 1];

    qp.q[k] = 2.0 * cfg.q_diag.cwiseProduct(it.xs[k] - refs.xs[k]);
    qp.r[k] = 2.0 * cfg.r_diag.cwiseProduct(it.us[k] - refs.us[k]);
    qp.hx_diag[k] = 2.0 * cfg.q_diag;
    qp.hu_diag[k] = 2.0 * cfg.r_diag;
    qp.du_lb[k] = cfg.u_min - it.us[k];
    qp.du_ub[k] = cfg.u_max - it.us[k];
  }
  const Eigen::VectorXd qf = cfg.TerminalWeight();
  qp.q[n] = 2.0 * qf.cwiseProduct(it.xs[n] - refs.xs[n]);
  qp.hx_diag[n] = 2.0 * qf;
  return qp;
}

FeedbackResult SolveFeedback(const QpData& qp, const Eigen::VectorXd& x_measured,
                             const Iterate& it, std::vector<std::int8_t>* warm_active) {
  if (!x_measured.allFinite())
    throw std::runtime_error("feedback: non-finite measured state");
  const Eigen::VectorXd dx0 = x_measured - it.xs[0];
  const CondensedQp cqp = Condense(qp, dx0);
  const BoxQpResult sol =
      SolveBoxQp(cqp, warm_active != nullptr && !warm_active->empty() ? warm_active : nullptr);
  if (warm_active != nullptr) *warm_active = sol.active;

  FeedbackResult fb;
  fb.qp_iterations = sol.iterations;
  fb.regularized = sol.regularized;
  fb.status = sol.status;
  fb.dxs.resize(qp.horizon + 1);
  for (int k = 0; k <= qp.horizon; ++k)
    fb.dxs[k] = cqp.recover_m[k] * sol.x + cqp.recover_c[k];
  fb.dus.resize(qp.horizon);
  for (int k = 0; k < qp.horizon; ++k) fb.dus[k] = sol.x.segment(k * qp.nu, qp.nu);
  fb.u_command = it.us[0] + fb.dus[0];
  if (!sol.x.allFinite() || !fb.u_command.allFinite())
    throw std::runtime_error("feedback: non-finite QP solution");
  return fb;
}

RtiController::RtiController(Plant plant, OcpConfig cfg, std::shared_ptr<const MlpModel> residual)
    : plant_(std::move(plant)), cfg_(std::move(cfg)), net_(std::move(residual)) {
  cfg_.Validate(plant_.nx, plant_.nu);
  if (net_ != nullptr) {
    net_->Validate();
    if (net_->input_variant != plant_.variant_tag)
      throw ConfigError("controller: model was trained on variant '" + net_->input_variant +
                        "' but the plant is configured for '" + plant_.variant_tag + "'");
    if (net_->input_dim() != plant_.feature_dim || net_->output_dim() != plant_.residual_dim)
      throw ConfigError("controller: model dimensions do not match the plant's residual wiring");
    if (cfg_.mode == ControllerMode::kNaive) inline_net_.emplace(*net_);
  }
  last_command_ = Eigen::VectorXd::Zero(plant_.nu);
}

void RtiController::Initialize(const Eigen::VectorXd& x0, const ReferenceWindow& refs) {
  iterate_ = InitIterate(plant_, cfg_, x0, refs);
  last_command_ = iterate_.us[0];
  warm_active_.clear();
  initialized_ = true;
  cycle_count_ = 0;
}

void RtiController::ResetCounters() {
  net_counts_ = EvalCounters{};
  f_counts_ = FevalCounter{};
}

Eigen::VectorXd RtiController::Cycle(const Eigen::VectorXd& x_measured,
                                     const ReferenceWindow& refs) {
  if (!initialized_) throw std::logic_error("controller: Cycle before Initialize");
  const int n = cfg_.horizon;
  telem_ = CycleTelemetry{};
  telem_.cycle = cycle_count_++;
  const EvalCounters net_before = net_counts_;
  const FevalCounter f_before = f_counts_;

  // Data-driven dynamics preparation: one batched call over all nodes.
  auto t0 = Clock::now();
  std::vector<TaylorApprox> approxes;
  if (net_ != nullptr && cfg_.mode == ControllerMode::kRtn) {
    Eigen::MatrixXd z(n, plant_.feature_dim);
    for (int k = 0; k < n; ++k)
      z.row(k) =
          plant_.features(iterate_.xs[k], iterate_.us[k], plant_.NodeAux(iterate_.xs[k]));
    approxes = PrepareNodes(*net_, z, cfg_.taylor_order, &net_counts_);
  }
  telem_.prep_dd_ms = MsSince(t0);

  // QP preparation.
  t0 = Clock::now();
  bool ok = true;
  QpData qp;
  try {
    qp = BuildQp(plant_, cfg_, iterate_, refs,
                 net_ != nullptr && cfg_.mode == ControllerMode::kRtn ? &approxes : nullptr,
                 net_ != nullptr && cfg_.mode == ControllerMode::kNaive ? &*inline_net_ : nullptr,
                 &net_counts_, &f_counts_);
  } catch (const std::exception&) {
    ok = false;
  }
  telem_.prep_qp_ms = MsSince(t0);

  // Feedback response.
  t0 = Clock::now();
  if (ok) {
    FeedbackResult fb;
    try {
      fb = SolveFeedback(qp, x_measured, iterate_, &warm_active_);
      ok = fb.status == QpStatus::kOptimal;
    } catch (const std::exception&) {
      ok = false;
    }
    if (ok) {
      telem_.qp_iterations = fb.qp_iterations;
      for (int k = 0; k <= n; ++k) {
        iterate_.xs[k] += fb.dxs[k];
        if (plant_.quat_row >= 0) iterate_.xs[k].segment<4>(plant_.quat_row).normalize();
      }
      for (int k = 0; k < n; ++k) iterate_.us[k] += fb.dus[k];
      last_command_ = iterate_.us[0];
      // shift-and-duplicate-last warm start for the next cycle
      for (int k = 0; k < n; ++k) iterate_.xs[k] = iterate_.xs[k + 1];
      for (int k = 0; k + 1 < n; ++k) iterate_.us[k] = iterate_.us[k + 1];
    }
  }
  telem_.feedback_ms = MsSince(t0);

  telem_.ok = ok;
  telem_.command = last_command_;
  telem_.net_evals.value_evals = net_counts_.value_evals - net_before.value_evals;
  telem_.net_evals.jacobian_evals = net_counts_.jacobian_evals - net_before.jacobian_evals;
  telem_.net_evals.hessian_evals = net_counts_.hessian_evals - net_before.hessian_evals;
  telem_.net_evals.batched_calls = net_counts_.batched_calls - net_before.batched_calls;
  telem_.net_evals.batched_points = net_counts_.batched_points - net_before.batched_points;
  telem_.f_evals.values = f_counts_.values - f_before.values;
  telem_.f_evals.jacobians = f_counts_.jacobians - f_before.jacobians;
  return last_command_;
}

}  // namespace resmpc
