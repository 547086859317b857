#include "resmpc/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "resmpc/errors.hpp"
#include "resmpc/integrator.hpp"
#include "resmpc/quat.hpp"

namespace resmpc {

void SimConfig::Validate() const {
  if (!(sim_dt > 0.0) || !(control_rate_hz > 0.0))
    throw ConfigError("sim config: sim_dt and control_rate_hz must be positive");
  if (sim_dt > 1.0 / control_rate_hz + 1e-12)
    throw ConfigError("sim config: sim_dt must not exceed the control period");
  if (noise_ft_sigma < 0.0 || motor_noise_coeff < 0.0 || drag_coeff.minCoeff() < 0.0)
    throw ConfigError("sim config: noise and drag coefficients must be nonnegative");
}

void Trajectory::Validate() const {
  if (!(speed > 0.0)) throw ConfigError("trajectory: speed must be positive");
  if (!(scale > 0.0)) throw ConfigError("trajectory: scale must be positive");
  if (!(duration > 0.0) || ramp_time < 0.0)
    throw ConfigError("trajectory: bad duration or ramp time");
}

Trajectory::Kind Trajectory::ParseKind(const std::string& tag) {
  if (tag == "circle") return Kind::kCircle;
  if (tag == "lemniscate") return Kind::kLemniscate;
  throw ConfigError("unknown trajectory '" + tag + "' (expected circle or lemniscate)");
}

// ---------------------------------------------------------------------------
// References

namespace {

// Smoothstep ramp r(s) = 3s² − 2s³ and its integral; C¹ at both ends.
double Ramp(double t, double ramp_time) {
  if (ramp_time <= 0.0 || t >= ramp_time) return 1.0;
  const double s = std::max(0.0, t / ramp_time);
  return s * s * (3.0 - 2.0 * s);
}

double RampIntegral(double t, double ramp_time) {
  if (ramp_time <= 0.0) return std::max(0.0, t);
  if (t <= 0.0) return 0.0;
  if (t >= ramp_time) return 0.5 * ramp_time + (t - ramp_time);
  const double s = t / ramp_time;
  return ramp_time * (s * s * s - 0.5 * s * s * s * s);
}

double RampDerivative(double t, double ramp_time) {
  if (ramp_time <= 0.0 || t <= 0.0 || t >= ramp_time) return 0.0;
  const double s = t / ramp_time;
  return (6.0 * s - 6.0 * s * s) / ramp_time;
}

}  // namespace

ReferenceGenerator::ReferenceGenerator(const Trajectory& traj, const QuadParams& params)
    : traj_(traj) {
  traj_.Validate();
  params.Validate();
  hover_thrust_ = params.HoverThrustPerRotor();

  // Lap arc length by composite Simpson quadrature of |dp/dθ|.
  const int n = 20000;
  const double h = 2.0 * M_PI / n;
  auto speed_at = [this](double th) {
    const double eps = 1e-6;
    return ((Pos(th + eps) - Pos(th - eps)) / (2.0 * eps)).norm();
  };
  double sum = speed_at(0.0) + speed_at(2.0 * M_PI);
  for (int i = 1; i < n; ++i) sum += speed_at(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  lap_length_ = sum * h / 3.0;
  omega_rate_ = 2.0 * M_PI * traj_.speed / lap_length_;
}

Eigen::Vector3d ReferenceGenerator::Pos(double theta) const {
  const double a = traj_.scale;
  if (traj_.kind == Trajectory::Kind::kCircle)
    return {a * std::cos(theta), a * std::sin(theta), traj_.z0};
  const double s = std::sin(theta), c = std::cos(theta);
  const double d = 1.0 + s * s;
  return {a * c / d, a * s * c / d, traj_.z0};
}

double ReferenceGenerator::ThetaAt(double t) const {
  return omega_rate_ * RampIntegral(t, traj_.ramp_time);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> ReferenceGenerator::Eval(double t) const {
  const double theta = ThetaAt(t);
  const double theta_dot = omega_rate_ * Ramp(t, traj_.ramp_time);
  const double theta_ddot = omega_rate_ * RampDerivative(t, traj_.ramp_time);

  const double h = 1e-5;
  const Eigen::Vector3d p = Pos(theta);
  const Eigen::Vector3d dp = (Pos(theta + h) - Pos(theta - h)) / (2.0 * h);
  const Eigen::Vector3d ddp = (Pos(theta + h) - 2.0 * p + Pos(theta - h)) / (h * h);

  const Eigen::Vector3d vel = dp * theta_dot;
  const Eigen::Vector3d acc = ddp * theta_dot * theta_dot + dp * theta_ddot;

  // attitude from the required thrust direction, yaw held at zero
  const Eigen::Vector3d thrust_dir = acc + Eigen::Vector3d(0.0, 0.0, kGravity);
  const Eigen::Vector3d z_b = thrust_dir.normalized();
  const Eigen::Vector3d x_c(1.0, 0.0, 0.0);
  Eigen::Vector3d y_b = z_b.cross(x_c);
  y_b.normalize();
  const Eigen::Vector3d x_b = y_b.cross(z_b);
  Eigen::Matrix3d r;
  r.col(0) = x_b;
  r.col(1) = y_b;
  r.col(2) = z_b;

  Eigen::VectorXd x(kQuadNx);
  x.segment<3>(0) = p;
  x.segment<4>(kQuatRow) = RotToQuat(r);
  x.segment<3>(kVelRow) = vel;
  x.segment<3>(kOmegaRow).setZero();  // filled by the caller via attitude differencing
  Eigen::VectorXd u = Eigen::VectorXd::Constant(kQuadNu, hover_thrust_);
  return {x, u};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> ReferenceGenerator::At(double t) const {
  if (t < 0.0 || t > traj_.duration)
    throw InputDomainError("reference: t outside [0, duration]");
  auto [x, u] = Eval(t);
  // body rates from attitude differencing: ω = 2 (q* ⊗ q̇)_vec
  const double h = 5e-4;
  const double t0 = std::max(0.0, t - h);
  const double t1 = std::min(traj_.duration, t + h);
  Eigen::Vector4d q0 = Eval(t0).first.segment<4>(kQuatRow);
  Eigen::Vector4d q1 = Eval(t1).first.segment<4>(kQuatRow);
  const Eigen::Vector4d q = x.segment<4>(kQuatRow);
  if (q0.dot(q) < 0.0) q0 = -q0;
  if (q1.dot(q) < 0.0) q1 = -q1;
  const Eigen::Vector4d q_dot = (q1 - q0) / (t1 - t0);
  const Eigen::Vector4d w_quat = QuatMul(QuatConjugate(q), q_dot);
  x.segment<3>(kOmegaRow) = 2.0 * w_quat.tail<3>();
  return {x, u};
}

ReferenceWindow ReferenceGenerator::Window(double t, int horizon, double dt) const {
  ReferenceWindow w;
  w.xs.reserve(horizon + 1);
  w.us.reserve(horizon);
  for (int k = 0; k <= horizon; ++k) {
    const double tk = std::clamp(t + k * dt, 0.0, traj_.duration);
    auto [x, u] = At(tk);
    w.xs.push_back(std::move(x));
    if (k < horizon) w.us.push_back(std::move(u));
  }
  return w;
}

// ---------------------------------------------------------------------------
// Simulator

QuadSim::QuadSim(const QuadParams& params, const SimConfig& cfg) : params_(params), cfg_(cfg) {
  params_.Validate();
  cfg_.Validate();
  Reset(cfg_.seed);
}

void QuadSim::Reset(std::uint64_t seed) {
  rng_.seed(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  const double f_sigma = cfg_.noise_ft_sigma * params_.mass * kGravity;
  const double t_sigma = cfg_.noise_ft_sigma * params_.mass * kGravity * params_.arm_length;
  for (int i = 0; i < 3; ++i) accel_noise_[i] = dist(rng_) * f_sigma / params_.mass;
  for (int i = 0; i < 3; ++i) torque_noise_[i] = dist(rng_) * t_sigma;
}

Eigen::VectorXd QuadSim::Derivative(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  Eigen::VectorXd f = QuadNominalDynamics(x, u, params_);
  const Eigen::Vector4d q = x.segment<4>(kQuatRow);
  const Eigen::Vector3d v_b = QuatRotateInv(q, x.segment<3>(kVelRow));
  const Eigen::Vector3d drag_acc_w = -QuatRotate(q, cfg_.drag_coeff.cwiseProduct(v_b));
  f.segment<3>(kVelRow) += drag_acc_w + accel_noise_ + cfg_.const_accel_disturbance;
  f.segment<3>(kOmegaRow) += torque_noise_.cwiseQuotient(params_.inertia);
  return f;
}

Eigen::VectorXd QuadSim::Step(const Eigen::VectorXd& x, const Eigen::VectorXd& u_cmd,
                              double dt_ctrl) {
  std::normal_distribution<double> dist(0.0, 1.0);
  if (cfg_.per_step_noise) {
    const double f_sigma = cfg_.noise_ft_sigma * params_.mass * kGravity;
    const double t_sigma = f_sigma * params_.arm_length;
    for (int i = 0; i < 3; ++i) accel_noise_[i] = dist(rng_) * f_sigma / params_.mass;
    for (int i = 0; i < 3; ++i) torque_noise_[i] = dist(rng_) * t_sigma;
  }
  Eigen::VectorXd u = u_cmd;
  for (int i = 0; i < u.size(); ++i) {
    const double sigma = cfg_.motor_noise_coeff * std::sqrt(std::max(0.0, u_cmd[i]));
    u[i] = std::clamp(u_cmd[i] + sigma * dist(rng_), 0.0, params_.thrust_max);
  }
  const DynFn f = [this](const Eigen::VectorXd& xs, const Eigen::VectorXd& us) {
    return Derivative(xs, us);
  };
  const int substeps = std::max(1, static_cast<int>(std::lround(dt_ctrl / cfg_.sim_dt)));
  const double h = dt_ctrl / substeps;
  Eigen::VectorXd state = x;
  for (int s = 0; s < substeps; ++s) state = Rk4Step(f, state, u, h, kQuatRow);
  return state;
}

// ---------------------------------------------------------------------------
// Closed loop

FlightLog RunClosedLoop(RtiController& controller, QuadSim& sim, const ReferenceGenerator& refs,
                        double duration, std::uint64_t seed) {
  const OcpConfig& cfg = controller.config();
  const double period = 1.0 / sim.config().control_rate_hz;
  const int steps = static_cast<int>(std::floor(duration / period));

  sim.Reset(seed);
  Eigen::VectorXd x = refs.At(0.0).first;
  controller.Initialize(x, refs.Window(0.0, cfg.horizon, cfg.dt));

  FlightLog log;
  log.rows.reserve(steps);
  for (int k = 0; k < steps; ++k) {
    const double t = k * period;
    Eigen::VectorXd u;
    try {
      u = controller.Cycle(x, refs.Window(t, cfg.horizon, cfg.dt));
    } catch (const std::exception&) {
      log.failed = true;
      break;
    }
    const CycleTelemetry& tel = controller.telemetry();
    FlightLogRow row;
    row.t = t;
    row.state = x;
    row.command = u;
    row.reference = refs.At(t).first;
    row.prep_dd_ms = tel.prep_dd_ms;
    row.prep_qp_ms = tel.prep_qp_ms;
    row.feedback_ms = tel.feedback_ms;
    row.qp_iterations = tel.qp_iterations;
    row.ok = tel.ok ? 1 : 0;
    row.value_evals = tel.net_evals.value_evals;
    row.jacobian_evals = tel.net_evals.jacobian_evals;
    row.batched_calls = tel.net_evals.batched_calls;
    row.batched_points = tel.net_evals.batched_points;
    log.rows.push_back(std::move(row));

    try {
      x = sim.Step(x, u, period);
    } catch (const std::exception&) {
      log.failed = true;  // vehicle left the integrable envelope (tumble)
      break;
    }
    if (!x.allFinite() ||
        (x.head<3>() - log.rows.back().reference.head<3>()).norm() > 50.0) {
      log.failed = true;  // diverged from the reference beyond recovery
      break;
    }
  }
  return log;
}

// ---------------------------------------------------------------------------
// Labeling and metrics

ResidualDataset CollectAndLabel(const std::vector<FlightLog>& logs, ResidualVariant variant,
                                const QuadParams& params) {
  if (variant == ResidualVariant::kGround)
    throw UnsupportedError("labeling: ground variant is not supported by log labeling");
  const auto rows = ResidualOutputRows(variant);
  std::vector<Eigen::VectorXd> features, labels;
  const DynFn f = [&params](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    return QuadNominalDynamics(x, u, params);
  };
  // Transitions outside the identification envelope (tumbles during an
  // unstable run) are dropped rather than labeled.
  constexpr double kOmegaEnvelope = 20.0;  // rad/s
  for (const auto& log : logs) {
    for (size_t k = 0; k + 1 < log.rows.size(); ++k) {
      const FlightLogRow& cur = log.rows[k];
      const FlightLogRow& nxt = log.rows[k + 1];
      const double dt = nxt.t - cur.t;
      if (k + 2 < log.rows.size()) {
        const double dt2 = log.rows[k + 2].t - nxt.t;
        if (std::abs(dt2 - dt) > 1e-9)
          throw ConfigError("labeling: non-uniform timestamps in flight log");
      }
      if (cur.state.segment<3>(kOmegaRow).norm() > kOmegaEnvelope ||
          nxt.state.segment<3>(kOmegaRow).norm() > kOmegaEnvelope)
        continue;
      const Eigen::VectorXd pred = Rk4Step(f, cur.state, cur.command, dt, kQuatRow);
      const Eigen::VectorXd err = (nxt.state - pred) / dt;
      Eigen::VectorXd label(rows.size());
      for (size_t i = 0; i < rows.size(); ++i) label[static_cast<int>(i)] = err[rows[i]];
      features.push_back(ResidualInput(cur.state, cur.command, variant));
      labels.push_back(std::move(label));
    }
  }
  if (features.empty()) throw ConfigError("labeling: no transitions in the provided logs");
  ResidualDataset d;
  d.variant = ResidualVariantTag(variant);
  d.inputs.resize(features.size(), features[0].size());
  d.labels.resize(labels.size(), labels[0].size());
  for (size_t i = 0; i < features.size(); ++i) {
    d.inputs.row(static_cast<int>(i)) = features[i].transpose();
    d.labels.row(static_cast<int>(i)) = labels[i].transpose();
  }
  return d;
}

TrackingError ComputeTrackingError(const FlightLog& log, double ramp_exclude_s) {
  if (log.rows.empty()) throw ConfigError("tracking error: empty log");
  TrackingError e;
  double sum = 0.0;
  for (const auto& row : log.rows) {
    if (row.t < ramp_exclude_s) continue;
    const double d = (row.state.head<3>() - row.reference.head<3>()).norm();
    e.series.push_back(d);
    sum += d;
  }
  if (e.series.empty()) throw ConfigError("tracking error: no samples past the ramp-in");
  e.mean = sum / static_cast<double>(e.series.size());
  return e;
}

// ---------------------------------------------------------------------------
// Flight log CSV

namespace {
constexpr const char* kLogHeader =
    "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,u0,u1,u2,u3,"
    "ref_px,ref_py,ref_pz,ref_qw,ref_qx,ref_qy,ref_qz,ref_vx,ref_vy,ref_vz,ref_wx,ref_wy,"
    "ref_wz,prep_dd_ms,prep_qp_ms,feedback_ms,qp_iters,ok,value_evals,jacobian_evals,"
    "batched_calls,batched_points";
}  // namespace

void FlightLog::SaveCsv(const std::string& path) const {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (f == nullptr) throw ConfigError("flight log: cannot write '" + path + "'");
  if (!note.empty()) std::fprintf(f, "# %s\n", note.c_str());
  if (failed) std::fprintf(f, "# run failed: log truncated\n");
  std::fprintf(f, "%s\n", kLogHeader);
  for (const auto& r : rows) {
    std::fprintf(f, "%.17g", r.t);
    for (int i = 0; i < r.state.size(); ++i) std::fprintf(f, ",%.17g", r.state[i]);
    for (int i = 0; i < r.command.size(); ++i) std::fprintf(f, ",%.17g", r.command[i]);
    for (int i = 0; i < r.reference.size(); ++i) std::fprintf(f, ",%.17g", r.reference[i]);
    std::fprintf(f, ",%.6f,%.6f,%.6f,%d,%d,%llu,%llu,%llu,%llu\n", r.prep_dd_ms, r.prep_qp_ms,
                 r.feedback_ms, r.qp_iterations, r.ok,
                 static_cast<unsigned long long>(r.value_evals),
                 static_cast<unsigned long long>(r.jacobian_evals),
                 static_cast<unsigned long long>(r.batched_calls),
                 static_cast<unsigned long long>(r.batched_points));
  }
  std::fclose(f);
}

FlightLog FlightLog::LoadCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("flight log: cannot open '" + path + "'");
  FlightLog log;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find("run failed") != std::string::npos) log.failed = true;
      else if (log.note.empty()) log.note = line.substr(line.find_first_not_of("# "));
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    FlightLogRow r;
    r.state.resize(kQuadNx);
    r.command.resize(kQuadNu);
    r.reference.resize(kQuadNx);
    ls >> r.t;
    for (int i = 0; i < kQuadNx; ++i) ls >> r.state[i];
    for (int i = 0; i < kQuadNu; ++i) ls >> r.command[i];
    for (int i = 0; i < kQuadNx; ++i) ls >> r.reference[i];
    ls >> r.prep_dd_ms >> r.prep_qp_ms >> r.feedback_ms >> r.qp_iterations >> r.ok >>
        r.value_evals >> r.jacobian_evals >> r.batched_calls >> r.batched_points;
    if (!ls) throw ConfigError("flight log: malformed row in '" + path + "'");
    log.rows.push_back(std::move(r));
  }
  return log;
}

}  // namespace resmpc
