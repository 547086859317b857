#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "resmpc/dynamics.hpp"
#include "resmpc/neural.hpp"
#include "resmpc/sqp_rti.hpp"

namespace resmpc {

// Simplified closed-loop simulation: ideal thrust tracking and perfect
// odometry, linear body-frame drag, plus two noise sources. "episode" noise
// mode samples one constant force/torque offset per run; "step" mode
// resamples it every control step. Motor noise is zero mean with standard
// deviation motor_noise_coeff·√u, drawn once per control step.
struct SimConfig {
  Eigen::Vector3d drag_coeff = {0.3, 0.3, 0.15};  // 1/s, body frame
  double noise_ft_sigma = 0.005;   // force/torque noise, normalized by m·g (and arm length)
  double motor_noise_coeff = 0.02; // thrust noise gain, N per √N
  bool per_step_noise = false;     // false: per-episode constant offset
  Eigen::Vector3d const_accel_disturbance = Eigen::Vector3d::Zero();  // test hook, m/s²
  double sim_dt = 1e-3;            // inner integration step
  double control_rate_hz = 100.0;  // controller invocations per simulated second
  std::uint64_t seed = 0;

  void Validate() const;
};

struct Trajectory {
  enum class Kind { kCircle, kLemniscate };
  Kind kind = Kind::kCircle;
  double scale = 5.0;      // circle radius / lemniscate half-width, m
  double speed = 2.0;      // lap-average speed after ramp-in, m/s
  double duration = 20.0;  // s
  double z0 = 1.5;         // flight altitude, m
  double ramp_time = 3.0;  // smooth speed ramp-in, s

  void Validate() const;
  static Kind ParseKind(const std::string& tag);
};

// Turns a trajectory into consistent state/input references: the path is
// paced at a constant parameter rate (scaled by the ramp-in) tuned so the
// lap-average speed equals `speed`; attitude and body rates follow from the
// required acceleration with yaw held at zero; the input reference is hover.
class ReferenceGenerator {
 public:
  ReferenceGenerator(const Trajectory& traj, const QuadParams& params);

  // state (13) and input (4) references; t must lie in [0, duration].
  std::pair<Eigen::VectorXd, Eigen::VectorXd> At(double t) const;

  // Reference window for a cycle starting at t; samples t + k·dt, clamped to
  // the trajectory end.
  ReferenceWindow Window(double t, int horizon, double dt) const;

  double lap_length() const { return lap_length_; }

 private:
  Eigen::Vector3d Pos(double theta) const;
  double ThetaAt(double t) const;
  std::pair<Eigen::VectorXd, Eigen::VectorXd> Eval(double t) const;

  Trajectory traj_;
  double hover_thrust_ = 0.0;
  double omega_rate_ = 0.0;  // parameter rate after ramp
  double lap_length_ = 0.0;
};

class QuadSim {
 public:
  QuadSim(const QuadParams& params, const SimConfig& cfg);

  // Samples the episode noise; call once per run.
  void Reset(std::uint64_t seed);

  // Advances one control period (sub-stepped at sim_dt) under command u_cmd.
  Eigen::VectorXd Step(const Eigen::VectorXd& x, const Eigen::VectorXd& u_cmd, double dt_ctrl);

  const SimConfig& config() const { return cfg_; }

 private:
  Eigen::VectorXd Derivative(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;

  QuadParams params_;
  SimConfig cfg_;
  std::mt19937_64 rng_;
  Eigen::Vector3d accel_noise_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d torque_noise_ = Eigen::Vector3d::Zero();
};

struct FlightLogRow {
  double t = 0.0;
  Eigen::VectorXd state;      // 13
  Eigen::VectorXd command;    // 4
  Eigen::VectorXd reference;  // 13
  double prep_dd_ms = 0.0, prep_qp_ms = 0.0, feedback_ms = 0.0;
  int qp_iterations = 0;
  int ok = 1;
  std::uint64_t value_evals = 0, jacobian_evals = 0, batched_calls = 0, batched_points = 0;
};

struct FlightLog {
  std::vector<FlightLogRow> rows;
  bool failed = false;     // run truncated by a controller failure or crash
  std::string note;        // provenance flags (noise mode, seed, trajectory)

  void SaveCsv(const std::string& path) const;
  static FlightLog LoadCsv(const std::string& path);
};

// Alternates controller cycles and simulation steps in simulated time.
FlightLog RunClosedLoop(RtiController& controller, QuadSim& sim, const ReferenceGenerator& refs,
                        double duration, std::uint64_t seed);

// Residual labels from logged transitions: label_k = ((x_{k+1} − x̂_{k+1})/dt)
// restricted to the variant's output rows, with x̂ the nominal RK4 prediction.
ResidualDataset CollectAndLabel(const std::vector<FlightLog>& logs, ResidualVariant variant,
                                const QuadParams& params);

struct TrackingError {
  double mean = 0.0;
  std::vector<double> series;  // per retained sample
};

// Mean Euclidean position error, ramp-in samples excluded.
TrackingError ComputeTrackingError(const FlightLog& log, double ramp_exclude_s);

}  // namespace resmpc
