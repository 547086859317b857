#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "resmpc/inline_net.hpp"
#include "resmpc/neural.hpp"
#include "resmpc/plant.hpp"
#include "resmpc/qp.hpp"
#include "resmpc/taylor.hpp"

namespace resmpc {

enum class ControllerMode { kRtn, kNaive };

ControllerMode ParseControllerMode(const std::string& tag);
std::string ControllerModeTag(ControllerMode m);

struct OcpConfig {
  int horizon = 10;
  double dt = 0.1;
  Eigen::VectorXd q_diag;      // nx
  Eigen::VectorXd r_diag;      // nu
  Eigen::VectorXd q_terminal;  // nx; empty picks q_diag
  Eigen::VectorXd u_min, u_max;
  ControllerMode mode = ControllerMode::kRtn;
  int taylor_order = 1;

  void Validate(int nx, int nu) const;
  Eigen::VectorXd TerminalWeight() const { return q_terminal.size() ? q_terminal : q_diag; }
};

// N+1 state references and N input references for the current window.
struct ReferenceWindow {
  std::vector<Eigen::VectorXd> xs;
  std::vector<Eigen::VectorXd> us;
};

// SQP iterate over the horizon, terminal state included.
struct Iterate {
  std::vector<Eigen::VectorXd> xs;  // N+1
  std::vector<Eigen::VectorXd> us;  // N
};

// States copied from the reference window (head replaced by x0), steady-state
// inputs everywhere.
Iterate InitIterate(const Plant& plant, const OcpConfig& cfg, const Eigen::VectorXd& x0,
                    const ReferenceWindow& refs);

// Linearizes the horizon into QP blocks. In rtn mode the residual enters only
// through `approxes`; in naive mode the network value and Jacobian are
// evaluated inside every RK4 stage via `naive_net`.
QpData BuildQp(const Plant& plant, const OcpConfig& cfg, const Iterate& it,
               const ReferenceWindow& refs, const std::vector<TaylorApprox>* approxes,
               const InlineNet* naive_net, EvalCounters* net_counters = nullptr,
               FevalCounter* f_counters = nullptr);

struct FeedbackResult {
  std::vector<Eigen::VectorXd> dxs;  // N+1
  std::vector<Eigen::VectorXd> dus;  // N
  Eigen::VectorXd u_command;         // iterate head input plus its step
  int qp_iterations = 0;
  bool regularized = false;
  QpStatus status = QpStatus::kOptimal;
};

FeedbackResult SolveFeedback(const QpData& qp, const Eigen::VectorXd& x_measured,
                             const Iterate& it, std::vector<std::int8_t>* warm_active = nullptr);

struct CycleTelemetry {
  std::int64_t cycle = -1;
  double prep_dd_ms = 0.0, prep_qp_ms = 0.0, feedback_ms = 0.0;
  int qp_iterations = 0;
  bool ok = true;  // false: previous command reused, iterate untouched
  EvalCounters net_evals;  // this cycle's network-evaluation tally
  FevalCounter f_evals;    // this cycle's dynamics-evaluation tally
  Eigen::VectorXd command;
};

// Real-time-iteration controller: per cycle one data-driven preparation, one
// QP construction, one feedback solve, full Newton step, then a one-node
// shift of the iterate as warm start.
class RtiController {
 public:
  RtiController(Plant plant, OcpConfig cfg, std::shared_ptr<const MlpModel> residual = nullptr);

  void Initialize(const Eigen::VectorXd& x0, const ReferenceWindow& refs);
  bool initialized() const { return initialized_; }

  // Runs one RTI cycle and returns the input command to apply.
  Eigen::VectorXd Cycle(const Eigen::VectorXd& x_measured, const ReferenceWindow& refs);

  const Plant& plant() const { return plant_; }
  const OcpConfig& config() const { return cfg_; }
  const Iterate& iterate() const { return iterate_; }
  const CycleTelemetry& telemetry() const { return telem_; }
  const EvalCounters& net_counters() const { return net_counts_; }
  const FevalCounter& f_counters() const { return f_counts_; }
  void ResetCounters();

 private:
  Plant plant_;
  OcpConfig cfg_;
  std::shared_ptr<const MlpModel> net_;
  std::optional<InlineNet> inline_net_;
  Iterate iterate_;
  bool initialized_ = false;
  std::int64_t cycle_count_ = 0;
  Eigen::VectorXd last_command_;
  std::vector<std::int8_t> warm_active_;
  CycleTelemetry telem_;
  EvalCounters net_counts_;
  FevalCounter f_counts_;
};

}  // namespace resmpc
