#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "resmpc/neural.hpp"
#include "resmpc/sqp_rti.hpp"

namespace resmpc {

// Double-integrator runtime study: zero-output networks of sweeping size,
// prepared (rtn) vs in-graph (naive) integration, phase-resolved timing.
struct BenchSpec {
  std::vector<int> widths = {2, 4, 8, 16, 32, 64, 128, 256, 512};
  std::vector<int> depths = {2};  // hidden layers
  std::vector<ControllerMode> modes = {ControllerMode::kRtn, ControllerMode::kNaive};
  int repetitions = 100;  // timed cycles per configuration
  int warmup = 10;
  int horizon = 10;
  double dt = 0.05;
  double timeout_s = 2.0;  // per-cycle cap; configs beyond it are marked timed out
  std::uint64_t seed = 0;

  void Validate() const;
};

struct BenchRow {
  int depth = 0;
  int width = 0;
  std::int64_t params = 0;
  std::string mode;
  double prep_dd_ms = 0.0, prep_qp_ms = 0.0, feedback_ms = 0.0;  // medians
  double total_ms = 0.0;   // median of per-cycle sums
  double p95_ms = 0.0;     // p95 of per-cycle sums
  double freq_hz = 0.0;    // 1000 / total_ms
  std::uint64_t value_evals = 0, jacobian_evals = 0;      // per cycle
  std::uint64_t batched_calls = 0, batched_points = 0;    // per cycle
  bool equivalence_pass = false;  // commands match the no-network baseline
  bool timed_out = false;
};

// Hidden layers randomly initialized, final layer forced to zero: full
// evaluation cost, no dynamical effect.
MlpModel MakeZeroNetwork(int depth, int width, int in_dim, int out_dim, std::uint64_t seed);

std::vector<BenchRow> RunSweep(const BenchSpec& spec);

void SaveBenchCsv(const std::vector<BenchRow>& rows, const std::string& path);

}  // namespace resmpc
