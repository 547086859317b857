#pragma once

#include <string>

#include "resmpc/bench.hpp"
#include "resmpc/dynamics.hpp"
#include "resmpc/neural.hpp"
#include "resmpc/simharness.hpp"
#include "resmpc/sqp_rti.hpp"

namespace resmpc {

// YAML config loaders. Every tunable ships in a config file; CLI flags
// override individual values after loading.

QuadParams LoadQuadParams(const std::string& path);

struct MpcFileConfig {
  OcpConfig ocp;
  std::string variant = "a";  // residual feature layout
};
MpcFileConfig LoadMpcConfig(const std::string& path);

SimConfig LoadSimConfig(const std::string& path);

BenchSpec LoadBenchSpec(const std::string& path);

struct TrainFileConfig {
  TrainOptions options;
  std::string arch = "3x32";
  Activation activation = Activation::kTanh;
};
TrainFileConfig LoadTrainConfig(const std::string& path);

Trajectory LoadTrajectory(const std::string& path);

}  // namespace resmpc
