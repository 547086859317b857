#include "resmpc/config.hpp"

#include <yaml-cpp/yaml.h>

#include "resmpc/errors.hpp"

namespace resmpc {
namespace {

YAML::Node LoadFile(const std::string& path) {
  try {
    return YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config: cannot load '" + path + "': " + e.what());
  }
}

YAML::Node Require(const YAML::Node& n, const std::string& key, const std::string& path) {
  const YAML::Node v = n[key];
  if (!v) throw ConfigError("config: '" + path + "' is missing key '" + key + "'");
  return v;
}

Eigen::VectorXd AsVector(const YAML::Node& n, const std::string& key, const std::string& path) {
  const YAML::Node v = Require(n, key, path);
  if (!v.IsSequence()) throw ConfigError("config: '" + key + "' in '" + path + "' must be a list");
  Eigen::VectorXd out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i].as<double>();
  return out;
}

// Scalar broadcast or explicit per-entry list.
Eigen::VectorXd AsBoundVector(const YAML::Node& n, const std::string& key, int dim,
                              const std::string& path) {
  const YAML::Node v = Require(n, key, path);
  if (v.IsSequence()) {
    Eigen::VectorXd out = AsVector(n, key, path);
    if (out.size() != dim)
      throw ConfigError("config: '" + key + "' must have " + std::to_string(dim) + " entries");
    return out;
  }
  return Eigen::VectorXd::Constant(dim, v.as<double>());
}

}  // namespace

QuadParams LoadQuadParams(const std::string& path) {
  const YAML::Node n = LoadFile(path);
  QuadParams p;
  p.mass = Require(n, "mass", path).as<double>();
  const Eigen::VectorXd inertia = AsVector(n, "inertia", path);
  if (inertia.size() != 3) throw ConfigError("config: inertia needs 3 entries in '" + path + "'");
  p.inertia = inertia.head<3>();
  p.arm_length = Require(n, "arm_length", path).as<double>();
  p.torque_coeff = Require(n, "torque_coeff", path).as<double>();
  p.thrust_max = Require(n, "thrust_max", path).as<double>();
  const Eigen::VectorXd sign = AsVector(n, "rotor_sign", path);
  if (sign.size() != 4) throw ConfigError("config: rotor_sign needs 4 entries in '" + path + "'");
  p.rotor_sign = sign.head<4>();
  p.Validate();
  return p;
}

MpcFileConfig LoadMpcConfig(const std::string& path) {
  const YAML::Node n = LoadFile(path);
  MpcFileConfig c;
  c.ocp.horizon = Require(n, "horizon", path).as<int>();
  c.ocp.dt = Require(n, "dt", path).as<double>();
  c.ocp.q_diag = AsVector(n, "q_diag", path);
  c.ocp.r_diag = AsVector(n, "r_diag", path);
  if (n["q_terminal"]) c.ocp.q_terminal = AsVector(n, "q_terminal", path);
  const int nu = static_cast<int>(c.ocp.r_diag.size());
  c.ocp.u_min = AsBoundVector(n, "u_min", nu, path);
  c.ocp.u_max = AsBoundVector(n, "u_max", nu, path);
  c.ocp.mode = ParseControllerMode(Require(n, "mode", path).as<std::string>());
  if (n["taylor_order"]) c.ocp.taylor_order = n["taylor_order"].as<int>();
  if (n["variant"]) c.variant = n["variant"].as<std::string>();
  return c;
}

SimConfig LoadSimConfig(const std::string& path) {
  const YAML::Node n = LoadFile(path);
  SimConfig c;
  const Eigen::VectorXd drag = AsVector(n, "drag_coeff", path);
  if (drag.size() != 3) throw ConfigError("config: drag_coeff needs 3 entries in '" + path + "'");
  c.drag_coeff = drag.head<3>();
  c.noise_ft_sigma = Require(n, "noise_ft_sigma", path).as<double>();
  c.motor_noise_coeff = Require(n, "motor_noise_coeff", path).as<double>();
  const std::string mode = Require(n, "noise_mode", path).as<std::string>();
  if (mode == "episode") {
    c.per_step_noise = false;
  } else if (mode == "step") {
    c.per_step_noise = true;
  } else {
    throw ConfigError("config: noise_mode must be 'episode' or 'step' in '" + path + "'");
  }
  c.sim_dt = Require(n, "sim_dt", path).as<double>();
  c.control_rate_hz = Require(n, "control_rate_hz", path).as<double>();
  c.Validate();
  return c;
}

BenchSpec LoadBenchSpec(const std::string& path) {
  const YAML::Node n = LoadFile(path);
  BenchSpec s;
  const YAML::Node widths = Require(n, "widths", path);
  s.widths.clear();
  for (const auto& w : widths) s.widths.push_back(w.as<int>());
  if (n["depths"]) {
    s.depths.clear();
    for (const auto& d : n["depths"]) s.depths.push_back(d.as<int>());
  }
  if (n["modes"]) {
    s.modes.clear();
    for (const auto& m : n["modes"]) s.modes.push_back(ParseControllerMode(m.as<std::string>()));
  }
  if (n["repetitions"]) s.repetitions = n["repetitions"].as<int>();
  if (n["warmup"]) s.warmup = n["warmup"].as<int>();
  if (n["horizon"]) s.horizon = n["horizon"].as<int>();
  if (n["dt"]) s.dt = n["dt"].as<double>();
  if (n["timeout_s"]) s.timeout_s = n["timeout_s"].as<double>();
  if (n["seed"]) s.seed = n["seed"].as<std::uint64_t>();
  s.Validate();
  return s;
}

TrainFileConfig LoadTrainConfig(const std::string& path) {
  const YAML::Node n = LoadFile(path);
  TrainFileConfig c;
  if (n["learning_rate"]) c.options.learning_rate = n["learning_rate"].as<double>();
  if (n["batch_size"]) c.options.batch_size = n["batch_size"].as<int>();
  if (n["max_epochs"]) c.options.max_epochs = n["max_epochs"].as<int>();
  if (n["patience"]) c.options.patience = n["patience"].as<int>();
  if (n["val_fraction"]) c.options.val_fraction = n["val_fraction"].as<double>();
  if (n["seed"]) c.options.seed = n["seed"].as<std::uint64_t>();
  if (n["arch"]) c.arch = n["arch"].as<std::string>();
  if (n["activation"]) {
    const std::string a = n["activation"].as<std::string>();
    if (a == "tanh") {
      c.activation = Activation::kTanh;
    } else if (a == "relu") {
      c.activation = Activation::kRelu;
    } else {
      throw ConfigError("config: activation must be 'tanh' or 'relu' in '" + path + "'");
    }
  }
  return c;
}

Trajectory LoadTrajectory(const std::string& path) {
  const YAML::Node n = LoadFile(path);
  Trajectory t;
  t.kind = Trajectory::ParseKind(Require(n, "trajectory", path).as<std::string>());
  if (n["speed"]) t.speed = n["speed"].as<double>();
  if (n["scale"]) t.scale = n["scale"].as<double>();
  if (n["duration"]) t.duration = n["duration"].as<double>();
  if (n["z0"]) t.z0 = n["z0"].as<double>();
  if (n["ramp_time"]) t.ramp_time = n["ramp_time"].as<double>();
  t.Validate();
  return t;
}

}  // namespace resmpc
