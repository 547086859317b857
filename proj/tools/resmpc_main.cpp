#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "resmpc/config.hpp"
#include "resmpc/errors.hpp"
#include "resmpc/io.hpp"
#include "resmpc/plant.hpp"
#include "resmpc/simharness.hpp"

namespace fs = std::filesystem;
using namespace resmpc;

namespace {

std::vector<FlightLog> FlyNominal(const QuadParams& quad, const MpcFileConfig& mpc,
                                  const SimConfig& sim_cfg, const std::vector<double>& speeds,
                                  const std::vector<std::string>& trajs, double duration,
                                  std::uint64_t seed, const std::string& out_dir,
                                  RunManifest* manifest) {
  std::vector<FlightLog> logs;
  int run_idx = 0;
  for (const std::string& traj_name : trajs) {
    for (double speed : speeds) {
      Trajectory traj;
      traj.kind = Trajectory::ParseKind(traj_name);
      traj.speed = speed;
      traj.duration = duration;
      const ReferenceGenerator refs(traj, quad);
      const Plant plant = MakeQuadrotorPlant(quad, ParseResidualVariant(mpc.variant));
      RtiController ctrl(plant, mpc.ocp, nullptr);
      QuadSim sim(quad, sim_cfg);
      const std::uint64_t run_seed = seed + static_cast<std::uint64_t>(run_idx);
      FlightLog log = RunClosedLoop(ctrl, sim, refs, duration, run_seed);
      log.note = "traj=" + traj_name + " speed=" + std::to_string(speed) +
                 " noise_mode=" + (sim_cfg.per_step_noise ? "step" : "episode") +
                 " seed=" + std::to_string(run_seed) + " model=nominal";
      char name[64];
      std::snprintf(name, sizeof(name), "flight_%02d_%s_%g.csv", run_idx, traj_name.c_str(),
                    speed);
      const std::string path = (fs::path(out_dir) / name).string();
      log.SaveCsv(path);
      if (manifest != nullptr) manifest->AddOutput(path);
      if (log.failed)
        std::fprintf(stderr, "warning: %s run at %.1f m/s truncated (controller failure)\n",
                     traj_name.c_str(), speed);
      logs.push_back(std::move(log));
      ++run_idx;
    }
  }
  return logs;
}

int CmdBench(const std::string& spec_path, const std::string& out_dir, std::string widths_csv,
             std::string modes_csv, int reps_override, std::uint64_t seed, bool seed_set) {
  BenchSpec spec = LoadBenchSpec(spec_path);
  if (!widths_csv.empty()) {
    spec.widths.clear();
    std::stringstream ss(widths_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) spec.widths.push_back(std::stoi(tok));
  }
  if (!modes_csv.empty()) {
    spec.modes.clear();
    std::stringstream ss(modes_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) spec.modes.push_back(ParseControllerMode(tok));
  }
  if (reps_override > 0) spec.repetitions = reps_override;
  if (seed_set) spec.seed = seed;
  spec.Validate();
  fs::create_directories(out_dir);

  const std::vector<BenchRow> rows = RunSweep(spec);
  const std::string csv_path = (fs::path(out_dir) / "bench.csv").string();
  SaveBenchCsv(rows, csv_path);

  RunManifest manifest;
  manifest.command = "bench";
  manifest.seed = spec.seed;
  manifest.config = {{"spec", spec_path},
                     {"widths", spec.widths},
                     {"depths", spec.depths},
                     {"repetitions", spec.repetitions},
                     {"warmup", spec.warmup},
                     {"horizon", spec.horizon},
                     {"dt", spec.dt},
                     {"timeout_s", spec.timeout_s}};
  std::vector<std::string> mode_tags;
  for (auto m : spec.modes) mode_tags.push_back(ControllerModeTag(m));
  manifest.config["modes"] = mode_tags;
  manifest.AddOutput(csv_path);
  manifest.Write((fs::path(out_dir) / "manifest.json").string());
  std::printf("wrote %s (%zu rows)\n", csv_path.c_str(), rows.size());
  return 0;
}

int CmdCollect(const std::string& quad_path, const std::string& mpc_path,
               const std::string& sim_path, const std::vector<double>& speeds,
               const std::string& trajs_csv, double duration, std::uint64_t seed,
               const std::string& out_dir) {
  const QuadParams quad = LoadQuadParams(quad_path);
  const MpcFileConfig mpc = LoadMpcConfig(mpc_path);
  const SimConfig sim_cfg = LoadSimConfig(sim_path);
  std::vector<std::string> trajs;
  std::stringstream ss(trajs_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) trajs.push_back(tok);
  fs::create_directories(out_dir);

  RunManifest manifest;
  manifest.command = "collect";
  manifest.seed = seed;
  manifest.config = {{"quad_params", quad_path}, {"mpc", mpc_path},     {"sim", sim_path},
                     {"speeds", speeds},         {"trajectories", trajs}, {"duration", duration},
                     {"variant", mpc.variant}};

  const std::vector<FlightLog> logs =
      FlyNominal(quad, mpc, sim_cfg, speeds, trajs, duration, seed, out_dir, &manifest);
  const ResidualDataset dataset =
      CollectAndLabel(logs, ParseResidualVariant(mpc.variant), quad);
  const std::string data_path = (fs::path(out_dir) / "dataset.bin").string();
  dataset.Save(data_path);
  manifest.AddOutput(data_path);
  manifest.Write((fs::path(out_dir) / "manifest.json").string());
  std::printf("collected %d labeled points into %s\n", dataset.size(), data_path.c_str());
  return 0;
}

int CmdTrain(const std::string& train_path, const std::string& data_path,
             const std::string& arch_override, std::uint64_t seed, bool seed_set,
             const std::string& out_path) {
  TrainFileConfig cfg = LoadTrainConfig(train_path);
  if (!arch_override.empty()) cfg.arch = arch_override;
  if (seed_set) cfg.options.seed = seed;
  const ResidualDataset data = ResidualDataset::Load(data_path);
  const std::string log_path = out_path + ".train_log.csv";
  cfg.options.log_path = log_path;

  TrainReport report;
  const MlpModel model =
      TrainResidual(data, ParseArch(cfg.arch), cfg.activation, cfg.options, &report);
  SaveModel(model, out_path);

  RunManifest manifest;
  manifest.command = "train";
  manifest.seed = cfg.options.seed;
  manifest.config = {{"train_config", train_path},
                     {"data", data_path},
                     {"arch", cfg.arch},
                     {"activation", cfg.activation == Activation::kTanh ? "tanh" : "relu"},
                     {"learning_rate", cfg.options.learning_rate},
                     {"batch_size", cfg.options.batch_size},
                     {"max_epochs", cfg.options.max_epochs},
                     {"patience", cfg.options.patience},
                     {"val_fraction", cfg.options.val_fraction}};
  manifest.AddOutput(out_path);
  manifest.AddOutput(log_path);
  manifest.Write(out_path + ".manifest.json");
  std::printf("trained %s: best val mse %.6g at epoch %d (%d epochs run) -> %s\n",
              model.ArchName().c_str(), report.best_val_mse, report.best_epoch,
              report.epochs_run, out_path.c_str());
  return 0;
}

int CmdTrack(const std::string& quad_path, const std::string& mpc_path,
             const std::string& sim_path, const std::string& traj_name, double speed,
             double duration, const std::string& model_path, std::uint64_t seed,
             const std::string& out_dir) {
  const QuadParams quad = LoadQuadParams(quad_path);
  MpcFileConfig mpc = LoadMpcConfig(mpc_path);
  const SimConfig sim_cfg = LoadSimConfig(sim_path);

  std::shared_ptr<const MlpModel> model;
  if (!model_path.empty() && model_path != "none") {
    model = std::make_shared<const MlpModel>(LoadModel(model_path));
    mpc.variant = model->input_variant;  // plant wiring must match the model
  }

  Trajectory traj;
  traj.kind = Trajectory::ParseKind(traj_name);
  traj.speed = speed;
  traj.duration = duration;
  const ReferenceGenerator refs(traj, quad);
  const Plant plant = MakeQuadrotorPlant(quad, ParseResidualVariant(mpc.variant));
  RtiController ctrl(plant, mpc.ocp, model);
  QuadSim sim(quad, sim_cfg);

  fs::create_directories(out_dir);
  FlightLog log = RunClosedLoop(ctrl, sim, refs, duration, seed);
  log.note = "traj=" + traj_name + " speed=" + std::to_string(speed) +
             " noise_mode=" + (sim_cfg.per_step_noise ? "step" : "episode") +
             " seed=" + std::to_string(seed) +
             " model=" + (model ? model_path : std::string("nominal"));
  const std::string log_path = (fs::path(out_dir) / "flight.csv").string();
  log.SaveCsv(log_path);

  RunManifest manifest;
  manifest.command = "track";
  manifest.seed = seed;
  manifest.config = {{"quad_params", quad_path}, {"mpc", mpc_path},
                     {"sim", sim_path},          {"trajectory", traj_name},
                     {"speed", speed},           {"duration", duration},
                     {"model", model_path.empty() ? "none" : model_path},
                     {"mode", ControllerModeTag(mpc.ocp.mode)},
                     {"variant", mpc.variant}};
  manifest.AddOutput(log_path);
  manifest.Write((fs::path(out_dir) / "manifest.json").string());

  if (log.failed) {
    std::fprintf(stderr, "run failed: controller became unstable, log truncated\n");
    return 1;
  }
  const TrackingError err = ComputeTrackingError(log, traj.ramp_time);
  double dd = 0.0, qp = 0.0, fb = 0.0;
  for (const auto& r : log.rows) {
    dd += r.prep_dd_ms;
    qp += r.prep_qp_ms;
    fb += r.feedback_ms;
  }
  const double n = static_cast<double>(log.rows.size());
  std::printf("mean tracking error: %.1f mm over %zu samples\n", err.mean * 1000.0,
              err.series.size());
  std::printf("phase times (avg ms): prep_dd %.3f, prep_qp %.3f, feedback %.3f, total %.3f\n",
              dd / n, qp / n, fb / n, (dd + qp + fb) / n);
  return 0;
}

int CmdInfo(const std::string& model_path, const std::string& data_path,
            const std::string& map_path) {
  if (!model_path.empty()) {
    const MlpModel m = LoadModel(model_path);
    std::printf("model %s: arch %s, %lld parameters, activation %s, variant %s, seed %llu\n",
                model_path.c_str(), m.ArchName().c_str(),
                static_cast<long long>(m.ParameterCount()),
                m.activation == Activation::kTanh ? "tanh" : "relu", m.input_variant.c_str(),
                static_cast<unsigned long long>(m.seed));
    return 0;
  }
  if (!data_path.empty()) {
    const ResidualDataset d = ResidualDataset::Load(data_path);
    std::printf("dataset %s: %d points, %lld features, %lld labels, variant %s\n",
                data_path.c_str(), d.size(), static_cast<long long>(d.inputs.cols()),
                static_cast<long long>(d.labels.cols()), d.variant.c_str());
    return 0;
  }
  if (!map_path.empty()) {
    const HeightMap m = HeightMap::LoadCsv(map_path);
    std::printf("height map %s: %ldx%ld cells at %.3g m, origin (%.3g, %.3g)\n",
                map_path.c_str(), static_cast<long>(m.z.rows()), static_cast<long>(m.z.cols()),
                m.resolution, m.origin_x, m.origin_y);
    return 0;
  }
  std::fprintf(stderr, "info: pass --model, --data, or --heightmap\n");
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual-dynamics MPC toolkit"};
  app.require_subcommand(1);

  // bench
  auto* bench = app.add_subcommand("bench", "Run the double-integrator runtime sweep");
  std::string bench_spec = "configs/bench.yaml", bench_out = "runs/bench";
  std::string bench_widths, bench_modes;
  int bench_reps = 0;
  std::uint64_t bench_seed = 0;
  bench->add_option("--spec", bench_spec, "Bench spec YAML");
  bench->add_option("--out", bench_out, "Output directory");
  bench->add_option("--widths", bench_widths, "Override widths, comma separated");
  bench->add_option("--modes", bench_modes, "Override modes, comma separated");
  bench->add_option("--reps", bench_reps, "Override timed repetitions");
  auto* bench_seed_opt = bench->add_option("--seed", bench_seed, "Override seed");

  // collect
  auto* collect = app.add_subcommand("collect", "Fly the nominal controller and label residuals");
  std::string c_quad = "configs/quad_params.yaml", c_mpc = "configs/mpc_quad.yaml";
  std::string c_sim = "configs/sim.yaml", c_trajs = "circle,lemniscate";
  std::string c_out = "runs/collect";
  std::vector<double> c_speeds = {2.0, 4.5, 7.0, 9.5, 12.0};
  double c_duration = 20.0;
  std::uint64_t c_seed = 0;
  collect->add_option("--quad", c_quad, "Vehicle parameter YAML");
  collect->add_option("--mpc", c_mpc, "Controller config YAML");
  collect->add_option("--sim", c_sim, "Simulation config YAML");
  collect->add_option("--speeds", c_speeds, "Average speeds to fly")->delimiter(',');
  collect->add_option("--trajs", c_trajs, "Trajectories, comma separated");
  collect->add_option("--duration", c_duration, "Seconds per flight");
  collect->add_option("--seed", c_seed, "Base seed");
  collect->add_option("--out", c_out, "Output directory");

  // train
  auto* train = app.add_subcommand("train", "Train a residual model from a dataset");
  std::string t_cfg = "configs/train.yaml", t_data, t_arch, t_out = "runs/model.bin";
  std::uint64_t t_seed = 0;
  train->add_option("--config", t_cfg, "Training config YAML");
  train->add_option("--data", t_data, "Residual dataset file")->required();
  train->add_option("--arch", t_arch, "Hidden layers, e.g. 3x32 or 32,32");
  auto* t_seed_opt = train->add_option("--seed", t_seed, "Override seed");
  train->add_option("--out", t_out, "Model output path");

  // track
  auto* track = app.add_subcommand("track", "Closed-loop tracking run");
  std::string k_quad = "configs/quad_params.yaml", k_mpc = "configs/mpc_quad.yaml";
  std::string k_sim = "configs/sim.yaml", k_traj = "circle", k_model, k_out = "runs/track";
  double k_speed = 7.0, k_duration = 20.0;
  std::uint64_t k_seed = 0;
  track->add_option("--quad", k_quad, "Vehicle parameter YAML");
  track->add_option("--mpc", k_mpc, "Controller config YAML");
  track->add_option("--sim", k_sim, "Simulation config YAML");
  track->add_option("--traj", k_traj, "circle or lemniscate");
  track->add_option("--speed", k_speed, "Average speed, m/s");
  track->add_option("--duration", k_duration, "Seconds");
  track->add_option("--model", k_model, "Residual model file, or 'none'");
  track->add_option("--seed", k_seed, "Simulation seed");
  track->add_option("--out", k_out, "Output directory");

  // info
  auto* info = app.add_subcommand("info", "Describe a model, dataset, or height map");
  std::string i_model, i_data, i_map;
  info->add_option("--model", i_model, "Model file");
  info->add_option("--data", i_data, "Dataset file");
  info->add_option("--heightmap", i_map, "Height map CSV");

  try {
    app.parse(argc, argv);
    if (bench->parsed())
      return CmdBench(bench_spec, bench_out, bench_widths, bench_modes, bench_reps, bench_seed,
                      bench_seed_opt->count() > 0);
    if (collect->parsed())
      return CmdCollect(c_quad, c_mpc, c_sim, c_speeds, c_trajs, c_duration, c_seed, c_out);
    if (train->parsed())
      return CmdTrain(t_cfg, t_data, t_arch, t_seed, t_seed_opt->count() > 0, t_out);
    if (track->parsed())
      return CmdTrack(k_quad, k_mpc, k_sim, k_traj, k_speed, k_duration, k_model, k_seed, k_out);
    if (info->parsed()) return CmdInfo(i_model, i_data, i_map);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
