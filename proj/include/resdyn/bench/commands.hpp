#pragma once

#include <json.hpp>

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "resdyn/adapt/rls.hpp"
#include "resdyn/bench/config.hpp"
#include "resdyn/bench/manifest.hpp"
#include "resdyn/bench/metrics.hpp"
#include "resdyn/control/loop.hpp"
#include "resdyn/control/pid.hpp"
#include "resdyn/core/check.hpp"
#include "resdyn/io/csv.hpp"
#include "resdyn/io/svg.hpp"
#include "resdyn/model/checkpoint.hpp"
#include "resdyn/model/fdt.hpp"
#include "resdyn/model/train.hpp"
#include "resdyn/sim/dataset.hpp"
#include "resdyn/sim/plant.hpp"
#include "resdyn/sim/trajectory.hpp"

namespace resdyn::bench {

namespace fs = std::filesystem;

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  return core::Rng::splitmix(base ^ core::Rng::splitmix(salt));
}

inline int payload_grams(double kg) { return static_cast<int>(std::lround(1000.0 * kg)); }

inline std::string payload_tag(double kg) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "p%03d", payload_grams(kg));
  return buf;
}

inline std::string speed_tag(double mps) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "v%02d", static_cast<int>(std::lround(10.0 * mps)));
  return buf;
}

// ---------------------------------------------------------------------------
// Data collection
// ---------------------------------------------------------------------------

/// One PID-tracked randomized-excitation run at a constant payload: the
/// dataset source. A plain per-channel PID executes the excitation
/// trajectory — integral action carries the static loads — so the plant
/// stays on the excitation envelope while the logged residual keeps the
/// full model mismatch (gravity included).
inline sim::RunRecording collect_run(const ExperimentConfig& cfg, double payload_kg,
                                     std::uint64_t seed, double duration) {
  sim::PlantParams pp = cfg.plant;
  pp.payload_mass = payload_kg;
  sim::PlantModel plant(pp);
  sim::ReferenceTrajectory traj(sim::TrajectoryKind::randomized_excitation, pp.n_arm,
                                cfg.data.excitation_speed, duration, mix_seed(seed, 0x74726aULL));
  const control::PidGains pid = control::PidGains::from_nominal_inertia(cfg.gains.mbar);
  return control::run_pid_collection(plant, cfg.gains.mbar, pid, traj, sim::PayloadSchedule(),
                                     duration, cfg.data.dt_physics_s, cfg.data.control_every,
                                     mix_seed(seed, 0x6e6f69ULL));
}

inline std::string train_data_file(double payload_kg) {
  return "train_" + payload_tag(payload_kg) + ".csv";
}

inline void cmd_generate_data(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path dir = fs::path(cfg.out_dir) / "data";
  fs::create_directories(dir);
  std::vector<std::string> files;
  for (std::size_t i = 0; i < cfg.data.train_payloads_kg.size(); ++i) {
    const double payload = cfg.data.train_payloads_kg[i];
    const std::uint64_t seed = mix_seed(cfg.seeds.front(), 0x646174ULL + i);
    const sim::RunRecording rec =
        collect_run(cfg, payload, seed, cfg.data.train_run_duration_s);
    const std::string name = train_data_file(payload);
    rec.save_csv((dir / name).string());
    files.push_back(name);
    std::cout << "generate-data: " << name << " (" << rec.samples.size() << " samples, payload "
              << payload_grams(payload) << " g)\n";
  }
  write_manifest(dir, "generate-data", experiment_config_to_json(cfg), cfg.seeds, files);
}

inline std::vector<sim::RunRecording> load_training_runs(const ExperimentConfig& cfg) {
  const fs::path dir = fs::path(cfg.out_dir) / "data";
  std::vector<sim::RunRecording> runs;
  for (double payload : cfg.data.train_payloads_kg) {
    const fs::path p = dir / train_data_file(payload);
    RESDYN_REQUIRE(fs::exists(p), "missing dataset " << p.string() << " (run generate-data first)");
    runs.push_back(sim::RunRecording::load_csv(p.string()));
  }
  return runs;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Train a model with the given architecture on the standard dataset and
/// write checkpoint + logs into `model_dir`. Returns the trained model.
inline model::FdtModel train_into(const ExperimentConfig& cfg, const model::FdtConfig& fcfg,
                                  const std::vector<sim::RunRecording>& runs,
                                  const fs::path& model_dir, const std::string& command_name) {
  fs::create_directories(model_dir);
  const model::TrainingData data(runs, fcfg, cfg.hyper.anchor_stride);
  model::FdtModel fdt(fcfg);
  fdt.init_params(cfg.seeds.front());
  data.apply_normalization(fdt);
  const model::TrainResult tr = model::train_fdt(fdt, data, cfg.hyper, cfg.seeds.front());

  model::save_checkpoint(fdt, (model_dir / "fdt.ckpt").string());
  {
    io::CsvWriter log((model_dir / "train_log.csv").string(),
                      {"epoch", "train_loss", "val_loss"});
    for (const model::EpochRecord& e : tr.log)
      log.write_row({static_cast<double>(e.epoch), e.train_loss, e.val_loss});
  }
  {
    io::CsvWriter timing((model_dir / "train_log.timing.csv").string(), {"epoch", "seconds"});
    for (const model::EpochRecord& e : tr.log)
      timing.write_row({static_cast<double>(e.epoch), e.seconds});
  }
  write_manifest(model_dir, command_name, experiment_config_to_json(cfg), cfg.seeds,
                 {"fdt.ckpt", "train_log.csv", "train_log.timing.csv"});
  std::cout << command_name << ": best val loss " << tr.best_val << " at epoch " << tr.best_epoch
            << " (" << tr.log.size() << " epochs, " << tr.steps << " steps)\n";
  return fdt;
}

inline void cmd_train(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<sim::RunRecording> runs = load_training_runs(cfg);
  train_into(cfg, cfg.fdt, runs, fs::path(cfg.out_dir) / "model", "train");
}

inline model::FdtModel load_trained_model(const ExperimentConfig& cfg) {
  const fs::path ckpt = fs::path(cfg.out_dir) / "model" / "fdt.ckpt";
  RESDYN_REQUIRE(fs::exists(ckpt), "missing checkpoint " << ckpt.string()
                                                         << " (run train first)");
  return model::load_checkpoint(ckpt.string());
}

// ---------------------------------------------------------------------------
// Open-loop prediction evaluation
// ---------------------------------------------------------------------------

struct PredictionSeedResult {
  std::uint64_t seed = 0;
  double rmse_frozen = 0.0;   // multi-step RMSE of the frozen forecaster
  double rmse_adapted = 0.0;  // same stream with the online-corrected first step
  double r2_frozen = 0.0;
  double r2_adapted = 0.0;
  double mean_inference_ms = 0.0;
  double max_inference_ms = 0.0;
};

/// Walk a recording prequentially: at every admissible origin the forecast
/// is made first (adapter correction uses the pre-update weights), then the
/// adapter consumes the revealed current-step residual.
inline PredictionSeedResult evaluate_prediction_on_recording(
    const model::FdtModel& fdt, const ExperimentConfig& cfg, const sim::RunRecording& rec,
    std::vector<std::pair<double, Eigen::VectorXd>>* alpha_trace = nullptr) {
  const model::FdtConfig& fcfg = fdt.config();
  const std::size_t n = fcfg.n;
  RESDYN_REQUIRE(rec.n == n, "prediction eval: recording DOF mismatch");
  const std::size_t len = rec.samples.size();
  RESDYN_REQUIRE(len >= fcfg.t_long + fcfg.horizon + 1,
                 "prediction eval: recording shorter than one window");

  const std::size_t first = fcfg.t_long - 1;
  const std::size_t last = len - 1 - fcfg.horizon;  // inclusive
  const std::size_t steps = fcfg.horizon + 1;
  const auto rows = static_cast<Eigen::Index>((last - first + 1) * steps);
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd pred_frozen(rows, ni), pred_adapted(rows, ni), target(rows, ni);

  model::HistoryWindow window(fcfg.d_v(), fcfg.t_long);
  Eigen::VectorXd sample(static_cast<Eigen::Index>(fcfg.d_v()));
  adapt::AdapterState adapter =
      adapt::AdapterState::init(fcfg.latent_dim(), n, cfg.adapter.sigma0);

  PredictionSeedResult out;
  std::size_t n_pred = 0;
  Eigen::Index row = 0;
  std::vector<Eigen::VectorXd> attn;
  for (std::size_t t = 0; t < len; ++t) {
    const sim::ResidualSample& smp = rec.samples[t];
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      sample(ii) = smp.chi(ii);
      sample(static_cast<Eigen::Index>(n + i)) = smp.chi_dot(ii);
      sample(static_cast<Eigen::Index>(2 * n + i)) = smp.tau(ii);
    }
    window.push(sample);
    if (!window.full() || t > last) continue;

    attn.clear();
    const auto w0 = std::chrono::steady_clock::now();
    const model::ResidualForecast fc = fdt.predict(window, alpha_trace ? &attn : nullptr);
    const auto w1 = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(w1 - w0).count();
    out.mean_inference_ms += ms;
    out.max_inference_ms = std::max(out.max_inference_ms, ms);
    ++n_pred;

    if (alpha_trace) {
      for (const Eigen::VectorXd& a : attn)
        if (a.size() == static_cast<Eigen::Index>(fcfg.d_v()))
          alpha_trace->emplace_back(smp.t, a);
    }

    const Eigen::VectorXd adapted0 =
        adapt::adapt_predict(fc.base.row(0).transpose(), fc.latent, adapter);
    for (std::size_t j = 0; j < steps; ++j) {
      target.row(row) = rec.samples[t + j].r.transpose();
      pred_frozen.row(row) = fc.base.row(static_cast<Eigen::Index>(j));
      if (j == 0)
        pred_adapted.row(row) = adapted0.transpose();
      else
        pred_adapted.row(row) = fc.base.row(static_cast<Eigen::Index>(j));
      ++row;
    }

    adapt::rls_update(adapter, fc.latent, smp.r, fc.base.row(0).transpose(), cfg.adapter);
    adapt::maybe_reset(adapter, cfg.adapter);
  }
  RESDYN_REQUIRE(row == rows, "prediction eval: anchor bookkeeping mismatch");

  out.rmse_frozen = rmse(pred_frozen - target);
  out.rmse_adapted = rmse(pred_adapted - target);
  out.r2_frozen = r_squared(pred_frozen, target);
  out.r2_adapted = r_squared(pred_adapted, target);
  if (n_pred) out.mean_inference_ms /= static_cast<double>(n_pred);
  return out;
}

inline std::uint64_t eval_stream_seed(std::uint64_t seed, double payload_kg) {
  return mix_seed(seed, 0x6576616cULL + static_cast<std::uint64_t>(payload_grams(payload_kg)));
}

inline PredictionSeedResult evaluate_prediction_stream(
    const model::FdtModel& fdt, const ExperimentConfig& cfg, double payload_kg,
    std::uint64_t seed, std::vector<std::pair<double, Eigen::VectorXd>>* alpha_trace = nullptr) {
  const sim::RunRecording rec =
      collect_run(cfg, payload_kg, eval_stream_seed(seed, payload_kg),
                  cfg.data.eval_run_duration_s);
  PredictionSeedResult r = evaluate_prediction_on_recording(fdt, cfg, rec, alpha_trace);
  r.seed = seed;
  return r;
}

struct PredictionCondition {
  double payload_kg = 0.0;
  std::vector<PredictionSeedResult> per_seed;

  std::vector<double> collect(double PredictionSeedResult::*field) const {
    std::vector<double> xs;
    xs.reserve(per_seed.size());
    for (const auto& r : per_seed) xs.push_back(r.*field);
    return xs;
  }
};

struct EvalPredictionResult {
  std::vector<PredictionCondition> conditions;  // in-distribution first, then OOD
};

inline EvalPredictionResult cmd_eval_prediction(const ExperimentConfig& cfg,
                                                bool write_outputs = true) {
  cfg.validate();
  const model::FdtModel fdt = load_trained_model(cfg);
  EvalPredictionResult result;
  std::vector<std::pair<double, Eigen::VectorXd>> alpha_trace;

  const std::vector<double> payloads{cfg.data.in_dist_payload_kg, cfg.data.ood_payload_kg};
  for (double payload : payloads) {
    PredictionCondition cond;
    cond.payload_kg = payload;
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
      const bool want_alpha = write_outputs && payload == payloads.front() && si == 0;
      cond.per_seed.push_back(evaluate_prediction_stream(fdt, cfg, payload, cfg.seeds[si],
                                                         want_alpha ? &alpha_trace : nullptr));
    }
    const SeedStats frozen = summarize(cond.collect(&PredictionSeedResult::rmse_frozen));
    const SeedStats adapted = summarize(cond.collect(&PredictionSeedResult::rmse_adapted));
    std::cout << "eval-prediction " << payload_tag(payload) << ": median RMSE frozen "
              << frozen.median << ", adapted " << adapted.median << " (" << cond.per_seed.size()
              << " seeds)\n";
    result.conditions.push_back(std::move(cond));
  }

  if (!write_outputs) return result;
  const fs::path dir = fs::path(cfg.out_dir) / "eval";
  fs::create_directories(dir);
  std::vector<std::string> files;
  {
    io::CsvWriter per_seed((dir / "prediction_per_seed.csv").string(),
                           {"payload_g", "seed", "rmse_frozen", "rmse_adapted", "r2_frozen",
                            "r2_adapted"});
    for (const PredictionCondition& cond : result.conditions)
      for (const PredictionSeedResult& r : cond.per_seed)
        per_seed.write_row({static_cast<double>(payload_grams(cond.payload_kg)),
                            static_cast<double>(r.seed), r.rmse_frozen, r.rmse_adapted,
                            r.r2_frozen, r.r2_adapted});
    files.push_back("prediction_per_seed.csv");
  }
  {
    nlohmann::json j;
    for (const PredictionCondition& cond : result.conditions) {
      nlohmann::json c;
      auto stats = [&](double PredictionSeedResult::*f) {
        const SeedStats s = summarize(cond.collect(f));
        return nlohmann::json{{"median", s.median}, {"q1", s.q1}, {"q3", s.q3},
                              {"count", s.count}};
      };
      c["rmse_frozen"] = stats(&PredictionSeedResult::rmse_frozen);
      c["rmse_adapted"] = stats(&PredictionSeedResult::rmse_adapted);
      c["r2_frozen"] = stats(&PredictionSeedResult::r2_frozen);
      c["r2_adapted"] = stats(&PredictionSeedResult::r2_adapted);
      j[payload_tag(cond.payload_kg)] = c;
    }
    std::ofstream out(dir / "prediction_metrics.json", std::ios::binary);
    out << j.dump(2) << "\n";
    files.push_back("prediction_metrics.json");
  }
  if (!alpha_trace.empty()) {
    std::vector<std::string> cols{"t"};
    for (std::size_t i = 0; i < cfg.fdt.d_v(); ++i) cols.push_back("a" + std::to_string(i));
    io::CsvWriter alpha((dir / "alpha.csv").string(), cols);
    std::vector<double> rowv;
    for (const auto& [t, a] : alpha_trace) {
      rowv.clear();
      rowv.push_back(t);
      for (Eigen::Index i = 0; i < a.size(); ++i) rowv.push_back(a(i));
      alpha.write_row(rowv);
    }
    files.push_back("alpha.csv");
  }
  {
    nlohmann::json t;
    for (const PredictionCondition& cond : result.conditions) {
      const SeedStats mean_ms = summarize(cond.collect(&PredictionSeedResult::mean_inference_ms));
      const SeedStats max_ms = summarize(cond.collect(&PredictionSeedResult::max_inference_ms));
      t[payload_tag(cond.payload_kg)] = {{"mean_ms_median", mean_ms.median},
                                         {"max_ms_median", max_ms.median}};
    }
    std::ofstream out(dir / "inference.timing.json", std::ios::binary);
    out << t.dump(2) << "\n";
    files.push_back("inference.timing.json");
  }
  write_manifest(dir, "eval-prediction", experiment_config_to_json(cfg), cfg.seeds, files);
  return result;
}

// ---------------------------------------------------------------------------
// Closed-loop scenario grid
// ---------------------------------------------------------------------------

inline std::vector<std::string> loop_columns(std::size_t n) {
  std::vector<std::string> cols{"t"};
  auto block = [&](const std::string& prefix) {
    for (std::size_t i = 0; i < n; ++i) cols.push_back(prefix + std::to_string(i));
  };
  block("chi_d");
  block("chi");
  block("e");
  block("s");
  block("tau");
  block("r");
  block("r_hat_base");
  block("r_hat_adapted");
  cols.push_back("sigma_hat");
  cols.push_back("eps_ema_norm");
  cols.push_back("reset");
  return cols;
}

inline void write_loop_csv(const std::string& path, const control::LoopResult& run) {
  io::CsvWriter writer(path, loop_columns(run.n));
  std::vector<double> row;
  row.reserve(4 + 8 * run.n);
  for (const control::TickRecord& tick : run.ticks) {
    row.clear();
    row.push_back(tick.t);
    auto push = [&](const Eigen::VectorXd& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v(i));
    };
    push(tick.chi_d);
    push(tick.chi);
    push(tick.e);
    push(tick.s);
    push(tick.tau);
    push(tick.r);
    push(tick.r_base);
    push(tick.r_adapted);
    row.push_back(tick.sigma_hat);
    row.push_back(tick.eps_ema_norm);
    row.push_back(static_cast<double>(tick.reset));
    writer.write_row(row);
  }
}

inline void write_loop_timing(const std::string& path, const control::LoopResult& run) {
  io::CsvWriter writer(path, {"tick", "wall_us"});
  for (std::size_t i = 0; i < run.tick_wall_us.size(); ++i)
    writer.write_row({static_cast<double>(i), run.tick_wall_us[i]});
}

inline void write_adapter_trace_csv(const std::string& path, const control::LoopResult& run) {
  io::CsvWriter writer(path, {"t", "eps_norm", "eps_ema_norm", "reset", "sigma_trace", "w_fro"});
  for (const control::AdapterTraceRow& row : run.adapter_trace)
    writer.write_row({row.t, row.eps_norm, row.ema_norm, static_cast<double>(row.reset),
                      row.sigma_trace, row.w_fro});
}

struct ScenarioCellSpec {
  std::string scenario;  // "A" or "B"
  double payload_kg = 0.0;
  double speed = 0.0;

  std::string tag() const { return scenario + "_" + payload_tag(payload_kg) + "_" + speed_tag(speed); }
};

struct ScenarioSetup {
  sim::ReferenceTrajectory traj;
  sim::PayloadSchedule schedule;
  double duration;
  double initial_payload;
  std::vector<double> event_times;
};

/// Scenario A: pick-and-place transfer with payload attach/detach step
/// events. Scenario B: repeated figure-eight with the payload on for the
/// whole run.
///
/// Every speed of a scenario shares one evaluation window, sized from the
/// slowest configured speed: the payload-carry interval and the total
/// duration are identical across speeds, so per-method comparisons between
/// speeds see the same static-load composition and differ only in the
/// dynamics. Physically, scenario A releases on a schedule (a faster
/// transfer dwells longer at the place point before release) and scenario
/// B simply completes more circuits in the same window.
inline ScenarioSetup make_scenario(const ExperimentConfig& cfg, const ScenarioCellSpec& cell) {
  const double speed_min =
      *std::min_element(cfg.scenario.speeds_mps.begin(), cfg.scenario.speeds_mps.end());
  const double speed_max =
      *std::max_element(cfg.scenario.speeds_mps.begin(), cfg.scenario.speeds_mps.end());
  if (cell.scenario == "A") {
    sim::ReferenceTrajectory slowest(sim::TrajectoryKind::s_shape, cfg.plant.n_arm, speed_min,
                                     1.0, 0);
    sim::ReferenceTrajectory fastest(sim::TrajectoryKind::s_shape, cfg.plant.n_arm, speed_max,
                                     1.0, 0);
    const double attach = std::min(cfg.scenario.attach_time_s, 0.5 * fastest.motion_time());
    const double detach = slowest.motion_time() + cfg.scenario.hold_after_motion_s;
    const double duration = detach + cfg.scenario.tail_s;
    sim::ReferenceTrajectory sized(sim::TrajectoryKind::s_shape, cfg.plant.n_arm, cell.speed,
                                   duration, 0);
    return {std::move(sized),
            sim::PayloadSchedule({{attach, cell.payload_kg}, {detach, 0.0}}),
            duration,
            0.0,
            {attach, detach}};
  }
  RESDYN_REQUIRE(cell.scenario == "B", "unknown scenario '" << cell.scenario << "'");
  sim::ReferenceTrajectory probe(sim::TrajectoryKind::figure8, cfg.plant.n_arm, speed_min, 1.0,
                                 0);
  const double duration =
      sim::ReferenceTrajectory::ramp_time() + cfg.scenario.figure8_periods * probe.period();
  sim::ReferenceTrajectory sized(sim::TrajectoryKind::figure8, cfg.plant.n_arm, cell.speed,
                                 duration, 0);
  return {std::move(sized), sim::PayloadSchedule(), duration, cell.payload_kg, {}};
}

struct ScenarioCellResult {
  ScenarioCellSpec cell;
  // method name -> per-seed tracking RMSE, seed order following cfg.seeds
  std::map<std::string, std::vector<double>> per_seed;

  SeedStats stats(const std::string& method) const { return summarize(per_seed.at(method)); }
};

struct ScenarioResult {
  std::vector<ScenarioCellResult> cells;
};

inline const std::vector<std::string>& scenario_methods() {
  static const std::vector<std::string> methods{"none", "fdt", "fdt_lra"};
  return methods;
}

/// Run the closed-loop grid. Empty/negative filters select everything.
/// Paired comparison: within a (cell, seed) pair every method sees the same
/// disturbance realization.
inline ScenarioResult cmd_run_scenario(const ExperimentConfig& cfg,
                                       const std::string& scenario_filter = "",
                                       double payload_filter = -1.0, double speed_filter = -1.0,
                                       bool write_outputs = true) {
  cfg.validate();
  const model::FdtModel fdt = load_trained_model(cfg);
  const fs::path dir = fs::path(cfg.out_dir) / "scenario";
  if (write_outputs) fs::create_directories(dir);

  std::vector<ScenarioCellSpec> cells;
  for (const std::string& sc : {std::string("A"), std::string("B")}) {
    if (!scenario_filter.empty() && sc != scenario_filter) continue;
    for (double payload : {cfg.data.in_dist_payload_kg, cfg.data.ood_payload_kg}) {
      if (payload_filter >= 0.0 && payload_grams(payload) != payload_grams(payload_filter))
        continue;
      for (double speed : cfg.scenario.speeds_mps) {
        if (speed_filter > 0.0 && std::abs(speed - speed_filter) > 1e-9) continue;
        cells.push_back({sc, payload, speed});
      }
    }
  }
  RESDYN_REQUIRE(!cells.empty(), "run-scenario: filters select no cells");

  ScenarioResult result;
  std::vector<std::string> files;
  for (const ScenarioCellSpec& cell : cells) {
    const ScenarioSetup setup = make_scenario(cfg, cell);
    sim::PlantParams pp = cfg.plant;
    pp.payload_mass = setup.initial_payload;
    const sim::PlantModel plant(pp);

    ScenarioCellResult cell_result;
    cell_result.cell = cell;
    const std::uint64_t cell_salt =
        core::Rng::splitmix((cell.scenario == "A" ? 0xAULL : 0xBULL) ^
                            (static_cast<std::uint64_t>(payload_grams(cell.payload_kg)) << 8) ^
                            (static_cast<std::uint64_t>(std::lround(10 * cell.speed)) << 24));

    for (const std::string& method : scenario_methods()) {
      std::vector<double>& rmses = cell_result.per_seed[method];
      for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
        control::LoopOptions opt;
        opt.duration = setup.duration;
        opt.dt_physics = cfg.data.dt_physics_s;
        opt.control_every = cfg.data.control_every;
        opt.seed = mix_seed(cfg.seeds[si], cell_salt);  // method-independent: paired runs
        opt.mode = method == "none"  ? control::CompensationMode::none
                   : method == "fdt" ? control::CompensationMode::fdt
                                     : control::CompensationMode::fdt_lra;
        adapt::AdapterState adapter = adapt::AdapterState::init(
            cfg.fdt.latent_dim(), cfg.n(), cfg.adapter.sigma0);
        const control::LoopResult run = control::run_closed_loop(
            plant, opt.mode == control::CompensationMode::none ? nullptr : &fdt,
            opt.mode == control::CompensationMode::fdt_lra ? &adapter : nullptr, cfg.adapter,
            cfg.gains, setup.traj, setup.schedule, opt);
        rmses.push_back(tracking_rmse(run));

        if (write_outputs && si == 0) {
          const fs::path cell_dir = dir / cell.tag();
          fs::create_directories(cell_dir);
          const std::string stem = method + "_seed" + std::to_string(cfg.seeds[si]);
          write_loop_csv((cell_dir / (stem + ".csv")).string(), run);
          write_loop_timing((cell_dir / (stem + ".timing.csv")).string(), run);
          files.push_back(cell.tag() + "/" + stem + ".csv");
          files.push_back(cell.tag() + "/" + stem + ".timing.csv");
          if (opt.mode == control::CompensationMode::fdt_lra) {
            write_adapter_trace_csv((cell_dir / (stem + "_adapter.csv")).string(), run);
            files.push_back(cell.tag() + "/" + stem + "_adapter.csv");
          }
        }
      }
      std::cout << "run-scenario " << cell.tag() << " " << method << ": median tracking RMSE "
                << summarize(rmses).median << " (" << rmses.size() << " seeds)\n";
    }
    result.cells.push_back(std::move(cell_result));
  }

  if (!write_outputs) return result;
  nlohmann::json j;
  nlohmann::json cells_json = nlohmann::json::array();
  for (const ScenarioCellResult& cr : result.cells) {
    nlohmann::json c;
    c["scenario"] = cr.cell.scenario;
    c["payload_g"] = payload_grams(cr.cell.payload_kg);
    c["speed_mps"] = cr.cell.speed;
    c["log_dir"] = cr.cell.tag();
    for (const auto& [method, rmses] : cr.per_seed) {
      const SeedStats s = summarize(rmses);
      c["methods"][method] = {{"median", s.median},
                              {"q1", s.q1},
                              {"q3", s.q3},
                              {"count", s.count},
                              {"per_seed", rmses}};
    }
    cells_json.push_back(c);
  }
  j["cells"] = cells_json;
  std::ofstream out(dir / "scenario_metrics.json", std::ios::binary);
  out << j.dump(2) << "\n";
  files.push_back("scenario_metrics.json");
  write_manifest(dir, "run-scenario", experiment_config_to_json(cfg), cfg.seeds, files);
  return result;
}

// ---------------------------------------------------------------------------
// Ablations
// ---------------------------------------------------------------------------

struct AblationRow {
  std::string variant;
  std::vector<double> per_seed_rmse;
  double median = 0.0;
  double delta_rmse_pct = 0.0;  // vs the full model, positive = worse
};

struct AblationResult {
  std::vector<AblationRow> rows;  // rows.front() is the full model
};

/// Retrain-and-compare ablations on the extrapolated-payload stream. The
/// full model and every structural variant are scored with the online
/// adapter active; the "no_lra" row is the full model scored frozen.
inline AblationResult cmd_ablate(const ExperimentConfig& cfg, bool write_outputs = true) {
  cfg.validate();
  const std::vector<sim::RunRecording> runs = load_training_runs(cfg);
  const model::FdtModel full = load_trained_model(cfg);
  const fs::path dir = fs::path(cfg.out_dir) / "ablate";
  if (write_outputs) fs::create_directories(dir);

  // Shared per-seed evaluation streams (regenerated deterministically).
  std::vector<sim::RunRecording> eval_runs;
  eval_runs.reserve(cfg.seeds.size());
  for (std::uint64_t seed : cfg.seeds)
    eval_runs.push_back(collect_run(cfg, cfg.data.ood_payload_kg,
                                    eval_stream_seed(seed, cfg.data.ood_payload_kg),
                                    cfg.data.eval_run_duration_s));

  struct VariantScores {
    std::vector<double> frozen, adapted;
  };
  auto score = [&](const model::FdtModel& m) {
    VariantScores v;
    for (const sim::RunRecording& rec : eval_runs) {
      const PredictionSeedResult r = evaluate_prediction_on_recording(m, cfg, rec);
      v.frozen.push_back(r.rmse_frozen);
      v.adapted.push_back(r.rmse_adapted);
    }
    return v;
  };

  AblationResult result;
  const VariantScores full_scores = score(full);
  {
    AblationRow row;
    row.variant = "full";
    row.per_seed_rmse = full_scores.adapted;
    row.median = summarize(row.per_seed_rmse).median;
    row.delta_rmse_pct = 0.0;
    result.rows.push_back(std::move(row));
  }
  const double full_median = result.rows.front().median;
  auto push_row = [&](const std::string& name, std::vector<double> rmses) {
    AblationRow row;
    row.variant = name;
    row.per_seed_rmse = std::move(rmses);
    row.median = summarize(row.per_seed_rmse).median;
    row.delta_rmse_pct = 100.0 * (row.median - full_median) / full_median;
    std::cout << "ablate " << name << ": median RMSE " << row.median << " (delta "
              << row.delta_rmse_pct << "%)\n";
    result.rows.push_back(std::move(row));
  };

  std::cout << "ablate full: median RMSE " << full_median << "\n";
  push_row("no_lra", full_scores.frozen);

  const std::vector<std::pair<std::string, model::FdtConfig>> variants = [&] {
    std::vector<std::pair<std::string, model::FdtConfig>> v;
    model::FdtConfig no_global = cfg.fdt;
    no_global.use_global_token = false;
    v.emplace_back("no_global_token", no_global);
    model::FdtConfig no_context = cfg.fdt;
    no_context.n_layers = 0;
    v.emplace_back("no_context", no_context);
    model::FdtConfig no_memory = cfg.fdt;
    no_memory.use_memory = false;
    v.emplace_back("no_memory", no_memory);
    return v;
  }();

  for (const auto& [name, fcfg] : variants) {
    const fs::path variant_dir = dir / name;
    const model::FdtModel m = write_outputs
                                  ? train_into(cfg, fcfg, runs, variant_dir, "ablate/" + name)
                                  : [&] {
                                      const model::TrainingData data(runs, fcfg,
                                                                     cfg.hyper.anchor_stride);
                                      model::FdtModel vm(fcfg);
                                      vm.init_params(cfg.seeds.front());
                                      data.apply_normalization(vm);
                                      model::train_fdt(vm, data, cfg.hyper, cfg.seeds.front());
                                      return vm;
                                    }();
    push_row(name, score(m).adapted);
  }

  if (!write_outputs) return result;
  nlohmann::json j;
  nlohmann::json rows = nlohmann::json::array();
  for (const AblationRow& row : result.rows) {
    const SeedStats s = summarize(row.per_seed_rmse);
    rows.push_back({{"variant", row.variant},
                    {"median", s.median},
                    {"q1", s.q1},
                    {"q3", s.q3},
                    {"count", s.count},
                    {"delta_rmse_pct", row.delta_rmse_pct},
                    {"per_seed", row.per_seed_rmse}});
  }
  j["rows"] = rows;
  j["payload_g"] = payload_grams(cfg.data.ood_payload_kg);
  std::ofstream out(dir / "ablation_metrics.json", std::ios::binary);
  out << j.dump(2) << "\n";
  std::vector<std::string> files{"ablation_metrics.json"};
  for (const auto& [name, fcfg] : variants) {
    files.push_back(name + "/fdt.ckpt");
    files.push_back(name + "/train_log.csv");
    files.push_back(name + "/train_log.timing.csv");
  }
  write_manifest(dir, "ablate", experiment_config_to_json(cfg), cfg.seeds, files);
  return result;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t column_index(const io::CsvTable& table, const std::string& name) {
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    if (table.columns[i] == name) return i;
  RESDYN_REQUIRE(false, "report: column '" << name << "' not found");
  return 0;
}

inline void append_stats_row(io::CsvWriter& w, const std::string& section,
                             const std::string& name, const nlohmann::json& stats) {
  w.write_row_mixed({section, name, io::format_double(stats.at("median").get<double>()),
                     io::format_double(stats.at("q1").get<double>()),
                     io::format_double(stats.at("q3").get<double>())});
}

}  // namespace detail

/// Consolidate whatever metrics files exist under the output directory into
/// one summary CSV plus the standard diagnostic figures.
inline void cmd_report(const ExperimentConfig& cfg) {
  const fs::path out = fs::path(cfg.out_dir);
  const fs::path dir = out / "report";
  fs::create_directories(dir);
  std::vector<std::string> files;

  {
    io::CsvWriter summary((dir / "summary.csv").string(),
                          {"section", "name", "median", "q1", "q3"});
    files.push_back("summary.csv");
    const fs::path pred = out / "eval" / "prediction_metrics.json";
    if (fs::exists(pred)) {
      nlohmann::json j;
      std::ifstream(pred) >> j;
      for (const auto& [tag, cond] : j.items())
        for (const std::string metric :
             {"rmse_frozen", "rmse_adapted", "r2_frozen", "r2_adapted"})
          detail::append_stats_row(summary, "prediction_" + tag, metric, cond.at(metric));
    }
    const fs::path scen = out / "scenario" / "scenario_metrics.json";
    if (fs::exists(scen)) {
      nlohmann::json j;
      std::ifstream(scen) >> j;
      for (const auto& cell : j.at("cells")) {
        const std::string tag = cell.at("log_dir").get<std::string>();
        for (const auto& [method, stats] : cell.at("methods").items())
          detail::append_stats_row(summary, "tracking_" + tag, method, stats);
      }
    }
    const fs::path abl = out / "ablate" / "ablation_metrics.json";
    if (fs::exists(abl)) {
      nlohmann::json j;
      std::ifstream(abl) >> j;
      for (const auto& row : j.at("rows")) {
        detail::append_stats_row(summary, "ablation", row.at("variant").get<std::string>(), row);
        summary.write_row_mixed({"ablation_delta_pct", row.at("variant").get<std::string>(),
                                 io::format_double(row.at("delta_rmse_pct").get<double>()), "",
                                 ""});
      }
    }
  }

  // Figures from the first scenario cell that has logs on disk.
  const fs::path scen_dir = out / "scenario";
  fs::path cell_dir;
  std::uint64_t seed0 = cfg.seeds.front();
  if (fs::exists(scen_dir / "scenario_metrics.json")) {
    nlohmann::json j;
    std::ifstream(scen_dir / "scenario_metrics.json") >> j;
    if (!j.at("cells").empty())
      cell_dir = scen_dir / j.at("cells").front().at("log_dir").get<std::string>();
  }
  if (!cell_dir.empty() && fs::exists(cell_dir)) {
    io::SvgLinePlot tracking("Tracking error by compensation mode", "time (s)", "|e| (norm)");
    io::SvgLinePlot sigma("Adaptive switching gain", "time (s)", "sigma_hat");
    io::CsvWriter fig((dir / "fig_tracking.csv").string(),
                      {"method", "t", "e_norm", "sigma_hat"});
    bool any = false;
    for (const std::string& method : scenario_methods()) {
      const fs::path log = cell_dir / (method + "_seed" + std::to_string(seed0) + ".csv");
      if (!fs::exists(log)) continue;
      const io::CsvTable table = io::read_csv(log.string());
      const std::size_t n_cols = table.columns.size();
      const std::size_t n = (n_cols - 4) / 8;
      const std::size_t t_i = detail::column_index(table, "t");
      const std::size_t e_i = detail::column_index(table, "e0");
      const std::size_t sig_i = detail::column_index(table, "sigma_hat");
      std::vector<double> ts, es, sg;
      for (const auto& row : table.rows) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += row[e_i + i] * row[e_i + i];
        ts.push_back(row[t_i]);
        es.push_back(std::sqrt(acc));
        sg.push_back(row[sig_i]);
        fig.write_row_mixed({method, io::format_double(row[t_i]),
                             io::format_double(std::sqrt(acc)),
                             io::format_double(row[sig_i])});
      }
      tracking.add_series(method, ts, es);
      sigma.add_series(method, ts, sg);
      any = true;
    }
    if (any) {
      tracking.write((dir / "tracking_error.svg").string());
      sigma.write((dir / "sigma_hat.svg").string());
      files.push_back("fig_tracking.csv");
      files.push_back("tracking_error.svg");
      files.push_back("sigma_hat.svg");
    }
    const fs::path trace =
        cell_dir / ("fdt_lra_seed" + std::to_string(seed0) + "_adapter.csv");
    if (fs::exists(trace)) {
      const io::CsvTable table = io::read_csv(trace.string());
      const std::size_t t_i = detail::column_index(table, "t");
      const std::size_t ema_i = detail::column_index(table, "eps_ema_norm");
      const std::size_t reset_i = detail::column_index(table, "reset");
      io::SvgLinePlot adapter("Adapter innovation EMA and covariance resets", "time (s)",
                              "|eps_ema|");
      io::CsvWriter fig2((dir / "fig_adapter.csv").string(), {"t", "eps_ema_norm", "reset"});
      std::vector<double> ts, emas;
      for (const auto& row : table.rows) {
        ts.push_back(row[t_i]);
        emas.push_back(row[ema_i]);
        if (row[reset_i] > 0.5) adapter.add_event(row[t_i], "reset");
        fig2.write_row({row[t_i], row[ema_i], row[reset_i]});
      }
      adapter.add_series("eps_ema", ts, emas);
      adapter.write((dir / "adapter_resets.svg").string());
      files.push_back("fig_adapter.csv");
      files.push_back("adapter_resets.svg");
    }
  }

  const fs::path alpha = out / "eval" / "alpha.csv";
  if (fs::exists(alpha)) {
    const io::CsvTable table = io::read_csv(alpha.string());
    io::SvgLinePlot plot("Memory attention weights", "time (s)", "alpha");
    const std::size_t t_i = detail::column_index(table, "t");
    std::vector<double> ts;
    for (const auto& row : table.rows) ts.push_back(row[t_i]);
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (c == t_i) continue;
      std::vector<double> ys;
      for (const auto& row : table.rows) ys.push_back(row[c]);
      plot.add_series(table.columns[c], ts, ys);
    }
    plot.write((dir / "attention_weights.svg").string());
    files.push_back("attention_weights.svg");
  }

  write_manifest(dir, "report", experiment_config_to_json(cfg), cfg.seeds, files);
  std::cout << "report: wrote " << files.size() << " files under " << dir.string() << "\n";
}

}  // namespace resdyn::bench
