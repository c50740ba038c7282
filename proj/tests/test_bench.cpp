// Benchmark-harness utilities: metrics against independent recomputation,
// config serialization, manifest checksums, deterministic data collection,
// scenario wiring, and the SVG writer.

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "resdyn/bench/commands.hpp"
#include "resdyn/bench/config.hpp"
#include "resdyn/bench/manifest.hpp"
#include "resdyn/bench/metrics.hpp"
#include "resdyn/core/rng.hpp"
#include "resdyn/io/svg.hpp"

using namespace resdyn;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("resdyn_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Eigen::MatrixXd random_matrix(core::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.gaussian(0.0, 1.0);
  return m;
}

bool recordings_equal(const sim::RunRecording& a, const sim::RunRecording& b) {
  if (a.n != b.n || a.samples.size() != b.samples.size()) return false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const auto& x = a.samples[i];
    const auto& y = b.samples[i];
    if (x.t != y.t) return false;
    if ((x.chi - y.chi).norm() != 0.0) return false;
    if ((x.chi_dot - y.chi_dot).norm() != 0.0) return false;
    if ((x.chi_ddot - y.chi_ddot).norm() != 0.0) return false;
    if ((x.tau - y.tau).norm() != 0.0) return false;
    if ((x.r - y.r).norm() != 0.0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("rmse matches an elementwise recomputation") {
  core::Rng rng(41);
  const Eigen::MatrixXd err = random_matrix(rng, 17, 3);
  double acc = 0.0;
  for (Eigen::Index r = 0; r < err.rows(); ++r)
    for (Eigen::Index c = 0; c < err.cols(); ++c) acc += err(r, c) * err(r, c);
  const double expect = std::sqrt(acc / static_cast<double>(err.size()));
  REQUIRE(bench::rmse(err) == Catch::Approx(expect).margin(1e-15));
  REQUIRE(bench::rmse(Eigen::MatrixXd::Zero(3, 2)) == 0.0);
  REQUIRE_THROWS_AS(bench::rmse(Eigen::MatrixXd(0, 0)), std::invalid_argument);
}

TEST_CASE("r_squared is 1 for perfect predictions and 0 for the column mean") {
  core::Rng rng(42);
  const Eigen::MatrixXd target = random_matrix(rng, 40, 4);
  REQUIRE(bench::r_squared(target, target) == Catch::Approx(1.0).margin(1e-15));

  Eigen::MatrixXd mean_pred(target.rows(), target.cols());
  for (Eigen::Index c = 0; c < target.cols(); ++c)
    mean_pred.col(c).setConstant(target.col(c).mean());
  REQUIRE(bench::r_squared(mean_pred, target) == Catch::Approx(0.0).margin(1e-15));

  // Generic case against an independent per-channel recomputation.
  const Eigen::MatrixXd pred = target + 0.3 * random_matrix(rng, 40, 4);
  double acc = 0.0;
  for (Eigen::Index c = 0; c < 4; ++c) {
    double mean = 0.0;
    for (Eigen::Index r = 0; r < 40; ++r) mean += target(r, c);
    mean /= 40.0;
    double sse = 0.0, sst = 0.0;
    for (Eigen::Index r = 0; r < 40; ++r) {
      sse += (pred(r, c) - target(r, c)) * (pred(r, c) - target(r, c));
      sst += (target(r, c) - mean) * (target(r, c) - mean);
    }
    acc += 1.0 - sse / sst;
  }
  REQUIRE(bench::r_squared(pred, target) == Catch::Approx(acc / 4.0).margin(1e-12));

  REQUIRE_THROWS_AS(bench::r_squared(pred, random_matrix(rng, 40, 3)), std::invalid_argument);
  REQUIRE_THROWS_AS(bench::r_squared(Eigen::MatrixXd::Zero(1, 2), Eigen::MatrixXd::Zero(1, 2)),
                    std::invalid_argument);
}

TEST_CASE("quantile interpolates between order statistics") {
  const std::vector<double> xs{4.0, 1.0, 3.0, 2.0};  // unsorted on purpose
  REQUIRE(bench::quantile(xs, 0.0) == 1.0);
  REQUIRE(bench::quantile(xs, 1.0) == 4.0);
  REQUIRE(bench::quantile(xs, 0.5) == Catch::Approx(2.5).margin(1e-15));
  REQUIRE(bench::quantile(xs, 0.25) == Catch::Approx(1.75).margin(1e-15));
  REQUIRE(bench::quantile({7.5}, 0.9) == 7.5);
  REQUIRE_THROWS_AS(bench::quantile({}, 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(bench::quantile(xs, 1.5), std::invalid_argument);
}

TEST_CASE("summarize reports median and interquartile range") {
  std::vector<double> xs;
  for (int i = 9; i >= 1; --i) xs.push_back(static_cast<double>(i));
  const bench::SeedStats s = bench::summarize(xs);
  REQUIRE(s.median == 5.0);
  REQUIRE(s.q1 == 3.0);
  REQUIRE(s.q3 == 7.0);
  REQUIRE(s.iqr() == 4.0);
  REQUIRE(s.count == 9);
}

TEST_CASE("tracking_rmse pools the position error over ticks and channels") {
  control::LoopResult run;
  run.n = 2;
  control::TickRecord a;
  a.e = Eigen::Vector2d(3.0, 4.0);
  control::TickRecord b;
  b.e = Eigen::Vector2d(0.0, 0.0);
  run.ticks.push_back(a);
  run.ticks.push_back(b);
  REQUIRE(bench::tracking_rmse(run) == Catch::Approx(2.5).margin(1e-15));
  control::LoopResult empty;
  REQUIRE_THROWS_AS(bench::tracking_rmse(empty), std::invalid_argument);
}

TEST_CASE("payload and speed tags are fixed-width and rounded to grams") {
  REQUIRE(bench::payload_grams(0.3) == 300);
  REQUIRE(bench::payload_grams(0.0) == 0);
  REQUIRE(bench::payload_tag(0.3) == "p300");
  REQUIRE(bench::payload_tag(0.0) == "p000");
  REQUIRE(bench::payload_tag(0.5) == "p500");
  REQUIRE(bench::speed_tag(0.5) == "v05");
  REQUIRE(bench::speed_tag(1.0) == "v10");
}

TEST_CASE("seed mixing is deterministic and separates streams") {
  REQUIRE(bench::mix_seed(7, 11) == bench::mix_seed(7, 11));
  REQUIRE(bench::mix_seed(7, 11) == core::Rng::splitmix(7 ^ core::Rng::splitmix(11)));
  REQUIRE(bench::mix_seed(7, 11) != bench::mix_seed(7, 12));
  REQUIRE(bench::mix_seed(7, 11) != bench::mix_seed(8, 11));
}

TEST_CASE("experiment presets pin the published protocol") {
  const bench::ExperimentConfig c = bench::ExperimentConfig::preset_config("desk");
  REQUIRE(c.seeds.size() == 20);
  REQUIRE(c.seeds.front() == 1);
  REQUIRE(c.seeds.back() == 20);
  REQUIRE(c.n() == 5);
  REQUIRE(c.data.train_payloads_kg == std::vector<double>{0.0, 0.2, 0.4});
  REQUIRE(c.data.in_dist_payload_kg == 0.3);
  REQUIRE(c.data.ood_payload_kg == 0.5);
  REQUIRE(c.scenario.speeds_mps == std::vector<double>{0.5, 1.0});
  REQUIRE(model::fdt_config_to_json(c.fdt) == model::fdt_config_to_json(model::FdtConfig::desk(5)));
  REQUIRE(c.hyper.anchor_stride == 4);
  REQUIRE((c.plant.drag_coeffs -
           (Eigen::VectorXd(5) << 0.8, 0.8, 0.04, 0.02, 0.02).finished())
              .norm() == 0.0);
  REQUIRE_NOTHROW(c.validate());

  const bench::ExperimentConfig paper = bench::ExperimentConfig::preset_config("paper");
  REQUIRE(paper.data.train_run_duration_s == 300.0);
  REQUIRE(paper.hyper.epochs == 100);
  REQUIRE(model::fdt_config_to_json(paper.fdt) ==
          model::fdt_config_to_json(model::FdtConfig::paper(5)));

  REQUIRE_THROWS_AS(bench::ExperimentConfig::preset_config("giant"), std::invalid_argument);
}

TEST_CASE("experiment config survives a JSON round trip") {
  bench::ExperimentConfig c = bench::ExperimentConfig::preset_config("desk");
  c.out_dir = "elsewhere";
  c.seeds = {5, 6, 7};
  c.adapter.lambda = 0.97;
  c.gains.nu = 3.5;
  c.data.ood_payload_kg = 0.6;
  c.fdt.t_long = 32;
  c.plant.noise_amplitude = 0.07;

  const nlohmann::json j = bench::experiment_config_to_json(c);
  const bench::ExperimentConfig back =
      bench::experiment_config_from_json(j, bench::ExperimentConfig::preset_config("desk"));
  REQUIRE(bench::experiment_config_to_json(back) == j);
}

TEST_CASE("partial JSON overlays only the named keys") {
  const nlohmann::json overlay{{"adapter", {{"lambda", 0.9}}}};
  const bench::ExperimentConfig c = bench::experiment_config_from_json(
      overlay, bench::ExperimentConfig::preset_config("desk"));
  const bench::ExperimentConfig base = bench::ExperimentConfig::preset_config("desk");
  REQUIRE(c.adapter.lambda == 0.9);
  REQUIRE(c.adapter.sigma0 == base.adapter.sigma0);
  REQUIRE(c.adapter.delta_thresh == base.adapter.delta_thresh);
  REQUIRE(c.hyper.epochs == base.hyper.epochs);
  REQUIRE(c.seeds == base.seeds);
}

TEST_CASE("config loading applies file overrides and the seed override") {
  const fs::path dir = scratch_dir("config");
  const fs::path cfg_path = dir / "override.json";
  {
    std::ofstream out(cfg_path);
    out << R"({"out_dir": "custom_out", "adapter": {"lambda": 0.95}})";
  }
  const bench::ExperimentConfig c =
      bench::load_experiment_config("desk", cfg_path.string(), 100);
  REQUIRE(c.out_dir == "custom_out");
  REQUIRE(c.adapter.lambda == 0.95);
  REQUIRE(c.seeds.size() == 20);
  REQUIRE(c.seeds.front() == 100);
  REQUIRE(c.seeds.back() == 119);

  const bench::ExperimentConfig no_override = bench::load_experiment_config("desk", "", -1);
  REQUIRE(no_override.seeds.front() == 1);
  REQUIRE_THROWS_AS(bench::load_experiment_config("desk", (dir / "missing.json").string(), -1),
                    std::invalid_argument);
}

TEST_CASE("sha256 reproduces the published reference digest") {
  const fs::path dir = scratch_dir("sha");
  const fs::path p = dir / "abc.txt";
  {
    std::ofstream out(p, std::ios::binary);
    out << "abc";
  }
  REQUIRE(bench::sha256_file(p) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  REQUIRE_THROWS_AS(bench::sha256_file(dir / "missing.bin"), std::invalid_argument);
}

TEST_CASE("timing sidecars are recognized by infix") {
  REQUIRE(bench::is_timing_sidecar("run.timing.csv"));
  REQUIRE(bench::is_timing_sidecar("a/b.timing.json"));
  REQUIRE_FALSE(bench::is_timing_sidecar("timing.csv"));
  REQUIRE_FALSE(bench::is_timing_sidecar("runtiming.csv"));
}

TEST_CASE("manifest lists checksummed files sorted, timing sidecars separately") {
  const fs::path dir = scratch_dir("manifest");
  {
    std::ofstream(dir / "abc.txt", std::ios::binary) << "abc";
    std::ofstream(dir / "beta.csv", std::ios::binary) << "x,y\n1,2\n";
    std::ofstream(dir / "run.timing.csv", std::ios::binary) << "tick,wall_us\n0,123\n";
  }
  bench::write_manifest(dir, "demo-command", nlohmann::json{{"k", "v"}}, {1, 2, 3},
                        {"beta.csv", "abc.txt", "run.timing.csv"});

  nlohmann::json j;
  std::ifstream(dir / "manifest.json") >> j;
  REQUIRE(j["command"] == "demo-command");
  REQUIRE(j["config"]["k"] == "v");
  REQUIRE(j["seeds"] == nlohmann::json::array({1, 2, 3}));
  REQUIRE(j["files"].size() == 2);
  REQUIRE(j["files"][0]["path"] == "abc.txt");  // sorted order
  REQUIRE(j["files"][1]["path"] == "beta.csv");
  REQUIRE(j["files"][0]["bytes"] == 3);
  REQUIRE(j["files"][0]["sha256"] ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  REQUIRE(j["timing_files"] == nlohmann::json::array({"run.timing.csv"}));
  for (const auto& entry : j["files"]) REQUIRE_FALSE(bench::is_timing_sidecar(entry["path"]));
}

TEST_CASE("data collection is reproducible per seed and distinct across seeds [slow]") {
  bench::ExperimentConfig cfg = bench::ExperimentConfig::preset_config("desk");
  const sim::RunRecording a = bench::collect_run(cfg, 0.2, 7, 8.0);
  const sim::RunRecording b = bench::collect_run(cfg, 0.2, 7, 8.0);
  const sim::RunRecording c = bench::collect_run(cfg, 0.2, 8, 8.0);
  REQUIRE(a.samples.size() == 800);  // 8 s at the 100 Hz control rate
  REQUIRE(recordings_equal(a, b));
  REQUIRE_FALSE(recordings_equal(a, c));

  // The logged pair (tau, chi_ddot, r) is internally consistent with the
  // nominal-inertia residual definition.
  for (std::size_t i = 0; i < a.samples.size(); i += 97) {
    const auto& s = a.samples[i];
    REQUIRE((s.r - sim::compute_residual(cfg.gains.mbar, s.tau, s.chi_ddot)).norm() == 0.0);
  }
}

TEST_CASE("scenario cells wire trajectories, payload events, and tags") {
  const bench::ExperimentConfig cfg = bench::ExperimentConfig::preset_config("desk");

  SECTION("pick-and-place transfer with attach and detach events") {
    bench::ScenarioCellSpec cell;
    cell.scenario = "A";
    cell.payload_kg = 0.3;
    cell.speed = 0.5;
    REQUIRE(cell.tag() == "A_p300_v05");

    const bench::ScenarioSetup setup = bench::make_scenario(cfg, cell);
    // The window is sized from the configured speed range: release is
    // scheduled after the slowest transfer completes plus the hold, and the
    // grasp lands within every speed's motion segment.
    const double speed_min =
        *std::min_element(cfg.scenario.speeds_mps.begin(), cfg.scenario.speeds_mps.end());
    const double speed_max =
        *std::max_element(cfg.scenario.speeds_mps.begin(), cfg.scenario.speeds_mps.end());
    const sim::ReferenceTrajectory slowest(sim::TrajectoryKind::s_shape, cfg.plant.n_arm,
                                           speed_min, 1.0, 0);
    const sim::ReferenceTrajectory fastest(sim::TrajectoryKind::s_shape, cfg.plant.n_arm,
                                           speed_max, 1.0, 0);
    const double attach = std::min(cfg.scenario.attach_time_s, 0.5 * fastest.motion_time());
    const double detach = slowest.motion_time() + cfg.scenario.hold_after_motion_s;
    REQUIRE(setup.initial_payload == 0.0);
    REQUIRE(setup.duration == Catch::Approx(detach + cfg.scenario.tail_s).margin(1e-12));
    REQUIRE(setup.event_times == std::vector<double>{attach, detach});
    REQUIRE(setup.schedule.events().size() == 2);
    // The payload arrives exactly at the attach instant and leaves at detach.
    REQUIRE(setup.schedule.mass_at(attach - 1e-9, setup.initial_payload) == 0.0);
    REQUIRE(setup.schedule.mass_at(attach, setup.initial_payload) == 0.3);
    REQUIRE(setup.schedule.mass_at(detach - 1e-9, setup.initial_payload) == 0.3);
    REQUIRE(setup.schedule.mass_at(detach, setup.initial_payload) == 0.0);
  }

  SECTION("figure-eight carry holds the payload for the whole run") {
    bench::ScenarioCellSpec cell;
    cell.scenario = "B";
    cell.payload_kg = 0.5;
    cell.speed = 1.0;
    REQUIRE(cell.tag() == "B_p500_v10");

    const bench::ScenarioSetup setup = bench::make_scenario(cfg, cell);
    REQUIRE(setup.initial_payload == 0.5);
    REQUIRE(setup.schedule.empty());
    REQUIRE(setup.event_times.empty());
    // The window is sized from the slowest configured speed's period, so a
    // faster setting completes more circuits inside the same duration.
    const double speed_min =
        *std::min_element(cfg.scenario.speeds_mps.begin(), cfg.scenario.speeds_mps.end());
    const sim::ReferenceTrajectory slowest(sim::TrajectoryKind::figure8, cfg.plant.n_arm,
                                           speed_min, 1.0, 0);
    const double expected = sim::ReferenceTrajectory::ramp_time() +
                            cfg.scenario.figure8_periods * slowest.period();
    REQUIRE(setup.duration == Catch::Approx(expected).margin(1e-12));
  }

  SECTION("speed cells of one scenario share a single evaluation window") {
    for (const std::string scen : {"A", "B"}) {
      bench::ScenarioCellSpec slow;
      slow.scenario = scen;
      slow.payload_kg = 0.3;
      slow.speed = 0.5;
      bench::ScenarioCellSpec fast = slow;
      fast.speed = 1.0;
      const bench::ScenarioSetup s = bench::make_scenario(cfg, slow);
      const bench::ScenarioSetup f = bench::make_scenario(cfg, fast);
      REQUIRE(s.duration == f.duration);
      REQUIRE(s.event_times == f.event_times);
    }
  }

  SECTION("unknown scenario letters are rejected") {
    bench::ScenarioCellSpec cell;
    cell.scenario = "C";
    REQUIRE_THROWS_AS(bench::make_scenario(cfg, cell), std::invalid_argument);
  }
}

TEST_CASE("scenario methods are the three compensation arms in fixed order") {
  REQUIRE(bench::scenario_methods() == std::vector<std::string>{"none", "fdt", "fdt_lra"});
}

TEST_CASE("loop CSV columns enumerate every recorded signal per channel") {
  const std::vector<std::string> cols = bench::loop_columns(2);
  REQUIRE(cols.size() == 1 + 8 * 2 + 3);
  REQUIRE(cols.front() == "t");
  REQUIRE(cols[1] == "chi_d0");
  REQUIRE(cols[2] == "chi_d1");
  REQUIRE(cols[3] == "chi0");
  REQUIRE(cols.back() == "reset");
}

TEST_CASE("SVG plots are deterministic, self-contained, and labeled") {
  const fs::path dir = scratch_dir("svg");
  auto build = [] {
    io::SvgLinePlot plot("demo chart", "time (s)", "value");
    plot.add_series("alpha", {0.0, 1.0, 2.0}, {0.5, 0.7, 0.2});
    plot.add_series("beta", {0.0, 1.0, 2.0}, {1.5, -0.3, 0.9});
    plot.add_event(1.25, "switch");
    return plot;
  };
  build().write((dir / "one.svg").string());
  build().write((dir / "two.svg").string());
  const std::string one = read_file(dir / "one.svg");
  REQUIRE(one == read_file(dir / "two.svg"));
  REQUIRE(one.find("<svg") == 0);
  REQUIRE(one.find("demo chart") != std::string::npos);
  REQUIRE(one.find("alpha") != std::string::npos);
  REQUIRE(one.find("beta") != std::string::npos);
  REQUIRE(one.find("switch") != std::string::npos);
  REQUIRE(one.rfind("</svg>\n") == one.size() - 7);

  io::SvgLinePlot empty("t", "x", "y");
  REQUIRE_THROWS_AS(empty.write((dir / "none.svg").string()), std::invalid_argument);
  io::SvgLinePlot bad("t", "x", "y");
  REQUIRE_THROWS_AS(bad.add_series("s", {0.0, 1.0}, {1.0}), std::invalid_argument);
}
