// resdyn benchmark CLI: dataset generation, training, prediction
// evaluation, closed-loop scenario runs, ablations, and report export.

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>

#include "resdyn/bench/commands.hpp"
#include "resdyn/bench/config.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string preset = "desk";
  std::string out_dir;
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config overriding the preset")
      ->check(CLI::ExistingFile);
  cmd->add_option("--preset", args.preset, "Base preset: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--out", args.out_dir, "Output directory (default from config)");
  cmd->add_option("--seed", args.seed, "Base seed; the seed list becomes {seed, seed+1, ...}");
}

resdyn::bench::ExperimentConfig effective_config(const CommonArgs& args) {
  resdyn::bench::ExperimentConfig cfg =
      resdyn::bench::load_experiment_config(args.preset, args.config_path, args.seed);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual-dynamics forecasting and adaptive-control benchmark"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, eval_args, scen_args, abl_args, rep_args;
  std::string scenario_filter;
  double payload_filter = -1.0;
  double speed_filter = -1.0;

  CLI::App* gen = app.add_subcommand("generate-data", "Simulate the training dataset");
  add_common(gen, gen_args);
  CLI::App* train = app.add_subcommand("train", "Train the residual forecaster");
  add_common(train, train_args);
  CLI::App* eval = app.add_subcommand("eval-prediction",
                                      "Open-loop prediction metrics on held-out streams");
  add_common(eval, eval_args);
  CLI::App* scen = app.add_subcommand("run-scenario", "Closed-loop tracking scenario grid");
  add_common(scen, scen_args);
  scen->add_option("--scenario", scenario_filter, "Restrict to one scenario: A or B")
      ->check(CLI::IsMember({"A", "B"}));
  scen->add_option("--payload", payload_filter, "Restrict to one payload (kg)");
  scen->add_option("--speed", speed_filter, "Restrict to one speed (m/s)");
  CLI::App* abl = app.add_subcommand("ablate", "Retrain-and-compare ablation table");
  add_common(abl, abl_args);
  CLI::App* rep = app.add_subcommand("report", "Consolidated metrics CSV and figures");
  add_common(rep, rep_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      resdyn::bench::cmd_generate_data(effective_config(gen_args));
    } else if (train->parsed()) {
      resdyn::bench::cmd_train(effective_config(train_args));
    } else if (eval->parsed()) {
      resdyn::bench::cmd_eval_prediction(effective_config(eval_args));
    } else if (scen->parsed()) {
      resdyn::bench::cmd_run_scenario(effective_config(scen_args), scenario_filter,
                                      payload_filter, speed_filter);
    } else if (abl->parsed()) {
      resdyn::bench::cmd_ablate(effective_config(abl_args));
    } else if (rep->parsed()) {
      resdyn::bench::cmd_report(effective_config(rep_args));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
