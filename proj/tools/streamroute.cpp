// SPDX-License-Identifier: Apache-2.0
//
// streamroute: train, evaluate, sweep and replay the streaming controller.
#include <csignal>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "streamroute/app.hpp"
#include "streamroute/error.hpp"

namespace {

void on_interrupt(int) { streamroute::g_stop_requested.store(true); }

std::vector<double> default_rho_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming memory, readiness gating and compute routing simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  app.add_option("--config", config_path, "YAML run configuration");
  app.add_option("--out", out_dir, "Output directory (overrides output_dir)");
  app.add_option("--seed", seed, "Global seed (overrides seed)");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "Train the readiness head and the router");
  std::string mode;
  train->add_option("--mode", mode, "Trainer mode")->check(CLI::IsMember({"vanilla", "target_balanced"}));

  auto* eval = app.add_subcommand("eval", "Compare all-fast, all-slow and adaptive pipelines");
  std::string params_path;
  eval->add_option("--params", params_path, "parameters.json written by train")->required();

  auto* sweep = app.add_subcommand("sweep", "Grid over memory and band settings");
  std::vector<std::string> axes;
  bool reward_surface = false;
  std::vector<double> rho_grid;
  sweep->add_option("--axis", axes, "name=v1,v2,... with name in tau_near, tau_hist, window, eta, gamma");
  sweep->add_flag("--reward-surface", reward_surface, "Emit the modulated-reward table instead of a grid");
  sweep->add_option("--rho", rho_grid, "rho values for --reward-surface");

  auto* replay = app.add_subcommand("replay", "Run the pipeline on stream and query files");
  std::string stream_path, queries_path, replay_params;
  replay->add_option("--stream", stream_path, "Stream JSONL")->required();
  replay->add_option("--queries", queries_path, "Query JSONL")->required();
  replay->add_option("--params", replay_params, "parameters.json; trained from the config when absent");

  auto* dataset = app.add_subcommand("dataset", "Write a seeded stream, query set and readiness dataset");

  auto* impact = app.add_subcommand("impact", "Zone deletion impact under the toy scorer");
  double correlation = 0.99;
  std::size_t trials = 100;
  impact->add_option("--correlation", correlation, "Temporal correlation of the probe streams");
  impact->add_option("--trials", trials, "Number of seeded trials")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    streamroute::ConfigOverrides overrides = streamroute::overrides_from_environment();
    if (seed) overrides["seed"] = std::to_string(*seed);
    if (!out_dir.empty()) overrides["output_dir"] = out_dir;
    if (!mode.empty()) overrides["trainer.mode"] = mode;
    streamroute::RunConfig config = config_path.empty() ? streamroute::parse_config("", overrides)
                                                        : streamroute::load_config(config_path, overrides);
    const std::filesystem::path out = config.output_dir;

    if (*train) {
      std::signal(SIGINT, on_interrupt);
      return streamroute::cmd_train(config, out, jobs);
    }
    if (*eval) return streamroute::cmd_eval(config, params_path, out, jobs);
    if (*sweep) {
      if (reward_surface) {
        return streamroute::cmd_reward_surface(config, rho_grid.empty() ? default_rho_grid() : rho_grid, out);
      }
      if (axes.empty()) {
        std::cerr << "sweep: at least one --axis is required\n";
        return 1;
      }
      std::vector<streamroute::SweepAxis> parsed;
      for (const auto& a : axes) parsed.push_back(streamroute::parse_sweep_axis(a));
      return streamroute::cmd_sweep(config, parsed, out, jobs);
    }
    if (*replay) {
      std::optional<std::filesystem::path> p;
      if (!replay_params.empty()) p = replay_params;
      return streamroute::cmd_replay(config, stream_path, queries_path, p, out, jobs);
    }
    if (*dataset) return streamroute::cmd_dataset(config, out);
    if (*impact) return streamroute::cmd_impact(config, correlation, trials, out);
  } catch (const streamroute::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return streamroute::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
