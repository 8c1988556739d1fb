// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "streamroute/config.hpp"
#include "streamroute/io.hpp"

namespace streamroute {

// Seed roles derived from RunConfig::seed.
enum class SeedRole : std::uint64_t {
  RouterEnvironment = 1,
  RouterStream = 2,
  ReadinessStream = 3,
  ReadinessQueries = 4,
  EvalStream = 5,
  EvalQueries = 6,
  Pipeline = 7,
  WarmStart = 8,
};
std::uint64_t role_seed(std::uint64_t seed, SeedRole role);

struct Episode {
  std::vector<Frame> frames;
  std::vector<Query> queries;
};

Episode make_episode(const EnvironmentConfig& env, std::uint64_t stream_seed, std::uint64_t query_seed);

// Set from a signal handler; training stops after the current step and the
// partial log is written.
extern std::atomic<bool> g_stop_requested;

struct TrainedStack {
  RunLog log;
  RoutingPolicy policy{std::vector<double>(kRoutingFeatureDim, 0.0)};
  ReadinessFit readiness;
};

TrainedStack train_stack(const RunConfig& config, std::size_t jobs);
TrainedParameters parameters_of(const TrainedStack& stack);

struct EvalReport {
  PipelineMetrics all_fast;
  PipelineMetrics all_slow;
  PipelineMetrics adaptive;
};

// Runs the three routing modes on one seeded evaluation episode.
EvalReport evaluate(const RunConfig& config, const TrainedParameters& params, std::size_t jobs);
std::string eval_json(const EvalReport& report);

struct SweepAxis {
  std::string name;
  std::vector<double> values;
};

// Parses "name=v1,v2,...". Throws ConfigError on unknown names or empty lists.
SweepAxis parse_sweep_axis(const std::string& text);

struct SweepRow {
  std::vector<double> values;  // one per axis
  double train_rho = 0.0;
  double train_reward = 0.0;
  PipelineMetrics metrics;
};

// Cartesian product in axis order (last axis fastest); rows are returned in
// that order whatever the worker count.
std::vector<SweepRow> run_sweep(const RunConfig& base, const std::vector<SweepAxis>& axes, std::size_t jobs);
std::string sweep_csv(const std::vector<SweepAxis>& axes, const std::vector<SweepRow>& rows);

// Tail length used for "final" training statistics.
inline constexpr std::size_t kFinalWindow = 50;

// CLI subcommands. Each writes its artifacts under `out` and returns 0.
int cmd_train(const RunConfig& config, const std::filesystem::path& out, std::size_t jobs);
int cmd_eval(const RunConfig& config, const std::filesystem::path& params, const std::filesystem::path& out,
             std::size_t jobs);
int cmd_sweep(const RunConfig& config, const std::vector<SweepAxis>& axes, const std::filesystem::path& out,
              std::size_t jobs);
int cmd_reward_surface(const RunConfig& config, const std::vector<double>& rho_grid,
                       const std::filesystem::path& out);
int cmd_replay(const RunConfig& config, const std::filesystem::path& stream, const std::filesystem::path& queries,
               const std::optional<std::filesystem::path>& params, const std::filesystem::path& out,
               std::size_t jobs);
int cmd_dataset(const RunConfig& config, const std::filesystem::path& out);
int cmd_impact(const RunConfig& config, double correlation, std::size_t trials, const std::filesystem::path& out);

}  // namespace streamroute
