// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamroute/memory.hpp"
#include "streamroute/reason.hpp"
#include "streamroute/respond.hpp"

namespace streamroute {

struct SyntheticStreamConfig {
  std::size_t length = 100;
  std::size_t tokens_per_frame = 64;
  std::size_t dim = 64;
  double temporal_correlation = 0.6;
  std::uint64_t seed = 7;

  void validate() const;
  bool operator==(const SyntheticStreamConfig&) const = default;
};

// Frame 1 is i.i.d. standard normal; frame t token j is
// rho * (frame t-1 token j) + sqrt(1 - rho^2) * noise.
std::vector<Frame> generate_stream(const SyntheticStreamConfig& config);

struct OracleConfig {
  double fast_a = 2.0;
  double fast_b = 4.0;
  double fast_c = 2.0;
  double slow_a = 3.0;
  double slow_b = 2.0;
  double fast_cost = 1.0;
  double slow_cost = 10.0;

  void validate() const;
  bool operator==(const OracleConfig&) const = default;
};

double fast_correct_probability(double difficulty, double fidelity, const OracleConfig& config);
double slow_correct_probability(double difficulty, const OracleConfig& config);
// `draw` is a uniform variate in [0, 1); correct iff draw < p.
bool fast_oracle_correct(double difficulty, double fidelity, const OracleConfig& config, double draw);
bool slow_oracle_correct(double difficulty, const OracleConfig& config, double draw);

// clamp(keep_near - 0.2 * keep_hist, 0, 1). An empty nearby zone counts as
// fully kept and an empty historical zone as fully dropped, so the start of a
// stream has fidelity 1.
double memory_fidelity(const MemoryState& state, std::size_t window);

// Fidelity after consuming each frame; entry t-1 belongs to step t.
std::vector<double> fidelity_trajectory(std::span<const Frame> frames, const CompressionPolicy& policy);

enum class DifficultyDistribution { Uniform, Mixture };

struct QueryConfig {
  std::size_t count = 200;
  DifficultyDistribution distribution = DifficultyDistribution::Uniform;
  double mixture_low = 0.2;
  double mixture_high = 0.85;
  double mixture_weight = 0.5;  // probability of the high mode
  double mixture_spread = 0.08;
  std::size_t max_clue_delay = 5;

  void validate() const;
  bool operator==(const QueryConfig&) const = default;
};

struct Query {
  std::string id;
  std::size_t arrival_step = 1;
  std::size_t clue_step = 1;
  double difficulty = 0.0;
  std::vector<double> features;

  bool operator==(const Query&) const = default;
};

double sample_difficulty(const QueryConfig& config, Rng& rng);
// Routing features [1, 4 (d - 0.5)].
std::vector<double> routing_features(double difficulty);
inline constexpr std::size_t kRoutingFeatureDim = 2;

// Queries sorted by arrival step with clue steps inside the stream.
std::vector<Query> generate_queries(const QueryConfig& config, std::size_t stream_length, std::uint64_t seed);

// [clue seen by `step`, nearby-memory fidelity, difficulty].
std::vector<double> readiness_features(const Query& query, std::size_t step, double fidelity);
inline constexpr std::size_t kReadinessFeatureDim = 3;

// Boundary examples for every query, featurized with the fidelity the memory
// policy yields on `frames`, then a logistic fit.
ReadinessFit train_readiness_for_episode(std::span<const Frame> frames, std::span<const Query> queries,
                                         const CompressionPolicy& policy, int epochs, double learning_rate,
                                         std::uint64_t seed);

// Training environment: uniform-or-mixture difficulty, fidelity taken from a
// memory replay of a generated stream at a random step, oracle correctness.
class SyntheticRoutingEnvironment : public RoutingEnvironment {
 public:
  SyntheticRoutingEnvironment(const SyntheticStreamConfig& stream, const CompressionPolicy& memory,
                              const OracleConfig& oracle, const QueryConfig& queries, std::uint64_t seed,
                              std::optional<std::size_t> max_batches = std::nullopt);

  std::optional<std::vector<QuerySample>> next_batch(std::size_t step, std::size_t batch_size) override;
  bool correct(const QuerySample& query, bool escalate, Rng& rng) const override;

  const std::vector<double>& fidelity() const noexcept { return fidelity_; }

 private:
  OracleConfig oracle_;
  QueryConfig queries_;
  std::uint64_t seed_;
  std::optional<std::size_t> max_batches_;
  std::size_t served_ = 0;
  std::vector<double> fidelity_;
};

enum class Action { Answer, Escalate, Routine };
const char* to_string(Action action) noexcept;

struct ActionRecord {
  std::size_t step = 0;
  std::string query_id;
  Action action = Action::Routine;
  double p_ready = 0.0;
  std::optional<double> p_escalate;
  std::optional<bool> correct;
  double cost = 0.0;
  double fidelity = 0.0;

  bool operator==(const ActionRecord&) const = default;
};

struct ActionTrace {
  std::vector<ActionRecord> records;
  bool operator==(const ActionTrace&) const = default;
};

struct PipelineMetrics {
  double accuracy = 0.0;
  double escalation_ratio = 0.0;
  double routine_ratio = 0.0;
  double mean_cost = 0.0;
  double drop_ratio = 0.0;
  std::size_t queries = 0;
  std::size_t resolved = 0;
  std::size_t unresolved = 0;
  std::size_t encounters = 0;
  std::size_t answers = 0;
  std::size_t escalations = 0;
  std::size_t routines = 0;
  std::size_t correct = 0;

  bool operator==(const PipelineMetrics&) const = default;
};

enum class RouteOverride { Policy, AlwaysFast, AlwaysSlow };

struct PipelineOptions {
  std::uint64_t seed = 7;
  std::size_t jobs = 1;
  RouteOverride route = RouteOverride::Policy;
};

struct PipelineResult {
  ActionTrace trace;
  PipelineMetrics metrics;
};

// Per step: update memory, then give every pending query one encounter in
// arrival order. Routine keeps a query pending; queries still pending when
// the stream ends are unresolved. Throws ConfigError on unsorted queries.
PipelineResult run_pipeline(std::span<const Frame> stream, std::span<const Query> queries,
                            const CompressionPolicy& memory_policy, const ReadinessHead& readiness_head,
                            const RoutingPolicy& routing_policy, const OracleConfig& oracle,
                            const PipelineOptions& options);

// Jensen-Shannon divergence in nats. Throws DataError on invalid inputs.
double jsd(std::span<const double> p, std::span<const double> q);
double deletion_impact(std::span<const double> reference, std::span<const double> modified);

// softmax over probe . token for each token in `memory`.
std::vector<double> toy_next_token_distribution(std::span<const MemoryToken> memory, std::span<const double> probe);

struct ZoneImpact {
  double historical = 0.0;
  double nearby = 0.0;
};

// Deletion impact of removing each zone from the uncompressed memory of
// `frames`. Deleted tokens keep their slot with probability 0 so both
// distributions share one support.
ZoneImpact zone_deletion_impact(std::span<const Frame> frames, std::size_t window, std::span<const double> probe);

// Mean zone impacts over `trials` seeded streams; each trial probes with one
// token of the newest frame.
ZoneImpact mean_zone_deletion_impact(const SyntheticStreamConfig& stream, std::size_t window, std::size_t trials,
                                     std::uint64_t seed);

}  // namespace streamroute
