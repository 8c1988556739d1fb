// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamroute/random.hpp"

namespace streamroute {

struct BandConfig {
  double eta = 0.3;
  double gamma = 0.2;

  double lower() const noexcept { return eta - gamma; }
  double upper() const noexcept { return eta + gamma; }
  // Throws ConfigError unless eta, gamma in [0,1] and the band meets [0,1].
  void validate() const;
  bool operator==(const BandConfig&) const = default;
};

enum class ScoreScale { Binary, FivePoint };
enum class RouteLabel { Answer, Escalate };

struct SftLabelerConfig {
  std::size_t k = 4;
  double quality_threshold = 2.5;
  ScoreScale scale = ScoreScale::FivePoint;
};

// Answer iff the mean score reaches the threshold. Throws DataError on a
// wrong score count or an out-of-scale score.
RouteLabel sft_route_label(std::span<const double> scores, const SftLabelerConfig& config);

int naive_reward(bool escalate, bool correct) noexcept;

struct BandPenalties {
  double delta_esc = 0.0;
  double delta_ans = 0.0;
};

BandPenalties band_penalties(double rho, const BandConfig& band) noexcept;

struct RewardBreakdown {
  double r_naive = 0.0;
  double delta_esc = 0.0;
  double delta_ans = 0.0;
  double r = 0.0;
};

RewardBreakdown modulated_reward(bool escalate, bool correct, BandPenalties penalties) noexcept;

// (r - mean) / (population std + eps).
std::vector<double> group_advantages(std::span<const double> rewards, double adv_epsilon);

struct RolloutOutcome {
  bool escalate = false;
  bool correct = false;
  double log_prob_behavior = 0.0;
};

struct RolloutGroup {
  std::string query_id;
  std::vector<double> features;
  std::vector<RolloutOutcome> outcomes;

  std::size_t size() const noexcept { return outcomes.size(); }
  std::size_t escalations() const noexcept;
  // Group escalation ratio, sum(e) / G.
  double rho() const noexcept;
};

// Logistic two-action router: p_escalate = sigmoid(theta . features).
class RoutingPolicy {
 public:
  explicit RoutingPolicy(std::vector<double> theta);

  std::size_t dimension() const noexcept { return theta_.size(); }
  const std::vector<double>& theta() const noexcept { return theta_; }
  const std::vector<double>& reference() const noexcept { return reference_; }
  const std::vector<double>& behavior() const noexcept { return behavior_; }

  void set_theta(std::vector<double> theta);
  void snapshot_behavior() { behavior_ = theta_; }

  double escalate_probability(std::span<const double> features) const;
  double behavior_escalate_probability(std::span<const double> features) const;
  double log_prob(bool escalate, std::span<const double> features) const;
  double behavior_log_prob(bool escalate, std::span<const double> features) const;

 private:
  std::vector<double> theta_;
  std::vector<double> reference_;
  std::vector<double> behavior_;
};

enum class TrainerMode { Vanilla, TargetBalanced };

struct TrainerConfig {
  std::size_t group_size = 8;
  std::size_t batch_size = 16;
  double learning_rate = 0.05;
  double clip_epsilon = 0.2;
  double kl_coeff = 0.01;
  double adv_epsilon = 1e-6;
  std::size_t steps = 500;
  std::uint64_t seed = 7;
  TrainerMode mode = TrainerMode::TargetBalanced;
  std::size_t jobs = 1;

  // steps may be 0 (a no-op run); everything else must be in range.
  void validate() const;
  bool operator==(const TrainerConfig&) const = default;
};

struct SurrogateResult {
  double loss = 0.0;
  std::vector<double> gradient;
  double kl = 0.0;
  std::size_t clipped = 0;  // terms where the clipped branch is active and flat
};

// Clipped importance-weighted objective with a closed-form two-point KL term
// against the reference policy. loss = -objective; gradient is d loss / d theta.
// Throws NumericalError on a non-finite log-probability.
SurrogateResult tb_grpo_surrogate(const RolloutGroup& group, std::span<const double> advantages,
                                  const RoutingPolicy& policy, const TrainerConfig& config);

struct QuerySample {
  std::string id;
  std::vector<double> features;
  double difficulty = 0.0;
  double fidelity = 1.0;
};

class RoutingEnvironment {
 public:
  virtual ~RoutingEnvironment() = default;
  // Next training batch, or nullopt when the environment is exhausted.
  virtual std::optional<std::vector<QuerySample>> next_batch(std::size_t step, std::size_t batch_size) = 0;
  // Correctness of one routed sample; must draw only from `rng`.
  virtual bool correct(const QuerySample& query, bool escalate, Rng& rng) const = 0;
};

struct GroupDiagnostics {
  std::string query_id;
  double difficulty = 0.0;
  double p_escalate = 0.0;
  double rho = 0.0;
  double delta_esc = 0.0;
  double delta_ans = 0.0;
  std::vector<int> escalate;
  std::vector<int> correct;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

struct StepMetrics {
  std::size_t step = 0;
  double rho_ema = 0.0;
  double rho_raw = 0.0;
  double mean_reward = 0.0;
  double mean_naive_reward = 0.0;
  double accuracy = 0.0;
  std::size_t escalate_count = 0;
  std::size_t answer_count = 0;
  double loss = 0.0;
  double kl = 0.0;
  double grad_norm = 0.0;
  std::vector<GroupDiagnostics> groups;
};

struct RunLog {
  std::vector<StepMetrics> steps;
  bool truncated = false;  // environment ran out before config.steps
  std::string stop_reason;

  // Mean of rho_raw / mean_reward over the last `n` steps (all when fewer).
  double tail_mean_rho(std::size_t n) const;
  double tail_mean_rho_ema(std::size_t n) const;
  double tail_mean_reward(std::size_t n) const;
  double tail_mean_naive_reward(std::size_t n) const;
};

inline constexpr double kRhoEmaDecay = 0.95;

// Runs GRPO on `policy` in place. Vanilla mode uses the naive reward; the
// target-balanced mode applies the band penalties per group.
RunLog train_router(RoutingEnvironment& env, RoutingPolicy& policy, const BandConfig& band,
                    const TrainerConfig& config);

struct SurfaceRow {
  double rho = 0.0;
  bool escalate = false;
  bool correct = false;
  double delta_esc = 0.0;
  double delta_ans = 0.0;
  double r = 0.0;
};

// Four rows per rho, branch order (0,1), (0,0), (1,1), (1,0).
std::vector<SurfaceRow> reward_surface_sweep(const BandConfig& band, std::span<const double> rho_grid);

struct LabeledQuery {
  std::vector<double> features;
  RouteLabel label = RouteLabel::Answer;
};

// Initial theta from logistic regression of features -> (label == Escalate).
// Feature 0 must be the constant 1.
std::vector<double> warm_start_theta(std::span<const LabeledQuery> data, int epochs, double learning_rate);

}  // namespace streamroute
