// SPDX-License-Identifier: Apache-2.0
#include "streamroute/reason.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "streamroute/error.hpp"
#include "streamroute/math.hpp"
#include "streamroute/parallel.hpp"

namespace streamroute {

namespace {

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericalError(std::string(what) + " contains a non-finite value");
  }
}

}  // namespace

void BandConfig::validate() const {
  if (!in_unit(eta)) throw ConfigError("eta must lie in [0, 1]");
  if (!in_unit(gamma)) throw ConfigError("gamma must lie in [0, 1]");
  if (upper() < 0.0 || lower() > 1.0) throw ConfigError("band [eta-gamma, eta+gamma] does not meet [0, 1]");
}

RouteLabel sft_route_label(std::span<const double> scores, const SftLabelerConfig& config) {
  if (config.k < 1) throw ConfigError("sft k must be at least 1");
  if (scores.size() != config.k) {
    throw DataError("expected " + std::to_string(config.k) + " scores, got " + std::to_string(scores.size()));
  }
  for (double s : scores) {
    bool ok = config.scale == ScoreScale::Binary ? (s == 0.0 || s == 1.0) : (s >= 0.0 && s <= 5.0);
    if (!ok) throw DataError("score " + std::to_string(s) + " is outside the declared scale");
  }
  return mean(scores) >= config.quality_threshold ? RouteLabel::Answer : RouteLabel::Escalate;
}

int naive_reward(bool escalate, bool correct) noexcept {
  if (!escalate) return correct ? 2 : -1;
  return correct ? 1 : 0;
}

BandPenalties band_penalties(double rho, const BandConfig& band) noexcept {
  return {std::clamp(rho - band.upper(), 0.0, 1.0), std::clamp(band.lower() - rho, 0.0, 1.0)};
}

RewardBreakdown modulated_reward(bool escalate, bool correct, BandPenalties penalties) noexcept {
  RewardBreakdown b;
  b.r_naive = naive_reward(escalate, correct);
  b.delta_esc = penalties.delta_esc;
  b.delta_ans = penalties.delta_ans;
  if (escalate) {
    b.r = (1.0 - b.delta_esc) * b.r_naive - (correct ? 0.0 : b.delta_esc);
  } else {
    b.r = (1.0 - b.delta_ans) * b.r_naive - (correct ? 0.0 : 2.0 * b.delta_ans);
  }
  return b;
}

std::vector<double> group_advantages(std::span<const double> rewards, double adv_epsilon) {
  if (rewards.size() < 2) throw DataError("a rollout group needs at least two outcomes");
  if (!(adv_epsilon > 0.0)) throw ConfigError("adv_epsilon must be positive");
  std::vector<double> out(rewards.size(), 0.0);
  auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) return out;
  const double n = static_cast<double>(rewards.size());
  // Two-pass mean: the second pass removes the rounding left by the first.
  double m = mean(rewards);
  double correction = 0.0;
  for (double r : rewards) correction += r - m;
  m += correction / n;
  double var = 0.0;
  for (double r : rewards) var += (r - m) * (r - m);
  double denom = std::sqrt(var / n) + adv_epsilon;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - m) / denom;
  return out;
}

std::size_t RolloutGroup::escalations() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(outcomes.begin(), outcomes.end(), [](const RolloutOutcome& o) { return o.escalate; }));
}

double RolloutGroup::rho() const noexcept {
  if (outcomes.empty()) return 0.0;
  return static_cast<double>(escalations()) / static_cast<double>(outcomes.size());
}

RoutingPolicy::RoutingPolicy(std::vector<double> theta)
    : theta_(std::move(theta)), reference_(theta_), behavior_(theta_) {
  if (theta_.empty()) throw StructuralError("routing policy needs at least one parameter");
  require_finite(theta_, "theta");
}

void RoutingPolicy::set_theta(std::vector<double> theta) {
  if (theta.size() != theta_.size()) throw StructuralError("theta dimension cannot change");
  require_finite(theta, "theta");
  theta_ = std::move(theta);
}

double RoutingPolicy::escalate_probability(std::span<const double> features) const {
  return sigmoid(dot(theta_, features));
}

double RoutingPolicy::behavior_escalate_probability(std::span<const double> features) const {
  return sigmoid(dot(behavior_, features));
}

double RoutingPolicy::log_prob(bool escalate, std::span<const double> features) const {
  double z = dot(theta_, features);
  return log_sigmoid(escalate ? z : -z);
}

double RoutingPolicy::behavior_log_prob(bool escalate, std::span<const double> features) const {
  double z = dot(behavior_, features);
  return log_sigmoid(escalate ? z : -z);
}

void TrainerConfig::validate() const {
  if (group_size < 2) throw ConfigError("trainer.group_size must be at least 2");
  if (batch_size < 1) throw ConfigError("trainer.batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("trainer.learning_rate must be positive");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) throw ConfigError("trainer.clip_epsilon must lie in (0, 1)");
  if (!(kl_coeff >= 0.0)) throw ConfigError("trainer.kl_coeff must be non-negative");
  if (!(adv_epsilon > 0.0)) throw ConfigError("trainer.adv_epsilon must be positive");
}

SurrogateResult tb_grpo_surrogate(const RolloutGroup& group, std::span<const double> advantages,
                                  const RoutingPolicy& policy, const TrainerConfig& config) {
  if (advantages.size() != group.outcomes.size()) throw StructuralError("advantages do not match the group");
  if (group.outcomes.empty()) throw DataError("empty rollout group");
  if (group.features.size() != policy.dimension()) throw StructuralError("group features do not match theta");

  const double z = dot(policy.theta(), group.features);
  const double z_ref = dot(policy.reference(), group.features);
  if (!std::isfinite(z) || !std::isfinite(z_ref)) {
    throw NumericalError("non-finite routing logit for query " + group.query_id);
  }
  const double p = sigmoid(z);
  const double lo = 1.0 - config.clip_epsilon;
  const double hi = 1.0 + config.clip_epsilon;

  SurrogateResult out;
  double term_sum = 0.0;
  double dterm_dz = 0.0;
  for (std::size_t i = 0; i < group.outcomes.size(); ++i) {
    const auto& o = group.outcomes[i];
    if (!std::isfinite(o.log_prob_behavior)) {
      throw NumericalError("non-finite behavior log-probability in group " + group.query_id + " outcome " +
                           std::to_string(i));
    }
    double log_pi = log_sigmoid(o.escalate ? z : -z);
    double w = std::exp(log_pi - o.log_prob_behavior);
    if (!std::isfinite(w)) throw NumericalError("importance ratio overflow in group " + group.query_id);
    double a = advantages[i];
    double unclipped = w * a;
    double clipped = std::clamp(w, lo, hi) * a;
    if (clipped < unclipped) {
      term_sum += clipped;
      ++out.clipped;
    } else {
      term_sum += unclipped;
      double dlog_dz = o.escalate ? 1.0 - p : -p;
      dterm_dz += a * w * dlog_dz;
    }
  }
  const double g = static_cast<double>(group.outcomes.size());

  // Two-point KL(pi_theta || pi_ref) and its logit derivative p(1-p)(z - z_ref).
  double log_p = log_sigmoid(z), log_q = log_sigmoid(z_ref);
  double log_1p = log_sigmoid(-z), log_1q = log_sigmoid(-z_ref);
  out.kl = p * (log_p - log_q) + (1.0 - p) * (log_1p - log_1q);
  double dkl_dz = p * (1.0 - p) * (z - z_ref);

  double objective = term_sum / g - config.kl_coeff * out.kl;
  double dobj_dz = dterm_dz / g - config.kl_coeff * dkl_dz;
  out.loss = -objective;
  out.gradient.resize(group.features.size());
  for (std::size_t k = 0; k < group.features.size(); ++k) out.gradient[k] = -dobj_dz * group.features[k];
  return out;
}

namespace {

double tail_mean(const std::vector<StepMetrics>& steps, std::size_t n, double StepMetrics::*field) {
  if (steps.empty()) return 0.0;
  std::size_t count = std::min(n, steps.size());
  double total = 0.0;
  for (std::size_t i = steps.size() - count; i < steps.size(); ++i) total += steps[i].*field;
  return total / static_cast<double>(count);
}

struct GroupWork {
  RolloutGroup group;
  GroupDiagnostics diag;
  SurrogateResult surrogate;
  double naive_sum = 0.0;
  std::size_t correct = 0;
};

}  // namespace

double RunLog::tail_mean_rho(std::size_t n) const { return tail_mean(steps, n, &StepMetrics::rho_raw); }
double RunLog::tail_mean_rho_ema(std::size_t n) const { return tail_mean(steps, n, &StepMetrics::rho_ema); }
double RunLog::tail_mean_reward(std::size_t n) const { return tail_mean(steps, n, &StepMetrics::mean_reward); }
double RunLog::tail_mean_naive_reward(std::size_t n) const {
  return tail_mean(steps, n, &StepMetrics::mean_naive_reward);
}

RunLog train_router(RoutingEnvironment& env, RoutingPolicy& policy, const BandConfig& band,
                    const TrainerConfig& config) {
  config.validate();
  band.validate();
  RunLog log;
  const std::size_t G = config.group_size;

  for (std::size_t step = 1; step <= config.steps; ++step) {
    policy.snapshot_behavior();
    auto batch = env.next_batch(step, config.batch_size);
    if (!batch || batch->empty()) {
      log.truncated = true;
      log.stop_reason = "environment exhausted before step " + std::to_string(step);
      break;
    }

    std::vector<GroupWork> work(batch->size());
    parallel_for(batch->size(), config.jobs, [&](std::size_t b) {
      const QuerySample& q = (*batch)[b];
      if (q.features.size() != policy.dimension()) throw StructuralError("query features do not match theta");
      GroupWork& gw = work[b];
      gw.group.query_id = q.id;
      gw.group.features = q.features;
      gw.group.outcomes.resize(G);
      double p_behavior = policy.behavior_escalate_probability(q.features);
      for (std::size_t i = 0; i < G; ++i) {
        Rng rng(config.seed, {step, b, i});
        bool e = rng.uniform() < p_behavior;
        bool c = env.correct(q, e, rng);
        gw.group.outcomes[i] = {e, c, policy.behavior_log_prob(e, q.features)};
      }

      BandPenalties pen = config.mode == TrainerMode::TargetBalanced ? band_penalties(gw.group.rho(), band)
                                                                     : BandPenalties{};
      std::vector<double> rewards(G);
      gw.diag.query_id = q.id;
      gw.diag.difficulty = q.difficulty;
      gw.diag.p_escalate = p_behavior;
      gw.diag.rho = gw.group.rho();
      gw.diag.delta_esc = pen.delta_esc;
      gw.diag.delta_ans = pen.delta_ans;
      for (std::size_t i = 0; i < G; ++i) {
        const auto& o = gw.group.outcomes[i];
        RewardBreakdown rb = modulated_reward(o.escalate, o.correct, pen);
        rewards[i] = rb.r;
        gw.naive_sum += rb.r_naive;
        gw.correct += o.correct ? 1 : 0;
        gw.diag.escalate.push_back(o.escalate ? 1 : 0);
        gw.diag.correct.push_back(o.correct ? 1 : 0);
      }
      gw.diag.advantages = group_advantages(rewards, config.adv_epsilon);
      gw.diag.rewards = std::move(rewards);
      gw.surrogate = tb_grpo_surrogate(gw.group, gw.diag.advantages, policy, config);
    });

    StepMetrics m;
    m.step = step;
    std::vector<double> grad(policy.dimension(), 0.0);
    double reward_sum = 0.0, naive_sum = 0.0;
    std::size_t correct = 0;
    for (auto& gw : work) {
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += gw.surrogate.gradient[k];
      m.loss += gw.surrogate.loss;
      m.kl += gw.surrogate.kl;
      m.escalate_count += gw.group.escalations();
      reward_sum += std::accumulate(gw.diag.rewards.begin(), gw.diag.rewards.end(), 0.0);
      naive_sum += gw.naive_sum;
      correct += gw.correct;
    }
    const double groups = static_cast<double>(work.size());
    const double samples = groups * static_cast<double>(G);
    std::vector<double> theta = policy.theta();
    double sq = 0.0;
    for (std::size_t k = 0; k < grad.size(); ++k) {
      grad[k] /= groups;
      sq += grad[k] * grad[k];
      theta[k] -= config.learning_rate * grad[k];
    }
    policy.set_theta(std::move(theta));

    m.loss /= groups;
    m.kl /= groups;
    m.grad_norm = std::sqrt(sq);
    m.answer_count = static_cast<std::size_t>(samples) - m.escalate_count;
    m.rho_raw = static_cast<double>(m.escalate_count) / samples;
    m.rho_ema = log.steps.empty() ? m.rho_raw : kRhoEmaDecay * log.steps.back().rho_ema + (1.0 - kRhoEmaDecay) * m.rho_raw;
    m.mean_reward = reward_sum / samples;
    m.mean_naive_reward = naive_sum / samples;
    m.accuracy = static_cast<double>(correct) / samples;
    m.groups.reserve(work.size());
    for (auto& gw : work) m.groups.push_back(std::move(gw.diag));
    log.steps.push_back(std::move(m));
  }
  return log;
}

std::vector<SurfaceRow> reward_surface_sweep(const BandConfig& band, std::span<const double> rho_grid) {
  band.validate();
  static constexpr bool kBranches[4][2] = {{false, true}, {false, false}, {true, true}, {true, false}};
  std::vector<SurfaceRow> rows;
  rows.reserve(rho_grid.size() * 4);
  for (double rho : rho_grid) {
    if (!in_unit(rho)) throw ConfigError("rho grid values must lie in [0, 1]");
    BandPenalties pen = band_penalties(rho, band);
    for (const auto& br : kBranches) {
      RewardBreakdown rb = modulated_reward(br[0], br[1], pen);
      rows.push_back({rho, br[0], br[1], rb.delta_esc, rb.delta_ans, rb.r});
    }
  }
  return rows;
}

std::vector<double> warm_start_theta(std::span<const LabeledQuery> data, int epochs, double learning_rate) {
  if (data.empty()) throw DataError("warm start needs labeled queries");
  std::vector<std::vector<double>> features;
  std::vector<double> targets;
  for (const auto& d : data) {
    features.push_back(d.features);
    targets.push_back(d.label == RouteLabel::Escalate ? 1.0 : 0.0);
  }
  // Feature 0 is the constant column of the routing features, so the fitted
  // bias folds into it.
  LogisticFit fit = fit_logistic(features, targets, std::vector<double>(features.front().size(), 0.0), 0.0, epochs,
                                 learning_rate);
  fit.weights[0] += fit.bias;
  return fit.weights;
}

}  // namespace streamroute
