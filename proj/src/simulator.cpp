// SPDX-License-Identifier: Apache-2.0
#include "streamroute/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "streamroute/error.hpp"
#include "streamroute/math.hpp"
#include "streamroute/parallel.hpp"

namespace streamroute {

namespace {

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::min(static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)), n - 1);
}

std::string query_id(std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return "q" + digits;
}

}  // namespace

void SyntheticStreamConfig::validate() const {
  if (length < 1) throw ConfigError("environment.stream.length must be at least 1");
  if (tokens_per_frame < 1) throw ConfigError("environment.stream.tokens_per_frame must be at least 1");
  if (dim < 1) throw ConfigError("environment.stream.dim must be at least 1");
  if (!(temporal_correlation >= 0.0 && temporal_correlation < 1.0)) {
    throw ConfigError("environment.stream.temporal_correlation must lie in [0, 1)");
  }
}

std::vector<Frame> generate_stream(const SyntheticStreamConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const double rho = config.temporal_correlation;
  const double fresh = std::sqrt(1.0 - rho * rho);
  std::vector<Frame> frames(config.length);
  for (std::size_t t = 0; t < config.length; ++t) {
    frames[t].index = t + 1;
    frames[t].tokens.assign(config.tokens_per_frame, TokenVector(config.dim));
    for (std::size_t j = 0; j < config.tokens_per_frame; ++j) {
      for (std::size_t k = 0; k < config.dim; ++k) {
        double noise = rng.normal();
        frames[t].tokens[j][k] = t == 0 ? noise : rho * frames[t - 1].tokens[j][k] + fresh * noise;
      }
    }
  }
  return frames;
}

void OracleConfig::validate() const {
  for (double v : {fast_a, fast_b, fast_c, slow_a, slow_b}) {
    if (!std::isfinite(v)) throw ConfigError("environment.oracle coefficients must be finite");
  }
  if (!(fast_cost > 0.0)) throw ConfigError("environment.oracle.fast_cost must be positive");
  if (!(slow_cost > 0.0)) throw ConfigError("environment.oracle.slow_cost must be positive");
}

double fast_correct_probability(double difficulty, double fidelity, const OracleConfig& config) {
  if (!in_unit(difficulty) || !in_unit(fidelity)) throw DataError("difficulty and fidelity must lie in [0, 1]");
  return sigmoid(config.fast_a - config.fast_b * difficulty + config.fast_c * (fidelity - 0.5));
}

double slow_correct_probability(double difficulty, const OracleConfig& config) {
  if (!in_unit(difficulty)) throw DataError("difficulty must lie in [0, 1]");
  return sigmoid(config.slow_a - config.slow_b * difficulty);
}

bool fast_oracle_correct(double difficulty, double fidelity, const OracleConfig& config, double draw) {
  return draw < fast_correct_probability(difficulty, fidelity, config);
}

bool slow_oracle_correct(double difficulty, const OracleConfig& config, double draw) {
  return draw < slow_correct_probability(difficulty, config);
}

double memory_fidelity(const MemoryState& state, std::size_t window) {
  if (window < 1) throw ConfigError("window must be at least 1");
  if (state.nearby_frame_count() > window) throw StructuralError("memory holds more nearby frames than the window");
  double keep_near = state.nearby_input_count() == 0
                         ? 1.0
                         : static_cast<double>(state.nearby_tokens().size()) /
                               static_cast<double>(state.nearby_input_count());
  double keep_hist = state.historical_input_count() == 0
                         ? 0.0
                         : static_cast<double>(state.historical_tokens().size()) /
                               static_cast<double>(state.historical_input_count());
  return std::clamp(keep_near - 0.2 * keep_hist, 0.0, 1.0);
}

std::vector<double> fidelity_trajectory(std::span<const Frame> frames, const CompressionPolicy& policy) {
  std::vector<double> out;
  out.reserve(frames.size());
  MemoryState state;
  for (const Frame& f : frames) {
    state = update_memory(std::move(state), f, policy);
    out.push_back(memory_fidelity(state, policy.window));
  }
  return out;
}

void QueryConfig::validate() const {
  if (count < 1) throw ConfigError("environment.queries.count must be at least 1");
  if (!in_unit(mixture_low)) throw ConfigError("environment.queries.mixture_low must lie in [0, 1]");
  if (!in_unit(mixture_high)) throw ConfigError("environment.queries.mixture_high must lie in [0, 1]");
  if (!in_unit(mixture_weight)) throw ConfigError("environment.queries.mixture_weight must lie in [0, 1]");
  if (!(mixture_spread >= 0.0)) throw ConfigError("environment.queries.mixture_spread must be non-negative");
}

double sample_difficulty(const QueryConfig& config, Rng& rng) {
  if (config.distribution == DifficultyDistribution::Uniform) return rng.uniform();
  double center = rng.uniform() < config.mixture_weight ? config.mixture_high : config.mixture_low;
  return std::clamp(center + config.mixture_spread * rng.normal(), 0.0, 1.0);
}

std::vector<double> routing_features(double difficulty) { return {1.0, 4.0 * (difficulty - 0.5)}; }

std::vector<Query> generate_queries(const QueryConfig& config, std::size_t stream_length, std::uint64_t seed) {
  config.validate();
  if (stream_length < 1) throw ConfigError("stream length must be at least 1");
  std::vector<Query> out(config.count);
  for (std::size_t i = 0; i < config.count; ++i) {
    Rng rng(seed, {i});
    Query& q = out[i];
    q.id = query_id(i);
    q.arrival_step = 1 + uniform_index(rng, stream_length);
    q.clue_step = std::min(q.arrival_step + uniform_index(rng, config.max_clue_delay + 1), stream_length);
    q.difficulty = sample_difficulty(config, rng);
    q.features = routing_features(q.difficulty);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Query& a, const Query& b) { return a.arrival_step < b.arrival_step; });
  return out;
}

std::vector<double> readiness_features(const Query& query, std::size_t step, double fidelity) {
  return {step >= query.clue_step ? 1.0 : 0.0, fidelity, query.difficulty};
}

ReadinessFit train_readiness_for_episode(std::span<const Frame> frames, std::span<const Query> queries,
                                         const CompressionPolicy& policy, int epochs, double learning_rate,
                                         std::uint64_t seed) {
  std::vector<double> fid = fidelity_trajectory(frames, policy);
  std::vector<ReadinessExample> examples;
  for (const Query& q : queries) {
    auto part = generate_boundary_dataset(q.clue_step, frames.size(), [&](std::size_t step) {
      return readiness_features(q, step, fid[step - 1]);
    });
    examples.insert(examples.end(), part.begin(), part.end());
  }
  return train_readiness_head(examples, epochs, learning_rate, seed);
}

SyntheticRoutingEnvironment::SyntheticRoutingEnvironment(const SyntheticStreamConfig& stream,
                                                         const CompressionPolicy& memory, const OracleConfig& oracle,
                                                         const QueryConfig& queries, std::uint64_t seed,
                                                         std::optional<std::size_t> max_batches)
    : oracle_(oracle), queries_(queries), seed_(seed), max_batches_(max_batches) {
  oracle_.validate();
  queries_.validate();
  fidelity_ = fidelity_trajectory(generate_stream(stream), memory);
}

std::optional<std::vector<QuerySample>> SyntheticRoutingEnvironment::next_batch(std::size_t step,
                                                                                std::size_t batch_size) {
  if (max_batches_ && served_ >= *max_batches_) return std::nullopt;
  ++served_;
  std::vector<QuerySample> batch(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    Rng rng(seed_, {step, b});
    QuerySample& q = batch[b];
    q.id = "s" + std::to_string(step) + "-" + std::to_string(b);
    q.difficulty = sample_difficulty(queries_, rng);
    q.features = routing_features(q.difficulty);
    q.fidelity = fidelity_[uniform_index(rng, fidelity_.size())];
  }
  return batch;
}

bool SyntheticRoutingEnvironment::correct(const QuerySample& query, bool escalate, Rng& rng) const {
  double draw = rng.uniform();
  return escalate ? slow_oracle_correct(query.difficulty, oracle_, draw)
                  : fast_oracle_correct(query.difficulty, query.fidelity, oracle_, draw);
}

const char* to_string(Action action) noexcept {
  switch (action) {
    case Action::Answer:
      return "answer";
    case Action::Escalate:
      return "escalate";
    case Action::Routine:
      return "routine";
  }
  return "unknown";
}

PipelineResult run_pipeline(std::span<const Frame> stream, std::span<const Query> queries,
                            const CompressionPolicy& memory_policy, const ReadinessHead& readiness_head,
                            const RoutingPolicy& routing_policy, const OracleConfig& oracle,
                            const PipelineOptions& options) {
  memory_policy.validate();
  oracle.validate();
  if (readiness_head.dimension() != kReadinessFeatureDim) {
    throw StructuralError("readiness head dimension must be " + std::to_string(kReadinessFeatureDim));
  }
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const Query& q = queries[i];
    if (i > 0 && q.arrival_step < queries[i - 1].arrival_step) {
      throw ConfigError("queries must be sorted by arrival_step (query " + q.id + ")");
    }
    if (q.arrival_step < 1) throw DataError("query " + q.id + ": arrival_step must be at least 1");
    if (!in_unit(q.difficulty)) throw DataError("query " + q.id + ": difficulty must lie in [0, 1]");
    if (q.features.size() != routing_policy.dimension()) {
      throw StructuralError("query " + q.id + ": routing features do not match the policy");
    }
  }

  PipelineResult result;
  PipelineMetrics& m = result.metrics;
  m.queries = queries.size();
  MemoryState memory;
  std::vector<std::size_t> pending;
  std::size_t next = 0;

  for (std::size_t t = 1; t <= stream.size(); ++t) {
    memory = update_memory(std::move(memory), stream[t - 1], memory_policy);
    const double fid = memory_fidelity(memory, memory_policy.window);
    while (next < queries.size() && queries[next].arrival_step <= t) pending.push_back(next++);

    std::vector<ActionRecord> records(pending.size());
    parallel_for(pending.size(), options.jobs, [&](std::size_t k) {
      const std::size_t idx = pending[k];
      const Query& q = queries[idx];
      ActionRecord& r = records[k];
      r.step = t;
      r.query_id = q.id;
      r.fidelity = fid;
      r.p_ready = readiness_probability(readiness_head, readiness_features(q, t, fid));
      if (readiness_action(r.p_ready) == ReadinessAction::EmitRoutine) {
        r.action = Action::Routine;
        return;
      }
      Rng rng(options.seed, {t, idx});
      double route_draw = rng.uniform();
      double p_esc = 0.0;
      switch (options.route) {
        case RouteOverride::Policy:
          p_esc = routing_policy.escalate_probability(q.features);
          break;
        case RouteOverride::AlwaysFast:
          p_esc = 0.0;
          break;
        case RouteOverride::AlwaysSlow:
          p_esc = 1.0;
          break;
      }
      r.p_escalate = p_esc;
      bool escalate = route_draw < p_esc;
      double draw = rng.uniform();
      if (escalate) {
        r.action = Action::Escalate;
        r.correct = slow_oracle_correct(q.difficulty, oracle, draw);
        r.cost = oracle.slow_cost;
      } else {
        r.action = Action::Answer;
        r.correct = fast_oracle_correct(q.difficulty, fid, oracle, draw);
        r.cost = oracle.fast_cost;
      }
    });

    std::vector<std::size_t> still_pending;
    for (std::size_t k = 0; k < records.size(); ++k) {
      const ActionRecord& r = records[k];
      ++m.encounters;
      switch (r.action) {
        case Action::Routine:
          ++m.routines;
          still_pending.push_back(pending[k]);
          break;
        case Action::Answer:
          ++m.answers;
          break;
        case Action::Escalate:
          ++m.escalations;
          break;
      }
      if (r.correct.value_or(false)) ++m.correct;
    }
    pending = std::move(still_pending);
    std::move(records.begin(), records.end(), std::back_inserter(result.trace.records));
  }

  m.resolved = m.answers + m.escalations;
  m.unresolved = m.queries - m.resolved;
  if (m.resolved > 0) {
    const double resolved = static_cast<double>(m.resolved);
    m.accuracy = static_cast<double>(m.correct) / resolved;
    m.escalation_ratio = static_cast<double>(m.escalations) / resolved;
    m.mean_cost = (oracle.fast_cost * static_cast<double>(m.answers) +
                   oracle.slow_cost * static_cast<double>(m.escalations)) /
                  resolved;
  }
  if (m.encounters > 0) m.routine_ratio = static_cast<double>(m.routines) / static_cast<double>(m.encounters);
  m.drop_ratio = memory.drop_ratio();
  return result;
}

double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.empty() || p.size() != q.size()) throw DataError("jsd: distributions must be nonempty and equal length");
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0) || !(q[i] >= 0.0) || !std::isfinite(p[i]) || !std::isfinite(q[i])) {
      throw DataError("jsd: probabilities must be finite and non-negative");
    }
    sp += p[i];
    sq += q[i];
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9) throw DataError("jsd: distributions must sum to 1");

  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) total += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) total += 0.5 * q[i] * std::log(q[i] / m);
  }
  return std::clamp(total, 0.0, std::numbers::ln2);
}

double deletion_impact(std::span<const double> reference, std::span<const double> modified) {
  return jsd(reference, modified);
}

std::vector<double> toy_next_token_distribution(std::span<const MemoryToken> memory, std::span<const double> probe) {
  std::vector<double> logits;
  logits.reserve(memory.size());
  for (const MemoryToken& t : memory) logits.push_back(dot(probe, t.value));
  return softmax(logits);
}

namespace {

// Softmax over the logits that survive deletion; deleted slots get 0. This is
// the reference distribution renormalized, without underflow when the kept
// mass is tiny.
std::vector<double> softmax_without(std::span<const double> logits, const std::vector<bool>& deleted) {
  std::vector<double> kept;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!deleted[i]) kept.push_back(logits[i]);
  }
  std::vector<double> probs = softmax(kept);
  std::vector<double> out(logits.size(), 0.0);
  for (std::size_t i = 0, k = 0; i < logits.size(); ++i) {
    if (!deleted[i]) out[i] = probs[k++];
  }
  return out;
}

}  // namespace

ZoneImpact zone_deletion_impact(std::span<const Frame> frames, std::size_t window, std::span<const double> probe) {
  if (window < 1) throw ConfigError("window must be at least 1");
  if (frames.size() <= window) throw ConfigError("deletion impact needs more frames than the window");
  std::vector<MemoryToken> memory;
  for (const Frame& f : frames) {
    for (std::size_t j = 0; j < f.tokens.size(); ++j) memory.push_back({f.index, j, f.tokens[j]});
  }
  const std::size_t boundary = frames.back().index - window;  // last historical index
  std::vector<double> logits;
  logits.reserve(memory.size());
  for (const MemoryToken& t : memory) logits.push_back(dot(probe, t.value));
  std::vector<double> reference = softmax(logits);
  std::vector<bool> historical(memory.size()), nearby(memory.size());
  for (std::size_t i = 0; i < memory.size(); ++i) {
    historical[i] = memory[i].frame <= boundary;
    nearby[i] = !historical[i];
  }
  return {deletion_impact(reference, softmax_without(logits, historical)),
          deletion_impact(reference, softmax_without(logits, nearby))};
}

ZoneImpact mean_zone_deletion_impact(const SyntheticStreamConfig& stream, std::size_t window, std::size_t trials,
                                     std::uint64_t seed) {
  if (trials < 1) throw ConfigError("trials must be at least 1");
  ZoneImpact total;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    SyntheticStreamConfig cfg = stream;
    cfg.seed = derive_seed(seed, {trial});
    std::vector<Frame> frames = generate_stream(cfg);
    Rng rng(seed, {trial, 1});
    const TokenVector& probe = frames.back().tokens[uniform_index(rng, frames.back().tokens.size())];
    ZoneImpact z = zone_deletion_impact(frames, window, probe);
    total.historical += z.historical;
    total.nearby += z.nearby;
  }
  total.historical /= static_cast<double>(trials);
  total.nearby /= static_cast<double>(trials);
  return total;
}

}  // namespace streamroute
