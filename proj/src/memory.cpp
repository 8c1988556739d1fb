// SPDX-License-Identifier: Apache-2.0
#include "streamroute/memory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "streamroute/error.hpp"
#include "streamroute/math.hpp"

namespace streamroute {

namespace {

void check_tau(double tau, const char* name) {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw ConfigError(std::string(name) + " must lie in (0, 1], got " + std::to_string(tau));
  }
}

// Dimension shared by all tokens of `frame`, 0 for a frame without tokens.
std::size_t frame_dimension(const Frame& frame) {
  if (frame.tokens.empty()) return 0;
  std::size_t d = frame.tokens.front().size();
  if (d == 0) throw StructuralError("frame " + std::to_string(frame.index) + ": empty token vector");
  for (const auto& t : frame.tokens) {
    if (t.size() != d) throw StructuralError("frame " + std::to_string(frame.index) + ": mixed token dimensions");
  }
  return d;
}

void merge_dimension(std::size_t& dimension, const Frame& frame) {
  std::size_t d = frame_dimension(frame);
  if (d == 0) return;
  if (dimension == 0) {
    dimension = d;
  } else if (d != dimension) {
    throw StructuralError("frame " + std::to_string(frame.index) + ": token dimension " + std::to_string(d) +
                          " does not match " + std::to_string(dimension));
  }
}

void similarity_drop(const Frame& frame, const Frame* predecessor, double tau, std::vector<MemoryToken>& out) {
  for (std::size_t j = 0; j < frame.tokens.size(); ++j) {
    if (predecessor != nullptr && j < predecessor->tokens.size() &&
        cosine(frame.tokens[j], predecessor->tokens[j]) >= tau - kSimilarityTolerance) {
      continue;
    }
    out.push_back({frame.index, j, frame.tokens[j]});
  }
}

void average_pool(const Frame& frame, std::size_t kernel, std::vector<MemoryToken>& out) {
  for (std::size_t start = 0, group = 0; start < frame.tokens.size(); start += kernel, ++group) {
    std::size_t stop = std::min(start + kernel, frame.tokens.size());
    TokenVector pooled(frame.tokens[start].size(), 0.0);
    for (std::size_t j = start; j < stop; ++j) {
      for (std::size_t k = 0; k < pooled.size(); ++k) pooled[k] += frame.tokens[j][k];
    }
    for (double& v : pooled) v /= static_cast<double>(stop - start);
    out.push_back({frame.index, group, std::move(pooled)});
  }
}

double squared_distance(const TokenVector& a, const TokenVector& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

void diversity_prune(const Frame& frame, double keep_fraction, std::vector<MemoryToken>& out) {
  const std::size_t n = frame.tokens.size();
  if (n == 0) return;
  std::size_t keep = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(n) - 1e-9)), 1, n);
  std::vector<bool> chosen(n, false);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = 0;
  for (std::size_t round = 0; round < keep; ++round) {
    chosen[pick] = true;
    for (std::size_t j = 0; j < n; ++j) {
      nearest[j] = std::min(nearest[j], squared_distance(frame.tokens[j], frame.tokens[pick]));
    }
    double best = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!chosen[j] && nearest[j] > best) {
        best = nearest[j];
        pick = j;
      }
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (chosen[j]) out.push_back({frame.index, j, frame.tokens[j]});
  }
}

void compress_frame(const Frame& frame, const Frame* predecessor, double tau, const CompressionOperator& op,
                    std::vector<MemoryToken>& out) {
  if (const auto* pool = std::get_if<AveragePool>(&op); pool != nullptr && tau < 1.0) {
    average_pool(frame, pool->kernel, out);
  } else if (const auto* prune = std::get_if<DiversityPrune>(&op); prune != nullptr && tau < 1.0) {
    diversity_prune(frame, prune->keep_fraction, out);
  } else if (std::holds_alternative<SimilarityDrop>(op)) {
    similarity_drop(frame, predecessor, tau, out);
  } else {
    for (std::size_t j = 0; j < frame.tokens.size(); ++j) out.push_back({frame.index, j, frame.tokens[j]});
  }
}

void check_operator(const CompressionOperator& op) {
  if (const auto* pool = std::get_if<AveragePool>(&op); pool != nullptr && pool->kernel == 0) {
    throw ConfigError("memory.pool_kernel must be a positive integer");
  }
  if (const auto* prune = std::get_if<DiversityPrune>(&op);
      prune != nullptr && !(prune->keep_fraction > 0.0 && prune->keep_fraction <= 1.0)) {
    throw ConfigError("memory.keep_fraction must lie in (0, 1]");
  }
}

}  // namespace

void CompressionPolicy::validate() const {
  check_tau(tau_near, "tau_near");
  check_tau(tau_hist, "tau_hist");
  if (tau_hist > tau_near) throw ConfigError("tau_hist must not exceed tau_near");
  if (window < 1) throw ConfigError("window must be at least 1");
  check_operator(op);
}

HistoryPartition partition_history(std::size_t current_step, std::size_t window) {
  if (current_step < 1) throw ConfigError("current_step must be at least 1");
  if (window < 1) throw ConfigError("window must be at least 1");
  HistoryPartition p;
  if (current_step > window) {
    p.historical = StepRange{1, current_step - window};
    p.nearby = StepRange{current_step - window + 1, current_step};
  } else {
    p.nearby = StepRange{1, current_step};
  }
  return p;
}

std::vector<MemoryToken> compress_zone(std::span<const Frame> frames, double tau, const CompressionOperator& op) {
  check_tau(tau, "tau");
  check_operator(op);
  std::size_t dimension = 0;
  for (const Frame& f : frames) merge_dimension(dimension, f);

  std::vector<MemoryToken> out;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    compress_frame(frames[k], k == 0 ? nullptr : &frames[k - 1], tau, op, out);
  }
  return out;
}

double MemoryState::drop_ratio() const noexcept {
  std::size_t input = input_token_count();
  if (input == 0) return 0.0;
  return 1.0 - static_cast<double>(retained_token_count()) / static_cast<double>(input);
}

MemoryState update_memory(MemoryState state, const Frame& new_frame, const CompressionPolicy& policy) {
  policy.validate();
  if (new_frame.index != state.last_index_ + 1) {
    throw SequencingError("expected frame " + std::to_string(state.last_index_ + 1) + ", got " +
                          std::to_string(new_frame.index));
  }
  merge_dimension(state.dimension_, new_frame);

  const Frame* predecessor = nullptr;
  if (!state.window_frames_.empty()) {
    predecessor = &state.window_frames_.back();
  } else if (state.last_aged_) {
    predecessor = &*state.last_aged_;
  }
  std::vector<MemoryToken> fresh;
  compress_frame(new_frame, predecessor, policy.tau_near, policy.op, fresh);

  while (state.window_frames_.size() >= policy.window) {
    Frame aged = std::move(state.window_frames_.front());
    state.window_frames_.pop_front();
    auto first_newer = std::find_if(state.nearby_.begin(), state.nearby_.end(),
                                    [&](const MemoryToken& t) { return t.frame != aged.index; });
    state.nearby_.erase(state.nearby_.begin(), first_newer);
    state.nearby_input_ -= aged.tokens.size();

    compress_frame(aged, state.last_aged_ ? &*state.last_aged_ : nullptr, policy.tau_hist, policy.op,
                   state.historical_);
    state.historical_input_ += aged.tokens.size();
    state.last_aged_ = std::move(aged);
  }

  state.nearby_.insert(state.nearby_.end(), std::make_move_iterator(fresh.begin()),
                       std::make_move_iterator(fresh.end()));
  state.nearby_input_ += new_frame.tokens.size();
  state.window_frames_.push_back(new_frame);
  state.last_index_ = new_frame.index;
  return state;
}

MemoryState replay_memory(std::span<const Frame> frames, const CompressionPolicy& policy) {
  MemoryState state;
  for (const Frame& f : frames) state = update_memory(std::move(state), f, policy);
  return state;
}

}  // namespace streamroute
