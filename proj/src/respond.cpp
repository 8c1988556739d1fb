// SPDX-License-Identifier: Apache-2.0
#include "streamroute/respond.hpp"

#include <string>

#include "streamroute/error.hpp"
#include "streamroute/math.hpp"
#include "streamroute/random.hpp"

namespace streamroute {

double readiness_probability(const ReadinessHead& head, std::span<const double> features) {
  if (features.size() != head.dimension()) {
    throw StructuralError("readiness features have dimension " + std::to_string(features.size()) +
                          ", head expects " + std::to_string(head.dimension()));
  }
  return sigmoid(dot(head.weights(), features) + head.bias());
}

ReadinessAction readiness_action(double p_ready) noexcept {
  return p_ready < 0.5 ? ReadinessAction::EmitRoutine : ReadinessAction::ContinueToReason;
}

std::vector<ReadinessExample> generate_boundary_dataset(std::size_t clue_step, std::size_t stream_length,
                                                        const Featurizer& featurizer) {
  if (clue_step < 1 || clue_step > stream_length) {
    throw ConfigError("clue_step " + std::to_string(clue_step) + " outside [1, " + std::to_string(stream_length) +
                      "]");
  }
  std::vector<ReadinessExample> out;
  for (int offset = kFirstBoundaryOffset; offset <= kLastBoundaryOffset; ++offset) {
    long long step = static_cast<long long>(clue_step) + offset;
    if (step < 1 || step > static_cast<long long>(stream_length)) continue;
    auto s = static_cast<std::size_t>(step);
    out.push_back({s, offset, featurizer(s), offset >= 0 ? Readiness::Ready : Readiness::Unready});
  }
  return out;
}

ReadinessFit train_readiness_head(std::span<const ReadinessExample> examples, int epochs, double learning_rate,
                                  std::uint64_t seed) {
  if (examples.empty()) throw DataError("readiness training needs at least one example");
  if (epochs < 1) throw ConfigError("readiness epochs must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("readiness learning_rate must be positive");

  const std::size_t dim = examples.front().features.size();
  std::vector<std::vector<double>> features;
  std::vector<double> targets;
  features.reserve(examples.size());
  targets.reserve(examples.size());
  std::size_t ready = 0;
  for (const auto& ex : examples) {
    if (ex.features.size() != dim) throw DataError("readiness examples have mixed feature dimensions");
    features.push_back(ex.features);
    bool is_ready = ex.label == Readiness::Ready;
    targets.push_back(is_ready ? 1.0 : 0.0);
    ready += is_ready ? 1 : 0;
  }

  Rng rng(seed);
  std::vector<double> w0(dim);
  for (double& w : w0) w = 0.01 * rng.normal();

  LogisticFit fit = fit_logistic(features, targets, std::move(w0), 0.0, epochs, learning_rate);
  ReadinessFit result;
  result.head = ReadinessHead(std::move(fit.weights), fit.bias);
  result.loss_history = std::move(fit.loss_history);
  if (ready == 0 || ready == examples.size()) {
    result.degenerate_data = true;
    result.warning = ready == 0 ? "all examples are Unready; the head cannot learn a boundary"
                                : "all examples are Ready; the head cannot learn a boundary";
  }
  return result;
}

double readiness_accuracy(const ReadinessHead& head, std::span<const ReadinessExample> examples) {
  if (examples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : examples) {
    bool predicted_ready = readiness_action(readiness_probability(head, ex.features)) == ReadinessAction::ContinueToReason;
    hits += predicted_ready == (ex.label == Readiness::Ready) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

}  // namespace streamroute
