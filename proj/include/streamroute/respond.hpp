// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace streamroute {

class ReadinessHead {
 public:
  explicit ReadinessHead(std::size_t dimension) : weights_(dimension, 0.0) {}
  ReadinessHead(std::vector<double> weights, double bias) : weights_(std::move(weights)), bias_(bias) {}

  std::size_t dimension() const noexcept { return weights_.size(); }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double bias() const noexcept { return bias_; }

  bool operator==(const ReadinessHead&) const = default;

 private:
  std::vector<double> weights_;
  double bias_ = 0.0;
};

enum class Readiness { Unready, Ready };
enum class ReadinessAction { EmitRoutine, ContinueToReason };

struct ReadinessExample {
  std::size_t step = 1;
  int offset = 0;  // step - clue_step, in [-3, 2]
  std::vector<double> features;
  Readiness label = Readiness::Unready;

  bool operator==(const ReadinessExample&) const = default;
};

// Throws StructuralError on dimension mismatch.
double readiness_probability(const ReadinessHead& head, std::span<const double> features);
ReadinessAction readiness_action(double p_ready) noexcept;

using Featurizer = std::function<std::vector<double>(std::size_t step)>;

inline constexpr int kFirstBoundaryOffset = -3;
inline constexpr int kLastBoundaryOffset = 2;

// Examples at clue_step + {-3..2} that fall inside [1, stream_length].
// Throws ConfigError unless 1 <= clue_step <= stream_length.
std::vector<ReadinessExample> generate_boundary_dataset(std::size_t clue_step, std::size_t stream_length,
                                                        const Featurizer& featurizer);

struct ReadinessFit {
  ReadinessHead head{0};
  std::vector<double> loss_history;
  bool degenerate_data = false;
  std::string warning;
};

// Logistic regression by full-batch gradient descent; `seed` sets the initial
// weights only. Throws DataError on an empty set or mixed feature dimensions.
ReadinessFit train_readiness_head(std::span<const ReadinessExample> examples, int epochs, double learning_rate,
                                  std::uint64_t seed);

// Fraction of examples where the gate's Ready/Unready call matches the label.
double readiness_accuracy(const ReadinessHead& head, std::span<const ReadinessExample> examples);

}  // namespace streamroute
