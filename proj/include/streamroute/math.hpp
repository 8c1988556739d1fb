// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace streamroute {

double sigmoid(double z) noexcept;
// log(sigmoid(z)) without overflow for large |z|.
double log_sigmoid(double z) noexcept;
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a) noexcept;
// Cosine similarity. Two zero vectors are treated as identical (1.0); one zero
// vector against a nonzero one gives 0.0.
double cosine(std::span<const double> a, std::span<const double> b);
std::vector<double> softmax(std::span<const double> logits);
double mean(std::span<const double> xs);

struct LogisticFit {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> loss_history;  // loss before each epoch, then after the last
};

// Mean binary cross-entropy of a logistic model.
double logistic_loss(std::span<const std::vector<double>> features, std::span<const double> targets,
                     std::span<const double> weights, double bias);

// Full-batch gradient descent on mean binary cross-entropy, starting from the
// given parameters. targets are in {0, 1}.
LogisticFit fit_logistic(std::span<const std::vector<double>> features, std::span<const double> targets,
                         std::vector<double> weights, double bias, int epochs, double learning_rate);

}  // namespace streamroute
