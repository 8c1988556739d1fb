// SPDX-License-Identifier: Apache-2.0
#include "streamroute/math.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "streamroute/error.hpp"

namespace streamroute {

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sigmoid(double z) noexcept {
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw StructuralError("dot: dimension mismatch");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(std::span<const double> a) noexcept {
  return std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0));
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double d = dot(a, b);
  double na = norm(a);
  double nb = norm(b);
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return d / (na * nb);
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double logistic_loss(std::span<const std::vector<double>> features, std::span<const double> targets,
                     std::span<const double> weights, double bias) {
  double total = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    double z = dot(weights, features[i]) + bias;
    total -= targets[i] * log_sigmoid(z) + (1.0 - targets[i]) * log_sigmoid(-z);
  }
  return total / static_cast<double>(features.size());
}

LogisticFit fit_logistic(std::span<const std::vector<double>> features, std::span<const double> targets,
                         std::vector<double> weights, double bias, int epochs, double learning_rate) {
  if (features.empty()) throw DataError("logistic fit: no examples");
  if (features.size() != targets.size()) throw DataError("logistic fit: feature/target count mismatch");
  for (const auto& x : features) {
    if (x.size() != weights.size()) throw StructuralError("logistic fit: feature dimension mismatch");
  }

  LogisticFit fit;
  fit.loss_history.reserve(static_cast<std::size_t>(std::max(epochs, 0)) + 1);
  const double n = static_cast<double>(features.size());
  std::vector<double> grad(weights.size());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    fit.loss_history.push_back(logistic_loss(features, targets, weights, bias));
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_bias = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      double residual = sigmoid(dot(weights, features[i]) + bias) - targets[i];
      for (std::size_t k = 0; k < weights.size(); ++k) grad[k] += residual * features[i][k];
      grad_bias += residual;
    }
    for (std::size_t k = 0; k < weights.size(); ++k) weights[k] -= learning_rate * grad[k] / n;
    bias -= learning_rate * grad_bias / n;
  }
  fit.loss_history.push_back(logistic_loss(features, targets, weights, bias));
  fit.weights = std::move(weights);
  fit.bias = bias;
  return fit;
}

}  // namespace streamroute
