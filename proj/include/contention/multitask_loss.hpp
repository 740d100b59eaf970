// Copyright 2026 The contention-graph Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "contention/errors.hpp"
#include "contention/numeric.hpp"

namespace contention {

/// Batch-mean one-vs-rest loss per task.
using TaskLossVector = std::vector<double>;

/// L_k = mean_n bce(z_nk, [label_n == k]).
inline TaskLossVector task_losses(std::span<const std::vector<double>> logits,
                                  std::span<const std::size_t> labels) {
  if (logits.empty()) throw DataError("task_losses: empty batch");
  if (logits.size() != labels.size()) throw ShapeError("task_losses: logits/labels length");
  const std::size_t k_count = logits.front().size();
  TaskLossVector out(k_count, 0.0);
  for (std::size_t n = 0; n < logits.size(); ++n) {
    if (logits[n].size() != k_count) throw ShapeError("task_losses: ragged logits");
    if (labels[n] >= k_count) {
      throw DataError("task_losses: sample " + std::to_string(n) + " has label " +
                      std::to_string(labels[n]) + " outside [0, " + std::to_string(k_count) + ")");
    }
    for (std::size_t k = 0; k < k_count; ++k)
      out[k] += bce_from_logit(logits[n][k], labels[n] == k ? 1.0 : 0.0);
  }
  for (double& v : out) v /= static_cast<double>(logits.size());
  return out;
}

/// Adaptive task weights (Dynamic Weight Averaging over epoch-mean losses).
class TaskWeightState {
 public:
  explicit TaskWeightState(std::size_t tasks, double temperature = 2.0, bool adaptive = true)
      : weights_(tasks, 1.0), temperature_(temperature), adaptive_(adaptive) {
    if (tasks == 0) throw ConfigError("TaskWeightState: need at least one task");
    if (!(temperature > 0.0)) throw ConfigError("TaskWeightState: temperature must be > 0");
  }

  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t tasks() const noexcept { return weights_.size(); }
  double temperature() const noexcept { return temperature_; }
  bool adaptive() const noexcept { return adaptive_; }
  /// Most recent epoch last; at most two entries.
  const std::deque<TaskLossVector>& history() const noexcept { return history_; }

  /// Records an epoch's mean losses and recomputes the weights from the
  /// two most recent epochs: w = K · softmax(r / τ), r_k = L_k(t-1) / L_k(t-2).
  void update(const TaskLossVector& epoch_losses) {
    if (epoch_losses.size() != weights_.size()) {
      throw ShapeError("update_weights: expected " + std::to_string(weights_.size()) +
                       " task losses");
    }
    history_.push_back(epoch_losses);
    if (history_.size() > 2) history_.pop_front();
    if (!adaptive_ || history_.size() < 2) {
      std::fill(weights_.begin(), weights_.end(), 1.0);
      return;
    }
    const TaskLossVector& prev = history_[0];
    const TaskLossVector& last = history_[1];
    std::vector<double> scaled(weights_.size());
    for (std::size_t k = 0; k < scaled.size(); ++k)
      scaled[k] = last[k] / std::max(prev[k], 1e-8) / temperature_;
    if (std::all_of(scaled.begin(), scaled.end(), [&](double v) { return v == scaled[0]; })) {
      std::fill(weights_.begin(), weights_.end(), 1.0);
      return;
    }
    const std::vector<double> p = softmax(scaled);
    const double k_count = static_cast<double>(weights_.size());
    // A saturated task can push the others' softmax mass below the double
    // range; keep every weight strictly positive.
    for (std::size_t k = 0; k < p.size(); ++k)
      weights_[k] = std::max(k_count * p[k], std::numeric_limits<double>::min());
  }

 private:
  std::vector<double> weights_;
  std::deque<TaskLossVector> history_;
  double temperature_;
  bool adaptive_;
};

inline TaskWeightState update_weights(TaskWeightState state, const TaskLossVector& epoch_losses) {
  state.update(epoch_losses);
  return state;
}

/// Σ w_k L_k.
inline double combine(std::span<const double> losses, std::span<const double> weights) {
  if (losses.size() != weights.size()) throw ShapeError("combine: length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < losses.size(); ++k) s += weights[k] * losses[k];
  return s;
}

/// Per-sample contribution to dL_multi/dz for a batch of `batch` samples:
/// (w_k / batch) · (σ(z_k) − [label == k]).
inline std::vector<double> combine_grad(std::span<const double> logits, std::size_t label,
                                        std::span<const double> weights, std::size_t batch) {
  if (logits.size() != weights.size()) throw ShapeError("combine_grad: length mismatch");
  std::vector<double> g(logits.size());
  const double scale = 1.0 / static_cast<double>(batch);
  for (std::size_t k = 0; k < logits.size(); ++k)
    g[k] = weights[k] * scale * bce_grad(logits[k], label == k ? 1.0 : 0.0);
  return g;
}

}  // namespace contention
