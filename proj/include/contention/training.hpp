// Copyright 2026 The contention-graph Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "contention/data.hpp"
#include "contention/errors.hpp"
#include "contention/metric_graph.hpp"
#include "contention/model.hpp"
#include "contention/multitask_loss.hpp"
#include "contention/numeric.hpp"

namespace contention {

// ---------------------------------------------------------------------------
// Evaluation

struct EvalMetrics {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> precision;  // per class
  std::vector<double> recall;
  std::vector<double> f1;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& row : confusion) n = std::accumulate(row.begin(), row.end(), n);
    return n;
  }
};

/// Confusion-matrix metrics. Undefined ratios (zero denominators) count as 0.
inline EvalMetrics metrics_from_predictions(std::span<const std::size_t> predicted,
                                            std::span<const std::size_t> actual,
                                            std::size_t classes) {
  if (predicted.size() != actual.size()) throw ShapeError("metrics: length mismatch");
  if (predicted.empty()) throw DataError("metrics: nothing to evaluate");
  EvalMetrics m;
  m.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] >= classes || actual[i] >= classes) {
      throw DataError("metrics: class index out of range at sample " + std::to_string(i));
    }
    ++m.confusion[actual[i]][predicted[i]];
  }
  std::size_t diag = 0;
  m.precision.assign(classes, 0.0);
  m.recall.assign(classes, 0.0);
  m.f1.assign(classes, 0.0);
  for (std::size_t k = 0; k < classes; ++k) {
    std::size_t col = 0, row = 0;
    for (std::size_t i = 0; i < classes; ++i) {
      col += m.confusion[i][k];
      row += m.confusion[k][i];
    }
    const auto tp = static_cast<double>(m.confusion[k][k]);
    diag += m.confusion[k][k];
    m.precision[k] = col ? tp / static_cast<double>(col) : 0.0;
    m.recall[k] = row ? tp / static_cast<double>(row) : 0.0;
    const double pr = m.precision[k] + m.recall[k];
    m.f1[k] = pr > 0.0 ? 2.0 * m.precision[k] * m.recall[k] / pr : 0.0;
  }
  const auto kd = static_cast<double>(classes);
  m.macro_precision = std::accumulate(m.precision.begin(), m.precision.end(), 0.0) / kd;
  m.macro_recall = std::accumulate(m.recall.begin(), m.recall.end(), 0.0) / kd;
  m.macro_f1 = std::accumulate(m.f1.begin(), m.f1.end(), 0.0) / kd;
  m.accuracy = static_cast<double>(diag) / static_cast<double>(predicted.size());
  return m;
}

inline std::vector<std::size_t> labels_of(const Dataset& ds) {
  std::vector<std::size_t> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds.windows[i].label) throw DataError("window " + std::to_string(i) + " has no label");
    out.push_back(*ds.windows[i].label);
  }
  return out;
}

inline std::vector<Prediction> predict_all(const ModelParams& params, const MetricGraph& g,
                                           const Dataset& ds) {
  std::vector<Prediction> out;
  out.reserve(ds.size());
  for (const auto& w : ds.windows) out.push_back(predict(logits(w.values, g, params)));
  return out;
}

inline EvalMetrics evaluate(const ModelParams& params, const MetricGraph& g, const Dataset& ds) {
  if (ds.empty()) throw DataError("evaluate: empty dataset");
  const auto actual = labels_of(ds);
  std::vector<std::size_t> predicted;
  predicted.reserve(ds.size());
  for (const auto& w : ds.windows) predicted.push_back(argmax(logits(w.values, g, params)));
  return metrics_from_predictions(predicted, actual, params.heads.size());
}

// ---------------------------------------------------------------------------
// Adam

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ModelParams m;
  ModelParams v;
  std::size_t step = 0;

  static AdamState like(const ModelParams& p) {
    AdamState s;
    s.m = p;
    s.v = p;
    s.m.for_each_block([](const std::string&, Matrix& b) { b.fill(0.0); });
    s.v.for_each_block([](const std::string&, Matrix& b) { b.fill(0.0); });
    return s;
  }
};

namespace detail {

inline std::vector<std::pair<std::string, Matrix*>> blocks(ModelParams& p) {
  std::vector<std::pair<std::string, Matrix*>> out;
  p.for_each_block([&](const std::string& name, Matrix& m) { out.emplace_back(name, &m); });
  return out;
}

}  // namespace detail

/// One bias-corrected Adam update. Increments `state.step` first, so the
/// first call uses t = 1.
inline void adam_step(ModelParams& params, ModelParams& grads, AdamState& state,
                      const AdamHyper& hp) {
  auto pb = detail::blocks(params);
  auto gb = detail::blocks(grads);
  auto mb = detail::blocks(state.m);
  auto vb = detail::blocks(state.v);
  if (pb.size() != gb.size() || pb.size() != mb.size() || pb.size() != vb.size()) {
    throw ShapeError("adam_step: parameter/gradient/moment block counts differ");
  }
  for (std::size_t b = 0; b < gb.size(); ++b) {
    if (gb[b].second->size() != pb[b].second->size()) {
      throw ShapeError("adam_step: gradient block '" + gb[b].first + "' has wrong shape");
    }
    if (!gb[b].second->all_finite()) {
      throw NumericError("adam_step: non-finite gradient in block '" + gb[b].first + "'");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hp.beta1, t);
  const double c2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t b = 0; b < pb.size(); ++b) {
    auto p = pb[b].second->values();
    auto g = gb[b].second->values();
    auto m = mb[b].second->values();
    auto v = vb[b].second->values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
      v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
      p[i] -= hp.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + hp.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t max_epochs = 50;
  AdamHyper adam;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  bool adaptive_weights = true;
  double dwa_temperature = 2.0;
  bool graph_propagation = true;

  void validate() const {
    if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
    if (max_epochs == 0) throw ConfigError("train: max_epochs must be >= 1");
    if (patience == 0) throw ConfigError("train: patience must be >= 1");
    if (!(adam.lr > 0.0)) throw ConfigError("train: learning rate must be > 0");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
      throw ConfigError("train: Adam betas must lie in [0, 1)");
    }
    if (!(adam.eps > 0.0)) throw ConfigError("train: Adam epsilon must be > 0");
    if (!(dwa_temperature > 0.0)) throw ConfigError("train: DWA temperature must be > 0");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  TaskLossVector task_losses;
  std::vector<double> weights;  // weights in effect during the epoch
  double multi_loss = 0.0;
  EvalMetrics val;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 until the first epoch completes
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

/// Optional hook called after each epoch's weight update.
using EpochObserver = std::function<void(const EpochRecord&, const TaskWeightState&)>;

/// Propagation operator used during training: the graph itself, or the
/// identity when graph propagation is disabled.
inline MetricGraph training_graph(const MetricGraph& g, const TrainConfig& cfg) {
  return cfg.graph_propagation ? g : identity_graph(g.dim());
}

inline TrainResult train(const Dataset& train_set, const Dataset& val_set, const MetricGraph& graph,
                         const TrainConfig& cfg, const ModelConfig& model_cfg,
                         const EpochObserver& observer = {}) {
  cfg.validate();
  model_cfg.validate();
  if (train_set.empty() || val_set.empty()) throw DataError("train: empty train or validation split");
  for (const Dataset* ds : {&train_set, &val_set}) {
    ds->validate();
    if (ds->window_length() != model_cfg.window) {
      throw ShapeError("train: windows have " + std::to_string(ds->window_length()) +
                       " timesteps, model expects " + std::to_string(model_cfg.window));
    }
    if (ds->dim() != graph.dim()) throw ShapeError("train: graph and dataset metric counts differ");
    if (ds->classes() != model_cfg.classes) throw ShapeError("train: class count mismatch");
  }
  const auto train_labels = labels_of(train_set);
  labels_of(val_set);

  const MetricGraph g = training_graph(graph, cfg);
  const RngStream root(cfg.seed);
  TrainResult result{ModelParams::init(model_cfg, root.substream(0)), {}};
  ModelParams& params = result.params;
  ModelParams best = params;
  AdamState adam = AdamState::like(params);
  ModelParams grads = ModelParams::zeros(model_cfg);
  TaskWeightState weights(model_cfg.classes, cfg.dwa_temperature, cfg.adaptive_weights);
  RngStream shuffler = root.substream(1);

  const std::size_t n = train_set.size(), K = model_cfg.classes;
  std::vector<std::size_t> order(n);
  double best_f1 = -1.0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffler.shuffle(order);
    const std::vector<double> w(weights.weights().begin(), weights.weights().end());
    TaskLossVector epoch_sum(K, 0.0);

    for (std::size_t start = 0, batch_no = 0; start < n; start += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const std::size_t bsz = end - start;
      grads.for_each_block([](const std::string&, Matrix& b) { b.fill(0.0); });
      TaskLossVector batch_loss(K, 0.0);
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t idx = order[j];
        const std::size_t label = train_labels[idx];
        const auto [pred, cache] = forward(train_set.windows[idx].values, g, params);
        for (std::size_t k = 0; k < K; ++k) {
          batch_loss[k] += bce_from_logit(pred.logits[k], label == k ? 1.0 : 0.0);
        }
        const auto dz = combine_grad(pred.logits, label, w, bsz);
        backward_accumulate(cache, dz, g, params, grads);
      }
      for (std::size_t k = 0; k < K; ++k) epoch_sum[k] += batch_loss[k];
      for (double& v : batch_loss) v /= static_cast<double>(bsz);
      const double l_multi = combine(batch_loss, w);
      if (!std::isfinite(l_multi)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no));
      }
      adam_step(params, grads, adam, cfg.adam);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.task_losses = epoch_sum;
    for (double& v : rec.task_losses) v /= static_cast<double>(n);
    rec.weights = w;
    rec.multi_loss = combine(rec.task_losses, w);
    weights.update(rec.task_losses);
    rec.val = evaluate(params, g, val_set);
    if (rec.val.macro_f1 > best_f1) {
      best_f1 = rec.val.macro_f1;
      best = params;
      result.history.best_epoch = epoch;
    }
    result.history.epochs.push_back(std::move(rec));
    if (observer) observer(result.history.epochs.back(), weights);
    if (epoch - result.history.best_epoch >= cfg.patience) break;
  }
  result.params = std::move(best);
  return result;
}

}  // namespace contention
