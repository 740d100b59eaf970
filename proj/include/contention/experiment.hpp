// Copyright 2026 The contention-graph Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "contention/data.hpp"
#include "contention/metric_graph.hpp"
#include "contention/model.hpp"
#include "contention/training.hpp"

namespace contention {

/// Everything needed for one synthetic generate → split → train → test run.
struct Experiment {
  ScenarioConfig scenario;
  std::size_t n_train = 2000;
  std::size_t n_val = 500;
  std::size_t n_test = 500;
  double graph_threshold = 0.3;
  ModelConfig model;
  TrainConfig train;

  void validate() const {
    scenario.validate();
    model.validate();
    train.validate();
    if (n_train == 0 || n_val == 0 || n_test == 0) throw ConfigError("experiment: empty split size");
    if (model.window != scenario.window) {
      throw ConfigError("experiment: model window " + std::to_string(model.window) +
                        " differs from scenario window " + std::to_string(scenario.window));
    }
    if (model.classes != kNumClasses) throw ConfigError("experiment: synthetic data has 5 classes");
    if (!(graph_threshold >= 0.0 && graph_threshold <= 1.0)) {
      throw ConfigError("experiment: graph threshold must lie in [0, 1]");
    }
  }
};

struct ExperimentData {
  Dataset train, val, test;
  NormStats norm;
  MetricGraph graph;
};

/// Draws the three splits from independent sub-streams of `data_seed`,
/// z-scores them with training statistics and builds the graph from the
/// normalized training split.
inline ExperimentData prepare_data(const Experiment& exp, std::uint64_t data_seed) {
  exp.validate();
  const RngStream root(data_seed);
  ExperimentData d;
  Dataset train = generate(exp.scenario, exp.n_train, root.substream(101));
  d.norm = fit_norm(train);
  d.train = apply_norm(std::move(train), d.norm);
  d.val = apply_norm(generate(exp.scenario, exp.n_val, root.substream(102)), d.norm);
  d.test = apply_norm(generate(exp.scenario, exp.n_test, root.substream(103)), d.norm);
  const auto series = window_values(d.train);
  d.graph = build_graph(pearson_matrix(series), exp.graph_threshold);
  return d;
}

struct ExperimentResult {
  TrainResult trained;
  EvalMetrics test;
};

inline ExperimentResult run_on(const ExperimentData& d, const Experiment& exp, std::uint64_t seed) {
  TrainConfig tc = exp.train;
  tc.seed = seed;
  ExperimentResult r{train(d.train, d.val, d.graph, tc, exp.model), {}};
  r.test = evaluate(r.trained.params, training_graph(d.graph, tc), d.test);
  return r;
}

/// Data and initialization both derive from `seed`.
inline ExperimentResult run_experiment(const Experiment& exp, std::uint64_t seed) {
  return run_on(prepare_data(exp, seed), exp, seed);
}

// ---------------------------------------------------------------------------
// Sensitivity sweeps

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single seed
};

struct SweepRow {
  double value = 0.0;  // batch size, train fraction or metric count
  std::size_t runs = 0;
  MetricSummary accuracy, macro_recall, macro_precision, macro_f1;
  std::vector<EvalMetrics> per_seed;
};

struct SweepTable {
  std::string kind;  // "batch", "datasize" or "dim"
  std::vector<SweepRow> rows;
};

inline MetricSummary summarize(const std::vector<double>& v) {
  MetricSummary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

inline SweepRow make_row(double value, std::vector<EvalMetrics> runs) {
  SweepRow row;
  row.value = value;
  row.runs = runs.size();
  std::vector<double> acc, rec, prec, f1;
  for (const auto& m : runs) {
    acc.push_back(m.accuracy);
    rec.push_back(m.macro_recall);
    prec.push_back(m.macro_precision);
    f1.push_back(m.macro_f1);
  }
  row.accuracy = summarize(acc);
  row.macro_recall = summarize(rec);
  row.macro_precision = summarize(prec);
  row.macro_f1 = summarize(f1);
  row.per_seed = std::move(runs);
  return row;
}

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each call writes only
/// its own slot, so results do not depend on scheduling.
template <class Fn>
void parallel_cells(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += jobs) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

inline SweepTable sweep_batch(const Experiment& base, const std::vector<std::size_t>& sizes,
                              const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1) {
  base.validate();
  if (sizes.empty() || seeds.empty()) throw ConfigError("sweep: no sizes or seeds");
  std::vector<ExperimentData> data;
  for (auto s : seeds) data.push_back(prepare_data(base, s));
  std::vector<EvalMetrics> cell(sizes.size() * seeds.size());
  detail::parallel_cells(cell.size(), jobs, [&](std::size_t i) {
    Experiment e = base;
    e.train.batch_size = sizes[i / seeds.size()];
    const std::size_t si = i % seeds.size();
    cell[i] = run_on(data[si], e, seeds[si]).test;
  });
  SweepTable t{"batch", {}};
  for (std::size_t r = 0; r < sizes.size(); ++r) {
    std::vector<EvalMetrics> runs(cell.begin() + static_cast<std::ptrdiff_t>(r * seeds.size()),
                                  cell.begin() + static_cast<std::ptrdiff_t>((r + 1) * seeds.size()));
    t.rows.push_back(make_row(static_cast<double>(sizes[r]), std::move(runs)));
  }
  return t;
}

/// Subsamples the training split (stratified, seeded); validation and test
/// splits stay fixed per seed.
inline SweepTable sweep_datasize(const Experiment& base, const std::vector<double>& fractions,
                                 const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1) {
  base.validate();
  if (fractions.empty() || seeds.empty()) throw ConfigError("sweep: no fractions or seeds");
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("sweep: train fraction must be in (0, 1]");
  std::vector<ExperimentData> data;
  for (auto s : seeds) data.push_back(prepare_data(base, s));
  std::vector<EvalMetrics> cell(fractions.size() * seeds.size());
  detail::parallel_cells(cell.size(), jobs, [&](std::size_t i) {
    const std::size_t si = i % seeds.size();
    ExperimentData d = data[si];
    d.train = subsample(d.train, fractions[i / seeds.size()], RngStream(seeds[si]).substream(104));
    cell[i] = run_on(d, base, seeds[si]).test;
  });
  SweepTable t{"datasize", {}};
  for (std::size_t r = 0; r < fractions.size(); ++r) {
    std::vector<EvalMetrics> runs(cell.begin() + static_cast<std::ptrdiff_t>(r * seeds.size()),
                                  cell.begin() + static_cast<std::ptrdiff_t>((r + 1) * seeds.size()));
    t.rows.push_back(make_row(fractions[r], std::move(runs)));
  }
  return t;
}

/// Regenerates data and rebuilds the graph per metric count; the model
/// configuration is shared by every row.
inline SweepTable sweep_dim(const Experiment& base, const std::vector<std::size_t>& dims,
                            const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1) {
  if (dims.empty() || seeds.empty()) throw ConfigError("sweep: no dims or seeds");
  std::vector<Experiment> per_dim;
  for (auto d : dims) {
    Experiment e = base;
    e.scenario.dim = d;
    e.scenario.groups = ScenarioConfig::default_groups(d);
    e.validate();
    per_dim.push_back(std::move(e));
  }
  std::vector<EvalMetrics> cell(dims.size() * seeds.size());
  detail::parallel_cells(cell.size(), jobs, [&](std::size_t i) {
    cell[i] = run_experiment(per_dim[i / seeds.size()], seeds[i % seeds.size()]).test;
  });
  SweepTable t{"dim", {}};
  for (std::size_t r = 0; r < dims.size(); ++r) {
    std::vector<EvalMetrics> runs(cell.begin() + static_cast<std::ptrdiff_t>(r * seeds.size()),
                                  cell.begin() + static_cast<std::ptrdiff_t>((r + 1) * seeds.size()));
    t.rows.push_back(make_row(static_cast<double>(dims[r]), std::move(runs)));
  }
  return t;
}

}  // namespace contention
