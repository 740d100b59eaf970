// Copyright 2026 The contention-graph Authors.
// SPDX-License-Identifier: Apache-2.0
//
// A hand-wired K=3 model whose prediction is a known step function of a
// scalar input, plus the four-window fixture built on it.

#pragma once

#include <vector>

#include "contention/data.hpp"
#include "contention/metric_graph.hpp"
#include "contention/model.hpp"

namespace fixture {

/// T=1, D=1, every width 1. With all weights 1 the readout is
/// s = tanh^5(x); head 0 fires for s < -0.2, head 2 for s > 0.2, head 1 otherwise.
inline contention::ModelParams step_model() {
  const contention::ModelConfig cfg{1, 3, 1, 1, 1, 1};
  auto p = contention::ModelParams::zeros(cfg);
  p.enc_w1(0, 0) = p.enc_w2(0, 0) = p.prop_w1(0, 0) = p.prop_w2(0, 0) = 1.0;
  for (auto& h : p.heads) h.weight(0, 0) = 1.0;
  p.heads[0].out(0, 0) = -10.0;
  p.heads[0].offset(0, 0) = -2.0;
  p.heads[2].out(0, 0) = 10.0;
  p.heads[2].offset(0, 0) = -2.0;
  return p;
}

inline contention::MetricWindow scalar_window(double x, std::size_t label) {
  contention::MetricWindow w;
  w.values = contention::Matrix(1, 1, x);
  w.label = label;
  return w;
}

/// Predictions [0, 1, 1, 2] against labels [0, 1, 2, 2].
inline contention::Dataset four_window_fixture() {
  contention::Dataset ds;
  ds.metric_names = {"x"};
  ds.class_names = {"A", "B", "C"};
  ds.windows = {scalar_window(-5.0, 0), scalar_window(0.0, 1), scalar_window(0.0, 2),
                scalar_window(5.0, 2)};
  return ds;
}

}  // namespace fixture
