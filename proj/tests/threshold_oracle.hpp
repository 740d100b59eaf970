// Copyright 2026 The contention-graph Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Rule-based classifier for synthetic windows. Accuracy well above chance
// shows the generated classes are separable without any learning.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "contention/data.hpp"

namespace oracle {

using contention::ContentionClass;
using contention::Dataset;
using contention::Matrix;
using contention::ResourceGroup;
using contention::RngStream;
using contention::ScenarioConfig;

/// Per-group mean series (T x 4) of one window.
inline Matrix group_series(const Matrix& x, const std::vector<ResourceGroup>& groups) {
  Matrix g(x.rows(), 4);
  std::array<double, 4> n{};
  for (auto grp : groups) n[static_cast<std::size_t>(grp)] += 1.0;
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t i = 0; i < x.cols(); ++i)
      g(t, static_cast<std::size_t>(groups[i])) += x(t, i) / n[static_cast<std::size_t>(groups[i])];
  return g;
}

/// Hand-written rule on group-mean statistics:
///   cpu level   = late-window cpu mean minus early cpu mean,
///   spike score = strongest period-5 phase excess on disk,
///   mem slope   = last-quarter minus first-quarter mem mean,
///   net burst   = projection of net on sin(2πt/8) over the middle half.
inline std::size_t threshold_oracle(const Matrix& x, const std::vector<ResourceGroup>& groups) {
  const Matrix g = group_series(x, groups);
  const std::size_t T = x.rows(), q = T / 4;
  auto mean = [&](std::size_t col, std::size_t lo, std::size_t hi) {
    double s = 0;
    for (std::size_t t = lo; t < hi; ++t) s += g(t, col);
    return s / static_cast<double>(hi - lo);
  };
  const double cpu = mean(0, q, T) - mean(0, 0, 2);
  double spike = -1e9;
  const double disk_mean = mean(2, 0, T);
  for (std::size_t phase = 0; phase < 5; ++phase) {
    double s = 0;
    std::size_t n = 0;
    for (std::size_t t = phase; t < T; t += 5) {
      s += g(t, 2);
      ++n;
    }
    spike = std::max(spike, s / static_cast<double>(n) - disk_mean);
  }
  const double mem = mean(1, T - q, T) - mean(1, 0, q);
  double net = 0, norm = 0;
  for (std::size_t t = q; t < T - q; ++t) {
    const double b = std::sin(2.0 * 3.14159265358979323846 * static_cast<double>(t) / 8.0);
    net += b * g(t, 3);
    norm += b * b;
  }
  net /= norm;
  const bool cpu_hot = cpu > 0.5, spike_hot = spike > 0.6;
  if (cpu_hot && spike_hot) return static_cast<std::size_t>(ContentionClass::Hybrid);
  if (cpu_hot) return static_cast<std::size_t>(ContentionClass::Cpu);
  if (spike_hot) return static_cast<std::size_t>(ContentionClass::Io);
  return mem > net ? static_cast<std::size_t>(ContentionClass::Mem)
                   : static_cast<std::size_t>(ContentionClass::Net);
}

inline double oracle_accuracy(const ScenarioConfig& cfg, std::size_t n, std::uint64_t seed) {
  const Dataset ds = contention::generate(cfg, n, RngStream(seed));
  const auto groups = cfg.resolved_groups();
  std::size_t hit = 0;
  for (const auto& w : ds.windows) hit += threshold_oracle(w.values, groups) == *w.label;
  return static_cast<double>(hit) / static_cast<double>(n);
}

}  // namespace oracle
