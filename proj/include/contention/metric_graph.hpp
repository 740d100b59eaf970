// Copyright 2026 The contention-graph Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "contention/errors.hpp"
#include "contention/numeric.hpp"

namespace contention {

/// Pearson coefficients between metric dimensions.
struct CorrelationMatrix {
  Matrix values;
  std::size_t dim() const noexcept { return values.rows(); }
};

/// Dependency graph over the D metric dimensions.
///
/// `adjacency` is binary, symmetric and has no self-loops. `normalized` is the
/// propagation operator (A+I)_ij / sqrt(d_i d_j) with d_i = 1 + Σ_j A_ij.
struct MetricGraph {
  Matrix adjacency;
  Matrix normalized;
  double threshold = 0.0;

  std::size_t dim() const noexcept { return adjacency.rows(); }
};

/// Pearson matrix over column series. Each element of `series` is an N x D
/// matrix; statistics are taken over the row-wise concatenation of all of them.
/// Zero-variance dimensions get an all-zero row and column (diagonal too).
inline CorrelationMatrix pearson_matrix(std::span<const Matrix> series) {
  if (series.size() < 2) throw ShapeError("pearson_matrix: need at least 2 windows");
  const std::size_t rows = series.front().rows();
  const std::size_t dim = series.front().cols();
  if (rows == 0 || dim == 0) throw ShapeError("pearson_matrix: empty window");
  for (const auto& s : series) {
    if (s.rows() != rows || s.cols() != dim) {
      throw ShapeError("pearson_matrix: window " + s.shape_string() + " vs " +
                       series.front().shape_string());
    }
  }
  const double n = static_cast<double>(rows * series.size());

  std::vector<double> mean(dim, 0.0);
  for (const auto& s : series)
    for (std::size_t t = 0; t < rows; ++t)
      for (std::size_t i = 0; i < dim; ++i) mean[i] += s(t, i);
  for (double& m : mean) m /= n;

  Matrix cov(dim, dim);
  std::vector<double> centered(dim);
  for (const auto& s : series) {
    for (std::size_t t = 0; t < rows; ++t) {
      for (std::size_t i = 0; i < dim; ++i) centered[i] = s(t, i) - mean[i];
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = i; j < dim; ++j) cov(i, j) += centered[i] * centered[j];
    }
  }

  CorrelationMatrix out{Matrix(dim, dim)};
  std::vector<bool> flat(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    // Relative floor so that float noise on a constant series counts as flat.
    flat[i] = !(cov(i, i) > 1e-24 * n * (1.0 + mean[i] * mean[i]));
  }
  for (std::size_t i = 0; i < dim; ++i) {
    if (flat[i]) continue;
    out.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < dim; ++j) {
      if (flat[j]) continue;
      double r = cov(i, j) / std::sqrt(cov(i, i) * cov(j, j));
      r = std::clamp(r, -1.0, 1.0);
      out.values(i, j) = r;
      out.values(j, i) = r;
    }
  }
  return out;
}

/// (A+I)_ij / sqrt(d_i d_j).
inline Matrix normalize_adjacency(const Matrix& adjacency) {
  const std::size_t d = adjacency.rows();
  if (adjacency.cols() != d) throw ShapeError("adjacency must be square");
  std::vector<double> deg(d, 1.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (j != i) deg[i] += adjacency(i, j);
  Matrix norm(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double a = (i == j) ? 1.0 : adjacency(i, j);
      if (a != 0.0) norm(i, j) = a / std::sqrt(deg[i] * deg[j]);
    }
  return norm;
}

/// Graph from a validated adjacency matrix (used when loading checkpoints).
inline MetricGraph graph_from_adjacency(Matrix adjacency, double threshold) {
  const std::size_t d = adjacency.rows();
  if (adjacency.cols() != d) throw ShapeError("adjacency must be square");
  for (std::size_t i = 0; i < d; ++i) {
    if (adjacency(i, i) != 0.0) throw DataError("adjacency has a self-loop at " + std::to_string(i));
    for (std::size_t j = 0; j < d; ++j) {
      const double a = adjacency(i, j);
      if ((a != 0.0 && a != 1.0) || a != adjacency(j, i)) {
        throw DataError("adjacency must be binary and symmetric");
      }
    }
  }
  MetricGraph g;
  g.normalized = normalize_adjacency(adjacency);
  g.adjacency = std::move(adjacency);
  g.threshold = threshold;
  return g;
}

/// Edge (i, j), i != j, iff |corr_ij| >= threshold.
inline MetricGraph build_graph(const CorrelationMatrix& corr, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError("graph threshold must lie in [0, 1], got " + std::to_string(threshold));
  }
  const std::size_t d = corr.dim();
  Matrix adj(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (i != j && std::abs(corr.values(i, j)) >= threshold) adj(i, j) = 1.0;
  return graph_from_adjacency(std::move(adj), threshold);
}

/// Graph with no edges; its propagation operator is the identity.
inline MetricGraph identity_graph(std::size_t dim) {
  return graph_from_adjacency(Matrix(dim, dim), 1.0);
}

struct GraphStats {
  std::size_t vertices = 0;
  std::size_t edges = 0;
  double density = 0.0;
  std::size_t isolated = 0;
  std::map<std::size_t, std::size_t> degree_histogram;  // degree -> vertex count
};

inline GraphStats graph_stats(const MetricGraph& g) {
  GraphStats s;
  s.vertices = g.dim();
  for (std::size_t i = 0; i < s.vertices; ++i) {
    std::size_t deg = 0;
    for (std::size_t j = 0; j < s.vertices; ++j)
      if (g.adjacency(i, j) != 0.0) ++deg;
    s.degree_histogram[deg] += 1;
    if (deg == 0) ++s.isolated;
    for (std::size_t j = i + 1; j < s.vertices; ++j)
      if (g.adjacency(i, j) != 0.0) ++s.edges;
  }
  if (s.vertices >= 2) {
    s.density = 2.0 * static_cast<double>(s.edges) /
                static_cast<double>(s.vertices * (s.vertices - 1));
  }
  return s;
}

}  // namespace contention
