// Copyright 2026 The contention-graph Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "contention/model.hpp"
#include "gradcheck_fixture.hpp"
#include "oracles.hpp"

namespace {

using contention::Matrix;
using contention::MetricGraph;
using contention::ModelConfig;
using contention::ModelParams;
using contention::RngStream;

const ModelConfig kSmall{8, 3, 6, 5, 4, 3};

MetricGraph random_graph(std::size_t d, RngStream& rng) {
  Matrix adj(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      if (rng.uniform() < 0.5) adj(i, j) = adj(j, i) = 1.0;
  return contention::graph_from_adjacency(adj, 0.3);
}

Matrix permute_columns(const Matrix& x, const std::vector<std::size_t>& perm) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t i = 0; i < x.cols(); ++i) out(t, i) = x(t, perm[i]);
  return out;
}

bool all_zero(const Matrix& m) {
  return std::all_of(m.values().begin(), m.values().end(), [](double v) { return v == 0.0; });
}

TEST(ModelConfig, DefaultsAndValidation) {
  const ModelConfig c;
  EXPECT_EQ(c.window, 32u);
  EXPECT_EQ(c.classes, 5u);
  EXPECT_EQ(c.hidden, 64u);
  EXPECT_EQ(c.embed, 32u);
  EXPECT_EQ(c.prop, 32u);
  EXPECT_EQ(c.head_hidden, 16u);
  ModelConfig bad = c;
  bad.embed = 0;
  EXPECT_THROW(bad.validate(), contention::ConfigError);
}

TEST(ModelParams, ShapesAndFlattenRoundTrip) {
  const ModelParams p = ModelParams::init(ModelConfig{}, RngStream(3));
  EXPECT_TRUE(p.conforms(ModelConfig{}));
  EXPECT_EQ(p.enc_w1.rows(), 64u);
  EXPECT_EQ(p.enc_w1.cols(), 32u);
  EXPECT_EQ(p.heads.size(), 5u);
  EXPECT_EQ(p.heads[0].weight.rows(), 16u);
  EXPECT_EQ(p.heads[0].weight.cols(), 32u);
  ModelParams q = ModelParams::zeros(ModelConfig{});
  q.assign(p.flatten());
  EXPECT_EQ(q.flatten(), p.flatten());
  EXPECT_EQ(ModelParams::init(ModelConfig{}, RngStream(3)).flatten(), p.flatten());
  EXPECT_NE(ModelParams::init(ModelConfig{}, RngStream(4)).flatten(), p.flatten());
}

TEST(Encode, ZeroWindowZeroBiases) {
  RngStream rng(1);
  ModelParams p = ModelParams::init(kSmall, rng);
  const Matrix h = contention::encode(Matrix(8, 3), p);
  EXPECT_TRUE(all_zero(h));
  EXPECT_EQ(h.rows(), 3u);
  EXPECT_EQ(h.cols(), kSmall.embed);
}

TEST(Encode, MatchesScalarLoops) {
  RngStream rng(2);
  const ModelParams p = oracle::random_params(kSmall, rng);
  const Matrix x = oracle::random_matrix(8, 5, rng, -2.0, 2.0);
  EXPECT_LE(contention::max_abs_diff(contention::encode(x, p), oracle::encode_loops(x, p)), 1e-12);
}

TEST(Encode, ColumnPermutationPermutesRows) {
  RngStream rng(3);
  const ModelParams p = oracle::random_params(kSmall, rng);
  const Matrix x = oracle::random_matrix(8, 4, rng);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  const Matrix h = contention::encode(x, p);
  const Matrix hp = contention::encode(permute_columns(x, perm), p);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < h.cols(); ++c) EXPECT_EQ(hp(i, c), h(perm[i], c));
}

TEST(Encode, WindowLengthMismatch) {
  RngStream rng(4);
  const ModelParams p = oracle::random_params(kSmall, rng);
  EXPECT_THROW(contention::encode(Matrix(7, 3), p), contention::ShapeError);
}

TEST(Encode, AnyDimensionAccepted) {
  RngStream rng(5);
  const ModelParams p = oracle::random_params(kSmall, rng);
  for (std::size_t d : {1u, 4u, 24u}) {
    const Matrix x = oracle::random_matrix(8, d, rng);
    const auto z = contention::logits(x, contention::identity_graph(d), p);
    EXPECT_EQ(z.size(), 3u);
  }
}

TEST(Propagate, IdentityGraphHasNoCrossNodeMixing) {
  RngStream rng(6);
  const ModelParams p = oracle::random_params(kSmall, rng);
  const MetricGraph g = contention::identity_graph(4);
  const Matrix h = oracle::random_matrix(4, kSmall.embed, rng);
  const Matrix base = contention::propagate(g, h, p);
  Matrix h2 = h;
  for (std::size_t c = 0; c < h2.cols(); ++c) h2(3, c) += 0.3;
  const Matrix moved = contention::propagate(g, h2, p);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < base.cols(); ++c) EXPECT_EQ(moved(i, c), base(i, c));
  EXPECT_GT(contention::max_abs_diff(moved, base), 0.0);
}

TEST(Propagate, SymmetricTwoNodeGraph) {
  RngStream rng(7);
  const ModelParams p = oracle::random_params(kSmall, rng);
  const MetricGraph g = contention::graph_from_adjacency(Matrix{{0, 1}, {1, 0}}, 0.3);
  Matrix h(2, kSmall.embed);
  for (std::size_t c = 0; c < h.cols(); ++c) h(0, c) = h(1, c) = rng.uniform(-1, 1);
  const Matrix out = contention::propagate(g, h, p);
  for (std::size_t c = 0; c < out.cols(); ++c) EXPECT_EQ(out(0, c), out(1, c));
}

TEST(Propagate, MatchesExplicitOracle) {
  RngStream rng(8);
  const ModelParams p = oracle::random_params(kSmall, rng);
  const MetricGraph g = random_graph(4, rng);
  const Matrix h = oracle::random_matrix(4, kSmall.embed, rng);
  EXPECT_LE(contention::max_abs_diff(contention::propagate(g, h, p),
                                     oracle::propagate_loops(g.normalized, h, p)),
            1e-12);
}

TEST(Propagate, DimensionMismatch) {
  RngStream rng(9);
  const ModelParams p = oracle::random_params(kSmall, rng);
  EXPECT_THROW(contention::propagate(contention::identity_graph(3), Matrix(4, kSmall.embed), p),
               contention::ShapeError);
}

TEST(Heads, ZeroEverythingGivesZeroLogits) {
  const ModelParams p = ModelParams::zeros(kSmall);
  for (double z : contention::heads(Matrix(3, kSmall.prop), p)) EXPECT_EQ(z, 0.0);
}

TEST(Heads, MatchesScalarLoops) {
  RngStream rng(10);
  const ModelParams p = oracle::random_params(kSmall, rng);
  const Matrix ht = oracle::random_matrix(5, kSmall.prop, rng);
  const auto z = contention::heads(ht, p);
  const auto ref = oracle::heads_loops(ht, p);
  for (std::size_t k = 0; k < z.size(); ++k) EXPECT_NEAR(z[k], ref[k], 1e-12);
}

TEST(Forward, MatchesComposedOracleAndIsPure) {
  RngStream rng(11);
  const ModelParams p = oracle::random_params(kSmall, rng);
  const MetricGraph g = random_graph(6, rng);
  const Matrix x = oracle::random_matrix(8, 6, rng, -2, 2);
  const auto [pred, cache] = contention::forward(x, g, p);
  const auto ref =
      oracle::heads_loops(oracle::propagate_loops(g.normalized, oracle::encode_loops(x, p), p), p);
  for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(pred.logits[k], ref[k], 1e-12);
  const auto again = contention::forward(x, g, p).first;
  EXPECT_EQ(again.logits, pred.logits);
  EXPECT_EQ(again.probs, pred.probs);
  EXPECT_EQ(contention::logits(x, g, p), pred.logits);
  EXPECT_NEAR(std::accumulate(pred.probs.begin(), pred.probs.end(), 0.0), 1.0, 1e-12);
}

TEST(Forward, JointPermutationInvariance) {
  RngStream rng(12);
  const ModelParams p = oracle::random_params(kSmall, rng);
  const std::size_t d = 6;
  const MetricGraph g = random_graph(d, rng);
  const Matrix x = oracle::random_matrix(8, d, rng);
  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  Matrix adj(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) adj(i, j) = g.adjacency(perm[i], perm[j]);
  const MetricGraph gp = contention::graph_from_adjacency(adj, 0.3);
  const auto z = contention::logits(x, g, p);
  const auto zp = contention::logits(permute_columns(x, perm), gp, p);
  for (std::size_t k = 0; k < z.size(); ++k) EXPECT_NEAR(z[k], zp[k], 1e-12);
}

TEST(Predict, UniformTieAndShift) {
  const auto p = contention::predict(std::vector<double>(5, 0.0));
  for (double v : p.probs) EXPECT_DOUBLE_EQ(v, 0.2);
  EXPECT_EQ(p.label, 0u);
  const auto q = contention::predict(std::vector<double>{1.0, 2.0, 3.0});
  const auto r = contention::predict(std::vector<double>{11.0, 12.0, 13.0});
  EXPECT_EQ(q.label, 2u);
  EXPECT_EQ(r.label, 2u);
  const double expected[] = {0.0900305731703804579980221, 0.2447284710547976524729596,
                             0.6652409557748218895290183};
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(q.probs[k], expected[k], 1e-12);
    EXPECT_NEAR(q.probs[k], r.probs[k], 1e-12);
  }
}

TEST(Backward, ZeroUpstreamGivesZeroGrads) {
  RngStream rng(13);
  const ModelParams p = oracle::random_params(kSmall, rng);
  const MetricGraph g = random_graph(4, rng);
  const auto [pred, cache] = contention::forward(oracle::random_matrix(8, 4, rng), g, p);
  const auto grads = contention::backward(cache, std::vector<double>(3, 0.0), g, p);
  for (double v : grads.flatten()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, HeadsAreDecoupled) {
  RngStream rng(14);
  const ModelParams p = oracle::random_params(kSmall, rng);
  const MetricGraph g = random_graph(4, rng);
  const auto [pred, cache] = contention::forward(oracle::random_matrix(8, 4, rng), g, p);
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> dz(3, 0.0);
    dz[k] = 1.0;
    const auto grads = contention::backward(cache, dz, g, p);
    for (std::size_t j = 0; j < 3; ++j) {
      const auto& h = grads.heads[j];
      const bool zero = all_zero(h.weight) && all_zero(h.bias) && all_zero(h.out) &&
                        all_zero(h.offset);
      EXPECT_EQ(zero, j != k) << "head " << j << " for dz=e_" << k;
    }
    EXPECT_FALSE(all_zero(grads.enc_w1));
    EXPECT_FALSE(all_zero(grads.prop_w2));
  }
}

TEST(Backward, StaleCacheIsContractError) {
  RngStream rng(15);
  const ModelParams p = oracle::random_params(kSmall, rng);
  const ModelParams other = p;
  const MetricGraph g = random_graph(4, rng);
  const auto [pred, cache] = contention::forward(oracle::random_matrix(8, 4, rng), g, p);
  const std::vector<double> dz(3, 1.0);
  EXPECT_THROW(contention::backward(cache, dz, g, other), contention::ContractError);
  const MetricGraph g2 = g;
  EXPECT_THROW(contention::backward(cache, dz, g2, p), contention::ContractError);
  EXPECT_THROW(contention::backward(cache, std::vector<double>(2, 1.0), g, p),
               contention::ContractError);
}

TEST(Backward, FullModelGradientCheck) {
  const auto small = fixture::run_full_gradcheck(fixture::kSmallWidths, 0, 0.6);
  EXPECT_LE(small.max_rel_error, 1e-6) << "worst parameter " << small.worst_index;
  const auto wide = fixture::run_full_gradcheck(fixture::kDefaultWidths, 0, 0.3);
  EXPECT_LE(wide.max_rel_error, 1e-4) << "worst parameter " << wide.worst_index;
}

TEST(Backward, LayerwiseGradientChecks) {
  // Each layer in isolation: a linear functional of its output, checked
  // against the matching blocks of the full backward pass.
  RngStream rng(16);
  ModelParams p = oracle::random_params(kSmall, rng);
  const MetricGraph g = random_graph(4, rng);
  const Matrix x = oracle::random_matrix(8, 4, rng, -1.5, 1.5);
  const std::vector<double> dz{0.3, -1.1, 0.8};
  const auto [pred, cache] = contention::forward(x, g, p);
  const auto grads = contention::backward(cache, dz, g, p);
  std::vector<std::string> names;
  std::vector<Matrix*> blocks;
  ModelParams probe = p;
  probe.for_each_block([&](const std::string& name, Matrix& m) {
    names.push_back(name);
    blocks.push_back(&m);
  });
  std::vector<const Matrix*> grad_blocks;
  grads.for_each_block([&](const std::string&, const Matrix& m) { grad_blocks.push_back(&m); });
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    std::vector<double> values(blocks[b]->values().begin(), blocks[b]->values().end());
    const std::vector<double> analytic(grad_blocks[b]->values().begin(),
                                       grad_blocks[b]->values().end());
    const auto r = contention::finite_diff_check(
        [&] {
          std::copy(values.begin(), values.end(), blocks[b]->values().begin());
          const auto z = contention::logits(x, g, probe);
          double s = 0.0;
          for (std::size_t k = 0; k < z.size(); ++k) s += dz[k] * z[k];
          return s;
        },
        std::span<double>(values), analytic);
    std::copy(values.begin(), values.end(), blocks[b]->values().begin());
    EXPECT_LE(r.max_rel_error, 1e-4) << names[b];
  }
}

}  // namespace
