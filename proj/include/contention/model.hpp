// Copyright 2026 The contention-graph Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "contention/errors.hpp"
#include "contention/metric_graph.hpp"
#include "contention/numeric.hpp"

namespace contention {

struct ModelConfig {
  std::size_t window = 32;      // T
  std::size_t classes = 5;      // K
  std::size_t hidden = 64;      // d_h, encoder hidden width
  std::size_t embed = 32;       // d_e, node embedding width
  std::size_t prop = 32;        // d_p, propagation width
  std::size_t head_hidden = 16; // d_head

  void validate() const {
    if (window == 0 || classes == 0 || hidden == 0 || embed == 0 || prop == 0 ||
        head_hidden == 0) {
      throw ConfigError("model widths, window and class count must all be >= 1");
    }
  }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Parameters of one task head: z = u·tanh(W r + b) + c.
struct HeadParams {
  Matrix weight;  // head_hidden x prop
  Matrix bias;    // 1 x head_hidden
  Matrix out;     // 1 x head_hidden
  Matrix offset;  // 1 x 1
};

/// All trainable weights. Encoder and propagation blocks are shared across
/// metrics and tasks; each head's block is used by that head alone.
/// The same type carries gradients.
struct ModelParams {
  Matrix enc_w1;  // hidden x window
  Matrix enc_b1;  // 1 x hidden
  Matrix enc_w2;  // embed x hidden
  Matrix enc_b2;  // 1 x embed
  Matrix prop_w1; // embed x prop
  Matrix prop_b1; // 1 x prop
  Matrix prop_w2; // prop x prop
  Matrix prop_b2; // 1 x prop
  std::vector<HeadParams> heads;

  static ModelParams zeros(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    p.enc_w1 = Matrix(cfg.hidden, cfg.window);
    p.enc_b1 = Matrix(1, cfg.hidden);
    p.enc_w2 = Matrix(cfg.embed, cfg.hidden);
    p.enc_b2 = Matrix(1, cfg.embed);
    p.prop_w1 = Matrix(cfg.embed, cfg.prop);
    p.prop_b1 = Matrix(1, cfg.prop);
    p.prop_w2 = Matrix(cfg.prop, cfg.prop);
    p.prop_b2 = Matrix(1, cfg.prop);
    p.heads.resize(cfg.classes);
    for (auto& h : p.heads) {
      h.weight = Matrix(cfg.head_hidden, cfg.prop);
      h.bias = Matrix(1, cfg.head_hidden);
      h.out = Matrix(1, cfg.head_hidden);
      h.offset = Matrix(1, 1);
    }
    return p;
  }

  /// Glorot weights, zero biases. Each weight block draws from its own
  /// sub-stream so adding heads does not disturb the shared blocks.
  static ModelParams init(const ModelConfig& cfg, const RngStream& rng) {
    ModelParams p = zeros(cfg);
    std::uint64_t idx = 0;
    auto fill = [&](Matrix& m) {
      RngStream s = rng.substream(idx++);
      m = glorot_init(m.rows(), m.cols(), s);
    };
    fill(p.enc_w1);
    fill(p.enc_w2);
    fill(p.prop_w1);
    fill(p.prop_w2);
    for (auto& h : p.heads) {
      fill(h.weight);
      fill(h.out);
    }
    return p;
  }

  /// Visits every block in a fixed order with a stable name.
  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("enc_w1", self.enc_w1);
    f("enc_b1", self.enc_b1);
    f("enc_w2", self.enc_w2);
    f("enc_b2", self.enc_b2);
    f("prop_w1", self.prop_w1);
    f("prop_b1", self.prop_b1);
    f("prop_w2", self.prop_w2);
    f("prop_b2", self.prop_b2);
    for (std::size_t k = 0; k < self.heads.size(); ++k) {
      const std::string pre = "head" + std::to_string(k) + "_";
      f(pre + "w", self.heads[k].weight);
      f(pre + "b", self.heads[k].bias);
      f(pre + "u", self.heads[k].out);
      f(pre + "c", self.heads[k].offset);
    }
  }
  template <class F>
  void for_each_block(F&& f) { visit(*this, std::forward<F>(f)); }
  template <class F>
  void for_each_block(F&& f) const { visit(*this, std::forward<F>(f)); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_block([&](const std::string&, const Matrix& m) { n += m.size(); });
    return n;
  }

  std::vector<double> flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for_each_block([&](const std::string&, const Matrix& m) {
      flat.insert(flat.end(), m.values().begin(), m.values().end());
    });
    return flat;
  }

  void assign(std::span<const double> flat) {
    if (flat.size() != parameter_count()) {
      throw ShapeError("flat parameter vector has " + std::to_string(flat.size()) +
                       " entries, expected " + std::to_string(parameter_count()));
    }
    std::size_t off = 0;
    for_each_block([&](const std::string&, Matrix& m) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), m.size(), m.values().begin());
      off += m.size();
    });
  }

  /// Shapes match `cfg` exactly.
  bool conforms(const ModelConfig& cfg) const {
    const ModelParams ref = zeros(cfg);
    if (heads.size() != ref.heads.size()) return false;
    bool ok = true;
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    ref.for_each_block([&](const std::string&, const Matrix& m) {
      shapes.emplace_back(m.rows(), m.cols());
    });
    std::size_t i = 0;
    for_each_block([&](const std::string&, const Matrix& m) {
      ok = ok && m.rows() == shapes[i].first && m.cols() == shapes[i].second;
      ++i;
    });
    return ok;
  }
};

using ParamGrads = ModelParams;

/// Logits, softmax confidence and the argmax label (ties -> lowest index).
struct Prediction {
  std::vector<double> logits;
  std::vector<double> probs;
  std::size_t label = 0;
};

inline Prediction predict(std::span<const double> logits) {
  Prediction p;
  p.logits.assign(logits.begin(), logits.end());
  p.probs = softmax(logits);
  p.label = argmax(logits);
  return p;
}

/// Intermediates of one forward pass, consumed by `backward`.
struct ForwardCache {
  const ModelParams* params = nullptr;
  const MetricGraph* graph = nullptr;
  Matrix input_t;    // D x T, one row per metric series
  Matrix enc_hidden; // D x hidden
  Matrix encoded;    // H, D x embed
  Matrix mixed1;     // Â H, D x embed
  Matrix prop1;      // H¹, D x prop
  Matrix mixed2;     // Â H¹, D x prop
  Matrix propagated; // H̃, D x prop
  std::vector<double> readout;             // r, prop
  std::vector<std::vector<double>> head_hidden;  // per head, head_hidden
};

/// Per-metric temporal encoder. `x` is T x D (rows are timesteps).
/// Returns H (D x embed); `enc_hidden` receives the first-layer activations.
inline Matrix encode(const Matrix& x, const ModelParams& params, Matrix* enc_hidden = nullptr,
                     Matrix* input_t = nullptr) {
  if (x.rows() != params.enc_w1.cols()) {
    throw ShapeError("encode: window has " + std::to_string(x.rows()) +
                     " timesteps, model expects " + std::to_string(params.enc_w1.cols()));
  }
  Matrix xt = x.transposed();
  Matrix a1 = matmul_nt(xt, params.enc_w1);
  add_row_bias(a1, params.enc_b1.values());
  Matrix h1 = tanh_map(a1);
  Matrix a2 = matmul_nt(h1, params.enc_w2);
  add_row_bias(a2, params.enc_b2.values());
  Matrix h = tanh_map(a2);
  if (enc_hidden) *enc_hidden = std::move(h1);
  if (input_t) *input_t = std::move(xt);
  return h;
}

/// Two layers of normalized-adjacency propagation: tanh(Â H W + b).
inline Matrix propagate(const MetricGraph& g, const Matrix& h, const ModelParams& params,
                        ForwardCache* cache = nullptr) {
  if (g.dim() != h.rows()) {
    throw ShapeError("propagate: graph has " + std::to_string(g.dim()) +
                     " vertices, embeddings have " + std::to_string(h.rows()) + " rows");
  }
  Matrix m1 = matmul(g.normalized, h);
  Matrix p1 = matmul(m1, params.prop_w1);
  add_row_bias(p1, params.prop_b1.values());
  Matrix g1 = tanh_map(p1);
  Matrix m2 = matmul(g.normalized, g1);
  Matrix p2 = matmul(m2, params.prop_w2);
  add_row_bias(p2, params.prop_b2.values());
  Matrix out = tanh_map(p2);
  if (cache) {
    cache->mixed1 = std::move(m1);
    cache->prop1 = std::move(g1);
    cache->mixed2 = std::move(m2);
  }
  return out;
}

/// Mean readout followed by the K decoupled heads.
inline std::vector<double> heads(const Matrix& propagated, const ModelParams& params,
                                 ForwardCache* cache = nullptr) {
  const std::size_t d = propagated.rows(), width = propagated.cols();
  if (d == 0) throw ShapeError("heads: no nodes");
  std::vector<double> r(width, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t c = 0; c < width; ++c) r[c] += propagated(i, c);
  for (double& v : r) v /= static_cast<double>(d);

  std::vector<double> z(params.heads.size());
  if (cache) cache->head_hidden.assign(params.heads.size(), {});
  for (std::size_t k = 0; k < params.heads.size(); ++k) {
    const HeadParams& hp = params.heads[k];
    if (hp.weight.cols() != width) throw ShapeError("heads: head width mismatch");
    std::vector<double> s(hp.weight.rows());
    double zk = hp.offset(0, 0);
    for (std::size_t j = 0; j < s.size(); ++j) {
      double a = hp.bias(0, j);
      for (std::size_t c = 0; c < width; ++c) a += hp.weight(j, c) * r[c];
      s[j] = std::tanh(a);
      zk += hp.out(0, j) * s[j];
    }
    z[k] = zk;
    if (cache) cache->head_hidden[k] = std::move(s);
  }
  if (cache) cache->readout = std::move(r);
  return z;
}

inline std::pair<Prediction, ForwardCache> forward(const Matrix& x, const MetricGraph& g,
                                                   const ModelParams& params) {
  ForwardCache cache;
  cache.params = &params;
  cache.graph = &g;
  cache.encoded = encode(x, params, &cache.enc_hidden, &cache.input_t);
  cache.propagated = propagate(g, cache.encoded, params, &cache);
  const std::vector<double> z = heads(cache.propagated, params, &cache);
  return {predict(z), std::move(cache)};
}

/// Logits only; no cache retained.
inline std::vector<double> logits(const Matrix& x, const MetricGraph& g, const ModelParams& params) {
  return heads(propagate(g, encode(x, params), params), params);
}

namespace detail {

inline void add_col_sums(Matrix& bias, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) bias(0, c) += m(r, c);
}

inline void add_into(Matrix& acc, const Matrix& m) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc.values()[i] += m.values()[i];
}

/// d ← d ⊙ (1 − y²) for y = tanh(·).
inline void tanh_backward(Matrix& d, const Matrix& y) {
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double v = y.values()[i];
    d.values()[i] *= 1.0 - v * v;
  }
}

}  // namespace detail

/// Reverse-mode gradients of z·dz with respect to every parameter, added
/// into `grads` (which must be shaped like `params`).
inline void backward_accumulate(const ForwardCache& cache, std::span<const double> dz,
                                const MetricGraph& g, const ModelParams& params,
                                ParamGrads& grads) {
  if (cache.params != &params || cache.graph != &g) {
    throw ContractError("backward: cache was produced with different params or graph");
  }
  const std::size_t d = cache.propagated.rows(), width = cache.propagated.cols();
  if (dz.size() != params.heads.size() || cache.head_hidden.size() != params.heads.size() ||
      cache.readout.size() != width || g.dim() != d || cache.encoded.rows() != d) {
    throw ContractError("backward: cache shapes do not match params/graph");
  }
  if (grads.heads.size() != params.heads.size()) {
    throw ShapeError("backward: gradient buffer has wrong head count");
  }

  std::vector<double> dr(width, 0.0);
  for (std::size_t k = 0; k < params.heads.size(); ++k) {
    if (dz[k] == 0.0) continue;
    const HeadParams& hp = params.heads[k];
    HeadParams& gp = grads.heads[k];
    const std::vector<double>& s = cache.head_hidden[k];
    gp.offset(0, 0) += dz[k];
    for (std::size_t j = 0; j < s.size(); ++j) {
      gp.out(0, j) += dz[k] * s[j];
      const double da = dz[k] * hp.out(0, j) * (1.0 - s[j] * s[j]);
      gp.bias(0, j) += da;
      for (std::size_t c = 0; c < width; ++c) {
        gp.weight(j, c) += da * cache.readout[c];
        dr[c] += hp.weight(j, c) * da;
      }
    }
  }

  // Mean readout spreads dr/D over every node.
  Matrix dp2(d, width);
  const double inv_d = 1.0 / static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t c = 0; c < width; ++c) dp2(i, c) = dr[c] * inv_d;
  detail::tanh_backward(dp2, cache.propagated);

  detail::add_into(grads.prop_w2, matmul_tn(cache.mixed2, dp2));
  detail::add_col_sums(grads.prop_b2, dp2);
  Matrix dp1 = matmul_tn(g.normalized, matmul_nt(dp2, params.prop_w2));
  detail::tanh_backward(dp1, cache.prop1);

  detail::add_into(grads.prop_w1, matmul_tn(cache.mixed1, dp1));
  detail::add_col_sums(grads.prop_b1, dp1);
  Matrix da2 = matmul_tn(g.normalized, matmul_nt(dp1, params.prop_w1));
  detail::tanh_backward(da2, cache.encoded);

  detail::add_into(grads.enc_w2, matmul_tn(da2, cache.enc_hidden));
  detail::add_col_sums(grads.enc_b2, da2);
  Matrix da1 = matmul(da2, params.enc_w2);
  detail::tanh_backward(da1, cache.enc_hidden);

  detail::add_into(grads.enc_w1, matmul_tn(da1, cache.input_t));
  detail::add_col_sums(grads.enc_b1, da1);
}

inline ParamGrads backward(const ForwardCache& cache, std::span<const double> dz,
                           const MetricGraph& g, const ModelParams& params) {
  ParamGrads grads = ModelParams::zeros(ModelConfig{
      params.enc_w1.cols(), params.heads.size(), params.enc_w1.rows(), params.enc_w2.rows(),
      params.prop_w1.cols(), params.heads.empty() ? 1 : params.heads.front().weight.rows()});
  backward_accumulate(cache, dz, g, params, grads);
  return grads;
}

}  // namespace contention
