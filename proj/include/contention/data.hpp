// Copyright 2026 The contention-graph Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "contention/errors.hpp"
#include "contention/numeric.hpp"

namespace contention {

// ---------------------------------------------------------------------------
// Contention taxonomy

enum class ContentionClass : std::size_t { Cpu = 0, Io = 1, Mem = 2, Net = 3, Hybrid = 4 };

inline constexpr std::size_t kNumClasses = 5;
inline constexpr std::array<const char*, kNumClasses> kClassNames = {"CPU", "IO", "MEM", "NET",
                                                                     "HYBRID"};

inline std::vector<std::string> default_class_names() {
  return {kClassNames.begin(), kClassNames.end()};
}

/// Resource groups a metric may belong to.
enum class ResourceGroup : std::size_t { Cpu = 0, Mem = 1, Disk = 2, Net = 3 };

inline constexpr std::size_t kNumGroups = 4;
inline constexpr std::array<const char*, kNumGroups> kGroupNames = {"cpu", "mem", "disk", "net"};

inline std::optional<ResourceGroup> parse_group(const std::string& name) {
  for (std::size_t g = 0; g < kNumGroups; ++g)
    if (name == kGroupNames[g]) return static_cast<ResourceGroup>(g);
  return std::nullopt;
}

/// The class raised when exactly one group is contended.
constexpr ContentionClass class_of_group(ResourceGroup g) {
  switch (g) {
    case ResourceGroup::Cpu: return ContentionClass::Cpu;
    case ResourceGroup::Mem: return ContentionClass::Mem;
    case ResourceGroup::Disk: return ContentionClass::Io;
    case ResourceGroup::Net: return ContentionClass::Net;
  }
  return ContentionClass::Hybrid;
}

/// Fixed downstream group that receives lagged leakage: cpu→disk, disk→net,
/// mem→cpu, net→mem.
constexpr ResourceGroup leak_target(ResourceGroup g) {
  switch (g) {
    case ResourceGroup::Cpu: return ResourceGroup::Disk;
    case ResourceGroup::Disk: return ResourceGroup::Net;
    case ResourceGroup::Mem: return ResourceGroup::Cpu;
    case ResourceGroup::Net: return ResourceGroup::Mem;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Windows and datasets

/// One T x D slice (rows are timesteps) with an optional class label.
struct MetricWindow {
  Matrix values;
  std::optional<std::size_t> label;
  std::string source;

  std::size_t length() const noexcept { return values.rows(); }
  std::size_t dim() const noexcept { return values.cols(); }
};

struct Dataset {
  std::vector<MetricWindow> windows;
  std::vector<std::string> metric_names;
  std::vector<std::string> class_names = default_class_names();
  std::string source;

  std::size_t size() const noexcept { return windows.size(); }
  bool empty() const noexcept { return windows.empty(); }
  std::size_t window_length() const { return windows.empty() ? 0 : windows.front().length(); }
  std::size_t dim() const { return metric_names.size(); }
  std::size_t classes() const noexcept { return class_names.size(); }

  /// Every window is finite and T x D; labels (if any) lie in [0, K).
  void validate() const {
    const std::size_t t = window_length();
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const auto& w = windows[i];
      if (w.length() != t || w.dim() != dim()) {
        throw ShapeError("window " + std::to_string(i) + " has shape " + w.values.shape_string() +
                         ", dataset expects (" + std::to_string(t) + "x" +
                         std::to_string(dim()) + ")");
      }
      if (!w.values.all_finite()) throw DataError("window " + std::to_string(i) + " is not finite");
      if (w.label && *w.label >= classes()) {
        throw DataError("window " + std::to_string(i) + " label " + std::to_string(*w.label) +
                        " out of range");
      }
    }
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(classes(), 0);
    for (const auto& w : windows)
      if (w.label && *w.label < counts.size()) ++counts[*w.label];
    return counts;
  }

  /// Same metadata, no windows.
  Dataset empty_like() const {
    Dataset d;
    d.metric_names = metric_names;
    d.class_names = class_names;
    d.source = source;
    return d;
  }
};

// ---------------------------------------------------------------------------
// Synthetic scenario generator

struct ScenarioConfig {
  std::size_t dim = 12;
  std::size_t window = 32;
  /// Group of each metric; empty means `default_groups(dim)`.
  std::vector<ResourceGroup> groups;
  double separation = 1.0;
  double leakage = 0.3;
  std::size_t lag = 4;
  double ar_coeff = 0.8;
  double noise_std = 0.2;

  /// Contiguous equal blocks cpu, mem, disk, net.
  static std::vector<ResourceGroup> default_groups(std::size_t dim) {
    if (dim == 0 || dim % kNumGroups != 0) {
      throw ConfigError("metric count " + std::to_string(dim) +
                        " cannot be split into 4 equal resource groups");
    }
    std::vector<ResourceGroup> g(dim);
    const std::size_t per = dim / kNumGroups;
    for (std::size_t i = 0; i < dim; ++i) g[i] = static_cast<ResourceGroup>(i / per);
    return g;
  }

  std::vector<ResourceGroup> resolved_groups() const {
    return groups.empty() ? default_groups(dim) : groups;
  }

  std::vector<std::string> metric_names() const {
    const auto g = resolved_groups();
    std::vector<std::size_t> seen(kNumGroups, 0);
    std::vector<std::string> names;
    for (auto grp : g) {
      const auto gi = static_cast<std::size_t>(grp);
      names.push_back(std::string(kGroupNames[gi]) + "_" + std::to_string(seen[gi]++));
    }
    return names;
  }

  void validate() const {
    if (dim == 0) throw ConfigError("scenario: dim must be >= 1");
    if (window == 0) throw ConfigError("scenario: window must be >= 1");
    const auto g = resolved_groups();
    if (g.size() != dim) {
      throw ConfigError("scenario: group map covers " + std::to_string(g.size()) +
                        " metrics, dim is " + std::to_string(dim));
    }
    std::array<std::size_t, kNumGroups> count{};
    for (auto grp : g) {
      const auto gi = static_cast<std::size_t>(grp);
      if (gi >= kNumGroups) throw ConfigError("scenario: unknown resource group");
      ++count[gi];
    }
    for (std::size_t gi = 0; gi < kNumGroups; ++gi) {
      if (count[gi] == 0) {
        throw ConfigError(std::string("scenario: group '") + kGroupNames[gi] + "' has no metrics");
      }
    }
    if (!(separation >= 0.0) || !std::isfinite(separation)) {
      throw ConfigError("scenario: separation must be >= 0");
    }
    if (!(leakage >= 0.0 && leakage <= 1.0)) throw ConfigError("scenario: leakage must be in [0,1]");
    if (lag >= window) throw ConfigError("scenario: lag must be < window");
    if (!(std::abs(ar_coeff) < 1.0)) throw ConfigError("scenario: |ar_coeff| must be < 1");
    if (!(noise_std >= 0.0)) throw ConfigError("scenario: noise_std must be >= 0");
  }
};

namespace patterns {

/// Smooth step to `amp` over the first T/4 steps, then held.
inline double plateau(std::size_t t, std::size_t T, double amp) {
  const double rise = std::max<std::size_t>(1, T / 4);
  const double u = std::min(1.0, static_cast<double>(t) / rise);
  return amp * u * u * (3.0 - 2.0 * u);
}

/// Linear ramp 0 → amp across the window.
inline double ramp(std::size_t t, std::size_t T, double amp) {
  return T <= 1 ? amp : amp * static_cast<double>(t) / static_cast<double>(T - 1);
}

/// +2·amp on every fifth step.
inline double spikes(std::size_t t, std::size_t /*T*/, double amp) {
  return (t + 1) % 5 == 0 ? 2.0 * amp : 0.0;
}

/// amp·sin(2πt/8) over the middle half of the window.
inline double burst(std::size_t t, std::size_t T, double amp) {
  if (t < T / 4 || t >= T - T / 4) return 0.0;
  return amp * std::sin(2.0 * 3.14159265358979323846 * static_cast<double>(t) / 8.0);
}

}  // namespace patterns

/// Additive class signal per resource group, T x 4 (columns cpu, mem, disk, net),
/// including lagged leakage into downstream groups.
inline Matrix class_signal(ContentionClass cls, const ScenarioConfig& cfg) {
  const std::size_t T = cfg.window;
  const double s = cfg.separation;
  Matrix direct(T, kNumGroups);
  auto put = [&](ResourceGroup g, auto&& fn, double amp, std::size_t delay) {
    const auto gi = static_cast<std::size_t>(g);
    for (std::size_t t = delay; t < T; ++t) direct(t, gi) += fn(t - delay, T, amp);
  };
  switch (cls) {
    case ContentionClass::Cpu: put(ResourceGroup::Cpu, patterns::plateau, s, 0); break;
    case ContentionClass::Mem: put(ResourceGroup::Mem, patterns::ramp, s, 0); break;
    case ContentionClass::Io: put(ResourceGroup::Disk, patterns::spikes, s, 0); break;
    case ContentionClass::Net: put(ResourceGroup::Net, patterns::burst, s, 0); break;
    case ContentionClass::Hybrid:
      put(ResourceGroup::Cpu, patterns::plateau, s, 0);
      put(ResourceGroup::Disk, patterns::spikes, 0.7 * s, cfg.lag);
      break;
  }
  Matrix total = direct;
  for (std::size_t gi = 0; gi < kNumGroups; ++gi) {
    const auto target = static_cast<std::size_t>(leak_target(static_cast<ResourceGroup>(gi)));
    for (std::size_t t = cfg.lag; t < T; ++t)
      total(t, target) += cfg.leakage * direct(t - cfg.lag, gi);
  }
  return total;
}

/// One labeled window drawn from `rng`.
inline MetricWindow generate_window(const ScenarioConfig& cfg, ContentionClass cls,
                                    const std::vector<ResourceGroup>& groups, RngStream& rng) {
  const std::size_t T = cfg.window, D = cfg.dim;
  MetricWindow w;
  w.values = Matrix(T, D);
  w.label = static_cast<std::size_t>(cls);
  const double stationary = cfg.noise_std / std::sqrt(1.0 - cfg.ar_coeff * cfg.ar_coeff);
  for (std::size_t i = 0; i < D; ++i) {
    double x = stationary * rng.normal();
    w.values(0, i) = x;
    for (std::size_t t = 1; t < T; ++t) {
      x = cfg.ar_coeff * x + cfg.noise_std * rng.normal();
      w.values(t, i) = x;
    }
  }
  const Matrix signal = class_signal(cls, cfg);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < D; ++i)
      w.values(t, i) += signal(t, static_cast<std::size_t>(groups[i]));
  return w;
}

/// `n` labeled windows; window i uses sub-stream i, so the result does not
/// depend on generation order.
inline Dataset generate(const ScenarioConfig& cfg, std::size_t n, const RngStream& rng) {
  cfg.validate();
  if (n == 0) throw ConfigError("generate: window count must be >= 1");
  const auto groups = cfg.resolved_groups();
  Dataset ds;
  ds.metric_names = cfg.metric_names();
  ds.source = "synthetic";
  ds.windows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream sub = rng.substream(i);
    const auto cls = static_cast<ContentionClass>(sub.below(kNumClasses));
    MetricWindow w = generate_window(cfg, cls, groups, sub);
    w.source = "synthetic/" + std::to_string(i);
    ds.windows.push_back(std::move(w));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Normalization

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;  // floored at 1e-8
};

inline constexpr double kStdFloor = 1e-8;

/// Per-metric mean and population standard deviation over every timestep of
/// every training window (two passes).
inline NormStats fit_norm(const Dataset& train) {
  if (train.empty()) throw DataError("fit_norm: empty training split");
  const std::size_t D = train.windows.front().dim();
  NormStats st{std::vector<double>(D, 0.0), std::vector<double>(D, 0.0)};
  std::size_t n = 0;
  std::vector<bool> constant(D, true);
  const Matrix& first = train.windows.front().values;
  for (const auto& w : train.windows) {
    if (w.dim() != D) throw ShapeError("fit_norm: inconsistent metric count");
    for (std::size_t t = 0; t < w.length(); ++t)
      for (std::size_t i = 0; i < D; ++i) {
        st.mean[i] += w.values(t, i);
        if (w.values(t, i) != first(0, i)) constant[i] = false;
      }
    n += w.length();
  }
  if (n == 0) throw DataError("fit_norm: windows have no timesteps");
  for (std::size_t i = 0; i < D; ++i)
    st.mean[i] = constant[i] ? first(0, i) : st.mean[i] / static_cast<double>(n);
  for (const auto& w : train.windows)
    for (std::size_t t = 0; t < w.length(); ++t)
      for (std::size_t i = 0; i < D; ++i) {
        const double c = w.values(t, i) - st.mean[i];
        st.std[i] += c * c;
      }
  for (double& s : st.std) s = std::max(std::sqrt(s / static_cast<double>(n)), kStdFloor);
  return st;
}

inline MetricWindow apply_norm(MetricWindow w, const NormStats& st) {
  if (w.dim() != st.mean.size()) {
    throw ShapeError("apply_norm: window has " + std::to_string(w.dim()) + " metrics, stats have " +
                     std::to_string(st.mean.size()));
  }
  for (std::size_t t = 0; t < w.length(); ++t)
    for (std::size_t i = 0; i < w.dim(); ++i) {
      double& v = w.values(t, i);
      v = (v - st.mean[i]) / std::max(st.std[i], kStdFloor);
    }
  return w;
}

inline Dataset apply_norm(Dataset ds, const NormStats& st) {
  for (auto& w : ds.windows) w = apply_norm(std::move(w), st);
  return ds;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitFractions {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;

  void validate() const {
    if (!(train > 0.0 && val > 0.0 && test > 0.0)) {
      throw ConfigError("split fractions must all be positive");
    }
    if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  }
};

struct DatasetSplit {
  Dataset train, val, test;
};

namespace detail {

/// Window indices grouped by label; unlabeled windows form the last stratum.
inline std::vector<std::vector<std::size_t>> strata(const Dataset& ds) {
  std::vector<std::vector<std::size_t>> by(ds.classes() + 1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& l = ds.windows[i].label;
    by[l && *l < ds.classes() ? *l : ds.classes()].push_back(i);
  }
  return by;
}

inline std::size_t rounded_share(double fraction, std::size_t n) {
  return std::min(n, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
}

inline Dataset take(const Dataset& ds, std::vector<std::size_t> idx, RngStream& rng) {
  std::sort(idx.begin(), idx.end());
  rng.shuffle(idx);
  Dataset out = ds.empty_like();
  out.windows.reserve(idx.size());
  for (auto i : idx) out.windows.push_back(ds.windows[i]);
  return out;
}

}  // namespace detail

/// Stratified shuffle-and-cut into three disjoint datasets.
inline DatasetSplit split(const Dataset& ds, const SplitFractions& fr, const RngStream& rng) {
  fr.validate();
  RngStream r = rng;
  std::vector<std::size_t> tr, va, te;
  for (auto& stratum : detail::strata(ds)) {
    r.shuffle(stratum);
    const std::size_t n = stratum.size();
    const std::size_t ntr = detail::rounded_share(fr.train, n);
    const std::size_t nva = std::min(n - ntr, detail::rounded_share(fr.val, n));
    tr.insert(tr.end(), stratum.begin(), stratum.begin() + static_cast<std::ptrdiff_t>(ntr));
    va.insert(va.end(), stratum.begin() + static_cast<std::ptrdiff_t>(ntr),
              stratum.begin() + static_cast<std::ptrdiff_t>(ntr + nva));
    te.insert(te.end(), stratum.begin() + static_cast<std::ptrdiff_t>(ntr + nva), stratum.end());
  }
  if (tr.empty() || va.empty() || te.empty()) {
    throw ConfigError("split produced an empty partition (train " + std::to_string(tr.size()) +
                      ", val " + std::to_string(va.size()) + ", test " +
                      std::to_string(te.size()) + ")");
  }
  DatasetSplit out;
  out.train = detail::take(ds, std::move(tr), r);
  out.val = detail::take(ds, std::move(va), r);
  out.test = detail::take(ds, std::move(te), r);
  return out;
}

/// Stratified seeded subsample keeping round(fraction · n_c) windows per class.
inline Dataset subsample(const Dataset& ds, double fraction, const RngStream& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("subsample fraction must be in (0, 1]");
  if (fraction == 1.0) return ds;
  RngStream r = rng;
  std::vector<std::size_t> keep;
  for (auto& stratum : detail::strata(ds)) {
    r.shuffle(stratum);
    const std::size_t n = detail::rounded_share(fraction, stratum.size());
    keep.insert(keep.end(), stratum.begin(), stratum.begin() + static_cast<std::ptrdiff_t>(n));
  }
  if (keep.empty()) throw ConfigError("subsample produced an empty dataset");
  return detail::take(ds, std::move(keep), r);
}

/// Concatenated T x D matrices of a dataset, for correlation estimation.
inline std::vector<Matrix> window_values(const Dataset& ds) {
  std::vector<Matrix> out;
  out.reserve(ds.size());
  for (const auto& w : ds.windows) out.push_back(w.values);
  return out;
}

}  // namespace contention
