// Copyright 2026 The contention-graph Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "contention/csv.hpp"
#include "contention/data.hpp"
#include "contention/errors.hpp"

namespace contention {

/// Column mapping for machine-level trace CSV files.
struct TraceSchema {
  struct MetricColumn {
    std::string column;  // header name in the CSV
    std::string name;    // metric name in the resulting dataset
    ResourceGroup group = ResourceGroup::Cpu;
    double scale = 1.0;  // applied on read, e.g. 0.01 for percent columns
  };

  std::string machine_column = "machine_id";
  std::string timestamp_column = "timestamp";
  std::vector<MetricColumn> metrics;

  /// Column layout of the public machine_usage table (percent columns scaled to [0,1]).
  static TraceSchema machine_usage() {
    TraceSchema s;
    s.timestamp_column = "time_stamp";
    s.metrics = {{"cpu_util_percent", "cpu_util", ResourceGroup::Cpu, 0.01},
                 {"mem_util_percent", "mem_util", ResourceGroup::Mem, 0.01},
                 {"mem_gps", "mem_gps", ResourceGroup::Mem, 1.0},
                 {"disk_io_percent", "disk_io", ResourceGroup::Disk, 0.01},
                 {"net_in", "net_in", ResourceGroup::Net, 1.0},
                 {"net_out", "net_out", ResourceGroup::Net, 1.0}};
    return s;
  }

  void validate() const {
    if (metrics.empty()) throw ConfigError("schema: no metric columns");
    if (machine_column.empty() || timestamp_column.empty()) {
      throw ConfigError("schema: machine and timestamp columns are required");
    }
    for (const auto& m : metrics) {
      if (m.column.empty()) throw ConfigError("schema: metric column without a name");
      if (!std::isfinite(m.scale)) throw ConfigError("schema: non-finite scale for " + m.column);
    }
  }

  std::vector<std::string> metric_names() const {
    std::vector<std::string> n;
    for (const auto& m : metrics) n.push_back(m.name.empty() ? m.column : m.name);
    return n;
  }

  std::vector<ResourceGroup> groups() const {
    std::vector<ResourceGroup> g;
    for (const auto& m : metrics) g.push_back(m.group);
    return g;
  }
};

struct IngestOptions {
  std::size_t window = 32;
  std::size_t stride = 1;
  std::int64_t step_seconds = 60;
  std::size_t max_fill = 3;  // longest run of empty buckets that is forward-filled

  void validate() const {
    if (window == 0) throw ConfigError("ingest: window must be >= 1");
    if (stride == 0) throw ConfigError("ingest: stride must be >= 1");
    if (step_seconds <= 0) throw ConfigError("ingest: resample step must be > 0");
  }
};

struct IngestReport {
  std::size_t rows = 0;
  std::size_t skipped_rows = 0;
  std::size_t machines = 0;
  std::size_t windows = 0;
};

namespace detail {

/// Resampled series of one machine: `present[b]` marks usable buckets.
struct BucketSeries {
  std::int64_t first_bucket = 0;
  std::vector<std::vector<double>> values;
  std::vector<bool> present;
};

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

/// Bucket-mean resampling on the absolute grid floor(ts / step), then
/// forward-fill of gaps no longer than `max_fill` buckets.
inline BucketSeries resample(std::vector<std::pair<std::int64_t, std::vector<double>>> rows,
                             std::size_t dim, const IngestOptions& opt) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  BucketSeries s;
  s.first_bucket = floor_div(rows.front().first, opt.step_seconds);
  const std::int64_t last = floor_div(rows.back().first, opt.step_seconds);
  const auto len = static_cast<std::size_t>(last - s.first_bucket + 1);
  s.values.assign(len, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> count(len, 0);
  for (const auto& [ts, v] : rows) {
    const auto b = static_cast<std::size_t>(floor_div(ts, opt.step_seconds) - s.first_bucket);
    for (std::size_t i = 0; i < dim; ++i) s.values[b][i] += v[i];
    ++count[b];
  }
  s.present.assign(len, false);
  for (std::size_t b = 0; b < len; ++b) {
    if (count[b] == 0) continue;
    for (double& x : s.values[b]) x /= static_cast<double>(count[b]);
    s.present[b] = true;
  }
  for (std::size_t b = 1; b < len;) {
    if (s.present[b]) {
      ++b;
      continue;
    }
    std::size_t e = b;
    while (e < len && !s.present[e]) ++e;
    // e < len always holds: the last bucket holds the final sample.
    if (e - b <= opt.max_fill) {
      for (std::size_t k = b; k < e; ++k) {
        s.values[k] = s.values[b - 1];
        s.present[k] = true;
      }
    }
    b = e;
  }
  return s;
}

}  // namespace detail

/// Reads a headered machine-level trace CSV and emits unlabeled sliding windows.
/// Rows that fail to parse are skipped and counted in `report`.
inline Dataset ingest_csv(const std::string& path, const TraceSchema& schema,
                          const IngestOptions& opt, IngestReport* report = nullptr) {
  schema.validate();
  opt.validate();
  auto in = csv::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("trace '" + path + "' has no header row");
  const auto header = csv::split_record(line);
  auto find = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (csv::trim(header[i]) == name) return i;
    throw SchemaError("trace '" + path + "' is missing column '" + name + "'");
  };
  const std::size_t machine_col = find(schema.machine_column);
  const std::size_t ts_col = find(schema.timestamp_column);
  std::vector<std::size_t> metric_cols;
  for (const auto& m : schema.metrics) metric_cols.push_back(find(m.column));
  const std::size_t dim = metric_cols.size();

  IngestReport rep;
  // Machines in order of first appearance.
  std::vector<std::string> machine_order;
  std::map<std::string, std::vector<std::pair<std::int64_t, std::vector<double>>>> rows;
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    ++rep.rows;
    const auto f = csv::split_record(line);
    bool ok = f.size() == header.size();
    std::optional<long long> ts;
    std::vector<double> v(dim);
    if (ok) {
      ts = csv::parse_int(f[ts_col]);
      ok = ts.has_value() && !csv::trim(f[machine_col]).empty();
    }
    for (std::size_t i = 0; ok && i < dim; ++i) {
      const auto x = csv::parse_double(f[metric_cols[i]]);
      ok = x.has_value() && std::isfinite(*x);
      if (ok) v[i] = *x * schema.metrics[i].scale;
    }
    if (!ok) {
      ++rep.skipped_rows;
      continue;
    }
    const std::string machine(csv::trim(f[machine_col]));
    auto [it, inserted] = rows.try_emplace(machine);
    if (inserted) machine_order.push_back(machine);
    it->second.emplace_back(*ts, std::move(v));
  }

  Dataset ds;
  ds.metric_names = schema.metric_names();
  ds.source = path;
  for (const auto& machine : machine_order) {
    const auto series = detail::resample(std::move(rows[machine]), dim, opt);
    ++rep.machines;
    const std::size_t len = series.present.size();
    for (std::size_t start = 0; start + opt.window <= len; start += opt.stride) {
      bool complete = true;
      for (std::size_t b = start; b < start + opt.window && complete; ++b)
        complete = series.present[b];
      if (!complete) continue;
      MetricWindow w;
      w.values = Matrix(opt.window, dim);
      for (std::size_t t = 0; t < opt.window; ++t)
        for (std::size_t i = 0; i < dim; ++i) w.values(t, i) = series.values[start + t][i];
      const std::int64_t start_ts =
          (series.first_bucket + static_cast<std::int64_t>(start)) * opt.step_seconds;
      w.source = machine + "@" + std::to_string(start_ts);
      ds.windows.push_back(std::move(w));
    }
  }
  rep.windows = ds.size();
  if (report) *report = rep;
  if (ds.empty()) {
    throw DataError("trace '" + path + "' produced no complete windows (" +
                    std::to_string(rep.rows) + " rows, " + std::to_string(rep.skipped_rows) +
                    " skipped)");
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Weak labels

/// Hot-group thresholds on window-mean utilization. Unset disk/net thresholds
/// are fitted from the data (95th percentile of window means).
struct WeakLabelThresholds {
  double cpu = 0.85;
  double mem = 0.90;
  std::optional<double> disk;
  std::optional<double> net;

  double for_group(ResourceGroup g) const {
    switch (g) {
      case ResourceGroup::Cpu: return cpu;
      case ResourceGroup::Mem: return mem;
      case ResourceGroup::Disk:
        if (!disk) throw ConfigError("weak_label: disk threshold not fitted");
        return *disk;
      case ResourceGroup::Net:
        if (!net) throw ConfigError("weak_label: net threshold not fitted");
        return *net;
    }
    return 0.0;
  }
};

/// Window mean of each resource group's metrics; NaN for a group with no metrics.
inline std::array<double, kNumGroups> group_means(const MetricWindow& w,
                                                  const std::vector<ResourceGroup>& groups) {
  if (groups.size() != w.dim()) throw ShapeError("group_means: group map does not match window");
  std::array<double, kNumGroups> sum{};
  std::array<std::size_t, kNumGroups> n{};
  for (std::size_t t = 0; t < w.length(); ++t)
    for (std::size_t i = 0; i < w.dim(); ++i) {
      const auto g = static_cast<std::size_t>(groups[i]);
      sum[g] += w.values(t, i);
      ++n[g];
    }
  std::array<double, kNumGroups> mean{};
  for (std::size_t g = 0; g < kNumGroups; ++g)
    mean[g] = n[g] ? sum[g] / static_cast<double>(n[g]) : std::nan("");
  return mean;
}

/// Linear-interpolated percentile (q in [0, 100]).
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw DataError("percentile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Fills unset disk/net thresholds with the dataset's 95th percentile of
/// per-window group means.
inline WeakLabelThresholds fit_weak_thresholds(const Dataset& ds,
                                               const std::vector<ResourceGroup>& groups,
                                               WeakLabelThresholds th = {}) {
  std::vector<double> disk, net;
  for (const auto& w : ds.windows) {
    const auto m = group_means(w, groups);
    if (!std::isnan(m[2])) disk.push_back(m[2]);
    if (!std::isnan(m[3])) net.push_back(m[3]);
  }
  if (!th.disk) th.disk = disk.empty() ? std::numeric_limits<double>::infinity() : percentile(disk, 95.0);
  if (!th.net) th.net = net.empty() ? std::numeric_limits<double>::infinity() : percentile(net, 95.0);
  return th;
}

/// One hot group → its class; two or more → HYBRID; none → no label.
inline std::optional<ContentionClass> weak_label(const MetricWindow& w,
                                                 const std::vector<ResourceGroup>& groups,
                                                 const WeakLabelThresholds& th) {
  const auto mean = group_means(w, groups);
  std::size_t hot = 0;
  ResourceGroup which = ResourceGroup::Cpu;
  for (std::size_t g = 0; g < kNumGroups; ++g) {
    if (std::isnan(mean[g])) continue;
    const auto grp = static_cast<ResourceGroup>(g);
    if (mean[g] > th.for_group(grp)) {
      ++hot;
      which = grp;
    }
  }
  if (hot == 0) return std::nullopt;
  if (hot > 1) return ContentionClass::Hybrid;
  return class_of_group(which);
}

/// Applies weak labels in place; unlabeled windows are dropped unless
/// `keep_unlabeled` is set. Returns the number of windows labeled.
inline std::size_t apply_weak_labels(Dataset& ds, const std::vector<ResourceGroup>& groups,
                                     const WeakLabelThresholds& th, bool keep_unlabeled = false) {
  std::size_t labeled = 0;
  std::vector<MetricWindow> kept;
  for (auto& w : ds.windows) {
    const auto cls = weak_label(w, groups, th);
    w.label = cls ? std::optional<std::size_t>(static_cast<std::size_t>(*cls)) : std::nullopt;
    if (cls) ++labeled;
    if (cls || keep_unlabeled) kept.push_back(std::move(w));
  }
  ds.windows = std::move(kept);
  return labeled;
}

}  // namespace contention
