// Copyright 2026 The contention-graph Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "contention/data.hpp"
#include "contention/experiment.hpp"
#include "contention/ingest.hpp"
#include "contention/io.hpp"
#include "contention/model.hpp"
#include "contention/training.hpp"

namespace contention {

/// Everything a CLI command may need, parsed from one JSON file.
struct RunConfig {
  Experiment experiment;  // scenario, model, train, graph threshold, split sizes
  SplitFractions split;
  TraceSchema schema;
  IngestOptions ingest;
  WeakLabelThresholds weak_labels;
  bool keep_unlabeled = false;
  std::vector<std::size_t> sweep_batch_sizes = {16, 32, 64, 128};
  std::vector<double> sweep_fractions = {0.25, 0.5, 0.75, 1.0};
  std::vector<std::size_t> sweep_dims = {8, 12, 16, 24};
  std::size_t sweep_jobs = 1;
  std::string output_dir = "out";

  const ScenarioConfig& scenario() const { return experiment.scenario; }
  const ModelConfig& model() const { return experiment.model; }
  const TrainConfig& train() const { return experiment.train; }

  void validate() const {
    experiment.validate();
    split.validate();
    schema.validate();
    ingest.validate();
    if (sweep_jobs == 0) throw ConfigError("sweep.jobs must be >= 1");
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  }
};

namespace config_detail {

using json = io::json;

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) throw ConfigError("unknown config key '" + where + "." + key + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + where + "." + key + "': " + e.what());
  }
}

inline void read_size(const json& obj, const char* key, std::size_t& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError("config key '" + where + "." + key + "' must be a non-negative integer");
  }
  out = v.get<std::size_t>();
}

inline ResourceGroup group_from(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": resource group must be a string");
  const auto g = parse_group(v.get<std::string>());
  if (!g) throw ConfigError(where + ": unknown resource group '" + v.get<std::string>() + "'");
  return *g;
}

inline void parse_scenario(const json& j, ScenarioConfig& s) {
  const std::string w = "scenario";
  check_keys(j, {"dim", "window", "groups", "separation", "leakage", "lag", "ar_coeff", "noise_std"}, w);
  read_size(j, "dim", s.dim, w);
  read_size(j, "window", s.window, w);
  read(j, "separation", s.separation, w);
  read(j, "leakage", s.leakage, w);
  read_size(j, "lag", s.lag, w);
  read(j, "ar_coeff", s.ar_coeff, w);
  read(j, "noise_std", s.noise_std, w);
  if (j.contains("groups")) {
    const json& g = j.at("groups");
    check_keys(g, {"cpu", "mem", "disk", "net"}, w + ".groups");
    std::vector<int> assigned(s.dim, -1);
    for (const auto& [name, idx] : g.items()) {
      const auto grp = parse_group(name);
      if (!idx.is_array()) throw ConfigError("scenario.groups." + name + " must be an array");
      for (const auto& v : idx) {
        if (!v.is_number_integer()) throw ConfigError("scenario.groups." + name + ": bad index");
        const long long i = v.get<long long>();
        if (i < 0 || static_cast<std::size_t>(i) >= s.dim) {
          throw ConfigError("scenario.groups." + name + ": metric index " + std::to_string(i) +
                            " outside [0, dim)");
        }
        if (assigned[static_cast<std::size_t>(i)] != -1) {
          throw ConfigError("scenario.groups: metric " + std::to_string(i) +
                            " assigned to more than one group");
        }
        assigned[static_cast<std::size_t>(i)] = static_cast<int>(*grp);
      }
    }
    s.groups.clear();
    for (std::size_t i = 0; i < s.dim; ++i) {
      if (assigned[i] < 0) {
        throw ConfigError("scenario.groups: metric " + std::to_string(i) + " has no group");
      }
      s.groups.push_back(static_cast<ResourceGroup>(assigned[i]));
    }
  }
}

inline void parse_schema(const json& j, TraceSchema& s) {
  const std::string w = "schema";
  check_keys(j, {"machine_column", "timestamp_column", "metrics"}, w);
  read(j, "machine_column", s.machine_column, w);
  read(j, "timestamp_column", s.timestamp_column, w);
  if (j.contains("metrics")) {
    s.metrics.clear();
    for (const auto& m : j.at("metrics")) {
      check_keys(m, {"column", "name", "group", "scale"}, w + ".metrics[]");
      TraceSchema::MetricColumn c;
      read(m, "column", c.column, w + ".metrics[]");
      read(m, "name", c.name, w + ".metrics[]");
      if (c.name.empty()) c.name = c.column;
      if (!m.contains("group")) throw ConfigError("schema.metrics[]: 'group' is required");
      c.group = group_from(m.at("group"), w + ".metrics[]");
      read(m, "scale", c.scale, w + ".metrics[]");
      s.metrics.push_back(std::move(c));
    }
  }
}

}  // namespace config_detail

inline RunConfig parse_run_config(const io::json& j) {
  using namespace config_detail;
  RunConfig rc;
  check_keys(j, {"scenario", "model", "train", "graph_threshold", "split", "experiment", "schema",
                 "ingest", "weak_labels", "sweep", "output_dir"},
             "config");
  if (j.contains("scenario")) parse_scenario(j.at("scenario"), rc.experiment.scenario);

  ModelConfig& mc = rc.experiment.model;
  mc.window = rc.experiment.scenario.window;
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, {"window", "classes", "hidden", "embed", "prop", "head_hidden"}, "model");
    read_size(m, "window", mc.window, "model");
    read_size(m, "classes", mc.classes, "model");
    read_size(m, "hidden", mc.hidden, "model");
    read_size(m, "embed", mc.embed, "model");
    read_size(m, "prop", mc.prop, "model");
    read_size(m, "head_hidden", mc.head_hidden, "model");
  }

  TrainConfig& tc = rc.experiment.train;
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, {"batch_size", "max_epochs", "learning_rate", "beta1", "beta2", "epsilon",
                   "patience", "seed", "adaptive_weights", "dwa_temperature", "graph_propagation"},
               "train");
    read_size(t, "batch_size", tc.batch_size, "train");
    read_size(t, "max_epochs", tc.max_epochs, "train");
    read(t, "learning_rate", tc.adam.lr, "train");
    read(t, "beta1", tc.adam.beta1, "train");
    read(t, "beta2", tc.adam.beta2, "train");
    read(t, "epsilon", tc.adam.eps, "train");
    read_size(t, "patience", tc.patience, "train");
    read(t, "seed", tc.seed, "train");
    read(t, "adaptive_weights", tc.adaptive_weights, "train");
    read(t, "dwa_temperature", tc.dwa_temperature, "train");
    read(t, "graph_propagation", tc.graph_propagation, "train");
  }
  read(j, "graph_threshold", rc.experiment.graph_threshold, "config");

  if (j.contains("split")) {
    check_keys(j.at("split"), {"train", "val", "test"}, "split");
    read(j.at("split"), "train", rc.split.train, "split");
    read(j.at("split"), "val", rc.split.val, "split");
    read(j.at("split"), "test", rc.split.test, "split");
  }
  if (j.contains("experiment")) {
    const json& e = j.at("experiment");
    check_keys(e, {"n_train", "n_val", "n_test"}, "experiment");
    read_size(e, "n_train", rc.experiment.n_train, "experiment");
    read_size(e, "n_val", rc.experiment.n_val, "experiment");
    read_size(e, "n_test", rc.experiment.n_test, "experiment");
  }

  rc.schema = TraceSchema::machine_usage();
  if (j.contains("schema")) parse_schema(j.at("schema"), rc.schema);
  rc.ingest.window = mc.window;
  if (j.contains("ingest")) {
    const json& g = j.at("ingest");
    check_keys(g, {"window", "stride", "step_seconds", "max_fill"}, "ingest");
    read_size(g, "window", rc.ingest.window, "ingest");
    read_size(g, "stride", rc.ingest.stride, "ingest");
    read(g, "step_seconds", rc.ingest.step_seconds, "ingest");
    read_size(g, "max_fill", rc.ingest.max_fill, "ingest");
  }
  if (j.contains("weak_labels")) {
    const json& wl = j.at("weak_labels");
    check_keys(wl, {"cpu", "mem", "disk", "net", "keep_unlabeled"}, "weak_labels");
    read(wl, "cpu", rc.weak_labels.cpu, "weak_labels");
    read(wl, "mem", rc.weak_labels.mem, "weak_labels");
    if (wl.contains("disk") && !wl.at("disk").is_null()) {
      double v = 0;
      read(wl, "disk", v, "weak_labels");
      rc.weak_labels.disk = v;
    }
    if (wl.contains("net") && !wl.at("net").is_null()) {
      double v = 0;
      read(wl, "net", v, "weak_labels");
      rc.weak_labels.net = v;
    }
    read(wl, "keep_unlabeled", rc.keep_unlabeled, "weak_labels");
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, {"batch_sizes", "fractions", "dims", "jobs"}, "sweep");
    read(s, "batch_sizes", rc.sweep_batch_sizes, "sweep");
    read(s, "fractions", rc.sweep_fractions, "sweep");
    read(s, "dims", rc.sweep_dims, "sweep");
    read_size(s, "jobs", rc.sweep_jobs, "sweep");
  }
  read(j, "output_dir", rc.output_dir, "config");
  rc.validate();
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file '" + path + "' not found");
  io::json j;
  try {
    j = io::json::parse(io::read_file(path));
  } catch (const io::json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  return parse_run_config(j);
}

/// Canonical JSON of the effective configuration (used for digests and manifests).
inline io::json run_config_json(const RunConfig& rc) {
  using io::json;
  const auto& s = rc.scenario();
  json groups = json::object();
  const auto g = s.resolved_groups();
  for (std::size_t gi = 0; gi < kNumGroups; ++gi) {
    json idx = json::array();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (static_cast<std::size_t>(g[i]) == gi) idx.push_back(i);
    groups[kGroupNames[gi]] = idx;
  }
  json metrics = json::array();
  for (const auto& m : rc.schema.metrics)
    metrics.push_back(json{{"column", m.column},
                           {"name", m.name},
                           {"group", kGroupNames[static_cast<std::size_t>(m.group)]},
                           {"scale", m.scale}});
  const auto& t = rc.train();
  return json{
      {"scenario",
       {{"dim", s.dim}, {"window", s.window}, {"groups", groups}, {"separation", s.separation},
        {"leakage", s.leakage}, {"lag", s.lag}, {"ar_coeff", s.ar_coeff}, {"noise_std", s.noise_std}}},
      {"model", io::model_config_json(rc.model())},
      {"train",
       {{"batch_size", t.batch_size}, {"max_epochs", t.max_epochs}, {"learning_rate", t.adam.lr},
        {"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"epsilon", t.adam.eps},
        {"patience", t.patience}, {"seed", t.seed}, {"adaptive_weights", t.adaptive_weights},
        {"dwa_temperature", t.dwa_temperature}, {"graph_propagation", t.graph_propagation}}},
      {"graph_threshold", rc.experiment.graph_threshold},
      {"split", {{"train", rc.split.train}, {"val", rc.split.val}, {"test", rc.split.test}}},
      {"experiment",
       {{"n_train", rc.experiment.n_train}, {"n_val", rc.experiment.n_val},
        {"n_test", rc.experiment.n_test}}},
      {"schema",
       {{"machine_column", rc.schema.machine_column},
        {"timestamp_column", rc.schema.timestamp_column},
        {"metrics", metrics}}},
      {"ingest",
       {{"window", rc.ingest.window}, {"stride", rc.ingest.stride},
        {"step_seconds", rc.ingest.step_seconds}, {"max_fill", rc.ingest.max_fill}}},
      {"weak_labels",
       {{"cpu", rc.weak_labels.cpu}, {"mem", rc.weak_labels.mem},
        {"disk", rc.weak_labels.disk ? json(*rc.weak_labels.disk) : json(nullptr)},
        {"net", rc.weak_labels.net ? json(*rc.weak_labels.net) : json(nullptr)},
        {"keep_unlabeled", rc.keep_unlabeled}}},
      {"sweep",
       {{"batch_sizes", rc.sweep_batch_sizes}, {"fractions", rc.sweep_fractions},
        {"dims", rc.sweep_dims}, {"jobs", rc.sweep_jobs}}},
      {"output_dir", rc.output_dir}};
}

}  // namespace contention
