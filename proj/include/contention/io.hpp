// Copyright 2026 The contention-graph Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <openssl/evp.h>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "contention/csv.hpp"
#include "contention/data.hpp"
#include "contention/errors.hpp"
#include "contention/experiment.hpp"
#include "contention/metric_graph.hpp"
#include "contention/model.hpp"
#include "contention/training.hpp"

namespace contention::io {

using json = nlohmann::ordered_json;

inline std::string read_file(const std::string& path) {
  auto in = csv::open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  auto out = csv::open_output(path);
  out << content;
  if (!out) throw DataError("failed writing '" + path + "'");
}

inline std::string to_hex(const unsigned char* p, std::size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    s.push_back(digits[p[i] >> 4]);
    s.push_back(digits[p[i] & 0xF]);
  }
  return s;
}

inline std::string sha1_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw Error("SHA-1 digest failed");
  }
  return to_hex(md, len);
}

/// Object id git would assign to the file as a blob.
inline std::string git_blob_hash(const std::string& content) {
  return sha1_hex("blob " + std::to_string(content.size()) + std::string(1, '\0') + content);
}

// ---------------------------------------------------------------------------
// Datasets: long-format CSV plus a JSON manifest next to it.

inline std::string manifest_path(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".manifest.json");
  return p.string();
}

inline std::string dataset_csv(const Dataset& ds) {
  std::string out = "window_id,label,metric_name,t,value\n";
  for (std::size_t w = 0; w < ds.size(); ++w) {
    const auto& win = ds.windows[w];
    const std::string prefix =
        std::to_string(w) + "," + (win.label ? std::to_string(*win.label) : std::string()) + ",";
    for (std::size_t i = 0; i < win.dim(); ++i) {
      const std::string metric = csv::quote_if_needed(ds.metric_names[i]) + ",";
      for (std::size_t t = 0; t < win.length(); ++t) {
        out += prefix;
        out += metric;
        out += std::to_string(t);
        out += ',';
        out += csv::format_double(win.values(t, i));
        out += '\n';
      }
    }
  }
  return out;
}

inline json dataset_manifest(const Dataset& ds) {
  json m;
  m["format"] = "contention-dataset/1";
  m["T"] = ds.window_length();
  m["D"] = ds.dim();
  m["K"] = ds.classes();
  m["windows"] = ds.size();
  m["metric_names"] = ds.metric_names;
  m["class_names"] = ds.class_names;
  m["source"] = ds.source;
  json sources = json::array();
  for (const auto& w : ds.windows) sources.push_back(w.source);
  m["window_sources"] = sources;
  return m;
}

inline void write_dataset(const Dataset& ds, const std::string& csv_path) {
  ds.validate();
  write_file(csv_path, dataset_csv(ds));
  write_file(manifest_path(csv_path), dataset_manifest(ds).dump(2) + "\n");
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(what + ": invalid JSON: " + e.what());
  }
}

inline Dataset read_dataset(const std::string& csv_path) {
  if (!std::filesystem::exists(csv_path)) throw DataError("dataset '" + csv_path + "' not found");
  const std::string mpath = manifest_path(csv_path);
  if (!std::filesystem::exists(mpath)) throw DataError("dataset manifest '" + mpath + "' not found");
  const json m = parse_json(read_file(mpath), mpath);
  Dataset ds;
  std::size_t T = 0, D = 0, n = 0;
  try {
    T = m.at("T").get<std::size_t>();
    D = m.at("D").get<std::size_t>();
    n = m.at("windows").get<std::size_t>();
    ds.metric_names = m.at("metric_names").get<std::vector<std::string>>();
    ds.class_names = m.at("class_names").get<std::vector<std::string>>();
    ds.source = m.value("source", std::string());
  } catch (const json::exception& e) {
    throw DataError(mpath + ": " + e.what());
  }
  if (ds.metric_names.size() != D) throw DataError(mpath + ": metric_names length differs from D");
  std::map<std::string, std::size_t> metric_index;
  for (std::size_t i = 0; i < D; ++i) metric_index[ds.metric_names[i]] = i;

  ds.windows.resize(n);
  std::vector<std::size_t> filled(n, 0);
  for (std::size_t w = 0; w < n; ++w) ds.windows[w].values = Matrix(T, D);
  if (m.contains("window_sources") && m["window_sources"].size() == n) {
    for (std::size_t w = 0; w < n; ++w)
      ds.windows[w].source = m["window_sources"][w].get<std::string>();
  }

  auto in = csv::open_input(csv_path);
  std::string line;
  std::getline(in, line);
  const auto header = csv::split_record(line);
  if (header != std::vector<std::string>{"window_id", "label", "metric_name", "t", "value"}) {
    throw DataError(csv_path + ": unexpected header '" + line + "'");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split_record(line);
    auto fail = [&](const std::string& why) {
      throw DataError(csv_path + ":" + std::to_string(lineno) + ": " + why);
    };
    if (f.size() != 5) fail("expected 5 fields");
    const auto wid = csv::parse_int(f[0]);
    const auto t = csv::parse_int(f[3]);
    const auto v = csv::parse_double(f[4]);
    if (!wid || *wid < 0 || static_cast<std::size_t>(*wid) >= n) fail("bad window_id");
    if (!t || *t < 0 || static_cast<std::size_t>(*t) >= T) fail("bad t");
    if (!v || !std::isfinite(*v)) fail("bad value");
    auto mi = metric_index.find(f[2]);
    if (mi == metric_index.end()) fail("unknown metric '" + f[2] + "'");
    auto& win = ds.windows[static_cast<std::size_t>(*wid)];
    if (!csv::trim(f[1]).empty()) {
      const auto lab = csv::parse_int(f[1]);
      if (!lab || *lab < 0) fail("bad label");
      win.label = static_cast<std::size_t>(*lab);
    }
    win.values(static_cast<std::size_t>(*t), mi->second) = *v;
    ++filled[static_cast<std::size_t>(*wid)];
  }
  for (std::size_t w = 0; w < n; ++w) {
    if (filled[w] != T * D) {
      throw DataError(csv_path + ": window " + std::to_string(w) + " has " +
                      std::to_string(filled[w]) + " of " + std::to_string(T * D) + " values");
    }
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  ModelParams params;
  MetricGraph graph;
  bool graph_propagation = true;
  NormStats norm;
  std::vector<std::string> metric_names;
  std::vector<std::string> class_names = default_class_names();
  std::uint64_t seed = 0;
  std::string config_digest;

  /// Propagation operator the parameters were trained against.
  MetricGraph inference_graph() const {
    return graph_propagation ? graph : identity_graph(graph.dim());
  }
};

inline json matrix_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

inline Matrix matrix_from_json(const json& j, const std::string& what) {
  try {
    return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  j.at("data").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw DataError("checkpoint block '" + what + "': " + e.what());
  }
}

inline json model_config_json(const ModelConfig& c) {
  return json{{"window", c.window}, {"classes", c.classes},    {"hidden", c.hidden},
              {"embed", c.embed},   {"prop", c.prop},          {"head_hidden", c.head_hidden}};
}

inline json checkpoint_json(const Checkpoint& ck) {
  json j;
  j["format_version"] = kCheckpointVersion;
  j["model_config"] = model_config_json(ck.model);
  json params = json::object();
  ck.params.for_each_block([&](const std::string& name, const Matrix& m) {
    params[name] = matrix_json(m);
  });
  j["params"] = params;
  json adj = json::array();
  for (std::size_t i = 0; i < ck.graph.dim(); ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < ck.graph.dim(); ++k) row.push_back(ck.graph.adjacency(i, k) != 0.0 ? 1 : 0);
    adj.push_back(row);
  }
  j["graph"] = json{{"dim", ck.graph.dim()},
                    {"threshold", ck.graph.threshold},
                    {"graph_propagation", ck.graph_propagation},
                    {"adjacency", adj}};
  j["norm"] = json{{"mean", ck.norm.mean}, {"std", ck.norm.std}};
  j["metric_names"] = ck.metric_names;
  j["class_names"] = ck.class_names;
  j["train_seed"] = ck.seed;
  j["config_digest"] = ck.config_digest;
  return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint ck;
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("unsupported checkpoint format_version " + std::to_string(version));
    }
    const json& mc = j.at("model_config");
    ck.model = ModelConfig{mc.at("window").get<std::size_t>(), mc.at("classes").get<std::size_t>(),
                           mc.at("hidden").get<std::size_t>(), mc.at("embed").get<std::size_t>(),
                           mc.at("prop").get<std::size_t>(), mc.at("head_hidden").get<std::size_t>()};
    ck.model.validate();
    ck.params = ModelParams::zeros(ck.model);
    const json& params = j.at("params");
    ck.params.for_each_block([&](const std::string& name, Matrix& m) {
      if (!params.contains(name)) throw DataError("checkpoint is missing block '" + name + "'");
      Matrix loaded = matrix_from_json(params.at(name), name);
      if (loaded.rows() != m.rows() || loaded.cols() != m.cols()) {
        throw ShapeError("checkpoint block '" + name + "' has shape " + loaded.shape_string() +
                         ", model config requires " + m.shape_string());
      }
      if (!loaded.all_finite()) throw DataError("checkpoint block '" + name + "' is not finite");
      m = std::move(loaded);
    });
    const json& g = j.at("graph");
    const std::size_t dim = g.at("dim").get<std::size_t>();
    Matrix adj(dim, dim);
    const json& rows = g.at("adjacency");
    if (rows.size() != dim) throw DataError("checkpoint adjacency has wrong row count");
    for (std::size_t r = 0; r < dim; ++r) {
      if (rows[r].size() != dim) throw DataError("checkpoint adjacency has wrong column count");
      for (std::size_t c = 0; c < dim; ++c) adj(r, c) = rows[r][c].get<double>();
    }
    ck.graph = graph_from_adjacency(std::move(adj), g.at("threshold").get<double>());
    ck.graph_propagation = g.value("graph_propagation", true);
    ck.norm.mean = j.at("norm").at("mean").get<std::vector<double>>();
    ck.norm.std = j.at("norm").at("std").get<std::vector<double>>();
    if (ck.norm.mean.size() != dim || ck.norm.std.size() != dim) {
      throw DataError("checkpoint normalization stats do not match graph dimension");
    }
    ck.metric_names = j.at("metric_names").get<std::vector<std::string>>();
    ck.class_names = j.at("class_names").get<std::vector<std::string>>();
    if (ck.class_names.size() != ck.model.classes) {
      throw DataError("checkpoint class_names length differs from model classes");
    }
    ck.seed = j.value("train_seed", std::uint64_t{0});
    ck.config_digest = j.value("config_digest", std::string());
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  write_file(path, checkpoint_json(ck).dump(1) + "\n");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path)) throw DataError("checkpoint '" + path + "' not found");
  return checkpoint_from_json(parse_json(read_file(path), path));
}

// ---------------------------------------------------------------------------
// Tables

inline std::string history_csv(const TrainHistory& h) {
  std::ostringstream out;
  const std::size_t K = h.epochs.empty() ? 0 : h.epochs.front().task_losses.size();
  out << "epoch,multi_loss";
  for (std::size_t k = 0; k < K; ++k) out << ",loss_" << k;
  for (std::size_t k = 0; k < K; ++k) out << ",weight_" << k;
  out << ",val_accuracy,val_macro_recall,val_macro_precision,val_macro_f1,best\n";
  for (const auto& e : h.epochs) {
    out << e.epoch << ',' << csv::format_double(e.multi_loss);
    for (double v : e.task_losses) out << ',' << csv::format_double(v);
    for (double v : e.weights) out << ',' << csv::format_double(v);
    out << ',' << csv::format_double(e.val.accuracy) << ',' << csv::format_double(e.val.macro_recall)
        << ',' << csv::format_double(e.val.macro_precision) << ','
        << csv::format_double(e.val.macro_f1) << ',' << (e.epoch == h.best_epoch ? 1 : 0) << '\n';
  }
  return out.str();
}

inline std::string sweep_csv(const SweepTable& t) {
  std::ostringstream out;
  out << "kind,value,runs,accuracy_mean,accuracy_std,recall_mean,recall_std,precision_mean,"
         "precision_std,f1_mean,f1_std\n";
  for (const auto& r : t.rows) {
    out << t.kind << ',' << csv::format_double(r.value) << ',' << r.runs;
    for (const auto* s : {&r.accuracy, &r.macro_recall, &r.macro_precision, &r.macro_f1})
      out << ',' << csv::format_double(s->mean) << ',' << csv::format_double(s->std);
    out << '\n';
  }
  return out.str();
}

inline std::string metrics_csv(const EvalMetrics& m, const std::vector<std::string>& class_names) {
  std::ostringstream out;
  out << "metric,value\n";
  out << "accuracy," << csv::format_double(m.accuracy) << '\n';
  out << "macro_recall," << csv::format_double(m.macro_recall) << '\n';
  out << "macro_precision," << csv::format_double(m.macro_precision) << '\n';
  out << "macro_f1," << csv::format_double(m.macro_f1) << '\n';
  for (std::size_t k = 0; k < m.confusion.size(); ++k)
    for (std::size_t c = 0; c < m.confusion.size(); ++c)
      out << "confusion_" << class_names.at(k) << "_" << class_names.at(c) << ','
          << m.confusion[k][c] << '\n';
  return out.str();
}

/// Aligned plain-text table of the four headline metrics plus the confusion matrix.
inline std::string metrics_table(const EvalMetrics& m, const std::vector<std::string>& class_names) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-10s %-10s %-10s %-10s\n", "Acc", "Recall", "Precision",
                "F1-Score");
  out << buf;
  std::snprintf(buf, sizeof(buf), "%-10.4f %-10.4f %-10.4f %-10.4f\n", m.accuracy, m.macro_recall,
                m.macro_precision, m.macro_f1);
  out << buf << "\nconfusion (rows = true, cols = predicted)\n";
  std::snprintf(buf, sizeof(buf), "%-8s", "");
  out << buf;
  for (const auto& c : class_names) {
    std::snprintf(buf, sizeof(buf), "%8s", c.c_str());
    out << buf;
  }
  out << '\n';
  for (std::size_t k = 0; k < m.confusion.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%-8s", class_names.at(k).c_str());
    out << buf;
    for (auto v : m.confusion[k]) {
      std::snprintf(buf, sizeof(buf), "%8zu", v);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

inline std::string sweep_table_text(const SweepTable& t) {
  std::ostringstream out;
  char buf[200];
  std::snprintf(buf, sizeof(buf), "%-10s %-17s %-17s %-17s %-17s\n", t.kind.c_str(), "Acc",
                "Recall", "Precision", "F1-Score");
  out << buf;
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof(buf),
                  "%-10g %.4f ± %.4f   %.4f ± %.4f   %.4f ± %.4f   %.4f ± %.4f\n", r.value,
                  r.accuracy.mean, r.accuracy.std, r.macro_recall.mean, r.macro_recall.std,
                  r.macro_precision.mean, r.macro_precision.std, r.macro_f1.mean, r.macro_f1.std);
    out << buf;
  }
  return out.str();
}

}  // namespace contention::io
