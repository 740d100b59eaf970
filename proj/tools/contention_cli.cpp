// Copyright 2026 The contention-graph Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: gen / ingest / graph / train / eval / predict / sweep.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "contention/config.hpp"
#include "contention/csv.hpp"
#include "contention/data.hpp"
#include "contention/experiment.hpp"
#include "contention/ingest.hpp"
#include "contention/io.hpp"
#include "contention/metric_graph.hpp"
#include "contention/model.hpp"
#include "contention/training.hpp"

namespace fs = std::filesystem;
using namespace contention;
using io::json;

namespace {

constexpr int kExitUsage = 64;
constexpr const char* kOutDirEnv = "CONTENTION_OUT_DIR";

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

RunConfig load_config(const Common& c) {
  RunConfig rc = c.config_path.empty() ? parse_run_config(json::object())
                                       : load_run_config(c.config_path);
  if (c.seed) rc.experiment.train.seed = *c.seed;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) rc.output_dir = env;
  if (!c.out.empty()) rc.output_dir = c.out;
  return rc;
}

/// Digest of everything that affects results; the output location is excluded.
std::string config_digest(const RunConfig& rc) {
  json j = run_config_json(rc);
  j.erase("output_dir");
  return io::sha1_hex(j.dump());
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

json input_record(const std::string& path) {
  return json{{"path", path}, {"git_blob_sha1", io::git_blob_hash(io::read_file(path))}};
}

void write_run_manifest(const std::string& dir, const std::string& command, const RunConfig& rc,
                        const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["seed"] = rc.train().seed;
  m["config_digest"] = config_digest(rc);
  m["config"] = run_config_json(rc);
  json in = json::array();
  for (const auto& p : inputs) in.push_back(input_record(p));
  m["inputs"] = in;
  m["outputs"] = outputs;
  io::write_file(join(dir, "run_manifest.json"), m.dump(2) + "\n");
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

/// Normalized dataset plus the graph to run it against. A dataset whose
/// metric count differs from the checkpoint's is normalized with its own
/// statistics and gets a graph rebuilt at the checkpoint's threshold.
struct Prepared {
  Dataset data;
  MetricGraph graph;
};

Prepared prepare_for_checkpoint(const io::Checkpoint& ck, Dataset ds) {
  if (ds.empty()) throw DataError("dataset has no windows");
  if (ds.window_length() != ck.model.window) {
    throw ShapeError("dataset windows have " + std::to_string(ds.window_length()) +
                     " timesteps, checkpoint expects " + std::to_string(ck.model.window));
  }
  if (ds.metric_names != ck.metric_names) warn("dataset metric names differ from the checkpoint's");
  Prepared p;
  if (ds.dim() == ck.graph.dim()) {
    p.data = apply_norm(std::move(ds), ck.norm);
    p.graph = ck.inference_graph();
  } else {
    warn("dataset has " + std::to_string(ds.dim()) + " metrics, checkpoint graph has " +
         std::to_string(ck.graph.dim()) + "; normalizing with dataset statistics and rebuilding the graph");
    const NormStats own = fit_norm(ds);
    p.data = apply_norm(std::move(ds), own);
    if (!ck.graph_propagation || p.data.size() < 2) {
      p.graph = identity_graph(p.data.dim());
    } else {
      p.graph = build_graph(pearson_matrix(window_values(p.data)), ck.graph.threshold);
    }
  }
  return p;
}

// ---------------------------------------------------------------------------

int cmd_gen(const Common& c, std::optional<std::size_t> n, const std::string& name) {
  RunConfig rc = load_config(c);
  const std::size_t count =
      n.value_or(rc.experiment.n_train + rc.experiment.n_val + rc.experiment.n_test);
  if (count == 0) throw ConfigError("--n must be >= 1");
  rc.scenario().validate();
  const Dataset ds = generate(rc.scenario(), count, RngStream(rc.train().seed));
  ensure_dir(rc.output_dir);
  const std::string path = join(rc.output_dir, name + ".csv");
  io::write_dataset(ds, path);
  const auto counts = ds.class_counts();
  std::cout << "wrote " << ds.size() << " windows (T=" << ds.window_length() << ", D=" << ds.dim()
            << ") to " << path << "\nclass counts:";
  for (std::size_t k = 0; k < counts.size(); ++k) std::cout << " " << ds.class_names[k] << "=" << counts[k];
  std::cout << "\n";
  return 0;
}

int cmd_ingest(const Common& c, const std::string& trace, const std::string& name, bool unlabeled) {
  RunConfig rc = load_config(c);
  IngestReport rep;
  Dataset ds = ingest_csv(trace, rc.schema, rc.ingest, &rep);
  std::size_t labeled = 0;
  if (!unlabeled) {
    const auto groups = rc.schema.groups();
    const auto th = fit_weak_thresholds(ds, groups, rc.weak_labels);
    labeled = apply_weak_labels(ds, groups, th, rc.keep_unlabeled);
    if (ds.empty()) throw DataError("no window received a weak label");
  }
  ensure_dir(rc.output_dir);
  const std::string path = join(rc.output_dir, name + ".csv");
  io::write_dataset(ds, path);
  std::cout << "rows " << rep.rows << ", skipped " << rep.skipped_rows << ", machines " << rep.machines
            << ", windows " << rep.windows;
  if (!unlabeled) std::cout << ", weakly labeled " << labeled;
  std::cout << "\nwrote " << ds.size() << " windows to " << path << "\n";
  if (rep.skipped_rows) warn(std::to_string(rep.skipped_rows) + " unparseable rows skipped");
  return 0;
}

int cmd_graph(const Common& c, const std::string& data, std::optional<double> threshold) {
  RunConfig rc = load_config(c);
  const Dataset ds = io::read_dataset(data);
  const double tau = threshold.value_or(rc.experiment.graph_threshold);
  const MetricGraph g = build_graph(pearson_matrix(window_values(ds)), tau);
  const GraphStats s = graph_stats(g);
  char buf[128];
  std::cout << "metric graph (threshold " << tau << ")\n";
  std::snprintf(buf, sizeof(buf), "%-18s %10zu\n%-18s %10zu\n%-18s %10.4f\n%-18s %10zu\n",
                "vertices", s.vertices, "edges", s.edges, "density", s.density, "isolated",
                s.isolated);
  std::cout << buf << "\ndegree  vertices\n";
  for (const auto& [deg, count] : s.degree_histogram) {
    std::snprintf(buf, sizeof(buf), "%6zu  %8zu\n", deg, count);
    std::cout << buf;
  }
  std::cout << "\nedges\n";
  for (std::size_t i = 0; i < g.dim(); ++i)
    for (std::size_t j = i + 1; j < g.dim(); ++j)
      if (g.adjacency(i, j) != 0.0) std::cout << "  " << ds.metric_names[i] << " -- " << ds.metric_names[j] << "\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& data) {
  RunConfig rc = load_config(c);
  if (!fs::exists(data)) throw DataError("dataset '" + data + "' not found");
  const Dataset raw = io::read_dataset(data);
  if (raw.classes() != rc.model().classes) {
    throw ConfigError("dataset has " + std::to_string(raw.classes()) + " classes, model.classes is " +
                      std::to_string(rc.model().classes));
  }
  if (raw.window_length() != rc.model().window) {
    throw ShapeError("dataset windows have " + std::to_string(raw.window_length()) +
                     " timesteps, model.window is " + std::to_string(rc.model().window));
  }
  const std::uint64_t seed = rc.train().seed;
  const DatasetSplit sp = split(raw, rc.split, RngStream(seed).substream(7));
  const NormStats norm = fit_norm(sp.train);
  const Dataset train_set = apply_norm(sp.train, norm);
  const Dataset val_set = apply_norm(sp.val, norm);
  const Dataset test_set = apply_norm(sp.test, norm);
  const MetricGraph graph =
      build_graph(pearson_matrix(window_values(train_set)), rc.experiment.graph_threshold);

  const TrainResult res = train(train_set, val_set, graph, rc.train(), rc.model());
  const MetricGraph used = training_graph(graph, rc.train());
  const EvalMetrics val = evaluate(res.params, used, val_set);
  const EvalMetrics test = evaluate(res.params, used, test_set);

  io::Checkpoint ck;
  ck.model = rc.model();
  ck.params = res.params;
  ck.graph = graph;
  ck.graph_propagation = rc.train().graph_propagation;
  ck.norm = norm;
  ck.metric_names = raw.metric_names;
  ck.class_names = raw.class_names;
  ck.seed = seed;
  ck.config_digest = config_digest(rc);

  ensure_dir(rc.output_dir);
  const std::string ck_path = join(rc.output_dir, "checkpoint.json");
  const std::string hist_path = join(rc.output_dir, "history.csv");
  const std::string val_path = join(rc.output_dir, "val_metrics.csv");
  const std::string test_path = join(rc.output_dir, "test_metrics.csv");
  io::save_checkpoint(ck, ck_path);
  io::write_file(hist_path, io::history_csv(res.history));
  io::write_file(val_path, io::metrics_csv(val, raw.class_names));
  io::write_file(test_path, io::metrics_csv(test, raw.class_names));
  write_run_manifest(rc.output_dir, "train", rc, {data, io::manifest_path(data)},
                     {ck_path, hist_path, val_path, test_path});

  std::cout << "trained " << res.history.epochs.size() << " epochs (best " << res.history.best_epoch
            << "); split " << train_set.size() << "/" << val_set.size() << "/" << test_set.size()
            << "\n\nvalidation\n"
            << io::metrics_table(val, raw.class_names) << "\ntest\n"
            << io::metrics_table(test, raw.class_names);
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& out_csv) {
  const io::Checkpoint ck = io::load_checkpoint(checkpoint);
  Prepared p = prepare_for_checkpoint(ck, io::read_dataset(data));
  const EvalMetrics m = evaluate(ck.params, p.graph, p.data);
  std::cout << io::metrics_table(m, ck.class_names);
  if (!out_csv.empty()) io::write_file(out_csv, io::metrics_csv(m, ck.class_names));
  return 0;
}

std::string predictions_csv(const std::vector<Prediction>& preds, const std::vector<std::string>& classes) {
  std::ostringstream out;
  out << "window_id";
  for (const auto& c : classes) out << ",z_" << c;
  for (const auto& c : classes) out << ",p_" << c;
  out << ",predicted\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    out << i;
    for (double z : preds[i].logits) out << ',' << csv::format_double(z);
    for (double p : preds[i].probs) out << ',' << csv::format_double(p);
    out << ',' << classes.at(preds[i].label) << '\n';
  }
  return out.str();
}

int cmd_predict(const std::string& checkpoint, const std::string& data, const std::string& out_csv) {
  const io::Checkpoint ck = io::load_checkpoint(checkpoint);
  Prepared p = prepare_for_checkpoint(ck, io::read_dataset(data));
  const std::string text = predictions_csv(predict_all(ck.params, p.graph, p.data), ck.class_names);
  if (out_csv.empty()) std::cout << text;
  else io::write_file(out_csv, text);
  return 0;
}

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
  std::vector<std::uint64_t> seeds;
  if (spec.find(',') == std::string::npos) {
    const auto n = csv::parse_int(spec);
    if (!n || *n <= 0) throw ConfigError("--seeds must be a count or a comma-separated list");
    for (long long i = 0; i < *n; ++i) seeds.push_back(static_cast<std::uint64_t>(i));
    return seeds;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = csv::parse_int(item);
    if (!v || *v < 0) throw ConfigError("bad seed '" + item + "'");
    seeds.push_back(static_cast<std::uint64_t>(*v));
  }
  return seeds;
}

int cmd_sweep(const Common& c, const std::string& kind, const std::string& seeds_spec,
              std::optional<std::size_t> jobs) {
  RunConfig rc = load_config(c);
  const auto seeds = parse_seeds(seeds_spec);
  const std::size_t j = jobs.value_or(rc.sweep_jobs);
  SweepTable t;
  if (kind == "batch") t = sweep_batch(rc.experiment, rc.sweep_batch_sizes, seeds, j);
  else if (kind == "datasize") t = sweep_datasize(rc.experiment, rc.sweep_fractions, seeds, j);
  else t = sweep_dim(rc.experiment, rc.sweep_dims, seeds, j);
  ensure_dir(rc.output_dir);
  const std::string path = join(rc.output_dir, "sweep_" + kind + ".csv");
  io::write_file(path, io::sweep_csv(t));
  write_run_manifest(rc.output_dir, "sweep " + kind, rc, {}, {path});
  std::cout << io::sweep_table_text(t) << "wrote " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-structured multi-task contention classifier"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 ok, 2 config, 3 data, 4 shape, 5 numeric, 6 contract, 64 usage.\n"
             "Set " + std::string(kOutDirEnv) + " to override the output directory.");

  Common common;
  auto add_common = [&](CLI::App* sub, bool with_out) {
    sub->add_option("--config", common.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "seed (overrides train.seed)");
    if (with_out) sub->add_option("--out", common.out, "output directory");
  };

  std::optional<std::size_t> n;
  std::string name = "dataset";
  auto* gen = app.add_subcommand("gen", "generate a labeled synthetic dataset");
  add_common(gen, true);
  gen->add_option("--n", n, "number of windows (default n_train+n_val+n_test)");
  gen->add_option("--name", name, "dataset base name");

  std::string trace;
  bool unlabeled = false;
  auto* ing = app.add_subcommand("ingest", "window a machine-level trace CSV and weak-label it");
  add_common(ing, true);
  ing->add_option("--trace", trace, "trace CSV")->required();
  ing->add_option("--name", name, "dataset base name");
  ing->add_flag("--unlabeled", unlabeled, "skip weak labeling");

  std::string data;
  std::optional<double> threshold;
  auto* gr = app.add_subcommand("graph", "print statistics of the metric dependency graph");
  add_common(gr, false);
  gr->add_option("--data", data, "dataset CSV")->required();
  gr->add_option("--threshold", threshold, "correlation threshold (default graph_threshold)");

  auto* tr = app.add_subcommand("train", "train a model and write checkpoint, history and manifest");
  add_common(tr, true);
  tr->add_option("--data", data, "dataset CSV")->required();

  std::string checkpoint, out_csv;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a labeled dataset");
  ev->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
  ev->add_option("--data", data, "dataset CSV")->required();
  ev->add_option("--out", out_csv, "metrics CSV path");

  auto* pr = app.add_subcommand("predict", "per-window logits, confidences and predicted class");
  pr->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
  pr->add_option("--data", data, "dataset CSV")->required();
  pr->add_option("--out", out_csv, "predictions CSV path (default stdout)");

  std::string kind, seeds = "3";
  std::optional<std::size_t> jobs;
  auto* sw = app.add_subcommand("sweep", "batch-size, train-size or metric-count sensitivity sweep");
  add_common(sw, true);
  sw->add_option("--kind", kind, "batch | datasize | dim")
      ->required()
      ->check(CLI::IsMember({"batch", "datasize", "dim"}));
  sw->add_option("--seeds", seeds, "seed count N (0..N-1) or comma-separated list");
  sw->add_option("--jobs", jobs, "parallel cells");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(common, n, name);
    if (*ing) return cmd_ingest(common, trace, name, unlabeled);
    if (*gr) return cmd_graph(common, data, threshold);
    if (*tr) return cmd_train(common, data);
    if (*ev) return cmd_eval(checkpoint, data, out_csv);
    if (*pr) return cmd_predict(checkpoint, data, out_csv);
    if (*sw) return cmd_sweep(common, kind, seeds, jobs);
  } catch (const contention::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
