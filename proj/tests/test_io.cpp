// Copyright 2026 The contention-graph Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "contention/config.hpp"
#include "contention/io.hpp"
#include "oracles.hpp"

namespace {

namespace fs = std::filesystem;
using contention::io::json;

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("contention_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

contention::io::Checkpoint random_checkpoint(std::uint64_t seed) {
  contention::io::Checkpoint ck;
  ck.model = {8, 5, 6, 4, 5, 3};
  contention::RngStream rng(seed);
  ck.params = oracle::random_params(ck.model, rng, 0.7);
  contention::Matrix adj(4, 4);
  adj(0, 2) = adj(2, 0) = adj(1, 3) = adj(3, 1) = 1.0;
  ck.graph = contention::graph_from_adjacency(adj, 0.3);
  ck.norm.mean = {0.1, 0.2, 0.3, 1.0 / 3.0};
  ck.norm.std = {1.0, 2.0, 0.5, 1e-3};
  ck.metric_names = {"a", "b", "c", "d"};
  ck.seed = 42;
  ck.config_digest = "abc";
  return ck;
}

TEST(Hash, GitBlobOfKnownString) {
  EXPECT_EQ(contention::io::git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(contention::io::git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(contention::io::sha1_hex("abc"), "a9993e364706816aba3e25717850c26c9cd0d89d");
}

TEST(Csv, FormatDoubleRoundTrips) {
  contention::RngStream rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-30.0, 30.0));
    const auto s = contention::csv::format_double(v);
    const auto back = contention::csv::parse_double(s);
    ASSERT_TRUE(back.has_value()) << s;
    EXPECT_EQ(*back, v) << s;
  }
  EXPECT_EQ(contention::csv::format_double(0.1), "0.1");
}

TEST_F(IoTest, CheckpointRoundTripIsBitwise) {
  const auto ck = random_checkpoint(3);
  contention::io::save_checkpoint(ck, path("ck.json"));
  const auto back = contention::io::load_checkpoint(path("ck.json"));
  EXPECT_EQ(back.model, ck.model);
  EXPECT_TRUE(bitwise_equal(back.params.flatten(), ck.params.flatten()));
  EXPECT_EQ(back.graph.adjacency, ck.graph.adjacency);
  EXPECT_EQ(back.graph.normalized, ck.graph.normalized);
  EXPECT_TRUE(bitwise_equal(back.norm.mean, ck.norm.mean));
  EXPECT_TRUE(bitwise_equal(back.norm.std, ck.norm.std));
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.metric_names, ck.metric_names);

  contention::RngStream rng(4);
  for (int n = 0; n < 20; ++n) {
    const auto x = oracle::random_matrix(8, 4, rng, -2.0, 2.0);
    EXPECT_TRUE(bitwise_equal(contention::logits(x, back.inference_graph(), back.params),
                              contention::logits(x, ck.inference_graph(), ck.params)));
  }
  contention::io::save_checkpoint(back, path("ck2.json"));
  EXPECT_EQ(contention::io::read_file(path("ck.json")), contention::io::read_file(path("ck2.json")));
}

TEST_F(IoTest, CheckpointWithoutPropagationUsesIdentity) {
  auto ck = random_checkpoint(5);
  ck.graph_propagation = false;
  contention::io::save_checkpoint(ck, path("ck.json"));
  const auto back = contention::io::load_checkpoint(path("ck.json"));
  EXPECT_FALSE(back.graph_propagation);
  EXPECT_EQ(back.inference_graph().normalized, contention::Matrix::identity(4));
}

TEST_F(IoTest, CorruptCheckpointsRejected) {
  const auto good = contention::io::checkpoint_json(random_checkpoint(6));
  auto wrong_shape = good;
  wrong_shape["params"]["enc_w1"]["rows"] = 7;
  wrong_shape["params"]["enc_w1"]["data"] = std::vector<double>(7 * 8, 0.0);
  EXPECT_THROW(contention::io::checkpoint_from_json(wrong_shape), contention::ShapeError);
  auto missing = good;
  missing["params"].erase("prop_b2");
  EXPECT_THROW(contention::io::checkpoint_from_json(missing), contention::DataError);
  auto version = good;
  version["format_version"] = 99;
  EXPECT_THROW(contention::io::checkpoint_from_json(version), contention::DataError);
  contention::io::write_file(path("bad.json"), "{not json");
  EXPECT_THROW(contention::io::load_checkpoint(path("bad.json")), contention::DataError);
  EXPECT_THROW(contention::io::load_checkpoint(path("absent.json")), contention::DataError);
}

TEST_F(IoTest, DatasetRoundTrip) {
  contention::ScenarioConfig sc;
  sc.window = 8;
  sc.dim = 8;
  auto ds = contention::generate(sc, 12, contention::RngStream(9));
  ds.windows[3].label.reset();
  contention::io::write_dataset(ds, path("d.csv"));
  EXPECT_TRUE(fs::exists(path("d.manifest.json")));
  const auto back = contention::io::read_dataset(path("d.csv"));
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.metric_names, ds.metric_names);
  EXPECT_EQ(back.class_names, ds.class_names);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.windows[i].label, ds.windows[i].label);
    EXPECT_EQ(back.windows[i].source, ds.windows[i].source);
    EXPECT_TRUE(bitwise_equal(std::vector<double>(back.windows[i].values.values().begin(),
                                                  back.windows[i].values.values().end()),
                              std::vector<double>(ds.windows[i].values.values().begin(),
                                                  ds.windows[i].values.values().end())));
  }
  const json m = json::parse(contention::io::read_file(path("d.manifest.json")));
  EXPECT_EQ(m["windows"], 12);
  EXPECT_EQ(m["T"], 8);
  EXPECT_EQ(m["D"], 8);
}

TEST_F(IoTest, TruncatedDatasetRejected) {
  contention::ScenarioConfig sc;
  sc.window = 8;
  sc.dim = 4;
  contention::io::write_dataset(contention::generate(sc, 3, contention::RngStream(1)), path("d.csv"));
  auto text = contention::io::read_file(path("d.csv"));
  text.resize(text.rfind('\n', text.size() - 2) + 1);
  contention::io::write_file(path("d.csv"), text);
  EXPECT_THROW(contention::io::read_dataset(path("d.csv")), contention::DataError);
  EXPECT_THROW(contention::io::read_dataset(path("none.csv")), contention::DataError);
}

TEST(Tables, HistoryCsvShape) {
  contention::TrainHistory h;
  for (std::size_t e = 1; e <= 3; ++e) {
    contention::EpochRecord r;
    r.epoch = e;
    r.task_losses = {0.5, 0.25};
    r.weights = {1.0, 1.0};
    r.multi_loss = 0.75;
    r.val.macro_f1 = 0.1 * static_cast<double>(e);
    h.epochs.push_back(r);
  }
  h.best_epoch = 3;
  const auto csv = contention::io::history_csv(h);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "epoch,multi_loss,loss_0,loss_1,weight_0,weight_1,val_accuracy,val_macro_recall,"
            "val_macro_precision,val_macro_f1,best");
  EXPECT_NE(csv.find("\n3,0.75,0.5,0.25,1,1,0,0,0,0.30000000000000004,1\n"), std::string::npos)
      << csv;
}

TEST(Tables, MetricsCsvAndTable) {
  const std::vector<std::size_t> pred{0, 1, 1, 2}, actual{0, 1, 2, 2};
  const auto m = contention::metrics_from_predictions(pred, actual, 3);
  const std::vector<std::string> names{"A", "B", "C"};
  const auto csv = contention::io::metrics_csv(m, names);
  EXPECT_NE(csv.find("accuracy,0.75\n"), std::string::npos);
  EXPECT_NE(csv.find("confusion_C_B,1\n"), std::string::npos);
  const auto table = contention::io::metrics_table(m, names);
  EXPECT_NE(table.find("0.7500"), std::string::npos);
  EXPECT_NE(table.find("0.7778"), std::string::npos);
}

TEST(Tables, SweepCsv) {
  contention::SweepTable t{"batch", {}};
  contention::EvalMetrics a, b;
  a.accuracy = 0.5;
  b.accuracy = 1.0;
  t.rows.push_back(contention::make_row(16, {a, b}));
  const auto csv = contention::io::sweep_csv(t);
  EXPECT_NE(csv.find("batch,16,2,0.75,0.3535533905932738,"), std::string::npos) << csv;
  EXPECT_NE(contention::io::sweep_table_text(t).find("0.7500 ± 0.3536"), std::string::npos);
}

// ---------------------------------------------------------------------------

TEST(Config, DefaultsFromEmptyObject) {
  const auto rc = contention::parse_run_config(json::object());
  EXPECT_EQ(rc.scenario().dim, 12u);
  EXPECT_EQ(rc.model().window, 32u);
  EXPECT_EQ(rc.train().batch_size, 64u);
  EXPECT_EQ(rc.train().patience, 10u);
  EXPECT_EQ(rc.experiment.graph_threshold, 0.3);
  EXPECT_EQ(rc.ingest.window, 32u);
  EXPECT_EQ(rc.schema.timestamp_column, "time_stamp");
}

TEST(Config, WindowPropagatesToModelAndIngest) {
  const auto rc = contention::parse_run_config(json::parse(R"({"scenario": {"window": 16}})"));
  EXPECT_EQ(rc.model().window, 16u);
  EXPECT_EQ(rc.ingest.window, 16u);
}

TEST(Config, UnknownKeysRejectedAtEveryLevel) {
  for (const char* text :
       {R"({"bogus": 1})", R"({"scenario": {"dims": 3}})", R"({"model": {"width": 3}})",
        R"({"train": {"lr": 0.1}})", R"({"split": {"training": 0.5}})",
        R"({"experiment": {"n": 5}})", R"({"schema": {"columns": []}})",
        R"({"schema": {"metrics": [{"column": "a", "group": "cpu", "unit": "%"}]}})",
        R"({"ingest": {"step": 60}})", R"({"weak_labels": {"io": 0.5}})",
        R"({"sweep": {"seeds": [1]}})", R"({"scenario": {"groups": {"gpu": [0]}}})"}) {
    try {
      contention::parse_run_config(json::parse(text));
      ADD_FAILURE() << "accepted " << text;
    } catch (const contention::ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find("'"), std::string::npos) << e.what();
    }
  }
}

TEST(Config, InvalidValuesRejected) {
  for (const char* text :
       {R"({"train": {"max_epochs": 0}})", R"({"train": {"batch_size": -1}})",
        R"({"train": {"learning_rate": "fast"}})", R"({"graph_threshold": 1.5})",
        R"({"model": {"window": 8}})", R"({"split": {"train": 0.9}})",
        R"({"scenario": {"groups": {"cpu": [0, 0]}}})", R"({"sweep": {"jobs": 0}})"}) {
    EXPECT_THROW(contention::parse_run_config(json::parse(text)), contention::ConfigError) << text;
  }
}

TEST(Config, CanonicalJsonReparses) {
  const auto rc = contention::parse_run_config(json::parse(
      R"({"train": {"seed": 7, "graph_propagation": false}, "weak_labels": {"disk": 0.4},
          "sweep": {"dims": [8, 12]}, "output_dir": "x"})"));
  const json canon = contention::run_config_json(rc);
  const auto again = contention::parse_run_config(canon);
  EXPECT_EQ(contention::run_config_json(again), canon);
  EXPECT_EQ(again.train().seed, 7u);
  EXPECT_FALSE(again.train().graph_propagation);
  EXPECT_EQ(*again.weak_labels.disk, 0.4);
  EXPECT_FALSE(again.weak_labels.net.has_value());
  EXPECT_EQ(again.output_dir, "x");
}

TEST_F(IoTest, LoadConfigErrors) {
  EXPECT_THROW(contention::load_run_config(path("missing.json")), contention::ConfigError);
  contention::io::write_file(path("bad.json"), "{");
  EXPECT_THROW(contention::load_run_config(path("bad.json")), contention::ConfigError);
}

}  // namespace
