// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>

#include <gtest/gtest.h>

#include "perfseer/cli.hpp"
#include "perfseer/featurize.hpp"
#include "perfseer/metrics.hpp"
#include "support/onnx_writer.hpp"
#include "support/test_support.hpp"

namespace perfseer {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string str(const fs::path& p) { return p.string(); }

TEST(Cli, ExtractWritesPerfGraph) {
  const auto dir = testing::scratch_dir("cli_extract");
  write_file(dir / "g.json", testing::conv_relu_json().dump());
  const CliResult r = run({"extract", str(dir / "g.json"), "--phase", "infer", "--out", str(dir / "pg.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const PerfGraph pg = perfgraph_from_json(json::parse(read_file(dir / "pg.json")));
  EXPECT_EQ(pg.nodes[0].flops, 3538944);
  EXPECT_EQ(pg, build_perfgraph(parse_graph_json(testing::conv_relu_json()), Phase::kInfer));

  const CliResult to_stdout = run({"extract", str(dir / "g.json"), "--phase", "train"});
  ASSERT_EQ(to_stdout.code, 0);
  EXPECT_EQ(perfgraph_from_json(json::parse(to_stdout.out)).u.phase, Phase::kTrain);
}

TEST(Cli, ExtractFromOnnx) {
  const auto dir = testing::scratch_dir("cli_onnx");
  namespace ox = testing::onnx;
  write_file(dir / "m.onnx", ox::model({{"Relu", {"x"}, {"y"}, {}}}, {}, {0, 3, 8, 8}));
  const CliResult r = run({"extract", "--from-onnx", str(dir / "m.onnx"), "--batch", "8"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(perfgraph_from_json(json::parse(r.out)).u.batch_size, 8);
}

TEST(Cli, ExitCodes) {
  const auto dir = testing::scratch_dir("cli_errors");
  const CliResult missing = run({"extract", str(dir / "nope.json")});
  EXPECT_EQ(missing.code, 2);
  EXPECT_EQ(missing.err.rfind("error[Io]:", 0), 0u) << missing.err;

  write_file(dir / "bad.json", "{");
  EXPECT_EQ(run({"extract", str(dir / "bad.json")}).code, 2);
  write_file(dir / "lstm.json", R"({"input_shape": [1, 3, 8, 8], "nodes": [{"id": 0, "kind": "LSTM"}], "edges": []})");
  const CliResult unsupported = run({"extract", str(dir / "lstm.json")});
  EXPECT_EQ(unsupported.code, 2);
  EXPECT_NE(unsupported.err.find("error[UnsupportedOp]: UnsupportedOp(LSTM)"), std::string::npos);

  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"gen-dataset", "--out", str(dir)}).code, 1);
  write_file(dir / "g.json", testing::conv_relu_json().dump());
  const CliResult bad_phase = run({"extract", str(dir / "g.json"), "--phase", "sideways"});
  EXPECT_EQ(bad_phase.code, 1);
  EXPECT_EQ(bad_phase.err.rfind("error[Usage]:", 0), 0u);

  const CliResult version = run({"--version"});
  EXPECT_EQ(version.code, 0);
  EXPECT_NE(version.out.find(kToolkitVersion), std::string::npos);
}

TEST(Cli, PipelineProducesReportsAndIsReproducible) {
  const auto dir = testing::scratch_dir("cli_pipeline");
  const std::string data = str(dir / "data");
  ASSERT_EQ(run({"gen-dataset", "--n", "200", "--out", data, "--seed", "3", "-q"}).code, 0);
  EXPECT_TRUE(fs::exists(dir / "data" / "labels.csv"));

  const CliResult ex = run({"extract", str(dir / "data" / "graphs" / "g00007.json"), "--phase", "infer", "--out",
                      str(dir / "pg.json")});
  ASSERT_EQ(ex.code, 0) << ex.err;

  json cfg = {{"hidden", 8}, {"head_hidden", 8}, {"max_epochs", 3}, {"batch_size", 16},
              {"targets", {"time", "mem"}}, {"phases", {"infer", "train"}}, {"use_pcgrad", true}};
  write_file(dir / "cfg.json", cfg.dump());
  for (const char* run_dir : {"run_a", "run_b"}) {
    const CliResult tr = run({"train", "--config", str(dir / "cfg.json"), "--data", data, "--out", str(dir / run_dir), "--seed", "4"});
    ASSERT_EQ(tr.code, 0) << tr.err;
    EXPECT_NE(tr.out.find("mean"), std::string::npos);
  }
  for (const char* f : {"best.bin", "best.json", "history.json", "norm_stats.json", "predictions_test.csv",
                        "report_test.json", "report_test.txt"}) {
    ASSERT_TRUE(fs::exists(dir / "run_a" / f)) << f;
    EXPECT_EQ(read_file(dir / "run_a" / f), read_file(dir / "run_b" / f)) << f;
  }

  const CliResult ev = run({"evaluate", "--ckpt", str(dir / "run_a" / "best.bin"), "--split", "test", "--json", "--out",
                      str(dir / "eval.json"), "--predictions", str(dir / "eval.csv")});
  ASSERT_EQ(ev.code, 0) << ev.err;
  const json report = json::parse(ev.out);
  EXPECT_EQ(report, json::parse(read_file(dir / "run_a" / "report_test.json")));
  EXPECT_EQ(report, json::parse(read_file(dir / "eval.json")));
  EXPECT_EQ(report, to_json(report_from_rows(predictions_from_csv(read_file(dir / "eval.csv")))));
  EXPECT_TRUE(report.contains("mean"));

  const CliResult pr = run({"predict", str(dir / "pg.json"), "--ckpt", str(dir / "run_a" / "best.bin"), "--metric", "infer_time"});
  ASSERT_EQ(pr.code, 0) << pr.err;
  const json pred = json::parse(pr.out);
  EXPECT_EQ(pred.size(), 1u);
  EXPECT_GT(pred.at("infer_time").get<double>(), 0.0);

  const CliResult from_graph = run({"predict", str(dir / "data" / "graphs" / "g00007.json"), "--ckpt",
                              str(dir / "run_a" / "best.bin"), "--phase", "train"});
  ASSERT_EQ(from_graph.code, 0) << from_graph.err;
  EXPECT_TRUE(json::parse(from_graph.out).contains("train_mem"));

  EXPECT_EQ(run({"predict", str(dir / "pg.json"), "--ckpt", str(dir / "run_a" / "best.bin"), "--metric", "infer_util"}).code, 1);
  EXPECT_EQ(run({"evaluate", "--ckpt", str(dir / "run_a" / "best.bin"), "--split", "dev"}).code, 1);
  EXPECT_EQ(run({"evaluate", "--ckpt", str(dir / "missing.bin")}).code, 2);
}

}  // namespace
}  // namespace perfseer
