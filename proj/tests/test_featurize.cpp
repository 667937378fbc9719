// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <filesystem>
#include <numeric>

#include <gtest/gtest.h>

#include "perfseer/featurize.hpp"
#include "perfseer/synthbench.hpp"
#include "support/test_support.hpp"

namespace perfseer {
namespace {

using nlohmann::json;
using testing::throws_code;

std::vector<std::filesystem::path> golden_files() {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(testing::data_dir() / "golden")) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

void expect_stats(const SummaryStats& s, const json& want) {
  EXPECT_EQ(s.total, want[0].get<std::int64_t>());
  EXPECT_EQ(s.mean, want[1].get<double>());
  EXPECT_EQ(s.median, want[2].get<double>());
  EXPECT_EQ(s.max, want[3].get<std::int64_t>());
}

TEST(Featurize, GoldenCorpusMatchesHandValues) {
  const auto files = golden_files();
  ASSERT_GE(files.size(), 5u);
  for (const auto& path : files) {
    SCOPED_TRACE(path.filename().string());
    const json doc = json::parse(read_file(path));
    const Phase phase = *parse_phase(doc.at("phase").get<std::string>());
    const PerfGraph pg = build_perfgraph(parse_graph_json(doc.at("graph")), phase);
    const json& exp = doc.at("expected");

    ASSERT_EQ(pg.nodes.size(), exp.at("nodes").size());
    for (std::size_t i = 0; i < pg.nodes.size(); ++i) {
      const json& w = exp["nodes"][i];
      const NodeFeatures& f = pg.nodes[i];
      EXPECT_EQ(pg.node_ids[i], w.at("id").get<std::int64_t>());
      EXPECT_EQ(f.flops, w.at("flops").get<std::int64_t>()) << "node " << i;
      EXPECT_EQ(f.mac_bytes, w.at("mac_bytes").get<std::int64_t>()) << "node " << i;
      EXPECT_EQ(f.weight_bytes, w.at("weight_bytes").get<std::int64_t>()) << "node " << i;
      const auto hp = w.at("hp").get<std::vector<double>>();
      EXPECT_TRUE(std::equal(hp.begin(), hp.end(), f.hp.begin(), f.hp.end())) << "node " << i;
      if (w.contains("prop_flops")) EXPECT_EQ(f.prop_flops, w["prop_flops"].get<double>());
    }

    ASSERT_EQ(pg.edges.size(), exp.at("edges").size());
    for (std::size_t k = 0; k < pg.edges.size(); ++k) {
      const json& w = exp["edges"][k];
      EXPECT_EQ(pg.edges[k].source, w.at("source").get<std::size_t>());
      EXPECT_EQ(pg.edges[k].target, w.at("target").get<std::size_t>());
      EXPECT_EQ(pg.edges[k].features.size, w.at("size").get<std::int64_t>());
      const auto shape = w.at("shape").get<std::vector<std::int64_t>>();
      EXPECT_TRUE(std::equal(shape.begin(), shape.end(), pg.edges[k].features.shape.begin()));
    }

    const json& u = exp.at("global");
    EXPECT_EQ(pg.u.num_nodes, u.at("num_nodes").get<std::int64_t>());
    EXPECT_EQ(pg.u.num_edges, u.at("num_edges").get<std::int64_t>());
    EXPECT_EQ(pg.u.density, u.at("density").get<double>());
    expect_stats(pg.u.flops, u.at("flops"));
    expect_stats(pg.u.mac, u.at("mac"));
    expect_stats(pg.u.weight, u.at("weight"));
    EXPECT_EQ(pg.u.mean_edge_size, u.at("mean_edge_size").get<double>());
    EXPECT_EQ(pg.u.arith_intensity, u.at("arith_intensity").get<double>());
    EXPECT_EQ(pg.u.batch_size, u.at("batch_size").get<std::int64_t>());
    EXPECT_EQ(static_cast<int>(pg.u.phase), u.at("phase").get<int>());
  }
}

TEST(Featurize, ConvWorkedExample) {
  const PerfGraph pg = build_perfgraph(parse_graph_json(testing::conv_relu_json()), Phase::kInfer);
  EXPECT_EQ(pg.nodes[0].flops, 3538944);
  EXPECT_EQ(pg.nodes[0].mac_bytes, 281344);
  EXPECT_EQ(pg.nodes[1].flops, 65536);
  EXPECT_NEAR(pg.nodes[0].prop_flops, 0.98182, 5e-6);
  EXPECT_EQ(pg.nodes[0].prop_flops, 3538944.0 / 3604480.0);
  EXPECT_EQ(pg.u.density, 0.5);
}

TEST(Featurize, ElementwiseAndGemmCounts) {
  const std::vector<TensorShape> x{TensorShape{{1, 64, 16, 16}}};
  OpNode relu{.id = 0, .kind = OpKind::kReLU};
  EXPECT_EQ(op_mac_bytes(relu, x, x[0], 4), 131072);
  OpNode add{.id = 0, .kind = OpKind::kAdd};
  const std::vector<TensorShape> two{x[0], x[0]};
  EXPECT_EQ(op_mac_bytes(add, two, x[0], 4), 196608);

  OpNode gemm{.id = 0, .kind = OpKind::kGemm, .hyperparams = {{"out_features", 10}}};
  const std::vector<TensorShape> in{TensorShape{{1, 512}}};
  EXPECT_EQ(op_flops(gemm, in, TensorShape{{1, 10}}), 10240);
}

TEST(Featurize, SingleNodeGraphHasZeroDensity) {
  json doc = testing::conv_relu_json();
  doc["nodes"].erase(1);
  doc["edges"] = json::array();
  const PerfGraph pg = build_perfgraph(parse_graph_json(doc), Phase::kInfer);
  EXPECT_EQ(pg.u.density, 0.0);
  EXPECT_EQ(pg.u.mean_edge_size, 0.0);
  EXPECT_EQ(pg.nodes[0].prop_flops, 1.0);
}

class SyntheticGraphs : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(SyntheticGraphs, ProportionsAndTotalsAreConsistent) {
  const CompGraph g = gen_graph(ArchSpec{}, GetParam());
  const PerfGraph pg = build_perfgraph(g, Phase::kInfer);
  double pf = 0, pm = 0, pw = 0;
  std::int64_t f = 0, m = 0, w = 0;
  for (const auto& n : pg.nodes) {
    pf += n.prop_flops;
    pm += n.prop_mac;
    pw += n.prop_weight;
    f += n.flops;
    m += n.mac_bytes;
    w += n.weight_bytes;
    if (n.mac_bytes > 0) EXPECT_NEAR(n.arith_intensity * n.mac_bytes, n.flops, 1e-9 * (1 + n.flops));
    EXPECT_GE(n.flops, 0);
  }
  EXPECT_NEAR(pf, 1.0, 1e-9);
  EXPECT_NEAR(pm, 1.0, 1e-9);
  if (w > 0) EXPECT_NEAR(pw, 1.0, 1e-9);
  EXPECT_EQ(pg.u.flops.total, f);
  EXPECT_EQ(pg.u.mac.total, m);
  EXPECT_EQ(pg.u.weight.total, w);
  EXPECT_NEAR(pg.u.arith_intensity * static_cast<double>(m), static_cast<double>(f), 1e-9 * f);
  EXPECT_EQ(pg.u.num_nodes, static_cast<std::int64_t>(g.nodes.size()));
  EXPECT_EQ(pg.u.num_edges, static_cast<std::int64_t>(g.edges.size()));
}

// Reversing the authored node and edge order does not change the features.
TEST_P(SyntheticGraphs, AuthoredOrderDoesNotMatter) {
  const CompGraph g = gen_graph(ArchSpec{}, GetParam());
  json doc = graph_to_json(g);
  std::reverse(doc["nodes"].begin(), doc["nodes"].end());
  json edges = doc["edges"];
  std::reverse(edges.begin(), edges.end());
  doc["edges"] = edges;
  EXPECT_EQ(build_perfgraph(parse_graph_json(doc), Phase::kTrain), build_perfgraph(g, Phase::kTrain));
}

// Renaming ids permutes node rows but keeps the multiset of node features.
TEST_P(SyntheticGraphs, IdRelabelingPermutesNodes) {
  const CompGraph g = gen_graph(ArchSpec{}, GetParam());
  json doc = graph_to_json(g);
  const auto n = static_cast<std::int64_t>(g.nodes.size());
  auto remap = [n](std::int64_t id) { return (id * 7 + 3) % (n * 11) + 100; };
  for (auto& jn : doc["nodes"]) jn["id"] = remap(jn["id"].get<std::int64_t>());
  for (auto& je : doc["edges"]) {
    je[0] = remap(je[0].get<std::int64_t>());
    je[1] = remap(je[1].get<std::int64_t>());
  }
  const PerfGraph a = build_perfgraph(g, Phase::kInfer);
  const PerfGraph b = build_perfgraph(parse_graph_json(doc), Phase::kInfer);
  EXPECT_EQ(a.u, b.u);
  auto key = [](const NodeFeatures& f) { return node_vector(f); };
  std::vector<std::vector<double>> ka, kb;
  for (const auto& f : a.nodes) ka.push_back(key(f));
  for (const auto& f : b.nodes) kb.push_back(key(f));
  std::sort(ka.begin(), ka.end());
  std::sort(kb.begin(), kb.end());
  EXPECT_EQ(ka, kb);
}

TEST_P(SyntheticGraphs, PerfGraphJsonRoundTrip) {
  const PerfGraph pg = build_perfgraph(gen_graph(ArchSpec{}, GetParam()), Phase::kTrain);
  EXPECT_EQ(perfgraph_from_json(json::parse(perfgraph_to_json(pg).dump())), pg);
}

INSTANTIATE_TEST_SUITE_P(Seeds, SyntheticGraphs, ::testing::Range<std::uint64_t>(0, 20));

TEST(Featurize, FlattenedWidthsAndNames) {
  const PerfGraph pg = build_perfgraph(parse_graph_json(testing::conv_relu_json()), Phase::kInfer);
  EXPECT_EQ(node_vector(pg.nodes[0]).size(), kNodeWidth);
  EXPECT_EQ(edge_vector(pg.edges[0].features).size(), kEdgeWidth);
  EXPECT_EQ(global_vector(pg.u).size(), kGlobalWidth);
  EXPECT_EQ(node_feature_names().size(), kNodeWidth);
  EXPECT_EQ(edge_feature_names().size(), kEdgeWidth);
  EXPECT_EQ(global_feature_names().size(), kGlobalWidth);
  EXPECT_EQ(node_scale_kinds().size(), kNodeWidth);
  const GraphTensors t = raw_tensors(pg);
  EXPECT_EQ(t.nodes.rows(), 2u);
  EXPECT_EQ(t.edges.rows(), 1u);
  EXPECT_EQ(t.global.rows(), 1u);
  EXPECT_EQ(t.source, (std::vector<std::size_t>{0}));
  EXPECT_EQ(t.target, (std::vector<std::size_t>{1}));
}

// After fitting, each training column has mean 0 and unit (or zero) spread.
TEST(Featurize, FittedNormalizationStandardizesTrainingRows) {
  std::vector<PerfGraph> graphs;
  for (std::uint64_t s = 0; s < 30; ++s) graphs.push_back(build_perfgraph(gen_graph(ArchSpec{}, s), Phase::kInfer));
  std::vector<const PerfGraph*> ptrs;
  for (const auto& g : graphs) ptrs.push_back(&g);
  const FeatureNorm norm = fit_feature_norm(ptrs);

  std::vector<std::vector<double>> cols(kNodeWidth);
  for (const auto& g : graphs) {
    const GraphTensors t = normalize(g, norm);
    ASSERT_TRUE(t.nodes.all_finite());
    for (std::size_t r = 0; r < t.nodes.rows(); ++r)
      for (std::size_t c = 0; c < kNodeWidth; ++c) cols[c].push_back(t.nodes(r, c));
  }
  for (std::size_t c = 0; c < kNodeWidth; ++c) {
    const double n = static_cast<double>(cols[c].size());
    const double mean = std::accumulate(cols[c].begin(), cols[c].end(), 0.0) / n;
    double var = 0;
    for (double v : cols[c]) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    EXPECT_NEAR(mean, 0.0, 1e-9) << node_feature_names()[c];
    EXPECT_TRUE(std::abs(sd - 1.0) < 1e-9 || sd < 1e-9) << node_feature_names()[c] << " sd " << sd;
  }
}

TEST(Featurize, ScalerAppliesLogThenAffine) {
  const nk::Tensor2D rows = nk::Tensor2D::from_rows({{0.0, 1.0}, {std::exp(2.0) - 1.0, 3.0}});
  const ColumnScaler s = ColumnScaler::fit(rows, {ScaleKind::kLog, ScaleKind::kLinear});
  EXPECT_DOUBLE_EQ(s.shift[0], 1.0);
  EXPECT_DOUBLE_EQ(s.scale[0], 1.0);
  EXPECT_DOUBLE_EQ(s.shift[1], 2.0);
  EXPECT_DOUBLE_EQ(s.scale[1], 1.0);
  const nk::Tensor2D z = s.transform(rows);
  EXPECT_DOUBLE_EQ(z(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(z(1, 0), 1.0);

  const ColumnScaler id = ColumnScaler::identity({ScaleKind::kLinear, ScaleKind::kLinear});
  EXPECT_EQ(id.transform(rows), rows);

  const ColumnScaler constant = ColumnScaler::fit(nk::Tensor2D::from_rows({{5.0}, {5.0}}), {ScaleKind::kLinear});
  EXPECT_EQ(constant.scale[0], 1.0);
}

TEST(Featurize, NormalizationErrors) {
  const PerfGraph pg = build_perfgraph(parse_graph_json(testing::conv_relu_json()), Phase::kInfer);
  EXPECT_TRUE(throws_code([&] { normalize(pg, FeatureNorm{}); }, ErrorCode::kNotFitted));
  const ColumnScaler s = ColumnScaler::identity({ScaleKind::kLinear});
  EXPECT_TRUE(throws_code([&] { s.transform(nk::Tensor2D(1, 2)); }, ErrorCode::kWidthMismatch));
  EXPECT_TRUE(throws_code([] { fit_feature_norm({}); }, ErrorCode::kTooSmall));

  const PerfGraph* one[] = {&pg};
  const FeatureNorm norm = fit_feature_norm(one);
  EXPECT_EQ(feature_norm_from_json(json::parse(feature_norm_to_json(norm).dump())), norm);
  json bad = feature_norm_to_json(norm);
  bad["node"]["shift"].erase(0);
  EXPECT_TRUE(throws_code([&] { feature_norm_from_json(bad); }, ErrorCode::kWidthMismatch));
}

}  // namespace
}  // namespace perfseer
