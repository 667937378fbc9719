// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "perfseer/seernet.hpp"
#include "perfseer/synthbench.hpp"
#include "support/test_support.hpp"

namespace perfseer {
namespace {

using nk::Tape;
using nk::Tensor2D;
using nk::Var;
using nlohmann::json;
using testing::rel_err;
using testing::throws_code;

Tensor2D tensor_from_json(const json& rows) {
  const auto v = rows.get<std::vector<std::vector<double>>>();
  Tensor2D t(v.size(), v.empty() ? 0 : v[0].size());
  for (std::size_t r = 0; r < v.size(); ++r) std::copy(v[r].begin(), v[r].end(), t.row(r).begin());
  return t;
}

SeerNetConfig small_config(std::size_t hidden = 4) {
  SeerNetConfig c;
  c.hidden = hidden;
  c.head_hidden = 3;
  c.num_heads = 2;
  return c;
}

GraphTensors synthetic_tensors(std::uint64_t seed) {
  const PerfGraph pg = build_perfgraph(gen_graph(ArchSpec{}, seed), Phase::kInfer);
  const PerfGraph* one[] = {&pg};
  FeatureNorm norm = fit_feature_norm(one);
  return normalize(pg, norm);
}

GraphTensors three_node_graph(Rng& rng) {
  GraphTensors g;
  g.nodes = testing::random_tensor(rng, 3, kNodeWidth);
  g.edges = testing::random_tensor(rng, 3, kEdgeWidth);
  g.global = testing::random_tensor(rng, 1, kGlobalWidth);
  g.source = {0, 0, 1};
  g.target = {1, 2, 2};
  return g;
}

void expect_close(const Tensor2D& got, const json& want, const char* stage) {
  const Tensor2D w = tensor_from_json(want);
  ASSERT_TRUE(got.same_shape(w)) << stage;
  for (std::size_t k = 0; k < w.size(); ++k) {
    EXPECT_NEAR(got.data()[k], w.data()[k], 1e-12 * std::max(1.0, std::abs(w.data()[k]))) << stage << "[" << k << "]";
  }
}

// Weights, graphs and every intermediate come from an independent script.
TEST(SeerNet, TinyModelMatchesReferenceAtEveryStage) {
  const json doc = json::parse(read_file(testing::data_dir() / "seernet_h2.json"));
  SeerNet net(seernet_config_from_json(doc.at("config")), 0);
  ASSERT_EQ(net.params().size(), doc.at("params").size());
  for (const auto& [name, value] : doc.at("params").items()) {
    Tensor2D& p = net.params().mutable_value(net.params().at(name));
    const Tensor2D v = tensor_from_json(value);
    ASSERT_TRUE(p.same_shape(v)) << name;
    p = v;
  }
  for (const auto& [name, c] : doc.at("cases").items()) {
    SCOPED_TRACE(name);
    const json& gj = c.at("graph");
    GraphTensors g{tensor_from_json(gj.at("nodes")), tensor_from_json(gj.at("edges")), tensor_from_json(gj.at("global")),
                   gj.at("source").get<std::vector<std::size_t>>(), gj.at("target").get<std::vector<std::size_t>>()};
    Tape t(net.params());
    const auto out = net.forward(t, g);
    const json& e = c.at("expected");
    expect_close(t.value(out.encoded.nodes), e.at("V0"), "V0");
    expect_close(t.value(out.encoded.edges), e.at("E0"), "E0");
    expect_close(t.value(out.encoded.global), e.at("U0"), "U0");
    expect_close(t.value(*out.encoded.global_node), e.at("z0"), "z0");
    expect_close(t.value(out.edge_updates), e.at("E1"), "E1");
    expect_close(t.value(out.aggregated), e.at("aggregated"), "aggregated");
    expect_close(t.value(out.nodes), e.at("V1"), "V1");
    expect_close(t.value(*out.global_node), e.at("z1"), "z1");
    expect_close(t.value(out.pooled), e.at("pooled"), "pooled");
    expect_close(t.value(out.embedding), e.at("u1"), "u1");
    const auto heads = e.at("heads").get<std::vector<double>>();
    ASSERT_EQ(out.heads.size(), heads.size());
    for (std::size_t i = 0; i < heads.size(); ++i) EXPECT_NEAR(t.value(out.heads[i])(0, 0), heads[i], 1e-12);
    EXPECT_NEAR(net.predict(g, 1), heads[1], 1e-12);
  }
}

TEST(SeerNet, SingleNodeGlobalNodeIsEncodedNode) {
  SeerNet net(small_config(), 1);
  Rng rng(1);
  GraphTensors g{testing::random_tensor(rng, 1, kNodeWidth), Tensor2D(0, kEdgeWidth),
                 testing::random_tensor(rng, 1, kGlobalWidth), {}, {}};
  Tape t(net.params());
  const auto out = net.forward(t, g);
  EXPECT_EQ(t.value(*out.encoded.global_node), t.value(out.encoded.nodes));
  EXPECT_EQ(t.value(out.aggregated), Tensor2D(1, 4));
  EXPECT_TRUE(std::isfinite(t.value(out.heads[0])(0, 0)));
}

TEST(SeerNet, EdgeAggregationIsIncomingMean) {
  SeerNet net(small_config(2), 1);
  Tape t(net.params());
  const Var e = t.constant(Tensor2D::from_rows({{1.5, -2.0}, {-1.5, 2.0}, {4.0, 1.0}}));
  const Tensor2D agg = t.value(net.edge_to_node_aggregate(t, e, {1, 1, 2}, 3));
  EXPECT_EQ(agg, Tensor2D::from_rows({{0, 0}, {0, 0}, {4.0, 1.0}}));
}

TEST(SeerNet, SoftmaxPoolingClosedForm) {
  nk::ParameterSet params;
  Tape t(params);
  const Tensor2D v = t.value(nk::softmax_pool_rows(t, t.constant(Tensor2D::from_rows({{0.0, 2.0}, {std::log(3.0), 2.0}}))));
  EXPECT_NEAR(v(0, 0), 0.75 * std::log(3.0), 1e-15);
  EXPECT_NEAR(v(0, 1), 2.0, 1e-15);
}

TEST(SeerNet, SynMMHandExample) {
  SeerNetConfig c = small_config(2);
  SeerNet net(c, 1);
  auto& p = net.params();
  p.mutable_value(p.at("synmm_blend.weight")) = Tensor2D::from_rows({{1, 0, 2, 0}, {0, -1, 0.5, 1}});
  p.mutable_value(p.at("synmm_blend.bias")) = Tensor2D::from_rows({{0.5, 0}});
  Tape t(p);
  const Tensor2D out = t.value(net.synmm(t, t.constant(Tensor2D::from_rows({{1, -1}, {3, -5}}))));
  // max = (3, -1), mean = (2, -3)
  EXPECT_DOUBLE_EQ(out(0, 0), 3 + 2 * 2 + 0.5);
  EXPECT_DOUBLE_EQ(out(0, 1), 1 + 0.5 * 2 - 3);
}

TEST(SeerNet, SynMMCollapsesForEqualNodes) {
  SeerNet net(small_config(3), 2);
  Tape t(net.params());
  const Tensor2D same = Tensor2D::from_rows({{0.5, -1, 2}, {0.5, -1, 2}, {0.5, -1, 2}});
  const Var nodes = t.constant(same);
  const Tensor2D via_synmm = t.value(net.synmm(t, nodes));
  const Var max_twice[] = {nk::max_rows(t, nodes), nk::max_rows(t, nodes)};
  const Var mean_twice[] = {nk::mean_rows(t, nodes), nk::mean_rows(t, nodes)};
  const auto& p = net.params();
  const nk::MlpLayer blend{p.at("synmm_blend.weight"), p.at("synmm_blend.bias"), nk::Activation::kNone};
  const Tensor2D via_max = t.value(nk::layer_forward(t, blend, nk::concat_cols(t, max_twice)));
  const Tensor2D via_mean = t.value(nk::layer_forward(t, blend, nk::concat_cols(t, mean_twice)));
  EXPECT_EQ(via_max, via_synmm);
  EXPECT_EQ(via_mean, via_synmm);
}

TEST(SeerNet, ZeroGlobalNodeReducesNodeUpdate) {
  SeerNet net(small_config(), 3);
  Rng rng(3);
  Tape t(net.params());
  const Var agg = t.constant(testing::random_tensor(rng, 2, 4));
  const Var nodes = t.constant(testing::random_tensor(rng, 2, 4));
  const Var global = t.constant(testing::random_tensor(rng, 1, 4));
  const Var zero = t.constant(Tensor2D(1, 4));
  const Tensor2D with_zero = t.value(net.node_update(t, agg, nodes, zero, global));
  EXPECT_EQ(t.value(net.node_update(t, agg, nodes, std::nullopt, global)), with_zero);
}

TEST(SeerNet, ParallelEdgesGetIdenticalUpdates) {
  SeerNet net(small_config(), 4);
  Rng rng(4);
  Tape t(net.params());
  Tensor2D e = testing::random_tensor(rng, 1, 4);
  const Var edges = t.constant(Tensor2D::from_rows({{e(0, 0), e(0, 1), e(0, 2), e(0, 3)}, {e(0, 0), e(0, 1), e(0, 2), e(0, 3)}}));
  const Tensor2D out = t.value(net.edge_update(t, edges, t.constant(testing::random_tensor(rng, 2, 4)), {0, 0}, {1, 1}));
  ASSERT_EQ(out.rows(), 2u);
  EXPECT_TRUE(std::equal(out.row(0).begin(), out.row(0).end(), out.row(1).begin()));
}

TEST(SeerNet, EveryIntermediateHasHiddenWidth) {
  for (bool synmm : {true, false}) {
    for (bool gnpb : {true, false}) {
      SeerNetConfig c = small_config(5);
      c.use_synmm = synmm;
      c.use_gnpb = gnpb;
      SeerNet net(c, 5);
      const GraphTensors g = synthetic_tensors(7);
      Tape t(net.params());
      const auto out = net.forward(t, g);
      for (Var v : {out.encoded.nodes, out.encoded.edges, out.encoded.global, out.edge_updates, out.aggregated, out.nodes,
                    out.pooled, out.embedding}) {
        EXPECT_EQ(t.value(v).cols(), 5u);
      }
      EXPECT_EQ(out.global_node.has_value(), gnpb);
      EXPECT_EQ(t.value(out.nodes).rows(), g.nodes.rows());
      EXPECT_EQ(t.value(out.edge_updates).rows(), g.edges.rows());
      EXPECT_EQ(out.heads.size(), 2u);
      EXPECT_EQ(net.params().find("synmm_blend.weight").has_value(), synmm);
      EXPECT_EQ(net.params().find("mlp_z.0.weight").has_value(), gnpb);
    }
  }
}

class Permutation : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(Permutation, PredictionsIgnoreNodeAndEdgeOrder) {
  const GraphTensors g = synthetic_tensors(GetParam());
  const std::size_t n = g.nodes.rows(), m = g.edges.rows();
  Rng rng(GetParam() + 100);
  std::vector<std::size_t> perm(n), eperm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::iota(eperm.begin(), eperm.end(), 0);
  rng.shuffle(std::span(perm));
  rng.shuffle(std::span(eperm));
  GraphTensors p;
  p.nodes = Tensor2D(n, g.nodes.cols());
  p.edges = Tensor2D(m, g.edges.cols());
  p.global = g.global;
  for (std::size_t i = 0; i < n; ++i) std::copy(g.nodes.row(i).begin(), g.nodes.row(i).end(), p.nodes.row(perm[i]).begin());
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t src = eperm[k];
    std::copy(g.edges.row(src).begin(), g.edges.row(src).end(), p.edges.row(k).begin());
    p.source.push_back(perm[g.source[src]]);
    p.target.push_back(perm[g.target[src]]);
  }
  for (bool synmm : {true, false}) {
    SeerNetConfig c = small_config(16);
    c.use_synmm = synmm;
    SeerNet net(c, GetParam());
    const auto a = net.predict_all(g);
    const auto b = net.predict_all(p);
    for (std::size_t h = 0; h < a.size(); ++h) EXPECT_LT(rel_err(a[h], b[h]), 1e-5);
    Tape ta(net.params()), tb(net.params());
    const Tensor2D za = ta.value(*net.forward(ta, g).encoded.global_node);
    const Tensor2D zb = tb.value(*net.forward(tb, p).encoded.global_node);
    for (std::size_t k = 0; k < za.size(); ++k) EXPECT_NEAR(za.data()[k], zb.data()[k], 1e-6);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, Permutation, ::testing::Range<std::uint64_t>(0, 8));

TEST(SeerNet, EndToEndGradientsMatchFiniteDifferences) {
  for (bool synmm : {true, false}) {
    for (bool gnpb : {true, false}) {
      SCOPED_TRACE(std::to_string(synmm) + std::to_string(gnpb));
      SeerNetConfig c = small_config(4);
      c.use_synmm = synmm;
      c.use_gnpb = gnpb;
      SeerNet net(c, 21);
      Rng rng(22);
      const GraphTensors g = three_node_graph(rng);
      auto loss_of = [&](Tape& t) {
        const auto out = net.forward(t, g);
        const Var l0 = nk::mse_loss(t, out.heads[0], t.constant(Tensor2D(1, 1, 0.3)));
        const Var l1 = nk::mse_loss(t, out.heads[1], t.constant(Tensor2D(1, 1, -0.7)));
        return nk::add(t, l0, l1);
      };
      auto& params = net.params();
      nk::Gradients grads = params.zeros_like();
      {
        Tape t(params);
        t.backward(loss_of(t), Tensor2D(1, 1, 1.0), grads);
      }
      auto eval = [&] {
        Tape t(params);
        return t.value(loss_of(t))(0, 0);
      };
      constexpr double h = 1e-5;
      int checked = 0;
      for (nk::ParamId id = 0; id < params.size(); ++id) {
        Tensor2D& w = params.mutable_value(id);
        for (std::size_t k = 0; k < w.size(); ++k) {
          const double keep = w.data()[k];
          w.data()[k] = keep + h;
          const double up = eval();
          w.data()[k] = keep - h;
          const double down = eval();
          w.data()[k] = keep;
          const double fd = (up - down) / (2 * h);
          EXPECT_LT(rel_err(grads[id].data()[k], fd), 1e-4) << params.name(id) << "[" << k << "]";
          ++checked;
        }
      }
      EXPECT_EQ(checked, static_cast<int>(params.num_scalars()));
    }
  }
}

TEST(SeerNet, SameSeedSameParametersAndOutputs) {
  const GraphTensors g = synthetic_tensors(3);
  SeerNet a(small_config(8), 42), b(small_config(8), 42), c(small_config(8), 43);
  for (nk::ParamId id = 0; id < a.params().size(); ++id) EXPECT_EQ(a.params().value(id), b.params().value(id));
  EXPECT_EQ(a.predict_all(g), b.predict_all(g));
  EXPECT_NE(a.predict_all(g), c.predict_all(g));
}

TEST(SeerNet, SharedParametersExcludeHeads) {
  SeerNet net(small_config(), 1);
  const auto& p = net.params();
  for (nk::ParamId id = 0; id < p.size(); ++id) {
    EXPECT_EQ(net.is_shared(id), p.name(id).rfind("head", 0) != 0) << p.name(id);
  }
}

TEST(SeerNet, Errors) {
  SeerNet net(small_config(), 1);
  GraphTensors g = synthetic_tensors(1);
  EXPECT_TRUE(throws_code([&] { net.predict(g, 2); }, ErrorCode::kWidthMismatch));
  GraphTensors narrow = g;
  narrow.nodes = Tensor2D(g.nodes.rows(), kNodeWidth - 1);
  EXPECT_TRUE(throws_code([&] { net.predict_all(narrow); }, ErrorCode::kWidthMismatch));
  GraphTensors empty = g;
  empty.nodes = Tensor2D(0, kNodeWidth);
  EXPECT_TRUE(throws_code([&] { net.predict_all(empty); }, ErrorCode::kEmptyGraph));
  SeerNetConfig zero = small_config();
  zero.num_heads = 0;
  EXPECT_TRUE(throws_code([&] { SeerNet bad(zero, 1); }, ErrorCode::kWidthMismatch));
}

TEST(SeerNet, ConfigJsonRoundTrip) {
  SeerNetConfig c = small_config(7);
  c.use_gnpb = false;
  EXPECT_EQ(seernet_config_from_json(json::parse(to_json(c).dump())), c);
  json bad = to_json(c);
  bad.erase("hidden");
  EXPECT_TRUE(throws_code([&] { seernet_config_from_json(bad); }, ErrorCode::kParse));
}

}  // namespace
}  // namespace perfseer
