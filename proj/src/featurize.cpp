// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include "perfseer/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "perfseer/error.hpp"

namespace perfseer {

namespace {

using json = nlohmann::json;

double median_of(std::vector<std::int64_t> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return static_cast<double>(values[mid]);
  return 0.5 * (static_cast<double>(values[mid - 1]) + static_cast<double>(values[mid]));
}

SummaryStats summarize(const std::vector<std::int64_t>& values) {
  SummaryStats s;
  if (values.empty()) return s;
  s.total = std::accumulate(values.begin(), values.end(), std::int64_t{0});
  s.mean = static_cast<double>(s.total) / static_cast<double>(values.size());
  s.median = median_of(values);
  s.max = *std::max_element(values.begin(), values.end());
  return s;
}

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::int64_t channels(const TensorShape& s) { return s.nchw()[1]; }

json stats_to_json(const SummaryStats& s) {
  return {{"total", s.total}, {"mean", s.mean}, {"median", s.median}, {"max", s.max}};
}

SummaryStats stats_from_json(const json& j) {
  return SummaryStats{j.at("total").get<std::int64_t>(), j.at("mean").get<double>(),
                      j.at("median").get<double>(), j.at("max").get<std::int64_t>()};
}

std::vector<ScaleKind> repeat(ScaleKind kind, std::size_t n) { return std::vector<ScaleKind>(n, kind); }

json scaler_to_json(const ColumnScaler& s, const std::vector<std::string>& names) {
  json kinds = json::array();
  for (auto k : s.kinds) kinds.push_back(k == ScaleKind::kLog ? "log1p" : "linear");
  return {{"names", names}, {"kinds", kinds}, {"shift", s.shift}, {"scale", s.scale}};
}

ColumnScaler scaler_from_json(const json& j, std::size_t width) {
  ColumnScaler s;
  for (const auto& k : j.at("kinds")) {
    s.kinds.push_back(k.get<std::string>() == "log1p" ? ScaleKind::kLog : ScaleKind::kLinear);
  }
  s.shift = j.at("shift").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
  if (s.kinds.size() != width || s.shift.size() != width || s.scale.size() != width) {
    throw Error(ErrorCode::kWidthMismatch, "normalization record has the wrong width");
  }
  return s;
}

}  // namespace

std::string_view to_string(Phase phase) { return phase == Phase::kTrain ? "train" : "infer"; }

std::optional<Phase> parse_phase(std::string_view name) {
  if (name == "infer") return Phase::kInfer;
  if (name == "train") return Phase::kTrain;
  return std::nullopt;
}

std::int64_t op_flops(const OpNode& node, std::span<const TensorShape> in_shapes,
                      const TensorShape& out_shape) {
  const std::int64_t out_elems = out_shape.elements();
  switch (node.kind) {
    case OpKind::kConv2d: {
      const auto in = in_shapes.front().nchw();
      const auto out = out_shape.nchw();
      return 2 * node.hp("kernel_h") * node.hp("kernel_w") * (in[1] / node.hp("groups", 1)) *
             out[1] * out[2] * out[3] * out[0];
    }
    case OpKind::kGemm: {
      const auto& in = in_shapes.front();
      const std::int64_t n = in.dims[0];
      return 2 * n * (in.elements() / n) * node.hp("out_features");
    }
    case OpKind::kReLU:
    case OpKind::kAdd:
    case OpKind::kSoftmax:
      return out_elems;
    case OpKind::kMaxPool:
    case OpKind::kAvgPool:
      return node.hp("kernel_h") * node.hp("kernel_w") * out_elems;
    case OpKind::kGlobalAvgPool: {
      const auto in = in_shapes.front().nchw();
      return in[2] * in[3] * out_elems;
    }
    case OpKind::kBatchNorm:
      return 2 * out_elems;
    case OpKind::kConcat:
    case OpKind::kFlatten:
      return 0;
  }
  return 0;
}

std::int64_t op_mac_bytes(const OpNode& node, std::span<const TensorShape> in_shapes,
                          const TensorShape& out_shape, std::int64_t dtype_bytes) {
  std::int64_t elems = out_shape.elements() + weight_elements(node, out_shape);
  for (const auto& s : in_shapes) elems += s.elements();
  return elems * dtype_bytes;
}

std::array<double, kHpSlotCount> encode_hyperparams(const OpNode& node,
                                                    std::span<const TensorShape> in_shapes,
                                                    const TensorShape& out_shape) {
  std::array<double, kHpSlotCount> hp{};
  auto set = [&hp](HpSlot slot, std::int64_t v) { hp[slot] = static_cast<double>(v); };
  std::int64_t in_ch = 0;
  for (const auto& s : in_shapes) in_ch += channels(s);
  if (node.kind != OpKind::kConcat) in_ch = channels(in_shapes.front());
  const std::int64_t out_ch = channels(out_shape);

  switch (node.kind) {
    case OpKind::kConv2d:
      set(kHpKernelH, node.hp("kernel_h"));
      set(kHpKernelW, node.hp("kernel_w"));
      set(kHpStride, node.hp("stride"));
      set(kHpPadding, node.hp("padding"));
      set(kHpGroups, node.hp("groups", 1));
      set(kHpInChannels, in_ch);
      set(kHpOutChannels, out_ch);
      set(kHpHasBias, node.hp("has_bias"));
      break;
    case OpKind::kMaxPool:
    case OpKind::kAvgPool:
      set(kHpKernelH, node.hp("kernel_h"));
      set(kHpKernelW, node.hp("kernel_w"));
      set(kHpStride, node.hp("stride"));
      set(kHpPadding, node.hp("padding"));
      set(kHpPoolFlag, node.kind == OpKind::kMaxPool ? 1 : 2);
      set(kHpInChannels, in_ch);
      set(kHpOutChannels, out_ch);
      break;
    case OpKind::kGlobalAvgPool: {
      const auto in = in_shapes.front().nchw();
      set(kHpKernelH, in[2]);
      set(kHpKernelW, in[3]);
      set(kHpPoolFlag, 3);
      set(kHpInChannels, in_ch);
      set(kHpOutChannels, out_ch);
      break;
    }
    case OpKind::kGemm: {
      const auto& in = in_shapes.front();
      set(kHpHasBias, node.hp("has_bias"));
      set(kHpGemmIn, in.elements() / in.dims[0]);
      set(kHpGemmOut, node.hp("out_features"));
      break;
    }
    case OpKind::kBatchNorm:
    case OpKind::kReLU:
    case OpKind::kSoftmax:
    case OpKind::kAdd:
    case OpKind::kConcat:
    case OpKind::kFlatten:
      set(kHpInChannels, in_ch);
      set(kHpOutChannels, out_ch);
      break;
  }
  return hp;
}

PerfGraph build_perfgraph(const CompGraph& graph, Phase phase) {
  if (graph.nodes.empty()) throw Error(ErrorCode::kEmptyGraph, "graph must have at least one node");
  if (graph.output_shapes.size() != graph.nodes.size()) {
    throw Error(ErrorCode::kInvalidGraph, "graph shapes have not been inferred");
  }
  // Sorted-id order fixes every reduction below.
  std::vector<std::size_t> by_id(graph.nodes.size());
  std::iota(by_id.begin(), by_id.end(), std::size_t{0});
  std::sort(by_id.begin(), by_id.end(),
            [&](std::size_t a, std::size_t b) { return graph.nodes[a].id < graph.nodes[b].id; });
  std::map<std::int64_t, std::size_t> index;
  for (std::size_t i = 0; i < by_id.size(); ++i) index[graph.nodes[by_id[i]].id] = i;

  PerfGraph pg;
  pg.nodes.reserve(by_id.size());
  for (std::size_t pos : by_id) {
    const OpNode& node = graph.nodes[pos];
    const auto inputs = graph.input_shapes(pos);
    const TensorShape& out = graph.output_shapes[pos];
    NodeFeatures f;
    f.hp = encode_hyperparams(node, inputs, out);
    f.flops = op_flops(node, inputs, out);
    f.mac_bytes = op_mac_bytes(node, inputs, out, graph.dtype_bytes);
    f.weight_bytes = weight_elements(node, out) * graph.dtype_bytes;
    f.arith_intensity = ratio(f.flops, f.mac_bytes);
    pg.nodes.push_back(f);
    pg.node_ids.push_back(node.id);
  }

  for (const auto& e : graph.edges) {
    PerfEdge pe;
    pe.source = index.at(e.source);
    pe.target = index.at(e.target);
    pe.features.size = e.shape.elements();
    pe.features.shape = e.shape.nchw();
    pg.edges.push_back(pe);
  }
  std::stable_sort(pg.edges.begin(), pg.edges.end(), [](const PerfEdge& a, const PerfEdge& b) {
    return std::tie(a.target, a.source) < std::tie(b.target, b.source);
  });

  std::vector<std::int64_t> flops, mac, weight;
  for (const auto& f : pg.nodes) {
    flops.push_back(f.flops);
    mac.push_back(f.mac_bytes);
    weight.push_back(f.weight_bytes);
  }
  GlobalFeatures& u = pg.u;
  u.num_nodes = static_cast<std::int64_t>(pg.nodes.size());
  u.num_edges = static_cast<std::int64_t>(pg.edges.size());
  u.density = u.num_nodes < 2 ? 0.0
                              : static_cast<double>(u.num_edges) /
                                    (static_cast<double>(u.num_nodes) * static_cast<double>(u.num_nodes - 1));
  u.flops = summarize(flops);
  u.mac = summarize(mac);
  u.weight = summarize(weight);
  std::int64_t edge_total = 0;
  for (const auto& e : pg.edges) edge_total += e.features.size;
  u.mean_edge_size = ratio(edge_total, u.num_edges);
  u.arith_intensity = ratio(u.flops.total, u.mac.total);
  u.batch_size = graph.batch_size;
  u.phase = phase;

  for (auto& f : pg.nodes) {
    f.prop_flops = ratio(f.flops, u.flops.total);
    f.prop_mac = ratio(f.mac_bytes, u.mac.total);
    f.prop_weight = ratio(f.weight_bytes, u.weight.total);
  }
  return pg;
}

json perfgraph_to_json(const PerfGraph& pg) {
  json doc;
  doc["format"] = "perfgraph";
  doc["version"] = 1;
  const GlobalFeatures& u = pg.u;
  doc["global"] = {
      {"num_nodes", u.num_nodes},
      {"num_edges", u.num_edges},
      {"density", u.density},
      {"flops_stats", stats_to_json(u.flops)},
      {"mac_stats", stats_to_json(u.mac)},
      {"weight_stats", stats_to_json(u.weight)},
      {"mean_edge_size", u.mean_edge_size},
      {"arith_intensity", u.arith_intensity},
      {"batch_size", u.batch_size},
      {"phase", std::string(to_string(u.phase))},
  };
  json nodes = json::array();
  for (std::size_t i = 0; i < pg.nodes.size(); ++i) {
    const NodeFeatures& f = pg.nodes[i];
    nodes.push_back({{"id", pg.node_ids.at(i)},
                     {"hp", f.hp},
                     {"flops", f.flops},
                     {"mac_bytes", f.mac_bytes},
                     {"weight_bytes", f.weight_bytes},
                     {"arith_intensity", f.arith_intensity},
                     {"prop_flops", f.prop_flops},
                     {"prop_mac", f.prop_mac},
                     {"prop_weight", f.prop_weight}});
  }
  doc["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const auto& e : pg.edges) {
    edges.push_back({{"source", e.source},
                     {"target", e.target},
                     {"size", e.features.size},
                     {"shape", e.features.shape}});
  }
  doc["edges"] = std::move(edges);
  return doc;
}

PerfGraph perfgraph_from_json(const json& doc) {
  try {
    if (doc.value("format", std::string()) != "perfgraph") {
      throw Error(ErrorCode::kParse, "not a perfgraph document");
    }
    PerfGraph pg;
    const json& g = doc.at("global");
    GlobalFeatures& u = pg.u;
    u.num_nodes = g.at("num_nodes").get<std::int64_t>();
    u.num_edges = g.at("num_edges").get<std::int64_t>();
    u.density = g.at("density").get<double>();
    u.flops = stats_from_json(g.at("flops_stats"));
    u.mac = stats_from_json(g.at("mac_stats"));
    u.weight = stats_from_json(g.at("weight_stats"));
    u.mean_edge_size = g.at("mean_edge_size").get<double>();
    u.arith_intensity = g.at("arith_intensity").get<double>();
    u.batch_size = g.at("batch_size").get<std::int64_t>();
    auto phase = parse_phase(g.at("phase").get<std::string>());
    if (!phase) throw Error(ErrorCode::kParse, "unknown phase");
    u.phase = *phase;
    for (const auto& jn : doc.at("nodes")) {
      NodeFeatures f;
      f.hp = jn.at("hp").get<std::array<double, kHpSlotCount>>();
      f.flops = jn.at("flops").get<std::int64_t>();
      f.mac_bytes = jn.at("mac_bytes").get<std::int64_t>();
      f.weight_bytes = jn.at("weight_bytes").get<std::int64_t>();
      f.arith_intensity = jn.at("arith_intensity").get<double>();
      f.prop_flops = jn.at("prop_flops").get<double>();
      f.prop_mac = jn.at("prop_mac").get<double>();
      f.prop_weight = jn.at("prop_weight").get<double>();
      pg.nodes.push_back(f);
      pg.node_ids.push_back(jn.at("id").get<std::int64_t>());
    }
    for (const auto& je : doc.at("edges")) {
      PerfEdge e;
      e.source = je.at("source").get<std::size_t>();
      e.target = je.at("target").get<std::size_t>();
      e.features.size = je.at("size").get<std::int64_t>();
      e.features.shape = je.at("shape").get<std::array<std::int64_t, 4>>();
      if (e.source >= pg.nodes.size() || e.target >= pg.nodes.size()) {
        throw Error(ErrorCode::kInvalidGraph, "perfgraph edge index out of range");
      }
      pg.edges.push_back(e);
    }
    if (static_cast<std::size_t>(u.num_nodes) != pg.nodes.size() ||
        static_cast<std::size_t>(u.num_edges) != pg.edges.size()) {
      throw Error(ErrorCode::kInvalidGraph, "perfgraph counts disagree with its lists");
    }
    return pg;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("perfgraph: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& node_feature_names() {
  static const std::vector<std::string> names = {
      "hp.kernel_h", "hp.kernel_w", "hp.stride",    "hp.padding",   "hp.groups",
      "hp.in_ch",    "hp.out_ch",   "hp.has_bias",  "hp.pool_flag", "hp.gemm_in",
      "hp.gemm_out", "hp.unused",   "flops",        "mac_bytes",    "weight_bytes",
      "arith_intensity", "prop_flops", "prop_mac",  "prop_weight"};
  return names;
}

const std::vector<std::string>& edge_feature_names() {
  static const std::vector<std::string> names = {"size", "shape.n", "shape.c", "shape.h", "shape.w"};
  return names;
}

const std::vector<std::string>& global_feature_names() {
  static const std::vector<std::string> names = {
      "num_nodes",     "num_edges",    "density",       "flops.total",  "flops.mean",
      "flops.median",  "flops.max",    "mac.total",     "mac.mean",     "mac.median",
      "mac.max",       "weight.total", "weight.mean",   "weight.median", "weight.max",
      "mean_edge_size", "arith_intensity", "batch_size", "phase"};
  return names;
}

const std::vector<ScaleKind>& node_scale_kinds() {
  static const std::vector<ScaleKind> kinds = [] {
    auto k = repeat(ScaleKind::kLog, kNodeWidth);
    for (std::size_t i = kHpSlotCount + 3; i < kNodeWidth; ++i) k[i] = ScaleKind::kLinear;
    return k;
  }();
  return kinds;
}

const std::vector<ScaleKind>& edge_scale_kinds() {
  static const std::vector<ScaleKind> kinds = repeat(ScaleKind::kLog, kEdgeWidth);
  return kinds;
}

const std::vector<ScaleKind>& global_scale_kinds() {
  static const std::vector<ScaleKind> kinds = [] {
    auto k = repeat(ScaleKind::kLog, kGlobalWidth);
    k[2] = ScaleKind::kLinear;   // density
    k[16] = ScaleKind::kLinear;  // arith_intensity
    k[18] = ScaleKind::kLinear;  // phase
    return k;
  }();
  return kinds;
}

std::vector<double> node_vector(const NodeFeatures& f) {
  std::vector<double> v(f.hp.begin(), f.hp.end());
  v.insert(v.end(), {static_cast<double>(f.flops), static_cast<double>(f.mac_bytes),
                     static_cast<double>(f.weight_bytes), f.arith_intensity, f.prop_flops,
                     f.prop_mac, f.prop_weight});
  return v;
}

std::vector<double> edge_vector(const EdgeFeatures& f) {
  return {static_cast<double>(f.size), static_cast<double>(f.shape[0]),
          static_cast<double>(f.shape[1]), static_cast<double>(f.shape[2]),
          static_cast<double>(f.shape[3])};
}

std::vector<double> global_vector(const GlobalFeatures& u) {
  auto d = [](std::int64_t v) { return static_cast<double>(v); };
  return {d(u.num_nodes),    d(u.num_edges),     u.density,           d(u.flops.total),
          u.flops.mean,      u.flops.median,     d(u.flops.max),      d(u.mac.total),
          u.mac.mean,        u.mac.median,       d(u.mac.max),        d(u.weight.total),
          u.weight.mean,     u.weight.median,    d(u.weight.max),     u.mean_edge_size,
          u.arith_intensity, d(u.batch_size),    u.phase == Phase::kTrain ? 1.0 : 0.0};
}

GraphTensors raw_tensors(const PerfGraph& pg) {
  GraphTensors t;
  t.nodes = nk::Tensor2D(pg.nodes.size(), kNodeWidth);
  for (std::size_t i = 0; i < pg.nodes.size(); ++i) {
    const auto v = node_vector(pg.nodes[i]);
    std::copy(v.begin(), v.end(), t.nodes.row(i).begin());
  }
  t.edges = nk::Tensor2D(pg.edges.size(), kEdgeWidth);
  for (std::size_t j = 0; j < pg.edges.size(); ++j) {
    const auto v = edge_vector(pg.edges[j].features);
    std::copy(v.begin(), v.end(), t.edges.row(j).begin());
    t.source.push_back(pg.edges[j].source);
    t.target.push_back(pg.edges[j].target);
  }
  const auto g = global_vector(pg.u);
  t.global = nk::Tensor2D::row_vector(g);
  return t;
}

ColumnScaler ColumnScaler::identity(std::vector<ScaleKind> kinds) {
  ColumnScaler s;
  s.shift.assign(kinds.size(), 0.0);
  s.scale.assign(kinds.size(), 1.0);
  s.kinds = std::move(kinds);
  return s;
}

ColumnScaler ColumnScaler::fit(const nk::Tensor2D& rows, std::vector<ScaleKind> kinds) {
  if (rows.cols() != kinds.size()) {
    throw Error(ErrorCode::kWidthMismatch, "scaler width does not match feature rows");
  }
  ColumnScaler s = identity(std::move(kinds));
  const nk::Tensor2D pre = s.transform(rows);
  if (pre.rows() == 0) return s;
  const double n = static_cast<double>(pre.rows());
  for (std::size_t c = 0; c < pre.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < pre.rows(); ++r) mean += pre(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < pre.rows(); ++r) var += (pre(r, c) - mean) * (pre(r, c) - mean);
    const double sd = std::sqrt(var / n);
    s.shift[c] = mean;
    s.scale[c] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

nk::Tensor2D ColumnScaler::transform(const nk::Tensor2D& rows) const {
  if (rows.cols() != kinds.size()) {
    throw Error(ErrorCode::kWidthMismatch, "expected " + std::to_string(kinds.size()) +
                                               " feature columns, got " + std::to_string(rows.cols()));
  }
  nk::Tensor2D out(rows.rows(), rows.cols());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (std::size_t c = 0; c < rows.cols(); ++c) {
      const double x = kinds[c] == ScaleKind::kLog ? std::log1p(rows(r, c)) : rows(r, c);
      out(r, c) = (x - shift[c]) / scale[c];
    }
  }
  return out;
}

FeatureNorm fit_feature_norm(std::span<const PerfGraph* const> training_graphs) {
  if (training_graphs.empty()) throw Error(ErrorCode::kTooSmall, "no graphs to fit normalization on");
  std::size_t n_nodes = 0, n_edges = 0;
  for (const PerfGraph* pg : training_graphs) {
    n_nodes += pg->nodes.size();
    n_edges += pg->edges.size();
  }
  nk::Tensor2D nodes(n_nodes, kNodeWidth), edges(n_edges, kEdgeWidth),
      globals(training_graphs.size(), kGlobalWidth);
  std::size_t ni = 0, ei = 0, gi = 0;
  for (const PerfGraph* pg : training_graphs) {
    for (const auto& f : pg->nodes) {
      const auto v = node_vector(f);
      std::copy(v.begin(), v.end(), nodes.row(ni++).begin());
    }
    for (const auto& e : pg->edges) {
      const auto v = edge_vector(e.features);
      std::copy(v.begin(), v.end(), edges.row(ei++).begin());
    }
    const auto v = global_vector(pg->u);
    std::copy(v.begin(), v.end(), globals.row(gi++).begin());
  }
  FeatureNorm norm;
  norm.node = ColumnScaler::fit(nodes, node_scale_kinds());
  norm.edge = ColumnScaler::fit(edges, edge_scale_kinds());
  norm.global = ColumnScaler::fit(globals, global_scale_kinds());
  norm.fitted = true;
  return norm;
}

GraphTensors normalize(const PerfGraph& pg, const FeatureNorm& norm) {
  if (!norm.fitted) throw Error(ErrorCode::kNotFitted, "feature normalization has not been fitted");
  GraphTensors t = raw_tensors(pg);
  t.nodes = norm.node.transform(t.nodes);
  t.edges = norm.edge.transform(t.edges);
  t.global = norm.global.transform(t.global);
  return t;
}

json feature_norm_to_json(const FeatureNorm& norm) {
  if (!norm.fitted) throw Error(ErrorCode::kNotFitted, "feature normalization has not been fitted");
  return {{"node", scaler_to_json(norm.node, node_feature_names())},
          {"edge", scaler_to_json(norm.edge, edge_feature_names())},
          {"global", scaler_to_json(norm.global, global_feature_names())}};
}

FeatureNorm feature_norm_from_json(const json& doc) {
  try {
    FeatureNorm norm;
    norm.node = scaler_from_json(doc.at("node"), kNodeWidth);
    norm.edge = scaler_from_json(doc.at("edge"), kEdgeWidth);
    norm.global = scaler_from_json(doc.at("global"), kGlobalWidth);
    norm.fitted = true;
    return norm;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("norm stats: ") + e.what());
  }
}

}  // namespace perfseer
