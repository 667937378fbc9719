// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include "perfseer/graph_ir.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

#include "perfseer/error.hpp"
#include "perfseer/onnx_import.hpp"

namespace perfseer {

namespace {

using json = nlohmann::json;

struct HyperparamRule {
  std::vector<std::string_view> required;
  std::vector<std::string_view> optional;
};

const HyperparamRule& rule_for(OpKind kind) {
  static const std::map<OpKind, HyperparamRule> rules = {
      {OpKind::kConv2d,
       {{"kernel_h", "kernel_w", "stride", "padding", "out_channels"}, {"groups", "has_bias"}}},
      {OpKind::kGemm, {{"out_features"}, {"has_bias"}}},
      {OpKind::kBatchNorm, {{}, {"epsilon"}}},
      {OpKind::kReLU, {{}, {}}},
      {OpKind::kMaxPool, {{"kernel_h", "kernel_w", "stride"}, {"padding"}}},
      {OpKind::kAvgPool, {{"kernel_h", "kernel_w", "stride"}, {"padding"}}},
      {OpKind::kGlobalAvgPool, {{}, {}}},
      {OpKind::kAdd, {{}, {}}},
      {OpKind::kConcat, {{}, {"axis"}}},
      {OpKind::kFlatten, {{}, {}}},
      {OpKind::kSoftmax, {{}, {"axis"}}},
  };
  return rules.at(kind);
}

[[noreturn]] void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

std::string node_label(const OpNode& node) {
  return std::string(to_string(node.kind)) + "#" + std::to_string(node.id);
}

void validate_hyperparams(const OpNode& node) {
  const HyperparamRule& rule = rule_for(node.kind);
  for (auto key : rule.required) {
    if (!node.hyperparams.count(std::string(key))) {
      fail(ErrorCode::kInvalidGraph,
           node_label(node) + " is missing hyperparameter '" + std::string(key) + "'");
    }
  }
  for (const auto& [key, value] : node.hyperparams) {
    const bool known =
        std::find(rule.required.begin(), rule.required.end(), key) != rule.required.end() ||
        std::find(rule.optional.begin(), rule.optional.end(), key) != rule.optional.end();
    if (!known) {
      fail(ErrorCode::kInvalidGraph,
           node_label(node) + " does not accept hyperparameter '" + key + "'");
    }
    if (!std::isfinite(value)) {
      fail(ErrorCode::kInvalidGraph, node_label(node) + " has non-finite '" + key + "'");
    }
    if (key != "epsilon" && value != std::floor(value)) {
      fail(ErrorCode::kInvalidGraph, node_label(node) + " needs an integer '" + key + "'");
    }
  }
  auto at_least = [&](std::string_view key, std::int64_t lo) {
    if (node.hyperparams.count(std::string(key)) && node.hp(key) < lo) {
      fail(ErrorCode::kInvalidGraph, node_label(node) + " has out-of-range '" +
                                         std::string(key) + "'");
    }
  };
  for (auto key : {"kernel_h", "kernel_w", "stride", "out_channels", "groups", "out_features"}) {
    at_least(key, 1);
  }
  at_least("padding", 0);
  at_least("has_bias", 0);
  if (node.hp("has_bias") > 1) fail(ErrorCode::kInvalidGraph, node_label(node) + " has_bias must be 0/1");
  if (node.kind == OpKind::kConcat && node.hp("axis", 1) != 1) {
    fail(ErrorCode::kInvalidGraph, node_label(node) + " only channel-axis concat is supported");
  }
}

TensorShape pool_output(const OpNode& node, const TensorShape& in) {
  const auto kh = node.hp("kernel_h"), kw = node.hp("kernel_w");
  const auto s = node.hp("stride"), p = node.hp("padding");
  const auto h = (in.dims[2] + 2 * p - kh), w = (in.dims[3] + 2 * p - kw);
  if (h < 0 || w < 0) {
    fail(ErrorCode::kShapeMismatch,
         node_label(node) + ": window larger than padded input " + in.str());
  }
  return TensorShape{{in.dims[0], node.kind == OpKind::kConv2d ? node.hp("out_channels") : in.dims[1],
                      h / s + 1, w / s + 1}};
}

TensorShape infer_node(const OpNode& node, const std::vector<TensorShape>& inputs) {
  auto need_rank4 = [&](const TensorShape& s) {
    if (s.rank() != 4) {
      fail(ErrorCode::kShapeMismatch, node_label(node) + " expects an NCHW input, got " + s.str());
    }
  };
  auto unary = [&]() -> const TensorShape& {
    if (inputs.size() != 1) {
      fail(ErrorCode::kShapeMismatch, node_label(node) + " expects exactly one input, got " +
                                          std::to_string(inputs.size()));
    }
    return inputs.front();
  };

  switch (node.kind) {
    case OpKind::kConv2d: {
      const TensorShape& in = unary();
      need_rank4(in);
      const auto groups = node.hp("groups", 1);
      if (in.dims[1] % groups != 0 || node.hp("out_channels") % groups != 0) {
        fail(ErrorCode::kShapeMismatch, node_label(node) + ": groups must divide channels");
      }
      return pool_output(node, in);
    }
    case OpKind::kMaxPool:
    case OpKind::kAvgPool: {
      const TensorShape& in = unary();
      need_rank4(in);
      return pool_output(node, in);
    }
    case OpKind::kGemm: {
      const TensorShape& in = unary();
      if (in.rank() != 2 && in.rank() != 4) {
        fail(ErrorCode::kShapeMismatch, node_label(node) + " expects rank 2 or 4, got " + in.str());
      }
      return TensorShape{{in.dims[0], node.hp("out_features")}};
    }
    case OpKind::kGlobalAvgPool: {
      const TensorShape& in = unary();
      need_rank4(in);
      return TensorShape{{in.dims[0], in.dims[1], 1, 1}};
    }
    case OpKind::kFlatten: {
      const TensorShape& in = unary();
      return TensorShape{{in.dims[0], in.elements() / in.dims[0]}};
    }
    case OpKind::kBatchNorm:
    case OpKind::kReLU:
    case OpKind::kSoftmax:
      return unary();
    case OpKind::kAdd: {
      if (inputs.empty()) fail(ErrorCode::kShapeMismatch, node_label(node) + " has no inputs");
      for (const auto& s : inputs) {
        if (s != inputs.front()) {
          fail(ErrorCode::kShapeMismatch, node_label(node) + ": cannot add " +
                                              inputs.front().str() + " and " + s.str());
        }
      }
      return inputs.front();
    }
    case OpKind::kConcat: {
      if (inputs.empty()) fail(ErrorCode::kShapeMismatch, node_label(node) + " has no inputs");
      TensorShape out = inputs.front();
      for (std::size_t i = 1; i < inputs.size(); ++i) {
        const TensorShape& s = inputs[i];
        bool ok = s.rank() == out.rank() && s.dims[0] == out.dims[0];
        for (std::size_t d = 2; ok && d < s.rank(); ++d) ok = s.dims[d] == out.dims[d];
        if (!ok) {
          fail(ErrorCode::kShapeMismatch, node_label(node) + ": cannot concat " +
                                              inputs.front().str() + " with " + s.str());
        }
        out.dims[1] += s.dims[1];
      }
      return out;
    }
  }
  fail(ErrorCode::kUnsupportedOp, node_label(node));
}

std::vector<std::int64_t> to_dims(const json& j, const char* what) {
  if (!j.is_array()) fail(ErrorCode::kParse, std::string(what) + " must be an array");
  std::vector<std::int64_t> dims;
  for (const auto& d : j) {
    if (!d.is_number_integer()) fail(ErrorCode::kParse, std::string(what) + " must hold integers");
    dims.push_back(d.get<std::int64_t>());
  }
  return dims;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::kConv2d: return "Conv2d";
    case OpKind::kGemm: return "Gemm";
    case OpKind::kBatchNorm: return "BatchNorm";
    case OpKind::kReLU: return "ReLU";
    case OpKind::kMaxPool: return "MaxPool";
    case OpKind::kAvgPool: return "AvgPool";
    case OpKind::kGlobalAvgPool: return "GlobalAvgPool";
    case OpKind::kAdd: return "Add";
    case OpKind::kConcat: return "Concat";
    case OpKind::kFlatten: return "Flatten";
    case OpKind::kSoftmax: return "Softmax";
  }
  return "?";
}

std::optional<OpKind> parse_op_kind(std::string_view name) {
  static const std::map<std::string_view, OpKind> table = {
      {"Conv2d", OpKind::kConv2d},       {"Gemm", OpKind::kGemm},
      {"Linear", OpKind::kGemm},         {"BatchNorm", OpKind::kBatchNorm},
      {"ReLU", OpKind::kReLU},           {"MaxPool", OpKind::kMaxPool},
      {"AvgPool", OpKind::kAvgPool},     {"GlobalAvgPool", OpKind::kGlobalAvgPool},
      {"Add", OpKind::kAdd},             {"Concat", OpKind::kConcat},
      {"Flatten", OpKind::kFlatten},     {"Softmax", OpKind::kSoftmax},
  };
  auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::int64_t TensorShape::elements() const noexcept {
  std::int64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::array<std::int64_t, 4> TensorShape::nchw() const {
  if (dims.size() == 4) return {dims[0], dims[1], dims[2], dims[3]};
  if (dims.size() == 2) return {dims[0], dims[1], 1, 1};
  throw Error(ErrorCode::kShapeMismatch, "unsupported tensor rank " + str());
}

std::string TensorShape::str() const {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

std::int64_t OpNode::hp(std::string_view key, std::int64_t fallback) const {
  auto it = hyperparams.find(std::string(key));
  return it == hyperparams.end() ? fallback : static_cast<std::int64_t>(it->second);
}

std::size_t CompGraph::index_of(std::int64_t id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return i;
  }
  throw Error(ErrorCode::kInvalidGraph, "unknown node id " + std::to_string(id));
}

std::vector<std::size_t> CompGraph::topological_order() const {
  std::map<std::int64_t, std::size_t> pos;
  for (std::size_t i = 0; i < nodes.size(); ++i) pos[nodes[i].id] = i;
  std::vector<std::size_t> indegree(nodes.size(), 0);
  std::vector<std::vector<std::size_t>> out(nodes.size());
  for (const auto& e : edges) {
    const std::size_t s = pos.at(e.source), t = pos.at(e.target);
    out[s].push_back(t);
    ++indegree[t];
  }
  // min-heap on node id
  auto later = [this](std::size_t a, std::size_t b) { return nodes[a].id > nodes[b].id; };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(later)> ready(later);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  order.reserve(nodes.size());
  while (!ready.empty()) {
    const std::size_t n = ready.top();
    ready.pop();
    order.push_back(n);
    for (std::size_t t : out[n]) {
      if (--indegree[t] == 0) ready.push(t);
    }
  }
  if (order.size() != nodes.size()) {
    throw Error(ErrorCode::kCyclicGraph, "graph contains a cycle");
  }
  return order;
}

std::vector<std::size_t> CompGraph::predecessors(std::size_t pos) const {
  std::vector<std::size_t> preds;
  for (const auto& e : edges) {
    if (e.target == nodes[pos].id) preds.push_back(index_of(e.source));
  }
  return preds;
}

std::vector<TensorShape> CompGraph::input_shapes(std::size_t pos) const {
  std::vector<TensorShape> shapes;
  for (const auto& e : edges) {
    if (e.target == nodes[pos].id) shapes.push_back(e.shape);
  }
  if (shapes.empty()) shapes.push_back(input_shape);
  return shapes;
}

std::optional<std::vector<std::int64_t>> expected_weight_shape(const OpNode& node,
                                                               const TensorShape& input) {
  switch (node.kind) {
    case OpKind::kConv2d:
      return std::vector<std::int64_t>{node.hp("out_channels"), input.dims[1] / node.hp("groups", 1),
                                       node.hp("kernel_h"), node.hp("kernel_w")};
    case OpKind::kGemm:
      return std::vector<std::int64_t>{node.hp("out_features"), input.elements() / input.dims[0]};
    case OpKind::kBatchNorm:
      // per-channel scale and shift
      return std::vector<std::int64_t>{2, input.dims[1]};
    default:
      return std::nullopt;
  }
}

std::int64_t weight_elements(const OpNode& node, const TensorShape& output) {
  if (!node.weight_shape) return 0;
  std::int64_t n = 1;
  for (auto d : *node.weight_shape) n *= d;
  if (node.hp("has_bias") == 1) n += output.dims[1];
  return n;
}

CompGraph infer_shapes(CompGraph graph, const TensorShape& input_shape) {
  if (graph.nodes.empty()) throw Error(ErrorCode::kEmptyGraph, "graph must have at least one node");
  if (input_shape.rank() != 4) {
    fail(ErrorCode::kShapeMismatch, "input shape must be rank 4 (NCHW), got " + input_shape.str());
  }
  for (auto d : input_shape.dims) {
    if (d < 1) fail(ErrorCode::kShapeMismatch, "input dims must be positive: " + input_shape.str());
  }
  if (graph.batch_size < 1 || graph.dtype_bytes < 1) {
    fail(ErrorCode::kInvalidGraph, "batch_size and dtype_bytes must be positive");
  }
  if (input_shape.dims[0] != graph.batch_size) {
    fail(ErrorCode::kShapeMismatch, "input batch " + std::to_string(input_shape.dims[0]) +
                                        " disagrees with batch_size " +
                                        std::to_string(graph.batch_size));
  }
  graph.input_shape = input_shape;

  std::set<std::int64_t> ids;
  for (const auto& n : graph.nodes) {
    if (!ids.insert(n.id).second) {
      fail(ErrorCode::kInvalidGraph, "duplicate node id " + std::to_string(n.id));
    }
    validate_hyperparams(n);
  }
  for (const auto& e : graph.edges) {
    if (!ids.count(e.source) || !ids.count(e.target)) {
      fail(ErrorCode::kInvalidGraph, "edge references unknown node " + std::to_string(e.source) +
                                         "->" + std::to_string(e.target));
    }
    if (e.source == e.target) fail(ErrorCode::kCyclicGraph, "self loop on node " + std::to_string(e.source));
  }

  const auto order = graph.topological_order();
  graph.output_shapes.assign(graph.nodes.size(), TensorShape{});
  std::map<std::int64_t, std::size_t> pos;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) pos[graph.nodes[i].id] = i;

  for (std::size_t p : order) {
    OpNode& node = graph.nodes[p];
    std::vector<TensorShape> inputs;
    for (const auto& e : graph.edges) {
      if (e.target == node.id) inputs.push_back(graph.output_shapes[pos.at(e.source)]);
    }
    if (inputs.empty()) inputs.push_back(input_shape);
    TensorShape out = infer_node(node, inputs);
    for (auto d : out.dims) {
      if (d < 1) fail(ErrorCode::kShapeMismatch, node_label(node) + " produced " + out.str());
    }
    auto expected = expected_weight_shape(node, inputs.front());
    if (node.weight_shape && node.weight_shape != expected) {
      fail(ErrorCode::kShapeMismatch, node_label(node) + ": declared weight shape " +
                                          TensorShape{*node.weight_shape}.str() +
                                          " disagrees with inferred " +
                                          (expected ? TensorShape{*expected}.str() : "none"));
    }
    node.weight_shape = expected;
    graph.output_shapes[p] = std::move(out);
  }
  for (auto& e : graph.edges) e.shape = graph.output_shapes[pos.at(e.source)];
  return graph;
}

CompGraph parse_graph_json(const json& doc) {
  if (!doc.is_object()) fail(ErrorCode::kParse, "graph document must be a JSON object");
  CompGraph g;
  try {
    g.batch_size = doc.value("batch_size", std::int64_t{1});
    g.dtype_bytes = doc.value("dtype_bytes", std::int64_t{4});
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("batch_size/dtype_bytes: ") + e.what());
  }
  if (!doc.contains("input_shape")) fail(ErrorCode::kParse, "missing input_shape");
  TensorShape input{to_dims(doc.at("input_shape"), "input_shape")};
  if (!doc.contains("nodes") || !doc.at("nodes").is_array()) fail(ErrorCode::kParse, "missing nodes array");

  for (const auto& jn : doc.at("nodes")) {
    if (!jn.is_object() || !jn.contains("id") || !jn.contains("kind")) {
      fail(ErrorCode::kParse, "every node needs id and kind");
    }
    if (!jn.at("id").is_number_integer() || !jn.at("kind").is_string()) {
      fail(ErrorCode::kParse, "node id must be an integer and kind a string");
    }
    OpNode node;
    node.id = jn.at("id").get<std::int64_t>();
    const auto kind_name = jn.at("kind").get<std::string>();
    auto kind = parse_op_kind(kind_name);
    if (!kind) throw Error(ErrorCode::kUnsupportedOp, "UnsupportedOp(" + kind_name + ")");
    node.kind = *kind;
    if (jn.contains("hyperparams")) {
      const auto& hp = jn.at("hyperparams");
      if (!hp.is_object()) fail(ErrorCode::kParse, "hyperparams must be an object");
      for (auto it = hp.begin(); it != hp.end(); ++it) {
        if (!it.value().is_number()) fail(ErrorCode::kParse, "hyperparam " + it.key() + " must be numeric");
        node.hyperparams[it.key()] = it.value().get<double>();
      }
    }
    if (jn.contains("weight_shape") && !jn.at("weight_shape").is_null()) {
      node.weight_shape = to_dims(jn.at("weight_shape"), "weight_shape");
    }
    g.nodes.push_back(std::move(node));
  }
  if (doc.contains("edges")) {
    if (!doc.at("edges").is_array()) fail(ErrorCode::kParse, "edges must be an array");
    for (const auto& je : doc.at("edges")) {
      auto pair = to_dims(je, "edge");
      if (pair.size() != 2) fail(ErrorCode::kParse, "edges are [source, target] pairs");
      g.edges.push_back(Edge{pair[0], pair[1], {}});
    }
  }
  return infer_shapes(std::move(g), input);
}

json graph_to_json(const CompGraph& graph) {
  json doc;
  doc["batch_size"] = graph.batch_size;
  doc["dtype_bytes"] = graph.dtype_bytes;
  doc["input_shape"] = graph.input_shape.dims;
  json nodes = json::array();
  for (const auto& n : graph.nodes) {
    json jn;
    jn["id"] = n.id;
    jn["kind"] = std::string(to_string(n.kind));
    json hp = json::object();
    for (const auto& [k, v] : n.hyperparams) {
      if (v == std::floor(v) && std::abs(v) < 9e15) {
        hp[k] = static_cast<std::int64_t>(v);
      } else {
        hp[k] = v;
      }
    }
    jn["hyperparams"] = hp;
    if (n.weight_shape) jn["weight_shape"] = *n.weight_shape;
    nodes.push_back(std::move(jn));
  }
  doc["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const auto& e : graph.edges) edges.push_back({e.source, e.target});
  doc["edges"] = std::move(edges);
  return doc;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

CompGraph load_graph(const std::filesystem::path& path, GraphFormat format) {
  if (format == GraphFormat::kOnnx) return import_onnx(path);
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return parse_graph_json(doc);
}

void save_graph(const CompGraph& graph, const std::filesystem::path& path) {
  write_file(path, graph_to_json(graph).dump(1) + "\n");
}

}  // namespace perfseer
