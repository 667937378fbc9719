// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace perfseer {

enum class OpKind {
  kConv2d,
  kGemm,
  kBatchNorm,
  kReLU,
  kMaxPool,
  kAvgPool,
  kGlobalAvgPool,
  kAdd,
  kConcat,
  kFlatten,
  kSoftmax,
};

std::string_view to_string(OpKind kind);
// Accepts the canonical names plus "Linear" as an alias of Gemm.
std::optional<OpKind> parse_op_kind(std::string_view name);

struct TensorShape {
  std::vector<std::int64_t> dims;

  std::size_t rank() const noexcept { return dims.size(); }
  std::int64_t elements() const noexcept;
  // Rank-2 (N, F) shapes are reported as (N, F, 1, 1).
  std::array<std::int64_t, 4> nchw() const;
  std::string str() const;

  bool operator==(const TensorShape&) const = default;
};

struct OpNode {
  std::int64_t id = 0;
  OpKind kind = OpKind::kReLU;
  std::map<std::string, double> hyperparams;
  std::optional<std::vector<std::int64_t>> weight_shape;

  // Integer hyperparameter, or fallback when absent.
  std::int64_t hp(std::string_view key, std::int64_t fallback = 0) const;

  bool operator==(const OpNode&) const = default;
};

struct Edge {
  std::int64_t source = 0;
  std::int64_t target = 0;
  TensorShape shape;

  bool operator==(const Edge&) const = default;
};

/// Shape-annotated operator DAG.
///
/// Nodes keep their authored order; `output_shapes` is aligned with `nodes`.
/// Nodes without incoming edges consume the graph input tensor.
struct CompGraph {
  std::vector<OpNode> nodes;
  std::vector<Edge> edges;
  std::int64_t batch_size = 1;
  std::int64_t dtype_bytes = 4;
  TensorShape input_shape;
  std::vector<TensorShape> output_shapes;

  std::size_t index_of(std::int64_t id) const;
  // Node positions in dependency order; ties broken by smallest id.
  std::vector<std::size_t> topological_order() const;
  // Input tensor shapes of the node at `pos`, in edge-list order.
  std::vector<TensorShape> input_shapes(std::size_t pos) const;
  // Positions of the direct predecessors of `pos`, in edge-list order.
  std::vector<std::size_t> predecessors(std::size_t pos) const;

  bool operator==(const CompGraph&) const = default;
};

// Weight tensor implied by a node's hyperparameters and its first input.
std::optional<std::vector<std::int64_t>> expected_weight_shape(const OpNode& node,
                                                               const TensorShape& input);
// Learnable element count: kernel elements plus the bias when has_bias=1.
std::int64_t weight_elements(const OpNode& node, const TensorShape& output);

// Validates topology and hyperparameters and annotates every edge and node
// with its inferred output shape. `input_shape` must be rank 4.
CompGraph infer_shapes(CompGraph graph, const TensorShape& input_shape);

CompGraph parse_graph_json(const nlohmann::json& doc);
nlohmann::json graph_to_json(const CompGraph& graph);

enum class GraphFormat { kJson, kOnnx };

CompGraph load_graph(const std::filesystem::path& path, GraphFormat format = GraphFormat::kJson);
void save_graph(const CompGraph& graph, const std::filesystem::path& path);

// Reads a whole file; throws Error(kIo) when it cannot be opened.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace perfseer
