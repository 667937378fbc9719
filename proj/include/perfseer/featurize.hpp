// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "perfseer/graph_ir.hpp"
#include "perfseer/tensor.hpp"

namespace perfseer {

enum class Phase { kInfer = 0, kTrain = 1 };

std::string_view to_string(Phase phase);
std::optional<Phase> parse_phase(std::string_view name);

// Hyper-parameter slot layout, zero-filled where a kind has no such value.
enum HpSlot : std::size_t {
  kHpKernelH,
  kHpKernelW,
  kHpStride,
  kHpPadding,
  kHpGroups,
  kHpInChannels,
  kHpOutChannels,
  kHpHasBias,
  kHpPoolFlag,  // 1 max, 2 average, 3 global average
  kHpGemmIn,
  kHpGemmOut,
  kHpUnused,
  kHpSlotCount,
};

struct NodeFeatures {
  std::array<double, kHpSlotCount> hp{};
  std::int64_t flops = 0;
  std::int64_t mac_bytes = 0;
  std::int64_t weight_bytes = 0;
  double arith_intensity = 0.0;
  double prop_flops = 0.0;
  double prop_mac = 0.0;
  double prop_weight = 0.0;

  bool operator==(const NodeFeatures&) const = default;
};

struct EdgeFeatures {
  std::int64_t size = 0;
  std::array<std::int64_t, 4> shape{};  // N, C, H, W

  bool operator==(const EdgeFeatures&) const = default;
};

struct PerfEdge {
  EdgeFeatures features;
  std::size_t source = 0;
  std::size_t target = 0;

  bool operator==(const PerfEdge&) const = default;
};

struct SummaryStats {
  std::int64_t total = 0;
  double mean = 0.0;
  double median = 0.0;
  std::int64_t max = 0;

  bool operator==(const SummaryStats&) const = default;
};

struct GlobalFeatures {
  std::int64_t num_nodes = 0;
  std::int64_t num_edges = 0;
  double density = 0.0;
  SummaryStats flops;
  SummaryStats mac;
  SummaryStats weight;
  double mean_edge_size = 0.0;
  double arith_intensity = 0.0;
  std::int64_t batch_size = 0;
  Phase phase = Phase::kInfer;

  bool operator==(const GlobalFeatures&) const = default;
};

/// Global, node, and edge features over the operator topology. Node i is the
/// i-th node in ascending id order; `node_ids` keeps the original ids.
struct PerfGraph {
  GlobalFeatures u;
  std::vector<NodeFeatures> nodes;
  std::vector<PerfEdge> edges;
  std::vector<std::int64_t> node_ids;

  bool operator==(const PerfGraph&) const = default;
};

std::int64_t op_flops(const OpNode& node, std::span<const TensorShape> in_shapes,
                      const TensorShape& out_shape);
std::int64_t op_mac_bytes(const OpNode& node, std::span<const TensorShape> in_shapes,
                          const TensorShape& out_shape, std::int64_t dtype_bytes);
std::array<double, kHpSlotCount> encode_hyperparams(const OpNode& node,
                                                    std::span<const TensorShape> in_shapes,
                                                    const TensorShape& out_shape);

PerfGraph build_perfgraph(const CompGraph& graph, Phase phase);

nlohmann::json perfgraph_to_json(const PerfGraph& pg);
PerfGraph perfgraph_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Flattened views and normalization

inline constexpr std::size_t kNodeWidth = kHpSlotCount + 7;
inline constexpr std::size_t kEdgeWidth = 5;
inline constexpr std::size_t kGlobalWidth = 19;

enum class ScaleKind { kLog, kLinear };

const std::vector<std::string>& node_feature_names();
const std::vector<std::string>& edge_feature_names();
const std::vector<std::string>& global_feature_names();

std::vector<double> node_vector(const NodeFeatures& f);
std::vector<double> edge_vector(const EdgeFeatures& f);
std::vector<double> global_vector(const GlobalFeatures& f);

// Dense matrices ready for the model: one row per node / edge, one global row.
struct GraphTensors {
  nk::Tensor2D nodes;
  nk::Tensor2D edges;
  nk::Tensor2D global;
  std::vector<std::size_t> source;
  std::vector<std::size_t> target;
};

GraphTensors raw_tensors(const PerfGraph& pg);

/// Per-column affine scaling. Magnitude columns (FLOPs, bytes, sizes, counts)
/// go through log1p first; bounded columns are used as-is.
struct ColumnScaler {
  std::vector<ScaleKind> kinds;
  std::vector<double> shift;
  std::vector<double> scale;

  // Two-pass mean/std over the rows; constant columns get scale 1.
  static ColumnScaler fit(const nk::Tensor2D& rows, std::vector<ScaleKind> kinds);
  static ColumnScaler identity(std::vector<ScaleKind> kinds);
  nk::Tensor2D transform(const nk::Tensor2D& rows) const;

  bool operator==(const ColumnScaler&) const = default;
};

struct FeatureNorm {
  ColumnScaler node;
  ColumnScaler edge;
  ColumnScaler global;
  bool fitted = false;

  bool operator==(const FeatureNorm&) const = default;
};

const std::vector<ScaleKind>& node_scale_kinds();
const std::vector<ScaleKind>& edge_scale_kinds();
const std::vector<ScaleKind>& global_scale_kinds();

FeatureNorm fit_feature_norm(std::span<const PerfGraph* const> training_graphs);
GraphTensors normalize(const PerfGraph& pg, const FeatureNorm& norm);

nlohmann::json feature_norm_to_json(const FeatureNorm& norm);
FeatureNorm feature_norm_from_json(const nlohmann::json& doc);

}  // namespace perfseer
