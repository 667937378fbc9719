// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "perfseer/featurize.hpp"
#include "perfseer/mlp.hpp"
#include "perfseer/tape.hpp"

namespace perfseer {

struct SeerNetConfig {
  std::size_t node_width = kNodeWidth;
  std::size_t edge_width = kEdgeWidth;
  std::size_t global_width = kGlobalWidth;
  std::size_t hidden = 256;
  std::size_t head_hidden = 256;
  std::size_t num_heads = 1;
  // false: plain mean pooling of nodes into the global update.
  bool use_synmm = true;
  // false: no global node; node and global updates drop the z terms.
  bool use_gnpb = true;

  bool operator==(const SeerNetConfig&) const = default;
};

nlohmann::json to_json(const SeerNetConfig& config);
SeerNetConfig seernet_config_from_json(const nlohmann::json& doc);

/// Graph-network performance predictor: raw-feature encoders, one SeerBlock
/// (edge update, edge->node mean, node update with the global node, softmax
/// global-node refresh, max/mean node pooling, global update) and one
/// two-layer head per predicted metric.
class SeerNet {
 public:
  struct Encoded {
    nk::Var nodes;
    nk::Var edges;
    nk::Var global;
    std::optional<nk::Var> global_node;
  };

  struct Outputs {
    Encoded encoded;
    nk::Var edge_updates;
    nk::Var aggregated;
    nk::Var nodes;
    std::optional<nk::Var> global_node;
    nk::Var pooled;
    nk::Var embedding;
    std::vector<nk::Var> heads;
  };

  SeerNet(SeerNetConfig config, std::uint64_t seed);

  const SeerNetConfig& config() const noexcept { return config_; }
  nk::ParameterSet& params() noexcept { return params_; }
  const nk::ParameterSet& params() const noexcept { return params_; }

  // Parameters outside every prediction head.
  bool is_shared(nk::ParamId id) const;

  Encoded encode(nk::Tape& t, const GraphTensors& g) const;
  nk::Var edge_update(nk::Tape& t, nk::Var edges, nk::Var nodes,
                      const std::vector<std::size_t>& source,
                      const std::vector<std::size_t>& target) const;
  nk::Var edge_to_node_aggregate(nk::Tape& t, nk::Var edge_updates,
                                 const std::vector<std::size_t>& target,
                                 std::size_t num_nodes) const;
  nk::Var node_update(nk::Tape& t, nk::Var aggregated, nk::Var nodes,
                      std::optional<nk::Var> global_node, nk::Var global) const;
  nk::Var global_node_update(nk::Tape& t, nk::Var updated_nodes, nk::Var global_node) const;
  nk::Var synmm(nk::Tape& t, nk::Var updated_nodes) const;
  nk::Var global_update(nk::Tape& t, nk::Var pooled, std::optional<nk::Var> global_node,
                        nk::Var global) const;
  nk::Var head(nk::Tape& t, nk::Var embedding, std::size_t index) const;

  Outputs forward(nk::Tape& t, const GraphTensors& g) const;

  // Normalized-space prediction of one head.
  double predict(const GraphTensors& g, std::size_t head_index) const;
  std::vector<double> predict_all(const GraphTensors& g) const;

 private:
  SeerNetConfig config_;
  nk::ParameterSet params_;
  nk::MlpLayer enc_v_, enc_e_, enc_u_;
  nk::MlpLayer mlp_e_, mlp_v_, mlp_u_;
  nk::Mlp mlp_z_;
  nk::MlpLayer blend_;
  std::vector<nk::Mlp> heads_;
  std::size_t first_head_param_ = 0;
};

}  // namespace perfseer
