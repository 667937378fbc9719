// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include "perfseer/seernet.hpp"

#include <string>

#include "perfseer/error.hpp"
#include "perfseer/rng.hpp"

namespace perfseer {

using nk::Activation;
using nk::Tape;
using nk::Var;

nlohmann::json to_json(const SeerNetConfig& c) {
  return {{"node_width", c.node_width}, {"edge_width", c.edge_width},
          {"global_width", c.global_width}, {"hidden", c.hidden},
          {"head_hidden", c.head_hidden}, {"num_heads", c.num_heads},
          {"use_synmm", c.use_synmm}, {"use_gnpb", c.use_gnpb}};
}

SeerNetConfig seernet_config_from_json(const nlohmann::json& doc) {
  SeerNetConfig c;
  try {
    c.node_width = doc.at("node_width").get<std::size_t>();
    c.edge_width = doc.at("edge_width").get<std::size_t>();
    c.global_width = doc.at("global_width").get<std::size_t>();
    c.hidden = doc.at("hidden").get<std::size_t>();
    c.head_hidden = doc.at("head_hidden").get<std::size_t>();
    c.num_heads = doc.at("num_heads").get<std::size_t>();
    c.use_synmm = doc.at("use_synmm").get<bool>();
    c.use_gnpb = doc.at("use_gnpb").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("model config: ") + e.what());
  }
  return c;
}

SeerNet::SeerNet(SeerNetConfig config, std::uint64_t seed) : config_(config) {
  if (config_.hidden == 0 || config_.head_hidden == 0 || config_.num_heads == 0) {
    throw Error(ErrorCode::kWidthMismatch, "hidden widths and head count must be positive");
  }
  Rng rng(seed);
  const std::size_t h = config_.hidden;
  enc_v_ = nk::add_layer(params_, "enc_v", config_.node_width, h, Activation::kNone, rng);
  enc_e_ = nk::add_layer(params_, "enc_e", config_.edge_width, h, Activation::kNone, rng);
  enc_u_ = nk::add_layer(params_, "enc_u", config_.global_width, h, Activation::kNone, rng);
  mlp_e_ = nk::add_layer(params_, "mlp_e", 3 * h, h, Activation::kRelu, rng);
  mlp_v_ = nk::add_layer(params_, "mlp_v", 3 * h, h, Activation::kRelu, rng);
  if (config_.use_gnpb) {
    mlp_z_.push_back(nk::add_layer(params_, "mlp_z.0", h, h, Activation::kRelu, rng));
    mlp_z_.push_back(nk::add_layer(params_, "mlp_z.1", h, h, Activation::kNone, rng));
  }
  if (config_.use_synmm) {
    blend_ = nk::add_layer(params_, "synmm_blend", 2 * h, h, Activation::kNone, rng);
  }
  mlp_u_ = nk::add_layer(params_, "mlp_u", (config_.use_gnpb ? 3 : 2) * h, h, Activation::kRelu, rng);
  first_head_param_ = params_.size();
  for (std::size_t i = 0; i < config_.num_heads; ++i) {
    const std::string prefix = "head" + std::to_string(i);
    nk::Mlp head;
    head.push_back(nk::add_layer(params_, prefix + ".0", h, config_.head_hidden, Activation::kRelu, rng));
    head.push_back(nk::add_layer(params_, prefix + ".1", config_.head_hidden, 1, Activation::kNone, rng));
    heads_.push_back(std::move(head));
  }
}

bool SeerNet::is_shared(nk::ParamId id) const { return id < first_head_param_; }

SeerNet::Encoded SeerNet::encode(Tape& t, const GraphTensors& g) const {
  if (g.nodes.cols() != config_.node_width || g.edges.cols() != config_.edge_width ||
      g.global.cols() != config_.global_width || g.global.rows() != 1) {
    throw Error(ErrorCode::kWidthMismatch,
                "feature widths (" + std::to_string(g.nodes.cols()) + ", " +
                    std::to_string(g.edges.cols()) + ", " + std::to_string(g.global.cols()) +
                    ") do not match the model");
  }
  if (g.nodes.rows() == 0) throw Error(ErrorCode::kEmptyGraph, "graph has no nodes");
  if (g.source.size() != g.edges.rows() || g.target.size() != g.edges.rows()) {
    throw Error(ErrorCode::kInvalidGraph, "edge topology does not match edge features");
  }
  Encoded e;
  e.nodes = nk::layer_forward(t, enc_v_, t.constant(g.nodes));
  e.edges = nk::layer_forward(t, enc_e_, t.constant(g.edges));
  e.global = nk::layer_forward(t, enc_u_, t.constant(g.global));
  if (config_.use_gnpb) e.global_node = nk::softmax_pool_rows(t, e.nodes);
  return e;
}

Var SeerNet::edge_update(Tape& t, Var edges, Var nodes, const std::vector<std::size_t>& source,
                         const std::vector<std::size_t>& target) const {
  const Var parts[] = {edges, nk::gather_rows(t, nodes, source), nk::gather_rows(t, nodes, target)};
  return nk::layer_forward(t, mlp_e_, nk::concat_cols(t, parts));
}

Var SeerNet::edge_to_node_aggregate(Tape& t, Var edge_updates,
                                    const std::vector<std::size_t>& target,
                                    std::size_t num_nodes) const {
  return nk::scatter_mean_rows(t, edge_updates, target, num_nodes);
}

Var SeerNet::node_update(Tape& t, Var aggregated, Var nodes, std::optional<Var> global_node,
                         Var global) const {
  const std::size_t n = t.value(nodes).rows();
  const Var self = global_node ? nk::add_row(t, nodes, *global_node) : nodes;
  const Var parts[] = {aggregated, self, nk::broadcast_rows(t, global, n)};
  return nk::layer_forward(t, mlp_v_, nk::concat_cols(t, parts));
}

Var SeerNet::global_node_update(Tape& t, Var updated_nodes, Var global_node) const {
  const Var pooled = nk::softmax_pool_rows(t, updated_nodes);
  return nk::mlp_forward(t, mlp_z_, nk::add(t, pooled, global_node));
}

Var SeerNet::synmm(Tape& t, Var updated_nodes) const {
  if (!config_.use_synmm) return nk::mean_rows(t, updated_nodes);
  const Var parts[] = {nk::max_rows(t, updated_nodes), nk::mean_rows(t, updated_nodes)};
  return nk::layer_forward(t, blend_, nk::concat_cols(t, parts));
}

Var SeerNet::global_update(Tape& t, Var pooled, std::optional<Var> global_node, Var global) const {
  if (global_node) {
    const Var parts[] = {pooled, *global_node, global};
    return nk::layer_forward(t, mlp_u_, nk::concat_cols(t, parts));
  }
  const Var parts[] = {pooled, global};
  return nk::layer_forward(t, mlp_u_, nk::concat_cols(t, parts));
}

Var SeerNet::head(Tape& t, Var embedding, std::size_t index) const {
  if (index >= heads_.size()) {
    throw Error(ErrorCode::kWidthMismatch, "head index " + std::to_string(index) + " out of range");
  }
  return nk::mlp_forward(t, heads_[index], embedding);
}

SeerNet::Outputs SeerNet::forward(Tape& t, const GraphTensors& g) const {
  Outputs out;
  out.encoded = encode(t, g);
  const std::size_t n = g.nodes.rows();
  out.edge_updates = edge_update(t, out.encoded.edges, out.encoded.nodes, g.source, g.target);
  out.aggregated = edge_to_node_aggregate(t, out.edge_updates, g.target, n);
  out.nodes = node_update(t, out.aggregated, out.encoded.nodes, out.encoded.global_node,
                          out.encoded.global);
  if (out.encoded.global_node) {
    out.global_node = global_node_update(t, out.nodes, *out.encoded.global_node);
  }
  out.pooled = synmm(t, out.nodes);
  out.embedding = global_update(t, out.pooled, out.global_node, out.encoded.global);
  for (std::size_t i = 0; i < heads_.size(); ++i) out.heads.push_back(head(t, out.embedding, i));
  return out;
}

double SeerNet::predict(const GraphTensors& g, std::size_t head_index) const {
  if (head_index >= heads_.size()) {
    throw Error(ErrorCode::kWidthMismatch, "head index " + std::to_string(head_index) + " out of range");
  }
  return predict_all(g)[head_index];
}

std::vector<double> SeerNet::predict_all(const GraphTensors& g) const {
  Tape t(params_);
  const Outputs out = forward(t, g);
  std::vector<double> values;
  for (Var h : out.heads) values.push_back(t.value(h)(0, 0));
  return values;
}

}  // namespace perfseer
