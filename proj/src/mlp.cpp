// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include "perfseer/mlp.hpp"

#include <cmath>

#include "perfseer/error.hpp"

namespace perfseer::nk {

MlpLayer add_layer(ParameterSet& params, const std::string& prefix, std::size_t in,
                   std::size_t out, Activation activation, Rng& rng) {
  const double fan_in = static_cast<double>(in);
  const double fan_out = static_cast<double>(out);
  const double limit = activation == Activation::kRelu ? std::sqrt(6.0 / fan_in)
                                                       : std::sqrt(6.0 / (fan_in + fan_out));
  Tensor2D w(out, in);
  for (double& v : w.data()) v = rng.uniform(-limit, limit);
  MlpLayer layer;
  layer.weight = params.add(prefix + ".weight", std::move(w));
  layer.bias = params.add(prefix + ".bias", Tensor2D(1, out));
  layer.activation = activation;
  return layer;
}

std::size_t layer_in(const ParameterSet& params, const MlpLayer& layer) {
  return params.value(layer.weight).cols();
}

std::size_t layer_out(const ParameterSet& params, const MlpLayer& layer) {
  return params.value(layer.weight).rows();
}

Var layer_forward(Tape& t, const MlpLayer& layer, Var x) {
  Var y = linear(t, x, t.param(layer.weight), t.param(layer.bias));
  return layer.activation == Activation::kRelu ? relu(t, y) : y;
}

Var mlp_forward(Tape& t, std::span<const MlpLayer> layers, Var x) {
  if (layers.empty()) throw Error(ErrorCode::kShapeMismatch, "mlp_forward: no layers");
  for (const MlpLayer& layer : layers) x = layer_forward(t, layer, x);
  return x;
}

}  // namespace perfseer::nk
