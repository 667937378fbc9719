// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "perfseer/tensor.hpp"

namespace perfseer::nk {

using ParamId = std::size_t;

// One gradient tensor per parameter, aligned with ParameterSet ids.
using Gradients = std::vector<Tensor2D>;

/// Named, ordered collection of learnable tensors.
///
/// Every mutable access bumps a version counter; a Tape remembers the version
/// it was recorded against and refuses to run backward once it is stale.
class ParameterSet {
 public:
  ParamId add(std::string name, Tensor2D init);

  std::size_t size() const noexcept { return values_.size(); }
  const std::string& name(ParamId id) const { return names_.at(id); }
  const Tensor2D& value(ParamId id) const { return values_.at(id); }
  Tensor2D& mutable_value(ParamId id);

  std::optional<ParamId> find(std::string_view name) const;
  ParamId at(std::string_view name) const;

  std::uint64_t version() const noexcept { return version_; }
  void touch() noexcept { ++version_; }

  std::size_t num_scalars() const;
  Gradients zeros_like() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor2D> values_;
  std::uint64_t version_ = 0;
};

struct Var {
  std::size_t index = 0;
};

/// Reverse-mode tape over matrix-valued operations.
///
/// Forward ops append entries; backward walks the entries in exact reverse
/// order of recording. Backward may be called several times on one tape
/// (each call starts from cleared gradients), which is how per-task
/// gradients are obtained from a single forward pass.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(const ParameterSet& params) : params_(&params), version_(params.version()) {}

  // Leaf that never receives a gradient.
  Var constant(Tensor2D value);
  // Leaf whose gradient is kept and readable through grad() after backward.
  Var input(Tensor2D value);
  Var param(ParamId id);

  const Tensor2D& value(Var v) const {
    const Entry& e = entries_.at(v.index);
    return e.external ? *e.external : e.value;
  }
  bool requires_grad(Var v) const { return entries_.at(v.index).requires_grad; }
  std::size_t size() const noexcept { return entries_.size(); }

  // Seeds d(output) = upstream and propagates. Parameter gradients are added
  // into param_grads (one tensor per parameter id).
  void backward(Var output, const Tensor2D& upstream, Gradients& param_grads);

  // Gradient of the last backward() with respect to v; zero tensor if none
  // flowed there.
  Tensor2D grad(Var v) const;

  // For op implementations.
  Var record(Tensor2D value, std::span<const Var> inputs, BackwardFn backward);
  const Tensor2D& grad_of(std::size_t index) const { return entries_[index].grad; }
  // Gradient accumulator of an input; nullptr when that input needs none.
  Tensor2D* grad_sink(Var v);

 private:
  struct Entry {
    Tensor2D value;
    // Parameter leaves alias the ParameterSet storage instead of copying it.
    const Tensor2D* external = nullptr;
    Tensor2D grad;
    BackwardFn backward;
    std::optional<ParamId> param;
    bool requires_grad = false;
  };

  const ParameterSet* params_;
  std::uint64_t version_;
  std::vector<Entry> entries_;
};

// y = x * W^T + b with x: n x in, W: out x in, b: 1 x out.
Var linear(Tape& t, Var x, Var weight, Var bias);
Var relu(Tape& t, Var x);
Var add(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
// x: n x d plus a 1 x d row broadcast to every row.
Var add_row(Tape& t, Var x, Var row);
Var concat_cols(Tape& t, std::span<const Var> parts);
Var broadcast_rows(Tape& t, Var row, std::size_t n);
Var gather_rows(Tape& t, Var x, std::vector<std::size_t> index);
// Row r of the result is the mean of the rows of x whose target is r; zero
// when no row targets r.
Var scatter_mean_rows(Tape& t, Var x, std::vector<std::size_t> target, std::size_t n_out);
Var mean_rows(Tape& t, Var x);
Var max_rows(Tape& t, Var x);
// Per column: softmax weights over rows computed from the values themselves,
// then the weighted sum. Result is 1 x d.
Var softmax_pool_rows(Tape& t, Var x);
// Mean squared error between same-shaped tensors; 1 x 1.
Var mse_loss(Tape& t, Var prediction, Var target);

}  // namespace perfseer::nk
