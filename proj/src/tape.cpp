// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include "perfseer/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "perfseer/error.hpp"

namespace perfseer::nk {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += alpha * x[k];
}

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": " + detail);
}

std::string dims(const Tensor2D& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterSet

ParamId ParameterSet::add(std::string name, Tensor2D init) {
  if (find(name)) throw Error(ErrorCode::kInvalidGraph, "duplicate parameter name " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  ++version_;
  return values_.size() - 1;
}

Tensor2D& ParameterSet::mutable_value(ParamId id) {
  ++version_;
  return values_.at(id);
}

std::optional<ParamId> ParameterSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

ParamId ParameterSet::at(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw Error(ErrorCode::kWidthMismatch, "unknown parameter " + std::string(name));
}

std::size_t ParameterSet::num_scalars() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

Gradients ParameterSet::zeros_like() const {
  Gradients out;
  out.reserve(values_.size());
  for (const auto& v : values_) out.emplace_back(v.rows(), v.cols());
  return out;
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor2D value) { return record(std::move(value), {}, nullptr); }

Var Tape::input(Tensor2D value) {
  Var v = record(std::move(value), {}, nullptr);
  entries_.back().requires_grad = true;
  return v;
}

Var Tape::param(ParamId id) {
  Entry e;
  e.external = &params_->value(id);
  e.requires_grad = true;
  e.param = id;
  entries_.push_back(std::move(e));
  return Var{entries_.size() - 1};
}

Var Tape::record(Tensor2D value, std::span<const Var> inputs, BackwardFn backward) {
  if (!value.all_finite()) {
    throw Error(ErrorCode::kNonFinite,
                "non-finite value produced at tape entry " + std::to_string(entries_.size()));
  }
  Entry e;
  e.value = std::move(value);
  e.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [this](Var v) { return entries_.at(v.index).requires_grad; });
  if (e.requires_grad) e.backward = std::move(backward);
  entries_.push_back(std::move(e));
  return Var{entries_.size() - 1};
}

Tensor2D* Tape::grad_sink(Var v) {
  Entry& e = entries_[v.index];
  if (!e.requires_grad) return nullptr;
  const Tensor2D& val = e.external ? *e.external : e.value;
  if (e.grad.empty()) e.grad = Tensor2D(val.rows(), val.cols());
  return &e.grad;
}

void Tape::backward(Var output, const Tensor2D& upstream, Gradients& param_grads) {
  if (params_->version() != version_) {
    throw Error(ErrorCode::kStaleTape, "parameters changed after this tape was recorded");
  }
  if (output.index >= entries_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "backward: output not on this tape");
  }
  require(upstream.same_shape(value(output)), "backward",
          "upstream " + dims(upstream) + " vs output " + dims(value(output)));
  if (param_grads.size() != params_->size()) {
    throw Error(ErrorCode::kLengthMismatch, "backward: gradient buffer count mismatch");
  }
  for (auto& e : entries_) e.grad = Tensor2D();
  if (!entries_[output.index].requires_grad) return;
  entries_[output.index].grad = upstream;

  for (std::size_t i = output.index + 1; i-- > 0;) {
    Entry& e = entries_[i];
    if (e.grad.empty()) continue;
    if (e.backward) e.backward(*this, i);
  }
  for (auto& e : entries_) {
    if (!e.param || e.grad.empty()) continue;
    Tensor2D& dst = param_grads[*e.param];
    require(dst.same_shape(e.grad), "backward", "parameter gradient buffer shape");
    auto d = dst.data();
    auto g = e.grad.data();
    for (std::size_t k = 0; k < d.size(); ++k) d[k] += g[k];
  }
}

Tensor2D Tape::grad(Var v) const {
  const Entry& e = entries_.at(v.index);
  if (e.grad.empty()) return Tensor2D(value(v).rows(), value(v).cols());
  return e.grad;
}

// ---------------------------------------------------------------------------
// Ops

Var linear(Tape& t, Var x, Var weight, Var bias) {
  const Tensor2D& xv = t.value(x);
  const Tensor2D& w = t.value(weight);
  const Tensor2D& b = t.value(bias);
  require(xv.cols() == w.cols(), "linear", "input " + dims(xv) + " vs weight " + dims(w));
  require(b.rows() == 1 && b.cols() == w.rows(), "linear", "bias " + dims(b));
  const std::size_t n = xv.rows(), in = w.cols(), out = w.rows();
  Tensor2D y(n, out);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = xv.row(i).data();
    double* yi = y.row(i).data();
    for (std::size_t o = 0; o < out; ++o) yi[o] = b(0, o) + dot(xi, w.row(o).data(), in);
  }
  const Var inputs[] = {x, weight, bias};
  return t.record(std::move(y), inputs, [x, weight, bias, n, in, out](Tape& tp, std::size_t self) {
    const Tensor2D& gy = tp.grad_of(self);
    const Tensor2D& xv = tp.value(x);
    const Tensor2D& w = tp.value(weight);
    if (Tensor2D* gx = tp.grad_sink(x)) {
      for (std::size_t i = 0; i < n; ++i) {
        double* gxi = gx->row(i).data();
        for (std::size_t o = 0; o < out; ++o) {
          const double g = gy(i, o);
          if (g != 0.0) axpy(g, w.row(o).data(), gxi, in);
        }
      }
    }
    if (Tensor2D* gw = tp.grad_sink(weight)) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* xi = xv.row(i).data();
        for (std::size_t o = 0; o < out; ++o) {
          const double g = gy(i, o);
          if (g != 0.0) axpy(g, xi, gw->row(o).data(), in);
        }
      }
    }
    if (Tensor2D* gb = tp.grad_sink(bias)) {
      for (std::size_t i = 0; i < n; ++i) axpy(1.0, gy.row(i).data(), gb->row(0).data(), out);
    }
  });
}

Var relu(Tape& t, Var x) {
  Tensor2D y = t.value(x);
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  const Var inputs[] = {x};
  return t.record(std::move(y), inputs, [x](Tape& tp, std::size_t self) {
    Tensor2D* gx = tp.grad_sink(x);
    const auto gy = tp.grad_of(self).data();
    const auto xv = tp.value(x).data();
    auto g = gx->data();
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (xv[k] > 0.0) g[k] += gy[k];
    }
  });
}

Var add(Tape& t, Var a, Var b) {
  require(t.value(a).same_shape(t.value(b)), "add",
          dims(t.value(a)) + " vs " + dims(t.value(b)));
  Tensor2D y = t.value(a);
  auto yd = y.data();
  auto bd = t.value(b).data();
  for (std::size_t k = 0; k < yd.size(); ++k) yd[k] += bd[k];
  const Var inputs[] = {a, b};
  return t.record(std::move(y), inputs, [a, b](Tape& tp, std::size_t self) {
    const auto gy = tp.grad_of(self).data();
    for (Var v : {a, b}) {
      if (Tensor2D* g = tp.grad_sink(v)) {
        auto gd = g->data();
        for (std::size_t k = 0; k < gd.size(); ++k) gd[k] += gy[k];
      }
    }
  });
}

Var mul(Tape& t, Var a, Var b) {
  require(t.value(a).same_shape(t.value(b)), "mul",
          dims(t.value(a)) + " vs " + dims(t.value(b)));
  Tensor2D y = t.value(a);
  auto yd = y.data();
  auto bd = t.value(b).data();
  for (std::size_t k = 0; k < yd.size(); ++k) yd[k] *= bd[k];
  const Var inputs[] = {a, b};
  return t.record(std::move(y), inputs, [a, b](Tape& tp, std::size_t self) {
    const auto gy = tp.grad_of(self).data();
    const auto av = tp.value(a).data();
    const auto bv = tp.value(b).data();
    if (Tensor2D* g = tp.grad_sink(a)) {
      auto gd = g->data();
      for (std::size_t k = 0; k < gd.size(); ++k) gd[k] += gy[k] * bv[k];
    }
    if (Tensor2D* g = tp.grad_sink(b)) {
      auto gd = g->data();
      for (std::size_t k = 0; k < gd.size(); ++k) gd[k] += gy[k] * av[k];
    }
  });
}

Var add_row(Tape& t, Var x, Var row) {
  const Tensor2D& r = t.value(row);
  require(r.rows() == 1 && r.cols() == t.value(x).cols(), "add_row",
          dims(t.value(x)) + " + " + dims(r));
  Tensor2D y = t.value(x);
  for (std::size_t i = 0; i < y.rows(); ++i) axpy(1.0, r.row(0).data(), y.row(i).data(), y.cols());
  const Var inputs[] = {x, row};
  return t.record(std::move(y), inputs, [x, row](Tape& tp, std::size_t self) {
    const Tensor2D& gy = tp.grad_of(self);
    if (Tensor2D* gx = tp.grad_sink(x)) {
      auto gd = gx->data();
      auto gyd = gy.data();
      for (std::size_t k = 0; k < gd.size(); ++k) gd[k] += gyd[k];
    }
    if (Tensor2D* gr = tp.grad_sink(row)) {
      for (std::size_t i = 0; i < gy.rows(); ++i) {
        axpy(1.0, gy.row(i).data(), gr->row(0).data(), gy.cols());
      }
    }
  });
}

Var concat_cols(Tape& t, std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const std::size_t n = t.value(parts[0]).rows();
  std::size_t width = 0;
  std::vector<std::size_t> offsets;
  for (Var p : parts) {
    require(t.value(p).rows() == n, "concat_cols", "row count mismatch");
    offsets.push_back(width);
    width += t.value(p).cols();
  }
  Tensor2D y(n, width);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor2D& src = t.value(parts[p]);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(src.row(i).begin(), src.row(i).end(), y.row(i).begin() + offsets[p]);
    }
  }
  std::vector<Var> keep(parts.begin(), parts.end());
  return t.record(std::move(y), parts, [keep, offsets, n](Tape& tp, std::size_t self) {
    const Tensor2D& gy = tp.grad_of(self);
    for (std::size_t p = 0; p < keep.size(); ++p) {
      Tensor2D* g = tp.grad_sink(keep[p]);
      if (!g) continue;
      const std::size_t w = g->cols();
      for (std::size_t i = 0; i < n; ++i) {
        axpy(1.0, gy.row(i).data() + offsets[p], g->row(i).data(), w);
      }
    }
  });
}

Var broadcast_rows(Tape& t, Var row, std::size_t n) {
  const Tensor2D& r = t.value(row);
  require(r.rows() == 1, "broadcast_rows", "expects a row vector, got " + dims(r));
  Tensor2D y(n, r.cols());
  for (std::size_t i = 0; i < n; ++i) std::copy(r.row(0).begin(), r.row(0).end(), y.row(i).begin());
  const Var inputs[] = {row};
  return t.record(std::move(y), inputs, [row](Tape& tp, std::size_t self) {
    const Tensor2D& gy = tp.grad_of(self);
    Tensor2D* gr = tp.grad_sink(row);
    for (std::size_t i = 0; i < gy.rows(); ++i) {
      axpy(1.0, gy.row(i).data(), gr->row(0).data(), gy.cols());
    }
  });
}

Var gather_rows(Tape& t, Var x, std::vector<std::size_t> index) {
  const Tensor2D& xv = t.value(x);
  Tensor2D y(index.size(), xv.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] < xv.rows(), "gather_rows", "index out of range");
    std::copy(xv.row(index[i]).begin(), xv.row(index[i]).end(), y.row(i).begin());
  }
  const Var inputs[] = {x};
  return t.record(std::move(y), inputs, [x, index = std::move(index)](Tape& tp, std::size_t self) {
    const Tensor2D& gy = tp.grad_of(self);
    Tensor2D* gx = tp.grad_sink(x);
    for (std::size_t i = 0; i < index.size(); ++i) {
      axpy(1.0, gy.row(i).data(), gx->row(index[i]).data(), gy.cols());
    }
  });
}

Var scatter_mean_rows(Tape& t, Var x, std::vector<std::size_t> target, std::size_t n_out) {
  const Tensor2D& xv = t.value(x);
  require(target.size() == xv.rows(), "scatter_mean_rows", "one target per row required");
  std::vector<double> count(n_out, 0.0);
  for (std::size_t j : target) {
    require(j < n_out, "scatter_mean_rows", "target out of range");
    count[j] += 1.0;
  }
  Tensor2D y(n_out, xv.cols());
  for (std::size_t j = 0; j < target.size(); ++j) {
    axpy(1.0 / count[target[j]], xv.row(j).data(), y.row(target[j]).data(), xv.cols());
  }
  const Var inputs[] = {x};
  return t.record(std::move(y), inputs,
                  [x, target = std::move(target), count = std::move(count)](Tape& tp, std::size_t self) {
                    const Tensor2D& gy = tp.grad_of(self);
                    Tensor2D* gx = tp.grad_sink(x);
                    for (std::size_t j = 0; j < target.size(); ++j) {
                      axpy(1.0 / count[target[j]], gy.row(target[j]).data(), gx->row(j).data(),
                           gy.cols());
                    }
                  });
}

Var mean_rows(Tape& t, Var x) {
  const Tensor2D& xv = t.value(x);
  require(xv.rows() > 0, "mean_rows", "empty input");
  Tensor2D y(1, xv.cols());
  const double inv = 1.0 / static_cast<double>(xv.rows());
  for (std::size_t i = 0; i < xv.rows(); ++i) axpy(1.0, xv.row(i).data(), y.row(0).data(), xv.cols());
  for (double& v : y.data()) v *= inv;
  const Var inputs[] = {x};
  return t.record(std::move(y), inputs, [x, inv](Tape& tp, std::size_t self) {
    const Tensor2D& gy = tp.grad_of(self);
    Tensor2D* gx = tp.grad_sink(x);
    for (std::size_t i = 0; i < gx->rows(); ++i) axpy(inv, gy.row(0).data(), gx->row(i).data(), gy.cols());
  });
}

Var max_rows(Tape& t, Var x) {
  const Tensor2D& xv = t.value(x);
  require(xv.rows() > 0, "max_rows", "empty input");
  Tensor2D y(1, xv.cols());
  std::vector<std::size_t> argmax(xv.cols(), 0);
  for (std::size_t c = 0; c < xv.cols(); ++c) {
    double best = xv(0, c);
    for (std::size_t i = 1; i < xv.rows(); ++i) {
      if (xv(i, c) > best) {
        best = xv(i, c);
        argmax[c] = i;
      }
    }
    y(0, c) = best;
  }
  const Var inputs[] = {x};
  return t.record(std::move(y), inputs, [x, argmax = std::move(argmax)](Tape& tp, std::size_t self) {
    const Tensor2D& gy = tp.grad_of(self);
    Tensor2D* gx = tp.grad_sink(x);
    for (std::size_t c = 0; c < argmax.size(); ++c) (*gx)(argmax[c], c) += gy(0, c);
  });
}

Var softmax_pool_rows(Tape& t, Var x) {
  const Tensor2D& xv = t.value(x);
  require(xv.rows() > 0, "softmax_pool_rows", "empty input");
  Tensor2D weights = softmax_columns(xv);
  Tensor2D y(1, xv.cols());
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    for (std::size_t c = 0; c < xv.cols(); ++c) y(0, c) += weights(i, c) * xv(i, c);
  }
  const Var inputs[] = {x};
  return t.record(std::move(y), inputs, [x, weights = std::move(weights)](Tape& tp, std::size_t self) {
    // d y_c / d x_ic = w_ic * (1 + x_ic - y_c)
    const Tensor2D& gy = tp.grad_of(self);
    const Tensor2D& xv = tp.value(x);
    const Tensor2D& yv = tp.value(Var{self});
    Tensor2D* gx = tp.grad_sink(x);
    for (std::size_t i = 0; i < xv.rows(); ++i) {
      for (std::size_t c = 0; c < xv.cols(); ++c) {
        (*gx)(i, c) += gy(0, c) * weights(i, c) * (1.0 + xv(i, c) - yv(0, c));
      }
    }
  });
}

Var mse_loss(Tape& t, Var prediction, Var target) {
  const Tensor2D& p = t.value(prediction);
  const Tensor2D& y = t.value(target);
  require(p.same_shape(y), "mse_loss", dims(p) + " vs " + dims(y));
  require(p.size() > 0, "mse_loss", "empty input");
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double d = p.data()[k] - y.data()[k];
    total += d * d;
  }
  const double inv = 1.0 / static_cast<double>(p.size());
  Tensor2D out(1, 1, total * inv);
  const Var inputs[] = {prediction, target};
  return t.record(std::move(out), inputs, [prediction, target, inv](Tape& tp, std::size_t self) {
    const double g = tp.grad_of(self)(0, 0);
    const auto pv = tp.value(prediction).data();
    const auto yv = tp.value(target).data();
    if (Tensor2D* gp = tp.grad_sink(prediction)) {
      auto d = gp->data();
      for (std::size_t k = 0; k < d.size(); ++k) d[k] += 2.0 * inv * g * (pv[k] - yv[k]);
    }
    if (Tensor2D* gt = tp.grad_sink(target)) {
      auto d = gt->data();
      for (std::size_t k = 0; k < d.size(); ++k) d[k] -= 2.0 * inv * g * (pv[k] - yv[k]);
    }
  });
}

}  // namespace perfseer::nk
