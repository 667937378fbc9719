// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include "perfseer/pcgrad.hpp"

#include <cmath>
#include <numeric>

#include "perfseer/error.hpp"
#include "perfseer/rng.hpp"

namespace perfseer {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double project_if_conflicting(std::span<double> g, std::span<const double> other) {
  const double d = dot(g, other);
  if (d >= 0.0) return d;
  const double norm2 = dot(other, other);
  if (norm2 == 0.0) return d;
  const double coeff = d / norm2;
  for (std::size_t k = 0; k < g.size(); ++k) g[k] -= coeff * other[k];
  return d;
}

TaskGradients projected_task_gradients(const TaskGradients& grads, std::uint64_t seed,
                                       std::vector<ProjectionStep>* trace) {
  if (grads.empty()) throw Error(ErrorCode::kLengthMismatch, "no task gradients");
  const std::size_t len = grads.front().size();
  for (const auto& g : grads) {
    if (g.size() != len) throw Error(ErrorCode::kLengthMismatch, "task gradients differ in length");
  }
  Rng rng(seed);
  TaskGradients out = grads;
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    others.clear();
    for (std::size_t j = 0; j < grads.size(); ++j) {
      if (j != i) others.push_back(j);
    }
    rng.shuffle(std::span<std::size_t>(others));
    for (std::size_t j : others) {
      const double before = trace ? std::sqrt(dot(out[i], out[i])) : 0.0;
      const double d = project_if_conflicting(out[i], grads[j]);
      if (trace) trace->push_back({i, j, d, before, std::sqrt(dot(out[i], out[i]))});
    }
  }
  return out;
}

std::vector<double> project_conflicts(const TaskGradients& grads, std::uint64_t seed,
                                      std::vector<ProjectionStep>* trace) {
  const TaskGradients projected = projected_task_gradients(grads, seed, trace);
  std::vector<double> total(projected.front().size(), 0.0);
  for (const auto& g : projected) {
    for (std::size_t k = 0; k < total.size(); ++k) total[k] += g[k];
  }
  return total;
}

}  // namespace perfseer
