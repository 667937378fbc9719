// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace perfseer {

// Per-task flat gradients over the shared parameters.
using TaskGradients = std::vector<std::vector<double>>;

struct ProjectionStep {
  std::size_t task = 0;
  std::size_t against = 0;
  double dot = 0.0;          // g_task . g_against before projecting
  double norm_before = 0.0;
  double norm_after = 0.0;
};

double dot(std::span<const double> a, std::span<const double> b);

// Removes from `g` its component along `other` when the two conflict
// (negative dot). Zero-norm `other` is skipped. Returns the dot product
// that was observed.
double project_if_conflicting(std::span<double> g, std::span<const double> other);

// Gradient surgery: each task gradient is projected onto the normal plane of
// every conflicting task gradient, visiting the other tasks in a seeded
// random order, and the projected gradients are summed. Throws
// LengthMismatch on ragged input. `trace`, when given, receives one entry per
// visited pair.
std::vector<double> project_conflicts(const TaskGradients& grads, std::uint64_t seed,
                                      std::vector<ProjectionStep>* trace = nullptr);

// Per-task projected gradients before summation.
TaskGradients projected_task_gradients(const TaskGradients& grads, std::uint64_t seed,
                                       std::vector<ProjectionStep>* trace = nullptr);

}  // namespace perfseer
