// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "perfseer/featurize.hpp"

namespace perfseer {

// Predicted quantity. A metric is a (phase, quantity) pair, named
// "<phase>_<quantity>", e.g. "infer_time".
enum class Quantity { kTime = 0, kMem = 1, kUtil = 2 };

std::string_view to_string(Quantity q);
std::optional<Quantity> parse_quantity(std::string_view name);
std::string metric_name(Phase phase, Quantity q);

struct Labels {
  double time_s = 0.0;
  double mem_bytes = 0.0;
  double util_frac = 0.0;

  double get(Quantity q) const;
  bool operator==(const Labels&) const = default;
};

struct LabelRow {
  std::string graph_id;
  Phase phase = Phase::kInfer;
  Labels labels;

  bool operator==(const LabelRow&) const = default;
};

inline constexpr std::string_view kLabelsHeader = "graph_id,phase,time_s,mem_bytes,util_frac";

std::string labels_to_csv(std::span<const LabelRow> rows);
std::vector<LabelRow> labels_from_csv(std::string_view text);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);

struct Sample {
  std::string graph_id;
  Phase phase = Phase::kInfer;
  PerfGraph graph;
  Labels labels;
};

/// Dataset directory layout: `labels.csv` plus `graphs/<graph_id>.json`.
/// Rows whose phase is not in `phases` are skipped; an empty `phases` keeps
/// every row. Samples keep the row order of labels.csv.
std::vector<Sample> load_dataset(const std::filesystem::path& dir,
                                 std::span<const Phase> phases = {});

std::filesystem::path graph_path(const std::filesystem::path& dir, std::string_view graph_id);

}  // namespace perfseer
