// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "perfseer/dataset.hpp"
#include "perfseer/graph_ir.hpp"

namespace perfseer {

enum class Family { kChainVgg, kResidual, kDenseBlock, kBottleneckMix };

std::string_view to_string(Family f);
std::optional<Family> parse_family(std::string_view name);

/// Random CNN generator settings. Each graph draws its family, depth,
/// base width, batch size and image size from these sets and ranges.
/// Depth counts blocks (convolutions for chain-vgg).
struct ArchSpec {
  std::vector<Family> families{Family::kChainVgg, Family::kResidual, Family::kDenseBlock,
                               Family::kBottleneckMix};
  std::int64_t min_depth = 2;
  std::int64_t max_depth = 6;
  std::int64_t min_channels = 8;
  std::int64_t max_channels = 128;
  std::vector<std::int64_t> batch_sizes{1, 2, 4, 8, 16, 32, 64};
  std::vector<std::int64_t> image_sizes{32, 64, 112, 224};
  std::int64_t in_channels = 3;
  std::int64_t num_classes = 100;
  std::uint64_t seed = 0;
};

// Roofline device model.
struct CostOracleSpec {
  double peak_flops = 35.6e12;
  double mem_bandwidth = 936e9;
  double per_op_overhead = 4e-6;
  double mem_base = 64.0 * 1024 * 1024;
  double util_saturation = 0.95;
};

// Train-phase cost relative to inference (forward plus a backward of twice
// the forward cost). Activation memory doubles in the train phase.
inline constexpr double kTrainTimeMultiplier = 3.0;
inline constexpr double kTrainActivationMultiplier = 2.0;

void validate(const ArchSpec& spec);
void validate(const CostOracleSpec& spec);

nlohmann::json to_json(const ArchSpec& spec);
nlohmann::json to_json(const CostOracleSpec& spec);
// Missing keys keep their defaults; unknown keys are rejected.
ArchSpec arch_spec_from_json(const nlohmann::json& doc);
CostOracleSpec oracle_spec_from_json(const nlohmann::json& doc);

// Shape-inferred random graph; identical for identical (spec, seed).
CompGraph gen_graph(const ArchSpec& spec, std::uint64_t seed);

// Largest total of simultaneously live activation bytes (graph input
// included) when executing in topological order. A tensor is freed after
// its last consumer runs; graph outputs stay live.
std::int64_t peak_activation_bytes(const CompGraph& graph);

Labels label(const CompGraph& graph, const CostOracleSpec& oracle, Phase phase);

struct DatasetSpec {
  ArchSpec arch;
  CostOracleSpec oracle;
  std::vector<Phase> phases{Phase::kInfer, Phase::kTrain};
};

nlohmann::json to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const nlohmann::json& doc);

std::string synthetic_graph_id(std::size_t index);

// Writes `n` graphs to `dir/graphs/`, their labels to `dir/labels.csv` and
// the generating spec to `dir/dataset.json`. Graph i uses seed
// derive_seed(spec.arch.seed, i).
void write_dataset(const DatasetSpec& spec, std::size_t n, const std::filesystem::path& dir);

}  // namespace perfseer
