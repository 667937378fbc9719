// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include "perfseer/graph_ir.hpp"

namespace perfseer {

// Converts a serialized ONNX ModelProto into a CompGraph. Only operators that
// map onto OpKind are accepted (Conv, Gemm, MatMul, BatchNormalization, Relu,
// MaxPool, AveragePool, GlobalAveragePool, Add, Concat, Flatten, Softmax);
// anything else raises UnsupportedOp. `batch` overrides the leading input
// dimension (symbolic batch dims default to 1 without it).
CompGraph import_onnx_bytes(std::string_view bytes, std::optional<std::int64_t> batch = std::nullopt);
CompGraph import_onnx(const std::filesystem::path& path,
                      std::optional<std::int64_t> batch = std::nullopt);

}  // namespace perfseer
