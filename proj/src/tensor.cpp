// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include "perfseer/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "perfseer/error.hpp"

namespace perfseer::nk {

Tensor2D Tensor2D::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Tensor2D out(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) {
      throw Error(ErrorCode::kShapeMismatch, "ragged rows in Tensor2D::from_rows");
    }
    std::copy(row.begin(), row.end(), out.row(i++).begin());
  }
  return out;
}

Tensor2D Tensor2D::row_vector(std::span<const double> values) {
  Tensor2D out(1, values.size());
  std::copy(values.begin(), values.end(), out.data().begin());
  return out;
}

void Tensor2D::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor2D::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor2D softmax_columns(const Tensor2D& x) {
  Tensor2D out(x.rows(), x.cols());
  if (x.rows() == 0) return out;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double peak = x(0, c);
    for (std::size_t r = 1; r < x.rows(); ++r) peak = std::max(peak, x(r, c));
    double total = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      out(r, c) = std::exp(x(r, c) - peak);
      total += out(r, c);
    }
    for (std::size_t r = 0; r < x.rows(); ++r) out(r, c) /= total;
  }
  return out;
}

Tensor2D softmax_rows(const Tensor2D& x) {
  Tensor2D out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto dst = out.row(r);
    if (in.empty()) continue;
    const double peak = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      dst[c] = std::exp(in[c] - peak);
      total += dst[c];
    }
    for (double& v : dst) v /= total;
  }
  return out;
}

}  // namespace perfseer::nk
