// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace perfseer {

struct MetricValues {
  double mape = 0.0;   // percent
  double rmspe = 0.0;  // percent
  double acc5 = 0.0;   // percent of samples within 5% relative error
  double acc10 = 0.0;
  std::size_t count = 0;

  bool operator==(const MetricValues&) const = default;
};

// Percentage errors in physical units. Throws ZeroTarget if any y_true is 0
// and LengthMismatch on ragged or empty input.
MetricValues compute_metrics(std::span<const double> y_true, std::span<const double> y_pred);

// Percent of pairs with |pred - true| / |true| <= x / 100.
double accuracy_within(std::span<const double> y_true, std::span<const double> y_pred, double x);

struct MetricsReport {
  // Sorted by metric name.
  std::vector<std::pair<std::string, MetricValues>> per_metric;
  // Unweighted mean over metrics; count is the total number of pairs.
  MetricValues mean;

  bool operator==(const MetricsReport&) const = default;
};

struct PredictionRow {
  std::string graph_id;
  std::string target;  // metric name, e.g. infer_time
  double y_true = 0.0;
  double y_pred = 0.0;

  bool operator==(const PredictionRow&) const = default;
};

inline constexpr std::string_view kPredictionsHeader = "graph_id,target,y_true,y_pred";

MetricsReport report_from_rows(std::span<const PredictionRow> rows);

std::string predictions_to_csv(std::span<const PredictionRow> rows);
std::vector<PredictionRow> predictions_from_csv(std::string_view text);

nlohmann::json to_json(const MetricValues& m);
nlohmann::json to_json(const MetricsReport& r);
// Fixed-width table, one line per metric plus the mean.
std::string format_table(const MetricsReport& r);

}  // namespace perfseer
