// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include "perfseer/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include "perfseer/dataset.hpp"
#include "perfseer/error.hpp"

namespace perfseer {

namespace {

void check_pairs(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size() || y_true.empty()) {
    throw Error(ErrorCode::kLengthMismatch, "metrics need equally many, and at least one, pairs");
  }
  for (double y : y_true) {
    if (y == 0.0) throw Error(ErrorCode::kZeroTarget, "a true value is 0; percentage errors undefined");
  }
}

}  // namespace

double accuracy_within(std::span<const double> y_true, std::span<const double> y_pred, double x) {
  check_pairs(y_true, y_pred);
  const double limit = x / 100.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (std::abs(y_pred[i] - y_true[i]) / std::abs(y_true[i]) <= limit) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(y_true.size());
}

MetricValues compute_metrics(std::span<const double> y_true, std::span<const double> y_pred) {
  check_pairs(y_true, y_pred);
  const auto n = static_cast<double>(y_true.size());
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double rel = (y_pred[i] - y_true[i]) / y_true[i];
    abs_sum += std::abs(rel);
    sq_sum += rel * rel;
  }
  MetricValues m;
  m.mape = abs_sum / n * 100.0;
  m.rmspe = std::sqrt(sq_sum / n) * 100.0;
  m.acc5 = accuracy_within(y_true, y_pred, 5.0);
  m.acc10 = accuracy_within(y_true, y_pred, 10.0);
  m.count = y_true.size();
  return m;
}

MetricsReport report_from_rows(std::span<const PredictionRow> rows) {
  if (rows.empty()) throw Error(ErrorCode::kLengthMismatch, "no predictions to report");
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : rows) {
    auto& g = groups[r.target];
    g.first.push_back(r.y_true);
    g.second.push_back(r.y_pred);
  }
  MetricsReport report;
  for (const auto& [name, g] : groups) {
    report.per_metric.emplace_back(name, compute_metrics(g.first, g.second));
  }
  const auto k = static_cast<double>(report.per_metric.size());
  for (const auto& [name, m] : report.per_metric) {
    report.mean.mape += m.mape / k;
    report.mean.rmspe += m.rmspe / k;
    report.mean.acc5 += m.acc5 / k;
    report.mean.acc10 += m.acc10 / k;
    report.mean.count += m.count;
  }
  return report;
}

std::string predictions_to_csv(std::span<const PredictionRow> rows) {
  std::string out(kPredictionsHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += r.graph_id + ',' + r.target + ',' + format_double(r.y_true) + ',' +
           format_double(r.y_pred) + '\n';
  }
  return out;
}

std::vector<PredictionRow> predictions_from_csv(std::string_view text) {
  std::vector<PredictionRow> rows;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no++ == 0) {
      if (line != kPredictionsHeader) {
        throw Error(ErrorCode::kParse, "predictions file must start with '" +
                                           std::string(kPredictionsHeader) + "'");
      }
      continue;
    }
    std::vector<std::string_view> f;
    std::size_t s = 0;
    while (true) {
      const std::size_t comma = line.find(',', s);
      f.push_back(line.substr(s, comma - s));
      if (comma == std::string_view::npos) break;
      s = comma + 1;
    }
    if (f.size() != 4) throw Error(ErrorCode::kParse, "predictions line " + std::to_string(line_no) + ": expected 4 fields");
    rows.push_back({std::string(f[0]), std::string(f[1]), parse_double(f[2]), parse_double(f[3])});
  }
  return rows;
}

nlohmann::json to_json(const MetricValues& m) {
  return {{"mape", m.mape}, {"rmspe", m.rmspe}, {"acc5", m.acc5}, {"acc10", m.acc10}, {"count", m.count}};
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [name, m] : r.per_metric) per[name] = to_json(m);
  return {{"metrics", per}, {"mean", to_json(r.mean)}};
}

std::string format_table(const MetricsReport& r) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %10s %10s %8s %8s %8s\n", "metric", "MAPE%", "RMSPE%",
                "5%Acc", "10%Acc", "n");
  out += line;
  const auto row = [&](const std::string& name, const MetricValues& m) {
    std::snprintf(line, sizeof line, "%-14s %10.3f %10.3f %8.2f %8.2f %8zu\n", name.c_str(), m.mape,
                  m.rmspe, m.acc5, m.acc10, m.count);
    out += line;
  };
  for (const auto& [name, m] : r.per_metric) row(name, m);
  row("mean", r.mean);
  return out;
}

}  // namespace perfseer
