// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include "perfseer/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "perfseer/error.hpp"
#include "perfseer/graph_ir.hpp"

namespace perfseer {

std::string_view to_string(Quantity q) {
  switch (q) {
    case Quantity::kTime: return "time";
    case Quantity::kMem: return "mem";
    case Quantity::kUtil: return "util";
  }
  return "?";
}

std::optional<Quantity> parse_quantity(std::string_view name) {
  if (name == "time") return Quantity::kTime;
  if (name == "mem") return Quantity::kMem;
  if (name == "util") return Quantity::kUtil;
  return std::nullopt;
}

std::string metric_name(Phase phase, Quantity q) {
  return std::string(to_string(phase)) + "_" + std::string(to_string(q));
}

double Labels::get(Quantity q) const {
  switch (q) {
    case Quantity::kTime: return time_s;
    case Quantity::kMem: return mem_bytes;
    case Quantity::kUtil: return util_frac;
  }
  return 0.0;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kParse, "not a number: '" + std::string(text) + "'");
  }
  return v;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

}  // namespace

std::string labels_to_csv(std::span<const LabelRow> rows) {
  std::string out(kLabelsHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += r.graph_id;
    out += ',';
    out += to_string(r.phase);
    out += ',' + format_double(r.labels.time_s);
    out += ',' + format_double(r.labels.mem_bytes);
    out += ',' + format_double(r.labels.util_frac);
    out += '\n';
  }
  return out;
}

std::vector<LabelRow> labels_from_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines.front() != kLabelsHeader) {
    throw Error(ErrorCode::kParse, "labels.csv must start with '" + std::string(kLabelsHeader) + "'");
  }
  std::vector<LabelRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_fields(lines[i]);
    if (f.size() != 5) {
      throw Error(ErrorCode::kParse, "labels.csv line " + std::to_string(i + 1) + ": expected 5 fields");
    }
    LabelRow r;
    r.graph_id = std::string(f[0]);
    const auto phase = parse_phase(f[1]);
    if (!phase) throw Error(ErrorCode::kParse, "unknown phase '" + std::string(f[1]) + "'");
    r.phase = *phase;
    r.labels = {parse_double(f[2]), parse_double(f[3]), parse_double(f[4])};
    rows.push_back(std::move(r));
  }
  return rows;
}

std::filesystem::path graph_path(const std::filesystem::path& dir, std::string_view graph_id) {
  return dir / "graphs" / (std::string(graph_id) + ".json");
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir, std::span<const Phase> phases) {
  const auto rows = labels_from_csv(read_file(dir / "labels.csv"));
  std::map<std::string, CompGraph, std::less<>> graphs;
  std::vector<Sample> samples;
  for (const auto& r : rows) {
    if (!phases.empty() && std::find(phases.begin(), phases.end(), r.phase) == phases.end()) continue;
    auto it = graphs.find(r.graph_id);
    if (it == graphs.end()) it = graphs.emplace(r.graph_id, load_graph(graph_path(dir, r.graph_id))).first;
    samples.push_back({r.graph_id, r.phase, build_perfgraph(it->second, r.phase), r.labels});
  }
  return samples;
}

}  // namespace perfseer
