// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include "perfseer/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "perfseer/error.hpp"
#include "perfseer/featurize.hpp"
#include "perfseer/rng.hpp"

namespace perfseer {

using nlohmann::json;

std::string_view to_string(Family f) {
  switch (f) {
    case Family::kChainVgg: return "chain-vgg";
    case Family::kResidual: return "residual";
    case Family::kDenseBlock: return "dense-block";
    case Family::kBottleneckMix: return "bottleneck-mix";
  }
  return "?";
}

std::optional<Family> parse_family(std::string_view name) {
  for (Family f : {Family::kChainVgg, Family::kResidual, Family::kDenseBlock, Family::kBottleneckMix}) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

namespace {

[[noreturn]] void bad_spec(const std::string& msg) { throw Error(ErrorCode::kParse, msg); }

bool all_positive(const std::vector<std::int64_t>& v) {
  return !v.empty() && std::all_of(v.begin(), v.end(), [](std::int64_t x) { return x > 0; });
}

}  // namespace

void validate(const ArchSpec& s) {
  if (s.families.empty()) bad_spec("arch spec: no families");
  if (s.min_depth < 1 || s.max_depth < s.min_depth) bad_spec("arch spec: bad depth range");
  if (s.min_channels < 8 || s.max_channels < s.min_channels) {
    bad_spec("arch spec: channel range must satisfy 8 <= min <= max");
  }
  if (!all_positive(s.batch_sizes)) bad_spec("arch spec: batch sizes must be positive");
  if (!all_positive(s.image_sizes) ||
      std::any_of(s.image_sizes.begin(), s.image_sizes.end(), [](std::int64_t x) { return x < 8; })) {
    bad_spec("arch spec: image sizes must be at least 8");
  }
  if (s.in_channels < 1 || s.num_classes < 1) bad_spec("arch spec: bad input channels or class count");
}

void validate(const CostOracleSpec& s) {
  for (double v : {s.peak_flops, s.mem_bandwidth, s.per_op_overhead, s.mem_base, s.util_saturation}) {
    if (!(v > 0.0) || !std::isfinite(v)) bad_spec("oracle spec: all constants must be positive");
  }
}

json to_json(const ArchSpec& s) {
  json fams = json::array();
  for (Family f : s.families) fams.push_back(std::string(to_string(f)));
  return {{"families", fams},
          {"min_depth", s.min_depth},
          {"max_depth", s.max_depth},
          {"min_channels", s.min_channels},
          {"max_channels", s.max_channels},
          {"batch_sizes", s.batch_sizes},
          {"image_sizes", s.image_sizes},
          {"in_channels", s.in_channels},
          {"num_classes", s.num_classes},
          {"seed", s.seed}};
}

json to_json(const CostOracleSpec& s) {
  return {{"peak_flops", s.peak_flops},
          {"mem_bandwidth", s.mem_bandwidth},
          {"per_op_overhead", s.per_op_overhead},
          {"mem_base", s.mem_base},
          {"util_saturation", s.util_saturation}};
}

namespace {

void check_keys(const json& doc, std::initializer_list<std::string_view> allowed, const char* what) {
  if (!doc.is_object()) bad_spec(std::string(what) + " must be a JSON object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      bad_spec(std::string(what) + ": unknown key '" + it.key() + "'");
    }
  }
}

template <typename T>
void read_opt(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

}  // namespace

ArchSpec arch_spec_from_json(const json& doc) {
  check_keys(doc,
             {"families", "min_depth", "max_depth", "min_channels", "max_channels", "batch_sizes",
              "image_sizes", "in_channels", "num_classes", "seed"},
             "arch spec");
  ArchSpec s;
  try {
    if (doc.contains("families")) {
      s.families.clear();
      for (const auto& name : doc.at("families")) {
        const auto f = parse_family(name.get<std::string>());
        if (!f) bad_spec("arch spec: unknown family '" + name.get<std::string>() + "'");
        s.families.push_back(*f);
      }
    }
    read_opt(doc, "min_depth", s.min_depth);
    read_opt(doc, "max_depth", s.max_depth);
    read_opt(doc, "min_channels", s.min_channels);
    read_opt(doc, "max_channels", s.max_channels);
    read_opt(doc, "batch_sizes", s.batch_sizes);
    read_opt(doc, "image_sizes", s.image_sizes);
    read_opt(doc, "in_channels", s.in_channels);
    read_opt(doc, "num_classes", s.num_classes);
    read_opt(doc, "seed", s.seed);
  } catch (const json::exception& e) {
    bad_spec(std::string("arch spec: ") + e.what());
  }
  validate(s);
  return s;
}

CostOracleSpec oracle_spec_from_json(const json& doc) {
  check_keys(doc, {"peak_flops", "mem_bandwidth", "per_op_overhead", "mem_base", "util_saturation"},
             "oracle spec");
  CostOracleSpec s;
  try {
    read_opt(doc, "peak_flops", s.peak_flops);
    read_opt(doc, "mem_bandwidth", s.mem_bandwidth);
    read_opt(doc, "per_op_overhead", s.per_op_overhead);
    read_opt(doc, "mem_base", s.mem_base);
    read_opt(doc, "util_saturation", s.util_saturation);
  } catch (const json::exception& e) {
    bad_spec(std::string("oracle spec: ") + e.what());
  }
  validate(s);
  return s;
}

json to_json(const DatasetSpec& s) {
  json phases = json::array();
  for (Phase p : s.phases) phases.push_back(std::string(to_string(p)));
  return {{"arch", to_json(s.arch)}, {"oracle", to_json(s.oracle)}, {"phases", phases}};
}

DatasetSpec dataset_spec_from_json(const json& doc) {
  check_keys(doc, {"arch", "oracle", "phases"}, "dataset spec");
  DatasetSpec s;
  if (doc.contains("arch")) s.arch = arch_spec_from_json(doc.at("arch"));
  if (doc.contains("oracle")) s.oracle = oracle_spec_from_json(doc.at("oracle"));
  if (doc.contains("phases")) {
    s.phases.clear();
    if (!doc.at("phases").is_array()) bad_spec("dataset spec: phases must be an array");
    for (const auto& p : doc.at("phases")) {
      const auto phase = p.is_string() ? parse_phase(p.get<std::string>()) : std::nullopt;
      if (!phase) bad_spec("dataset spec: unknown phase " + p.dump());
      s.phases.push_back(*phase);
    }
    if (s.phases.empty()) bad_spec("dataset spec: no phases");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Generator

namespace {

using Hp = std::map<std::string, double>;

// Builds a graph while tracking channels and spatial size per node so that
// the families can choose legal hyper-parameters.
class Builder {
 public:
  Builder(std::int64_t batch, std::int64_t channels, std::int64_t size)
      : in_channels_(channels), in_size_(size) {
    g_.batch_size = batch;
  }

  struct Ref {
    std::int64_t id;  // -1 is the graph input
    std::int64_t c;
    std::int64_t h;
  };

  Ref input() const { return {-1, in_channels_, in_size_}; }

  Ref conv(Ref x, std::int64_t cout, std::int64_t k, std::int64_t stride, std::int64_t groups = 1,
           bool bias = false) {
    const std::int64_t pad = k / 2;
    const std::int64_t h = (x.h + 2 * pad - k) / stride + 1;
    return add(OpKind::kConv2d,
               {{"kernel_h", k}, {"kernel_w", k}, {"stride", stride}, {"padding", pad},
                {"out_channels", cout}, {"groups", groups}, {"has_bias", bias ? 1 : 0}},
               {x}, cout, h);
  }
  Ref bn(Ref x) { return add(OpKind::kBatchNorm, {}, {x}, x.c, x.h); }
  Ref relu(Ref x) { return add(OpKind::kReLU, {}, {x}, x.c, x.h); }
  Ref pool(Ref x, bool max) {
    return add(max ? OpKind::kMaxPool : OpKind::kAvgPool,
               {{"kernel_h", 2}, {"kernel_w", 2}, {"stride", 2}}, {x}, x.c, x.h / 2);
  }
  Ref add_tensors(Ref a, Ref b) { return add(OpKind::kAdd, {}, {a, b}, a.c, a.h); }
  Ref concat(Ref a, Ref b) { return add(OpKind::kConcat, {{"axis", 1}}, {a, b}, a.c + b.c, a.h); }

  void classifier(Ref x, std::int64_t classes, bool softmax) {
    x = add(OpKind::kGlobalAvgPool, {}, {x}, x.c, 1);
    x = add(OpKind::kFlatten, {}, {x}, x.c, 1);
    x = add(OpKind::kGemm, {{"out_features", classes}, {"has_bias", 1}}, {x}, classes, 1);
    if (softmax) add(OpKind::kSoftmax, {{"axis", 1}}, {x}, classes, 1);
  }

  CompGraph finish() {
    const std::int64_t n = g_.batch_size;
    return infer_shapes(std::move(g_), TensorShape{{n, in_channels_, in_size_, in_size_}});
  }

 private:
  Ref add(OpKind kind, Hp hp, std::initializer_list<Ref> inputs, std::int64_t c, std::int64_t h) {
    OpNode node;
    node.id = static_cast<std::int64_t>(g_.nodes.size());
    node.kind = kind;
    node.hyperparams = std::move(hp);
    for (const Ref& r : inputs) {
      if (r.id >= 0) g_.edges.push_back(Edge{r.id, node.id, {}});
    }
    g_.nodes.push_back(std::move(node));
    return {g_.nodes.back().id, c, h};
  }

  CompGraph g_;
  std::int64_t in_channels_;
  std::int64_t in_size_;
};

std::int64_t round_to_8(double c) { return std::max<std::int64_t>(8, std::llround(c / 8.0) * 8); }

class Generator {
 public:
  Generator(const ArchSpec& spec, Rng& rng) : s_(spec), rng_(rng) {}

  std::int64_t pick(const std::vector<std::int64_t>& v) { return v[rng_.below(v.size())]; }
  bool coin(double p) { return rng_.uniform() < p; }

  std::int64_t base_width() {
    const double lo = std::log(static_cast<double>(s_.min_channels));
    const double hi = std::log(static_cast<double>(s_.max_channels));
    return clamp_width(round_to_8(std::exp(rng_.uniform(lo, hi))));
  }
  std::int64_t clamp_width(std::int64_t c) const {
    return std::clamp(c, round_to_8(static_cast<double>(s_.min_channels)),
                      std::max<std::int64_t>(8, s_.max_channels / 8 * 8));
  }

  void chain_vgg(Builder& b, std::int64_t depth) {
    auto x = b.input();
    std::int64_t c = base_width();
    for (std::int64_t i = 0; i < depth; ++i) {
      x = b.conv(x, c, 3, 1, 1, true);
      if (coin(0.5)) x = b.bn(x);
      x = b.relu(x);
      if (i + 1 < depth && x.h >= 8 && coin(0.5)) {
        x = b.pool(x, true);
        c = clamp_width(c * 2);
      }
    }
    b.classifier(x, s_.num_classes, coin(0.5));
  }

  Builder::Ref stem(Builder& b, std::int64_t c) {
    auto x = b.conv(b.input(), c, 3, x_stride(), 1, false);
    return b.relu(b.bn(x));
  }
  std::int64_t x_stride() { return coin(0.5) ? 2 : 1; }

  void residual(Builder& b, std::int64_t depth) {
    auto x = stem(b, base_width());
    for (std::int64_t i = 0; i < depth; ++i) {
      const bool down = x.h >= 8 && coin(0.4);
      const std::int64_t stride = down ? 2 : 1;
      const std::int64_t cout = down ? clamp_width(x.c * 2) : x.c;
      auto y = b.relu(b.bn(b.conv(x, cout, 3, stride)));
      y = b.bn(b.conv(y, cout, 3, 1));
      auto shortcut = x;
      if (stride != 1 || cout != x.c) shortcut = b.bn(b.conv(x, cout, 1, stride));
      x = b.relu(b.add_tensors(y, shortcut));
    }
    b.classifier(x, s_.num_classes, coin(0.5));
  }

  void dense_block(Builder& b, std::int64_t depth) {
    auto x = stem(b, base_width());
    const std::int64_t growth = pick({8, 12, 16, 24, 32});
    for (std::int64_t i = 0; i < depth; ++i) {
      auto y = b.conv(b.relu(b.bn(x)), growth, 3, 1);
      x = b.concat(x, y);
      if (i + 1 < depth && (x.c > s_.max_channels || (i % 3 == 2 && coin(0.7)))) {
        x = b.conv(b.relu(b.bn(x)), clamp_width(x.c / 2), 1, 1);
        if (x.h >= 8) x = b.pool(x, false);
      }
    }
    b.classifier(b.relu(b.bn(x)), s_.num_classes, coin(0.5));
  }

  void bottleneck_mix(Builder& b, std::int64_t depth) {
    auto x = stem(b, clamp_width(base_width() * 2));
    for (std::int64_t i = 0; i < depth; ++i) {
      if (coin(0.6) && x.c >= 32) {
        const std::int64_t mid = std::max<std::int64_t>(8, x.c / 4 / 8 * 8);
        const std::int64_t groups = pick({1, 1, 2, 4, 8});
        auto y = b.relu(b.bn(b.conv(x, mid, 1, 1)));
        y = b.relu(b.bn(b.conv(y, mid, 3, 1, groups)));
        y = b.bn(b.conv(y, x.c, 1, 1));
        x = b.relu(b.add_tensors(y, x));
      } else {
        x = b.relu(b.bn(b.conv(x, clamp_width(x.c * 2), 3, 1)));
        if (x.h >= 8 && coin(0.5)) x = b.pool(x, coin(0.5));
      }
    }
    b.classifier(x, s_.num_classes, coin(0.5));
  }

 private:
  const ArchSpec& s_;
  Rng& rng_;
};

}  // namespace

CompGraph gen_graph(const ArchSpec& spec, std::uint64_t seed) {
  validate(spec);
  Rng rng(seed);
  Generator gen(spec, rng);
  const Family family = spec.families[rng.below(spec.families.size())];
  const std::int64_t depth = rng.between(spec.min_depth, spec.max_depth);
  const std::int64_t batch = gen.pick(spec.batch_sizes);
  const std::int64_t size = gen.pick(spec.image_sizes);
  Builder b(batch, spec.in_channels, size);
  switch (family) {
    case Family::kChainVgg: gen.chain_vgg(b, depth); break;
    case Family::kResidual: gen.residual(b, depth); break;
    case Family::kDenseBlock: gen.dense_block(b, depth); break;
    case Family::kBottleneckMix: gen.bottleneck_mix(b, depth); break;
  }
  return b.finish();
}

// ---------------------------------------------------------------------------
// Cost oracle

std::int64_t peak_activation_bytes(const CompGraph& g) {
  const std::size_t n = g.nodes.size();
  const auto order = g.topological_order();
  std::vector<std::size_t> step_of(n);
  for (std::size_t k = 0; k < n; ++k) step_of[order[k]] = k;

  // last_use[i]: step of the last consumer of node i's output; n = never freed.
  std::vector<std::size_t> last_use(n, n);
  std::vector<bool> has_consumer(n, false);
  std::size_t input_last_use = 0;
  for (std::size_t pos = 0; pos < n; ++pos) {
    const auto preds = g.predecessors(pos);
    if (preds.empty()) input_last_use = std::max(input_last_use, step_of[pos]);
    for (std::size_t p : preds) {
      last_use[p] = has_consumer[p] ? std::max(last_use[p], step_of[pos]) : step_of[pos];
      has_consumer[p] = true;
    }
  }
  std::vector<std::vector<std::size_t>> freed_at(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (has_consumer[i]) freed_at[last_use[i]].push_back(i);
  }

  const auto bytes = [&](const TensorShape& s) { return s.elements() * g.dtype_bytes; };
  std::int64_t live = bytes(g.input_shape);
  std::int64_t peak = live;
  for (std::size_t k = 0; k < n; ++k) {
    live += bytes(g.output_shapes[order[k]]);
    peak = std::max(peak, live);
    for (std::size_t i : freed_at[k]) live -= bytes(g.output_shapes[i]);
    if (k == input_last_use) live -= bytes(g.input_shape);
  }
  return peak;
}

Labels label(const CompGraph& g, const CostOracleSpec& oracle, Phase phase) {
  validate(oracle);
  double time = 0.0;
  double flops = 0.0;
  std::int64_t weight_bytes = 0;
  for (std::size_t pos = 0; pos < g.nodes.size(); ++pos) {
    const auto in = g.input_shapes(pos);
    const auto& out = g.output_shapes[pos];
    const auto f = static_cast<double>(op_flops(g.nodes[pos], in, out));
    const auto m = static_cast<double>(op_mac_bytes(g.nodes[pos], in, out, g.dtype_bytes));
    time += std::max(f / oracle.peak_flops, m / oracle.mem_bandwidth);
    flops += f;
    weight_bytes += weight_elements(g.nodes[pos], out) * g.dtype_bytes;
  }
  time += static_cast<double>(g.nodes.size()) * oracle.per_op_overhead;
  double activations = static_cast<double>(peak_activation_bytes(g));
  if (phase == Phase::kTrain) {
    time *= kTrainTimeMultiplier;
    flops *= kTrainTimeMultiplier;
    activations *= kTrainActivationMultiplier;
  }
  Labels l;
  l.time_s = time;
  l.mem_bytes = oracle.mem_base + static_cast<double>(weight_bytes) + activations;
  l.util_frac = std::clamp(flops / (time * oracle.peak_flops), 0.0, oracle.util_saturation);
  return l;
}

std::string synthetic_graph_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "g%05zu", index);
  return buf;
}

void write_dataset(const DatasetSpec& spec, std::size_t n, const std::filesystem::path& dir) {
  validate(spec.arch);
  validate(spec.oracle);
  if (n == 0) throw Error(ErrorCode::kTooSmall, "dataset size must be positive");
  std::vector<LabelRow> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const CompGraph g = gen_graph(spec.arch, derive_seed(spec.arch.seed, i));
    const std::string id = synthetic_graph_id(i);
    save_graph(g, graph_path(dir, id));
    for (Phase p : spec.phases) rows.push_back({id, p, label(g, spec.oracle, p)});
  }
  write_file(dir / "labels.csv", labels_to_csv(rows));
  write_file(dir / "dataset.json", to_json(spec).dump(2) + "\n");
}

}  // namespace perfseer
