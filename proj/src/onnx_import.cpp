// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include "perfseer/onnx_import.hpp"

#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "perfseer/error.hpp"

namespace perfseer {

namespace {

enum WireType : int { kVarint = 0, kFixed64 = 1, kLengthDelimited = 2, kFixed32 = 5 };

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::kParse, "malformed ONNX protobuf: " + what);
}

class WireReader {
 public:
  explicit WireReader(std::string_view buf) : buf_(buf) {}

  bool done() const { return pos_ >= buf_.size(); }

  // Returns (field number, wire type).
  std::pair<std::uint32_t, int> tag() {
    const std::uint64_t t = varint();
    return {static_cast<std::uint32_t>(t >> 3), static_cast<int>(t & 7)};
  }

  std::uint64_t varint() {
    std::uint64_t value = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      if (pos_ >= buf_.size()) malformed("truncated varint");
      const auto byte = static_cast<std::uint8_t>(buf_[pos_++]);
      value |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
      if (!(byte & 0x80)) return value;
    }
    malformed("varint too long");
  }

  std::string_view bytes() {
    const std::uint64_t len = varint();
    if (len > buf_.size() - pos_) malformed("length exceeds buffer");
    std::string_view out = buf_.substr(pos_, len);
    pos_ += len;
    return out;
  }

  std::uint32_t fixed32() {
    if (buf_.size() - pos_ < 4) malformed("truncated fixed32");
    std::uint32_t v;
    std::memcpy(&v, buf_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }

  void skip(int wire_type) {
    switch (wire_type) {
      case kVarint: varint(); break;
      case kFixed64:
        if (buf_.size() - pos_ < 8) malformed("truncated fixed64");
        pos_ += 8;
        break;
      case kLengthDelimited: bytes(); break;
      case kFixed32: fixed32(); break;
      default: malformed("unsupported wire type " + std::to_string(wire_type));
    }
  }

 private:
  std::string_view buf_;
  std::size_t pos_ = 0;
};

// Repeated int64 fields may arrive packed or one element per tag.
void read_int64s(WireReader& r, int wire_type, std::vector<std::int64_t>& out) {
  if (wire_type == kLengthDelimited) {
    WireReader packed(r.bytes());
    while (!packed.done()) out.push_back(static_cast<std::int64_t>(packed.varint()));
  } else {
    out.push_back(static_cast<std::int64_t>(r.varint()));
  }
}

struct Attribute {
  std::optional<std::int64_t> i;
  std::optional<float> f;
  std::vector<std::int64_t> ints;
};

struct NodeProto {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string op_type;
  std::map<std::string, Attribute> attributes;
};

struct GraphProto {
  std::vector<NodeProto> nodes;
  std::map<std::string, std::vector<std::int64_t>> initializers;
  // Graph inputs in declaration order; -1 marks symbolic dimensions.
  std::vector<std::pair<std::string, std::vector<std::int64_t>>> inputs;
};

std::pair<std::string, Attribute> parse_attribute(std::string_view buf) {
  WireReader r(buf);
  std::string name;
  Attribute a;
  while (!r.done()) {
    auto [field, wt] = r.tag();
    if (field == 1 && wt == kLengthDelimited) {
      name = std::string(r.bytes());
    } else if (field == 2 && wt == kFixed32) {
      const std::uint32_t bits = r.fixed32();
      float f;
      std::memcpy(&f, &bits, 4);
      a.f = f;
    } else if (field == 3 && wt == kVarint) {
      a.i = static_cast<std::int64_t>(r.varint());
    } else if (field == 8) {
      read_int64s(r, wt, a.ints);
    } else {
      r.skip(wt);
    }
  }
  return {name, a};
}

NodeProto parse_node(std::string_view buf) {
  WireReader r(buf);
  NodeProto n;
  while (!r.done()) {
    auto [field, wt] = r.tag();
    if (wt == kLengthDelimited && field == 1) {
      n.inputs.emplace_back(r.bytes());
    } else if (wt == kLengthDelimited && field == 2) {
      n.outputs.emplace_back(r.bytes());
    } else if (wt == kLengthDelimited && field == 4) {
      n.op_type = std::string(r.bytes());
    } else if (wt == kLengthDelimited && field == 5) {
      n.attributes.insert(parse_attribute(r.bytes()));
    } else {
      r.skip(wt);
    }
  }
  return n;
}

std::pair<std::string, std::vector<std::int64_t>> parse_tensor(std::string_view buf) {
  WireReader r(buf);
  std::string name;
  std::vector<std::int64_t> dims;
  while (!r.done()) {
    auto [field, wt] = r.tag();
    if (field == 1) {
      read_int64s(r, wt, dims);
    } else if (field == 8 && wt == kLengthDelimited) {
      name = std::string(r.bytes());
    } else {
      r.skip(wt);
    }
  }
  return {name, dims};
}

std::int64_t parse_dimension(std::string_view buf) {
  WireReader r(buf);
  std::int64_t value = -1;
  while (!r.done()) {
    auto [field, wt] = r.tag();
    if (field == 1 && wt == kVarint) {
      value = static_cast<std::int64_t>(r.varint());
    } else {
      r.skip(wt);
    }
  }
  return value > 0 ? value : -1;
}

// ValueInfoProto -> TypeProto -> TypeProto.Tensor -> TensorShapeProto
std::pair<std::string, std::vector<std::int64_t>> parse_value_info(std::string_view buf) {
  WireReader r(buf);
  std::string name;
  std::vector<std::int64_t> dims;
  while (!r.done()) {
    auto [field, wt] = r.tag();
    if (field == 1 && wt == kLengthDelimited) {
      name = std::string(r.bytes());
    } else if (field == 2 && wt == kLengthDelimited) {
      WireReader type(r.bytes());
      while (!type.done()) {
        auto [tf, twt] = type.tag();
        if (tf != 1 || twt != kLengthDelimited) {
          type.skip(twt);
          continue;
        }
        WireReader tensor(type.bytes());
        while (!tensor.done()) {
          auto [sf, swt] = tensor.tag();
          if (sf != 2 || swt != kLengthDelimited) {
            tensor.skip(swt);
            continue;
          }
          WireReader shape(tensor.bytes());
          while (!shape.done()) {
            auto [df, dwt] = shape.tag();
            if (df == 1 && dwt == kLengthDelimited) {
              dims.push_back(parse_dimension(shape.bytes()));
            } else {
              shape.skip(dwt);
            }
          }
        }
      }
    } else {
      r.skip(wt);
    }
  }
  return {name, dims};
}

GraphProto parse_graph(std::string_view buf) {
  WireReader r(buf);
  GraphProto g;
  while (!r.done()) {
    auto [field, wt] = r.tag();
    if (wt == kLengthDelimited && field == 1) {
      g.nodes.push_back(parse_node(r.bytes()));
    } else if (wt == kLengthDelimited && field == 5) {
      g.initializers.insert(parse_tensor(r.bytes()));
    } else if (wt == kLengthDelimited && field == 11) {
      g.inputs.push_back(parse_value_info(r.bytes()));
    } else {
      r.skip(wt);
    }
  }
  return g;
}

[[noreturn]] void unsupported(const std::string& what) {
  throw Error(ErrorCode::kUnsupportedOp, "UnsupportedOp(" + what + ")");
}

std::int64_t uniform_value(const NodeProto& n, const char* attr, std::int64_t fallback) {
  auto it = n.attributes.find(attr);
  if (it == n.attributes.end()) return fallback;
  const auto& v = it->second.ints;
  if (v.empty()) return it->second.i.value_or(fallback);
  for (auto x : v) {
    if (x != v.front()) unsupported(n.op_type + " with non-uniform " + attr);
  }
  return v.front();
}

const std::vector<std::int64_t>& weight_dims(const GraphProto& g, const NodeProto& n) {
  if (n.inputs.size() < 2) unsupported(n.op_type + " without a weight input");
  auto it = g.initializers.find(n.inputs[1]);
  if (it == g.initializers.end()) unsupported(n.op_type + " with a non-constant weight");
  return it->second;
}

void set_window(OpNode& node, const NodeProto& n, std::int64_t kh, std::int64_t kw) {
  node.hyperparams["kernel_h"] = static_cast<double>(kh);
  node.hyperparams["kernel_w"] = static_cast<double>(kw);
  node.hyperparams["stride"] = static_cast<double>(uniform_value(n, "strides", 1));
  node.hyperparams["padding"] = static_cast<double>(uniform_value(n, "pads", 0));
  if (uniform_value(n, "dilations", 1) != 1) unsupported(n.op_type + " with dilation");
}

OpNode convert(const GraphProto& g, const NodeProto& n, std::int64_t id) {
  OpNode node;
  node.id = id;
  const std::string& op = n.op_type;
  auto has_input = [&](std::size_t i) { return n.inputs.size() > i && !n.inputs[i].empty(); };
  if (op == "Conv") {
    node.kind = OpKind::kConv2d;
    const auto& w = weight_dims(g, n);
    if (w.size() != 4) unsupported("Conv with rank-" + std::to_string(w.size()) + " weight");
    auto ks = n.attributes.count("kernel_shape") ? n.attributes.at("kernel_shape").ints
                                                 : std::vector<std::int64_t>{w[2], w[3]};
    if (ks.size() != 2) unsupported("Conv with non-2D kernel");
    set_window(node, n, ks[0], ks[1]);
    node.hyperparams["out_channels"] = static_cast<double>(w[0]);
    const auto groups = n.attributes.count("group") ? n.attributes.at("group").i.value_or(1) : 1;
    if (groups != 1) node.hyperparams["groups"] = static_cast<double>(groups);
    if (has_input(2)) node.hyperparams["has_bias"] = 1;
  } else if (op == "Gemm" || op == "MatMul") {
    node.kind = OpKind::kGemm;
    const auto& w = weight_dims(g, n);
    if (w.size() != 2) unsupported(op + " with rank-" + std::to_string(w.size()) + " weight");
    bool trans_b = false;
    if (op == "Gemm" && n.attributes.count("transB")) trans_b = n.attributes.at("transB").i.value_or(0) != 0;
    node.hyperparams["out_features"] = static_cast<double>(trans_b ? w[0] : w[1]);
    if (op == "Gemm" && has_input(2)) node.hyperparams["has_bias"] = 1;
  } else if (op == "BatchNormalization") {
    node.kind = OpKind::kBatchNorm;
    if (n.attributes.count("epsilon") && n.attributes.at("epsilon").f) {
      node.hyperparams["epsilon"] = *n.attributes.at("epsilon").f;
    }
  } else if (op == "Relu") {
    node.kind = OpKind::kReLU;
  } else if (op == "MaxPool" || op == "AveragePool") {
    node.kind = op == "MaxPool" ? OpKind::kMaxPool : OpKind::kAvgPool;
    if (!n.attributes.count("kernel_shape")) malformed(op + " without kernel_shape");
    const auto& ks = n.attributes.at("kernel_shape").ints;
    if (ks.size() != 2) unsupported(op + " with non-2D kernel");
    set_window(node, n, ks[0], ks[1]);
    if (uniform_value(n, "ceil_mode", 0) != 0) unsupported(op + " with ceil_mode");
  } else if (op == "GlobalAveragePool") {
    node.kind = OpKind::kGlobalAvgPool;
  } else if (op == "Add") {
    node.kind = OpKind::kAdd;
  } else if (op == "Concat") {
    node.kind = OpKind::kConcat;
    if (uniform_value(n, "axis", 1) != 1) unsupported("Concat on a non-channel axis");
  } else if (op == "Flatten") {
    node.kind = OpKind::kFlatten;
    if (uniform_value(n, "axis", 1) != 1) unsupported("Flatten with axis != 1");
  } else if (op == "Softmax") {
    node.kind = OpKind::kSoftmax;
  } else {
    unsupported(op);
  }
  return node;
}

}  // namespace

CompGraph import_onnx_bytes(std::string_view bytes, std::optional<std::int64_t> batch) {
  WireReader r(bytes);
  std::optional<GraphProto> graph;
  while (!r.done()) {
    auto [field, wt] = r.tag();
    if (field == 7 && wt == kLengthDelimited) {
      graph = parse_graph(r.bytes());
    } else {
      r.skip(wt);
    }
  }
  if (!graph) malformed("model has no graph");

  std::vector<std::int64_t> input_dims;
  for (const auto& [name, dims] : graph->inputs) {
    if (!graph->initializers.count(name)) {
      input_dims = dims;
      break;
    }
  }
  if (input_dims.size() != 4) {
    throw Error(ErrorCode::kShapeMismatch, "ONNX data input must be rank 4 (NCHW)");
  }
  if (batch) {
    if (*batch < 1) throw Error(ErrorCode::kUsage, "batch must be positive");
    input_dims[0] = *batch;
  } else if (input_dims[0] < 1) {
    input_dims[0] = 1;
  }
  for (std::size_t d = 1; d < 4; ++d) {
    if (input_dims[d] < 1) throw Error(ErrorCode::kShapeMismatch, "symbolic spatial dims are not supported");
  }

  CompGraph g;
  g.batch_size = input_dims[0];
  g.dtype_bytes = 4;
  std::map<std::string, std::int64_t> producer;
  for (std::size_t i = 0; i < graph->nodes.size(); ++i) {
    const auto id = static_cast<std::int64_t>(i);
    g.nodes.push_back(convert(*graph, graph->nodes[i], id));
    for (const auto& out : graph->nodes[i].outputs) producer[out] = id;
  }
  for (std::size_t i = 0; i < graph->nodes.size(); ++i) {
    for (const auto& in : graph->nodes[i].inputs) {
      auto it = producer.find(in);
      if (it != producer.end()) g.edges.push_back(Edge{it->second, static_cast<std::int64_t>(i), {}});
    }
  }
  return infer_shapes(std::move(g), TensorShape{input_dims});
}

CompGraph import_onnx(const std::filesystem::path& path, std::optional<std::int64_t> batch) {
  return import_onnx_bytes(read_file(path), batch);
}

}  // namespace perfseer
