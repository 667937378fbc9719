// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Minimal protobuf encoder for hand-built ONNX models in tests.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace perfseer::testing::onnx {

class Message {
 public:
  Message& varint(int field, std::uint64_t v) {
    key(field, 0);
    put_varint(v);
    return *this;
  }
  Message& bytes(int field, const std::string& s) {
    key(field, 2);
    put_varint(s.size());
    buf_ += s;
    return *this;
  }
  Message& sub(int field, const Message& m) { return bytes(field, m.buf_); }
  Message& fixed32(int field, std::uint32_t v) {
    key(field, 5);
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    return *this;
  }
  Message& packed(int field, const std::vector<std::int64_t>& vs) {
    Message inner;
    for (auto v : vs) inner.put_varint(static_cast<std::uint64_t>(v));
    return bytes(field, inner.buf_);
  }
  const std::string& str() const { return buf_; }

 private:
  void key(int field, int wire) { put_varint((static_cast<std::uint64_t>(field) << 3) | wire); }
  void put_varint(std::uint64_t v) {
    while (v >= 0x80) {
      buf_.push_back(static_cast<char>((v & 0x7f) | 0x80));
      v >>= 7;
    }
    buf_.push_back(static_cast<char>(v));
  }
  std::string buf_;
};

inline Message int_attr(const std::string& name, std::int64_t v) {
  return Message().bytes(1, name).varint(3, static_cast<std::uint64_t>(v));
}
inline Message ints_attr(const std::string& name, const std::vector<std::int64_t>& vs) {
  Message m;
  m.bytes(1, name);
  for (auto v : vs) m.varint(8, static_cast<std::uint64_t>(v));
  return m;
}

struct Node {
  std::string op;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<Message> attrs;
};

inline Message node(const Node& n) {
  Message m;
  for (const auto& i : n.inputs) m.bytes(1, i);
  for (const auto& o : n.outputs) m.bytes(2, o);
  m.bytes(4, n.op);
  for (const auto& a : n.attrs) m.sub(5, a);
  return m;
}

inline Message initializer(const std::string& name, const std::vector<std::int64_t>& dims) {
  return Message().packed(1, dims).bytes(8, name);
}

// dims <= 0 become symbolic (dim_param).
inline Message value_info(const std::string& name, const std::vector<std::int64_t>& dims) {
  Message shape;
  for (auto d : dims) {
    shape.sub(1, d > 0 ? Message().varint(1, static_cast<std::uint64_t>(d)) : Message().bytes(2, "N"));
  }
  Message tensor = Message().varint(1, 1).sub(2, shape);
  return Message().bytes(1, name).sub(2, Message().sub(1, tensor));
}

inline std::string model(const std::vector<Node>& nodes,
                         const std::vector<std::pair<std::string, std::vector<std::int64_t>>>& inits,
                         const std::vector<std::int64_t>& input_dims) {
  Message g;
  for (const auto& n : nodes) g.sub(1, node(n));
  g.bytes(2, "test");
  for (const auto& [name, dims] : inits) g.sub(5, initializer(name, dims));
  g.sub(11, value_info("x", input_dims));
  return Message().varint(1, 8).sub(7, g).str();
}

}  // namespace perfseer::testing::onnx
