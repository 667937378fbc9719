// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>

#include "perfseer/trainer.hpp"

namespace perfseer {

using nlohmann::json;

namespace {

constexpr std::string_view kFormat = "perfseer-checkpoint";
constexpr int kFormatVersion = 1;

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return s;
}

void put_f64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b, bits >>= 8) out.push_back(static_cast<char>(bits & 0xff));
}

double get_f64(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 7; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(p[b]);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::filesystem::path manifest_path(const std::filesystem::path& bin_path) {
  auto p = bin_path;
  return p.replace_extension(".json");
}

void save_checkpoint(const Predictor& p, const std::filesystem::path& bin_path) {
  const nk::ParameterSet& params = p.model.params();
  std::string blob;
  blob.reserve(params.num_scalars() * 8);
  json layers = json::array();
  std::size_t offset = 0;
  for (nk::ParamId id = 0; id < params.size(); ++id) {
    const auto& v = params.value(id);
    layers.push_back({{"name", params.name(id)}, {"shape", {v.rows(), v.cols()}}, {"offset", offset}});
    for (double x : v.data()) put_f64(blob, x);
    offset += v.size();
  }
  const json norm = feature_norm_to_json(p.norm);
  json manifest = {{"format", kFormat},
                   {"version", kFormatVersion},
                   {"weights", bin_path.filename().string()},
                   {"model", to_json(p.model.config())},
                   {"init_seed", p.init_seed},
                   {"parameters", layers},
                   {"num_scalars", offset},
                   {"feature_norm", norm},
                   {"feature_norm_fnv1a", hex64(fnv1a64(norm.dump()))},
                   {"target_scaler", to_json(p.scaler)},
                   {"train_config", to_json(p.config)},
                   {"data_dir", p.data_dir}};
  write_file(bin_path, blob);
  write_file(manifest_path(bin_path), manifest.dump(2) + "\n");
}

Predictor load_checkpoint(const std::filesystem::path& bin_path) {
  json m;
  try {
    m = json::parse(read_file(manifest_path(bin_path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("checkpoint manifest: ") + e.what());
  }
  try {
    if (m.at("format").get<std::string>() != kFormat || m.at("version").get<int>() != kFormatVersion) {
      throw Error(ErrorCode::kParse, "not a version 1 perfseer checkpoint");
    }
    const json& norm_doc = m.at("feature_norm");
    if (hex64(fnv1a64(norm_doc.dump())) != m.at("feature_norm_fnv1a").get<std::string>()) {
      throw Error(ErrorCode::kParse, "feature normalization hash mismatch");
    }
    const auto init_seed = m.at("init_seed").get<std::uint64_t>();
    Predictor p{SeerNet(seernet_config_from_json(m.at("model")), init_seed),
                feature_norm_from_json(norm_doc),
                target_scaler_from_json(m.at("target_scaler")),
                train_config_from_json(m.at("train_config")),
                init_seed,
                m.at("data_dir").get<std::string>()};

    const std::string blob = read_file(bin_path);
    nk::ParameterSet& params = p.model.params();
    const auto& layers = m.at("parameters");
    if (layers.size() != params.size() || blob.size() != params.num_scalars() * 8) {
      throw Error(ErrorCode::kLengthMismatch, "checkpoint does not match the model layout");
    }
    for (nk::ParamId id = 0; id < params.size(); ++id) {
      const auto& entry = layers[id];
      auto& v = params.mutable_value(id);
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      if (entry.at("name").get<std::string>() != params.name(id) || shape.size() != 2 ||
          shape[0] != v.rows() || shape[1] != v.cols()) {
        throw Error(ErrorCode::kWidthMismatch, "checkpoint layer " + params.name(id) + " does not match");
      }
      const auto offset = entry.at("offset").get<std::size_t>();
      if ((offset + v.size()) * 8 > blob.size()) {
        throw Error(ErrorCode::kLengthMismatch, "checkpoint layer " + params.name(id) + " out of range");
      }
      auto d = v.data();
      for (std::size_t k = 0; k < d.size(); ++k) d[k] = get_f64(blob.data() + (offset + k) * 8);
    }
    if (p.scaler.quantities != p.config.targets || p.scaler.quantities.size() != p.model.config().num_heads) {
      throw Error(ErrorCode::kLengthMismatch, "checkpoint targets do not match the model heads");
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("checkpoint manifest: ") + e.what());
  }
}

}  // namespace perfseer
