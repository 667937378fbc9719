// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include "perfseer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "perfseer/adam.hpp"
#include "perfseer/pcgrad.hpp"
#include "perfseer/rng.hpp"

namespace perfseer {

using nlohmann::json;

namespace {

[[noreturn]] void bad_config(const std::string& msg) {
  throw Error(ErrorCode::kParse, "train config: " + msg);
}

}  // namespace

void validate(const TrainConfig& c) {
  if (c.batch_size == 0) bad_config("batch_size must be positive");
  if (!(c.lr_init > 0.0) || !(c.lr_floor > 0.0) || !(c.lr_floor < c.lr_init)) {
    bad_config("need 0 < lr_floor < lr_init");
  }
  if (!(c.lr_decay > 0.0 && c.lr_decay < 1.0)) bad_config("lr_decay must lie in (0, 1)");
  if (c.patience_epochs == 0) bad_config("patience_epochs must be positive");
  if (c.max_epochs == 0) bad_config("max_epochs must be positive");
  if (!(c.improvement_rel >= 0.0)) bad_config("improvement_rel must be non-negative");
  for (std::size_t r : c.split_ratio) {
    if (r == 0) bad_config("split ratios must be positive");
  }
  if (c.targets.empty()) bad_config("at least one target is required");
  if (c.phases.empty()) bad_config("at least one phase is required");
  if (c.hidden == 0 || c.head_hidden == 0) bad_config("hidden widths must be positive");
  for (std::size_t i = 0; i < c.targets.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (c.targets[i] == c.targets[j]) bad_config("duplicate target");
    }
  }
}

json to_json(const TrainConfig& c) {
  json targets = json::array();
  for (Quantity q : c.targets) targets.push_back(std::string(to_string(q)));
  json phases = json::array();
  for (Phase p : c.phases) phases.push_back(std::string(to_string(p)));
  return {{"batch_size", c.batch_size},
          {"lr_init", c.lr_init},
          {"lr_floor", c.lr_floor},
          {"lr_decay", c.lr_decay},
          {"patience_epochs", c.patience_epochs},
          {"max_epochs", c.max_epochs},
          {"improvement_rel", c.improvement_rel},
          {"seed", c.seed},
          {"loss", "mse"},
          {"split_ratio", c.split_ratio},
          {"targets", targets},
          {"phases", phases},
          {"use_pcgrad", c.use_pcgrad},
          {"hidden", c.hidden},
          {"head_hidden", c.head_hidden},
          {"use_synmm", c.use_synmm},
          {"use_gnpb", c.use_gnpb}};
}

TrainConfig train_config_from_json(const json& doc) {
  static const std::vector<std::string> kKeys = {
      "batch_size", "lr_init", "lr_floor", "lr_decay", "patience_epochs", "max_epochs",
      "improvement_rel", "seed", "loss", "split_ratio", "targets", "phases", "use_pcgrad",
      "hidden", "head_hidden", "use_synmm", "use_gnpb"};
  if (!doc.is_object()) bad_config("must be a JSON object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (std::find(kKeys.begin(), kKeys.end(), it.key()) == kKeys.end()) {
      bad_config("unknown key '" + it.key() + "'");
    }
  }
  TrainConfig c;
  try {
    const auto opt = [&](const char* key, auto& out) {
      if (doc.contains(key)) out = doc.at(key).get<std::remove_reference_t<decltype(out)>>();
    };
    opt("batch_size", c.batch_size);
    opt("lr_init", c.lr_init);
    opt("lr_floor", c.lr_floor);
    opt("lr_decay", c.lr_decay);
    opt("patience_epochs", c.patience_epochs);
    opt("max_epochs", c.max_epochs);
    opt("improvement_rel", c.improvement_rel);
    opt("seed", c.seed);
    opt("split_ratio", c.split_ratio);
    opt("use_pcgrad", c.use_pcgrad);
    opt("hidden", c.hidden);
    opt("head_hidden", c.head_hidden);
    opt("use_synmm", c.use_synmm);
    opt("use_gnpb", c.use_gnpb);
    if (doc.contains("loss") && doc.at("loss").get<std::string>() != "mse") {
      bad_config("only the mse loss is supported");
    }
    if (doc.contains("targets")) {
      c.targets.clear();
      for (const auto& t : doc.at("targets")) {
        const auto q = parse_quantity(t.get<std::string>());
        if (!q) bad_config("unknown target '" + t.get<std::string>() + "'");
        c.targets.push_back(*q);
      }
    }
    if (doc.contains("phases")) {
      c.phases.clear();
      for (const auto& t : doc.at("phases")) {
        const auto p = parse_phase(t.get<std::string>());
        if (!p) bad_config("unknown phase '" + t.get<std::string>() + "'");
        c.phases.push_back(*p);
      }
    }
  } catch (const json::exception& e) {
    bad_config(e.what());
  }
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Splitting

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<std::size_t, 3>& ratio) {
  const std::size_t total = ratio[0] + ratio[1] + ratio[2];
  std::array<std::size_t, 3> sizes{};
  std::size_t used = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    sizes[k] = n * ratio[k] / total;
    used += sizes[k];
  }
  for (std::size_t k = 0; used < n; k = (k + 1) % 3, ++used) ++sizes[k];
  return sizes;
}

Split split_indices(std::size_t n, const std::array<std::size_t, 3>& ratio, std::uint64_t seed) {
  for (std::size_t r : ratio) {
    if (r == 0) throw Error(ErrorCode::kTooSmall, "split ratios must be positive");
  }
  const auto sizes = split_sizes(n, ratio);
  if (sizes[0] == 0 || sizes[1] == 0 || sizes[2] == 0) {
    throw Error(ErrorCode::kTooSmall,
                std::to_string(n) + " items cannot fill train, validation and test splits");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  Split s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(sizes[0]));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(sizes[0]),
               perm.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]), perm.end());
  return s;
}

Split split_samples(std::span<const Sample> samples, const std::array<std::size_t, 3>& ratio,
                    std::uint64_t seed, std::span<const Phase> phases) {
  std::vector<std::string> ids;
  std::map<std::string, std::size_t, std::less<>> id_index;
  std::vector<std::size_t> group(samples.size(), SIZE_MAX);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!phases.empty() && std::find(phases.begin(), phases.end(), samples[i].phase) == phases.end()) {
      continue;
    }
    auto [it, inserted] = id_index.emplace(samples[i].graph_id, ids.size());
    if (inserted) ids.push_back(samples[i].graph_id);
    group[i] = it->second;
  }
  if (ids.empty()) throw Error(ErrorCode::kTooSmall, "dataset is empty");
  const Split by_graph = split_indices(ids.size(), ratio, seed);
  std::vector<int> where(ids.size(), -1);
  for (std::size_t g : by_graph.train) where[g] = 0;
  for (std::size_t g : by_graph.val) where[g] = 1;
  for (std::size_t g : by_graph.test) where[g] = 2;
  Split s;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (group[i] == SIZE_MAX) continue;
    switch (where[group[i]]) {
      case 0: s.train.push_back(i); break;
      case 1: s.val.push_back(i); break;
      default: s.test.push_back(i); break;
    }
  }
  return s;
}

std::optional<SplitName> parse_split_name(std::string_view name) {
  if (name == "train") return SplitName::kTrain;
  if (name == "val") return SplitName::kVal;
  if (name == "test") return SplitName::kTest;
  return std::nullopt;
}

const std::vector<std::size_t>& part(const Split& split, SplitName name) {
  switch (name) {
    case SplitName::kTrain: return split.train;
    case SplitName::kVal: return split.val;
    case SplitName::kTest: return split.test;
  }
  return split.test;
}

// ---------------------------------------------------------------------------
// Schedule

PlateauScheduler::PlateauScheduler(const TrainConfig& c)
    : lr_(c.lr_init),
      floor_(c.lr_floor),
      decay_(c.lr_decay),
      rel_(c.improvement_rel),
      patience_(c.patience_epochs),
      best_(std::numeric_limits<double>::infinity()) {}

bool PlateauScheduler::observe(double val_loss) {
  const bool improved = std::isinf(best_) ? val_loss < best_ : val_loss < best_ - rel_ * std::abs(best_);
  if (improved) {
    best_ = val_loss;
    bad_epochs_ = 0;
    return true;
  }
  if (++bad_epochs_ >= patience_) {
    lr_ = std::max(lr_ * decay_, floor_);
    bad_epochs_ = 0;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Targets

TargetScaler TargetScaler::fit(std::span<const Sample> samples, std::span<const std::size_t> indices,
                               std::vector<Quantity> quantities) {
  if (indices.empty()) throw Error(ErrorCode::kTooSmall, "no samples to fit target scaling");
  TargetScaler s;
  s.quantities = std::move(quantities);
  for (Quantity q : s.quantities) {
    double sum = 0.0;
    for (std::size_t i : indices) {
      const double y = samples[i].labels.get(q);
      if (!(y > 0.0)) {
        throw Error(ErrorCode::kZeroTarget, "target " + std::string(to_string(q)) + " of graph " +
                                                samples[i].graph_id + " is not positive");
      }
      sum += std::log(y);
    }
    const double mean = sum / static_cast<double>(indices.size());
    double sq = 0.0;
    for (std::size_t i : indices) {
      const double d = std::log(samples[i].labels.get(q)) - mean;
      sq += d * d;
    }
    const double sd = std::sqrt(sq / static_cast<double>(indices.size()));
    s.mean.push_back(mean);
    s.std.push_back(sd > 0.0 ? sd : 1.0);
  }
  return s;
}

double TargetScaler::transform(std::size_t task, double y) const {
  if (!(y > 0.0)) throw Error(ErrorCode::kZeroTarget, "targets must be positive");
  return (std::log(y) - mean.at(task)) / std.at(task);
}

double TargetScaler::inverse(std::size_t task, double z) const {
  return std::exp(z * std.at(task) + mean.at(task));
}

json to_json(const TargetScaler& s) {
  json q = json::array();
  for (Quantity x : s.quantities) q.push_back(std::string(to_string(x)));
  return {{"quantities", q}, {"log_mean", s.mean}, {"log_std", s.std}};
}

TargetScaler target_scaler_from_json(const json& doc) {
  TargetScaler s;
  try {
    for (const auto& name : doc.at("quantities")) {
      const auto q = parse_quantity(name.get<std::string>());
      if (!q) throw Error(ErrorCode::kParse, "unknown quantity " + name.dump());
      s.quantities.push_back(*q);
    }
    s.mean = doc.at("log_mean").get<std::vector<double>>();
    s.std = doc.at("log_std").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("target scaler: ") + e.what());
  }
  if (s.mean.size() != s.quantities.size() || s.std.size() != s.quantities.size()) {
    throw Error(ErrorCode::kLengthMismatch, "target scaler arrays differ in length");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Prediction

std::vector<double> Predictor::predict(const PerfGraph& graph) const {
  if (!norm.fitted) throw Error(ErrorCode::kNotFitted, "model has no fitted feature normalization");
  const auto z = model.predict_all(normalize(graph, norm));
  std::vector<double> y(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) y[k] = scaler.inverse(k, z[k]);
  return y;
}

namespace {

double sample_loss(const SeerNet& model, const GraphTensors& g, std::span<const double> z) {
  const auto pred = model.predict_all(g);
  double loss = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) loss += (pred[k] - z[k]) * (pred[k] - z[k]);
  return loss / static_cast<double>(pred.size());
}

std::vector<double> normalized_targets(const TargetScaler& s, const Sample& sample) {
  std::vector<double> z;
  for (std::size_t k = 0; k < s.quantities.size(); ++k) {
    z.push_back(s.transform(k, sample.labels.get(s.quantities[k])));
  }
  return z;
}

}  // namespace

double normalized_loss(const Predictor& p, std::span<const Sample> samples,
                       std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error(ErrorCode::kTooSmall, "no samples");
  double total = 0.0;
  for (std::size_t i : indices) {
    total += sample_loss(p.model, normalize(samples[i].graph, p.norm), normalized_targets(p.scaler, samples[i]));
  }
  return total / static_cast<double>(indices.size());
}

std::vector<PredictionRow> predict_rows(const Predictor& p, std::span<const Sample> samples,
                                        std::span<const std::size_t> indices) {
  std::vector<PredictionRow> rows;
  for (std::size_t i : indices) {
    const Sample& s = samples[i];
    const auto y = p.predict(s.graph);
    for (std::size_t k = 0; k < y.size(); ++k) {
      const Quantity q = p.scaler.quantities[k];
      rows.push_back({s.graph_id, metric_name(s.phase, q), s.labels.get(q), y[k]});
    }
  }
  return rows;
}

MetricsReport evaluate(const Predictor& p, std::span<const Sample> samples,
                       std::span<const std::size_t> indices) {
  return report_from_rows(predict_rows(p, samples, indices));
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Prepared {
  std::vector<GraphTensors> tensors;  // by sample index; empty where unused
  std::vector<std::vector<double>> z;
};

std::vector<nk::Tensor2D> snapshot(const nk::ParameterSet& params) {
  std::vector<nk::Tensor2D> out;
  for (nk::ParamId id = 0; id < params.size(); ++id) out.push_back(params.value(id));
  return out;
}

void restore(nk::ParameterSet& params, const std::vector<nk::Tensor2D>& values) {
  for (nk::ParamId id = 0; id < params.size(); ++id) params.mutable_value(id) = values[id];
}

void zero(nk::Gradients& g) {
  for (auto& t : g) t.fill(0.0);
}

class Trainer {
 public:
  Trainer(const TrainConfig& config, std::span<const Sample> samples, const TrainHooks& hooks)
      : c_(config), samples_(samples), hooks_(hooks) {}

  TrainResult run();

 private:
  double validation_loss(const SeerNet& model) const;
  double train_epoch(Predictor& p, nk::AdamState& adam, double lr);
  void batch_step(Predictor& p, std::span<const std::size_t> batch, nk::AdamState& adam, double lr,
                  double& loss_sum);

  const TrainConfig& c_;
  std::span<const Sample> samples_;
  const TrainHooks& hooks_;
  Split split_;
  Prepared data_;
  std::uint64_t order_seed_ = 0;
  std::uint64_t pcgrad_seed_ = 0;
  std::uint64_t step_ = 0;
  std::vector<nk::ParamId> shared_;
  nk::Gradients grads_;
  std::vector<nk::Gradients> task_grads_;
  std::unique_ptr<Rng> order_rng_;
};

double Trainer::validation_loss(const SeerNet& model) const {
  double total = 0.0;
  for (std::size_t i : split_.val) total += sample_loss(model, data_.tensors[i], data_.z[i]);
  return total / static_cast<double>(split_.val.size());
}

void Trainer::batch_step(Predictor& p, std::span<const std::size_t> batch, nk::AdamState& adam,
                         double lr, double& loss_sum) {
  const std::size_t tasks = c_.targets.size();
  const bool surgery = c_.use_pcgrad && tasks > 1;
  zero(grads_);
  for (auto& g : task_grads_) zero(g);
  nk::Tensor2D upstream(1, 1, 1.0 / static_cast<double>(batch.size()));
  for (std::size_t i : batch) {
    nk::Tape t(p.model.params());
    const auto out = p.model.forward(t, data_.tensors[i]);
    std::vector<nk::Var> losses;
    double sample = 0.0;
    for (std::size_t k = 0; k < tasks; ++k) {
      losses.push_back(nk::mse_loss(t, out.heads[k], t.constant(nk::Tensor2D(1, 1, data_.z[i][k]))));
      sample += t.value(losses.back())(0, 0);
    }
    loss_sum += sample / static_cast<double>(tasks);
    if (surgery) {
      for (std::size_t k = 0; k < tasks; ++k) t.backward(losses[k], upstream, task_grads_[k]);
    } else {
      nk::Var total = losses[0];
      for (std::size_t k = 1; k < tasks; ++k) total = nk::add(t, total, losses[k]);
      t.backward(total, upstream, grads_);
    }
  }
  if (surgery) {
    TaskGradients flat(tasks);
    for (std::size_t k = 0; k < tasks; ++k) {
      for (nk::ParamId id : shared_) {
        const auto d = task_grads_[k][id].data();
        flat[k].insert(flat[k].end(), d.begin(), d.end());
      }
    }
    const auto combined = project_conflicts(flat, derive_seed(pcgrad_seed_, step_));
    std::size_t offset = 0;
    for (nk::ParamId id : shared_) {
      auto d = grads_[id].data();
      std::copy_n(combined.begin() + static_cast<std::ptrdiff_t>(offset), d.size(), d.begin());
      offset += d.size();
    }
    for (nk::ParamId id = 0; id < grads_.size(); ++id) {
      if (p.model.is_shared(id)) continue;
      auto d = grads_[id].data();
      for (std::size_t k = 0; k < tasks; ++k) {
        const auto s = task_grads_[k][id].data();
        for (std::size_t j = 0; j < d.size(); ++j) d[j] += s[j];
      }
    }
  }
  ++step_;
  nk::adam_step(p.model.params(), grads_, adam, lr);
}

double Trainer::train_epoch(Predictor& p, nk::AdamState& adam, double lr) {
  std::vector<std::size_t> order = split_.train;
  order_rng_->shuffle(std::span<std::size_t>(order));
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += c_.batch_size) {
    const std::size_t len = std::min(c_.batch_size, order.size() - start);
    batch_step(p, std::span<const std::size_t>(order).subspan(start, len), adam, lr, loss_sum);
  }
  return loss_sum / static_cast<double>(order.size());
}

TrainResult Trainer::run() {
  validate(c_);
  split_ = split_samples(samples_, c_.split_ratio, c_.seed, c_.phases);

  std::vector<const PerfGraph*> train_graphs;
  for (std::size_t i : split_.train) train_graphs.push_back(&samples_[i].graph);
  const FeatureNorm norm = fit_feature_norm(train_graphs);
  const TargetScaler scaler = TargetScaler::fit(samples_, split_.train, c_.targets);

  data_.tensors.resize(samples_.size());
  data_.z.resize(samples_.size());
  for (const auto* part : {&split_.train, &split_.val}) {
    for (std::size_t i : *part) {
      data_.tensors[i] = normalize(samples_[i].graph, norm);
      data_.z[i] = normalized_targets(scaler, samples_[i]);
    }
  }

  SeerNetConfig mc;
  mc.hidden = c_.hidden;
  mc.head_hidden = c_.head_hidden;
  mc.num_heads = c_.targets.size();
  mc.use_synmm = c_.use_synmm;
  mc.use_gnpb = c_.use_gnpb;
  const std::uint64_t init_seed = derive_seed(c_.seed, 1);
  Predictor p{SeerNet(mc, init_seed), norm, scaler, c_, init_seed, {}};
  order_rng_ = std::make_unique<Rng>(derive_seed(c_.seed, 2));
  pcgrad_seed_ = derive_seed(c_.seed, 3);

  nk::ParameterSet& params = p.model.params();
  for (nk::ParamId id = 0; id < params.size(); ++id) {
    if (p.model.is_shared(id)) shared_.push_back(id);
  }
  grads_ = params.zeros_like();
  if (c_.use_pcgrad && c_.targets.size() > 1) task_grads_.assign(c_.targets.size(), params.zeros_like());
  nk::AdamState adam = nk::make_adam_state(params);

  PlateauScheduler sched(c_);
  TrainResult result{p, {}, 0, std::numeric_limits<double>::infinity(), split_};
  auto best = snapshot(params);
  const auto override_loss = [&](std::size_t epoch, double measured) {
    return hooks_.val_loss_override ? hooks_.val_loss_override(epoch, measured) : measured;
  };
  const auto diverged = [&](const std::string& why) {
    auto good = std::make_shared<TrainResult>(result);
    restore(good->predictor.model.params(), best);
    return TrainingDiverged("training diverged: " + why, std::move(good));
  };

  sched.set_baseline(override_loss(0, validation_loss(p.model)));
  for (std::size_t epoch = 1; epoch <= c_.max_epochs; ++epoch) {
    const double lr = sched.lr();
    EpochRecord rec{epoch, lr, 0.0, 0.0};
    try {
      rec.train_loss = train_epoch(p, adam, lr);
      rec.val_loss = override_loss(epoch, validation_loss(p.model));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonFinite) throw;
      throw diverged(std::string("epoch ") + std::to_string(epoch) + ": " + e.what());
    }
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
      throw diverged("non-finite loss at epoch " + std::to_string(epoch));
    }
    result.history.push_back(rec);
    if (hooks_.on_epoch) hooks_.on_epoch(rec);
    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      best = snapshot(params);
    }
    sched.observe(rec.val_loss);
  }
  restore(params, best);
  result.predictor = std::move(p);
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& config, std::span<const Sample> samples, const TrainHooks& hooks) {
  Trainer t(config, samples, hooks);
  return t.run();
}

nlohmann::json history_to_json(std::span<const EpochRecord> history) {
  json arr = json::array();
  for (const auto& r : history) {
    arr.push_back({{"epoch", r.epoch}, {"lr", r.lr}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss}});
  }
  return arr;
}

}  // namespace perfseer
