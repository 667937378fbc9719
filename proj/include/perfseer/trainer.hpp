// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "perfseer/dataset.hpp"
#include "perfseer/error.hpp"
#include "perfseer/featurize.hpp"
#include "perfseer/metrics.hpp"
#include "perfseer/seernet.hpp"

namespace perfseer {

struct TrainConfig {
  std::size_t batch_size = 128;
  double lr_init = 1e-3;
  double lr_floor = 1e-6;
  double lr_decay = 0.5;
  std::size_t patience_epochs = 5;
  std::size_t max_epochs = 500;
  // An epoch improves when val < best - improvement_rel * |best|.
  double improvement_rel = 1e-6;
  std::uint64_t seed = 0;
  std::array<std::size_t, 3> split_ratio{2, 1, 1};
  // One prediction head per quantity; every phase shares the heads.
  std::vector<Quantity> targets{Quantity::kTime};
  std::vector<Phase> phases{Phase::kInfer};
  bool use_pcgrad = false;
  std::size_t hidden = 256;
  std::size_t head_hidden = 256;
  bool use_synmm = true;
  bool use_gnpb = true;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& config);
nlohmann::json to_json(const TrainConfig& config);
// Missing keys keep defaults. "loss" is accepted only as "mse".
TrainConfig train_config_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Splitting

// Floor of each share, then the remainder handed out one at a time in
// train, val, test order.
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<std::size_t, 3>& ratio);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Seeded shuffle of 0..n-1 cut into split_sizes. Throws TooSmall if any
// part is empty.
Split split_indices(std::size_t n, const std::array<std::size_t, 3>& ratio, std::uint64_t seed);

// Splits by graph id so every phase of one graph lands in the same part.
// Only samples whose phase is in `phases` (all, when empty) are assigned.
// Returned indices refer to `samples`, in ascending order.
Split split_samples(std::span<const Sample> samples, const std::array<std::size_t, 3>& ratio,
                    std::uint64_t seed, std::span<const Phase> phases = {});

enum class SplitName { kTrain, kVal, kTest };
std::optional<SplitName> parse_split_name(std::string_view name);
const std::vector<std::size_t>& part(const Split& split, SplitName name);

// ---------------------------------------------------------------------------
// Schedule

/// Halves the learning rate after `patience_epochs` consecutive epochs
/// without improvement on the best validation loss, never below the floor.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(const TrainConfig& config);

  // Loss the first epoch has to beat.
  void set_baseline(double val_loss) { best_ = val_loss; }
  double lr() const noexcept { return lr_; }
  // Feeds one epoch's validation loss; updates the rate for the next epoch.
  // Returns true when the epoch improved.
  bool observe(double val_loss);

 private:
  double lr_;
  double floor_;
  double decay_;
  double rel_;
  std::size_t patience_;
  double best_;
  std::size_t bad_epochs_ = 0;
};

// ---------------------------------------------------------------------------
// Targets

/// Standardizes log(y) per target quantity.
struct TargetScaler {
  std::vector<Quantity> quantities;
  std::vector<double> mean;
  std::vector<double> std;

  static TargetScaler fit(std::span<const Sample> samples, std::span<const std::size_t> indices,
                          std::vector<Quantity> quantities);
  double transform(std::size_t task, double y) const;
  double inverse(std::size_t task, double z) const;

  bool operator==(const TargetScaler&) const = default;
};

nlohmann::json to_json(const TargetScaler& s);
TargetScaler target_scaler_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Fitted model bundle

struct Predictor {
  SeerNet model;
  FeatureNorm norm;
  TargetScaler scaler;
  TrainConfig config;
  std::uint64_t init_seed = 0;
  std::string data_dir;

  // Physical-unit prediction for every target, in config.targets order.
  // Throws NotFitted when the feature normalizer was never fitted.
  std::vector<double> predict(const PerfGraph& graph) const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  Predictor predictor;  // parameters of the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // argmin of validation loss over completed epochs
  double best_val_loss = 0.0;
  Split split;
};

struct TrainHooks {
  // Replaces the measured validation loss of an epoch (used to exercise the
  // schedule).
  std::function<double(std::size_t epoch, double measured)> val_loss_override;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Thrown when a loss or activation turns non-finite; carries the best
/// result reached before the failure.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& message, std::shared_ptr<const TrainResult> last_good)
      : Error(ErrorCode::kDivergedLoss, message), last_good_(std::move(last_good)) {}
  const TrainResult& last_good() const { return *last_good_; }

 private:
  std::shared_ptr<const TrainResult> last_good_;
};

// Samples whose phase is not in config.phases are left out of every split.
// Split indices in the result refer to `samples`.
TrainResult train(const TrainConfig& config, std::span<const Sample> samples,
                  const TrainHooks& hooks = {});

// Mean over samples of the per-task mean squared error in normalized space.
double normalized_loss(const Predictor& p, std::span<const Sample> samples,
                       std::span<const std::size_t> indices);

// One row per (sample, target) in index order.
std::vector<PredictionRow> predict_rows(const Predictor& p, std::span<const Sample> samples,
                                        std::span<const std::size_t> indices);
MetricsReport evaluate(const Predictor& p, std::span<const Sample> samples,
                       std::span<const std::size_t> indices);

// ---------------------------------------------------------------------------
// Checkpoints: raw little-endian float64 parameters in `<name>.bin`, and a
// JSON manifest next to it (`<name>.json`).

std::filesystem::path manifest_path(const std::filesystem::path& bin_path);
void save_checkpoint(const Predictor& p, const std::filesystem::path& bin_path);
Predictor load_checkpoint(const std::filesystem::path& bin_path);

// 64-bit FNV-1a over a byte string.
std::uint64_t fnv1a64(std::string_view bytes);

nlohmann::json history_to_json(std::span<const EpochRecord> history);

}  // namespace perfseer
