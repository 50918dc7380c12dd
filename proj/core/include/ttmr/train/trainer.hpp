#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ttmr/backbone/checkpoint.hpp"
#include "ttmr/data/sample.hpp"

namespace ttmr::train {

struct TrainConfig {
  double initial_lr = 1.5e-4;
  double lr_decay = 0.9;
  std::size_t decay_every = 5;  // epochs
  std::size_t max_epochs = 20;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  /// Stops after this many optimizer steps when set; the partial epoch is still logged.
  std::optional<std::size_t> max_steps;
  backbone::StrategyConfig strategy;
  std::filesystem::path data;  // dataset directory (manifest.json lives there)

  /// The paper-scale protocol: 50 epochs, batch 8.
  static TrainConfig paper(backbone::StrategyConfig strategy, std::uint64_t seed);
  /// Desk scale: 20 epochs, batch 4.
  static TrainConfig desk(backbone::StrategyConfig strategy, std::uint64_t seed);

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// initial_lr * lr_decay^floor(epoch / decay_every).
double learning_rate(const TrainConfig& cfg, std::size_t epoch);

struct StepRecord {
  std::uint64_t step = 0;  // 1-based optimizer step
  std::size_t epoch = 0;   // 0-based
  double lr = 0.0;
  double loss = 0.0;       // batch mean l1
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0-based
  double lr = 0.0;
  double train_loss = 0.0;  // mean of the epoch's batch losses
  double val_psnr = 0.0;
  double val_ssim = 0.0;
  double train_seconds = 0.0;
  double val_seconds = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;

  /// Index into `epochs` of the highest validation PSNR (first on ties); nullopt when empty.
  std::optional<std::size_t> best_epoch_index() const;

  /// Columns: step, epoch, lr, loss.
  void write_csv(const std::filesystem::path& path) const;
  nlohmann::json to_json() const;
  void write_json(const std::filesystem::path& path) const;
};

struct TrainResult {
  backbone::Checkpoint final;
  backbone::Checkpoint best;
  TrainLog log;
};

struct TrainOptions {
  /// When set, writes checkpoints/epoch_<NNN>, checkpoints/best, checkpoints/final, train_log.csv
  /// and train_log.json below this directory.
  std::optional<std::filesystem::path> out_dir;
  /// Continue from this checkpoint (epoch boundary) instead of the seeded initialisation.
  std::optional<backbone::Checkpoint> resume;
  /// Called after every epoch with the record just appended.
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Mean PSNR and SSIM of the model over `val`.
std::pair<double, double> validate(const backbone::Model<float>& model, const std::vector<data::DataSample>& val);

/// Computes the batch-mean l1 loss and its parameter gradients. Per-sample gradients are summed in
/// batch order, so the result does not depend on the worker count.
template <typename T>
double loss_and_gradients(const backbone::Model<T>& model, const std::vector<const data::Sample<T>*>& batch,
                          std::vector<Tensor<T>>& grads);

/// Minimises the mean l1 between reconstruction and ground truth with Adam over shuffled
/// mini-batches. Throws std::runtime_error on a non-finite loss.
TrainResult train(const TrainConfig& cfg, const std::vector<data::DataSample>& train_set,
                  const std::vector<data::DataSample>& val_set, const TrainOptions& options = {});

/// Loads the dataset named in `cfg.data` and trains on its train/val splits.
TrainResult train(const TrainConfig& cfg, const TrainOptions& options = {});

/// Sample order for an epoch: a permutation of [0, n) seeded from (seed, epoch).
std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n);

}  // namespace ttmr::train
