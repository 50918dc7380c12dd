#include "ttmr/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ttmr/autodiff/ops.hpp"
#include "ttmr/data/dataset.hpp"
#include "ttmr/metrics/report.hpp"
#include "ttmr/util/parallel.hpp"
#include "ttmr/util/rng.hpp"

namespace ttmr::train {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string epoch_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03zu", epoch);
  return buf;
}

}  // namespace

TrainConfig TrainConfig::paper(backbone::StrategyConfig strategy, std::uint64_t seed) {
  TrainConfig c;
  c.max_epochs = 50;
  c.batch_size = 8;
  c.seed = seed;
  c.strategy = std::move(strategy);
  return c;
}

TrainConfig TrainConfig::desk(backbone::StrategyConfig strategy, std::uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  c.strategy = std::move(strategy);
  return c;
}

void TrainConfig::validate() const {
  if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) throw std::invalid_argument("initial_lr must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw std::invalid_argument("lr_decay must lie in (0, 1]");
  if (decay_every == 0) throw std::invalid_argument("decay_every must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (max_steps && *max_steps == 0) throw std::invalid_argument("max_steps must be positive when set");
  strategy.validate();
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j{{"initial_lr", initial_lr},       {"lr_decay", lr_decay},
                   {"decay_every", decay_every},     {"max_epochs", max_epochs},
                   {"batch_size", batch_size},       {"seed", seed},
                   {"strategy", strategy.to_json()}, {"data", data.string()}};
  j["max_steps"] = max_steps ? nlohmann::json(*max_steps) : nlohmann::json(nullptr);
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.initial_lr = j.value("initial_lr", c.initial_lr);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.decay_every = j.value("decay_every", c.decay_every);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  if (j.contains("max_steps") && !j.at("max_steps").is_null()) c.max_steps = j.at("max_steps").get<std::size_t>();
  c.strategy = backbone::StrategyConfig::from_json(j.at("strategy"));
  c.data = j.value("data", std::string());
  c.validate();
  return c;
}

double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
  return cfg.initial_lr * std::pow(cfg.lr_decay, static_cast<double>(epoch / cfg.decay_every));
}

std::optional<std::size_t> TrainLog::best_epoch_index() const {
  if (epochs.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < epochs.size(); ++i)
    if (epochs[i].val_psnr > epochs[best].val_psnr) best = i;
  return best;
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << "step,epoch,lr,loss\n";
  for (const auto& s : steps) os << s.step << ',' << s.epoch << ',' << fmt(s.lr) << ',' << fmt(s.loss) << '\n';
}

nlohmann::json TrainLog::to_json() const {
  nlohmann::json ep = nlohmann::json::array();
  for (const auto& e : epochs) {
    ep.push_back({{"epoch", e.epoch},
                  {"lr", e.lr},
                  {"train_loss", e.train_loss},
                  {"val_psnr", e.val_psnr},
                  {"val_ssim", e.val_ssim},
                  {"train_seconds", e.train_seconds},
                  {"val_seconds", e.val_seconds}});
  }
  nlohmann::json j{{"steps", steps.size()}, {"epochs", ep}};
  const auto best = best_epoch_index();
  j["best_epoch"] = best ? nlohmann::json(epochs[*best].epoch) : nlohmann::json(nullptr);
  if (!steps.empty()) {
    j["first_loss"] = steps.front().loss;
    j["last_loss"] = steps.back().loss;
  }
  return j;
}

void TrainLog::write_json(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << to_json().dump(2) << '\n';
}

std::pair<double, double> validate(const backbone::Model<float>& model, const std::vector<data::DataSample>& val) {
  if (val.empty()) throw std::invalid_argument("validation split is empty");
  const auto report = metrics::evaluate(model, val);
  return {report.psnr.mean, report.ssim.mean};
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

template <typename T>
double loss_and_gradients(const backbone::Model<T>& model, const std::vector<const data::Sample<T>*>& batch,
                          std::vector<Tensor<T>>& grads) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const std::size_t n = batch.size();
  std::vector<std::vector<Tensor<T>>> per_sample(n);
  std::vector<double> losses(n, 0.0);
  const T weight = T{1} / static_cast<T>(n);
  parallel_for(n, [&](std::size_t i) {
    per_sample[i] = model.params().zeros_like();
    ad::Graph<T> g;
    const auto p = ad::bind(g, model.params(), &per_sample[i]);
    const auto pred = model.forward(g, p, *batch[i]);
    const ad::Var loss = ad::l1_loss(g, pred.output, g.constant(batch[i]->y.tensor()));
    losses[i] = static_cast<double>(g.value(loss)[0]);
    g.backward(loss, weight);
  });
  grads = std::move(per_sample[0]);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t k = 0; k < grads.size(); ++k) {
      auto& dst = grads[k];
      const auto& src = per_sample[i][k];
      for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += src[e];
    }
  }
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(n);
}

TrainResult train(const TrainConfig& cfg, const std::vector<data::DataSample>& train_set,
                  const std::vector<data::DataSample>& val_set, const TrainOptions& options) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("training split is empty");
  if (val_set.empty()) throw std::invalid_argument("validation split is empty");

  backbone::Checkpoint state = options.resume ? *options.resume : backbone::Checkpoint::initial(cfg.strategy);
  if (state.config.to_json() != cfg.strategy.to_json()) {
    throw std::invalid_argument("resume checkpoint was trained with a different strategy configuration");
  }
  state.extra["train_seed"] = cfg.seed;

  std::optional<std::filesystem::path> ckpt_dir;
  if (options.out_dir) {
    ckpt_dir = *options.out_dir / "checkpoints";
    std::filesystem::create_directories(*ckpt_dir);
  }

  TrainResult result;
  // The best checkpoint starts as the incoming state so a zero-epoch run still has one.
  result.best = state;
  double best_psnr = state.extra.value("best_val_psnr", -std::numeric_limits<double>::infinity());
  if (options.resume && state.extra.contains("best_epoch") && ckpt_dir) {
    const auto best_path = *ckpt_dir / "best";
    if (std::filesystem::exists(best_path.string() + ".json")) result.best = backbone::Checkpoint::load(best_path);
  }
  if (!options.resume && ckpt_dir) state.save(*ckpt_dir / epoch_name(0));

  backbone::Model<float> model(cfg.strategy, state.params);
  bool stop = false;
  for (std::size_t epoch = state.epoch; epoch < cfg.max_epochs && !stop; ++epoch) {
    const double lr = learning_rate(cfg, epoch);
    const auto order = epoch_order(cfg.seed, epoch, train_set.size());
    const auto t0 = Clock::now();
    double loss_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<const data::DataSample*> batch;
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&train_set[order[i]]);
      std::vector<Tensor<float>> grads;
      const double loss = loss_and_gradients(model, batch, grads);
      if (!std::isfinite(loss)) {
        std::ostringstream ids;
        for (const auto* s : batch) ids << (ids.tellp() > 0 ? "," : "") << s->id;
        throw std::runtime_error("non-finite training loss at step " + std::to_string(state.adam.step + 1) +
                                 " (epoch " + std::to_string(epoch) + ", lr " + fmt(lr) + ", batch " + ids.str() +
                                 ")");
      }
      ad::adam_step(model.params(), std::span<const Tensor<float>>(grads), state.adam, lr);
      result.log.steps.push_back({state.adam.step, epoch, lr, loss});
      loss_total += loss;
      ++batches;
      if (cfg.max_steps && result.log.steps.size() >= *cfg.max_steps) {
        stop = true;
        break;
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_total / static_cast<double>(batches);
    rec.train_seconds = seconds_since(t0);
    const auto t1 = Clock::now();
    std::tie(rec.val_psnr, rec.val_ssim) = validate(model, val_set);
    rec.val_seconds = seconds_since(t1);
    result.log.epochs.push_back(rec);

    state.params = model.params();
    state.epoch = epoch + 1;
    const bool improved = rec.val_psnr > best_psnr;
    if (improved) {
      best_psnr = rec.val_psnr;
      state.extra["best_val_psnr"] = best_psnr;
      state.extra["best_epoch"] = state.epoch;
    }
    state.extra["val_psnr"] = rec.val_psnr;
    state.extra["val_ssim"] = rec.val_ssim;
    if (improved) result.best = state;
    if (ckpt_dir) {
      state.save(*ckpt_dir / epoch_name(state.epoch));
      if (improved) state.save(*ckpt_dir / "best");
    }
    if (options.on_epoch) options.on_epoch(rec);
  }

  result.final = state;
  if (ckpt_dir) {
    if (!std::filesystem::exists(*ckpt_dir / "best.json")) result.best.save(*ckpt_dir / "best");
    state.save(*ckpt_dir / "final");
    result.log.write_csv(*options.out_dir / "train_log.csv");
    auto summary = result.log.to_json();
    summary["config"] = cfg.to_json();
    std::ofstream os(*options.out_dir / "train_log.json", std::ios::trunc);
    os << summary.dump(2) << '\n';
  }
  return result;
}

TrainResult train(const TrainConfig& cfg, const TrainOptions& options) {
  if (cfg.data.empty()) throw std::invalid_argument("TrainConfig.data names no dataset directory");
  if (!std::filesystem::exists(cfg.data / "manifest.json")) {
    throw std::runtime_error("no dataset manifest at '" + (cfg.data / "manifest.json").string() + "'");
  }
  const auto ds = data::read_dataset(cfg.data);
  return train(cfg, ds.train, ds.val, options);
}

template double loss_and_gradients(const backbone::Model<float>&, const std::vector<const data::Sample<float>*>&,
                                   std::vector<Tensor<float>>&);
template double loss_and_gradients(const backbone::Model<double>&, const std::vector<const data::Sample<double>*>&,
                                   std::vector<Tensor<double>>&);

}  // namespace ttmr::train
