#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

#include "pgm.hpp"
#include "ttmr/backbone/checkpoint.hpp"
#include "ttmr/data/dataset.hpp"
#include "ttmr/io/container.hpp"
#include "ttmr/kspace/acquisition.hpp"
#include "ttmr/metrics/metrics.hpp"
#include "ttmr/metrics/report.hpp"
#include "ttmr/train/suite.hpp"
#include "ttmr/train/trainer.hpp"

namespace fs = std::filesystem;

namespace ttmr::tools {

namespace {

// Sampled k-space columns of a reconstruction must match the measurements.
constexpr double kDcTolerance = 1e-6;

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << j.dump(2) << '\n';
}

backbone::Checkpoint load_checkpoint(const fs::path& path, const std::optional<std::string>& expected) {
  auto ckpt = backbone::Checkpoint::load(path);
  if (expected && backbone::strategy_from_string(*expected) != ckpt.config.strategy) {
    throw std::invalid_argument("checkpoint '" + path.string() + "' holds strategy '" +
                                backbone::to_string(ckpt.config.strategy) + "', not '" + *expected + "'");
  }
  return ckpt;
}

/// Resolves <data>/<split>/<id>.ttmt into its parts.
data::DataSample load_sample(const fs::path& path) {
  if (path.extension() != ".ttmt") throw std::invalid_argument("sample path must name a <split>/<id>.ttmt file");
  const auto split = data::split_from_string(path.parent_path().filename().string());
  const auto dir = path.parent_path().parent_path();
  std::uint64_t id = 0;
  try {
    id = std::stoull(path.stem().string());
  } catch (const std::exception&) {
    throw std::invalid_argument("sample file name '" + path.filename().string() + "' is not a numeric id");
  }
  return data::read_sample(dir.empty() ? fs::path(".") : dir, split, id);
}

}  // namespace

int gen_data(const GenDataOptions& o) {
  data::MaskConfig mask{o.af, o.center_frac, o.noise_sigma};
  const auto manifest = data::SplitManifest::make(o.count, o.val, o.reference, o.test, o.size, o.seed, mask);
  const auto ds = data::build_dataset(manifest);
  data::write_dataset(ds, o.out);
  std::cerr << "wrote " << ds.train.size() << "/" << ds.val.size() << "/" << ds.reference_pool.size() << "/"
            << ds.test.size() << " (train/val/reference/test) " << o.size << "x" << o.size << " samples to "
            << o.out << "\n";
  return 0;
}

int train(const TrainOptions& o) {
  const auto strategy = backbone::strategy_from_string(o.strategy);
  auto cfg = train::TrainConfig::desk(backbone::StrategyConfig::make(strategy, o.seed), o.seed);
  cfg.max_epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.initial_lr = o.lr;
  cfg.max_steps = o.max_steps;
  cfg.data = o.data;
  cfg.validate();

  train::TrainOptions opts;
  opts.out_dir = o.out;
  if (o.resume) opts.resume = load_checkpoint(*o.resume, o.strategy);
  opts.on_epoch = [](const train::EpochRecord& e) {
    std::cerr << "epoch " << e.epoch << " lr " << e.lr << " loss " << e.train_loss << " val " << e.val_psnr
              << " dB / " << e.val_ssim << "\n";
  };
  fs::create_directories(o.out);
  write_json(o.out / "config.json", cfg.to_json());
  const auto result = train::train(cfg, opts);
  std::cerr << "final checkpoint after " << result.final.epoch << " epochs in " << (o.out / "checkpoints") << "\n";
  return 0;
}

int eval(const EvalOptions& o) {
  const auto split = data::split_from_string(o.split);
  const auto ds = data::read_dataset(o.data);
  const auto& samples = ds.split(split);
  fs::create_directories(o.out);

  std::vector<metrics::MetricReport> reports;
  std::map<std::string, int> seen;
  auto emit = [&](metrics::MetricReport r) {
    const int n = ++seen[r.strategy];
    const std::string label = n == 1 ? r.strategy : r.strategy + "_" + std::to_string(n);
    r.write_csv(o.out / (label + ".csv"));
    r.write_json(o.out / (label + ".json"));
    std::cout << label << "," << r.cell() << "\n";
    reports.push_back(std::move(r));
  };
  for (const auto& path : o.checkpoints) {
    const auto ckpt = load_checkpoint(path, o.strategy);
    emit(metrics::evaluate(ckpt.model(), samples, backbone::checkpoint_stem(path).string()));
  }
  if (o.ground_truth) emit(metrics::evaluate_ground_truth(samples));
  if (reports.empty()) throw std::invalid_argument("nothing to evaluate: pass --checkpoint or --ground-truth");
  metrics::write_table_csv(o.out / "table.csv", reports);
  return 0;
}

int recon(const SampleOptions& o) {
  const auto ckpt = load_checkpoint(o.checkpoint, o.strategy);
  const auto sample = load_sample(o.sample);
  const auto rec = ckpt.model().reconstruct(sample);
  const double residual = kspace::sampled_residual(rec.image, sample.measured, sample.mask);
  if (!(residual <= kDcTolerance)) {
    throw std::runtime_error("reconstruction violates data consistency (residual " + std::to_string(residual) + ")");
  }

  const auto pred_mag = rec.image.magnitude();
  const auto gt_mag = sample.y.magnitude();
  Tensor<double> diff(pred_mag.shape());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = std::abs(pred_mag[i] - gt_mag[i]);

  fs::create_directories(o.out);
  io::TensorArchive ar;
  ar.put("y_pred", rec.image.tensor());
  ar.put("abs_diff", diff);
  ar.put("zero_filled", sample.x.tensor());
  if (rec.synthesized) ar.put("synthesized", rec.synthesized->tensor());
  ar.save(o.out / "recon.ttmt");
  write_pgm(o.out / "recon.pgm", pred_mag);
  write_pgm(o.out / "abs_diff.pgm", diff);
  write_pgm(o.out / "zero_filled.pgm", sample.x.magnitude());
  write_pgm(o.out / "ground_truth.pgm", gt_mag);
  write_json(o.out / "recon.json", {{"sample", sample.id},
                                    {"strategy", backbone::to_string(ckpt.config.strategy)},
                                    {"psnr_db", metrics::psnr(pred_mag, gt_mag)},
                                    {"ssim", metrics::ssim(pred_mag, gt_mag)},
                                    {"dc_residual", residual}});
  return 0;
}

int dump_attn(const SampleOptions& o) {
  const auto ckpt = load_checkpoint(o.checkpoint, o.strategy);
  if (!backbone::uses_ttm(ckpt.config.strategy)) {
    throw std::invalid_argument("checkpoint strategy '" + backbone::to_string(ckpt.config.strategy) +
                                "' has no attention to dump");
  }
  const auto sample = load_sample(o.sample);
  const auto rec = ckpt.model().reconstruct(sample);
  const auto& attn = *rec.attention;

  Tensor<float> hard({attn.hard.size()});
  for (std::size_t i = 0; i < attn.hard.size(); ++i) hard[i] = static_cast<float>(attn.hard[i]);
  fs::create_directories(o.out);
  io::TensorArchive ar;
  ar.put("r", attn.relevance);
  ar.put("h", hard);
  ar.put("s", attn.soft);
  ar.put("S_map", attn.confidence);
  ar.save(o.out / "attention.ttmt");
  write_pgm(o.out / "S_map.pgm", attn.confidence.cast<double>().reshaped({attn.confidence.dim(1), attn.confidence.dim(2)}));
  const auto& t = *ckpt.config.ttm;
  write_json(o.out / "attention.json", {{"patch", t.patch},
                                        {"stride", t.stride},
                                        {"grid", {attn.grid_rows, attn.grid_cols}},
                                        {"mode", ttm::to_string(t.mode)},
                                        {"strategy", backbone::to_string(ckpt.config.strategy)},
                                        {"sample", sample.id},
                                        {"reference", sample.ref_id}});
  return 0;
}

int suite(const SuiteOptions& o) {
  std::vector<backbone::Strategy> strategies;
  for (const auto& s : o.strategies) strategies.push_back(backbone::strategy_from_string(s));
  if (strategies.empty()) strategies = backbone::all_strategies();

  auto protocol = train::TrainConfig::desk(backbone::StrategyConfig::make(backbone::Strategy::original, 0), 0);
  protocol.max_epochs = o.epochs;
  protocol.batch_size = o.batch;
  protocol.initial_lr = o.lr;
  protocol.data = o.data;
  auto s = train::ExperimentSuite::grid(strategies, o.seeds, protocol, o.out);
  if (o.reuse) s.reuse_fingerprint = "cli";
  const auto ds = data::read_dataset(o.data);
  const auto outcomes = train::run_suite(s, ds, [](const std::string& msg) { std::cerr << msg << "\n"; });
  for (const auto& row : train::summarize_suite(outcomes)) {
    std::cout << backbone::to_string(row.strategy) << "," << row.median_psnr << "," << row.median_ssim << "\n";
  }
  return 0;
}

}  // namespace ttmr::tools
