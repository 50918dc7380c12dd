#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ttmr/data/dataset.hpp"
#include "ttmr/metrics/report.hpp"
#include "ttmr/train/trainer.hpp"

namespace ttmr::train {

struct SuiteRun {
  backbone::Strategy strategy = backbone::Strategy::original;
  std::uint64_t seed = 0;

  std::string label() const;  // "<strategy>/seed_<n>"
};

/// A grid of (strategy, seed) training runs sharing one protocol and dataset.
struct ExperimentSuite {
  std::vector<SuiteRun> runs;
  TrainConfig protocol;  // strategy and seed are overridden per run
  std::filesystem::path out_dir;
  /// When non-empty, runs whose `done.json` records the same configuration and fingerprint are loaded
  /// from disk instead of retrained. The fingerprint should identify the build.
  std::string reuse_fingerprint;
  /// Throw instead of training when a run cannot be reused.
  bool reuse_only = false;

  static ExperimentSuite grid(const std::vector<backbone::Strategy>& strategies,
                              const std::vector<std::uint64_t>& seeds, TrainConfig protocol,
                              std::filesystem::path out_dir);
};

struct RunOutcome {
  SuiteRun run;
  std::filesystem::path dir;
  metrics::MetricReport test;  // best-by-validation checkpoint on the test split
  bool reused = false;
};

/// Per strategy: median over seeds of the per-run mean test PSNR and SSIM.
struct StrategySummary {
  backbone::Strategy strategy;
  std::vector<double> run_psnr;
  std::vector<double> run_ssim;
  double median_psnr = 0.0;
  double median_ssim = 0.0;
};

/// Trains every run, evaluates its best checkpoint on the test split and writes
/// `<out>/<strategy>/seed_<n>/{checkpoints/, train_log.*, test_metrics.{csv,json}, done.json}` plus
/// `<out>/summary.json` and `<out>/table.csv`.
std::vector<RunOutcome> run_suite(const ExperimentSuite& suite, const data::Dataset& ds,
                                  const std::function<void(const std::string&)>& progress = {});

std::vector<StrategySummary> summarize_suite(const std::vector<RunOutcome>& outcomes);

}  // namespace ttmr::train
