#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ttmr/backbone/strategy.hpp"
#include "ttmr/data/sample.hpp"

namespace ttmr::metrics {

struct SampleScore {
  std::string sample_id;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;     // population standard deviation
  double median = 0.0;
};

Summary summarize(std::vector<double> values);

struct MetricReport {
  std::string strategy;
  std::string checkpoint;
  std::vector<SampleScore> samples;
  Summary psnr;
  Summary ssim;

  /// Recomputes the aggregates from the per-sample scores.
  void finalize();

  /// "PSNR / SSIM" cell, e.g. "33.49 / 0.9131".
  std::string cell() const;

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
  /// Columns: sample_id, psnr_db, ssim.
  void write_csv(const std::filesystem::path& path) const;
  void write_json(const std::filesystem::path& path) const;
};

/// Strategy table: one row per report, cells "PSNR / SSIM", plus the gain over the "original" row
/// when one is present.
void write_table_csv(const std::filesystem::path& path, const std::vector<MetricReport>& reports);

/// Scores magnitude reconstructions against ground truth.
MetricReport score(const std::vector<std::string>& ids, const std::vector<kspace::ComplexImage<float>>& predictions,
                   const std::vector<kspace::ComplexImage<float>>& ground_truth);

/// Runs the model on every sample (in parallel) and scores the magnitudes.
MetricReport evaluate(const backbone::Model<float>& model, const std::vector<data::DataSample>& samples,
                      const std::string& checkpoint_id = "");

/// Scores the ground truth against itself; a sanity mode for the evaluation pipeline.
MetricReport evaluate_ground_truth(const std::vector<data::DataSample>& samples);

}  // namespace ttmr::metrics
