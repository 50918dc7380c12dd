#include "ttmr/train/suite.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "ttmr/metrics/report.hpp"

namespace ttmr::train {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) return nullptr;
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception&) {
    return nullptr;
  }
}

}  // namespace

std::string SuiteRun::label() const { return backbone::to_string(strategy) + "/seed_" + std::to_string(seed); }

ExperimentSuite ExperimentSuite::grid(const std::vector<backbone::Strategy>& strategies,
                                      const std::vector<std::uint64_t>& seeds, TrainConfig protocol,
                                      std::filesystem::path out_dir) {
  ExperimentSuite s;
  for (auto st : strategies)
    for (auto seed : seeds) s.runs.push_back({st, seed});
  s.protocol = std::move(protocol);
  s.out_dir = std::move(out_dir);
  return s;
}

std::vector<RunOutcome> run_suite(const ExperimentSuite& suite, const data::Dataset& ds,
                                  const std::function<void(const std::string&)>& progress) {
  std::filesystem::create_directories(suite.out_dir);
  std::vector<RunOutcome> outcomes;
  for (const auto& run : suite.runs) {
    TrainConfig cfg = suite.protocol;
    cfg.strategy = backbone::StrategyConfig::make(run.strategy, run.seed);
    cfg.seed = run.seed;
    RunOutcome out;
    out.run = run;
    out.dir = suite.out_dir / backbone::to_string(run.strategy) / ("seed_" + std::to_string(run.seed));
    const nlohmann::json key{{"train", cfg.to_json()}, {"dataset", ds.manifest.to_json()}};

    const auto done = read_json(out.dir / "done.json");
    if (!suite.reuse_fingerprint.empty() && done.is_object() && done.value("key", nlohmann::json()) == key &&
        done.value("fingerprint", std::string()) == suite.reuse_fingerprint &&
        std::filesystem::exists(out.dir / "test_metrics.json")) {
      out.test = metrics::MetricReport::from_json(read_json(out.dir / "test_metrics.json"));
      out.reused = true;
      if (progress) progress(run.label() + ": reused " + out.test.cell());
      outcomes.push_back(std::move(out));
      continue;
    }

    if (suite.reuse_only) {
      throw std::runtime_error("no reusable result for " + run.label() + " in '" + suite.out_dir.string() +
                               "' (missing, stale configuration or different build)");
    }
    std::filesystem::remove_all(out.dir);
    std::filesystem::create_directories(out.dir);
    TrainOptions opts;
    opts.out_dir = out.dir;
    if (progress) {
      opts.on_epoch = [&](const EpochRecord& e) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s: epoch %zu loss %.5f val %.3f dB / %.4f (%.0fs)", run.label().c_str(),
                      e.epoch, e.train_loss, e.val_psnr, e.val_ssim, e.train_seconds + e.val_seconds);
        progress(buf);
      };
    }
    const auto result = train(cfg, ds.train, ds.val, opts);
    out.test = metrics::evaluate(result.best.model(), ds.test, (out.dir / "checkpoints" / "best").string());
    out.test.write_csv(out.dir / "test_metrics.csv");
    out.test.write_json(out.dir / "test_metrics.json");
    std::ofstream(out.dir / "done.json", std::ios::trunc)
        << nlohmann::json{{"key", key}, {"fingerprint", suite.reuse_fingerprint}}.dump(2) << '\n';
    if (progress) progress(run.label() + ": test " + out.test.cell());
    outcomes.push_back(std::move(out));
  }

  nlohmann::json runs = nlohmann::json::array();
  for (const auto& o : outcomes) {
    runs.push_back({{"strategy", backbone::to_string(o.run.strategy)},
                    {"seed", o.run.seed},
                    {"test_psnr", o.test.psnr.mean},
                    {"test_ssim", o.test.ssim.mean},
                    {"dir", o.dir.string()}});
  }
  nlohmann::json strategies = nlohmann::json::array();
  std::vector<metrics::MetricReport> rows;
  for (const auto& s : summarize_suite(outcomes)) {
    strategies.push_back({{"strategy", backbone::to_string(s.strategy)},
                          {"run_psnr", s.run_psnr},
                          {"run_ssim", s.run_ssim},
                          {"median_psnr", s.median_psnr},
                          {"median_ssim", s.median_ssim}});
    metrics::MetricReport row;
    row.strategy = backbone::to_string(s.strategy);
    row.psnr.mean = s.median_psnr;
    row.ssim.mean = s.median_ssim;
    rows.push_back(row);
  }
  std::ofstream(suite.out_dir / "summary.json", std::ios::trunc)
      << nlohmann::json{{"runs", runs}, {"strategies", strategies}}.dump(2) << '\n';
  metrics::write_table_csv(suite.out_dir / "table.csv", rows);
  return outcomes;
}

std::vector<StrategySummary> summarize_suite(const std::vector<RunOutcome>& outcomes) {
  std::vector<StrategySummary> out;
  for (const auto& o : outcomes) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& s) { return s.strategy == o.run.strategy; });
    if (it == out.end()) {
      out.push_back({o.run.strategy, {}, {}, 0.0, 0.0});
      it = out.end() - 1;
    }
    it->run_psnr.push_back(o.test.psnr.mean);
    it->run_ssim.push_back(o.test.ssim.mean);
  }
  for (auto& s : out) {
    s.median_psnr = median(s.run_psnr);
    s.median_ssim = median(s.run_ssim);
  }
  return out;
}

}  // namespace ttmr::train
