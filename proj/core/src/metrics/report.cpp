#include "ttmr/metrics/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "ttmr/metrics/metrics.hpp"
#include "ttmr/util/parallel.hpp"

namespace ttmr::metrics {

namespace {

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string number_str(double v) { return std::isinf(v) ? (v > 0 ? "inf" : "-inf") : format("%.17g", v); }

nlohmann::json number_json(double v) {
  if (std::isfinite(v)) return v;
  return number_str(v);
}

double json_number(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>() == "inf" ? kInfinitePsnr : -kInfinitePsnr;
  return j.get<double>();
}

nlohmann::json summary_json(const Summary& s) {
  return {{"mean", number_json(s.mean)}, {"std", number_json(s.std)}, {"median", number_json(s.median)}};
}

}  // namespace

Summary summarize(std::vector<double> values) {
  if (values.empty()) return {};
  Summary s;
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / static_cast<double>(values.size());
  if (std::isfinite(s.mean)) {
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(var / static_cast<double>(values.size()));
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  s.median = n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
  return s;
}

void MetricReport::finalize() {
  std::vector<double> p, q;
  for (const auto& s : samples) {
    p.push_back(s.psnr_db);
    q.push_back(s.ssim);
  }
  psnr = summarize(p);
  ssim = summarize(q);
}

std::string MetricReport::cell() const {
  const std::string p = std::isfinite(psnr.mean) ? format("%.2f", psnr.mean) : "inf";
  return p + " / " + format("%.4f", ssim.mean);
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : samples) {
    rows.push_back({{"sample_id", s.sample_id}, {"psnr_db", number_json(s.psnr_db)}, {"ssim", s.ssim}});
  }
  return {{"strategy", strategy},
          {"checkpoint", checkpoint},
          {"samples", rows},
          {"psnr_db", summary_json(psnr)},
          {"ssim", summary_json(ssim)},
          {"cell", cell()}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  MetricReport r;
  r.strategy = j.value("strategy", std::string());
  r.checkpoint = j.value("checkpoint", std::string());
  for (const auto& s : j.at("samples")) {
    r.samples.push_back({s.at("sample_id").get<std::string>(), json_number(s.at("psnr_db")), s.at("ssim").get<double>()});
  }
  r.finalize();
  return r;
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << "sample_id,psnr_db,ssim\n";
  for (const auto& s : samples) os << s.sample_id << ',' << number_str(s.psnr_db) << ',' << number_str(s.ssim) << '\n';
}

void MetricReport::write_json(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << to_json().dump(2) << '\n';
}

void write_table_csv(const std::filesystem::path& path, const std::vector<MetricReport>& reports) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  const MetricReport* base = nullptr;
  for (const auto& r : reports)
    if (r.strategy == "original") base = &r;
  os << "strategy,cascade,gain_vs_original\n";
  for (const auto& r : reports) {
    std::string gain = "-";
    if (base != nullptr && &r != base && std::isfinite(r.psnr.mean) && std::isfinite(base->psnr.mean)) {
      gain = format("%+.2f", r.psnr.mean - base->psnr.mean) + " / " + format("%+.4f", r.ssim.mean - base->ssim.mean);
    }
    os << r.strategy << ',' << r.cell() << ',' << gain << '\n';
  }
}

MetricReport score(const std::vector<std::string>& ids, const std::vector<kspace::ComplexImage<float>>& predictions,
                   const std::vector<kspace::ComplexImage<float>>& ground_truth) {
  if (ids.size() != predictions.size() || ids.size() != ground_truth.size()) {
    throw std::invalid_argument("score: ids, predictions and ground truth differ in length");
  }
  MetricReport r;
  r.samples.resize(ids.size());
  parallel_for(ids.size(), [&](std::size_t i) {
    const auto pm = predictions[i].magnitude();
    const auto gm = ground_truth[i].magnitude();
    r.samples[i] = {ids[i], psnr(pm, gm), ssim(pm, gm)};
  });
  r.finalize();
  return r;
}

MetricReport evaluate(const backbone::Model<float>& model, const std::vector<data::DataSample>& samples,
                      const std::string& checkpoint_id) {
  if (backbone::uses_reference(model.config().strategy)) {
    for (const auto& s : samples) {
      if (!s.has_reference()) {
        throw std::invalid_argument("evaluate: sample '" + s.id + "' has no reference images for strategy '" +
                                    backbone::to_string(model.config().strategy) + "'");
      }
    }
  }
  std::vector<std::string> ids(samples.size());
  std::vector<kspace::ComplexImage<float>> preds(samples.size()), gts(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    ids[i] = samples[i].id;
    preds[i] = model.reconstruct(samples[i]).image;
    gts[i] = samples[i].y;
  });
  MetricReport r = score(ids, preds, gts);
  r.strategy = backbone::to_string(model.config().strategy);
  r.checkpoint = checkpoint_id;
  return r;
}

MetricReport evaluate_ground_truth(const std::vector<data::DataSample>& samples) {
  std::vector<std::string> ids;
  std::vector<kspace::ComplexImage<float>> gts;
  for (const auto& s : samples) {
    ids.push_back(s.id);
    gts.push_back(s.y);
  }
  MetricReport r = score(ids, gts, gts);
  r.strategy = "ground_truth";
  return r;
}

}  // namespace ttmr::metrics
