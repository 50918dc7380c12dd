#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ttmr/data/phantom.hpp"
#include "ttmr/data/sample.hpp"

namespace ttmr::data {

struct MaskConfig {
  double acceleration = 4.0;
  double center_fraction = 0.08;
  double noise_sigma = 0.0;
};

/// Disjoint phantom-id lists for each split plus everything needed to rebuild the samples.
struct SplitManifest {
  std::size_t size = 64;
  std::uint64_t seed = 0;
  MaskConfig mask;
  std::vector<std::uint64_t> train, val, reference, test;

  /// Consecutive ids in the order train, val, reference, test.
  static SplitManifest make(std::size_t n_train, std::size_t n_val, std::size_t n_reference, std::size_t n_test,
                            std::size_t size, std::uint64_t seed, MaskConfig mask = {});
  /// 200 / 20 / 20 / 50 phantoms at 64 x 64, AF 4.
  static SplitManifest desk_default(std::uint64_t seed);

  /// Throws when splits overlap or the reference pool is empty.
  void validate() const;
  nlohmann::json to_json() const;
  static SplitManifest from_json(const nlohmann::json& j);
};

enum class Split { train, val, test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct Dataset {
  SplitManifest manifest;
  std::vector<DataSample> train, val, test;
  std::vector<Phantom> reference_pool;

  const std::vector<DataSample>& split(Split s) const;
};

/// Builds one sample: acquisition of phantom `id`, MI-matched reference from the pool and the
/// reference's own acquisition with an independent mask of the same family.
DataSample build_sample(const SplitManifest& manifest, Split split, std::uint64_t id,
                        const std::vector<Phantom>& pool);

Dataset build_dataset(const SplitManifest& manifest);

/// Layout: manifest.json, <split>/<id>.ttmt (y, x, x_ref, y_ref, measured), <split>/<id>.mask.json,
/// <split>/<id>.ref.json (reference id and mask) and reference/<id>.ttmt.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);
DataSample read_sample(const std::filesystem::path& dir, Split split, std::uint64_t id);

std::string sample_name(std::uint64_t id);

}  // namespace ttmr::data
