#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ttmr::tools {

struct GenDataOptions {
  std::size_t count = 200;  // training phantoms
  std::size_t val = 20;
  std::size_t reference = 20;
  std::size_t test = 50;
  std::size_t size = 64;
  std::uint64_t seed = 0;
  double af = 4.0;
  double center_frac = 0.08;
  double noise_sigma = 0.0;
  std::filesystem::path out;
};

struct TrainOptions {
  std::string strategy;
  std::filesystem::path data;
  std::size_t epochs = 20;
  std::size_t batch = 4;
  std::uint64_t seed = 0;
  double lr = 1.5e-4;
  std::optional<std::size_t> max_steps;
  std::optional<std::filesystem::path> resume;
  std::filesystem::path out;
};

struct EvalOptions {
  std::vector<std::filesystem::path> checkpoints;
  std::optional<std::string> strategy;  // expected strategy; mismatches are rejected
  std::filesystem::path data;
  std::string split = "test";
  bool ground_truth = false;
  std::filesystem::path out;
};

struct SampleOptions {
  std::filesystem::path checkpoint;
  std::optional<std::string> strategy;
  std::filesystem::path sample;  // <data>/<split>/<id>.ttmt
  std::filesystem::path out;
};

struct SuiteOptions {
  std::filesystem::path data;
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t epochs = 20;
  std::size_t batch = 4;
  double lr = 1.5e-4;
  bool reuse = false;
  std::filesystem::path out;
};

int gen_data(const GenDataOptions& o);
int train(const TrainOptions& o);
int eval(const EvalOptions& o);
int recon(const SampleOptions& o);
int dump_attn(const SampleOptions& o);
int suite(const SuiteOptions& o);

}  // namespace ttmr::tools
