#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ttmr/io/container.hpp"

namespace ttmr {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string output;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(TTMR_CLI_PATH) + " " + args + " 2>&1";
  std::FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  std::string out;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) out += buf.data();
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

class Cli : public ::testing::Test {
 protected:
  static fs::path root() { return fs::temp_directory_path() / "ttmr_cli_test"; }
  static fs::path data() { return root() / "data"; }
  static std::string sample() { return (data() / "test" / "00009.ttmt").string(); }

  static void SetUpTestSuite() {
    fs::remove_all(root());
    fs::create_directories(root());
    const auto r = run("gen-data --count 4 --val 2 --ref 3 --test 2 --size 32 --seed 5 --out " + data().string());
    ASSERT_EQ(r.code, 0) << r.output;
  }
  static void TearDownTestSuite() { fs::remove_all(root()); }

  static fs::path trained(const std::string& strategy) {
    const auto dir = root() / ("run_" + strategy);
    if (!fs::exists(dir / "checkpoints" / "final.json")) {
      const auto r = run("train --strategy " + strategy + " --data " + data().string() +
                         " --epochs 1 --max-steps 1 --out " + dir.string());
      EXPECT_EQ(r.code, 0) << r.output;
    }
    return dir / "checkpoints" / "final";
  }
};

TEST_F(Cli, GenDataLayoutAndByteIdenticalRerun) {
  const auto m = read_json(data() / "manifest.json");
  EXPECT_EQ(m.at("splits").at("train").size(), 4u);
  EXPECT_EQ(m.at("splits").at("test").size(), 2u);
  EXPECT_TRUE(fs::exists(sample()));
  const auto again = root() / "data_again";
  ASSERT_EQ(run("gen-data --count 4 --val 2 --ref 3 --test 2 --size 32 --seed 5 --out " + again.string()).code, 0);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(data())) {
    if (!e.is_regular_file()) continue;
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(again / fs::relative(e.path(), data()))) << e.path();
  }
  EXPECT_GT(files, 10u);
}

TEST_F(Cli, GenDataDefaultsAreDeskScale) {
  const auto r = run("gen-data --help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("--count"), std::string::npos);
  EXPECT_NE(r.output.find("200"), std::string::npos);
}

TEST_F(Cli, FullSamplingDatasetHasXEqualY) {
  const auto dir = root() / "af1";
  ASSERT_EQ(run("gen-data --count 2 --val 1 --ref 2 --test 1 --size 32 --af 1 --out " + dir.string()).code, 0);
  for (const auto& e : fs::recursive_directory_iterator(dir / "train")) {
    if (e.path().extension() != ".ttmt") continue;
    const auto ar = io::TensorArchive::load(e.path());
    const auto x = ar.get_as<double>("x"), y = ar.get_as<double>("y");
    for (std::size_t i = 0; i < x.size(); ++i) ASSERT_NEAR(x[i], y[i], 1e-5);
  }
}

TEST_F(Cli, InvalidArgumentsExitNonZero) {
  const auto bad = run("train --strategy unet --data " + data().string() + " --out " + (root() / "x").string());
  EXPECT_NE(bad.code, 0);
  EXPECT_NE(bad.output.find("ttm_ha_only"), std::string::npos) << bad.output;
  EXPECT_NE(run("gen-data --af 0.5 --out " + (root() / "bad_af").string()).code, 0);
  EXPECT_NE(run("train --strategy ttm --data " + (root() / "missing").string() + " --out " + (root() / "y").string()).code, 0);
  EXPECT_NE(run("no-such-command").code, 0);
}

TEST_F(Cli, ZeroEpochsWritesInitialisationOnly) {
  const auto dir = root() / "zero";
  ASSERT_EQ(run("train --strategy original --data " + data().string() + " --epochs 0 --seed 3 --out " + dir.string()).code, 0);
  EXPECT_TRUE(fs::exists(dir / "checkpoints" / "epoch_000.ttmt"));
  EXPECT_FALSE(fs::exists(dir / "checkpoints" / "epoch_001.ttmt"));
  EXPECT_EQ(slurp(dir / "checkpoints" / "final.ttmt"), slurp(dir / "checkpoints" / "epoch_000.ttmt"));
  const auto m = read_json(dir / "checkpoints" / "final.json");
  EXPECT_EQ(m.at("epoch"), 0);
  EXPECT_EQ(m.at("strategy"), "original");
}

TEST_F(Cli, EvalWritesReportsAndGroundTruthIsPerfect) {
  const auto ckpt = trained("original");
  const auto out = root() / "eval";
  const auto r = run("eval --checkpoint " + ckpt.string() + " --data " + data().string() + " --ground-truth --out " +
                     out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto gt = read_json(out / "ground_truth.json");
  for (const auto& s : gt.at("samples")) EXPECT_EQ(s.at("ssim").get<double>(), 1.0);
  std::istringstream table(slurp(out / "table.csv"));
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(table, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "strategy,cascade,gain_vs_original");
  EXPECT_EQ(rows[1].rfind("original,", 0), 0u);
  EXPECT_NE(rows[2].find("inf / 1.0000"), std::string::npos);

  const auto mismatch = run("eval --checkpoint " + ckpt.string() + " --strategy ttm --data " + data().string() +
                            " --out " + (root() / "eval_bad").string());
  EXPECT_NE(mismatch.code, 0);
}

// Plain PGM header: "P2", width height, max value.
std::pair<std::size_t, std::size_t> pgm_dims(const fs::path& p) {
  std::istringstream is(slurp(p));
  std::string magic;
  std::size_t w = 0, h = 0;
  is >> magic >> w >> h;
  EXPECT_EQ(magic, "P2");
  return {w, h};
}

TEST_F(Cli, ReconWritesImagesAtImageSize) {
  const auto out = root() / "recon";
  const auto r = run("recon --checkpoint " + trained("ttm_sa_only").string() + " --sample " + sample() + " --out " +
                     out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* name : {"recon.pgm", "abs_diff.pgm", "zero_filled.pgm", "ground_truth.pgm"})
    EXPECT_EQ(pgm_dims(out / name), (std::pair<std::size_t, std::size_t>{32, 32})) << name;
  const auto ar = io::TensorArchive::load(out / "recon.ttmt");
  EXPECT_EQ(ar.get_as<double>("y_pred").shape(), (Shape{2, 32, 32}));
  EXPECT_EQ(ar.get_as<double>("synthesized").shape(), (Shape{2, 32, 32}));
  EXPECT_EQ(read_json(out / "recon.json").at("sample"), "00009");
}

TEST_F(Cli, DumpAttentionBundle) {
  const auto out = root() / "attn";
  const auto r = run("dump-attn --checkpoint " + trained("ttm_ha_only").string() + " --sample " + sample() +
                     " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto ar = io::TensorArchive::load(out / "attention.ttmt");
  for (const char* name : {"r", "h", "s", "S_map"}) EXPECT_TRUE(ar.contains(name)) << name;
  // Hard-only ablation: the confidence gate is constant one.
  const auto gate = ar.get_as<double>("S_map");
  for (double v : gate.values()) ASSERT_EQ(v, 1.0);
  const auto meta = read_json(out / "attention.json");
  EXPECT_EQ(meta.at("strategy"), "ttm_ha_only");
  EXPECT_TRUE(fs::exists(out / "S_map.pgm"));
  EXPECT_NE(run("dump-attn --checkpoint " + trained("original").string() + " --sample " + sample() + " --out " +
                (root() / "attn_bad").string())
                .code,
            0);
}

}  // namespace
}  // namespace ttmr
