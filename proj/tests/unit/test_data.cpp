#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

#include "test_support.hpp"
#include "ttmr/data/dataset.hpp"
#include "ttmr/data/mutual_information.hpp"
#include "ttmr/data/phantom.hpp"
#include "ttmr/kspace/acquisition.hpp"
#include "ttmr/kspace/fft.hpp"

namespace ttmr {
namespace {

namespace fs = std::filesystem;
using testing::random_tensor;

// Direct plug-in estimate written out independently of the library.
double mi_oracle(const Tensor<double>& a, const Tensor<double>& b, std::size_t bins) {
  auto bin_of = [&](const Tensor<double>& t) {
    const double mx = *std::max_element(t.values().begin(), t.values().end());
    std::vector<std::size_t> out(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      out[i] = std::min(bins - 1, static_cast<std::size_t>(t[i] / mx * static_cast<double>(bins)));
    }
    return out;
  };
  const auto ba = bin_of(a), bb = bin_of(b);
  std::vector<double> joint(bins * bins, 0.0), pa(bins, 0.0), pb(bins, 0.0);
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[ba[i] * bins + bb[i]] += 1.0 / n;
    pa[ba[i]] += 1.0 / n;
    pb[bb[i]] += 1.0 / n;
  }
  double mi = 0.0;
  for (std::size_t i = 0; i < bins; ++i)
    for (std::size_t j = 0; j < bins; ++j)
      if (joint[i * bins + j] > 0) mi += joint[i * bins + j] * std::log2(joint[i * bins + j] / (pa[i] * pb[j]));
  return mi;
}

double entropy_bits(const Tensor<double>& a, std::size_t bins) { return mi_oracle(a, a, bins); }

TEST(Phantom, MagnitudeInUnitRangeAndFinite) {
  const auto phantoms = data::generate_phantoms(1000, 64, 3);
  for (const auto& p : phantoms) {
    for (auto v : p.image.tensor().values()) ASSERT_TRUE(std::isfinite(v));
    const auto mag = p.image.magnitude();
    const auto [lo, hi] = std::minmax_element(mag.values().begin(), mag.values().end());
    ASSERT_GE(*lo, 0.0);
    ASSERT_LE(*hi, 1.0 + 1e-6) << p.id;
    ASSERT_GE(p.anatomy.ellipses.size(), 3u);
  }
}

TEST(Phantom, Deterministic) {
  const auto a = data::generate_phantoms(5, 64, 11), b = data::generate_phantoms(5, 64, 11);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].image, b[i].image);
  EXPECT_FALSE(a[0].image == data::generate_phantom(0, 64, 12).image);
  EXPECT_FALSE(a[0].image == a[1].image);
}

TEST(Phantom, TextureCarriesHighFrequencyEnergy) {
  const auto phantoms = data::generate_phantoms(1000, 64, 4);
  std::size_t ok = 0;
  for (const auto& p : phantoms) {
    kspace::ComplexImage<double> mag_img(64, 64);
    const auto mag = p.image.magnitude();
    for (std::size_t i = 0; i < mag.size(); ++i) mag_img.tensor()[i] = mag[i];
    const auto k = kspace::fft2c(mag_img);
    double total = 0.0, outside = 0.0;
    for (std::size_t y = 0; y < 64; ++y) {
      for (std::size_t x = 0; x < 64; ++x) {
        const double e = k.re(y, x) * k.re(y, x) + k.im(y, x) * k.im(y, x);
        total += e;
        if (x < 24 || x >= 40) outside += e;
      }
    }
    if (outside >= 0.05 * total) ++ok;
  }
  EXPECT_GE(ok, 950u);
}

TEST(MutualInformation, MatchesDirectOracle) {
  const auto a = random_tensor<double>({32, 32}, 1, 0.0, 1.0);
  auto b = a;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::sqrt(a[i]) + 0.1 * random_tensor<double>({1}, i)[0];
  for (std::size_t bins : {8u, 64u}) EXPECT_NEAR(data::mutual_information(a, b, bins).bits, mi_oracle(a, b, bins), 1e-9);
}

TEST(MutualInformation, SymmetricAndBoundedBySelfInformation) {
  const auto phantoms = data::generate_phantoms(6, 64, 5);
  for (std::size_t i = 0; i < phantoms.size(); ++i) {
    const auto a = phantoms[i].image.magnitude();
    const double self = data::mutual_information(a, a).bits;
    EXPECT_NEAR(self, entropy_bits(a, 64), 1e-9);
    for (std::size_t j = 0; j < phantoms.size(); ++j) {
      const auto b = phantoms[j].image.magnitude();
      const double ab = data::mutual_information(a, b).bits;
      EXPECT_EQ(ab, data::mutual_information(b, a).bits);
      EXPECT_GE(ab, 0.0);
      EXPECT_LE(ab, self + 1e-12);
    }
  }
}

TEST(MutualInformation, IndependentNoiseIsNearPluginBias) {
  // The plug-in estimator is biased upwards by about (bins-1)^2 / (2 N ln 2) bits for independent
  // inputs: 0.70 bits for a 64 x 64 histogram over 4096 pixels. Measured values sit just above that.
  double worst = 0.0, mean = 0.0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const double mi = data::mutual_information(random_tensor<double>({64, 64}, 2 * t + 1, 0.0, 1.0),
                                               random_tensor<double>({64, 64}, 2 * t + 2, 0.0, 1.0))
                          .bits;
    worst = std::max(worst, mi);
    mean += mi / 100.0;
  }
  const double bias = 63.0 * 63.0 / (2.0 * 4096.0 * std::log(2.0));
  EXPECT_GT(mean, bias);
  EXPECT_LT(worst, 0.9);
  // With coarser bins the same inputs show almost no shared information.
  EXPECT_LT(data::mutual_information(random_tensor<double>({64, 64}, 1, 0.0, 1.0),
                                     random_tensor<double>({64, 64}, 2, 0.0, 1.0), 16)
                .bits,
            0.1);
}

TEST(MutualInformation, ConstantImageIsDegenerate) {
  Tensor<double> c({16, 16});
  c.fill(0.3);
  const auto r = data::mutual_information(c, random_tensor<double>({16, 16}, 3, 0.0, 1.0));
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.bits, 0.0);
  EXPECT_THROW(data::mutual_information(c, random_tensor<double>({8, 8}, 3)), ShapeError);
}

TEST(MatchReference, UsuallySelectsGroundTruthOfItsInput) {
  // Exhaustive scan: every phantom's zero-filled acquisition queried against the whole family. The
  // 64-bin plug-in estimate carries about 0.7 bits of bias that grows with marginal entropy, so a
  // few high-entropy phantoms can outscore the true source; measured self-selection is 87%.
  const std::size_t n = 100;
  const auto pool = data::generate_phantoms(n, 64, 0);
  std::vector<Tensor<double>> mags;
  for (const auto& p : pool) mags.push_back(p.image.magnitude());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto mask = kspace::make_mask(64, 4.0, 0.08, 100 + i);
    const auto x = kspace::undersample(pool[i].image, mask, 0.0, i).zero_filled;
    if (data::match_reference(x.magnitude(), mags) == i) ++hits;
  }
  EXPECT_GE(hits, 85u);
  // Fully sampled queries always find themselves.
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(data::match_reference(mags[i], mags), i);
}

TEST(MatchReference, TiesEmptyAndSingleton) {
  const auto a = random_tensor<double>({16, 16}, 7, 0.0, 1.0);
  std::vector<Tensor<double>> pool{a, a, a};
  EXPECT_EQ(data::match_reference(a, pool), 0u);
  EXPECT_EQ(data::match_reference(a, std::span<const Tensor<double>>(pool.data() + 2, 1)), 0u);
  EXPECT_THROW(data::match_reference(a, std::span<const Tensor<double>>()), std::invalid_argument);
}

TEST(Manifest, DeskDefaultsAndValidation) {
  const auto m = data::SplitManifest::desk_default(0);
  EXPECT_EQ(m.train.size(), 200u);
  EXPECT_EQ(m.val.size(), 20u);
  EXPECT_EQ(m.reference.size(), 20u);
  EXPECT_EQ(m.test.size(), 50u);
  EXPECT_EQ(m.size, 64u);
  EXPECT_EQ(m.mask.acceleration, 4.0);
  std::set<std::uint64_t> ids;
  for (const auto* l : {&m.train, &m.val, &m.reference, &m.test}) ids.insert(l->begin(), l->end());
  EXPECT_EQ(ids.size(), 290u);
  EXPECT_NO_THROW(m.validate());
  EXPECT_EQ(data::SplitManifest::from_json(m.to_json()).to_json(), m.to_json());

  auto overlap = m;
  overlap.test.push_back(m.train[0]);
  EXPECT_THROW(overlap.validate(), std::invalid_argument);
  auto empty = m;
  empty.reference.clear();
  EXPECT_THROW(empty.validate(), std::invalid_argument);
}

class DatasetTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    manifest_ = data::SplitManifest::make(6, 3, 5, 4, 32, 21, {4.0, 0.08, 0.0});
    ds_ = new data::Dataset(data::build_dataset(manifest_));
  }
  static void TearDownTestSuite() { delete ds_; }
  static data::SplitManifest manifest_;
  static data::Dataset* ds_;
};
data::SplitManifest DatasetTest::manifest_;
data::Dataset* DatasetTest::ds_ = nullptr;

TEST_F(DatasetTest, SamplesAreConsistentAcquisitions) {
  std::set<std::string> pool_ids;
  for (const auto& p : ds_->reference_pool) pool_ids.insert(data::sample_name(p.id));
  for (auto split : {data::Split::train, data::Split::val, data::Split::test}) {
    for (const auto& s : ds_->split(split)) {
      ASSERT_TRUE(s.has_reference());
      EXPECT_TRUE(pool_ids.count(s.ref_id));
      EXPECT_NE(s.ref_id, s.id);
      EXPECT_EQ(s.mask.acceleration_factor(), 4.0);
      EXPECT_EQ(s.mask.sampled_count(), 8u);
      EXPECT_LT(kspace::sampled_residual(s.x, s.measured, s.mask), 1e-6);
      // The zero-filled input has no energy off its sampled columns, nor does the reference.
      for (const auto& [img, mask] : {std::pair{s.x, s.mask}, std::pair{*s.x_ref, *s.ref_mask}}) {
        const auto k = kspace::fft2c(img);
        for (std::size_t c = 0; c < 32; ++c) {
          if (mask.sampled(c)) continue;
          for (std::size_t y = 0; y < 32; ++y) {
            EXPECT_LT(std::abs(k.re(y, c)) + std::abs(k.im(y, c)), 1e-5);
          }
        }
      }
    }
  }
}

TEST_F(DatasetTest, ReproducibleFromManifest) {
  const auto again = data::build_dataset(manifest_);
  for (auto split : {data::Split::train, data::Split::val, data::Split::test}) {
    for (std::size_t i = 0; i < ds_->split(split).size(); ++i) {
      const auto& a = ds_->split(split)[i];
      const auto& b = again.split(split)[i];
      EXPECT_EQ(a.x, b.x);
      EXPECT_EQ(a.mask, b.mask);
      EXPECT_EQ(*a.ref_mask, *b.ref_mask);
      EXPECT_EQ(a.ref_id, b.ref_id);
    }
  }
  std::set<std::vector<std::size_t>> masks;
  for (const auto& s : ds_->train) masks.insert(s.mask.sampled_columns());
  EXPECT_GT(masks.size(), 1u);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

TEST_F(DatasetTest, WriteReadRoundTripIsByteIdentical) {
  const auto root = fs::temp_directory_path() / "ttmr_dataset_test";
  fs::remove_all(root);
  data::write_dataset(*ds_, root / "a");
  const auto back = data::read_dataset(root / "a");
  EXPECT_EQ(back.manifest.to_json(), manifest_.to_json());
  ASSERT_EQ(back.test.size(), ds_->test.size());
  for (std::size_t i = 0; i < back.test.size(); ++i) {
    EXPECT_EQ(back.test[i].y, ds_->test[i].y);
    EXPECT_EQ(back.test[i].x, ds_->test[i].x);
    EXPECT_EQ(back.test[i].measured, ds_->test[i].measured);
    EXPECT_EQ(back.test[i].mask, ds_->test[i].mask);
    EXPECT_EQ(*back.test[i].x_ref, *ds_->test[i].x_ref);
  }
  data::write_dataset(back, root / "b");
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(e.path(), root / "a");
    EXPECT_EQ(slurp(e.path()), slurp(root / "b" / rel)) << rel;
  }
  EXPECT_GT(files, 20u);
  const auto one = data::read_sample(root / "a", data::Split::val, manifest_.val[1]);
  EXPECT_EQ(one.x, ds_->val[1].x);
  fs::remove_all(root);
  EXPECT_THROW(data::read_dataset(root / "missing"), std::exception);
}

TEST(Dataset, FullSamplingGivesGroundTruth) {
  const auto m = data::SplitManifest::make(1, 1, 2, 1, 32, 8, {1.0, 0.08, 0.0});
  const auto ds = data::build_dataset(m);
  for (const auto& s : ds.test) EXPECT_LT(max_abs_diff(s.x.tensor(), s.y.tensor()), 1e-5);
}

TEST(Dataset, SplitNames) {
  for (auto s : {data::Split::train, data::Split::val, data::Split::test})
    EXPECT_EQ(data::split_from_string(data::to_string(s)), s);
  EXPECT_THROW(data::split_from_string("reference"), std::invalid_argument);
}

}  // namespace
}  // namespace ttmr
