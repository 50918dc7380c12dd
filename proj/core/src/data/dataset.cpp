#include "ttmr/data/dataset.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "ttmr/data/mutual_information.hpp"
#include "ttmr/io/container.hpp"
#include "ttmr/kspace/acquisition.hpp"
#include "ttmr/util/rng.hpp"

namespace ttmr::data {

namespace fs = std::filesystem;

SplitManifest SplitManifest::make(std::size_t n_train, std::size_t n_val, std::size_t n_reference, std::size_t n_test,
                                  std::size_t size, std::uint64_t seed, MaskConfig mask) {
  SplitManifest m;
  m.size = size;
  m.seed = seed;
  m.mask = mask;
  std::uint64_t next = 0;
  auto fill = [&next](std::vector<std::uint64_t>& v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) v.push_back(next++);
  };
  fill(m.train, n_train);
  fill(m.val, n_val);
  fill(m.reference, n_reference);
  fill(m.test, n_test);
  m.validate();
  return m;
}

SplitManifest SplitManifest::desk_default(std::uint64_t seed) { return make(200, 20, 20, 50, 64, seed); }

void SplitManifest::validate() const {
  if (reference.empty()) throw std::invalid_argument("manifest: reference pool is empty");
  if (size < 32) throw std::invalid_argument("manifest: phantom size must be >= 32");
  std::set<std::uint64_t> seen;
  for (const auto* list : {&train, &val, &reference, &test}) {
    for (auto id : *list) {
      if (!seen.insert(id).second) throw std::invalid_argument("manifest: phantom id " + std::to_string(id) + " reused");
    }
  }
  if (!(mask.acceleration >= 1.0)) throw std::invalid_argument("manifest: acceleration factor must be >= 1");
  if (!(mask.noise_sigma >= 0.0)) throw std::invalid_argument("manifest: noise sigma must be >= 0");
}

nlohmann::json SplitManifest::to_json() const {
  return {{"size", size},
          {"seed", seed},
          {"mask",
           {{"acceleration_factor", mask.acceleration},
            {"center_fraction", mask.center_fraction},
            {"noise_sigma", mask.noise_sigma}}},
          {"splits", {{"train", train}, {"val", val}, {"reference", reference}, {"test", test}}}};
}

SplitManifest SplitManifest::from_json(const nlohmann::json& j) {
  SplitManifest m;
  m.size = j.at("size").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  const auto& mk = j.at("mask");
  m.mask.acceleration = mk.at("acceleration_factor").get<double>();
  m.mask.center_fraction = mk.at("center_fraction").get<double>();
  m.mask.noise_sigma = mk.value("noise_sigma", 0.0);
  const auto& s = j.at("splits");
  m.train = s.at("train").get<std::vector<std::uint64_t>>();
  m.val = s.at("val").get<std::vector<std::uint64_t>>();
  m.reference = s.at("reference").get<std::vector<std::uint64_t>>();
  m.test = s.at("test").get<std::vector<std::uint64_t>>();
  m.validate();
  return m;
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + s + "' (valid: train, val, test)");
}

const std::vector<DataSample>& Dataset::split(Split s) const {
  switch (s) {
    case Split::train: return train;
    case Split::val: return val;
    case Split::test: return test;
  }
  return train;
}

std::string sample_name(std::uint64_t id) {
  std::string n = std::to_string(id);
  return std::string(n.size() < 5 ? 5 - n.size() : 0, '0') + n;
}

namespace {

kspace::SamplingMask draw_mask(const SplitManifest& m, std::uint64_t stream_seed) {
  if (m.mask.acceleration == 1.0) return kspace::SamplingMask::full(m.size);
  return kspace::make_mask(m.size, m.mask.acceleration, m.mask.center_fraction, stream_seed);
}

std::vector<std::uint64_t> ids_of(const SplitManifest& m, Split s) {
  switch (s) {
    case Split::train: return m.train;
    case Split::val: return m.val;
    case Split::test: return m.test;
  }
  return {};
}

}  // namespace

DataSample build_sample(const SplitManifest& manifest, Split split, std::uint64_t id,
                        const std::vector<Phantom>& pool) {
  if (pool.empty()) throw std::invalid_argument("build_sample: reference pool is empty");
  const std::string tag = to_string(split) + "/" + sample_name(id);
  const Phantom ph = generate_phantom(id, manifest.size, manifest.seed);

  DataSample s;
  s.id = sample_name(id);
  s.y = ph.image;
  s.mask = draw_mask(manifest, derive_seed(manifest.seed, "mask/" + tag));
  auto acq = kspace::undersample(s.y, s.mask, manifest.mask.noise_sigma, derive_seed(manifest.seed, "noise/" + tag));
  s.x = std::move(acq.zero_filled);
  s.measured = std::move(acq.measured);

  std::vector<Tensor<double>> mags;
  mags.reserve(pool.size());
  for (const auto& p : pool) mags.push_back(p.image.magnitude());
  const std::size_t match = match_reference(s.x.magnitude(), mags);
  const Phantom& ref = pool[match];
  s.ref_id = sample_name(ref.id);
  s.y_ref = ref.image;
  s.ref_mask = draw_mask(manifest, derive_seed(manifest.seed, "refmask/" + tag));
  s.x_ref = kspace::undersample(ref.image, *s.ref_mask, manifest.mask.noise_sigma,
                                derive_seed(manifest.seed, "refnoise/" + tag))
                .zero_filled;
  return s;
}

Dataset build_dataset(const SplitManifest& manifest) {
  manifest.validate();
  Dataset ds;
  ds.manifest = manifest;
  for (auto id : manifest.reference) ds.reference_pool.push_back(generate_phantom(id, manifest.size, manifest.seed));
  for (Split s : {Split::train, Split::val, Split::test}) {
    auto& out = s == Split::train ? ds.train : (s == Split::val ? ds.val : ds.test);
    for (auto id : ids_of(manifest, s)) out.push_back(build_sample(manifest, s, id, ds.reference_pool));
  }
  return ds;
}

namespace {

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  os << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot read '" + p.string() + "'");
  return nlohmann::json::parse(is);
}

}  // namespace

void write_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  write_json(dir / "manifest.json", ds.manifest.to_json());
  fs::create_directories(dir / "reference");
  for (const auto& ph : ds.reference_pool) {
    io::TensorArchive a;
    a.put("y", ph.image.tensor());
    a.save(dir / "reference" / (sample_name(ph.id) + ".ttmt"));
  }
  for (Split split : {Split::train, Split::val, Split::test}) {
    const fs::path sub = dir / to_string(split);
    fs::create_directories(sub);
    for (const auto& s : ds.split(split)) {
      io::TensorArchive a;
      a.put("y", s.y.tensor());
      a.put("x", s.x.tensor());
      a.put("x_ref", s.x_ref->tensor());
      a.put("y_ref", s.y_ref->tensor());
      a.put("measured", s.measured.tensor());
      a.save(sub / (s.id + ".ttmt"));
      write_json(sub / (s.id + ".mask.json"), s.mask.to_json());
      write_json(sub / (s.id + ".ref.json"), {{"ref_id", s.ref_id}, {"ref_mask", s.ref_mask->to_json()}});
    }
  }
}

DataSample read_sample(const fs::path& dir, Split split, std::uint64_t id) {
  const fs::path sub = dir / to_string(split);
  const std::string name = sample_name(id);
  const auto a = io::TensorArchive::load(sub / (name + ".ttmt"));
  DataSample s;
  s.id = name;
  s.y = kspace::ComplexImage<float>(a.get_as<float>("y"));
  s.x = kspace::ComplexImage<float>(a.get_as<float>("x"));
  s.measured = kspace::KSpace<float>(a.get_as<float>("measured"));
  s.mask = kspace::SamplingMask::from_json(read_json(sub / (name + ".mask.json")));
  if (a.contains("x_ref") && a.contains("y_ref")) {
    s.x_ref = kspace::ComplexImage<float>(a.get_as<float>("x_ref"));
    s.y_ref = kspace::ComplexImage<float>(a.get_as<float>("y_ref"));
  }
  if (fs::exists(sub / (name + ".ref.json"))) {
    const auto ref = read_json(sub / (name + ".ref.json"));
    s.ref_id = ref.at("ref_id").get<std::string>();
    s.ref_mask = kspace::SamplingMask::from_json(ref.at("ref_mask"));
  }
  return s;
}

Dataset read_dataset(const fs::path& dir) {
  Dataset ds;
  ds.manifest = SplitManifest::from_json(read_json(dir / "manifest.json"));
  for (auto id : ds.manifest.reference) {
    const auto a = io::TensorArchive::load(dir / "reference" / (sample_name(id) + ".ttmt"));
    ds.reference_pool.push_back(Phantom{id, kspace::ComplexImage<float>(a.get_as<float>("y")), {}});
  }
  for (auto id : ds.manifest.train) ds.train.push_back(read_sample(dir, Split::train, id));
  for (auto id : ds.manifest.val) ds.val.push_back(read_sample(dir, Split::val, id));
  for (auto id : ds.manifest.test) ds.test.push_back(read_sample(dir, Split::test, id));
  return ds;
}

}  // namespace ttmr::data
