#include "ttmr/backbone/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "ttmr/errors.hpp"
#include "ttmr/io/container.hpp"

namespace ttmr::backbone {

namespace {

constexpr const char* kFormat = "ttmr-checkpoint";

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* ext) {
  std::filesystem::path p = stem;
  p += ext;
  return p;
}

}  // namespace

std::filesystem::path checkpoint_stem(const std::filesystem::path& path) {
  const auto ext = path.extension();
  if (ext == ".ttmt" || ext == ".json") return path.parent_path() / path.stem();
  return path;
}

Checkpoint Checkpoint::initial(const StrategyConfig& cfg) {
  Checkpoint c;
  c.config = cfg;
  c.params = init_strategy_params<float>(cfg);
  c.adam = ad::AdamState<float>::zeros_like(c.params);
  return c;
}

nlohmann::json Checkpoint::manifest() const {
  return {{"format", kFormat},
          {"strategy", to_string(config.strategy)},
          {"n_cascades", config.cascade.n_cascades},
          {"channels", config.cascade.hidden},
          {"seed", config.seed},
          {"epoch", epoch},
          {"step", adam.step},
          {"parameter_count", params.scalar_count()},
          {"config", config.to_json()},
          {"extra", extra}};
}

void Checkpoint::save(const std::filesystem::path& stem_in) const {
  const auto stem = checkpoint_stem(stem_in);
  io::TensorArchive ar;
  const auto& names = params.names();
  for (std::size_t i = 0; i < params.size(); ++i) ar.put("param/" + names[i], params.at(i));
  for (std::size_t i = 0; i < params.size(); ++i) ar.put("adam.m/" + names[i], adam.first_moment.at(i));
  for (std::size_t i = 0; i < params.size(); ++i) ar.put("adam.v/" + names[i], adam.second_moment.at(i));
  ar.save(with_suffix(stem, ".ttmt"));
  std::ofstream os(with_suffix(stem, ".json"), std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint manifest for '" + stem.string() + "'");
  os << manifest().dump(2) << '\n';
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  const auto stem = checkpoint_stem(path);
  const auto json_path = with_suffix(stem, ".json");
  std::ifstream is(json_path);
  if (!is) throw std::runtime_error("cannot open checkpoint manifest '" + json_path.string() + "'");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint manifest '" + json_path.string() + "': " + e.what());
  }
  if (m.value("format", std::string()) != kFormat) {
    throw FormatError("'" + json_path.string() + "' is not a checkpoint manifest");
  }
  Checkpoint c;
  c.config = StrategyConfig::from_json(m.at("config"));
  if (m.at("strategy").get<std::string>() != to_string(c.config.strategy)) {
    throw FormatError("checkpoint manifest strategy disagrees with its configuration");
  }
  c.epoch = m.at("epoch").get<std::size_t>();
  c.extra = m.value("extra", nlohmann::json::object());

  const auto ar = io::TensorArchive::load(with_suffix(stem, ".ttmt"));
  const auto layout = init_strategy_params<float>(c.config);
  for (const auto& name : layout.names()) {
    if (!ar.contains("param/" + name)) throw FormatError("checkpoint is missing parameter '" + name + "'");
    c.params.add(name, ar.get_as<float>("param/" + name));
  }
  c.adam = ad::AdamState<float>::zeros_like(c.params);
  c.adam.step = m.at("step").get<std::uint64_t>();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& name = layout.names()[i];
    if (ar.contains("adam.m/" + name)) c.adam.first_moment[i] = ar.get_as<float>("adam.m/" + name);
    if (ar.contains("adam.v/" + name)) c.adam.second_moment[i] = ar.get_as<float>("adam.v/" + name);
    if (c.adam.first_moment[i].shape() != layout.at(i).shape() ||
        c.adam.second_moment[i].shape() != layout.at(i).shape()) {
      throw FormatError("optimizer state for '" + name + "' has the wrong shape");
    }
  }
  for (const auto& [key, value] : ar.entries()) {
    const auto slash = key.find('/');
    if (slash == std::string::npos || !layout.contains(key.substr(slash + 1))) {
      throw FormatError("checkpoint holds unexpected tensor '" + key + "'");
    }
  }
  Model<float> check(c.config, c.params);  // validates names and shapes
  (void)check;
  return c;
}

bool operator==(const Checkpoint& a, const Checkpoint& b) {
  return a.config.to_json() == b.config.to_json() && a.params == b.params &&
         a.adam.first_moment == b.adam.first_moment && a.adam.second_moment == b.adam.second_moment &&
         a.adam.step == b.adam.step && a.epoch == b.epoch;
}

}  // namespace ttmr::backbone
