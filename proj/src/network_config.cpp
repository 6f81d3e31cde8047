#include "json.hpp"

#include "bregnext/network.hpp"

namespace bnx {
namespace {

constexpr int kConfigVersion = 1;
constexpr const char* kConfigFormat = "bregnext-network";

template <typename V>
V field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("network config: missing '") + key + "'");
  try {
    return j.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("network config: bad '") + key + "': " + e.what());
  }
}

}  // namespace

std::string config_to_text(const NetworkConfig& cfg) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : cfg.stages)
    stages.push_back({{"units", s.units}, {"channels", s.channels}, {"transition", s.transition}});
  nlohmann::json j{
      {"format", kConfigFormat},
      {"version", kConfigVersion},
      {"name", cfg.name},
      {"input", {cfg.input_height, cfg.input_width, cfg.input_channels}},
      {"stem", {{"channels", cfg.stem.channels}, {"kernel", cfg.stem.kernel}, {"stride", cfg.stem.stride}}},
      {"stages", stages},
      {"bypass", cfg.bypass.to_string()},
      {"head", head_name(cfg.head)},
      {"num_classes", cfg.num_classes},
  };
  return j.dump(2);
}

NetworkConfig config_from_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("network config: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kConfigFormat)
    throw ConfigError("network config: not a bregnext-network document");
  if (field<int>(j, "version") != kConfigVersion)
    throw ConfigError("network config: unsupported version " + j.at("version").dump());

  NetworkConfig cfg;
  cfg.name = field<std::string>(j, "name");
  const auto input = field<std::vector<std::size_t>>(j, "input");
  if (input.size() != 3) throw ConfigError("network config: input must be [H, W, C]");
  cfg.input_height = input[0];
  cfg.input_width = input[1];
  cfg.input_channels = input[2];
  const auto stem = field<nlohmann::json>(j, "stem");
  cfg.stem = {field<std::size_t>(stem, "channels"), field<std::size_t>(stem, "kernel"),
              field<std::size_t>(stem, "stride")};
  for (const auto& s : field<nlohmann::json>(j, "stages"))
    cfg.stages.push_back({field<std::size_t>(s, "units"), field<std::size_t>(s, "channels"), field<bool>(s, "transition")});
  cfg.bypass = MappingKind::parse(field<std::string>(j, "bypass"));
  cfg.head = head_from_name(field<std::string>(j, "head"));
  cfg.num_classes = field<std::size_t>(j, "num_classes");
  cfg.validate();
  return cfg;
}

}  // namespace bnx
