#include "tenips/config.hpp"

#include <fstream>
#include <istream>

namespace tenips {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T get(const nlohmann::json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument("config key '" + key + "' has the wrong type: " + v.dump());
  }
}

}  // namespace

ConfigValues parse_config(std::istream& is) {
  ConfigValues out;
  std::string line;
  for (int number = 1; std::getline(is, line); ++number) {
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    const std::string where = "config line " + std::to_string(number);
    if (eq == std::string::npos) throw std::invalid_argument(where + ": expected key = value");
    const std::string key = trim(text.substr(0, eq));
    if (key.empty()) throw std::invalid_argument(where + ": empty key");
    const auto value = nlohmann::json::parse(trim(text.substr(eq + 1)), nullptr, false);
    if (value.is_discarded()) throw std::invalid_argument(where + ": value is not valid JSON");
    if (!out.emplace(key, value).second) throw std::invalid_argument(where + ": duplicate key '" + key + "'");
  }
  return out;
}

ConfigValues load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path.string());
  return parse_config(is);
}

void apply_config(ExperimentConfig& cfg, const ConfigValues& values) {
  for (const auto& [key, v] : values) {
    if (key == "preset") cfg.preset = get<std::string>(v, key);
    else if (key == "seeds") cfg.seeds = get<std::vector<std::uint64_t>>(v, key);
    else if (key == "out_dir") cfg.out_dir = get<std::string>(v, key);
    else if (key == "scale") cfg.scale = get<double>(v, key);
    else if (key == "orders") cfg.orders = get<std::vector<Index>>(v, key);
    else if (key == "order") cfg.order = get<Index>(v, key);
    else if (key == "size") cfg.size = get<Index>(v, key);
    else if (key == "rank") cfg.rank = get<Index>(v, key);
    else if (key == "target_ranks") cfg.target_ranks = get<std::vector<Index>>(v, key);
    else if (key == "ratios") cfg.ratios = get<std::vector<double>>(v, key);
    else if (key == "models") cfg.models = get<std::vector<std::string>>(v, key);
    else if (key == "methods") cfg.methods = get<std::vector<std::string>>(v, key);
    else if (key == "sources") cfg.sources = get<std::vector<std::string>>(v, key);
    else if (key == "noise_level") cfg.noise_level = get<double>(v, key);
    else if (key == "tau") cfg.tau = get<double>(v, key);
    else if (key == "gamma") cfg.gamma = get<double>(v, key);
    else if (key == "step") cfg.step = get<double>(v, key);
    else if (key == "convex_iterations") cfg.convex_iterations = get<int>(v, key);
    else if (key == "nonconvex_iterations") cfg.nonconvex_iterations = get<int>(v, key);
    else if (key == "tau_ratios") cfg.tau_ratios = get<std::vector<double>>(v, key);
    else if (key == "gamma_ratios") cfg.gamma_ratios = get<std::vector<double>>(v, key);
    else if (key == "step_factors") cfg.step_factors = get<std::vector<double>>(v, key);
    else if (key == "save_tensors") cfg.save_tensors = get<bool>(v, key);
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

}  // namespace tenips
