#include "fromage/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace fromage {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

bool in_schema(std::string_view key) {
  const auto& keys = Config::schema();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

}  // namespace

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::size_t stop = comma == std::string_view::npos ? text.size() : comma;
    std::string item = trim(text.substr(start, stop - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

const std::vector<std::string>& Config::schema() {
  static const std::vector<std::string> keys = {
      // top level
      "seed", "label", "epochs", "batch_size", "loss", "checkpoint_epochs", "checkpoint_steps",
      // dataset block
      "data.source", "data.images", "data.labels", "data.subset_size", "data.num_classes",
      "data.dim", "data.per_class", "data.separation",
      // network
      "model.depth", "model.width", "model.widths", "model.nonlinearity", "model.leaky_slope",
      "model.final_nonlinearity", "model.init", "model.init_scale", "model.bias",
      // optimizer block
      "optimizer.kind", "optimizer.eta", "optimizer.momentum", "optimizer.beta1",
      "optimizer.beta2", "optimizer.epsilon", "optimizer.weight_decay",
      "optimizer.epsilon_floor", "optimizer.clamp",
      "schedule.kind", "schedule.gamma", "schedule.factor", "schedule.patience",
      // per-command blocks
      "perturb_sweep.etas", "perturb_sweep.checkpoints", "perturb_sweep.front_loaded",
      "perturb_sweep.snapshots",
      "norm_growth.steps", "norm_growth.eta", "norm_growth.with_prefactor", "norm_growth.rows",
      "norm_growth.cols",
      "depth_sweep.depths", "depth_sweep.optimizers", "depth_sweep.fromage_etas",
      "depth_sweep.sgd_etas", "depth_sweep.adam_etas", "depth_sweep.lars_etas",
      "depth_sweep.workers", "depth_sweep.full_fidelity",
      "verify_bounds.trials", "verify_bounds.depths", "verify_bounds.slopes",
      "verify_bounds.relative_sizes", "verify_bounds.width", "verify_bounds.nonlinearity",
      "verify_bounds.fault_scale", "verify_bounds.lemma_trials", "verify_bounds.toy_trials",
      "verify_bounds.descent_trials", "verify_bounds.descent_grid",
      "lr_grid.etas", "lr_grid.optimizers", "lr_grid.workers",
  };
  return keys;
}

Config Config::parse(std::string_view text, const std::filesystem::path& base_dir) {
  boost::property_tree::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }

  Config config;
  config.base_dir_ = base_dir;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      config.entries_[name] = trim(node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) {
      if (!leaf.empty()) throw ConfigError("config: nested sections are not supported");
      config.entries_[name + "." + key] = trim(leaf.data());
    }
  }
  for (const auto& [key, value] : config.entries_) {
    if (key == "model.bias") {
      if (value != "false" && value != "0")
        throw ConfigError(
            "config: model.bias is not supported; layers are pure matrix maps without "
            "biases (see README, 'Network model')");
      continue;
    }
    if (!in_schema(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  return config;
}

Config Config::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("config: cannot open " + file.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), file.has_parent_path() ? file.parent_path() : ".");
}

bool Config::has(std::string_view key) const { return entries_.count(std::string(key)) > 0; }

std::string Config::get_string(std::string_view key, std::string_view fallback) const {
  const auto it = entries_.find(std::string(key));
  return it == entries_.end() ? std::string(fallback) : it->second;
}

std::string Config::require_string(std::string_view key) const {
  const auto it = entries_.find(std::string(key));
  if (it == entries_.end()) throw ConfigError("config: missing required key '" + std::string(key) + "'");
  return it->second;
}

namespace {

double parse_double(std::string_view key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + std::string(key) + "' expects a number, got '" + value + "'");
  }
}

long long parse_int(std::string_view key, const std::string& value) {
  long long v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size())
    throw ConfigError("config: '" + std::string(key) + "' expects an integer, got '" + value + "'");
  return v;
}

}  // namespace

double Config::get_double(std::string_view key, double fallback) const {
  return has(key) ? parse_double(key, get_string(key, "")) : fallback;
}

long long Config::get_int(std::string_view key, long long fallback) const {
  return has(key) ? parse_int(key, get_string(key, "")) : fallback;
}

std::uint64_t Config::get_u64(std::string_view key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string value = get_string(key, "");
  std::uint64_t v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size())
    throw ConfigError("config: '" + std::string(key) + "' expects an unsigned integer, got '" +
                      value + "'");
  return v;
}

bool Config::get_bool(std::string_view key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string value = get_string(key, "");
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("config: '" + std::string(key) + "' expects a boolean, got '" + value + "'");
}

std::vector<double> Config::get_doubles(std::string_view key, std::vector<double> fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const std::string& item : split_list(get_string(key, ""))) out.push_back(parse_double(key, item));
  return out;
}

std::vector<long long> Config::get_ints(std::string_view key, std::vector<long long> fallback) const {
  if (!has(key)) return fallback;
  std::vector<long long> out;
  for (const std::string& item : split_list(get_string(key, ""))) out.push_back(parse_int(key, item));
  return out;
}

std::vector<std::string> Config::get_strings(std::string_view key,
                                             std::vector<std::string> fallback) const {
  if (!has(key)) return fallback;
  return split_list(get_string(key, ""));
}

std::filesystem::path Config::get_path(std::string_view key) const {
  std::filesystem::path p = require_string(key);
  if (p.is_relative()) p = base_dir_ / p;
  if (!std::filesystem::exists(p))
    throw ConfigError("config: '" + std::string(key) + "' points to missing file " + p.string());
  return p;
}

std::vector<std::filesystem::path> Config::get_paths(std::string_view key) const {
  std::vector<std::filesystem::path> out;
  for (const std::string& item : get_strings(key, {})) {
    std::filesystem::path p = item;
    if (p.is_relative()) p = base_dir_ / p;
    if (!std::filesystem::exists(p))
      throw ConfigError("config: '" + std::string(key) + "' points to missing file " + p.string());
    out.push_back(p);
  }
  return out;
}

void Config::set(std::string_view key, std::string value) {
  if (!in_schema(key)) throw ConfigError("config: unknown key '" + std::string(key) + "'");
  entries_[std::string(key)] = std::move(value);
}

std::uint64_t Config::hash() const {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  for (const auto& [key, value] : entries_) {
    mix(key);
    mix("=");
    mix(value);
    mix("\n");
  }
  return h;
}

}  // namespace fromage
