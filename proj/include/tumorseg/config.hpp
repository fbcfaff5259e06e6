#pragma once

// Pipeline configuration and its canonical text form: one key=value per
// line, keys sorted, numbers in shortest round-trip notation.

#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tumorseg/features.hpp"
#include "tumorseg/forest.hpp"
#include "tumorseg/preprocess.hpp"
#include "tumorseg/texton.hpp"

namespace tumorseg {

struct PipelineConfig {
  PreprocessConfig preprocess;
  RoiConfig roi;
  ForestConfig forest;
  TextonConfig texton;
  std::uint64_t texton_seed = 0;
  /// Components smaller than this fraction of the largest one are erased.
  double min_component_fraction = 0.1;

  void validate() const {
    preprocess.validate();
    texton.validate();
    forest.validate(feature_count(texton.k));
    if (roi.margin_voxels < 0) throw Error(ErrorCode::InvalidArgument, "roi margin must be >= 0");
    if (!(min_component_fraction >= 0.0 && min_component_fraction <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "min_component_fraction must lie in [0, 1]");
    }
  }

  /// Routes one seed to every random component.
  void set_seed(std::uint64_t seed) {
    forest.seed = seed;
    texton_seed = seed;
  }
};

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += format_number(values[i]);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw Error(ErrorCode::ConfigParse, "bad value for " + key + ": '" + text + "'");
  }
  return value;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) out.push_back(parse_number<double>(key, item));
  if (out.empty()) throw Error(ErrorCode::ConfigParse, "empty list for " + key);
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw Error(ErrorCode::ConfigParse, "bad boolean for " + key + ": '" + text + "'");
}

}  // namespace detail

inline std::map<std::string, std::string> config_entries(const PipelineConfig& c) {
  using detail::format_number;
  std::map<std::string, std::string> kv;
  kv["forest.k_attributes"] = std::to_string(c.forest.k_attributes);
  kv["forest.max_depth"] = std::to_string(c.forest.max_depth);
  kv["forest.max_samples_per_class"] = std::to_string(c.forest.max_samples_per_class);
  kv["forest.min_leaf"] = std::to_string(c.forest.min_leaf);
  kv["forest.n_trees"] = std::to_string(c.forest.n_trees);
  kv["forest.seed"] = std::to_string(c.forest.seed);
  kv["postprocess.min_component_fraction"] = format_number(c.min_component_fraction);
  kv["preprocess.hist_bins"] = std::to_string(c.preprocess.hist_bins);
  kv["preprocess.reference_case"] = c.preprocess.reference_case;
  kv["preprocess.tail_fraction"] = format_number(c.preprocess.tail_fraction);
  kv["roi.margin_voxels"] = std::to_string(c.roi.margin_voxels);
  kv["texton.gamma"] = format_number(c.texton.grid.gamma);
  kv["texton.k"] = std::to_string(c.texton.k);
  kv["texton.lambdas"] = detail::format_list(c.texton.grid.lambdas);
  kv["texton.max_iter"] = std::to_string(c.texton.max_iter);
  kv["texton.max_samples"] = std::to_string(c.texton.max_samples);
  kv["texton.psi"] = format_number(c.texton.grid.psi);
  kv["texton.seed"] = std::to_string(c.texton_seed);
  kv["texton.sigmas"] = detail::format_list(c.texton.grid.sigmas);
  kv["texton.thetas_deg"] = detail::format_list(c.texton.grid.thetas_deg);
  kv["texton.tol"] = format_number(c.texton.tol);
  kv["texton.volumetric"] = c.texton.volumetric ? "true" : "false";
  kv["texton.window"] = std::to_string(c.texton.window);
  return kv;
}

inline std::string to_config_text(const PipelineConfig& c) {
  std::string out;
  for (const auto& [k, v] : config_entries(c)) out += k + "=" + v + "\n";
  return out;
}

/// Sets one key; unknown keys are a ConfigParse error.
inline void apply_config_entry(PipelineConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_number;
  if (key == "forest.k_attributes") c.forest.k_attributes = parse_number<int>(key, value);
  else if (key == "forest.max_depth") c.forest.max_depth = parse_number<int>(key, value);
  else if (key == "forest.max_samples_per_class") c.forest.max_samples_per_class = parse_number<std::size_t>(key, value);
  else if (key == "forest.min_leaf") c.forest.min_leaf = parse_number<int>(key, value);
  else if (key == "forest.n_trees") c.forest.n_trees = parse_number<int>(key, value);
  else if (key == "forest.seed") c.forest.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "postprocess.min_component_fraction") c.min_component_fraction = parse_number<double>(key, value);
  else if (key == "preprocess.hist_bins") c.preprocess.hist_bins = parse_number<int>(key, value);
  else if (key == "preprocess.reference_case") c.preprocess.reference_case = value;
  else if (key == "preprocess.tail_fraction") c.preprocess.tail_fraction = parse_number<double>(key, value);
  else if (key == "roi.margin_voxels") c.roi.margin_voxels = parse_number<int>(key, value);
  else if (key == "texton.gamma") c.texton.grid.gamma = parse_number<double>(key, value);
  else if (key == "texton.k") c.texton.k = parse_number<int>(key, value);
  else if (key == "texton.lambdas") c.texton.grid.lambdas = detail::parse_list(key, value);
  else if (key == "texton.max_iter") c.texton.max_iter = parse_number<int>(key, value);
  else if (key == "texton.max_samples") c.texton.max_samples = parse_number<std::size_t>(key, value);
  else if (key == "texton.psi") c.texton.grid.psi = parse_number<double>(key, value);
  else if (key == "texton.seed") c.texton_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "texton.sigmas") c.texton.grid.sigmas = detail::parse_list(key, value);
  else if (key == "texton.thetas_deg") c.texton.grid.thetas_deg = detail::parse_list(key, value);
  else if (key == "texton.tol") c.texton.tol = parse_number<double>(key, value);
  else if (key == "texton.volumetric") c.texton.volumetric = detail::parse_bool(key, value);
  else if (key == "texton.window") c.texton.window = parse_number<int>(key, value);
  else throw Error(ErrorCode::ConfigParse, "unknown config key '" + key + "'");
}

/// Overlays key=value lines onto `base`. Blank lines and '#' comments are skipped.
inline PipelineConfig parse_config_text(const std::string& text, PipelineConfig base = {}) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigParse, "line " + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    apply_config_entry(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

}  // namespace tumorseg
