/* Copyright 2026 The MaskSup Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Experiment configuration and its flat `key = value` text form.

#ifndef MASKSUP_CONFIG_HPP_
#define MASKSUP_CONFIG_HPP_

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "masksup/common.hpp"
#include "masksup/losses.hpp"
#include "masksup/maskgen.hpp"

namespace masksup {

enum class TrainMode { kBaseline, kCb, kMaskSup };

inline std::string ToString(TrainMode m) {
  switch (m) {
    case TrainMode::kBaseline: return "baseline";
    case TrainMode::kCb: return "cb";
    case TrainMode::kMaskSup: return "masksup";
  }
  return "?";
}

inline TrainMode ParseTrainMode(const std::string& s) {
  std::string l;
  for (char c : s) l += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (l == "baseline") return TrainMode::kBaseline;
  if (l == "cb") return TrainMode::kCb;
  if (l == "masksup") return TrainMode::kMaskSup;
  throw ConfigError("unknown mode '" + s + "' (expected baseline, cb or masksup)");
}

// Default loss weights for each training arm.
inline LossWeights DefaultWeights(TrainMode m) {
  switch (m) {
    case TrainMode::kBaseline: return {1.0, 0.0, 0.0};
    case TrainMode::kCb: return {1.0, 1.0, 0.0};
    case TrainMode::kMaskSup: return {1.0, 1.0, 1.0};
  }
  return {};
}

struct TrainConfig {
  TrainMode mode = TrainMode::kMaskSup;
  LossWeights weights{1.0, 1.0, 1.0};
  MaskRegime regime = MaskRegime::High();
  MaskGenConfig mask;
  int epochs = 30;
  int batch_size = 8;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  // Write a rolling checkpoint every this many steps; 0 disables.
  std::int64_t checkpoint_every = 0;
  int base_width = 8;
  int depth = 3;
  bool context_masked_pixels_only = false;

  void Validate() const {
    weights.Validate();
    switch (mode) {
      case TrainMode::kBaseline:
        if (weights.alpha2 != 0.0 || weights.alpha3 != 0.0) {
          throw ConfigError("baseline mode requires alpha2 = alpha3 = 0");
        }
        break;
      case TrainMode::kCb:
        if (!(weights.alpha2 > 0.0) || weights.alpha3 != 0.0) {
          throw ConfigError("cb mode requires alpha2 > 0 and alpha3 = 0");
        }
        break;
      case TrainMode::kMaskSup:
        if (!(weights.alpha2 > 0.0) || !(weights.alpha3 > 0.0)) {
          throw ConfigError("masksup mode requires alpha2 > 0 and alpha3 > 0");
        }
        break;
    }
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
    if (depth < 2) throw ConfigError("depth must be >= 2");
    if (base_width < 4) throw ConfigError("base_width must be >= 4");
    try {
      mask.Validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
};

enum class DatasetKind { kBinary, kMulticlass, kDirectory };

inline std::string ToString(DatasetKind k) {
  switch (k) {
    case DatasetKind::kBinary: return "binary";
    case DatasetKind::kMulticlass: return "multiclass";
    case DatasetKind::kDirectory: return "dir";
  }
  return "?";
}

struct DataConfig {
  DatasetKind kind = DatasetKind::kBinary;
  int n = 200;
  int size = 64;
  double ambiguity = 0.3;
  double imbalance = 3.0;
  int num_classes = 2;
  std::string dir;
  std::uint64_t seed = 0;
  IgnoreLabel ignore_label;
};

struct ExperimentConfig {
  TrainConfig train;
  DataConfig data;
  std::string output_root = "runs";
};

using KeyValues = std::map<std::string, std::string>;

namespace config_internal {

inline std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string Unquote(std::string v) {
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                        (v.front() == '\'' && v.back() == '\''))) {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

template <typename N>
N ParseNumber(const std::string& key, const std::string& v) {
  N out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value '" + v + "' for key '" + key + "'");
  }
  return out;
}

inline bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid boolean '" + v + "' for key '" + key + "'");
}

// Shortest text that parses back to the same double.
inline std::string FormatDouble(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace config_internal

// Parses `key = value` lines. '#' starts a comment; values may be quoted.
inline KeyValues ParseKeyValues(const std::string& text) {
  using namespace config_internal;
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    kv[Trim(line.substr(0, eq))] = Unquote(Trim(line.substr(eq + 1)));
  }
  return kv;
}

inline KeyValues ReadKeyValueFile(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ParseKeyValues(ss.str());
}

// Every accepted key, in canonical order.
inline const std::vector<std::string>& ConfigKeys() {
  static const std::vector<std::string> keys = {
      "mode", "alpha1", "alpha2", "alpha3", "regime", "epochs", "batch_size",
      "learning_rate", "seed", "checkpoint_every", "base_width", "depth",
      "context_masked_pixels_only", "mask.num_strokes_min",
      "mask.num_strokes_max", "mask.stroke_width_min", "mask.stroke_width_max",
      "mask.num_holes_min", "mask.num_holes_max", "mask.hole_radius_min",
      "mask.hole_radius_max", "mask.segment_length_min",
      "mask.segment_length_max", "mask.max_resample_attempts", "dataset",
      "data_n", "data_size", "ambiguity", "imbalance", "num_classes",
      "data_dir", "data_seed", "ignore_label", "output_root"};
  return keys;
}

// Builds a config from key-values. Loss weights default to the mode's arm
// unless given explicitly. Unknown keys are rejected by name.
inline ExperimentConfig ConfigFromKeyValues(const KeyValues& kv) {
  using namespace config_internal;
  const auto& known = ConfigKeys();
  for (const auto& [k, v] : kv) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
  ExperimentConfig cfg;
  TrainConfig& t = cfg.train;
  DataConfig& d = cfg.data;
  auto get = [&](const std::string& k) -> const std::string* {
    auto it = kv.find(k);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto* v = get("mode")) t.mode = ParseTrainMode(*v);
  t.weights = DefaultWeights(t.mode);
  if (auto* v = get("alpha1")) t.weights.alpha1 = ParseNumber<double>("alpha1", *v);
  if (auto* v = get("alpha2")) t.weights.alpha2 = ParseNumber<double>("alpha2", *v);
  if (auto* v = get("alpha3")) t.weights.alpha3 = ParseNumber<double>("alpha3", *v);
  if (auto* v = get("regime")) {
    try {
      t.regime = RegimeFor(ParseMaskLevel(*v));
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  if (auto* v = get("epochs")) t.epochs = ParseNumber<int>("epochs", *v);
  if (auto* v = get("batch_size")) t.batch_size = ParseNumber<int>("batch_size", *v);
  if (auto* v = get("learning_rate")) {
    t.learning_rate = ParseNumber<double>("learning_rate", *v);
  }
  if (auto* v = get("seed")) t.seed = ParseNumber<std::uint64_t>("seed", *v);
  if (auto* v = get("checkpoint_every")) {
    t.checkpoint_every = ParseNumber<std::int64_t>("checkpoint_every", *v);
  }
  if (auto* v = get("base_width")) t.base_width = ParseNumber<int>("base_width", *v);
  if (auto* v = get("depth")) t.depth = ParseNumber<int>("depth", *v);
  if (auto* v = get("context_masked_pixels_only")) {
    t.context_masked_pixels_only = ParseBool("context_masked_pixels_only", *v);
  }
  auto int_key = [&](const char* k, int& dst) {
    if (auto* v = get(k)) dst = ParseNumber<int>(k, *v);
  };
  auto dbl_key = [&](const char* k, double& dst) {
    if (auto* v = get(k)) dst = ParseNumber<double>(k, *v);
  };
  int_key("mask.num_strokes_min", t.mask.num_strokes_range.lo);
  int_key("mask.num_strokes_max", t.mask.num_strokes_range.hi);
  dbl_key("mask.stroke_width_min", t.mask.stroke_width_range.lo);
  dbl_key("mask.stroke_width_max", t.mask.stroke_width_range.hi);
  int_key("mask.num_holes_min", t.mask.num_holes_range.lo);
  int_key("mask.num_holes_max", t.mask.num_holes_range.hi);
  dbl_key("mask.hole_radius_min", t.mask.hole_radius_range.lo);
  dbl_key("mask.hole_radius_max", t.mask.hole_radius_range.hi);
  dbl_key("mask.segment_length_min", t.mask.segment_length_range.lo);
  dbl_key("mask.segment_length_max", t.mask.segment_length_range.hi);
  int_key("mask.max_resample_attempts", t.mask.max_resample_attempts);

  if (auto* v = get("dataset")) {
    if (*v == "binary") d.kind = DatasetKind::kBinary;
    else if (*v == "multiclass") d.kind = DatasetKind::kMulticlass;
    else if (*v == "dir") d.kind = DatasetKind::kDirectory;
    else throw ConfigError("unknown dataset '" + *v + "'");
  }
  if (d.kind == DatasetKind::kMulticlass) d.num_classes = 6;
  int_key("data_n", d.n);
  int_key("data_size", d.size);
  dbl_key("ambiguity", d.ambiguity);
  dbl_key("imbalance", d.imbalance);
  int_key("num_classes", d.num_classes);
  if (auto* v = get("data_dir")) d.dir = *v;
  if (auto* v = get("data_seed")) d.seed = ParseNumber<std::uint64_t>("data_seed", *v);
  if (auto* v = get("ignore_label")) {
    if (*v == "none" || v->empty()) d.ignore_label.reset();
    else d.ignore_label = ParseNumber<std::int32_t>("ignore_label", *v);
  }
  if (auto* v = get("output_root")) cfg.output_root = *v;
  if (d.kind == DatasetKind::kBinary) d.num_classes = 2;
  if (d.kind == DatasetKind::kDirectory && d.dir.empty()) {
    throw ConfigError("dataset 'dir' requires data_dir");
  }
  t.Validate();
  return cfg;
}

// Canonical key-value form; ConfigFromKeyValues(ToKeyValues(c)) == c.
inline KeyValues ToKeyValues(const ExperimentConfig& cfg) {
  using config_internal::FormatDouble;
  const TrainConfig& t = cfg.train;
  const DataConfig& d = cfg.data;
  KeyValues kv;
  kv["mode"] = ToString(t.mode);
  kv["alpha1"] = FormatDouble(t.weights.alpha1);
  kv["alpha2"] = FormatDouble(t.weights.alpha2);
  kv["alpha3"] = FormatDouble(t.weights.alpha3);
  kv["regime"] = ToString(t.regime.level);
  kv["epochs"] = std::to_string(t.epochs);
  kv["batch_size"] = std::to_string(t.batch_size);
  kv["learning_rate"] = FormatDouble(t.learning_rate);
  kv["seed"] = std::to_string(t.seed);
  kv["checkpoint_every"] = std::to_string(t.checkpoint_every);
  kv["base_width"] = std::to_string(t.base_width);
  kv["depth"] = std::to_string(t.depth);
  kv["context_masked_pixels_only"] = t.context_masked_pixels_only ? "true" : "false";
  kv["mask.num_strokes_min"] = std::to_string(t.mask.num_strokes_range.lo);
  kv["mask.num_strokes_max"] = std::to_string(t.mask.num_strokes_range.hi);
  kv["mask.stroke_width_min"] = FormatDouble(t.mask.stroke_width_range.lo);
  kv["mask.stroke_width_max"] = FormatDouble(t.mask.stroke_width_range.hi);
  kv["mask.num_holes_min"] = std::to_string(t.mask.num_holes_range.lo);
  kv["mask.num_holes_max"] = std::to_string(t.mask.num_holes_range.hi);
  kv["mask.hole_radius_min"] = FormatDouble(t.mask.hole_radius_range.lo);
  kv["mask.hole_radius_max"] = FormatDouble(t.mask.hole_radius_range.hi);
  kv["mask.segment_length_min"] = FormatDouble(t.mask.segment_length_range.lo);
  kv["mask.segment_length_max"] = FormatDouble(t.mask.segment_length_range.hi);
  kv["mask.max_resample_attempts"] = std::to_string(t.mask.max_resample_attempts);
  kv["dataset"] = ToString(d.kind);
  kv["data_n"] = std::to_string(d.n);
  kv["data_size"] = std::to_string(d.size);
  kv["ambiguity"] = FormatDouble(d.ambiguity);
  kv["imbalance"] = FormatDouble(d.imbalance);
  kv["num_classes"] = std::to_string(d.num_classes);
  kv["data_dir"] = d.dir;
  kv["data_seed"] = std::to_string(d.seed);
  kv["ignore_label"] = d.ignore_label ? std::to_string(*d.ignore_label) : "none";
  kv["output_root"] = cfg.output_root;
  return kv;
}

inline std::string FormatKeyValues(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) {
    const bool quote = v.empty() || v.find_first_of(" #\t") != std::string::npos;
    out += k + " = " + (quote ? "\"" + v + "\"" : v) + "\n";
  }
  return out;
}

// Short stable hash of the canonical config text.
inline std::string ConfigHash(const ExperimentConfig& cfg) {
  const std::uint64_t h = HashString(FormatKeyValues(ToKeyValues(cfg)));
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << (h & 0xffffffffULL);
  return os.str();
}

}  // namespace masksup

#endif  // MASKSUP_CONFIG_HPP_
