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

// Command-line front end: train, eval, preview-masks, robustness, plots,
// synth-data.
//
// Exit codes: 0 success, 1 other failure, 2 usage or config error,
// 3 non-finite loss during training.

#ifndef MASKSUP_CLI_HPP_
#define MASKSUP_CLI_HPP_

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "masksup/checkpoint.hpp"
#include "masksup/common.hpp"
#include "masksup/config.hpp"
#include "masksup/data.hpp"
#include "masksup/io.hpp"
#include "masksup/maskgen.hpp"
#include "masksup/metrics.hpp"
#include "masksup/plot.hpp"
#include "masksup/trainer.hpp"

namespace masksup::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

inline DatasetSplit LoadDataset(const DataConfig& d) {
  switch (d.kind) {
    case DatasetKind::kBinary:
      return SynthBinaryShapes(d.n, d.size, d.ambiguity, d.seed);
    case DatasetKind::kMulticlass:
      return SynthMulticlassScenes(d.n, d.size, d.num_classes, d.imbalance, d.seed);
    case DatasetKind::kDirectory:
      return io::LoadImageMaskDir(d.dir, d.num_classes, d.ignore_label);
  }
  throw ConfigError("unknown dataset kind");
}

inline const std::vector<Sample>& SelectSplit(const DatasetSplit& d,
                                              const std::string& name) {
  if (name == "train") return d.train;
  if (name == "val") return d.val;
  if (name == "test") return d.test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

inline void WriteJson(const fs::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << j.dump(2) << "\n";
}

inline nlohmann::json ReadJson(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot open '" + path.string() + "'");
  return nlohmann::json::parse(f);
}

inline std::vector<nlohmann::json> ReadJsonLines(const fs::path& path) {
  std::vector<nlohmann::json> out;
  std::ifstream f(path);
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

inline std::string UtcTimestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y%m%dT%H%M%S");
  return os.str();
}

// "<mode>-<config hash>-<timestamp>", suffixed when the name is taken.
inline fs::path FreshRunDir(const ExperimentConfig& cfg) {
  const std::string base =
      ToString(cfg.train.mode) + "-" + ConfigHash(cfg) + "-" + UtcTimestamp();
  fs::path dir = fs::path(cfg.output_root) / base;
  for (int i = 1; fs::exists(dir); ++i) {
    dir = fs::path(cfg.output_root) / (base + "-" + std::to_string(i));
  }
  return dir;
}

struct TrainArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string mode, regime, output_root, run_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
};

inline ExperimentConfig ResolveConfig(const TrainArgs& a) {
  KeyValues kv;
  if (!a.config_path.empty()) kv = ReadKeyValueFile(a.config_path);
  for (const std::string& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got '" + s + "'");
    }
    kv[config_internal::Trim(s.substr(0, eq))] =
        config_internal::Unquote(config_internal::Trim(s.substr(eq + 1)));
  }
  if (!a.mode.empty()) {
    kv["mode"] = a.mode;
    // A mode flag selects that arm's weights unless alphas are set explicitly
    // on the command line.
    for (const char* k : {"alpha1", "alpha2", "alpha3"}) {
      bool on_cli = false;
      for (const std::string& s : a.sets) on_cli |= s.rfind(std::string(k) + "=", 0) == 0;
      if (!on_cli) kv.erase(k);
    }
  }
  if (!a.regime.empty()) kv["regime"] = a.regime;
  if (!a.output_root.empty()) kv["output_root"] = a.output_root;
  if (a.seed) kv["seed"] = std::to_string(*a.seed);
  if (a.epochs) kv["epochs"] = std::to_string(*a.epochs);
  return ConfigFromKeyValues(kv);
}

inline int CmdTrain(const TrainArgs& a, std::ostream& out) {
  const ExperimentConfig cfg = ResolveConfig(a);
  const DatasetSplit data = LoadDataset(cfg.data);
  const fs::path dir = a.run_dir.empty() ? FreshRunDir(cfg) : fs::path(a.run_dir);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "config.toml");
    f << FormatKeyValues(ToKeyValues(cfg));
  }
  std::ofstream log(dir / "log.jsonl");
  std::ofstream epochs(dir / "epochs.jsonl");
  TrainOptions opt;
  opt.output_dir = dir;
  opt.experiment = cfg;
  opt.ignore_label = cfg.data.ignore_label;
  opt.hooks.on_step = [&](const StepRecord& r) { log << ToJson(r).dump() << "\n"; };
  opt.hooks.on_epoch = [&](const EpochRecord& r) {
    epochs << ToJson(r).dump() << "\n";
    epochs.flush();
    log.flush();
  };
  const TrainResult res = Train(cfg.train, data, opt);
  const auto& test = data.test.empty() ? data.val : data.test;
  nlohmann::json report;
  report["mode"] = ToString(cfg.train.mode);
  report["seed"] = cfg.train.seed;
  report["regime"] = ToString(cfg.train.regime.level);
  report["dataset"] = ToString(cfg.data.kind);
  report["config_hash"] = ConfigHash(cfg);
  report["config"] = ToKeyValues(cfg);
  report["parameter_count"] = res.report.parameter_count;
  report["best_epoch"] = res.report.best_epoch;
  report["best_val_miou"] = res.report.best_val_miou;
  report["best_checkpoint"] = "best.ckpt";
  report["steps"] = res.report.steps.size();
  report["masks_generated"] = res.report.masks_generated;
  report["final_train_loss"] =
      res.report.epochs.empty() ? 0.0 : res.report.epochs.back().train_loss;
  if (!test.empty()) {
    report["test"] = ToJson(Evaluate(res.best, test, cfg.data.ignore_label));
  }
  WriteJson(dir / "report.json", report);
  out << dir.string() << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string split = "test";
  std::vector<std::string> sets;
  std::string out_path;
};

inline ExperimentConfig WithDataOverrides(ExperimentConfig cfg,
                                          const std::vector<std::string>& sets) {
  if (sets.empty()) return cfg;
  KeyValues kv = ToKeyValues(cfg);
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got '" + s + "'");
    }
    kv[config_internal::Trim(s.substr(0, eq))] =
        config_internal::Unquote(config_internal::Trim(s.substr(eq + 1)));
  }
  return ConfigFromKeyValues(kv);
}

inline Checkpoint OpenCheckpoint(const std::string& path) {
  if (!fs::is_regular_file(path)) {
    throw ConfigError("checkpoint '" + path + "' does not exist");
  }
  return LoadCheckpoint(path);
}

inline int CmdEval(const EvalArgs& a, std::ostream& out) {
  const Checkpoint ck = OpenCheckpoint(a.checkpoint);
  const ExperimentConfig cfg = WithDataOverrides(ck.config, a.sets);
  const DatasetSplit data = LoadDataset(cfg.data);
  if (data.num_classes != ck.net.num_classes()) {
    throw ConfigError("dataset has " + std::to_string(data.num_classes) +
                      " classes but the checkpoint predicts " +
                      std::to_string(ck.net.num_classes()));
  }
  const MetricsReport r =
      Evaluate(ck.net, SelectSplit(data, a.split), cfg.data.ignore_label);
  nlohmann::json j = ToJson(r);
  j["split"] = a.split;
  j["checkpoint"] = a.checkpoint;
  const fs::path dst = a.out_path.empty()
                           ? fs::path(a.checkpoint).parent_path() / ("eval-" + a.split + ".json")
                           : fs::path(a.out_path);
  WriteJson(dst, j);
  out << j.dump(2) << "\n";
  return kExitOk;
}

struct PreviewArgs {
  std::string out_dir;
  std::string regime = "high";
  int count = 8;
  int size = 64;
  std::uint64_t seed = 0;
  std::string config_path;
};

inline int CmdPreviewMasks(const PreviewArgs& a, std::ostream& out) {
  ExperimentConfig cfg;
  if (!a.config_path.empty()) {
    cfg = ConfigFromKeyValues(ReadKeyValueFile(a.config_path));
  }
  MaskRegime regime;
  try {
    regime = RegimeFor(ParseMaskLevel(a.regime));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (a.count < 1) throw ConfigError("--count must be positive");
  DataConfig d = cfg.data;
  d.n = std::max(a.count, 10);
  d.size = a.size;
  d.seed = a.seed;
  const DatasetSplit data = LoadDataset(d);
  std::vector<const Sample*> pool;
  for (const auto* part : {&data.train, &data.val, &data.test})
    for (const Sample& s : *part) pool.push_back(&s);
  fs::create_directories(a.out_dir);
  nlohmann::json index = nlohmann::json::array();
  for (int i = 0; i < a.count; ++i) {
    const Sample& s = *pool[static_cast<std::size_t>(i) % pool.size()];
    const HoleMask m =
        GenerateMask(s.image.height(), s.image.width(), regime, cfg.train.mask,
                     DeriveSeed({a.seed, 0x70726576ULL, static_cast<std::uint64_t>(i)}));
    char name[32];
    std::snprintf(name, sizeof(name), "%03d", i);
    io::WriteHoleMask(fs::path(a.out_dir) / (std::string("mask_") + name + ".png"), m);
    io::WriteImage(fs::path(a.out_dir) / (std::string("masked_") + name + ".png"),
                   ApplyMask(s.image, m));
    const double f = MaskedFraction(m);
    index.push_back({{"index", i}, {"sample", s.id}, {"masked_fraction", f}});
    out << name << " " << s.id << " masked_fraction=" << f << "\n";
  }
  WriteJson(fs::path(a.out_dir) / "masks.json", index);
  return kExitOk;
}

inline std::vector<double> ParseCoverages(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = config_internal::Trim(item);
    if (item.empty()) continue;
    out.push_back(config_internal::ParseNumber<double>("coverages", item));
  }
  if (out.empty()) throw ConfigError("--coverages is empty");
  for (double c : out) {
    if (!(c >= 0.0 && c < 1.0)) {
      throw ConfigError("coverage " + std::to_string(c) + " outside [0, 1)");
    }
  }
  return out;
}

struct RobustnessArgs {
  std::string checkpoint;
  std::string coverages = "0,0.25,0.5,0.7";
  std::uint64_t seed = 0;
  std::string split = "test";
  std::string out_dir;
};

inline int CmdRobustness(const RobustnessArgs& a, std::ostream& out) {
  const std::vector<double> coverages = ParseCoverages(a.coverages);
  const Checkpoint ck = OpenCheckpoint(a.checkpoint);
  const DatasetSplit data = LoadDataset(ck.config.data);
  const auto curve =
      RobustnessCurve(ck.net, SelectSplit(data, a.split), coverages,
                      ck.config.train.mask, a.seed, ck.config.data.ignore_label);
  const fs::path dir =
      a.out_dir.empty() ? fs::path(a.checkpoint).parent_path() : fs::path(a.out_dir);
  fs::create_directories(dir);
  std::ofstream csv(dir / "robustness.csv");
  csv << "coverage,miou\n";
  plot::Series s{ToString(ck.config.train.mode), {}, {}};
  for (const auto& p : curve) {
    csv << p.coverage << "," << std::setprecision(10) << p.miou << "\n";
    out << p.coverage << "," << p.miou << "\n";
    s.x.push_back(p.coverage);
    s.y.push_back(p.miou);
  }
  plot::LinePlot(dir / "robustness.png", {s},
                 {"mIoU under masked corruption", "coverage", "mIoU"});
  return kExitOk;
}

struct PlotArgs {
  std::vector<std::string> run_dirs;
  std::string out_dir = "plots";
};

inline int CmdPlots(const PlotArgs& a, std::ostream& out) {
  if (a.run_dirs.empty()) throw ConfigError("plots needs at least one run directory");
  fs::create_directories(a.out_dir);
  std::vector<plot::Series> loss, val;
  // dataset -> regime -> mode -> test mIoU values
  std::map<std::string, std::map<std::string, std::map<std::string, std::vector<double>>>> bars;
  std::vector<std::string> mode_order;
  for (const std::string& run : a.run_dirs) {
    const fs::path dir(run);
    if (!fs::exists(dir / "report.json")) {
      throw ConfigError("'" + run + "' is not a run directory (no report.json)");
    }
    const nlohmann::json rep = ReadJson(dir / "report.json");
    const std::string mode = rep.at("mode").get<std::string>();
    const std::string label = mode + " s" + std::to_string(rep.at("seed").get<std::uint64_t>());
    plot::Series ls{label, {}, {}}, vs{label, {}, {}};
    for (const auto& e : ReadJsonLines(dir / "epochs.jsonl")) {
      ls.x.push_back(e.at("epoch").get<double>() + 1);
      ls.y.push_back(e.at("train_loss").get<double>());
      vs.x.push_back(e.at("epoch").get<double>() + 1);
      vs.y.push_back(e.at("val_miou").get<double>());
    }
    loss.push_back(ls);
    val.push_back(vs);
    if (rep.contains("test")) {
      const auto& cfg = rep.at("config");
      std::string dataset = rep.at("dataset").get<std::string>();
      if (cfg.contains("data_n")) {
        dataset += "-n" + cfg.at("data_n").get<std::string>();
      }
      bars[dataset][rep.at("regime").get<std::string>()][mode].push_back(
          rep.at("test").at("miou").get<double>());
      if (std::find(mode_order.begin(), mode_order.end(), mode) == mode_order.end()) {
        mode_order.push_back(mode);
      }
    }
  }
  const fs::path root(a.out_dir);
  plot::LinePlot(root / "loss_curves.png", loss, {"training loss", "epoch", "loss"});
  plot::LinePlot(root / "val_miou.png", val, {"validation mIoU", "epoch", "mIoU"});
  out << (root / "loss_curves.png").string() << "\n"
      << (root / "val_miou.png").string() << "\n";
  const std::vector<std::string> canonical = {"baseline", "cb", "masksup"};
  std::vector<std::string> modes;
  for (const auto& m : canonical)
    if (std::find(mode_order.begin(), mode_order.end(), m) != mode_order.end())
      modes.push_back(m);
  for (const auto& [dataset, regimes] : bars) {
    std::vector<std::string> groups;
    std::vector<std::vector<double>> values;
    for (const auto& [regime, by_mode] : regimes) {
      groups.push_back(regime);
      std::vector<double> row;
      for (const auto& m : modes) {
        auto it = by_mode.find(m);
        double mean = 0.0;
        if (it != by_mode.end()) {
          for (double v : it->second) mean += v;
          mean /= static_cast<double>(it->second.size());
        }
        row.push_back(mean);
      }
      values.push_back(row);
    }
    const fs::path p = root / ("miou_" + dataset + ".png");
    plot::GroupedBarChart(p, groups, modes, values,
                          {"test mIoU (" + dataset + ")", "masking regime", "mIoU"});
    out << p.string() << "\n";
  }
  return kExitOk;
}

struct SynthArgs {
  std::string kind = "binary";
  int n = 200;
  int size = 64;
  double ambiguity = 0.3;
  double imbalance = 3.0;
  int num_classes = 6;
  std::uint64_t seed = 0;
  std::string out_dir;
};

inline int CmdSynthData(const SynthArgs& a, std::ostream& out) {
  DatasetSplit d;
  if (a.kind == "binary") {
    d = SynthBinaryShapes(a.n, a.size, a.ambiguity, a.seed);
  } else if (a.kind == "multiclass") {
    d = SynthMulticlassScenes(a.n, a.size, a.num_classes, a.imbalance, a.seed);
  } else {
    throw ConfigError("unknown dataset kind '" + a.kind + "'");
  }
  io::SaveImageMaskDir(a.out_dir, d);
  out << a.out_dir << " train=" << d.train.size() << " val=" << d.val.size()
      << " test=" << d.test.size() << "\n";
  return kExitOk;
}

// Parses argv and dispatches. Never throws; errors map to exit codes.
inline int Run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Masked supervised segmentation training"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", ta.config_path, "key = value config file");
  train->add_option("--set", ta.sets, "override, key=value (repeatable)");
  train->add_option("--mode", ta.mode, "baseline, cb or masksup");
  train->add_option("--regime", ta.regime, "high or low");
  train->add_option("--seed", ta.seed);
  train->add_option("--epochs", ta.epochs);
  train->add_option("--output-root", ta.output_root);
  train->add_option("--run-dir", ta.run_dir, "exact output directory");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", ea.checkpoint)->required();
  eval->add_option("--split", ea.split);
  eval->add_option("--set", ea.sets, "data override, key=value");
  eval->add_option("--out", ea.out_path, "report path");

  PreviewArgs pa;
  auto* preview = app.add_subcommand("preview-masks", "write sample masks");
  preview->add_option("--out", pa.out_dir)->required();
  preview->add_option("--regime", pa.regime);
  preview->add_option("--count", pa.count);
  preview->add_option("--size", pa.size);
  preview->add_option("--seed", pa.seed);
  preview->add_option("--config", pa.config_path);

  RobustnessArgs ra;
  auto* robust = app.add_subcommand("robustness", "mIoU versus mask coverage");
  robust->add_option("--checkpoint", ra.checkpoint)->required();
  robust->add_option("--coverages", ra.coverages, "comma separated");
  robust->add_option("--seed", ra.seed);
  robust->add_option("--split", ra.split);
  robust->add_option("--out", ra.out_dir);

  PlotArgs pla;
  auto* plots = app.add_subcommand("plots", "charts from run directories");
  plots->add_option("runs", pla.run_dirs)->required();
  plots->add_option("--out", pla.out_dir);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth-data", "write a synthetic dataset");
  synth->add_option("--kind", sa.kind, "binary or multiclass");
  synth->add_option("--n", sa.n);
  synth->add_option("--size", sa.size);
  synth->add_option("--ambiguity", sa.ambiguity);
  synth->add_option("--imbalance", sa.imbalance);
  synth->add_option("--classes", sa.num_classes);
  synth->add_option("--seed", sa.seed);
  synth->add_option("--out", sa.out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    if (*train) return CmdTrain(ta, out);
    if (*eval) return CmdEval(ea, out);
    if (*preview) return CmdPreviewMasks(pa, out);
    if (*robust) return CmdRobustness(ra, out);
    if (*plots) return CmdPlots(pla, out);
    if (*synth) return CmdSynthData(sa, out);
  } catch (const NonFiniteLoss& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace masksup::cli

#endif  // MASKSUP_CLI_HPP_
