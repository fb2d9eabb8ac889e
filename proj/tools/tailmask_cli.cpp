// tailmask command-line tool.
//
//   tailmask [--config FILE] [--seed N] <subcommand> [options]
//
// Data goes to files (or stdout for `stats` without --out); progress to stderr.
// Exit codes: 0 success, 2 configuration error, 1 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tailmask/error.hpp"
#include "tailmask/experiment.hpp"
#include "tailmask/io.hpp"
#include "tailmask/report.hpp"

namespace fs = std::filesystem;
using namespace tailmask;

namespace {

void log(const std::string& line) { std::cerr << "[tailmask] " << line << '\n'; }

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool dump_defaults = false;

  // stats / synth / gen-masks
  std::string split = "train";
  std::string annotations;
  std::string out;
  int epoch = 0;
  std::optional<double> ratio;

  // train / eval / robust
  std::string mode;
  std::string out_dir;
  std::string checkpoint;

  // report
  std::string baseline;
  std::string baseline_label = "baseline";
  std::vector<std::string> runs;
};

ExperimentConfig load_config(const Options& opt) {
  ExperimentConfig config =
      opt.config_path.empty() ? default_experiment_config() : load_experiment_config(opt.config_path);
  if (opt.seed) config.seed = *opt.seed;
  config.validate();
  return config;
}

DatasetAnnotations select_data(const Options& opt, const ExperimentConfig& config) {
  if (!opt.annotations.empty()) return load_annotations(opt.annotations);
  if (opt.split != "train" && opt.split != "test") throw ConfigError("--split must be 'train' or 'test'");
  return load_split(config, opt.split == "test");
}

fs::path ensure_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("--out-dir is required");
  fs::create_directories(dir);
  return fs::path(dir);
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_text(path, text);
    log("wrote " + path);
  }
}

int cmd_stats(const Options& opt) {
  const auto config = load_config(opt);
  const auto data = select_data(opt, config);
  const auto counts = count_predicates(data);
  std::ostringstream out;
  out << "class,category,count\n";
  for (std::size_t c = 0; c < counts.counts.size(); ++c) {
    const auto id = static_cast<ClassId>(c);
    out << data.ontology.class_name(id) << ',' << data.ontology.category_name(data.ontology.category_of(id)) << ','
        << counts.counts[c] << '\n';
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", entropy(counts.counts));
  out << "total,," << counts.total << '\n' << "entropy_nats,," << buf << '\n';
  emit(opt.out, out.str());
  return 0;
}

int cmd_synth(const Options& opt) {
  const auto config = load_config(opt);
  if (opt.out.empty()) throw ConfigError("--out is required");
  const auto data = select_data(opt, config);
  save_annotations(data, opt.out);
  log("wrote " + opt.out + " (" + std::to_string(data.num_labels()) + " labels)");
  return 0;
}

MaskSet masks_for_epoch(const TrainConfig& train, const DatasetAnnotations& data, int epoch) {
  return generate_epoch_masks(epoch, train.schedule, data, train.mask_seed, train.mask_options);
}

int cmd_gen_masks(const Options& opt) {
  auto config = load_config(opt);
  if (opt.out.empty()) throw ConfigError("--out is required");
  if (opt.epoch < 0) throw ConfigError("--epoch must be >= 0");
  if (opt.ratio) {
    config.train.schedule = MaskSchedule::fixed(*opt.ratio);
    config.train.schedule.validate();
  }
  const auto data = select_data(opt, config);
  const auto masks = masks_for_epoch(seeded_train_config(config), data, opt.epoch);
  write_text(opt.out, masks_to_json(masks, data));
  log("wrote " + opt.out + " (" + std::to_string(masks.count_masked()) + " of " + std::to_string(masks.size()) +
      " labels masked)");
  return 0;
}

int cmd_train(const Options& opt) {
  auto config = load_config(opt);
  if (!opt.mode.empty()) config.train.mode = parse_train_mode(opt.mode);
  const auto dir = ensure_dir(opt.out_dir);
  const auto data = load_split(config, false);
  const auto train_config = seeded_train_config(config);
  log("training " + std::string(to_string(train_config.mode)) + " on " + std::to_string(data.videos.size()) +
      " videos, " + std::to_string(data.num_labels()) + " labels");
  const auto result = train(data, train_config);
  for (const auto& e : result.report.epochs) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %d ratio %.3f masked %zu loss %.4f", e.epoch, e.mask_ratio,
                  e.masked_labels, e.total);
    log(buf);
  }
  if (train_config.masking_enabled) {
    fs::create_directories(dir / "masks");
    for (int e = 0; e < train_config.epochs; ++e) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03d.json", e);
      write_text(dir / "masks" / name, masks_to_json(masks_for_epoch(train_config, data, e), data));
    }
  }
  save_checkpoint(result.params, dir / "checkpoint.json");
  write_text(dir / "train_report.json", train_report_json(result.report));
  write_text(dir / "config.json", experiment_config_to_json(config));
  log("wrote " + (dir / "checkpoint.json").string());
  return 0;
}

int cmd_eval(const Options& opt) {
  const auto config = load_config(opt);
  if (opt.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const auto dir = ensure_dir(opt.out_dir);
  const auto params = load_checkpoint(opt.checkpoint);
  const auto data = load_split(config, true);
  const auto features = generate_synthetic_video_batch(data, config.train.features, test_feature_seed(config));
  const auto table = evaluate_model(params, data, features, config.eval);
  write_text(dir / "metrics.csv", metric_table_csv(table));
  write_text(dir / "per_class.csv", per_class_csv(table, data.ontology));

  const auto frames = config.eval.observed_fraction
                          ? score_anticipated(params, data, features, *config.eval.observed_fraction)
                          : score_observed(params, data, features);
  for (Strategy strategy : config.eval.strategies) {
    std::vector<SceneGraph> graphs;
    for (const auto& frame : frames) {
      graphs.push_back(assemble(strategy, frame.ground_truth.frame_index, frame.pairs, data.ontology,
                                SemiConstraintThresholds::uniform(data.ontology.num_predicates(),
                                                                  config.eval.semi_threshold)));
    }
    write_text(dir / ("graphs_" + std::string(to_string(strategy)) + ".jsonl"), scene_graphs_to_jsonl(graphs));
  }
  log("wrote " + (dir / "metrics.csv").string());
  return 0;
}

int cmd_robust(const Options& opt) {
  const auto config = load_config(opt);
  if (opt.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const auto dir = ensure_dir(opt.out_dir);
  const auto params = load_checkpoint(opt.checkpoint);
  log("robustness sweep over " + std::to_string(config.corruptions.size()) + " corruption settings");
  const auto table = run_robust(config, params);
  write_text(dir / "robustness.csv", sweep_table_csv(table));
  log("wrote " + (dir / "robustness.csv").string());
  return 0;
}

// Metric CSV (strategy,K,R,mR) keyed by (strategy, K, metric).
std::map<std::tuple<std::string, int, std::string>, double> read_metrics(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  if (line != "strategy,K,R,mR") throw IoError(path + ": not a metrics CSV");
  std::map<std::tuple<std::string, int, std::string>, double> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 4) cells.emplace_back();
    try {
      const int k = std::stoi(cells[1]);
      if (!cells[2].empty()) out[{cells[0], k, "R"}] = std::stod(cells[2]) * 100.0;
      if (!cells[3].empty()) out[{cells[0], k, "mR"}] = std::stod(cells[3]) * 100.0;
    } catch (const std::exception&) {
      throw IoError(path + ":" + std::to_string(line_no) + ": malformed row");
    }
  }
  return out;
}

int cmd_report(const Options& opt) {
  if (opt.baseline.empty()) throw ConfigError("--baseline is required");
  if (opt.out.empty()) throw ConfigError("--out is required");
  const auto base = read_metrics(opt.baseline);
  std::vector<ReportRow> rows;
  for (const auto& [key, value] : base) {
    rows.push_back({opt.baseline_label, std::get<0>(key), std::get<1>(key), std::get<2>(key), value, std::nullopt});
  }
  for (const auto& run : opt.runs) {
    const auto eq = run.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--run expects LABEL=metrics.csv, got '" + run + "'");
    const auto metrics = read_metrics(run.substr(eq + 1));
    for (const auto& [key, value] : metrics) {
      std::optional<double> baseline;
      if (auto it = base.find(key); it != base.end()) baseline = it->second;
      rows.push_back({run.substr(0, eq), std::get<0>(key), std::get<1>(key), std::get<2>(key), value, baseline});
    }
  }
  write_report(rows, opt.out);
  log("wrote " + opt.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked curriculum training and evaluation for long-tailed video scene graphs", "tailmask"};
  app.fallthrough();
  Options opt;
  app.add_option("--config", opt.config_path, "Experiment config (JSON)");
  app.add_option("--seed", opt.seed, "Global seed (overrides the config)");
  app.add_flag("--dump-defaults", opt.dump_defaults, "Print the default config and exit");

  auto* stats = app.add_subcommand("stats", "Predicate class counts and entropy");
  stats->add_option("--annotations", opt.annotations, "Annotation file (default: config split)");
  stats->add_option("--split", opt.split, "train or test");
  stats->add_option("--out", opt.out, "CSV output (default: stdout)");

  auto* synth = app.add_subcommand("synth", "Write a split of the configured dataset as an annotation file");
  synth->add_option("--split", opt.split, "train or test");
  synth->add_option("--out", opt.out, "Annotation output")->required();

  auto* masks = app.add_subcommand("gen-masks", "Write the masks of one epoch");
  masks->add_option("--annotations", opt.annotations, "Annotation file (default: config split)");
  masks->add_option("--split", opt.split, "train or test");
  masks->add_option("--epoch", opt.epoch, "0-based epoch");
  masks->add_option("--ratio", opt.ratio, "Fixed masking ratio (overrides the schedule)");
  masks->add_option("--out", opt.out, "Mask file output")->required();

  auto* train_cmd = app.add_subcommand("train", "Train the toy model");
  train_cmd->add_option("--mode", opt.mode, "vidsgg or sga (default: config)");
  train_cmd->add_option("--out-dir", opt.out_dir, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  eval->add_option("--checkpoint", opt.checkpoint, "Checkpoint file")->required();
  eval->add_option("--out-dir", opt.out_dir, "Output directory")->required();

  auto* robust = app.add_subcommand("robust", "Corruption sweep on the test split");
  robust->add_option("--checkpoint", opt.checkpoint, "Checkpoint file")->required();
  robust->add_option("--out-dir", opt.out_dir, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Merge metric CSVs into a table with deltas");
  report->add_option("--baseline", opt.baseline, "Baseline metrics.csv")->required();
  report->add_option("--baseline-label", opt.baseline_label, "Method label of the baseline rows");
  report->add_option("--run", opt.runs, "LABEL=metrics.csv (repeatable)");
  report->add_option("--out", opt.out, "Report CSV output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (opt.dump_defaults) {
      std::cout << experiment_config_to_json(default_experiment_config()) << '\n';
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return 2;
    }
    const auto* sub = app.get_subcommands().front();
    if (sub == stats) return cmd_stats(opt);
    if (sub == synth) return cmd_synth(opt);
    if (sub == masks) return cmd_gen_masks(opt);
    if (sub == train_cmd) return cmd_train(opt);
    if (sub == eval) return cmd_eval(opt);
    if (sub == robust) return cmd_robust(opt);
    return cmd_report(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
