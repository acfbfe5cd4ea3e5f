#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "greyfeed/config.hpp"
#include "greyfeed/layers.hpp"
#include "greyfeed/train.hpp"

namespace greyfeed {

LossKind loss_from_string(std::string_view s);
std::string loss_name(LossKind k);

ResizeMode resize_mode_from_string(std::string_view s);
std::string resize_mode_name(ResizeMode m);

// "352x144" -> {352, 144}; rejects malformed or non-positive extents.
std::pair<int, int> parse_target(std::string_view s);

struct ExperimentConfig {
  std::string data;  // manifest path, dataset directory, or synth:N[:HxW][:SEED]
  std::string out;   // run directory
  std::string channels = "B-H-N";
  PreprocKind preproc = PreprocKind::inc_d;
  LossKind loss = LossKind::bce;
  ResizeMode resize_mode = ResizeMode::aspect_pad;
  int target_h = 352, target_w = 144;
  PhasePlan plan;
  std::uint64_t seed = 0;
};

// The closed key set shared by config files and the cognate CLI flags.
const std::vector<std::string>& experiment_keys();

ExperimentConfig experiment_from_kv(const KvConfig& kv);
// Canonical snapshot; experiment_from_kv(experiment_to_kv(c)) is the identity.
KvConfig experiment_to_kv(const ExperimentConfig& cfg);

// Resolves the three dataset spellings. synth: datasets live in memory, so
// they are for small experiments; generated directories stream from disk.
std::unique_ptr<DataSource> open_dataset(const std::string& data);

struct RunResult {
  double final_macro = 0.0;
  Eigen::ArrayXd per_class;
  std::vector<int> excluded;
  std::string run_dir;
  double wall_seconds = 0.0;
};

// Full training run: trains, then writes config.txt, train_log.csv,
// per_class_prauc.csv, confusion.csv and checkpoint.bin into cfg.out. An
// INCOMPLETE marker exists in the directory for exactly as long as any
// output might be partial.
RunResult run_train(const ExperimentConfig& cfg, const EpochCallback& on_epoch = {});

struct EvalOptions {
  std::string checkpoint;
  std::string data;
  std::string out;
  int top_k = 10;
};

struct HighLossSample {
  Eigen::Index index = 0;  // dataset row
  double loss = 0.0;
  std::string labels;  // semicolon-joined true codes
};

struct EvalSummary {
  double macro = 0.0;
  Eigen::ArrayXd per_class;
  std::vector<int> excluded;
  std::vector<HighLossSample> worst;  // nonincreasing by loss
};

// Scores the held-out split implied by the checkpoint's stored seed, feeding
// the model exactly as training did; writes per_class_prauc.csv,
// confusion.csv and highest_loss.csv into opt.out.
EvalSummary run_eval(const EvalOptions& opt);

struct Resolution {
  int h = 0, w = 0;
  ResizeMode mode = ResizeMode::aspect_pad;
};

// "224x224" et al. pick up their conventional mode; custom sizes need an
// explicit ":squish"/":aspect" suffix.
Resolution parse_resolution(std::string_view token);
std::string resolution_name(const Resolution& r);

struct GridSpec {
  std::string data;
  std::string out;
  std::vector<std::string> channels;
  std::vector<PreprocKind> preprocs;
  std::vector<LossKind> losses;
  std::vector<Resolution> resolutions;
  int repeats = 2;
  PhasePlan plan;
  std::uint64_t seed = 0;
};

struct GridRunRow {
  std::string channels;
  PreprocKind preproc = PreprocKind::inc_d;
  LossKind loss = LossKind::bce;
  Resolution resolution;
  std::uint64_t seed = 0;
  double macro_prauc = 0.0;
  Eigen::ArrayXd per_class;
  double wall_seconds = 0.0;
};

struct GridFailure {
  std::string run_name;
  std::string error;
};

struct GridOutcome {
  std::vector<GridRunRow> rows;  // completed runs only
  std::vector<GridFailure> failures;
  std::string runs_csv, summary_csv, marginal_preproc_csv, marginal_channels_csv, failures_csv;
};

// Key set for grid config files: the experiment keys minus resize-mode
// (each resolution token carries its own), plus repeats. Values that list
// factors are comma-separated.
const std::vector<std::string>& grid_keys();

GridSpec grid_from_kv(const KvConfig& kv);

struct GridProgress {
  std::string run_name;
  bool ok = false;
  double macro = 0.0;  // meaningless unless ok
  int index = 0, total = 0;
};

// Cross-product of the factor lists × repeats, one derived seed per run.
// Failures are recorded and skipped; every CSV is written regardless.
GridOutcome run_grid(const GridSpec& spec,
                     const std::function<void(const GridProgress&)>& on_run = {});

}  // namespace greyfeed
