#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "greyfeed/compose.hpp"
#include "greyfeed/layers.hpp"
#include "greyfeed/losses.hpp"
#include "greyfeed/resample.hpp"
#include "greyfeed/synthgen.hpp"

namespace greyfeed {

struct PhasePlan {
  int phase1_epochs = 10;
  int phase2_epochs = 40;
  double phase1_lr = 1e-3;
  double lr_min = 1e-6, lr_max = 1e-4;  // finetune ramp
  double weight_decay = 0.1;
  int batch_size = 32;
};

struct TrainSample {
  Image image;
  Eigen::ArrayXd labels;
};

// Raw-sample access; keeps peak memory at one batch for disk-backed datasets.
class DataSource {
 public:
  virtual ~DataSource() = default;
  virtual Eigen::Index size() const = 0;
  virtual TrainSample get(Eigen::Index i) const = 0;
  // Cheap label-only access; disk-backed sources override to skip the image read.
  virtual Eigen::ArrayXd labels(Eigen::Index i) const { return get(i).labels; }
};

class MemorySource : public DataSource {
 public:
  explicit MemorySource(std::vector<TrainSample> samples) : samples_(std::move(samples)) {}
  static MemorySource from_synthetic(const std::vector<SyntheticSample>& samples);
  Eigen::Index size() const override { return Eigen::Index(samples_.size()); }
  TrainSample get(Eigen::Index i) const override { return samples_[std::size_t(i)]; }

 private:
  std::vector<TrainSample> samples_;
};

// Reads each PGM on demand; only labels stay resident.
class ManifestSource : public DataSource {
 public:
  explicit ManifestSource(const std::string& manifest_path);
  Eigen::Index size() const override { return Eigen::Index(entries_.size()); }
  TrainSample get(Eigen::Index i) const override;
  Eigen::ArrayXd labels(Eigen::Index i) const override { return entries_[std::size_t(i)].labels; }

 private:
  std::string dir_;
  std::vector<ManifestEntry> entries_;
};

struct Split {
  std::vector<Eigen::Index> train, val;
};

// Seeded shuffle, 90/10; validation keeps at least one sample.
Split split_dataset(Eigen::Index n, std::uint64_t seed);

struct EpochRow {
  int epoch = 0;  // global index, phase 1 rows first
  int phase = 0;
  double mean_loss = 0.0;
  double macro_prauc = 0.0;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRow> rows;
  Split split;
  double final_macro = 0.0;
  Eigen::ArrayXd final_per_class;  // NaN where excluded
  std::vector<int> excluded_classes;
};

using EpochCallback = std::function<void(const EpochRow&)>;

struct TrainConfig {
  ChannelConfig channels;
  ResizePolicy policy;
  LossKind loss = LossKind::bce;
  PhasePlan plan;
  std::uint64_t seed = 0;
  EpochCallback on_epoch;  // progress only; never part of the result
};

// Stacks composed samples into a [B,3,H,W] batch tensor.
Tensor compose_batch(const DataSource& source, const std::vector<Eigen::Index>& indices,
                     const ChannelConfig& channels, const ResizePolicy& policy);

// Eval-mode scores for the given rows, flat row-major [N x n_classes].
Eigen::ArrayXd predict_scores(Model& model, const DataSource& source,
                              const std::vector<Eigen::Index>& indices,
                              const ChannelConfig& channels, const ResizePolicy& policy,
                              int batch_size);

// Phase 1 trains preproc+head with the backbone frozen; phase 2 unfreezes
// everything under discriminative rates. Deterministic in (config, model seed).
TrainLog run_two_phase(Model& model, const DataSource& source, const TrainConfig& config);

// CSV with a fixed header; values go through the shortest round-trip format.
std::string train_log_to_csv(const TrainLog& log);

}  // namespace greyfeed
