#include "greyfeed/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <sstream>

#include "greyfeed/csv.hpp"
#include "greyfeed/error.hpp"
#include "greyfeed/metrics.hpp"
#include "greyfeed/optim.hpp"
#include "greyfeed/pgm.hpp"

namespace greyfeed {

MemorySource MemorySource::from_synthetic(const std::vector<SyntheticSample>& samples) {
  std::vector<TrainSample> out;
  out.reserve(samples.size());
  for (const SyntheticSample& s : samples) out.push_back({s.image, s.labels});
  return MemorySource(std::move(out));
}

ManifestSource::ManifestSource(const std::string& manifest_path)
    : dir_(std::filesystem::path(manifest_path).parent_path().string()),
      entries_(read_manifest(manifest_path)) {
  if (entries_.empty()) throw DataError("manifest source: no samples in " + manifest_path);
}

TrainSample ManifestSource::get(Eigen::Index i) const {
  const ManifestEntry& e = entries_[std::size_t(i)];
  return {read_pgm(std::filesystem::path(dir_) / e.filename), e.labels};
}

Split split_dataset(Eigen::Index n, std::uint64_t seed) {
  if (n < 2) throw DataError("split_dataset: need at least 2 samples, got " + std::to_string(n));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[std::size_t(i)] = i;
  Rng rng(derive_seed(seed, 101));
  for (Eigen::Index i = n - 1; i > 0; --i)
    std::swap(order[std::size_t(i)], order[std::size_t(rng.uniform_int(0, i))]);
  const Eigen::Index n_val = std::max<Eigen::Index>(1, n / 10);
  Split split;
  split.val.assign(order.begin(), order.begin() + n_val);
  split.train.assign(order.begin() + n_val, order.end());
  return split;
}

Tensor compose_batch(const DataSource& source, const std::vector<Eigen::Index>& indices,
                     const ChannelConfig& channels, const ResizePolicy& policy) {
  if (indices.empty()) throw DataError("compose_batch: empty index list");
  const Eigen::Index B = Eigen::Index(indices.size());
  const Eigen::Index per = 3 * Eigen::Index(policy.target_h) * Eigen::Index(policy.target_w);
  Eigen::ArrayXd data(B * per);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Tensor one = compose(source.get(indices[std::size_t(b)]).image, channels, policy);
    data.segment(b * per, per) = one.data();
  }
  return Tensor::from_data({B, 3, policy.target_h, policy.target_w}, std::move(data), false);
}

namespace {

Eigen::ArrayXd gather_labels(const DataSource& source, const std::vector<Eigen::Index>& indices) {
  Eigen::ArrayXd out(Eigen::Index(indices.size()) * kNumDescriptors);
  for (std::size_t b = 0; b < indices.size(); ++b)
    out.segment(Eigen::Index(b) * kNumDescriptors, kNumDescriptors) =
        source.labels(indices[b]);
  return out;
}

ClassWeights train_weights(const DataSource& source, const std::vector<Eigen::Index>& train) {
  std::vector<long> counts(kNumDescriptors, 0);
  for (Eigen::Index i : train) {
    const Eigen::ArrayXd labels = source.labels(i);
    for (int c = 0; c < kNumDescriptors; ++c)
      if (labels(c) != 0.0) ++counts[std::size_t(c)];
  }
  // a class absent from the split still needs a finite weight
  for (long& c : counts) c = std::max(c, 1L);
  return weights_from_counts(counts);
}

struct EvalResult {
  double macro = 0.0;
  Eigen::ArrayXd per_class;
  std::vector<int> excluded;
};

EvalResult eval_split(Model& model, const DataSource& source,
                      const std::vector<Eigen::Index>& val, const TrainConfig& cfg) {
  const Eigen::ArrayXd scores =
      predict_scores(model, source, val, cfg.channels, cfg.policy, cfg.plan.batch_size);
  const Eigen::ArrayXd labels = gather_labels(source, val);
  const MacroPrauc m = macro_prauc(scores, labels, kNumDescriptors);
  return {m.macro, m.per_class, m.excluded};
}

}  // namespace

Eigen::ArrayXd predict_scores(Model& model, const DataSource& source,
                              const std::vector<Eigen::Index>& indices,
                              const ChannelConfig& channels, const ResizePolicy& policy,
                              int batch_size) {
  if (batch_size < 1) throw ParamError("predict_scores: batch size must be positive");
  Eigen::ArrayXd out(Eigen::Index(indices.size()) * model.spec.n_classes);
  Rng unused(0);  // eval mode draws nothing
  for (std::size_t at = 0; at < indices.size(); at += std::size_t(batch_size)) {
    const std::size_t end = std::min(indices.size(), at + std::size_t(batch_size));
    const std::vector<Eigen::Index> chunk(indices.begin() + long(at), indices.begin() + long(end));
    const Tensor scores = model.forward(compose_batch(source, chunk, channels, policy),
                                        false, unused);
    out.segment(Eigen::Index(at) * model.spec.n_classes,
                Eigen::Index(chunk.size()) * model.spec.n_classes) = scores.data();
  }
  return out;
}

TrainLog run_two_phase(Model& model, const DataSource& source, const TrainConfig& config) {
  const PhasePlan& plan = config.plan;
  if (plan.phase1_epochs < 0 || plan.phase2_epochs < 0)
    throw ParamError("run_two_phase: negative epoch count");
  if (plan.batch_size < 1) throw ParamError("run_two_phase: batch size must be positive");
  if (source.size() < 1) throw DataError("run_two_phase: empty dataset");

  TrainLog log;
  log.final_per_class = Eigen::ArrayXd::Constant(model.spec.n_classes,
                                                 std::numeric_limits<double>::quiet_NaN());
  if (plan.phase1_epochs == 0 && plan.phase2_epochs == 0) return log;  // no-op plan

  log.split = split_dataset(source.size(), config.seed);
  const ClassWeights weights = train_weights(source, log.split.train);

  Rng shuffle_rng(derive_seed(config.seed, 202));
  Rng dropout_rng(derive_seed(config.seed, 303));
  AdamWConfig opt_cfg;
  opt_cfg.weight_decay = plan.weight_decay;

  int epoch_global = 0;
  auto run_phase = [&](int phase, int epochs, AdamW& opt) {
    std::vector<double> base_lrs;
    for (const ParamGroup& g : opt.groups()) base_lrs.push_back(g.lr);
    const long batches_per_epoch =
        (long(log.split.train.size()) + plan.batch_size - 1) / plan.batch_size;
    const long total_steps = long(epochs) * batches_per_epoch;
    long step_idx = 0;
    for (int e = 0; e < epochs; ++e) {
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<Eigen::Index> order = log.split.train;
      for (Eigen::Index i = Eigen::Index(order.size()) - 1; i > 0; --i)
        std::swap(order[std::size_t(i)], order[std::size_t(shuffle_rng.uniform_int(0, i))]);

      double loss_sum = 0.0;
      for (std::size_t at = 0; at < order.size(); at += std::size_t(plan.batch_size)) {
        const std::size_t end = std::min(order.size(), at + std::size_t(plan.batch_size));
        const std::vector<Eigen::Index> chunk(order.begin() + long(at),
                                              order.begin() + long(end));
        // cosine decay across the phase, so late epochs settle instead of
        // bouncing around the minimum
        const double anneal =
            0.5 * (1.0 + std::cos(std::numbers::pi * double(step_idx++) / double(total_steps)));
        for (std::size_t gi = 0; gi < base_lrs.size(); ++gi)
          opt.groups()[gi].lr = base_lrs[gi] * anneal;
        const Tensor x = compose_batch(source, chunk, config.channels, config.policy);
        const Eigen::ArrayXd y = gather_labels(source, chunk);
        opt.zero_grad();
        Tensor scores = model.forward(x, true, dropout_rng);
        Tensor loss = config.loss == LossKind::bce ? weighted_bce(scores, y, weights)
                                                   : soft_f1_loss(scores, y);
        loss.backward();
        opt.step();
        loss_sum += loss.value() * double(chunk.size());
      }

      const EvalResult ev = eval_split(model, source, log.split.val, config);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log.rows.push_back({++epoch_global, phase, loss_sum / double(log.split.train.size()),
                          ev.macro, wall});
      log.final_macro = ev.macro;
      log.final_per_class = ev.per_class;
      log.excluded_classes = ev.excluded;
      if (config.on_epoch) config.on_epoch(log.rows.back());
    }
  };

  if (plan.phase1_epochs > 0) {
    model.set_frozen(true);
    std::vector<ParamGroup> groups = model.param_groups();
    for (ParamGroup& g : groups) g.lr = plan.phase1_lr;
    AdamW opt(std::move(groups), opt_cfg);
    run_phase(1, plan.phase1_epochs, opt);
  }
  if (plan.phase2_epochs > 0) {
    model.set_frozen(false);
    std::vector<ParamGroup> groups = model.param_groups();
    set_discriminative_lrs(groups, plan.lr_min, plan.lr_max);
    AdamW opt(std::move(groups), opt_cfg);
    run_phase(2, plan.phase2_epochs, opt);
  }
  return log;
}

// Timing is deliberately absent: the log file is part of the bit-level
// reproducibility contract, and wall time never reproduces.
std::string train_log_to_csv(const TrainLog& log) {
  std::ostringstream out;
  out << "epoch,phase,mean_loss,macro_prauc\n";
  for (const EpochRow& r : log.rows)
    out << r.epoch << ',' << r.phase << ',' << format_double(r.mean_loss) << ','
        << format_double(r.macro_prauc) << '\n';
  return out.str();
}

}  // namespace greyfeed
