#include "greyfeed/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "greyfeed/checkpoint.hpp"
#include "greyfeed/csv.hpp"
#include "greyfeed/descriptors.hpp"
#include "greyfeed/error.hpp"
#include "greyfeed/metrics.hpp"
#include "greyfeed/rng.hpp"

namespace greyfeed {

namespace fs = std::filesystem;

LossKind loss_from_string(std::string_view s) {
  if (s == "bce") return LossKind::bce;
  if (s == "soft_f1") return LossKind::soft_f1;
  throw ParamError("unknown loss '" + std::string(s) + "', expected bce or soft_f1");
}

std::string loss_name(LossKind k) {
  return k == LossKind::bce ? "bce" : "soft_f1";
}

ResizeMode resize_mode_from_string(std::string_view s) {
  if (s == "squish") return ResizeMode::squish;
  if (s == "aspect") return ResizeMode::aspect_pad;
  throw ParamError("unknown resize mode '" + std::string(s) + "', expected squish or aspect");
}

std::string resize_mode_name(ResizeMode m) {
  return m == ResizeMode::squish ? "squish" : "aspect";
}

std::pair<int, int> parse_target(std::string_view s) {
  const auto x = s.find('x');
  if (x == std::string_view::npos || x == 0 || x + 1 >= s.size())
    throw ParseError("target '" + std::string(s) + "' is not HxW");
  int h = 0, w = 0;
  std::size_t hp = 0, wp = 0;
  try {
    h = std::stoi(std::string(s.substr(0, x)), &hp);
    w = std::stoi(std::string(s.substr(x + 1)), &wp);
  } catch (const std::exception&) {
    throw ParseError("target '" + std::string(s) + "' is not HxW");
  }
  if (hp != x || wp != s.size() - x - 1 || h < 1 || w < 1)
    throw ParseError("target '" + std::string(s) + "' is not HxW with positive extents");
  return {h, w};
}

const std::vector<std::string>& experiment_keys() {
  static const std::vector<std::string> keys = {
      "data",       "out",           "seed",      "channels",       "preproc",
      "loss",       "resize-mode",   "target",    "epochs-frozen",  "epochs-finetune",
      "batch-size", "lr-frozen",     "lr-min",    "lr-max",         "weight-decay",
  };
  return keys;
}

ExperimentConfig experiment_from_kv(const KvConfig& kv) {
  kv.require_known(experiment_keys());
  ExperimentConfig cfg;
  cfg.data = kv.get("data", "");
  cfg.out = kv.get("out", "");
  cfg.seed = std::uint64_t(kv.get_long("seed", 0));
  cfg.channels = kv.get("channels", cfg.channels);
  parse_config(cfg.channels);  // fail at config time, not mid-run
  cfg.preproc = preproc_from_string(kv.get("preproc", preproc_name(cfg.preproc)));
  cfg.loss = loss_from_string(kv.get("loss", loss_name(cfg.loss)));
  cfg.resize_mode = resize_mode_from_string(kv.get("resize-mode", "aspect"));
  std::tie(cfg.target_h, cfg.target_w) =
      parse_target(kv.get("target", std::to_string(cfg.target_h) + "x" +
                                        std::to_string(cfg.target_w)));
  cfg.plan.phase1_epochs = int(kv.get_long("epochs-frozen", cfg.plan.phase1_epochs));
  cfg.plan.phase2_epochs = int(kv.get_long("epochs-finetune", cfg.plan.phase2_epochs));
  cfg.plan.batch_size = int(kv.get_long("batch-size", cfg.plan.batch_size));
  cfg.plan.phase1_lr = kv.get_double("lr-frozen", cfg.plan.phase1_lr);
  cfg.plan.lr_min = kv.get_double("lr-min", cfg.plan.lr_min);
  cfg.plan.lr_max = kv.get_double("lr-max", cfg.plan.lr_max);
  cfg.plan.weight_decay = kv.get_double("weight-decay", cfg.plan.weight_decay);
  return cfg;
}

KvConfig experiment_to_kv(const ExperimentConfig& cfg) {
  KvConfig kv;
  kv.set("data", cfg.data);
  kv.set("out", cfg.out);
  kv.set("seed", std::to_string(cfg.seed));
  kv.set("channels", cfg.channels);
  kv.set("preproc", preproc_name(cfg.preproc));
  kv.set("loss", loss_name(cfg.loss));
  kv.set("resize-mode", resize_mode_name(cfg.resize_mode));
  kv.set("target", std::to_string(cfg.target_h) + "x" + std::to_string(cfg.target_w));
  kv.set("epochs-frozen", std::to_string(cfg.plan.phase1_epochs));
  kv.set("epochs-finetune", std::to_string(cfg.plan.phase2_epochs));
  kv.set("batch-size", std::to_string(cfg.plan.batch_size));
  kv.set("lr-frozen", format_double(cfg.plan.phase1_lr));
  kv.set("lr-min", format_double(cfg.plan.lr_min));
  kv.set("lr-max", format_double(cfg.plan.lr_max));
  kv.set("weight-decay", format_double(cfg.plan.weight_decay));
  return kv;
}

std::unique_ptr<DataSource> open_dataset(const std::string& data) {
  if (data.empty()) throw ParamError("open_dataset: empty dataset spec");
  if (data.rfind("synth:", 0) == 0) {
    std::vector<std::string> parts;
    std::string rest = data.substr(6);
    std::size_t at = 0;
    while (true) {
      const auto colon = rest.find(':', at);
      parts.push_back(rest.substr(at, colon - at));
      if (colon == std::string::npos) break;
      at = colon + 1;
    }
    if (parts.empty() || parts.size() > 3)
      throw ParseError("generator spec '" + data + "' is not synth:N[:HxW][:SEED]");
    long n = 0;
    try {
      n = std::stol(parts[0]);
    } catch (const std::exception&) {
      throw ParseError("generator spec '" + data + "': bad sample count");
    }
    if (n < 1) throw ParseError("generator spec '" + data + "': sample count must be >= 1");
    Eigen::Index h = 1048, w = 400;
    if (parts.size() >= 2) {
      const auto [th, tw] = parse_target(parts[1]);
      h = th;
      w = tw;
    }
    std::uint64_t seed = 1234;
    if (parts.size() >= 3) {
      try {
        seed = std::stoull(parts[2]);
      } catch (const std::exception&) {
        throw ParseError("generator spec '" + data + "': bad seed");
      }
    }
    return std::make_unique<MemorySource>(
        MemorySource::from_synthetic(generate_samples(int(n), seed, default_class_mix(), h, w)));
  }
  fs::path p(data);
  if (fs::is_directory(p)) p /= "manifest.csv";
  return std::make_unique<ManifestSource>(p.string());
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out.good()) throw IoError("short write on " + path.string());
}

std::string class_label(Eigen::Index c, Eigen::Index n_classes) {
  if (n_classes == kNumDescriptors) return std::string(descriptor_code(int(c)));
  return "C" + std::to_string(c);
}

std::string per_class_csv(const Eigen::ArrayXd& per_class, double macro) {
  std::string out = "class,prauc\n";
  for (Eigen::Index c = 0; c < per_class.size(); ++c)
    out += class_label(c, per_class.size()) + "," + format_double(per_class(c)) + "\n";
  out += "macro," + format_double(macro) + "\n";
  return out;
}

std::string csv_quote(const std::string& s) {
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  q += '"';
  return q;
}

std::string join_codes(const Eigen::ArrayXd& labels) {
  std::string out;
  for (Eigen::Index c = 0; c < labels.size(); ++c) {
    if (labels(c) == 0.0) continue;
    if (!out.empty()) out += ";";
    out += class_label(c, labels.size());
  }
  return out;
}

}  // namespace

RunResult run_train(const ExperimentConfig& cfg, const EpochCallback& on_epoch) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.out.empty()) throw ParamError("run_train: output directory required");
  if (cfg.data.empty()) throw ParamError("run_train: dataset required");

  TrainConfig tc;
  tc.channels = parse_config(cfg.channels);
  tc.policy.target_h = cfg.target_h;
  tc.policy.target_w = cfg.target_w;
  tc.policy.mode = cfg.resize_mode;
  tc.loss = cfg.loss;
  tc.plan = cfg.plan;
  tc.seed = cfg.seed;
  tc.on_epoch = on_epoch;

  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  // flag the directory until every output is in place
  write_file(dir / "INCOMPLETE", "run in progress or aborted\n");

  const auto source = open_dataset(cfg.data);

  ModelSpec spec;
  spec.preproc.kind = cfg.preproc;
  Model model(spec, cfg.seed);

  const TrainLog log = run_two_phase(model, *source, tc);

  write_file(dir / "config.txt", experiment_to_kv(cfg).to_text());
  write_file(dir / "train_log.csv", train_log_to_csv(log));
  write_file(dir / "per_class_prauc.csv", per_class_csv(log.final_per_class, log.final_macro));

  ConfusionMatrix cm(model.spec.n_classes);
  if (!log.rows.empty()) {
    const Eigen::ArrayXd scores = predict_scores(model, *source, log.split.val, tc.channels,
                                                 tc.policy, tc.plan.batch_size);
    for (std::size_t i = 0; i < log.split.val.size(); ++i)
      cm.update(source->labels(log.split.val[i]),
                scores.segment(Eigen::Index(i) * model.spec.n_classes, model.spec.n_classes));
  }
  write_file(dir / "confusion.csv", cm.to_csv());

  CheckpointMeta meta;
  meta.channels = cfg.channels;
  meta.resize_mode = resize_mode_name(cfg.resize_mode);
  meta.target_h = cfg.target_h;
  meta.target_w = cfg.target_w;
  meta.loss = loss_name(cfg.loss);
  meta.batch_size = cfg.plan.batch_size;
  meta.seed = cfg.seed;
  save_checkpoint((dir / "checkpoint.bin").string(), model, meta);

  fs::remove(dir / "INCOMPLETE");
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {log.final_macro, log.final_per_class, log.excluded_classes, dir.string(), wall};
}

EvalSummary run_eval(const EvalOptions& opt) {
  if (opt.out.empty()) throw ParamError("run_eval: output directory required");
  if (opt.top_k < 0) throw ParamError("run_eval: top_k must be >= 0");
  LoadedCheckpoint ck = load_checkpoint(opt.checkpoint);
  const auto source = open_dataset(opt.data);
  if (source->size() < 2) throw DataError("run_eval: dataset too small to hold out a split");

  const Eigen::Index n_classes = ck.model.spec.n_classes;
  const Eigen::Index label_width = source->labels(0).size();
  if (label_width != n_classes)
    throw DataError("run_eval: checkpoint scores " + std::to_string(n_classes) +
                    " classes but the dataset labels " + std::to_string(label_width) +
                    " — incompatible pairing");

  const ChannelConfig cc = parse_config(ck.meta.channels);
  ResizePolicy policy;
  policy.target_h = ck.meta.target_h;
  policy.target_w = ck.meta.target_w;
  policy.mode = resize_mode_from_string(ck.meta.resize_mode);
  const LossKind loss = loss_from_string(ck.meta.loss);

  // same split, same feed, same batching as the training run's own evaluation
  const Split split = split_dataset(source->size(), ck.meta.seed);
  const Eigen::ArrayXd scores =
      predict_scores(ck.model, *source, split.val, cc, policy, ck.meta.batch_size);
  Eigen::ArrayXd labels(Eigen::Index(split.val.size()) * n_classes);
  for (std::size_t i = 0; i < split.val.size(); ++i)
    labels.segment(Eigen::Index(i) * n_classes, n_classes) = source->labels(split.val[i]);

  const MacroPrauc mp = macro_prauc(scores, labels, n_classes);

  ConfusionMatrix cm(n_classes);
  for (std::size_t i = 0; i < split.val.size(); ++i)
    cm.update(labels.segment(Eigen::Index(i) * n_classes, n_classes),
              scores.segment(Eigen::Index(i) * n_classes, n_classes));

  const ClassWeights flat = ClassWeights::Ones(n_classes);  // rank by the raw loss
  std::vector<HighLossSample> worst;
  for (std::size_t i = 0; i < split.val.size(); ++i) {
    Eigen::ArrayXd row = scores.segment(Eigen::Index(i) * n_classes, n_classes);
    const Eigen::ArrayXd y = labels.segment(Eigen::Index(i) * n_classes, n_classes);
    const Tensor t = Tensor::from_data({1, n_classes}, std::move(row), false);
    const double l =
        (loss == LossKind::bce ? weighted_bce(t, y, flat) : soft_f1_loss(t, y)).value();
    worst.push_back({split.val[i], l, join_codes(y)});
  }
  std::sort(worst.begin(), worst.end(), [](const HighLossSample& a, const HighLossSample& b) {
    if (a.loss != b.loss) return a.loss > b.loss;
    return a.index < b.index;
  });
  if (worst.size() > std::size_t(opt.top_k)) worst.resize(std::size_t(opt.top_k));

  const fs::path dir(opt.out);
  fs::create_directories(dir);
  write_file(dir / "per_class_prauc.csv", per_class_csv(mp.per_class, mp.macro));
  write_file(dir / "confusion.csv", cm.to_csv());
  std::string listing = "rank,index,loss,labels\n";
  for (std::size_t i = 0; i < worst.size(); ++i)
    listing += std::to_string(i + 1) + "," + std::to_string(worst[i].index) + "," +
               format_double(worst[i].loss) + "," + worst[i].labels + "\n";
  write_file(dir / "highest_loss.csv", listing);

  return {mp.macro, mp.per_class, mp.excluded, std::move(worst)};
}

Resolution parse_resolution(std::string_view token) {
  static const std::vector<std::pair<std::string, ResizeMode>> presets = {
      {"224x224", ResizeMode::squish},
      {"352x144", ResizeMode::aspect_pad},
      {"464x192", ResizeMode::aspect_pad},
      {"928x384", ResizeMode::aspect_pad},
  };
  std::string_view dims = token;
  const auto colon = token.find(':');
  Resolution r;
  if (colon != std::string_view::npos) {
    dims = token.substr(0, colon);
    r.mode = resize_mode_from_string(token.substr(colon + 1));
  }
  std::tie(r.h, r.w) = parse_target(dims);
  if (colon == std::string_view::npos) {
    const std::string key = std::string(dims);
    const auto hit = std::find_if(presets.begin(), presets.end(),
                                  [&](const auto& p) { return p.first == key; });
    if (hit == presets.end())
      throw ParamError("resolution '" + std::string(token) +
                       "' is not a preset; append :squish or :aspect");
    r.mode = hit->second;
  }
  return r;
}

std::string resolution_name(const Resolution& r) {
  return std::to_string(r.h) + "x" + std::to_string(r.w) + "-" + resize_mode_name(r.mode);
}

namespace {

struct MeanAcc {
  double sum = 0.0;
  long n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  double mean() const {
    return n > 0 ? sum / double(n) : std::numeric_limits<double>::quiet_NaN();
  }
};

bool same_resolution(const Resolution& a, const Resolution& b) {
  return a.h == b.h && a.w == b.w && a.mode == b.mode;
}

std::vector<std::string> split_list(const std::string& key, const std::string& csv) {
  std::vector<std::string> out;
  std::size_t at = 0;
  while (true) {
    const auto comma = csv.find(',', at);
    std::string tok = csv.substr(at, comma - at);
    if (tok.empty()) throw ParseError(key + ": empty entry in list '" + csv + "'");
    out.push_back(std::move(tok));
    if (comma == std::string::npos) break;
    at = comma + 1;
  }
  return out;
}

}  // namespace

const std::vector<std::string>& grid_keys() {
  static const std::vector<std::string> keys = {
      "data",       "out",           "seed",      "channels",       "preproc",
      "loss",       "resolution",    "repeats",   "epochs-frozen",  "epochs-finetune",
      "batch-size", "lr-frozen",     "lr-min",    "lr-max",         "weight-decay",
  };
  return keys;
}

GridSpec grid_from_kv(const KvConfig& kv) {
  kv.require_known(grid_keys());
  GridSpec spec;
  spec.data = kv.get("data", "");
  spec.out = kv.get("out", "");
  spec.seed = std::uint64_t(kv.get_long("seed", 0));
  spec.channels = split_list("channels", kv.get("channels", "B-H-N"));
  for (const std::string& ch : spec.channels) parse_config(ch);
  for (const std::string& p : split_list("preproc", kv.get("preproc", "inc_d")))
    spec.preprocs.push_back(preproc_from_string(p));
  for (const std::string& l : split_list("loss", kv.get("loss", "bce")))
    spec.losses.push_back(loss_from_string(l));
  for (const std::string& r : split_list("resolution", kv.get("resolution", "352x144,224x224")))
    spec.resolutions.push_back(parse_resolution(r));
  spec.repeats = int(kv.get_long("repeats", spec.repeats));
  spec.plan.phase1_epochs = int(kv.get_long("epochs-frozen", spec.plan.phase1_epochs));
  spec.plan.phase2_epochs = int(kv.get_long("epochs-finetune", spec.plan.phase2_epochs));
  spec.plan.batch_size = int(kv.get_long("batch-size", spec.plan.batch_size));
  spec.plan.phase1_lr = kv.get_double("lr-frozen", spec.plan.phase1_lr);
  spec.plan.lr_min = kv.get_double("lr-min", spec.plan.lr_min);
  spec.plan.lr_max = kv.get_double("lr-max", spec.plan.lr_max);
  spec.plan.weight_decay = kv.get_double("weight-decay", spec.plan.weight_decay);
  return spec;
}

GridOutcome run_grid(const GridSpec& spec,
                     const std::function<void(const GridProgress&)>& on_run) {
  if (spec.out.empty()) throw ParamError("run_grid: output directory required");
  if (spec.channels.empty() || spec.preprocs.empty() || spec.losses.empty() ||
      spec.resolutions.empty())
    throw ParamError("run_grid: every factor list needs at least one entry");
  if (spec.repeats < 1) throw ParamError("run_grid: repeats must be >= 1");
  for (const std::string& ch : spec.channels) parse_config(ch);
  fs::create_directories(spec.out);

  const int total = int(spec.channels.size() * spec.preprocs.size() * spec.losses.size() *
                        spec.resolutions.size() * std::size_t(spec.repeats));
  GridOutcome out;
  std::uint64_t run_counter = 0;
  for (const std::string& ch : spec.channels) {
    for (const PreprocKind pp : spec.preprocs) {
      for (const LossKind ls : spec.losses) {
        for (const Resolution& res : spec.resolutions) {
          for (int rep = 0; rep < spec.repeats; ++rep) {
            ++run_counter;
            const std::uint64_t run_seed = derive_seed(spec.seed, run_counter);
            const std::string name = ch + "_" + preproc_name(pp) + "_" + loss_name(ls) + "_" +
                                     resolution_name(res) + "_r" + std::to_string(rep);
            ExperimentConfig cfg;
            cfg.data = spec.data;
            cfg.out = (fs::path(spec.out) / name).string();
            cfg.channels = ch;
            cfg.preproc = pp;
            cfg.loss = ls;
            cfg.resize_mode = res.mode;
            cfg.target_h = res.h;
            cfg.target_w = res.w;
            cfg.plan = spec.plan;
            cfg.seed = run_seed;
            GridProgress prog{name, false, 0.0, int(run_counter), total};
            try {
              const RunResult r = run_train(cfg);
              out.rows.push_back(
                  {ch, pp, ls, res, run_seed, r.final_macro, r.per_class, r.wall_seconds});
              prog.ok = true;
              prog.macro = r.final_macro;
            } catch (const std::exception& e) {
              out.failures.push_back({name, e.what()});
            }
            if (on_run) on_run(prog);
          }
        }
      }
    }
  }

  // raw per-run rows
  std::string runs = "channels,preproc,loss,resolution,mode,seed,macro_prauc,wall_seconds,"
                     "per_class_prauc\n";
  for (const GridRunRow& r : out.rows) {
    std::string per;
    for (Eigen::Index c = 0; c < r.per_class.size(); ++c) {
      if (c > 0) per += ";";
      per += format_double(r.per_class(c));
    }
    runs += r.channels + "," + preproc_name(r.preproc) + "," + loss_name(r.loss) + "," +
            std::to_string(r.resolution.h) + "x" + std::to_string(r.resolution.w) + "," +
            resize_mode_name(r.resolution.mode) + "," + std::to_string(r.seed) + "," +
            format_double(r.macro_prauc) + "," + format_double(r.wall_seconds) + "," + per + "\n";
  }

  // Δ is meaningful exactly when the grid contrasts one padded resolution
  // with one squished one
  int aspect_col = -1, squish_col = -1;
  if (spec.resolutions.size() == 2) {
    for (int i = 0; i < 2; ++i) {
      (spec.resolutions[std::size_t(i)].mode == ResizeMode::squish ? squish_col : aspect_col) = i;
    }
  }
  const bool with_delta = aspect_col >= 0 && squish_col >= 0;

  const auto res_means = [&](auto match) {
    std::vector<double> means;
    for (const Resolution& res : spec.resolutions) {
      MeanAcc acc;
      for (const GridRunRow& r : out.rows)
        if (same_resolution(r.resolution, res) && match(r)) acc.add(r.macro_prauc);
      means.push_back(acc.mean());
    }
    return means;
  };
  const auto emit_row = [&](std::string& csv, const std::string& head,
                            const std::vector<double>& means) {
    csv += head;
    for (const double m : means) csv += "," + format_double(m);
    if (with_delta)
      csv += "," + format_double(means[std::size_t(aspect_col)] -
                                 means[std::size_t(squish_col)]);
    csv += "\n";
  };
  std::string res_cols;
  for (const Resolution& res : spec.resolutions) res_cols += "," + resolution_name(res);
  if (with_delta) res_cols += ",delta";

  // cell summary, repeats averaged
  std::string summary = "channels,preproc,loss" + res_cols + "\n";
  for (const std::string& ch : spec.channels)
    for (const PreprocKind pp : spec.preprocs)
      for (const LossKind ls : spec.losses)
        emit_row(summary, ch + "," + preproc_name(pp) + "," + loss_name(ls),
                 res_means([&](const GridRunRow& r) {
                   return r.channels == ch && r.preproc == pp && r.loss == ls;
                 }));

  // factor marginals
  std::string marg_pp = "preproc" + res_cols + "\n";
  for (const PreprocKind pp : spec.preprocs)
    emit_row(marg_pp, preproc_name(pp),
             res_means([&](const GridRunRow& r) { return r.preproc == pp; }));
  std::string marg_ch = "channels" + res_cols + "\n";
  for (const std::string& ch : spec.channels)
    emit_row(marg_ch, ch, res_means([&](const GridRunRow& r) { return r.channels == ch; }));

  std::string failures = "run,error\n";
  for (const GridFailure& f : out.failures) failures += f.run_name + "," + csv_quote(f.error) + "\n";

  const fs::path dir(spec.out);
  out.runs_csv = (dir / "runs.csv").string();
  out.summary_csv = (dir / "summary.csv").string();
  out.marginal_preproc_csv = (dir / "marginal_preproc.csv").string();
  out.marginal_channels_csv = (dir / "marginal_channels.csv").string();
  out.failures_csv = (dir / "failures.csv").string();
  write_file(out.runs_csv, runs);
  write_file(out.summary_csv, summary);
  write_file(out.marginal_preproc_csv, marg_pp);
  write_file(out.marginal_channels_csv, marg_ch);
  write_file(out.failures_csv, failures);
  return out;
}

}  // namespace greyfeed
