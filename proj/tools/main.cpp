#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "greyfeed/compose.hpp"
#include "greyfeed/descriptors.hpp"
#include "greyfeed/error.hpp"
#include "greyfeed/experiment.hpp"
#include "greyfeed/pgm.hpp"
#include "greyfeed/synthgen.hpp"

namespace gf = greyfeed;

namespace {

std::string class_tag(Eigen::Index i, Eigen::Index n) {
  if (n == gf::kNumDescriptors) return std::string(gf::descriptor_code(int(i)));
  return "C" + std::to_string(i);
}

void print_per_class(const Eigen::ArrayXd& per_class) {
  for (Eigen::Index c = 0; c < per_class.size(); ++c) {
    const std::string tag = class_tag(c, per_class.size());
    if (std::isnan(per_class(c)))
      std::printf("  %-6s    n/a (absent from the held-out split)\n", tag.c_str());
    else
      std::printf("  %-6s %6.4f\n", tag.c_str(), per_class(c));
  }
}

gf::InterpMethod method_from_string(const std::string& s) {
  if (s == "nearest") return gf::InterpMethod::nearest;
  if (s == "bilinear") return gf::InterpMethod::bilinear;
  if (s == "hamming") return gf::InterpMethod::hamming;
  throw gf::ParamError("unknown interpolation method '" + s + "'");
}

// train and grid take every config key as a flag too; flags win over the file.
struct KeyFlags {
  std::map<std::string, std::string> store;
  std::map<std::string, CLI::Option*> opts;
};

std::string key_help(const std::string& key, bool grid) {
  if (key == "data") return "dataset: manifest.csv, dataset directory, or synth:N[:HxW][:SEED]";
  if (key == "out") return "directory for run artifacts";
  if (key == "seed") return "run seed";
  if (key == "channels")
    return grid ? "channel codes, comma-separated" : "channel interpolation code (e.g. B-H-N)";
  if (key == "preproc")
    return std::string("preprocessing stem: cbn_1|cbn_3|inc|inc_d|no_tfm") +
           (grid ? ", comma-separated" : "");
  if (key == "loss") return grid ? "bce|soft_f1, comma-separated" : "bce|soft_f1";
  if (key == "resize-mode") return "squish|aspect";
  if (key == "target") return "network input HxW";
  if (key == "resolution")
    return "comma-separated sizes; presets imply their mode, custom ones need :squish/:aspect";
  if (key == "repeats") return "runs per grid cell";
  if (key == "epochs-frozen") return "phase-1 epochs (backbone frozen)";
  if (key == "epochs-finetune") return "phase-2 epochs (everything trainable)";
  if (key == "batch-size") return "minibatch size";
  if (key == "lr-frozen") return "phase-1 learning rate";
  if (key == "lr-min") return "finetune learning-rate floor (earliest stage)";
  if (key == "lr-max") return "finetune learning-rate cap (head)";
  if (key == "weight-decay") return "decoupled weight decay";
  return key;
}

void add_key_flags(CLI::App* sub, const std::vector<std::string>& keys, KeyFlags& kf, bool grid) {
  for (const std::string& key : keys) {
    std::string& slot = kf.store[key];  // map nodes are stable; CLI11 binds the reference
    kf.opts[key] = sub->add_option("--" + key, slot, key_help(key, grid));
  }
}

gf::KvConfig overlaid(const std::string& config_path, const KeyFlags& kf) {
  gf::KvConfig kv;
  if (!config_path.empty()) kv = gf::KvConfig::from_file(config_path);
  for (const auto& [key, opt] : kf.opts)
    if (opt->count() > 0) kv.set(key, kf.store.at(key));
  return kv;
}

int cmd_gen(const std::string& out, int n, std::uint64_t seed, int h, int w) {
  Eigen::ArrayXd counts = Eigen::ArrayXd::Zero(gf::kNumDescriptors);
  int regenerated = 0;
  const std::string manifest =
      gf::generate_dataset(out, n, seed, gf::default_class_mix(), h, w,
                           [&](const gf::SyntheticSample& s) {
                             counts += s.labels;
                             regenerated += s.regenerated;
                           });
  std::printf("wrote %d samples (%dx%d) -> %s\n", n, h, w, manifest.c_str());
  std::printf("label counts:\n");
  for (int c = 0; c < gf::kNumDescriptors; ++c)
    std::printf("  %-6s %6ld\n", std::string(gf::descriptor_code(c)).c_str(),
                std::lround(counts(c)));
  if (regenerated > 0)
    std::printf("placement retries forced %d sample regenerations\n", regenerated);
  return 0;
}

int cmd_resize(const std::string& in, const std::string& out, const std::string& size,
               const std::string& method) {
  const auto [h, w] = gf::parse_target(size);
  const gf::Image src = gf::read_pgm(std::filesystem::path(in));
  const gf::Image dst = gf::resize(src, h, w, method_from_string(method));
  gf::write_pgm(std::filesystem::path(out), dst);
  std::printf("%s: %ldx%ld -> %ldx%ld (%s)\n", out.c_str(), long(src.height()), long(src.width()),
              long(dst.height()), long(dst.width()), method.c_str());
  return 0;
}

int cmd_compose_preview(const std::string& in, const std::string& prefix,
                        const std::string& channels, const std::string& size,
                        const std::string& mode) {
  const gf::ChannelConfig cfg = gf::parse_config(channels);
  gf::ResizePolicy policy;
  const auto [h, w] = gf::parse_target(size);
  policy.target_h = h;
  policy.target_w = w;
  policy.mode = gf::resize_mode_from_string(mode);
  const gf::Image src = gf::read_pgm(std::filesystem::path(in));
  const gf::Tensor t = gf::compose(src, cfg, policy);
  static const char* names[3] = {"r", "g", "b"};
  for (int c = 0; c < 3; ++c) {
    gf::Image ch(h, w);
    for (Eigen::Index y = 0; y < h; ++y)
      for (Eigen::Index x = 0; x < w; ++x)
        ch(y, x) = t.data()((Eigen::Index(c) * h + y) * w + x);
    const std::string path = prefix + "_" + names[c] + ".pgm";
    gf::write_pgm(std::filesystem::path(path), ch);
    std::printf("%s\n", path.c_str());
  }
  return 0;
}

int cmd_train(const gf::KvConfig& kv) {
  const gf::ExperimentConfig cfg = gf::experiment_from_kv(kv);
  const gf::RunResult r = gf::run_train(cfg, [](const gf::EpochRow& row) {
    std::printf("epoch %3d  phase %d  loss %.6f  prauc %.4f  %.1fs\n", row.epoch, row.phase,
                row.mean_loss, row.macro_prauc, row.wall_seconds);
    std::fflush(stdout);
  });
  std::printf("final macro PRAUC %.4f  (%.1fs)\n", r.final_macro, r.wall_seconds);
  print_per_class(r.per_class);
  std::printf("artifacts in %s\n", r.run_dir.c_str());
  return 0;
}

int cmd_grid(const gf::KvConfig& kv) {
  const gf::GridSpec spec = gf::grid_from_kv(kv);
  const gf::GridOutcome out = gf::run_grid(spec, [](const gf::GridProgress& p) {
    if (p.ok)
      std::printf("[%d/%d] %s  prauc %.4f\n", p.index, p.total, p.run_name.c_str(), p.macro);
    else
      std::printf("[%d/%d] %s  FAILED\n", p.index, p.total, p.run_name.c_str());
    std::fflush(stdout);
  });
  std::printf("runs:              %s\n", out.runs_csv.c_str());
  std::printf("summary:           %s\n", out.summary_csv.c_str());
  std::printf("marginal preproc:  %s\n", out.marginal_preproc_csv.c_str());
  std::printf("marginal channels: %s\n", out.marginal_channels_csv.c_str());
  if (!out.failures.empty()) {
    for (const auto& f : out.failures)
      std::fprintf(stderr, "failed: %s: %s\n", f.run_name.c_str(), f.error.c_str());
    std::fprintf(stderr, "%zu of %zu runs failed; see %s\n", out.failures.size(),
                 out.rows.size() + out.failures.size(), out.failures_csv.c_str());
    return 1;
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& out,
             int top_k) {
  gf::EvalOptions opt;
  opt.checkpoint = checkpoint;
  opt.data = data;
  opt.out = out;
  opt.top_k = top_k;
  const gf::EvalSummary s = gf::run_eval(opt);
  std::printf("macro PRAUC %.4f\n", s.macro);
  print_per_class(s.per_class);
  if (!s.worst.empty()) {
    std::printf("highest-loss held-out samples:\n");
    int rank = 1;
    for (const auto& worst : s.worst)
      std::printf("  %2d  index %5ld  loss %.4f  [%s]\n", rank++, long(worst.index), worst.loss,
                  worst.labels.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"greyfeed: greyscale-to-colour-network experiment toolkit"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "synthesize a descriptor dataset to disk");
  std::string gen_out;
  int gen_n = 0, gen_h = 1048, gen_w = 400;
  std::uint64_t gen_seed = 1234;
  gen->add_option("--out", gen_out, "dataset directory")->required();
  gen->add_option("--n", gen_n, "sample count")->required()->check(CLI::Range(1, 1 << 20));
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--height", gen_h, "image height")->check(CLI::Range(1, 1 << 20));
  gen->add_option("--width", gen_w, "image width")->check(CLI::Range(1, 1 << 20));

  auto* rz = app.add_subcommand("resize", "resample one PGM image");
  std::string rz_in, rz_out, rz_size, rz_method = "hamming";
  rz->add_option("--in", rz_in, "source PGM")->required();
  rz->add_option("--out", rz_out, "destination PGM")->required();
  rz->add_option("--size", rz_size, "target HxW")->required();
  rz->add_option("--method", rz_method, "interpolation")
      ->check(CLI::IsMember({"nearest", "bilinear", "hamming"}));

  auto* cp = app.add_subcommand("compose-preview",
                                "write the three composed input channels as PGMs");
  std::string cp_in, cp_prefix, cp_channels = "B-H-N", cp_size = "352x144", cp_mode = "aspect";
  cp->add_option("--in", cp_in, "source PGM")->required();
  cp->add_option("--out", cp_prefix, "output path prefix")->required();
  cp->add_option("--channels", cp_channels, "channel interpolation code");
  cp->add_option("--size", cp_size, "target HxW");
  cp->add_option("--resize-mode", cp_mode, "squish|aspect");

  auto* tr = app.add_subcommand("train", "run one two-phase training experiment");
  std::string tr_config;
  tr->add_option("--config", tr_config, "key=value config file; flags override it");
  KeyFlags tr_keys;
  add_key_flags(tr, gf::experiment_keys(), tr_keys, false);

  auto* gr = app.add_subcommand("grid", "run a factor grid of training experiments");
  std::string gr_config;
  gr->add_option("--config", gr_config, "key=value config file; flags override it");
  KeyFlags gr_keys;
  add_key_flags(gr, gf::grid_keys(), gr_keys, true);

  auto* ev = app.add_subcommand("eval", "score a checkpoint on its held-out split");
  std::string ev_ck, ev_data, ev_out;
  int ev_top = 10;
  ev->add_option("--checkpoint", ev_ck, "checkpoint.bin from a training run")->required();
  ev->add_option("--data", ev_data, "dataset the checkpoint was trained on")->required();
  ev->add_option("--out", ev_out, "directory for evaluation CSVs")->required();
  ev->add_option("--top-k", ev_top, "worst-sample listing length")
      ->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(gen_out, gen_n, gen_seed, gen_h, gen_w);
    if (rz->parsed()) return cmd_resize(rz_in, rz_out, rz_size, rz_method);
    if (cp->parsed()) return cmd_compose_preview(cp_in, cp_prefix, cp_channels, cp_size, cp_mode);
    if (tr->parsed()) return cmd_train(overlaid(tr_config, tr_keys));
    if (gr->parsed()) return cmd_grid(overlaid(gr_config, gr_keys));
    if (ev->parsed()) return cmd_eval(ev_ck, ev_data, ev_out, ev_top);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
