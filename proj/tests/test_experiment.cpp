#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "greyfeed/checkpoint.hpp"
#include "greyfeed/descriptors.hpp"
#include "greyfeed/error.hpp"
#include "greyfeed/experiment.hpp"

using namespace greyfeed;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const char* name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

// a quick config for runs that only need the machinery, not the accuracy
ExperimentConfig quick_config(const std::string& data, const std::string& out,
                              std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.data = data;
  cfg.out = out;
  cfg.seed = seed;
  cfg.target_h = 48;
  cfg.target_w = 24;
  cfg.plan.phase1_epochs = 1;
  cfg.plan.phase2_epochs = 1;
  cfg.plan.batch_size = 4;
  return cfg;
}

}  // namespace

TEST_CASE("kv config parses sections, comments and overrides") {
  const KvConfig kv = KvConfig::from_text(
      "# experiment\n"
      "\n"
      "[run]\n"
      "seed = 7\n"
      "channels=B-H-N\n"
      "weight-decay = 0.05\n",
      "demo.cfg");
  CHECK(kv.get("seed", "") == "7");
  CHECK(kv.get_long("seed", 0) == 7);
  CHECK(kv.get("channels", "") == "B-H-N");
  CHECK(kv.get_double("weight-decay", 0.0) == 0.05);
  CHECK(kv.get("missing", "fallback") == "fallback");
  CHECK(kv.find("missing") == nullptr);

  KvConfig writable = kv;
  writable.set("seed", "9");
  writable.set("extra", "1");
  CHECK(writable.get_long("seed", 0) == 9);
  CHECK(writable.get("extra", "") == "1");

  CHECK(kv.to_text() == "seed=7\nchannels=B-H-N\nweight-decay=0.05\n");

  CHECK_THROWS_AS(KvConfig::from_text("seed=1\nseed=2\n"), ParseError);
  CHECK_THROWS_WITH_AS(KvConfig::from_text("just words\n", "bad.cfg"),
                       "bad.cfg:1: expected key=value, got 'just words'", ParseError);
  CHECK_THROWS_AS(KvConfig::from_text("=nothing\n"), ParseError);
  CHECK_THROWS_AS(kv.get_long("channels", 0), ParseError);
  CHECK_THROWS_AS(kv.get_double("channels", 0.0), ParseError);
  CHECK_THROWS_WITH_AS(kv.require_known({"seed", "channels"}),
                       "demo.cfg:6: unknown key 'weight-decay'", ParseError);
  CHECK_NOTHROW(kv.require_known({"seed", "channels", "weight-decay"}));
  CHECK_THROWS_AS(KvConfig::from_file("/no/such/config.cfg"), IoError);
}

TEST_CASE("experiment config round-trips through key=value form") {
  ExperimentConfig cfg;
  cfg.data = "synth:20:96x80:5";
  cfg.out = "/tmp/run";
  cfg.channels = "N-B-H";
  cfg.preproc = PreprocKind::cbn_3;
  cfg.loss = LossKind::soft_f1;
  cfg.resize_mode = ResizeMode::squish;
  cfg.target_h = 224;
  cfg.target_w = 224;
  cfg.plan.phase1_epochs = 3;
  cfg.plan.phase2_epochs = 5;
  cfg.plan.batch_size = 8;
  cfg.plan.phase1_lr = 5e-4;
  cfg.plan.lr_min = 1e-7;
  cfg.plan.lr_max = 2e-4;
  cfg.plan.weight_decay = 0.02;
  cfg.seed = 99;

  const ExperimentConfig back = experiment_from_kv(experiment_to_kv(cfg));
  CHECK(back.data == cfg.data);
  CHECK(back.out == cfg.out);
  CHECK(back.channels == cfg.channels);
  CHECK(back.preproc == cfg.preproc);
  CHECK(back.loss == cfg.loss);
  CHECK(back.resize_mode == cfg.resize_mode);
  CHECK(back.target_h == cfg.target_h);
  CHECK(back.target_w == cfg.target_w);
  CHECK(back.plan.phase1_epochs == cfg.plan.phase1_epochs);
  CHECK(back.plan.phase2_epochs == cfg.plan.phase2_epochs);
  CHECK(back.plan.batch_size == cfg.plan.batch_size);
  CHECK(back.plan.phase1_lr == cfg.plan.phase1_lr);
  CHECK(back.plan.lr_min == cfg.plan.lr_min);
  CHECK(back.plan.lr_max == cfg.plan.lr_max);
  CHECK(back.plan.weight_decay == cfg.plan.weight_decay);
  CHECK(back.seed == cfg.seed);

  // defaults hold when nothing is given
  const ExperimentConfig dft = experiment_from_kv(KvConfig{});
  CHECK(dft.channels == "B-H-N");
  CHECK(dft.preproc == PreprocKind::inc_d);
  CHECK(dft.loss == LossKind::bce);
  CHECK(dft.resize_mode == ResizeMode::aspect_pad);
  CHECK(dft.target_h == 352);
  CHECK(dft.target_w == 144);
  CHECK(dft.plan.phase1_epochs == 10);
  CHECK(dft.plan.phase2_epochs == 40);

  KvConfig bad;
  bad.set("loss", "hinge");
  CHECK_THROWS_AS(experiment_from_kv(bad), ParamError);
  KvConfig bad2;
  bad2.set("channels", "B-H-X");
  CHECK_THROWS_AS(experiment_from_kv(bad2), ParseError);
  KvConfig bad3;
  bad3.set("resize-mode", "letterbox");
  CHECK_THROWS_AS(experiment_from_kv(bad3), ParamError);
  KvConfig bad4;
  bad4.set("target", "352by144");
  CHECK_THROWS_AS(experiment_from_kv(bad4), ParseError);
  KvConfig bad5;
  bad5.set("unknown-flag", "1");
  CHECK_THROWS_AS(experiment_from_kv(bad5), ParseError);
}

TEST_CASE("targets and resolutions parse strictly") {
  CHECK(parse_target("352x144") == std::pair<int, int>{352, 144});
  CHECK(parse_target("1x1") == std::pair<int, int>{1, 1});
  CHECK_THROWS_AS(parse_target("352"), ParseError);
  CHECK_THROWS_AS(parse_target("x144"), ParseError);
  CHECK_THROWS_AS(parse_target("352x"), ParseError);
  CHECK_THROWS_AS(parse_target("0x144"), ParseError);
  CHECK_THROWS_AS(parse_target("352x-1"), ParseError);
  CHECK_THROWS_AS(parse_target("axb"), ParseError);
  CHECK_THROWS_AS(parse_target("352x144x2"), ParseError);

  const Resolution squish = parse_resolution("224x224");
  CHECK(squish.h == 224);
  CHECK(squish.w == 224);
  CHECK(squish.mode == ResizeMode::squish);
  for (const char* token : {"352x144", "464x192", "928x384"})
    CHECK(parse_resolution(token).mode == ResizeMode::aspect_pad);

  const Resolution custom = parse_resolution("48x24:aspect");
  CHECK(custom.h == 48);
  CHECK(custom.mode == ResizeMode::aspect_pad);
  CHECK(parse_resolution("32x32:squish").mode == ResizeMode::squish);
  CHECK_THROWS_AS(parse_resolution("48x24"), ParamError);  // custom size, mode unstated
  CHECK_THROWS_AS(parse_resolution("48x24:tile"), ParamError);

  CHECK(resolution_name(squish) == "224x224-squish");
  CHECK(resolution_name(custom) == "48x24-aspect");
}

TEST_CASE("open_dataset resolves all three spellings") {
  const auto a = open_dataset("synth:5:96x80:7");
  REQUIRE(a->size() == 5);
  CHECK(a->get(0).image.height() == 96);
  CHECK(a->get(0).image.width() == 80);
  const auto b = open_dataset("synth:5:96x80:7");
  for (Eigen::Index i = 0; i < 5; ++i) {
    CHECK((a->labels(i) == b->labels(i)).all());
    CHECK((a->get(i).image.pixels == b->get(i).image.pixels).all());
  }
  // a different generator seed gives a different dataset
  const auto c = open_dataset("synth:5:96x80:8");
  bool any_differs = false;
  for (Eigen::Index i = 0; i < 5 && !any_differs; ++i)
    any_differs = !(a->get(i).image.pixels == c->get(i).image.pixels).all();
  CHECK(any_differs);

  const auto dir = fresh_dir("greyfeed_open_dataset");
  const auto samples = generate_samples(3, 11, default_class_mix(), 96, 80);
  const std::string manifest = write_dataset(dir.string(), samples);
  const auto by_file = open_dataset(manifest);
  const auto by_dir = open_dataset(dir.string());
  REQUIRE(by_file->size() == 3);
  REQUIRE(by_dir->size() == 3);
  CHECK((by_file->labels(2) == by_dir->labels(2)).all());

  CHECK_THROWS_AS(open_dataset(""), ParamError);
  CHECK_THROWS_AS(open_dataset("synth:"), ParseError);
  CHECK_THROWS_AS(open_dataset("synth:0"), ParseError);
  CHECK_THROWS_AS(open_dataset("synth:abc"), ParseError);
  CHECK_THROWS_AS(open_dataset("synth:5:96x80:7:9"), ParseError);
  CHECK_THROWS_AS(open_dataset("/no/such/manifest.csv"), IoError);
}

TEST_CASE("run_train writes a complete, self-describing run directory") {
  const auto dir = fresh_dir("greyfeed_run_train");
  const ExperimentConfig cfg = quick_config("synth:12:96x80:5", (dir / "run").string(), 31);
  const RunResult res = run_train(cfg);

  CHECK(res.run_dir == (dir / "run").string());
  CHECK(res.final_macro >= 0.0);
  CHECK(res.final_macro <= 1.0);
  CHECK(res.per_class.size() == kNumDescriptors);
  CHECK(res.wall_seconds > 0.0);
  CHECK(!fs::exists(dir / "run" / "INCOMPLETE"));

  // the snapshot reproduces the config, byte for byte through a reparse
  const ExperimentConfig back =
      experiment_from_kv(KvConfig::from_file((dir / "run" / "config.txt").string()));
  CHECK(back.data == cfg.data);
  CHECK(back.seed == cfg.seed);
  CHECK(back.target_h == cfg.target_h);
  CHECK(back.plan.phase2_epochs == cfg.plan.phase2_epochs);

  const auto log_rows = parse_csv(slurp(dir / "run" / "train_log.csv"));
  REQUIRE(log_rows.size() == 3);  // header + two epochs
  CHECK(log_rows[0] == std::vector<std::string>{"epoch", "phase", "mean_loss", "macro_prauc"});
  CHECK(log_rows[1][0] == "1");
  CHECK(log_rows[2][0] == "2");
  CHECK(log_rows[1][1] == "1");
  CHECK(log_rows[2][1] == "2");

  const auto prauc_rows = parse_csv(slurp(dir / "run" / "per_class_prauc.csv"));
  REQUIRE(prauc_rows.size() == 1 + kNumDescriptors + 1);
  CHECK(prauc_rows[0] == std::vector<std::string>{"class", "prauc"});
  CHECK(prauc_rows[1][0] == "D01");
  CHECK(prauc_rows[kNumDescriptors][0] == "D14");
  CHECK(prauc_rows[kNumDescriptors + 1][0] == "macro");

  const auto confusion_rows = parse_csv(slurp(dir / "run" / "confusion.csv"));
  REQUIRE(confusion_rows.size() == 18);  // header row + 17 labelled rows
  for (const auto& row : confusion_rows) CHECK(row.size() == 18);

  const LoadedCheckpoint ck = load_checkpoint((dir / "run" / "checkpoint.bin").string());
  CHECK(ck.meta.channels == "B-H-N");
  CHECK(ck.meta.resize_mode == "aspect");
  CHECK(ck.meta.target_h == 48);
  CHECK(ck.meta.target_w == 24);
  CHECK(ck.meta.loss == "bce");
  CHECK(ck.meta.batch_size == 4);
  CHECK(ck.meta.seed == 31);
}

TEST_CASE("an aborted run leaves its incomplete flag behind") {
  const auto dir = fresh_dir("greyfeed_run_abort");
  ExperimentConfig cfg = quick_config("/no/such/manifest.csv", (dir / "run").string(), 1);
  CHECK_THROWS_AS(run_train(cfg), IoError);
  CHECK(fs::exists(dir / "run" / "INCOMPLETE"));

  cfg.out.clear();
  CHECK_THROWS_AS(run_train(cfg), ParamError);
  cfg.out = (dir / "run2").string();
  cfg.data.clear();
  CHECK_THROWS_AS(run_train(cfg), ParamError);
  CHECK(!fs::exists(dir / "run2"));  // rejected before any filesystem touch
}

TEST_CASE("identical config and seed reproduce every deterministic artifact") {
  const auto dir = fresh_dir("greyfeed_run_determinism");
  const std::string data = "synth:12:96x80:5";
  const RunResult a = run_train(quick_config(data, (dir / "a").string(), 77));
  const RunResult b = run_train(quick_config(data, (dir / "b").string(), 77));

  CHECK(a.final_macro == b.final_macro);
  for (const char* f : {"train_log.csv", "checkpoint.bin", "per_class_prauc.csv",
                        "confusion.csv"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));

  // a different seed genuinely changes the trajectory
  const RunResult c = run_train(quick_config(data, (dir / "c").string(), 78));
  CHECK(slurp(dir / "a" / "checkpoint.bin") != slurp(dir / "c" / "checkpoint.bin"));
}

TEST_CASE("no_tfm runs train zero preprocessing parameters") {
  const auto dir = fresh_dir("greyfeed_run_no_tfm");
  ExperimentConfig cfg = quick_config("synth:8:96x80:5", (dir / "run").string(), 3);
  cfg.preproc = PreprocKind::no_tfm;
  run_train(cfg);

  LoadedCheckpoint ck = load_checkpoint((dir / "run" / "checkpoint.bin").string());
  CHECK(ck.model.spec.preproc.kind == PreprocKind::no_tfm);
  std::vector<Tensor> preproc_params;
  ck.model.preproc.collect(preproc_params);
  CHECK(preproc_params.empty());
}

TEST_CASE("run_eval reproduces the run's own held-out numbers exactly") {
  const auto dir = fresh_dir("greyfeed_run_eval");
  const std::string data = "synth:20:96x80:5";
  const ExperimentConfig cfg = quick_config(data, (dir / "run").string(), 13);
  const RunResult trained = run_train(cfg);

  EvalOptions opt;
  opt.checkpoint = (dir / "run" / "checkpoint.bin").string();
  opt.data = data;
  opt.out = (dir / "eval").string();
  opt.top_k = 5;
  const EvalSummary ev = run_eval(opt);

  CHECK(ev.macro == trained.final_macro);  // bitwise: same split, same feed, same batching
  REQUIRE(ev.per_class.size() == trained.per_class.size());
  for (Eigen::Index c = 0; c < ev.per_class.size(); ++c) {
    if (std::isnan(trained.per_class(c)))
      CHECK(std::isnan(ev.per_class(c)));
    else
      CHECK(ev.per_class(c) == trained.per_class(c));
  }
  CHECK(slurp(dir / "run" / "per_class_prauc.csv") == slurp(dir / "eval" / "per_class_prauc.csv"));
  CHECK(slurp(dir / "run" / "confusion.csv") == slurp(dir / "eval" / "confusion.csv"));

  REQUIRE(ev.worst.size() <= 5);
  REQUIRE(!ev.worst.empty());
  for (std::size_t i = 1; i < ev.worst.size(); ++i)
    CHECK(ev.worst[i - 1].loss >= ev.worst[i].loss);
  const Split split = split_dataset(20, 13);
  for (const HighLossSample& s : ev.worst)
    CHECK(std::find(split.val.begin(), split.val.end(), s.index) != split.val.end());

  const auto listing = parse_csv(slurp(dir / "eval" / "highest_loss.csv"));
  REQUIRE(listing.size() == 1 + ev.worst.size());
  CHECK(listing[0][0] == "rank");
  CHECK(listing[1][0] == "1");

  // checkpoints trained for a different class roster are refused
  ModelSpec alien;
  alien.preproc.kind = PreprocKind::cbn_1;
  alien.backbone_channels = {4};
  alien.head_hidden = 8;
  alien.n_classes = 5;
  Model alien_model(alien, 0);
  save_checkpoint((dir / "alien.bin").string(), alien_model, CheckpointMeta{});
  EvalOptions mismatched = opt;
  mismatched.checkpoint = (dir / "alien.bin").string();
  CHECK_THROWS_AS(run_eval(mismatched), DataError);
}

TEST_CASE("the grid crosses factors, derives seeds and averages repeats") {
  const auto dir = fresh_dir("greyfeed_grid");
  GridSpec spec;
  spec.data = "synth:12:96x80:5";
  spec.out = (dir / "grid").string();
  spec.channels = {"B-H-N", "B-B-B"};
  spec.preprocs = {PreprocKind::cbn_1, PreprocKind::no_tfm};
  spec.losses = {LossKind::bce};
  spec.resolutions = {parse_resolution("48x24:aspect"), parse_resolution("32x32:squish")};
  spec.repeats = 2;
  spec.plan.phase1_epochs = 1;
  spec.plan.phase2_epochs = 0;
  spec.plan.batch_size = 4;
  spec.seed = 2024;

  const GridOutcome out = run_grid(spec);
  REQUIRE(out.rows.size() == 16);  // 2 x 2 x 1 x 2 x 2 repeats
  CHECK(out.failures.empty());

  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    CHECK(out.rows[i].seed == derive_seed(2024, std::uint64_t(i) + 1));
    seeds.insert(out.rows[i].seed);
    CHECK(out.rows[i].macro_prauc >= 0.0);
    CHECK(out.rows[i].macro_prauc <= 1.0);
  }
  CHECK(seeds.size() == 16);

  const auto runs = parse_csv(slurp(out.runs_csv));
  REQUIRE(runs.size() == 17);
  CHECK(runs[0] == std::vector<std::string>{"channels", "preproc", "loss", "resolution", "mode",
                                            "seed", "macro_prauc", "wall_seconds",
                                            "per_class_prauc"});

  // summary: one row per cell, means recomputed from the raw rows
  const auto summary = parse_csv(slurp(out.summary_csv));
  REQUIRE(summary.size() == 5);
  CHECK(summary[0] == std::vector<std::string>{"channels", "preproc", "loss", "48x24-aspect",
                                               "32x32-squish", "delta"});
  for (std::size_t row = 1; row < summary.size(); ++row) {
    const std::string& ch = summary[row][0];
    const std::string& pp = summary[row][1];
    for (std::size_t col = 0; col < 2; ++col) {
      const Resolution& res = spec.resolutions[col];
      double sum = 0.0;
      int n = 0;
      for (const GridRunRow& r : out.rows) {
        if (r.channels != ch || preproc_name(r.preproc) != pp) continue;
        if (r.resolution.h != res.h || r.resolution.mode != res.mode) continue;
        sum += r.macro_prauc;
        ++n;
      }
      REQUIRE(n == 2);  // the two repeats
      CHECK(std::abs(std::strtod(summary[row][3 + col].c_str(), nullptr) - sum / n) < 1e-12);
    }
    const double aspect = std::strtod(summary[row][3].c_str(), nullptr);
    const double squish = std::strtod(summary[row][4].c_str(), nullptr);
    const double delta = std::strtod(summary[row][5].c_str(), nullptr);
    CHECK(std::abs(delta - (aspect - squish)) < 1e-12);
  }

  // marginals: one row per factor level, averaged over everything else
  const auto marg_pp = parse_csv(slurp(out.marginal_preproc_csv));
  REQUIRE(marg_pp.size() == 3);
  CHECK(marg_pp[0] == std::vector<std::string>{"preproc", "48x24-aspect", "32x32-squish",
                                               "delta"});
  for (std::size_t row = 1; row < marg_pp.size(); ++row) {
    for (std::size_t col = 0; col < 2; ++col) {
      const Resolution& res = spec.resolutions[col];
      double sum = 0.0;
      int n = 0;
      for (const GridRunRow& r : out.rows) {
        if (preproc_name(r.preproc) != marg_pp[row][0]) continue;
        if (r.resolution.h != res.h || r.resolution.mode != res.mode) continue;
        sum += r.macro_prauc;
        ++n;
      }
      REQUIRE(n == 4);  // 2 channel configs x 2 repeats
      CHECK(std::abs(std::strtod(marg_pp[row][1 + col].c_str(), nullptr) - sum / n) < 1e-12);
    }
  }
  const auto marg_ch = parse_csv(slurp(out.marginal_channels_csv));
  REQUIRE(marg_ch.size() == 3);
  CHECK(marg_ch[1][0] == "B-H-N");
  CHECK(marg_ch[2][0] == "B-B-B");

  // every cell directory is a full run directory
  CHECK(fs::exists(fs::path(spec.out) / "B-H-N_cbn_1_bce_48x24-aspect_r0" / "train_log.csv"));
  CHECK(fs::exists(fs::path(spec.out) / "B-B-B_no_tfm_bce_32x32-squish_r1" / "checkpoint.bin"));
  CHECK(parse_csv(slurp(out.failures_csv)).size() == 1);  // header only
}

TEST_CASE("grid failures are recorded while the grid continues") {
  const auto dir = fresh_dir("greyfeed_grid_failures");
  GridSpec spec;
  spec.data = "/no/such/manifest.csv";  // every run will fail to open its data
  spec.out = (dir / "grid").string();
  spec.channels = {"B-H-N"};
  spec.preprocs = {PreprocKind::cbn_1, PreprocKind::no_tfm};
  spec.losses = {LossKind::bce};
  spec.resolutions = {parse_resolution("48x24:aspect")};
  spec.repeats = 2;
  spec.plan.phase1_epochs = 1;
  spec.plan.phase2_epochs = 0;

  const GridOutcome out = run_grid(spec);
  CHECK(out.rows.empty());
  REQUIRE(out.failures.size() == 4);  // it did not stop at the first
  for (const GridFailure& f : out.failures) CHECK(f.error.find("manifest") != std::string::npos);

  const auto failures = parse_csv(slurp(out.failures_csv));
  REQUIRE(failures.size() == 5);
  CHECK(failures[0] == std::vector<std::string>{"run", "error"});
  const auto runs = parse_csv(slurp(out.runs_csv));
  CHECK(runs.size() == 1);  // header only
  // summary cells exist but hold no numbers
  const auto summary = parse_csv(slurp(out.summary_csv));
  REQUIRE(summary.size() == 3);
  CHECK(summary[1][3] == "nan");

  GridSpec empty = spec;
  empty.channels.clear();
  CHECK_THROWS_AS(run_grid(empty), ParamError);
  GridSpec norep = spec;
  norep.repeats = 0;
  CHECK_THROWS_AS(run_grid(norep), ParamError);
}
