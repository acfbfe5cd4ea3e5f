#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "greyfeed/compose.hpp"
#include "greyfeed/pgm.hpp"
#include "greyfeed/synthgen.hpp"

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

struct CmdResult {
  int code = -1;
  std::string out, err;
};

// Shells out to the real binary; none of our paths contain spaces.
CmdResult run(const std::string& args) {
  const fs::path cap = fs::temp_directory_path() / "greyfeed_cli_capture";
  fs::create_directories(cap);
  const fs::path so = cap / "stdout.txt", se = cap / "stderr.txt";
  const std::string cmd =
      std::string(GREYFEED_BIN) + " " + args + " >" + so.string() + " 2>" + se.string();
  const int status = std::system(cmd.c_str());
  CmdResult r;
  if (status >= 0 && WIFEXITED(status)) r.code = WEXITSTATUS(status);
  r.out = slurp(so);
  r.err = slurp(se);
  return r;
}

bool trees_equal(const fs::path& a, const fs::path& b) {
  std::vector<std::string> na, nb;
  for (const auto& e : fs::directory_iterator(a)) na.push_back(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(b)) nb.push_back(e.path().filename().string());
  std::sort(na.begin(), na.end());
  std::sort(nb.begin(), nb.end());
  if (na != nb) return false;
  for (const std::string& n : na)
    if (slurp(a / n) != slurp(b / n)) return false;
  return true;
}

int count_lines_with(const std::string& text, const std::string& needle) {
  int n = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (line.find(needle) != std::string::npos) ++n;
  return n;
}

}  // namespace

TEST_CASE("gen writes a deterministic dataset and reports label counts") {
  const auto dir = fresh_dir("greyfeed_cli_gen");
  const std::string common = "gen --n 6 --seed 11 --height 180 --width 72 --out ";
  const CmdResult r1 = run(common + (dir / "d1").string());
  REQUIRE(r1.code == 0);
  CHECK(r1.out.find("wrote 6 samples (180x72)") != std::string::npos);
  CHECK(r1.out.find("manifest.csv") != std::string::npos);
  // one count line per roster entry
  CHECK(count_lines_with(r1.out, "D0") + count_lines_with(r1.out, "D1") == 17);

  const CmdResult r2 = run(common + (dir / "d2").string());
  REQUIRE(r2.code == 0);
  CHECK(trees_equal(dir / "d1", dir / "d2"));

  const CmdResult r3 = run("gen --n 6 --seed 12 --height 180 --width 72 --out " +
                           (dir / "d3").string());
  REQUIRE(r3.code == 0);
  CHECK_FALSE(trees_equal(dir / "d1", dir / "d3"));

  const CmdResult bad = run("gen --n 0 --out " + (dir / "d4").string());
  CHECK(bad.code != 0);
  CHECK(bad.err.find("--n") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "d4"));
}

TEST_CASE("resize round-trips identity and rejects unknown methods") {
  const auto dir = fresh_dir("greyfeed_cli_resize");
  Image src(40, 30);
  for (Eigen::Index y = 0; y < 40; ++y)
    for (Eigen::Index x = 0; x < 30; ++x) src(y, x) = double((y * 30 + x) % 256) / 255.0;
  write_pgm(dir / "in.pgm", src);

  for (const char* method : {"nearest", "bilinear", "hamming"}) {
    const fs::path out = dir / (std::string("same_") + method + ".pgm");
    const CmdResult r = run("resize --in " + (dir / "in.pgm").string() + " --out " +
                            out.string() + " --size 40x30 --method " + method);
    REQUIRE(r.code == 0);
    CHECK(slurp(out) == slurp(dir / "in.pgm"));  // identity resize keeps every byte
  }

  const CmdResult shrink = run("resize --in " + (dir / "in.pgm").string() + " --out " +
                               (dir / "small.pgm").string() + " --size 9x7");
  REQUIRE(shrink.code == 0);
  CHECK(shrink.out.find("40x30 -> 9x7 (hamming)") != std::string::npos);
  const Image small = read_pgm(dir / "small.pgm");
  CHECK(small.height() == 9);
  CHECK(small.width() == 7);

  const CmdResult bad = run("resize --in " + (dir / "in.pgm").string() + " --out " +
                            (dir / "x.pgm").string() + " --size 9x7 --method cubic");
  CHECK(bad.code != 0);
  for (const char* method : {"nearest", "bilinear", "hamming"})
    CHECK(bad.err.find(method) != std::string::npos);

  const CmdResult missing = run("resize --in " + (dir / "nope.pgm").string() + " --out " +
                                (dir / "x.pgm").string() + " --size 9x7");
  CHECK(missing.code != 0);
  CHECK_FALSE(missing.err.empty());
}

TEST_CASE("compose-preview emits the exact channel planes") {
  const auto dir = fresh_dir("greyfeed_cli_compose");
  const auto samples = generate_samples(1, 31, default_class_mix(), 180, 72);
  write_pgm(dir / "in.pgm", samples[0].image);

  const CmdResult r = run("compose-preview --in " + (dir / "in.pgm").string() + " --out " +
                          (dir / "prev").string() + " --channels B-H-N --size 64x32" +
                          " --resize-mode aspect");
  REQUIRE(r.code == 0);

  // oracle: run the same pipeline in-process and quantize the same way
  ResizePolicy policy;
  policy.target_h = 64;
  policy.target_w = 32;
  policy.mode = ResizeMode::aspect_pad;
  const Tensor t = compose(read_pgm(dir / "in.pgm"), parse_config("B-H-N"), policy);
  const char* names[3] = {"r", "g", "b"};
  for (int c = 0; c < 3; ++c) {
    Image plane(64, 32);
    for (Eigen::Index y = 0; y < 64; ++y)
      for (Eigen::Index x = 0; x < 32; ++x)
        plane(y, x) = t.data()((Eigen::Index(c) * 64 + y) * 32 + x);
    write_pgm(dir / (std::string("want_") + names[c] + ".pgm"), plane);
    CHECK(slurp(dir / (std::string("prev_") + names[c] + ".pgm")) ==
          slurp(dir / (std::string("want_") + names[c] + ".pgm")));
  }
}

TEST_CASE("train runs from a config file with flag overrides and repeats bit-for-bit") {
  const auto dir = fresh_dir("greyfeed_cli_train");
  std::ofstream cfg(dir / "exp.cfg");
  cfg << "data=synth:20:160x120:5\n"
      << "out=" << (dir / "a").string() << "\n"
      << "seed=77\ntarget=48x24\nresize-mode=aspect\n"
      << "epochs-frozen=1\nepochs-finetune=1\nbatch-size=4\n";
  cfg.close();

  const CmdResult r1 = run("train --config " + (dir / "exp.cfg").string());
  REQUIRE(r1.code == 0);
  CHECK(count_lines_with(r1.out, "epoch ") == 2);
  CHECK(r1.out.find("phase 1") != std::string::npos);
  CHECK(r1.out.find("phase 2") != std::string::npos);
  CHECK(r1.out.find("final macro PRAUC") != std::string::npos);
  REQUIRE(fs::exists(dir / "a" / "checkpoint.bin"));
  CHECK_FALSE(fs::exists(dir / "a" / "INCOMPLETE"));

  // --out beats the file; everything else identical => identical artifacts
  const CmdResult r2 = run("train --config " + (dir / "exp.cfg").string() + " --out " +
                           (dir / "b").string());
  REQUIRE(r2.code == 0);
  CHECK(slurp(dir / "a" / "train_log.csv") == slurp(dir / "b" / "train_log.csv"));
  CHECK(slurp(dir / "a" / "checkpoint.bin") == slurp(dir / "b" / "checkpoint.bin"));

  // a different seed through a flag must change the outcome
  const CmdResult r3 = run("train --config " + (dir / "exp.cfg").string() + " --out " +
                           (dir / "c").string() + " --seed 78");
  REQUIRE(r3.code == 0);
  CHECK(slurp(dir / "a" / "checkpoint.bin") != slurp(dir / "c" / "checkpoint.bin"));

  std::ofstream bad(dir / "bad.cfg");
  bad << "data=synth:8\nwat=1\n";
  bad.close();
  const CmdResult rbad = run("train --config " + (dir / "bad.cfg").string());
  CHECK(rbad.code == 1);
  CHECK(rbad.err.find("unknown key 'wat'") != std::string::npos);
  CHECK(rbad.err.find("bad.cfg:2") != std::string::npos);

  const CmdResult rflag = run("train --data synth:8 --bogus 1");
  CHECK(rflag.code != 0);

  const CmdResult rnodata = run("train --out " + (dir / "d").string());
  CHECK(rnodata.code == 1);
  CHECK(rnodata.err.find("dataset") != std::string::npos);
}

TEST_CASE("eval reports the stored run and writes its listings") {
  const auto dir = fresh_dir("greyfeed_cli_eval");
  const CmdResult tr = run("train --data synth:20:160x120:5 --out " + (dir / "run").string() +
                           " --seed 77 --target 48x24 --epochs-frozen 1 --epochs-finetune 1" +
                           " --batch-size 4");
  REQUIRE(tr.code == 0);

  const CmdResult ev = run("eval --checkpoint " + (dir / "run" / "checkpoint.bin").string() +
                           " --data synth:20:160x120:5 --out " + (dir / "ev").string() +
                           " --top-k 2");
  REQUIRE(ev.code == 0);
  CHECK(ev.out.find("macro PRAUC") != std::string::npos);
  CHECK(ev.out.find("highest-loss held-out samples:") != std::string::npos);
  CHECK(count_lines_with(ev.out, "index ") <= 2);
  CHECK(fs::exists(dir / "ev" / "per_class_prauc.csv"));
  CHECK(fs::exists(dir / "ev" / "confusion.csv"));
  CHECK(fs::exists(dir / "ev" / "highest_loss.csv"));
  // the training and evaluation views of the same run must agree
  CHECK(slurp(dir / "run" / "per_class_prauc.csv") == slurp(dir / "ev" / "per_class_prauc.csv"));

  const CmdResult bad = run("eval --checkpoint " + (dir / "nope.bin").string() + " --data " +
                            "synth:20 --out " + (dir / "ev2").string());
  CHECK(bad.code == 1);
  CHECK_FALSE(bad.err.empty());
}

TEST_CASE("grid streams progress and fails loudly when runs fail") {
  const auto dir = fresh_dir("greyfeed_cli_grid");
  const std::string plan = " --epochs-frozen 1 --epochs-finetune 0 --batch-size 4";
  const CmdResult ok = run("grid --data synth:20:160x120:5 --out " + (dir / "g").string() +
                           " --seed 9 --channels B-H-N --preproc inc_d,no_tfm --loss bce" +
                           " --resolution 48x24:aspect,32x32:squish --repeats 1" + plan);
  REQUIRE(ok.code == 0);
  CHECK(count_lines_with(ok.out, "prauc ") == 4);
  CHECK(ok.out.find("[4/4]") != std::string::npos);
  CHECK(fs::exists(dir / "g" / "summary.csv"));
  const std::string summary = slurp(dir / "g" / "summary.csv");
  CHECK(summary.find("delta") != std::string::npos);

  const CmdResult bad = run("grid --data " + (dir / "missing" / "manifest.csv").string() +
                            " --out " + (dir / "gbad").string() +
                            " --channels B-H-N --preproc inc_d --loss bce" +
                            " --resolution 48x24:aspect --repeats 1" + plan);
  CHECK(bad.code == 1);
  CHECK(count_lines_with(bad.out, "FAILED") == 1);
  CHECK(bad.err.find("failed") != std::string::npos);
  CHECK(fs::exists(dir / "gbad" / "failures.csv"));
  CHECK(count_lines_with(slurp(dir / "gbad" / "failures.csv"), "manifest") == 1);
}
