#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "onemax/binary_io.hpp"
#include "onemax/checkpoint.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path work_dir() {
  static const fs::path d = [] {
    auto p = fs::temp_directory_path() / "onemax_test_cli";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

Result run(const std::string& args, const std::string& env = "") {
  const auto out = work_dir() / "stdout.txt";
  const auto err = work_dir() / "stderr.txt";
  const std::string cmd = env + " " + std::string(ONEMAX_CLI_PATH) + " " + args + " >" + out.string() + " 2>" +
                          err.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = onemax::read_file_bytes(out);
  r.err = onemax::read_file_bytes(err);
  return r;
}

// One small corpus shared by every test.
const fs::path& corpus() {
  static const fs::path c = [] {
    const auto p = work_dir() / "corpus";
    const auto r = run("synth --classes 3 --per-class 8 --max-dur 0.5 --noise-dur 1 --seed 4 --out " + p.string());
    EXPECT_EQ(r.code, 0) << r.err;
    return p;
  }();
  return c;
}

std::string manifest() { return (corpus() / "manifest.tsv").string(); }

const std::string kSmall = "--widths 1,3 --filters 4 --epochs 2 --batch-size 8 --lr 1e-3";

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("synth").code, 2);
  EXPECT_EQ(run("train --manifest " + manifest() + " --regime sideways").code, 2);
  const auto r = run("train --manifest " + manifest() + " --widths 1,x");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("'x'"), std::string::npos);
  EXPECT_EQ(run("train --manifest " + manifest() + " --dropout 1.5").code, 2);
  EXPECT_EQ(run("--jobs 0 gradcheck").code, 2);
}

TEST(Cli, HelpListsDefaults) {
  const auto r = run("train --help");
  EXPECT_EQ(r.code, 0);
  for (const char* s : {"--lr", "0.0001", "--dropout", "0.5", "--lambda", "--batch-size", "100", "--paper-defaults",
                        "1,3,5,7,9", "--regime", "multi", "--energy"})
    EXPECT_NE(r.out.find(s), std::string::npos) << s;
}

TEST(Cli, SynthReportsSplit) {
  const auto r = run("synth --classes 2 --per-class 8 --max-dur 0.5 --noise-dur 1 --out " +
                     (work_dir() / "tiny").string());
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("per_class_split\t4/1/3"), std::string::npos);
  EXPECT_TRUE(fs::exists(work_dir() / "tiny/manifest.tsv"));
  EXPECT_EQ(fs::directory_iterator(work_dir() / "tiny/noise") != fs::directory_iterator(), true);
}

TEST(Cli, ExtractThenCacheHits) {
  const std::string cache = "--cache " + (work_dir() / "xcache").string();
  auto r = run("--seed 4 extract --manifest " + manifest() + " " + cache);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("written\t96"), std::string::npos) << r.out;
  r = run("--seed 4 extract --manifest " + manifest() + " " + cache);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("cached\t96"), std::string::npos);
  EXPECT_NE(r.err.find("already in cache"), std::string::npos);
}

TEST(Cli, ExtractListsCorruptFilesAndContinues) {
  const auto d = work_dir() / "broken";
  fs::remove_all(d);
  fs::copy(corpus(), d, fs::copy_options::recursive);
  fs::remove_all(d / "sif_cache");
  onemax::write_file_bytes(d / "events/c00_tone_02.wav", "RIFF");
  const auto r = run("extract --manifest " + (d / "manifest.tsv").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("c00_tone_02.wav"), std::string::npos);
  EXPECT_NE(r.out.find("failed\t4"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("written\t92"), std::string::npos);
}

TEST(Cli, TrainWritesArtifactsAndEvalAgrees) {
  const auto out = work_dir() / "run";
  const auto r = run("--seed 2 train --manifest " + manifest() + " " + kSmall + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"best.1max", "last.state", "report.txt", "epochs.jsonl", "config.txt"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto jsonl = onemax::read_file_bytes(out / "epochs.jsonl");
  EXPECT_EQ(std::count(jsonl.begin(), jsonl.end(), '\n'), 2);
  EXPECT_EQ(jsonl.rfind("{\"epoch\":1,\"train_loss\":", 0), 0u);
  const auto sidecar = onemax::read_file_bytes(out / "config.txt");
  EXPECT_NE(sidecar.find("widths=1,3\n"), std::string::npos);
  EXPECT_NE(sidecar.find("labels=c00_tone,c01_upchirp,c02_downchirp"), std::string::npos);

  const auto e = run("--seed 2 eval --manifest " + manifest() + " --ckpt " + (out / "best.1max").string());
  ASSERT_EQ(e.code, 0) << e.err;
  const auto table = r.out.substr(r.out.find("clean\t20dB"));
  EXPECT_EQ(e.out, table);
  const auto tsv = run("--seed 2 eval --tsv --manifest " + manifest() + " --ckpt " + (out / "best.1max").string());
  EXPECT_EQ(tsv.out.rfind("clean\tsnr20\tsnr10\tsnr0\tmean\n", 0), 0u);
}

TEST(Cli, TrainIsDeterministicAndResumable) {
  const auto a = work_dir() / "det_a", b = work_dir() / "det_b", c = work_dir() / "det_c";
  const std::string base = "--seed 5 train --manifest " + manifest() + " --widths 1,3 --filters 4 --batch-size 8 ";
  ASSERT_EQ(run(base + "--epochs 3 --out " + a.string()).code, 0);
  ASSERT_EQ(run(base + "--epochs 3 --jobs 3 --out " + b.string()).code, 0);
  EXPECT_EQ(onemax::read_file_bytes(a / "best.1max"), onemax::read_file_bytes(b / "best.1max"));
  EXPECT_EQ(onemax::read_file_bytes(a / "report.txt"), onemax::read_file_bytes(b / "report.txt"));
  ASSERT_EQ(run(base + "--epochs 1 --out " + c.string()).code, 0);
  ASSERT_EQ(run(base + "--epochs 3 --resume " + (c / "last.state").string() + " --out " + c.string()).code, 0);
  EXPECT_EQ(onemax::read_file_bytes(a / "last.state"), onemax::read_file_bytes(c / "last.state"));
  EXPECT_EQ(onemax::read_file_bytes(a / "epochs.jsonl"), onemax::read_file_bytes(c / "epochs.jsonl"));
}

TEST(Cli, EvalFailures) {
  EXPECT_EQ(run("eval --manifest " + manifest() + " --ckpt /nonexistent/x.1max").code, 1);
  const auto bad = work_dir() / "bad.1max";
  onemax::write_file_bytes(bad, "1MAXjunk");
  EXPECT_EQ(run("eval --manifest " + manifest() + " --ckpt " + bad.string()).code, 1);
  EXPECT_EQ(run("eval --manifest /nonexistent/manifest.tsv --ckpt " + bad.string()).code, 1);
}

TEST(Cli, ConfigFileWithFlagOverride) {
  const auto cfg = work_dir() / "train.cfg";
  onemax::write_file_bytes(cfg, "# desk run\nlr = 0.003\ndropout=0.25\nenergy=true\nseed=11\n");
  auto r = run("--config " + cfg.string() + " train --print-config");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("learning_rate=0.003\n"), std::string::npos);
  EXPECT_NE(r.out.find("dropout=0.25\n"), std::string::npos);
  EXPECT_NE(r.out.find("energy=true\n"), std::string::npos);
  EXPECT_NE(r.out.find("seed=11\n"), std::string::npos);
  r = run("--config " + cfg.string() + " --seed 12 train --print-config --lr 0.5");
  EXPECT_NE(r.out.find("learning_rate=0.5\n"), std::string::npos);
  EXPECT_NE(r.out.find("seed=12\n"), std::string::npos);
  EXPECT_NE(r.out.find("dropout=0.25\n"), std::string::npos);
  onemax::write_file_bytes(cfg, "learning_rat=0.1\n");
  r = run("--config " + cfg.string() + " train --print-config");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("learning_rat"), std::string::npos);
  EXPECT_EQ(run("--config /nonexistent.cfg train --print-config").code, 2);
}

TEST(Cli, PaperDefaultsScaleTheModel) {
  const auto r = run("train --paper-defaults --print-config");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("widths=1,3,5,7,9,11,13,15,17,19,21,23,25\n"), std::string::npos);
  EXPECT_NE(r.out.find("filters_per_width=100\n"), std::string::npos);
  EXPECT_NE(r.out.find("epochs=500\n"), std::string::npos);
  EXPECT_NE(run("train --regime mismatched --print-config").out.find("epochs=1000\n"), std::string::npos);
}

TEST(Cli, CacheEnvironmentOverride) {
  const auto cache = work_dir() / "envcache";
  const auto r = run("extract --manifest " + manifest(), "ONEMAX_CACHE=" + cache.string());
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find(cache.string()), std::string::npos);
  EXPECT_TRUE(fs::is_directory(cache));
}

TEST(Cli, SweepEmitsTsv) {
  const auto r = run("sweep --manifest " + manifest() +
                     " --sweep-widths 1,3 --filters 4 --epochs 1 --batch-size 8 --out " +
                     (work_dir() / "sweep.tsv").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("width\tcondition\taccuracy\n1\tclean\t", 0), 0u) << r.out;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 9);
  EXPECT_EQ(onemax::read_file_bytes(work_dir() / "sweep.tsv"), r.out);
}

TEST(Cli, GradcheckPassesAndNegativeControlFails) {
  auto r = run("gradcheck --trials 3");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  r = run("gradcheck --trials 1 --break-gradient");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}
