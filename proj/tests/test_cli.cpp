#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "abstractnet/image_io.hpp"
#include "support/oracles.hpp"

using namespace abstractnet;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(ABSTRACTNET_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  RunResult r;
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("approximate a.png b.png --no-such-flag").code, 2);
  EXPECT_EQ(run("approximate a.png b.png --alpha 0").code, 2);
  EXPECT_EQ(run("zeroconv train --steps abc").code, 2);
}

TEST(Cli, ApproximateIsDeterministic) {
  oracle::TempDir dir("cli-approx");
  save_png(oracle::synthetic_image(40, 30, 1), dir / "in.png");
  const std::string common = " --shapes 8 --candidates 30 --steps 20 --seed 42";
  const RunResult a = run("approximate " + q(dir / "in.png") + " " + q(dir / "a.png") + common +
                          " --svg " + q(dir / "a.svg") + " --trace " + q(dir / "a.csv"));
  const RunResult b = run("approximate " + q(dir / "in.png") + " " + q(dir / "b.png") + common + " --jobs 2");
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(a.out.rfind("final_rmse=", 0), 0u);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(read_text(dir / "a.png"), read_text(dir / "b.png"));
  EXPECT_NE(read_text(dir / "a.svg").find("<polygon"), std::string::npos);
  EXPECT_EQ(read_text(dir / "a.csv").rfind("shape_index,score\n", 0), 0u);
}

TEST(Cli, ZeroShapesWritesFlatAverage) {
  oracle::TempDir dir("cli-flat");
  const Raster img = oracle::synthetic_image(20, 20, 2);
  save_png(img, dir / "in.png");
  ASSERT_EQ(run("approximate " + q(dir / "in.png") + " " + q(dir / "out.png") + " --shapes 0").code, 0);
  EXPECT_EQ(load_image(dir / "out.png"), Raster(20, 20, average_color(img)));
}

TEST(Cli, MissingInputExitsOne) {
  oracle::TempDir dir("cli-missing");
  EXPECT_EQ(run("approximate " + q(dir / "nope.png") + " " + q(dir / "out.png")).code, 1);
  EXPECT_FALSE(fs::exists(dir / "out.png"));
}

TEST(Cli, DatasetBuildValidateStats) {
  oracle::TempDir in("cli-ds-in"), out("cli-ds-out");
  for (int i = 0; i < 3; ++i) {
    const std::string stem = "pic" + std::to_string(i);
    save_png(oracle::synthetic_image(72, 64, i), in / (stem + ".png"));
    std::ofstream(in / (stem + ".txt")) << "a picture " << i;
  }
  const std::string fast = " --resize 64 --shapes 4 --candidates 10 --steps 5";
  const RunResult b = run("dataset build --input " + q(in.path()) + " --output " + q(out.path()) + fast);
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(b.out.rfind("processed=3 skipped=0", 0), 0u);
  std::ifstream manifest(out / "prompt.jsonl");
  int lines = 0;
  for (std::string l; std::getline(manifest, l);) ++lines;
  EXPECT_EQ(lines, 3);

  const RunResult v = run("dataset validate " + q(out.path()));
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find("entries=3 failed=0 orphans=0"), std::string::npos);

  const RunResult s = run("dataset stats " + q(out.path()));
  EXPECT_EQ(s.code, 0);
  EXPECT_NE(s.out.find("count=3\n"), std::string::npos);
  EXPECT_NE(s.out.find("dimensions=64x64:3"), std::string::npos);

  fs::remove(out / "target/pic1.png");
  const RunResult bad = run("dataset validate " + q(out.path()));
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("target/pic1.png"), std::string::npos);
}

TEST(Cli, DatasetBuildStubModeAndMissingInput) {
  oracle::TempDir in("cli-stub-in"), out("cli-stub-out");
  save_png(oracle::synthetic_image(64, 64, 4), in / "lake.png");
  EXPECT_EQ(run("dataset build --input " + q(in.path()) + " --output " + q(out.path()) +
                " --caption-mode stub --resize 64 --shapes 2 --candidates 5 --steps 2")
                .code,
            0);
  EXPECT_NE(read_text(out / "prompt.jsonl").find("\"prompt\": \"an image of lake\""), std::string::npos);
  EXPECT_EQ(run("dataset build --input " + q(in / "none") + " --output " + q(out.path())).code, 1);
  EXPECT_EQ(run("dataset build --input " + q(in.path()) + " --output " + q(out.path()) + " --caption-mode x").code, 2);
}

TEST(Cli, ZeroconvVerifyPasses) {
  const RunResult r = run("zeroconv verify --seed 0");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.find("=fail"), std::string::npos);
  EXPECT_NE(r.out.find("init_identity=pass"), std::string::npos);
}

TEST(Cli, ZeroconvTrainWritesLogAndCheckpoint) {
  oracle::TempDir dir("cli-train");
  const RunResult r = run("zeroconv train --steps 500 --lr 0.05 --seed 7 --log " + q(dir / "log.csv") +
                          " --checkpoint " + q(dir / "m.ckpt"));
  ASSERT_EQ(r.code, 0);
  std::ifstream log(dir / "log.csv");
  std::string header;
  std::getline(log, header);
  EXPECT_EQ(header, "step,loss,condition_fidelity");
  int rows = 0;
  for (std::string l; std::getline(log, l);) ++rows;
  EXPECT_EQ(rows, 500);

  const auto value = [&](const std::string& key) {
    const auto pos = r.out.find(key + "=");
    return pos == std::string::npos ? -1.0 : std::stod(r.out.substr(pos + key.size() + 1));
  };
  EXPECT_LT(value("final_loss"), 0.1 * value("step0_loss"));

  oracle::TempDir ctl("cli-ctl");
  save_png(Raster(8, 8, Color{255, 255, 255, 255}), ctl / "white.png");
  const RunResult inf = run("zeroconv infer --checkpoint " + q(dir / "m.ckpt") + " --control " + q(ctl / "white.png"));
  EXPECT_EQ(inf.code, 0);
  EXPECT_NE(inf.out.find("output_mean="), std::string::npos);
}

TEST(Cli, ZeroconvTrainZeroLr) {
  const RunResult r = run("zeroconv train --steps 5 --lr 0 --seed 3");
  ASSERT_EQ(r.code, 0);
  const auto value = [&](const std::string& key) {
    const auto pos = r.out.find(key + "=");
    return r.out.substr(pos + key.size() + 1, r.out.find('\n', pos) - pos - key.size() - 1);
  };
  EXPECT_EQ(value("final_loss"), value("step0_loss"));
}
