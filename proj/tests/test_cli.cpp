#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hprn/data.hpp"
#include "hprn/metrics.hpp"
#include "hprn/viz.hpp"
#include "test_util.hpp"

namespace hprn {
namespace {

namespace fs = std::filesystem;

const fs::path kWork = fs::temp_directory_path() / "hprn_test_cli";

struct Result {
  int code = -1;
  std::string output;
};

Result run(const std::string& args) {
  const auto log = kWork / "last_output.txt";
  const std::string cmd = std::string(HPRN_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream s;
  s << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, s.str()};
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Small corpus and a two-step tiny training run shared by the tests.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    const auto gen = run("--seed 4 gen-data --out " + (kWork / "data").string() + " --train 2 --val 1 --test 1 --size 20");
    ASSERT_EQ(gen.code, 0) << gen.output;
    std::ofstream(kWork / "tiny.cfg") << "channels = 8\nn_mrb = 1\ntcrm_r = 4\nssrm_groups = 4\nssrm_scales = 2, 3\n"
                                         "epochs = 1\nsteps_per_epoch = 2\nbatch_size = 1\npatch_size = 16\n";
    const auto train = run("--config " + (kWork / "tiny.cfg").string() + " train --data " + (kWork / "data").string() +
                           " --out " + (kWork / "run").string());
    ASSERT_EQ(train.code, 0) << train.output;
  }
  static std::string data(const std::string& f) { return (kWork / "data" / f).string(); }
  static std::string work(const std::string& f) { return (kWork / f).string(); }
};

TEST_F(Cli, HelpListsEverySubcommand) {
  const auto r = run("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* sub : {"gen-data", "train", "infer", "eval", "metrics", "slic", "grad-check", "heatmap", "curves"}) {
    EXPECT_NE(r.output.find(sub), std::string::npos) << sub;
  }
}

TEST_F(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("eval --pred x").code, 2);
  EXPECT_EQ(run("--set no_such_key=1 metrics a b").code, 2);
  EXPECT_EQ(run("metrics " + work("none.hsc") + " " + data("scene_000.hsc")).code, 2);
}

TEST_F(Cli, TrainWritesRunDirectory) {
  for (const char* f : {"config.txt", "train_log.csv", "best.ckpt", "last.ckpt", "train_state.bin"}) {
    EXPECT_TRUE(fs::exists(kWork / "run" / f)) << f;
  }
  EXPECT_EQ(lines(read_text(kWork / "run" / "train_log.csv")).size(), 3u);
}

TEST_F(Cli, InferIsDeterministicAndHas31Bands) {
  const std::string base = "--config " + work("run/config.txt") + " infer --rgb " + data("scene_003.png") +
                           " --checkpoint " + work("run/best.ckpt");
  ASSERT_EQ(run(base + " --out " + work("a.hsc")).code, 0);
  ASSERT_EQ(run(base + " --out " + work("b.hsc")).code, 0);
  EXPECT_EQ(read_text(kWork / "a.hsc"), read_text(kWork / "b.hsc"));
  const auto cube = read_cube(kWork / "a.hsc");
  EXPECT_EQ(cube.bands, 31u);
  EXPECT_EQ(cube.height, 20u);
}

TEST_F(Cli, InferFailuresExitWithTwoAndExplain) {
  const auto missing = run("--config " + work("run/config.txt") + " infer --rgb " + data("scene_003.png") +
                           " --checkpoint " + work("absent.ckpt") + " --out " + work("c.hsc"));
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.output.find("absent.ckpt"), std::string::npos) << missing.output;
  const auto mismatch = run("--config " + work("run/config.txt") + " --set channels=12 infer --rgb " +
                            data("scene_003.png") + " --checkpoint " + work("run/best.ckpt") + " --out " + work("c.hsc"));
  EXPECT_EQ(mismatch.code, 2);
  EXPECT_NE(mismatch.output.find("head.weight"), std::string::npos) << mismatch.output;
}

TEST_F(Cli, EvalOfGroundTruthAgainstItself) {
  ASSERT_EQ(run("eval --pred " + data("scene_003.hsc") + " --gt " + data("scene_003.hsc") + " --out-prefix " +
                work("self")).code,
            0);
  const auto summary = lines(read_text(kWork / "self_summary.csv"));
  ASSERT_FALSE(summary.empty());
  EXPECT_EQ(summary[0], "metric,value");
  auto value = [&](const std::string& key) {
    for (const auto& l : summary)
      if (l.rfind(key + ",", 0) == 0) return l.substr(key.size() + 1);
    return std::string("missing");
  };
  EXPECT_EQ(std::stod(value("mrae")), 0.0);
  EXPECT_EQ(std::stod(value("sam_degrees")), 0.0);
  EXPECT_EQ(std::stod(value("assim")), 1.0);
  EXPECT_EQ(std::stod(value("psnr_db")), 100.0);
  EXPECT_EQ(value("psnr_capped"), "1");
  const auto bands = lines(read_text(kWork / "self_bands.csv"));
  EXPECT_EQ(bands[0], "band,wavelength_nm,mrae,rmse,psnr_db,ssim");
  EXPECT_EQ(bands.size(), 32u);
}

TEST_F(Cli, EvalMatchesLibraryMetrics) {
  ASSERT_EQ(run("eval --pred " + work("a.hsc") + " --gt " + data("scene_003.hsc") + " --out-prefix " + work("ev")).code, 0);
  const auto report = evaluate(read_cube(kWork / "a.hsc"), read_cube(kWork / "data" / "scene_003.hsc"));
  const auto summary = read_text(kWork / "ev_summary.csv");
  std::ostringstream expected;
  write_summary_csv(expected, report);
  EXPECT_EQ(summary, expected.str());
  const auto m = run("metrics " + work("a.hsc") + " " + data("scene_003.hsc"));
  EXPECT_EQ(m.code, 0);
  EXPECT_NE(m.output.find(expected.str()), std::string::npos);
}

TEST_F(Cli, SlicWritesLabelsAndCounts) {
  ASSERT_EQ(run("slic --rgb " + data("scene_000.png") + " --scales 4,8 --out-dir " + work("slic")).code, 0);
  for (int k : {4, 8}) {
    EXPECT_TRUE(fs::exists(kWork / "slic" / ("labels_" + std::to_string(k) + ".png")));
    const auto rows = lines(read_text(kWork / "slic" / ("labels_" + std::to_string(k) + ".csv")));
    ASSERT_GE(rows.size(), 2u);
    EXPECT_EQ(rows[0], "label,pixels");
    std::size_t total = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) total += std::stoul(rows[i].substr(rows[i].find(',') + 1));
    EXPECT_EQ(total, 400u);
  }
  EXPECT_EQ(run("slic --rgb " + data("scene_000.png") + " --scales 401").code, 1);
}

TEST_F(Cli, HeatmapOfIdenticalCubesIsUniformMinimumColor) {
  ASSERT_EQ(run("heatmap --pred " + data("scene_001.hsc") + " --gt " + data("scene_001.hsc") + " --out " + work("hm.png")).code, 0);
  const auto img = read_png_rgb(kWork / "hm.png");
  const auto lo = error_colormap(0.0);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < 400; ++p) EXPECT_EQ(img.values[c * 400 + p], lo[c] / 255.0f);
  EXPECT_EQ(run("heatmap --pred " + data("scene_001.hsc") + " --gt " + data("scene_001.hsc") + " --mode 3 --out " +
                work("hm3.png")).code,
            0);
  EXPECT_EQ(run("heatmap --pred " + data("scene_001.hsc") + " --gt " + data("scene_001.hsc") + " --mode red --out " +
                work("hm4.png")).code,
            2);
}

TEST_F(Cli, CurvesListCubeValuesExactly) {
  ASSERT_EQ(run("curves --cube " + data("scene_002.hsc") + " --point 3,4 --point 19,0 --out-prefix " + work("cv")).code, 0);
  const auto cube = read_cube(kWork / "data" / "scene_002.hsc");
  const auto rows = lines(read_text(kWork / "cv.csv"));
  ASSERT_EQ(rows.size(), 1u + 2u * 31u);
  EXPECT_EQ(rows[0], "point,y,x,band,wavelength_nm,value");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream in(rows[i]);
    std::string f[6];
    for (auto& s : f) std::getline(in, s, ',');
    const std::size_t y = std::stoul(f[1]), x = std::stoul(f[2]), b = std::stoul(f[3]);
    EXPECT_EQ(std::stof(f[5]), cube.at(b, y, x));
  }
  EXPECT_TRUE(fs::exists(kWork / "cv.png"));
  EXPECT_EQ(run("curves --cube " + data("scene_002.hsc") + " --point 20,0 --out-prefix " + work("cv2")).code, 2);
}

TEST_F(Cli, GradCheckTinyPasses) {
  const auto r = run("--seed 1 grad-check --tiny --n-params 20");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("PASS"), std::string::npos) << r.output;
  EXPECT_EQ(run("--seed 1 grad-check --tiny --n-params 5 --tol 1e-30").code, 1);
}

TEST_F(Cli, ResumeContinuesFromState) {
  std::ofstream(kWork / "longer.cfg") << read_text(kWork / "run" / "config.txt") << "epochs = 2\n";
  const auto r = run("--config " + work("longer.cfg") + " train --data " + (kWork / "data").string() + " --out " +
                     work("run") + " --resume");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("resumed at step 2"), std::string::npos) << r.output;
  EXPECT_EQ(lines(read_text(kWork / "run" / "train_log.csv")).size(), 5u);
}

// ---------------------------------------------------------------------------

TEST(Viz, ColormapEndpointsAndClamping) {
  EXPECT_EQ(error_colormap(0.0), (std::array<std::uint8_t, 3>{0, 0, 255}));
  EXPECT_EQ(error_colormap(1.0), (std::array<std::uint8_t, 3>{255, 0, 0}));
  EXPECT_EQ(error_colormap(-3.0), error_colormap(0.0));
  EXPECT_EQ(error_colormap(7.0), error_colormap(1.0));
  const auto img = render_heatmap({0.0, 0.05, 0.1, 0.2}, 0.0, 0.1);
  ASSERT_EQ(img.size(), 12u);
  EXPECT_EQ(img[0], 0);
  EXPECT_EQ(img[2], 255);
  EXPECT_EQ(img[6], 255);
  EXPECT_EQ(img[9], 255);
}

TEST(Viz, BandErrorMapAndCurvePlot) {
  SpectralCube g(2, 1, 2), p(2, 1, 2);
  g.values = {0.5f, 0.25f, 1.0f, 0.5f};
  p.values = {0.25f, 0.25f, 1.0f, 1.0f};
  EXPECT_EQ(band_error_map(p, g, 0), (std::vector<double>{0.5, 0.0}));
  EXPECT_EQ(band_error_map(p, g, 1), (std::vector<double>{0.0, 1.0}));
  EXPECT_THROW(band_error_map(p, g, 2), ContractError);
  const auto plot = render_curves(g, {{0, 1}}, 80, 100);
  EXPECT_EQ(plot.size(), 3u * 80u * 100u);
  EXPECT_NE(std::count(plot.begin(), plot.end(), 255), static_cast<long>(plot.size()));
  EXPECT_THROW(render_curves(g, {{1, 0}}, 80, 100), ContractError);
}

}  // namespace
}  // namespace hprn
