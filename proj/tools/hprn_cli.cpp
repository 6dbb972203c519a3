#include <cblas.h>

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hprn/config.hpp"
#include "hprn/data.hpp"
#include "hprn/metrics.hpp"
#include "hprn/model.hpp"
#include "hprn/slic.hpp"
#include "hprn/trainer.hpp"
#include "hprn/viz.hpp"

namespace {

using namespace hprn;
namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kContract = 1, kUsage = 2 };

/// Bad flag combinations or values caught after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> precision;

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) apply_config(cfg, read_config_file(config_path));
    for (const auto& o : overrides) {
      auto [k, v] = parse_assignment(o);
      apply_config(cfg, k, v);
    }
    if (seed) cfg.train.seed = *seed;
    if (precision) apply_config(cfg, "precision", std::to_string(*precision));
    cfg.validate();
    return cfg;
  }
};

PixelCoord parse_point(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw UsageError("point must be y,x, got '" + s + "'");
  try {
    return {std::stoul(s.substr(0, comma)), std::stoul(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw UsageError("point must be y,x, got '" + s + "'");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::string out;
  std::size_t n_train = 24, n_val = 4, n_test = 4;
  std::size_t size = 128;
  double noise = 0.0;
};

int cmd_gen_data(const Common& common, const GenDataArgs& a) {
  const auto cfg = common.resolve();
  CorpusSpec spec;
  spec.n_train = a.n_train;
  spec.n_val = a.n_val;
  spec.n_test = a.n_test;
  spec.size = a.size;
  spec.bands = cfg.model.bands;
  spec.seed = cfg.train.seed;
  if (a.noise > 0.0) spec.noise = NoiseSpec{a.noise, true, 0};
  const auto corpus = make_corpus(spec);
  write_corpus(a.out, corpus);
  std::cout << "wrote " << corpus.scenes.size() << " scenes (" << spec.size << "x" << spec.size << "x" << spec.bands
            << ") to " << a.out << "\n";
  return kOk;
}

struct TrainArgs {
  std::string data;
  std::string out;
  bool resume = false;
};

template <typename T>
int train_impl(const RunConfig& cfg, const TrainArgs& a) {
  const auto split = read_split(a.data);
  auto train = load_scenes(a.data, split.train);
  auto val = load_scenes(a.data, split.val);
  auto model = make_hprn<T>(cfg.model, cfg.train.seed);
  Trainer<T> trainer(model, cfg.train, std::move(train), std::move(val));
  fs::create_directories(a.out);
  if (a.resume) {
    trainer.load_state(fs::path(a.out) / "train_state.bin");
    std::cout << "resumed at step " << trainer.steps_done() << "\n";
  }
  write_text(fs::path(a.out) / "config.txt", format_config(cfg));
  trainer.run(a.out, &std::cout);
  std::cout << "best val MRAE " << trainer.best_val_mrae() << " at step " << trainer.best_step() << "\n";
  return kOk;
}

int cmd_train(const Common& common, const TrainArgs& a) {
  const auto cfg = common.resolve();
  return cfg.precision == 64 ? train_impl<double>(cfg, a) : train_impl<float>(cfg, a);
}

struct InferArgs {
  std::string rgb, checkpoint, out;
};

template <typename T>
int infer_impl(const RunConfig& cfg, const InferArgs& a) {
  auto model = make_hprn<T>(cfg.model, cfg.train.seed);
  auto params = model.parameters();
  load_checkpoint(a.checkpoint, params);
  const auto rgb = read_png_rgb(a.rgb);
  const auto cube = hprn_forward(model, rgb);
  write_cube(a.out, cube);
  std::cout << "wrote " << cube.bands << "x" << cube.height << "x" << cube.width << " cube to " << a.out << "\n";
  return kOk;
}

int cmd_infer(const Common& common, const InferArgs& a) {
  const auto cfg = common.resolve();
  if (!fs::exists(a.checkpoint)) throw IoError("checkpoint not found: " + a.checkpoint);
  return cfg.precision == 64 ? infer_impl<double>(cfg, a) : infer_impl<float>(cfg, a);
}

struct EvalArgs {
  std::string pred, gt, out_prefix;
};

int cmd_eval(const Common& common, const EvalArgs& a) {
  const auto cfg = common.resolve();
  const auto report = evaluate(read_cube(a.pred), read_cube(a.gt), 1.0, cfg.psnr_formula);
  std::ofstream summary(a.out_prefix + "_summary.csv");
  std::ofstream bands(a.out_prefix + "_bands.csv");
  if (!summary || !bands) throw IoError("cannot write report files with prefix " + a.out_prefix);
  write_summary_csv(summary, report);
  write_band_csv(bands, report);
  std::cout << format_report(report);
  return kOk;
}

int cmd_metrics(const Common& common, const EvalArgs& a) {
  const auto cfg = common.resolve();
  const auto report = evaluate(read_cube(a.pred), read_cube(a.gt), 1.0, cfg.psnr_formula);
  write_summary_csv(std::cout, report);
  std::cout << "\n" << format_report(report);
  return kOk;
}

struct SlicArgs {
  std::string rgb, out_dir;
  std::vector<std::size_t> scales;
};

int cmd_slic(const Common& common, const SlicArgs& a) {
  const auto cfg = common.resolve();
  const auto rgb = read_png_rgb(a.rgb);
  const auto scales = a.scales.empty() ? cfg.model.ssrm_scales : a.scales;
  const auto maps = multiscale_labels(rgb, scales, cfg.model.slic_params());
  if (!a.out_dir.empty()) fs::create_directories(a.out_dir);
  for (const auto& m : maps) {
    std::cout << "scale " << m.scale << ": " << m.n_labels << " labels\n";
    if (!a.out_dir.empty()) {
      const auto stem = fs::path(a.out_dir) / ("labels_" + std::to_string(m.scale));
      write_label_png(stem.string() + ".png", m);
      std::vector<std::size_t> counts(m.n_labels, 0);
      for (auto l : m.labels) ++counts[static_cast<std::size_t>(l)];
      std::ostringstream csv;
      csv << "label,pixels\n";
      for (std::size_t l = 0; l < counts.size(); ++l) csv << l << "," << counts[l] << "\n";
      write_text(stem.string() + ".csv", csv.str());
    }
  }
  return kOk;
}

struct GradCheckArgs {
  std::size_t n_params = 100;
  std::size_t patch = 16;
  double tol = 1e-4;
  double step = 1e-2;
  bool tiny = false;
};

int cmd_grad_check(const Common& common, const GradCheckArgs& a) {
  auto cfg = common.resolve();
  if (a.tiny) {
    cfg.model.channels = 8;
    cfg.model.n_mrb = 1;
    cfg.model.ssrm_groups = 4;
    cfg.model.ssrm_scales = {2};
  }
  GradCheckOptions opt;
  opt.n_params = a.n_params;
  opt.patch = a.patch;
  opt.tol = a.tol;
  opt.step = a.step;
  opt.seed = cfg.train.seed;
  const auto report = grad_check(cfg.model, opt);
  std::cout << format_grad_report(report);
  return report.passed ? kOk : kContract;
}

struct HeatmapArgs {
  std::string pred, gt, out;
  std::string mode = "mrae";
  double vmax = 0.1;
};

int cmd_heatmap(const Common& common, const HeatmapArgs& a) {
  common.resolve();
  const auto pred = read_cube(a.pred);
  const auto gt = read_cube(a.gt);
  std::vector<double> values;
  if (a.mode == "mrae") {
    values = mrae_map(pred, gt);
  } else {
    std::size_t band = 0;
    try {
      std::size_t used = 0;
      band = std::stoul(a.mode, &used);
      if (used != a.mode.size()) throw std::invalid_argument(a.mode);
    } catch (const std::exception&) {
      throw UsageError("--mode must be 'mrae' or a band index, got '" + a.mode + "'");
    }
    values = band_error_map(pred, gt, band);
  }
  write_png_rgb8(a.out, gt.height, gt.width, render_heatmap(values, 0.0, a.vmax));
  std::cout << "wrote " << a.out << "\n";
  return kOk;
}

struct CurvesArgs {
  std::string cube, out_prefix;
  std::vector<std::string> points;
};

int cmd_curves(const Common& common, const CurvesArgs& a) {
  common.resolve();
  const auto cube = read_cube(a.cube);
  std::vector<PixelCoord> points;
  for (const auto& p : a.points) points.push_back(parse_point(p));
  for (const auto& p : points) {
    if (p.y >= cube.height || p.x >= cube.width) {
      throw UsageError("point " + std::to_string(p.y) + "," + std::to_string(p.x) + " outside " +
                       std::to_string(cube.height) + "x" + std::to_string(cube.width) + " cube");
    }
  }
  std::ofstream csv(a.out_prefix + ".csv");
  if (!csv) throw IoError("cannot write " + a.out_prefix + ".csv");
  write_curves_csv(csv, cube, points);
  constexpr std::size_t kPlotH = 320, kPlotW = 480;
  write_png_rgb8(a.out_prefix + ".png", kPlotH, kPlotW, render_curves(cube, points, kPlotH, kPlotW));
  std::cout << "wrote " << a.out_prefix << ".csv and " << a.out_prefix << ".png\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  openblas_set_num_threads(1);
  CLI::App app{"HPRN spectral super-resolution: RGB to 31-band hyperspectral reconstruction"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  Common common;
  app.add_option("--config", common.config_path, "Flat key=value config file")->check(CLI::ExistingFile);
  app.add_option("--set", common.overrides, "Config override key=value (repeatable)");
  app.add_option("--seed", common.seed, "Seed for every random choice");
  app.add_option("--precision", common.precision, "Floating point width: 32 or 64");

  GenDataArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate a synthetic RGB-HSI corpus with splits");
  c_gen->add_option("--out", gen.out, "Output directory")->required();
  c_gen->add_option("--train", gen.n_train, "Training scenes");
  c_gen->add_option("--val", gen.n_val, "Validation scenes");
  c_gen->add_option("--test", gen.n_test, "Test scenes");
  c_gen->add_option("--size", gen.size, "Scene side length in pixels");
  c_gen->add_option("--noise", gen.noise, "RGB noise sigma; > 0 also quantizes to 8 bits");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train HPRN on a corpus directory");
  c_train->add_option("--data", train.data, "Corpus directory from gen-data")->required();
  c_train->add_option("--out", train.out, "Run directory (log, checkpoints, state)")->required();
  c_train->add_flag("--resume", train.resume, "Continue from <out>/train_state.bin");

  InferArgs infer;
  auto* c_infer = app.add_subcommand("infer", "Reconstruct a cube from an RGB PNG");
  c_infer->add_option("--rgb", infer.rgb, "Input RGB PNG")->required();
  c_infer->add_option("--checkpoint", infer.checkpoint, "HPRNCKPT file")->required();
  c_infer->add_option("--out", infer.out, "Output HSC1 cube")->required();

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Write <prefix>_summary.csv and <prefix>_bands.csv");
  c_eval->add_option("--pred", eval.pred, "Predicted cube")->required();
  c_eval->add_option("--gt", eval.gt, "Ground-truth cube")->required();
  c_eval->add_option("--out-prefix", eval.out_prefix, "Report path prefix")->required();

  EvalArgs met;
  auto* c_met = app.add_subcommand("metrics", "Print the metrics of two cubes as CSV and text");
  c_met->add_option("pred", met.pred, "Predicted cube")->required();
  c_met->add_option("gt", met.gt, "Ground-truth cube")->required();

  SlicArgs slic;
  auto* c_slic = app.add_subcommand("slic", "Segment an RGB PNG at one or more scales");
  c_slic->add_option("--rgb", slic.rgb, "Input RGB PNG")->required();
  c_slic->add_option("--scales", slic.scales, "Requested superpixel counts (default: config ssrm_scales)")
      ->delimiter(',');
  c_slic->add_option("--out-dir", slic.out_dir, "Write 16-bit labels_<K>.png and per-label counts labels_<K>.csv");

  GradCheckArgs gc;
  auto* c_gc = app.add_subcommand("grad-check", "Compare backprop with central differences (64-bit)");
  c_gc->add_option("--n-params", gc.n_params, "Parameters to sample");
  c_gc->add_option("--patch", gc.patch, "Patch side length");
  c_gc->add_option("--tol", gc.tol, "Maximum relative error");
  c_gc->add_option("--step", gc.step, "Finite-difference step");
  c_gc->add_flag("--tiny", gc.tiny, "Use C=8, M=1, G=4, scales=2");

  HeatmapArgs hm;
  auto* c_hm = app.add_subcommand("heatmap", "Per-pixel relative-error map as PNG");
  c_hm->add_option("--pred", hm.pred, "Predicted cube")->required();
  c_hm->add_option("--gt", hm.gt, "Ground-truth cube")->required();
  c_hm->add_option("--out", hm.out, "Output PNG")->required();
  c_hm->add_option("--mode", hm.mode, "'mrae' or a band index");
  c_hm->add_option("--vmax", hm.vmax, "Error mapped to the top of the colormap");

  CurvesArgs cv;
  auto* c_cv = app.add_subcommand("curves", "Spectra at chosen pixels as CSV and PNG");
  c_cv->add_option("--cube", cv.cube, "Input cube")->required();
  c_cv->add_option("--point", cv.points, "Pixel y,x (repeatable)")->required();
  c_cv->add_option("--out-prefix", cv.out_prefix, "Writes <prefix>.csv and <prefix>.png")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*c_gen) return cmd_gen_data(common, gen);
    if (*c_train) return cmd_train(common, train);
    if (*c_infer) return cmd_infer(common, infer);
    if (*c_eval) return cmd_eval(common, eval);
    if (*c_met) return cmd_metrics(common, met);
    if (*c_slic) return cmd_slic(common, slic);
    if (*c_gc) return cmd_grad_check(common, gc);
    if (*c_hm) return cmd_heatmap(common, hm);
    if (*c_cv) return cmd_curves(common, cv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kUsage;
  } catch (const DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return kContract;
  } catch (const ContractError& e) {
    std::cerr << "contract error: " << e.what() << "\n";
    return kContract;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kContract;
  }
  return kUsage;
}
