// Acceptance run: one PASS/FAIL line per criterion. Arguments select a
// subset of criteria by number; no arguments runs all nine. Criteria 5 and
// 6 share one training run, cached in the working directory.

#include <cblas.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hprn/checkpoint.hpp"
#include "hprn/data.hpp"
#include "hprn/loss.hpp"
#include "hprn/metrics.hpp"
#include "hprn/model.hpp"
#include "hprn/slic.hpp"
#include "hprn/trainer.hpp"
#include "oracles.hpp"

namespace hprn {
namespace {

namespace fs = std::filesystem;
using oracle::Vec;
using Rng = std::mt19937_64;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::vector<std::string> failed;

  void check(bool ok, const std::string& what) {
    if (ok) return;
    pass = false;
    failed.push_back(what);
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Tensor<double> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(shape.numel());
  for (auto& x : v) x = d(rng);
  return Tensor<double>::from(shape, std::move(v));
}

SpectralCube random_cube(std::size_t b, std::size_t h, std::size_t w, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  SpectralCube c(b, h, w);
  for (auto& v : c.values) v = static_cast<float>(d(rng));
  return c;
}

void randomize(Tensor<double>& t, Rng& rng, double lo = -0.5, double hi = 0.5) {
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.mutable_data()) v = d(rng);
}

Vec values(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

double max_abs_diff(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

LabelMap random_labels(std::size_t h, std::size_t w, std::size_t k, Rng& rng) {
  LabelMap m;
  m.height = h;
  m.width = w;
  m.labels.resize(h * w);
  for (auto& v : m.labels) v = static_cast<std::int32_t>(rng() % k);
  m.labels[0] = static_cast<std::int32_t>(k - 1);
  m.n_labels = k;
  m.scale = k;
  return m;
}

SSRMScale<double> random_scale(std::size_t b, bool shared, Rng& rng) {
  HPRNConfig cfg;
  cfg.bands = b;
  cfg.ssrm_scales = {1};
  cfg.ssrm_shared_embedding = shared;
  auto s = make_ssrm<double>(cfg, rng).scales[0];
  randomize(s.phi.bias, rng);
  randomize(s.chi.bias, rng);
  if (s.psi) randomize(s.psi->bias, rng);
  return s;
}

// Labels form single 4-connected regions with dense ids.
bool connected_and_dense(const LabelMap& m) {
  const std::size_t n = m.height * m.width;
  std::vector<bool> seen(n, false), label_seen(m.n_labels, false);
  for (std::size_t start = 0; start < n; ++start) {
    if (seen[start]) continue;
    const auto l = m.labels[start];
    if (l < 0 || static_cast<std::size_t>(l) >= m.n_labels || label_seen[static_cast<std::size_t>(l)]) return false;
    label_seen[static_cast<std::size_t>(l)] = true;
    std::queue<std::size_t> q;
    q.push(start);
    seen[start] = true;
    while (!q.empty()) {
      const std::size_t p = q.front();
      q.pop();
      const std::size_t y = p / m.width, x = p % m.width;
      const std::size_t nb[4] = {y > 0 ? p - m.width : n, y + 1 < m.height ? p + m.width : n,
                                 x > 0 ? p - 1 : n, x + 1 < m.width ? p + 1 : n};
      for (std::size_t q2 : nb)
        if (q2 < n && !seen[q2] && m.labels[q2] == l) {
          seen[q2] = true;
          q.push(q2);
        }
    }
  }
  return std::all_of(label_seen.begin(), label_seen.end(), [](bool b) { return b; });
}

// ---------------------------------------------------------------------------

void gradient_integrity(Outcome& o) {
  HPRNConfig cfg;
  cfg.channels = 8;
  cfg.n_mrb = 1;
  cfg.ssrm_groups = 4;
  cfg.ssrm_scales = {2};
  GradCheckOptions opt;
  opt.n_params = 120;
  opt.patch = 16;
  const auto t0 = Clock::now();
  const auto r = grad_check(cfg, opt);
  const double secs = seconds_since(t0);
  o.detail << r.samples.size() << " params, max rel error " << r.max_rel_error << " at " << r.worst_name << "["
           << r.worst_index << "], " << secs << " s";
  o.check(r.samples.size() >= 100, "fewer than 100 sampled parameters");
  o.check(r.max_rel_error < 1e-4, "max rel error " + std::to_string(r.max_rel_error));
  o.check(secs < 300.0, "runtime " + std::to_string(secs) + " s");
}

void oracle_equivalence(Outcome& o) {
  Rng rng(2);
  double worst_tcrm = 0.0, worst_ssrm = 0.0, worst_cov = 0.0, worst_metric = 0.0;
  for (std::size_t c = 2; c <= 8; ++c) {
    HPRNConfig cfg;
    cfg.tcrm_r = 2;
    auto t = make_tcrm<double>(c, cfg, rng);
    randomize(t.down.bias, rng);
    randomize(t.up.bias, rng);
    randomize(t.act.slope, rng, 0.0, 0.5);
    const auto x = random_tensor(Shape{c, 8, 8}, rng, -2, 2);
    Tensor<double> gate;
    const auto y = tcrm_forward(x, t, &gate);
    Vec og;
    worst_tcrm = std::max(worst_tcrm, max_abs_diff(values(y), oracle::tcrm(values(x), c, 8, 8, t, &og)));
    worst_tcrm = std::max(worst_tcrm, max_abs_diff(values(gate), og));

    for (bool shared : {true, false}) {
      auto s = random_scale(c, shared, rng);
      const std::size_t h = 3 + rng() % 6, w = 3 + rng() % 6, g = 1 + rng() % 7;
      const auto labels = random_labels(h, w, 1 + rng() % 5, rng);
      const auto coarse = random_tensor(Shape{c, h, w}, rng);
      Tensor<double> z;
      const auto out = ssrm_single_scale(coarse, s, make_semantic_order(labels, g), &z);
      Vec oz;
      worst_ssrm = std::max(worst_ssrm, max_abs_diff(values(out), oracle::ssrm_scale(values(coarse), c, h, w, s, labels, g, &oz)));
      worst_ssrm = std::max(worst_ssrm, max_abs_diff(values(z), oz));
    }

    const std::size_t n = 4 + rng() % 30;
    const auto cube = random_tensor(Shape{c, 1, n}, rng, 0, 1);
    worst_cov = std::max(worst_cov, max_abs_diff(values(covariance_matrix(cube)), oracle::covariance(values(cube), c, n)));

    const auto gt = random_cube(c, 12, 13, rng, 0.05, 1.0);
    const auto pred = random_cube(c, 12, 13, rng, 0.0, 1.0);
    const double diffs[] = {mrae(pred, gt) - oracle::mrae(pred, gt), rmse(pred, gt) - oracle::rmse(pred, gt),
                            psnr(pred, gt).db - oracle::psnr(pred, gt), sam(pred, gt).degrees - oracle::sam(pred, gt),
                            assim(pred, gt) - oracle::assim(pred, gt)};
    for (double d : diffs) worst_metric = std::max(worst_metric, std::abs(d));
  }
  const auto hand = covariance_matrix(Tensor<double>::from(Shape{2, 1, 2}, {0.0, 1.0, 0.0, 1.0}));
  const bool hand_ok = values(hand) == Vec{0.25, 0.25, 0.25, 0.25};
  o.detail << "max diff tcrm " << worst_tcrm << ", ssrm " << worst_ssrm << ", covariance " << worst_cov << ", metrics "
           << worst_metric << ", hand covariance " << (hand_ok ? "exact" : "wrong");
  o.check(worst_tcrm <= 1e-10, "tcrm");
  o.check(worst_ssrm <= 1e-10, "ssrm");
  o.check(worst_cov <= 1e-10, "covariance");
  o.check(worst_metric <= 1e-10, "metrics");
  o.check(hand_ok, "hand covariance");
}

void structural_invariants(Outcome& o) {
  constexpr int kTrials = 1000;
  Rng rng(3);
  double worst_row = 0.0, worst_perm = 0.0, gate_lo = 1.0, gate_hi = 0.0;
  int fold_fail = 0, with_fill = 0, without_fill = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t b = 2 + rng() % 4, h = 2 + rng() % 7, w = 2 + rng() % 7;
    const std::size_t g = 1 + rng() % std::min<std::size_t>(h * w, 9);
    const auto labels = random_labels(h, w, 1 + rng() % 5, rng);
    const auto order = make_semantic_order(labels, g);
    const auto coarse = random_tensor(Shape{b, h, w}, rng, -2, 2);

    // Relation rows.
    auto s = random_scale(b, trial % 2 == 0, rng);
    Tensor<double> z;
    const auto out = ssrm_single_scale(coarse, s, order, &z);
    const std::size_t n = order.group_size;
    for (std::size_t r = 0; r < g * n; ++r) {
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += z[r * n + j];
      worst_row = std::max(worst_row, std::abs(total - 1.0));
    }

    // Round trip; alternate between even and mirror-filled splits.
    const std::size_t g_fold = trial % 2 == 0 ? g : std::max<std::size_t>(1, (h * w) / (1 + rng() % 4));
    const auto fold_order = make_semantic_order(labels, g_fold);
    (fold_order.mirror_fill() > 0 ? with_fill : without_fill)++;
    if (values(fold_reorder(unfold_order(coarse, fold_order), fold_order)) != values(coarse)) ++fold_fail;

    // Label-id permutation.
    auto relabeled = labels;
    std::vector<std::int32_t> perm(labels.n_labels);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (auto& l : relabeled.labels) l = perm[static_cast<std::size_t>(l)];
    worst_perm = std::max(worst_perm, max_abs_diff(values(ssrm_single_scale(coarse, s, make_semantic_order(relabeled, g))),
                                                   values(out)));

    // Channel gate.
    HPRNConfig cfg;
    cfg.tcrm_r = 2;
    const std::size_t c = 2 + rng() % 7;
    auto t = make_tcrm<double>(c, cfg, rng);
    randomize(t.up.bias, rng, -3, 3);
    Tensor<double> gate;
    tcrm_forward(random_tensor(Shape{c, 4 + rng() % 5, 4 + rng() % 5}, rng, -5, 5), t, &gate);
    for (double v : values(gate)) {
      gate_lo = std::min(gate_lo, v);
      gate_hi = std::max(gate_hi, v);
    }
  }
  o.detail << kTrials << " trials: row sum dev " << worst_row << ", fold mismatches " << fold_fail << " ("
           << with_fill << " mirror-filled, " << without_fill << " even), relabel diff " << worst_perm << ", gate in ["
           << gate_lo << ", " << gate_hi << "]";
  o.check(worst_row <= 1e-6, "row sums");
  o.check(fold_fail == 0 && with_fill > 0 && without_fill > 0, "unfold/fold round trip");
  o.check(worst_perm <= 1e-6, "relabel invariance");
  o.check(gate_lo > 0.0 && gate_hi < 1.0, "gate range");
}

void loss_semantics(Outcome& o) {
  Rng rng(4);
  bool self_zero = true, tau0_exact = true;
  double shift_random = 0.0;
  bool shift_dyadic = true;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t b = 2 + rng() % 7, h = 2 + rng() % 6, w = 2 + rng() % 6;
    const auto gt = random_tensor(Shape{b, h, w}, rng, 0, 1);
    const auto pred = random_tensor(Shape{b, h, w}, rng, 0, 1);
    self_zero = self_zero && total_loss(gt, gt, 2.0).total.item() == 0.0;

    auto shifted = values(gt);
    for (std::size_t band = 0; band < b; ++band)
      for (std::size_t p = 0; p < h * w; ++p) shifted[band * h * w + p] += 0.1 * static_cast<double>(band + 1);
    shift_random = std::max(shift_random, sopc_loss(Tensor<double>::from(Shape{b, h, w}, shifted), gt).item());

    // Dyadic values over 16 pixels keep every sum exact.
    std::vector<double> d(b * 16), ds(b * 16);
    for (std::size_t band = 0; band < b; ++band)
      for (std::size_t p = 0; p < 16; ++p) {
        d[band * 16 + p] = static_cast<double>(rng() % 1024) / 1024.0;
        ds[band * 16 + p] = d[band * 16 + p] + 0.25 * static_cast<double>(band);
      }
    shift_dyadic = shift_dyadic && sopc_loss(Tensor<double>::from(Shape{b, 4, 4}, ds),
                                             Tensor<double>::from(Shape{b, 4, 4}, d)).item() == 0.0;

    const auto zero_tau = total_loss(pred, gt, 0.0);
    tau0_exact = tau0_exact && zero_tau.total.item() == l1_loss(pred, gt).item() &&
                 zero_tau.total.item() == zero_tau.l1.item();
  }
  o.detail << "total(gt,gt) " << (self_zero ? "0" : "nonzero") << ", shifted sopc " << (shift_dyadic ? "0" : "nonzero")
           << " (dyadic) and " << shift_random << " (random), tau=0 total " << (tau0_exact ? "equals" : "differs from")
           << " l1";
  o.check(self_zero, "total(gt,gt) != 0");
  o.check(shift_dyadic && shift_random <= 1e-12, "shifted sopc != 0");
  o.check(tau0_exact, "tau=0 total != l1");
}

// Overfit corpus shared by the smoke and ablation runs.
struct OverfitRun {
  double seconds = 0.0;
  double first_loss = 0.0;
  double last_loss = 0.0;
  double train_mrae = 0.0;
  double val_mrae = 0.0;
  double val_sam = 0.0;
};

OverfitRun overfit(double tau) {
  openblas_set_num_threads(1);
  CorpusSpec cs;
  cs.n_train = 4;
  cs.n_val = 2;
  cs.n_test = 0;
  cs.size = 64;
  cs.seed = 7;
  const auto corpus = make_corpus(cs);
  const std::vector<ScenePair> train(corpus.scenes.begin(), corpus.scenes.begin() + 4);
  const std::vector<ScenePair> val(corpus.scenes.begin() + 4, corpus.scenes.end());
  HPRNConfig mc;
  mc.channels = 32;
  mc.n_mrb = 2;
  mc.sopc_tau = tau;
  auto model = make_hprn<float>(mc, 1);
  TrainConfig tc;
  tc.batch_size = 1;
  tc.steps_per_epoch = 20;
  tc.epochs = 100;
  Trainer<float> t(model, tc, train, val);
  OverfitRun r;
  const auto t0 = Clock::now();
  const auto rows = t.run();
  r.seconds = seconds_since(t0);
  r.first_loss = rows.front().total;
  r.last_loss = rows.back().total;
  r.train_mrae = t.evaluate_mrae(train);
  r.val_mrae = t.evaluate_mrae(val);
  for (const auto& s : val) r.val_sam += sam(t.predict(s.rgb, s.id), s.cube).degrees / static_cast<double>(val.size());
  return r;
}

// The sopc run feeds two criteria that ctest starts as separate processes.
// Its result is kept next to the binary, keyed by the binary's write time.
const fs::path kOverfitCache = "acceptance_overfit_tau2.txt";

std::string binary_stamp() {
  return std::to_string(fs::last_write_time("/proc/self/exe").time_since_epoch().count());
}

std::optional<OverfitRun> load_cached_run() {
  std::ifstream in(kOverfitCache);
  std::string stamp;
  OverfitRun r;
  if (!(in >> stamp >> r.seconds >> r.first_loss >> r.last_loss >> r.train_mrae >> r.val_mrae >> r.val_sam)) return {};
  if (stamp != binary_stamp()) return {};
  return r;
}

const OverfitRun& sopc_run() {
  static std::optional<OverfitRun> run;
  if (!run) run = load_cached_run();
  if (!run) {
    run = overfit(2.0);
    std::ofstream out(kOverfitCache);
    out << std::setprecision(17) << binary_stamp() << ' ' << run->seconds << ' ' << run->first_loss << ' '
        << run->last_loss << ' ' << run->train_mrae << ' ' << run->val_mrae << ' ' << run->val_sam << '\n';
  }
  return *run;
}

void overfit_smoke(Outcome& o) {
  const auto& r = sopc_run();
  o.detail << "train MRAE " << r.train_mrae << ", val MRAE " << r.val_mrae << ", loss " << r.first_loss << " -> "
           << r.last_loss << " (" << 100.0 * r.last_loss / r.first_loss << "%), " << r.seconds << " s";
  o.check(r.train_mrae < 0.05, "train MRAE");
  o.check(r.val_mrae < 0.25, "val MRAE");
  o.check(r.last_loss < 0.2 * r.first_loss, "loss trend");
  o.check(r.seconds < 1800.0, "runtime");
}

void ablation_direction(Outcome& o) {
  const auto& with = sopc_run();
  const auto without = overfit(0.0);
  o.detail << "val SAM tau=2 " << with.val_sam << " deg, tau=0 " << without.val_sam << " deg (ratio "
           << with.val_sam / without.val_sam << ")";
  o.check(with.val_sam <= 1.1 * without.val_sam, "sopc run worse than 110% of baseline");
}

void metric_monotonicity(Outcome& o) {
  CorpusSpec cs;
  cs.n_train = 1;
  cs.n_val = 0;
  cs.n_test = 0;
  cs.size = 64;
  cs.seed = 9;
  const auto gt = make_corpus(cs).scenes[0].cube;
  std::vector<MetricsReport> ladder;
  for (double sigma : {0.0, 0.01, 0.1}) {
    auto pred = gt;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (auto& v : pred.values) v = static_cast<float>(v + sigma * noise(rng));
    ladder.push_back(evaluate(pred, gt));
  }
  for (const auto& r : ladder)
    o.detail << "[mrae " << r.mrae << " rmse " << r.rmse << " sam " << r.sam_degrees << " psnr " << r.psnr_db
             << " assim " << r.assim << "] ";
  for (std::size_t i = 1; i < ladder.size(); ++i) {
    const auto &a = ladder[i - 1], &b = ladder[i];
    o.check(a.mrae < b.mrae && a.rmse < b.rmse && a.sam_degrees < b.sam_degrees, "error metrics not increasing");
    o.check(a.psnr_db > b.psnr_db && a.assim > b.assim, "quality metrics not decreasing");
  }
}

HPRNConfig small_model() {
  HPRNConfig c;
  c.bands = 6;
  c.channels = 8;
  c.n_mrb = 1;
  c.tcrm_r = 4;
  c.ssrm_groups = 4;
  c.ssrm_scales = {2};
  return c;
}

template <typename T>
std::vector<T> flat(const ParameterList<T>& params) {
  std::vector<T> out;
  for (const auto& p : params) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

void determinism_and_persistence(Outcome& o) {
  const auto dir = fs::temp_directory_path() / "hprn_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  CorpusSpec cs;
  cs.n_train = 2;
  cs.n_val = 1;
  cs.n_test = 0;
  cs.size = 16;
  cs.bands = 6;
  cs.seed = 3;
  const auto corpus = make_corpus(cs);
  const std::vector<ScenePair> train{corpus.scenes[0], corpus.scenes[1]}, val{corpus.scenes[2]};
  TrainConfig tc;
  tc.epochs = 2;
  tc.steps_per_epoch = 3;
  tc.batch_size = 2;
  tc.patch_size = 12;
  tc.lr0 = 1e-3;
  tc.seed = 5;

  auto log_of = [&](std::uint64_t model_seed) {
    auto model = make_hprn<double>(small_model(), model_seed);
    Trainer<double> t(model, tc, train, val);
    std::ostringstream log;
    write_log_header(log);
    for (const auto& row : t.run()) write_log_row(log, row);
    return log.str();
  };
  const bool logs_equal = log_of(8) == log_of(8);

  auto fmodel = make_hprn<float>(small_model(), 9);
  const auto fparams = fmodel.parameters();
  save_checkpoint(dir / "a.ckpt", fparams);
  auto other = make_hprn<float>(small_model(), 10);
  auto oparams = other.parameters();
  load_checkpoint(dir / "a.ckpt", oparams);
  const auto fa = flat(fparams), fb = flat(oparams);
  const bool ckpt_exact = fa.size() == fb.size() && std::memcmp(fa.data(), fb.data(), fa.size() * sizeof(float)) == 0;

  const auto cube = corpus.scenes[0].cube;
  write_cube(dir / "c.hsc", cube);
  const auto back = read_cube(dir / "c.hsc");
  const bool cube_exact = back.bands == cube.bands && back.height == cube.height && back.width == cube.width &&
                          std::memcmp(back.values.data(), cube.values.data(), cube.values.size() * sizeof(float)) == 0;

  auto model_a = make_hprn<double>(small_model(), 3);
  Trainer<double> a(model_a, tc, train, val);
  for (int i = 0; i < 4; ++i) a.step();
  a.save_state(dir / "state.bin");
  const auto row_a = a.step();
  auto model_b = make_hprn<double>(small_model(), 77);
  Trainer<double> b(model_b, tc, train, val);
  b.load_state(dir / "state.bin");
  const auto row_b = b.step();
  const auto pa = flat(a.parameters()), pb = flat(b.parameters());
  const bool resume_exact = row_a.total == row_b.total &&
                            std::memcmp(pa.data(), pb.data(), pa.size() * sizeof(double)) == 0 && pa.size() == pb.size();
  fs::remove_all(dir);

  o.detail << "logs " << (logs_equal ? "identical" : "differ") << ", checkpoint " << (ckpt_exact ? "exact" : "differs")
           << ", cube " << (cube_exact ? "exact" : "differs") << ", resumed step " << (resume_exact ? "exact" : "differs");
  o.check(logs_equal, "logs differ");
  o.check(ckpt_exact, "checkpoint round trip");
  o.check(cube_exact, "cube round trip");
  o.check(resume_exact, "resume");
}

void slic_sanity(Outcome& o) {
  CorpusSpec cs;
  cs.n_train = 4;
  cs.n_val = 2;
  cs.n_test = 2;
  cs.size = 64;
  cs.seed = 7;
  const auto corpus = make_corpus(cs);
  const std::vector<std::size_t> scales{8, 12, 16, 20};
  std::size_t maps = 0;
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& scene : corpus.scenes) {
    const auto a = multiscale_labels(scene.rgb, scales);
    const auto b = multiscale_labels(scene.rgb, scales);
    for (std::size_t i = 0; i < scales.size(); ++i, ++maps) {
      const std::size_t k = scales[i], n = a[i].n_labels;
      lo = std::min(lo, n);
      hi = std::max(hi, n);
      o.check(connected_and_dense(a[i]), scene.id + " K=" + std::to_string(k) + " not connected");
      o.check(2 * n >= k && n <= 2 * k, scene.id + " K=" + std::to_string(k) + " has " + std::to_string(n) + " labels");
      o.check(a[i].labels == b[i].labels, scene.id + " K=" + std::to_string(k) + " not deterministic");
    }
  }
  if (o.pass) o.detail << maps << " maps connected and repeatable, label counts in [" << lo << ", " << hi << "]";
}

struct Criterion {
  int id;
  const char* name;
  std::function<void(Outcome&)> run;
};

}  // namespace
}  // namespace hprn

int main(int argc, char** argv) {
  using namespace hprn;
  openblas_set_num_threads(1);
  const std::vector<Criterion> all{
      {1, "gradient integrity", gradient_integrity},
      {2, "oracle equivalence", oracle_equivalence},
      {3, "structural invariants", structural_invariants},
      {4, "loss semantics", loss_semantics},
      {7, "metric monotonicity", metric_monotonicity},
      {8, "determinism and persistence", determinism_and_persistence},
      {9, "SLIC sanity", slic_sanity},
      {5, "overfit smoke test", overfit_smoke},
      {6, "ablation direction", ablation_direction},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome o;
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    failures += o.pass ? 0 : 1;
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (o.pass ? "PASS" : "FAIL") << "  "
              << o.detail.str();
    for (std::size_t i = 0; i < o.failed.size(); ++i) std::cout << (i ? "; " : " | failed: ") << o.failed[i];
    std::cout << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
