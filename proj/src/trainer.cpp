#include "hprn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "hprn/metrics.hpp"

namespace hprn {

namespace {

constexpr char kStateMagic[8] = {'H', 'P', 'R', 'N', 'S', 'T', 'A', 'T'};
constexpr std::uint64_t kBatchStream = 1'000'000;

SpectralCube clipped(SpectralCube cube) {
  for (auto& v : cube.values) v = std::clamp(v, 0.0f, 1.0f);
  return cube;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ContractError("lr0 must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ContractError("beta1 must lie in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ContractError("beta2 must lie in [0,1)");
  if (!(adam_eps > 0.0)) throw ContractError("adam_eps must be > 0");
  if (!(decay_power > 0.0)) throw ContractError("decay_power must be > 0");
  if (epochs == 0 || steps_per_epoch == 0 || batch_size == 0 || patch_size == 0) {
    throw ContractError("epochs, steps_per_epoch, batch_size and patch_size must be positive");
  }
}

double poly_lr(std::size_t t, std::size_t total, double lr0, double power) {
  if (total == 0 || t >= total) return 0.0;
  return lr0 * std::pow(1.0 - static_cast<double>(t) / static_cast<double>(total), power);
}

template <typename T>
AdamState<T> make_adam_state(const ParameterList<T>& params) {
  AdamState<T> s;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor.numel(), T(0));
    s.v.emplace_back(p.tensor.numel(), T(0));
  }
  return s;
}

template <typename T>
void adam_step(ParameterList<T>& params, AdamState<T>& state, double lr, const TrainConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: state holds " + std::to_string(state.m.size()) + " buffers for " +
                         std::to_string(params.size()) + " parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].tensor;
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != p.numel() || v.size() != p.numel()) {
      throw DimensionError("adam_step: moment size mismatch for " + params[i].name);
    }
    auto data = p.mutable_data();
    const auto grad = p.grad();
    const bool has = grad.size() == data.size();
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double g = has ? static_cast<double>(grad[k]) : 0.0;
      const double mk = cfg.beta1 * static_cast<double>(m[k]) + (1.0 - cfg.beta1) * g;
      const double vk = cfg.beta2 * static_cast<double>(v[k]) + (1.0 - cfg.beta2) * g * g;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double update = lr * (mk / c1) / (std::sqrt(vk / c2) + cfg.adam_eps);
      data[k] = static_cast<T>(static_cast<double>(data[k]) - update);
    }
  }
}

void write_log_header(std::ostream& out) { out << "step,epoch,lr,l1,sopc,total,val_mrae\n"; }

void write_log_row(std::ostream& out, const LogRow& r) {
  out << r.step << "," << r.epoch << "," << fmt(r.lr) << "," << fmt(r.l1) << "," << fmt(r.sopc) << ","
      << fmt(r.total) << ",";
  if (r.val_mrae) out << fmt(*r.val_mrae);
  out << "\n";
}

// ---------------------------------------------------------------------------

template <typename T>
Trainer<T>::Trainer(HPRN<T>& model, TrainConfig cfg, std::vector<ScenePair> train, std::vector<ScenePair> val)
    : model_(model), cfg_(cfg), train_(std::move(train)), val_(std::move(val)) {
  cfg_.validate();
  model_.config.validate();
  if (train_.empty()) throw ContractError("trainer: empty training split");
  for (const auto& s : train_) {
    if (s.cube.bands != model_.config.bands) {
      throw DimensionError("trainer: scene " + s.id + " has " + std::to_string(s.cube.bands) +
                           " bands, model expects " + std::to_string(model_.config.bands));
    }
    if (cfg_.patch_size > std::min(s.cube.height, s.cube.width)) {
      throw ContractError("trainer: patch size " + std::to_string(cfg_.patch_size) + " exceeds scene " + s.id);
    }
  }
  params_ = model_.parameters();
  adam_ = make_adam_state(params_);
}

template <typename T>
const std::vector<SemanticOrder>& Trainer<T>::orders_for(const RgbImage& patch, const CacheKey& key) {
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  std::vector<SemanticOrder> orders;
  if (model_.config.use_ssrm) {
    orders = model_.orders_for(multiscale_labels(patch, model_.config.ssrm_scales, model_.config.slic_params()));
  }
  return cache_.emplace(key, std::move(orders)).first->second;
}

template <typename T>
LogRow Trainer<T>::step() {
  const std::size_t t = adam_.step;
  const double lr = poly_lr(t, cfg_.total_steps(), cfg_.lr0, cfg_.decay_power);
  Rng rng(derive_seed(cfg_.seed, kBatchStream + t));
  std::uniform_int_distribution<std::size_t> pick_scene(0, train_.size() - 1);
  const std::size_t p = cfg_.patch_size;

  std::vector<Tensor<T>> preds, gts;
  for (std::size_t b = 0; b < cfg_.batch_size; ++b) {
    const auto& scene = train_[pick_scene(rng)];
    std::uniform_int_distribution<std::size_t> py(0, scene.cube.height - p);
    std::uniform_int_distribution<std::size_t> px(0, scene.cube.width - p);
    const std::size_t y = py(rng), x = px(rng);
    const auto rgb = crop(scene.rgb, y, x, p, p);
    const auto& orders = orders_for(rgb, {scene.id, y, x, p});
    preds.push_back(model_.forward(to_tensor<T>(rgb), orders));
    gts.push_back(to_tensor<T>(crop(scene.cube, y, x, p, p)));
  }
  auto loss = total_loss(preds, gts, model_.config.sopc_tau);

  LogRow row;
  row.lr = lr;
  row.l1 = static_cast<double>(loss.l1.item());
  row.sopc = static_cast<double>(loss.sopc.item());
  row.total = static_cast<double>(loss.total.item());
  if (!std::isfinite(row.total) || !std::isfinite(row.l1) || !std::isfinite(row.sopc)) {
    throw TrainingDiverged("non-finite loss at step " + std::to_string(t + 1) + ": lr=" + fmt(lr) +
                           " l1=" + fmt(row.l1) + " sopc=" + fmt(row.sopc) + " total=" + fmt(row.total));
  }
  for (auto& prm : params_) prm.tensor.zero_grad();
  loss.total.backward();
  adam_step(params_, adam_, lr, cfg_);
  row.step = adam_.step;
  row.epoch = (row.step - 1) / cfg_.steps_per_epoch + 1;
  return row;
}

template <typename T>
SpectralCube Trainer<T>::predict(const RgbImage& rgb, const std::string& tag) {
  NoGradGuard no_grad;
  const auto& orders = orders_for(rgb, {tag, 0, 0, rgb.height});
  return clipped(to_cube(model_.forward(to_tensor<T>(rgb), orders)));
}

template <typename T>
double Trainer<T>::evaluate_mrae(const std::vector<ScenePair>& scenes, std::size_t crop_size) {
  if (scenes.empty()) throw ContractError("evaluate_mrae: no scenes");
  double acc = 0.0;
  for (const auto& s : scenes) {
    const std::size_t side = std::min(s.cube.height, s.cube.width);
    if (crop_size > 0 && crop_size < side) {
      const std::size_t y = (s.cube.height - crop_size) / 2, x = (s.cube.width - crop_size) / 2;
      const auto gt = crop(s.cube, y, x, crop_size, crop_size);
      acc += mrae(predict(crop(s.rgb, y, x, crop_size, crop_size), "eval:" + s.id + ":" + std::to_string(crop_size)), gt);
    } else {
      acc += mrae(predict(s.rgb, "eval:" + s.id), s.cube);
    }
  }
  return acc / static_cast<double>(scenes.size());
}

template <typename T>
std::vector<LogRow> Trainer<T>::run(const std::filesystem::path& out_dir, std::ostream* progress) {
  std::ofstream log;
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    const bool resume = adam_.step > 0 && std::filesystem::exists(out_dir / "train_log.csv");
    log.open(out_dir / "train_log.csv", resume ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot write " + (out_dir / "train_log.csv").string());
    if (!resume) write_log_header(log);
  }
  std::vector<LogRow> rows;
  while (adam_.step < cfg_.total_steps()) {
    LogRow row;
    try {
      row = step();
    } catch (const TrainingDiverged& e) {
      if (!out_dir.empty()) {
        std::ofstream diag(out_dir / "diagnostics.txt");
        diag << e.what() << "\n";
      }
      throw;
    }
    if (row.step % cfg_.steps_per_epoch == 0) {
      if (!val_.empty()) {
        row.val_mrae = validate();
        if (*row.val_mrae < best_val_) {
          best_val_ = *row.val_mrae;
          best_step_ = row.step;
          if (!out_dir.empty()) save_checkpoint(out_dir / "best.ckpt", params_);
        }
      }
      if (!out_dir.empty()) {
        save_checkpoint(out_dir / "last.ckpt", params_);
        save_state(out_dir / "train_state.bin");
      }
    }
    if (log.is_open()) {
      write_log_row(log, row);
      log.flush();
    }
    if (progress && (row.val_mrae || row.step == 1)) {
      *progress << "step " << row.step << " epoch " << row.epoch << " lr " << row.lr << " loss " << row.total;
      if (row.val_mrae) *progress << " val_mrae " << *row.val_mrae;
      *progress << "\n";
    }
    rows.push_back(row);
  }
  return rows;
}

template <typename T>
void Trainer<T>::save_state(const std::filesystem::path& path) const {
  ByteWriter w;
  w.bytes(kStateMagic, sizeof(kStateMagic));
  w.u32(kTrainerStateVersion);
  w.u8(sizeof(T));
  w.u64(adam_.step);
  w.f64(best_val_);
  w.u64(best_step_);
  w.u32(static_cast<std::uint32_t>(params_.size()));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& p = params_[i];
    w.u16(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.u8(static_cast<std::uint8_t>(p.tensor.rank()));
    for (std::size_t d = 0; d < p.tensor.rank(); ++d) w.u32(static_cast<std::uint32_t>(p.tensor.dim(d)));
    w.bytes(p.tensor.data().data(), p.tensor.numel() * sizeof(T));
    w.bytes(adam_.m[i].data(), adam_.m[i].size() * sizeof(T));
    w.bytes(adam_.v[i].data(), adam_.v[i].size() * sizeof(T));
  }
  w.save(path);
}

template <typename T>
void Trainer<T>::load_state(const std::filesystem::path& path) {
  auto r = ByteReader::load(path);
  try {
    char magic[8];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kStateMagic, sizeof(magic)) != 0) {
      throw CheckpointError(path.string() + ": bad trainer-state magic at offset 0");
    }
    if (const auto version = r.u32(); version != kTrainerStateVersion) {
      throw CheckpointError(path.string() + ": unsupported trainer-state version " + std::to_string(version));
    }
    if (const auto width = r.u8(); width != sizeof(T)) {
      throw CheckpointError(path.string() + ": state holds " + std::to_string(8 * width) +
                            "-bit values, trainer runs in " + std::to_string(8 * sizeof(T)) + "-bit");
    }
    AdamState<T> adam = make_adam_state(params_);
    adam.step = r.u64();
    const double best_val = r.f64();
    const std::uint64_t best_step = r.u64();
    const std::uint32_t count = r.u32();
    if (count != params_.size()) {
      throw CheckpointError(path.string() + ": state has " + std::to_string(count) + " parameters, model has " +
                            std::to_string(params_.size()));
    }
    std::vector<std::vector<T>> values(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto& p = params_[i];
      std::string name(r.u16(), '\0');
      r.bytes(name.data(), name.size());
      if (name != p.name) throw CheckpointError(path.string() + ": expected parameter " + p.name + ", found " + name);
      const std::size_t rank = r.u8();
      bool same = rank == p.tensor.rank();
      for (std::size_t d = 0; d < rank; ++d) {
        const auto dim = r.u32();
        same = same && dim == p.tensor.dim(d);
      }
      if (!same) throw CheckpointError(path.string() + ": shape mismatch for parameter " + p.name);
      values[i].resize(p.tensor.numel());
      r.bytes(values[i].data(), values[i].size() * sizeof(T));
      r.bytes(adam.m[i].data(), adam.m[i].size() * sizeof(T));
      r.bytes(adam.v[i].data(), adam.v[i].size() * sizeof(T));
    }
    if (r.remaining() != 0) throw CheckpointError(path.string() + ": trailing bytes in trainer state");
    for (std::size_t i = 0; i < count; ++i) {
      auto dst = params_[i].tensor.mutable_data();
      std::copy(values[i].begin(), values[i].end(), dst.begin());
    }
    adam_ = std::move(adam);
    best_val_ = best_val;
    best_step_ = best_step;
  } catch (const TruncatedInput& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

GradCheckReport grad_check(const HPRNConfig& cfg, const GradCheckOptions& opt) {
  const auto phi = gen_sensitivity(cfg.bands, derive_seed(opt.seed, 0));
  const auto cube = gen_hsi(opt.patch, opt.patch, cfg.bands, derive_seed(opt.seed, 1));
  const auto rgb = project_rgb(cube, phi);
  auto model = make_hprn<double>(cfg, derive_seed(opt.seed, 2));
  auto params = model.parameters();
  std::vector<SemanticOrder> orders;
  if (cfg.use_ssrm) orders = model.orders_for(multiscale_labels(rgb, cfg.ssrm_scales, cfg.slic_params()));
  const auto x = to_tensor<double>(rgb);
  const auto gt = to_tensor<double>(cube);
  auto loss_fn = [&] { return total_loss(model.forward(x, orders), gt, cfg.sopc_tau).total; };

  std::vector<std::uint8_t> base_signs;
  {
    KinkTrace trace;
    auto loss = loss_fn();
    base_signs = trace.signs();
    for (auto& p : params) p.tensor.zero_grad();
    loss.backward();
  }

  GradCheckReport report;
  Rng rng(derive_seed(opt.seed, 3));
  std::uniform_int_distribution<std::size_t> pick_param(0, params.size() - 1);
  std::set<std::pair<std::size_t, std::size_t>> tried;
  const std::size_t max_attempts = 50 * opt.n_params + 100;
  for (std::size_t attempt = 0; report.samples.size() < opt.n_params && attempt < max_attempts; ++attempt) {
    const std::size_t pi = pick_param(rng);
    auto& tensor = params[pi].tensor;
    const std::size_t k = std::uniform_int_distribution<std::size_t>(0, tensor.numel() - 1)(rng);
    if (!tried.insert({pi, k}).second) continue;
    const double analytic = tensor.has_grad() ? tensor.grad()[k] : 0.0;
    auto data = tensor.mutable_data();
    const double original = data[k];
    auto probe = [&](double value, std::vector<std::uint8_t>& signs) {
      data[k] = value;
      NoGradGuard no_grad;
      KinkTrace trace;
      const double l = loss_fn().item();
      signs = trace.signs();
      return l;
    };
    // Fourth-order central stencil; every probe must keep the kink signs.
    std::vector<std::uint8_t> signs;
    bool crossed = false;
    double f[4];
    const double offsets[4] = {2.0, 1.0, -1.0, -2.0};
    for (int j = 0; j < 4; ++j) {
      f[j] = probe(original + offsets[j] * opt.step, signs);
      crossed = crossed || signs != base_signs;
    }
    data[k] = original;
    if (crossed) {
      ++report.kink_exclusions;
      continue;
    }
    GradSample s;
    s.name = params[pi].name;
    s.index = k;
    s.analytic = analytic;
    s.numeric = (-f[0] + 8.0 * f[1] - 8.0 * f[2] + f[3]) / (12.0 * opt.step);
    s.rel_error = std::abs(s.analytic - s.numeric) /
                  std::max({std::abs(s.analytic), std::abs(s.numeric), opt.abs_floor});
    if (report.samples.empty() || s.rel_error > report.max_rel_error) {
      report.max_rel_error = s.rel_error;
      report.worst_name = s.name;
      report.worst_index = s.index;
    }
    report.samples.push_back(std::move(s));
  }
  report.passed = report.samples.size() >= opt.n_params && report.max_rel_error < opt.tol;
  return report;
}

std::string format_grad_report(const GradCheckReport& r) {
  std::ostringstream s;
  s << "sampled " << r.samples.size() << " parameters (" << r.kink_exclusions << " kink crossings skipped)\n";
  s << "max relative error " << std::scientific << std::setprecision(3) << r.max_rel_error;
  if (!r.samples.empty()) s << " at " << r.worst_name << "[" << r.worst_index << "]";
  s << "\n" << (r.passed ? "PASS" : "FAIL") << "\n";
  return s.str();
}

#define HPRN_INSTANTIATE_TRAINER(T)                                                         \
  template struct AdamState<T>;                                                             \
  template AdamState<T> make_adam_state(const ParameterList<T>&);                           \
  template void adam_step(ParameterList<T>&, AdamState<T>&, double, const TrainConfig&);    \
  template class Trainer<T>;

HPRN_INSTANTIATE_TRAINER(float)
HPRN_INSTANTIATE_TRAINER(double)

}  // namespace hprn
