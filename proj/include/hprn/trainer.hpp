#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "hprn/data.hpp"
#include "hprn/loss.hpp"
#include "hprn/model.hpp"

namespace hprn {

struct TrainConfig {
  double lr0 = 0.00012;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  double decay_power = 1.5;
  std::size_t epochs = 100;
  std::size_t steps_per_epoch = 50;
  std::size_t batch_size = 4;
  std::size_t patch_size = 64;
  std::uint64_t seed = 0;
  // Validation scenes are center-cropped to this size; 0 keeps them whole.
  std::size_t val_crop = 0;

  void validate() const;
  std::size_t total_steps() const { return epochs * steps_per_epoch; }
};

/// lr0 * (1 - t/T)^power, zero once t >= T.
double poly_lr(std::size_t t, std::size_t total, double lr0, double power);

template <typename T>
struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

template <typename T>
AdamState<T> make_adam_state(const ParameterList<T>& params);

/// Bias-corrected Adam. Parameters without a gradient buffer see g = 0.
template <typename T>
void adam_step(ParameterList<T>& params, AdamState<T>& state, double lr, const TrainConfig& cfg);

struct LogRow {
  std::size_t step = 0;  // 1-based index of the completed optimizer step
  std::size_t epoch = 0;
  double lr = 0.0;
  double l1 = 0.0;
  double sopc = 0.0;
  double total = 0.0;
  std::optional<double> val_mrae;  // set on the last step of each epoch
};

void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const LogRow& row);

/// Loss became NaN or infinite; the message carries step, lr and loss parts.
class TrainingDiverged : public ContractError {
 public:
  using ContractError::ContractError;
};

// Trainer state: "HPRNSTAT", u32 version, u8 sizeof(T), u64 step, f64 best_val,
// u64 best_step, u32 count, then per parameter: u16 name length, name, u8 rank,
// u32 dims, and values, m, v in native precision.
inline constexpr std::uint32_t kTrainerStateVersion = 1;

template <typename T>
class Trainer {
 public:
  Trainer(HPRN<T>& model, TrainConfig cfg, std::vector<ScenePair> train, std::vector<ScenePair> val);

  /// One optimizer step on a batch drawn as a pure function of (seed, step).
  LogRow step();
  /// Runs to total_steps(), validating at every epoch end. Writes log, best
  /// and last checkpoints and the state file into `out_dir` when non-empty.
  std::vector<LogRow> run(const std::filesystem::path& out_dir = {}, std::ostream* progress = nullptr);

  /// Mean MRAE of clipped predictions over whole scenes (or center crops).
  double evaluate_mrae(const std::vector<ScenePair>& scenes, std::size_t crop = 0);
  double validate() { return evaluate_mrae(val_, cfg_.val_crop); }
  /// Prediction for one scene, cached segmentation keyed by `tag`.
  SpectralCube predict(const RgbImage& rgb, const std::string& tag);

  void save_state(const std::filesystem::path& path) const;
  void load_state(const std::filesystem::path& path);

  std::uint64_t steps_done() const { return adam_.step; }
  double best_val_mrae() const { return best_val_; }
  std::size_t best_step() const { return best_step_; }
  const ParameterList<T>& parameters() const { return params_; }
  const TrainConfig& config() const { return cfg_; }
  /// Number of distinct patches segmented so far.
  std::size_t segmentation_cache_size() const { return cache_.size(); }

 private:
  using CacheKey = std::tuple<std::string, std::size_t, std::size_t, std::size_t>;
  const std::vector<SemanticOrder>& orders_for(const RgbImage& patch, const CacheKey& key);

  HPRN<T>& model_;
  TrainConfig cfg_;
  std::vector<ScenePair> train_;
  std::vector<ScenePair> val_;
  ParameterList<T> params_;
  AdamState<T> adam_;
  std::map<CacheKey, std::vector<SemanticOrder>> cache_;
  double best_val_ = INFINITY;
  std::size_t best_step_ = 0;
};

// ---------------------------------------------------------------------------

struct GradCheckOptions {
  std::size_t n_params = 100;
  std::size_t patch = 16;
  double step = 1e-2;
  double tol = 1e-4;
  // Denominator floor for the relative error.
  double abs_floor = 1e-8;
  std::uint64_t seed = 0;
};

struct GradSample {
  std::string name;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradSample> samples;
  double max_rel_error = 0.0;
  std::string worst_name;
  std::size_t worst_index = 0;
  std::size_t kink_exclusions = 0;
  bool passed = false;
};

/// Fourth-order central differences of total_loss against backprop in 64-bit precision on
/// one synthetic patch. Perturbations that flip the sign of any abs/PReLU
/// input are discarded and resampled.
GradCheckReport grad_check(const HPRNConfig& cfg, const GradCheckOptions& options);

std::string format_grad_report(const GradCheckReport& report);

}  // namespace hprn
