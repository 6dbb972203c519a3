#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hprn/image.hpp"
#include "hprn/tensor.hpp"

namespace hprn {

/// A metric whose value does not exist for the given input.
struct UndefinedMetric : ContractError {
  using ContractError::ContractError;
};

inline constexpr double kMraeEpsilon = 1e-6;
inline constexpr double kPsnrCapDb = 100.0;
inline constexpr double kPsnrEq19Guard = 1e-12;

enum class PsnrFormula { standard, eq19 };
PsnrFormula parse_psnr_formula(const std::string& s);

double mrae(const SpectralCube& pred, const SpectralCube& gt);
double rmse(const SpectralCube& pred, const SpectralCube& gt);

struct SamResult {
  double degrees = 0.0;
  std::size_t skipped = 0;  // positions with a zero-norm spectrum
};
SamResult sam(const SpectralCube& pred, const SpectralCube& gt);

struct PsnrResult {
  double db = 0.0;
  bool capped = false;  // error was exactly zero
};
PsnrResult psnr(const SpectralCube& pred, const SpectralCube& gt, double peak = 1.0,
                PsnrFormula formula = PsnrFormula::standard);

/// Single-band SSIM, 11x11 Gaussian window (sigma 1.5) over the valid region.
double ssim_band(const float* pred, const float* gt, std::size_t height, std::size_t width,
                 double peak = 1.0);
double assim(const SpectralCube& pred, const SpectralCube& gt, double peak = 1.0);

/// Per-pixel MRAE averaged over bands, row-major H x W.
std::vector<double> mrae_map(const SpectralCube& pred, const SpectralCube& gt);

struct MetricsReport {
  double mrae = 0.0;
  double rmse = 0.0;
  double sam_degrees = 0.0;
  std::size_t sam_skipped = 0;
  double psnr_db = 0.0;
  bool psnr_capped = false;
  double assim = 0.0;
  std::vector<double> wavelengths_nm;
  std::vector<double> band_mrae;
  std::vector<double> band_rmse;
  std::vector<double> band_psnr_db;
  std::vector<double> band_ssim;
};

MetricsReport evaluate(const SpectralCube& pred, const SpectralCube& gt, double peak = 1.0,
                       PsnrFormula formula = PsnrFormula::standard);

/// Columns: metric,value
void write_summary_csv(std::ostream& out, const MetricsReport& report);
/// Columns: band,wavelength_nm,mrae,rmse,psnr_db,ssim
void write_band_csv(std::ostream& out, const MetricsReport& report);
std::string format_report(const MetricsReport& report);

}  // namespace hprn
