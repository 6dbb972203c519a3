#include "hprn/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

namespace hprn {

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kWindowSigma = 1.5;

void require_same_shape(const SpectralCube& a, const SpectralCube& b, const char* what) {
  if (a.bands != b.bands || a.height != b.height || a.width != b.width ||
      a.values.size() != b.values.size()) {
    throw DimensionError(std::string(what) + ": " + std::to_string(a.bands) + "x" +
                         std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                         std::to_string(b.bands) + "x" + std::to_string(b.height) + "x" +
                         std::to_string(b.width));
  }
  if (a.values.empty()) throw ContractError(std::string(what) + ": empty cube");
}

double mrae_range(const float* p, const float* g, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double gv = g[i];
    acc += std::abs(gv - static_cast<double>(p[i])) / std::max(gv, kMraeEpsilon);
  }
  return acc / static_cast<double>(n);
}

double mse_range(const float* p, const float* g, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(g[i]) - static_cast<double>(p[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(n);
}

PsnrResult psnr_range(const float* p, const float* g, std::size_t n, double peak, PsnrFormula formula) {
  const double mse = mse_range(p, g, n);
  if (mse == 0.0) return {kPsnrCapDb, true};
  if (formula == PsnrFormula::standard) {
    return {std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse)), false};
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (static_cast<double>(g[i]) - static_cast<double>(p[i])) / peak;
    acc += std::log10(std::max(d * d, kPsnrEq19Guard));
  }
  return {std::min(kPsnrCapDb, -10.0 * acc / static_cast<double>(n)), false};
}

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> w{};
  double total = 0.0;
  const double c = static_cast<double>(kWindow / 2);
  for (std::size_t i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

}  // namespace

PsnrFormula parse_psnr_formula(const std::string& s) {
  if (s == "standard") return PsnrFormula::standard;
  if (s == "eq19") return PsnrFormula::eq19;
  throw ContractError("psnr_formula must be standard|eq19, got '" + s + "'");
}

double mrae(const SpectralCube& pred, const SpectralCube& gt) {
  require_same_shape(pred, gt, "mrae");
  return mrae_range(pred.values.data(), gt.values.data(), gt.values.size());
}

double rmse(const SpectralCube& pred, const SpectralCube& gt) {
  require_same_shape(pred, gt, "rmse");
  return std::sqrt(mse_range(pred.values.data(), gt.values.data(), gt.values.size()));
}

SamResult sam(const SpectralCube& pred, const SpectralCube& gt) {
  require_same_shape(pred, gt, "sam");
  const std::size_t hw = gt.height * gt.width;
  SamResult r;
  double acc = 0.0;
  for (std::size_t p = 0; p < hw; ++p) {
    double dot = 0.0, np = 0.0, ng = 0.0;
    for (std::size_t b = 0; b < gt.bands; ++b) {
      const double pv = pred.values[b * hw + p];
      const double gv = gt.values[b * hw + p];
      dot += pv * gv;
      np += pv * pv;
      ng += gv * gv;
    }
    if (np == 0.0 || ng == 0.0) {
      ++r.skipped;
      continue;
    }
    acc += std::acos(std::clamp(dot / std::sqrt(np * ng), -1.0, 1.0));
  }
  if (r.skipped == hw) throw UndefinedMetric("sam: every spectrum has zero norm");
  r.degrees = acc / static_cast<double>(hw - r.skipped) * 180.0 / std::numbers::pi;
  return r;
}

PsnrResult psnr(const SpectralCube& pred, const SpectralCube& gt, double peak, PsnrFormula formula) {
  require_same_shape(pred, gt, "psnr");
  if (!(peak > 0.0)) throw ContractError("psnr: peak must be positive");
  return psnr_range(pred.values.data(), gt.values.data(), gt.values.size(), peak, formula);
}

double ssim_band(const float* pred, const float* gt, std::size_t height, std::size_t width, double peak) {
  if (height < kWindow || width < kWindow) {
    throw ContractError("ssim: " + std::to_string(height) + "x" + std::to_string(width) +
                        " is smaller than the 11x11 window");
  }
  static const auto taps = gaussian_taps();
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const std::size_t oh = height - kWindow + 1;
  const std::size_t ow = width - kWindow + 1;
  // Separable filtering: rows first into [height x ow] buffers of the five moments.
  std::array<std::vector<double>, 5> rows;
  for (auto& r : rows) r.assign(height * ow, 0.0);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      std::array<double, 5> m{};
      for (std::size_t k = 0; k < kWindow; ++k) {
        const double a = pred[y * width + x + k];
        const double b = gt[y * width + x + k];
        m[0] += taps[k] * a;
        m[1] += taps[k] * b;
        m[2] += taps[k] * a * a;
        m[3] += taps[k] * b * b;
        m[4] += taps[k] * a * b;
      }
      for (std::size_t j = 0; j < 5; ++j) rows[j][y * ow + x] = m[j];
    }
  }
  double acc = 0.0;
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      std::array<double, 5> m{};
      for (std::size_t k = 0; k < kWindow; ++k) {
        for (std::size_t j = 0; j < 5; ++j) m[j] += taps[k] * rows[j][(y + k) * ow + x];
      }
      const double va = m[2] - m[0] * m[0];
      const double vb = m[3] - m[1] * m[1];
      const double cov = m[4] - m[0] * m[1];
      acc += ((2.0 * m[0] * m[1] + c1) * (2.0 * cov + c2)) /
             ((m[0] * m[0] + m[1] * m[1] + c1) * (va + vb + c2));
    }
  }
  return acc / static_cast<double>(oh * ow);
}

double assim(const SpectralCube& pred, const SpectralCube& gt, double peak) {
  require_same_shape(pred, gt, "assim");
  const std::size_t hw = gt.height * gt.width;
  double acc = 0.0;
  for (std::size_t b = 0; b < gt.bands; ++b) {
    acc += ssim_band(pred.values.data() + b * hw, gt.values.data() + b * hw, gt.height, gt.width, peak);
  }
  return acc / static_cast<double>(gt.bands);
}

std::vector<double> mrae_map(const SpectralCube& pred, const SpectralCube& gt) {
  require_same_shape(pred, gt, "mrae_map");
  const std::size_t hw = gt.height * gt.width;
  std::vector<double> map(hw, 0.0);
  for (std::size_t b = 0; b < gt.bands; ++b) {
    for (std::size_t p = 0; p < hw; ++p) {
      const double gv = gt.values[b * hw + p];
      map[p] += std::abs(gv - static_cast<double>(pred.values[b * hw + p])) / std::max(gv, kMraeEpsilon);
    }
  }
  for (auto& v : map) v /= static_cast<double>(gt.bands);
  return map;
}

MetricsReport evaluate(const SpectralCube& pred, const SpectralCube& gt, double peak, PsnrFormula formula) {
  require_same_shape(pred, gt, "evaluate");
  MetricsReport r;
  r.mrae = mrae(pred, gt);
  r.rmse = rmse(pred, gt);
  const auto s = sam(pred, gt);
  r.sam_degrees = s.degrees;
  r.sam_skipped = s.skipped;
  const auto p = psnr(pred, gt, peak, formula);
  r.psnr_db = p.db;
  r.psnr_capped = p.capped;
  r.wavelengths_nm = gt.wavelengths_nm;
  const std::size_t hw = gt.height * gt.width;
  double ssim_total = 0.0;
  for (std::size_t b = 0; b < gt.bands; ++b) {
    const float* pb = pred.values.data() + b * hw;
    const float* gb = gt.values.data() + b * hw;
    r.band_mrae.push_back(mrae_range(pb, gb, hw));
    r.band_rmse.push_back(std::sqrt(mse_range(pb, gb, hw)));
    r.band_psnr_db.push_back(psnr_range(pb, gb, hw, peak, formula).db);
    r.band_ssim.push_back(ssim_band(pb, gb, gt.height, gt.width, peak));
    ssim_total += r.band_ssim.back();
  }
  r.assim = ssim_total / static_cast<double>(gt.bands);
  return r;
}

void write_summary_csv(std::ostream& out, const MetricsReport& r) {
  out << std::setprecision(17);
  out << "metric,value\n";
  out << "mrae," << r.mrae << "\n";
  out << "rmse," << r.rmse << "\n";
  out << "sam_degrees," << r.sam_degrees << "\n";
  out << "sam_skipped," << r.sam_skipped << "\n";
  out << "psnr_db," << r.psnr_db << "\n";
  out << "psnr_capped," << (r.psnr_capped ? 1 : 0) << "\n";
  out << "assim," << r.assim << "\n";
}

void write_band_csv(std::ostream& out, const MetricsReport& r) {
  out << std::setprecision(17);
  out << "band,wavelength_nm,mrae,rmse,psnr_db,ssim\n";
  for (std::size_t b = 0; b < r.band_mrae.size(); ++b) {
    const double wl = b < r.wavelengths_nm.size() ? r.wavelengths_nm[b] : 0.0;
    out << b << "," << wl << "," << r.band_mrae[b] << "," << r.band_rmse[b] << ","
        << r.band_psnr_db[b] << "," << r.band_ssim[b] << "\n";
  }
}

std::string format_report(const MetricsReport& r) {
  std::ostringstream s;
  s << std::fixed;
  s << "MRAE   " << std::setprecision(6) << r.mrae << "\n";
  s << "RMSE   " << std::setprecision(6) << r.rmse << "\n";
  s << "SAM    " << std::setprecision(4) << r.sam_degrees << " deg";
  if (r.sam_skipped) s << " (" << r.sam_skipped << " zero-norm pixels skipped)";
  s << "\n";
  s << "PSNR   " << std::setprecision(3) << r.psnr_db << " dB" << (r.psnr_capped ? " (capped, zero error)" : "")
    << "\n";
  s << "ASSIM  " << std::setprecision(6) << r.assim << "\n";
  return s.str();
}

}  // namespace hprn
