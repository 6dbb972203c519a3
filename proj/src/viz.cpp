#include "hprn/viz.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "hprn/metrics.hpp"

namespace hprn {

namespace {

void check_points(const SpectralCube& cube, const std::vector<PixelCoord>& points) {
  for (const auto& p : points) {
    if (p.y >= cube.height || p.x >= cube.width) {
      throw ContractError("pixel (" + std::to_string(p.y) + "," + std::to_string(p.x) + ") outside " +
                          std::to_string(cube.height) + "x" + std::to_string(cube.width) + " cube");
    }
  }
}

void put(std::vector<std::uint8_t>& img, std::size_t w, long y, long x, std::size_t h,
         const std::array<std::uint8_t, 3>& c) {
  if (y < 0 || x < 0 || static_cast<std::size_t>(y) >= h || static_cast<std::size_t>(x) >= w) return;
  const std::size_t i = 3 * (static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x));
  img[i] = c[0];
  img[i + 1] = c[1];
  img[i + 2] = c[2];
}

void line(std::vector<std::uint8_t>& img, std::size_t h, std::size_t w, long x0, long y0, long x1, long y1,
          const std::array<std::uint8_t, 3>& c) {
  const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  long err = dx + dy;
  while (true) {
    put(img, w, y0, x0, h, c);
    if (x0 == x1 && y0 == y1) break;
    const long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

}  // namespace

std::array<std::uint8_t, 3> error_colormap(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{
      {0.0, 0.0, 1.0}, {0.0, 1.0, 1.0}, {0.0, 1.0, 0.0}, {1.0, 1.0, 0.0}, {1.0, 0.0, 0.0}}};
  t = std::isfinite(t) ? std::clamp(t, 0.0, 1.0) : 1.0;
  const double pos = t * static_cast<double>(stops.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(pos), stops.size() - 2);
  const double u = pos - static_cast<double>(i);
  std::array<std::uint8_t, 3> out{};
  for (std::size_t c = 0; c < 3; ++c) {
    out[c] = static_cast<std::uint8_t>(std::lround(255.0 * ((1.0 - u) * stops[i][c] + u * stops[i + 1][c])));
  }
  return out;
}

std::vector<std::uint8_t> render_heatmap(const std::vector<double>& values, double vmin, double vmax) {
  if (!(vmax > vmin)) throw ContractError("heatmap: vmax must exceed vmin");
  std::vector<std::uint8_t> img(3 * values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto c = error_colormap((values[i] - vmin) / (vmax - vmin));
    std::copy(c.begin(), c.end(), img.begin() + 3 * static_cast<std::ptrdiff_t>(i));
  }
  return img;
}

std::vector<double> band_error_map(const SpectralCube& pred, const SpectralCube& gt, std::size_t band) {
  if (!pred.same_shape(gt)) throw DimensionError("band_error_map: cube shapes differ");
  if (band >= gt.bands) {
    throw ContractError("band " + std::to_string(band) + " outside [0," + std::to_string(gt.bands) + ")");
  }
  const std::size_t hw = gt.pixels();
  std::vector<double> out(hw);
  for (std::size_t p = 0; p < hw; ++p) {
    const double g = gt.values[band * hw + p];
    out[p] = std::abs(g - static_cast<double>(pred.values[band * hw + p])) / std::max(g, kMraeEpsilon);
  }
  return out;
}

void write_curves_csv(std::ostream& out, const SpectralCube& cube, const std::vector<PixelCoord>& points) {
  check_points(cube, points);
  out.precision(9);
  out << "point,y,x,band,wavelength_nm,value\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t b = 0; b < cube.bands; ++b) {
      out << i << "," << points[i].y << "," << points[i].x << "," << b << "," << cube.wavelengths_nm[b] << ","
          << cube.at(b, points[i].y, points[i].x) << "\n";
    }
  }
}

std::vector<std::uint8_t> render_curves(const SpectralCube& cube, const std::vector<PixelCoord>& points,
                                        std::size_t height, std::size_t width) {
  check_points(cube, points);
  constexpr long kMargin = 20;
  if (height < 3 * kMargin || width < 3 * kMargin) throw ContractError("curve plot canvas too small");
  std::vector<std::uint8_t> img(3 * height * width, 255);
  const long h = static_cast<long>(height), w = static_cast<long>(width);
  const std::array<std::uint8_t, 3> axis{0, 0, 0};
  line(img, height, width, kMargin, h - kMargin, w - kMargin, h - kMargin, axis);
  line(img, height, width, kMargin, kMargin, kMargin, h - kMargin, axis);
  static constexpr std::array<std::array<std::uint8_t, 3>, 6> palette{
      {{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {255, 127, 14}, {148, 103, 189}, {23, 190, 207}}};
  const double span = static_cast<double>(w - 2 * kMargin);
  const double rise = static_cast<double>(h - 2 * kMargin);
  for (std::size_t i = 0; i < points.size(); ++i) {
    long px = 0, py = 0;
    for (std::size_t b = 0; b < cube.bands; ++b) {
      const double fx = cube.bands == 1 ? 0.0 : static_cast<double>(b) / static_cast<double>(cube.bands - 1);
      const double v = std::clamp(static_cast<double>(cube.at(b, points[i].y, points[i].x)), 0.0, 1.0);
      const long x = kMargin + std::lround(fx * span);
      const long y = h - kMargin - std::lround(v * rise);
      if (b > 0) line(img, height, width, px, py, x, y, palette[i % palette.size()]);
      px = x;
      py = y;
    }
  }
  return img;
}

}  // namespace hprn
