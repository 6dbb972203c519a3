#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "hprn/image.hpp"

namespace hprn {

/// Fixed blue -> cyan -> green -> yellow -> red ramp; t is clamped to [0,1].
std::array<std::uint8_t, 3> error_colormap(double t);

/// Interleaved RGB8 rendering of an H x W scalar map over [vmin, vmax].
std::vector<std::uint8_t> render_heatmap(const std::vector<double>& values, double vmin, double vmax);

/// |pred - gt| / max(gt, eps) at one band, row-major H x W.
std::vector<double> band_error_map(const SpectralCube& pred, const SpectralCube& gt, std::size_t band);

struct PixelCoord {
  std::size_t y = 0;
  std::size_t x = 0;
};

/// Columns: point,y,x,band,wavelength_nm,value; B rows per point.
void write_curves_csv(std::ostream& out, const SpectralCube& cube, const std::vector<PixelCoord>& points);

/// Line plot of the spectra at `points` on a white canvas, value axis [0,1].
std::vector<std::uint8_t> render_curves(const SpectralCube& cube, const std::vector<PixelCoord>& points,
                                        std::size_t height, std::size_t width);

}  // namespace hprn
