#pragma once

#include <cstdint>
#include <vector>

#include "hprn/image.hpp"

namespace hprn {

/// Per-pixel category assignment; labels are dense in [0, n_labels).
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> labels;
  std::size_t n_labels = 0;
  // Requested category count the map was produced for.
  std::size_t scale = 1;

  std::int32_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
  /// Range and size checks only; connectivity is not verified here.
  void validate() const;
};

struct SlicParams {
  std::size_t scale = 8;
  double compactness = 10.0;
  std::size_t max_iters = 10;
  // Cluster in CIELAB (D65) when set, raw RGB*100 otherwise.
  bool use_lab = true;
  double convergence = 1e-3;
};

/// Localized k-means over (color, x/S, y/S) with S = sqrt(HW/K), search
/// window 2S x 2S, distance d_color + m * d_spatial / S, then connectivity
/// enforcement. Ties go to the lower cluster index.
LabelMap slic_segment(const RgbImage& rgb, const SlicParams& params);

/// Splits every label into its 4-connected components, merges components
/// smaller than (HW/scale)/4 into their largest neighbour, and re-indexes
/// labels densely in raster order of first appearance.
LabelMap enforce_connectivity(const LabelMap& map);

/// One map per requested scale, sharing every other parameter.
std::vector<LabelMap> multiscale_labels(const RgbImage& rgb, const std::vector<std::size_t>& scales,
                                        const SlicParams& base = {});

/// sRGB (gamma encoded, [0,1]) to CIELAB under D65.
void srgb_to_lab(double r, double g, double b, double& l, double& a, double& bb);

}  // namespace hprn
