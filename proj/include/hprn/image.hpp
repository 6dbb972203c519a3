#pragma once

#include <cstddef>
#include <vector>

#include "hprn/tensor.hpp"

namespace hprn {

/// Band-major, row-major hyperspectral cube [bands x height x width].
struct SpectralCube {
  std::size_t bands = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> wavelengths_nm;
  std::vector<float> values;

  SpectralCube() = default;
  /// Zero cube with evenly spaced wavelengths over 400-700 nm.
  SpectralCube(std::size_t b, std::size_t h, std::size_t w);

  std::size_t pixels() const { return height * width; }
  float& at(std::size_t b, std::size_t y, std::size_t x) { return values[(b * height + y) * width + x]; }
  float at(std::size_t b, std::size_t y, std::size_t x) const {
    return values[(b * height + y) * width + x];
  }
  bool same_shape(const SpectralCube& other) const {
    return bands == other.bands && height == other.height && width == other.width;
  }

  /// Throws ContractError when values leave [0,1], wavelengths are not
  /// strictly increasing, or counts disagree.
  void validate() const;
};

/// Evenly spaced band centres from 400 to 700 nm (10 nm steps for 31 bands).
std::vector<double> default_wavelengths(std::size_t bands);

/// Planar RGB image [3 x height x width] with values in [0,1].
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;

  RgbImage() = default;
  RgbImage(std::size_t h, std::size_t w) : height(h), width(w), values(3 * h * w, 0.0f) {}

  float& at(std::size_t c, std::size_t y, std::size_t x) { return values[(c * height + y) * width + x]; }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return values[(c * height + y) * width + x];
  }
};

template <typename T>
Tensor<T> to_tensor(const SpectralCube& cube);
template <typename T>
Tensor<T> to_tensor(const RgbImage& image);

/// Copies a [B x H x W] tensor into a cube; values are not clipped.
template <typename T>
SpectralCube to_cube(const Tensor<T>& t);

}  // namespace hprn
