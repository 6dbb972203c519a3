#include "hprn/image.hpp"

#include <string>

namespace hprn {

std::vector<double> default_wavelengths(std::size_t bands) {
  std::vector<double> wl(bands);
  for (std::size_t i = 0; i < bands; ++i) {
    wl[i] = bands == 1 ? 550.0 : 400.0 + 300.0 * static_cast<double>(i) / static_cast<double>(bands - 1);
  }
  return wl;
}

SpectralCube::SpectralCube(std::size_t b, std::size_t h, std::size_t w)
    : bands(b), height(h), width(w), wavelengths_nm(default_wavelengths(b)), values(b * h * w, 0.0f) {}

void SpectralCube::validate() const {
  if (values.size() != bands * height * width) {
    throw ContractError("cube holds " + std::to_string(values.size()) + " values for " +
                        std::to_string(bands) + "x" + std::to_string(height) + "x" +
                        std::to_string(width));
  }
  if (wavelengths_nm.size() != bands) {
    throw ContractError("cube has " + std::to_string(wavelengths_nm.size()) +
                        " wavelengths for " + std::to_string(bands) + " bands");
  }
  for (std::size_t i = 1; i < wavelengths_nm.size(); ++i) {
    if (!(wavelengths_nm[i] > wavelengths_nm[i - 1])) {
      throw ContractError("cube wavelengths are not strictly increasing");
    }
  }
  for (float v : values) {
    if (!(v >= 0.0f && v <= 1.0f)) throw ContractError("cube value outside [0,1]");
  }
}

template <typename T>
Tensor<T> to_tensor(const SpectralCube& cube) {
  return Tensor<T>::from(Shape{cube.bands, cube.height, cube.width},
                         std::vector<T>(cube.values.begin(), cube.values.end()));
}

template <typename T>
Tensor<T> to_tensor(const RgbImage& image) {
  return Tensor<T>::from(Shape{3, image.height, image.width},
                         std::vector<T>(image.values.begin(), image.values.end()));
}

template <typename T>
SpectralCube to_cube(const Tensor<T>& t) {
  if (t.rank() != 3) throw DimensionError("to_cube: expected BxHxW, got " + t.shape().str());
  SpectralCube cube(t.dim(0), t.dim(1), t.dim(2));
  for (std::size_t i = 0; i < cube.values.size(); ++i) cube.values[i] = static_cast<float>(t[i]);
  return cube;
}

template Tensor<float> to_tensor<float>(const SpectralCube&);
template Tensor<double> to_tensor<double>(const SpectralCube&);
template Tensor<float> to_tensor<float>(const RgbImage&);
template Tensor<double> to_tensor<double>(const RgbImage&);
template SpectralCube to_cube(const Tensor<float>&);
template SpectralCube to_cube(const Tensor<double>&);

}  // namespace hprn
