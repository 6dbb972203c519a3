#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "hprn/data.hpp"

namespace hprn {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_rows(const std::filesystem::path& path, std::size_t height, std::size_t width, int bit_depth,
                int color_type, const std::vector<png_bytep>& rows) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng: cannot create info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng: failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

RgbImage read_png_rgb(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  RgbImage rgb(image.height, image.width);
  const std::size_t hw = rgb.height * rgb.width;
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t c = 0; c < 3; ++c) rgb.values[c * hw + p] = static_cast<float>(buf[3 * p + c]) / 255.0f;
  }
  return rgb;
}

void write_png_rgb8(const std::filesystem::path& path, std::size_t height, std::size_t width,
                    const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != 3 * height * width || height == 0 || width == 0) {
    throw ContractError("write_png_rgb8: buffer does not match " + std::to_string(height) + "x" +
                        std::to_string(width));
  }
  std::vector<png_bytep> rows(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(rgb.data() + 3 * width * y);
  write_rows(path, height, width, 8, PNG_COLOR_TYPE_RGB, rows);
}

void write_png_rgb(const std::filesystem::path& path, const RgbImage& rgb) {
  const std::size_t hw = rgb.height * rgb.width;
  std::vector<std::uint8_t> buf(3 * hw);
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(static_cast<double>(rgb.values[c * hw + p]), 0.0, 1.0);
      buf[3 * p + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  write_png_rgb8(path, rgb.height, rgb.width, buf);
}

void write_png_gray16(const std::filesystem::path& path, std::size_t height, std::size_t width,
                      const std::vector<std::uint16_t>& values) {
  if (values.size() != height * width || height == 0 || width == 0) {
    throw ContractError("write_png_gray16: buffer does not match " + std::to_string(height) + "x" +
                        std::to_string(width));
  }
  std::vector<png_bytep> rows(height);
  for (std::size_t y = 0; y < height; ++y) {
    rows[y] = reinterpret_cast<png_bytep>(const_cast<std::uint16_t*>(values.data() + width * y));
  }
  write_rows(path, height, width, 16, PNG_COLOR_TYPE_GRAY, rows);
}

void write_label_png(const std::filesystem::path& path, const LabelMap& labels) {
  labels.validate();
  if (labels.n_labels > 0xFFFF) throw ContractError("write_label_png: more than 65535 labels");
  std::vector<std::uint16_t> v(labels.labels.begin(), labels.labels.end());
  write_png_gray16(path, labels.height, labels.width, v);
}

}  // namespace hprn
