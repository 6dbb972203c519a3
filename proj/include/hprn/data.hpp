#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hprn/binary_io.hpp"
#include "hprn/image.hpp"
#include "hprn/slic.hpp"

namespace hprn {

/// Independent child seed for a numbered stream (splitmix64 mix).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Camera response: 3 x B, rows R, G, B, each non-negative with unit sum.
struct SensitivityMatrix {
  std::size_t bands = 0;
  std::vector<double> wavelengths_nm;
  std::vector<double> values;  // [3 x bands]

  double at(std::size_t channel, std::size_t band) const { return values[channel * bands + band]; }
  void validate() const;
};

SensitivityMatrix gen_sensitivity(std::size_t bands, std::uint64_t seed);

/// Smooth positive reflectance curves, one row of `bands` values per endmember.
struct EndmemberLibrary {
  std::size_t bands = 0;
  std::vector<std::vector<double>> spectra;
};

struct SynthParams {
  std::size_t n_endmembers = 5;
  std::size_t n_regions = 10;
  double blur_sigma = 1.5;
  double dominant_weight = 0.75;
  double min_brightness = 0.6;
};

EndmemberLibrary gen_endmembers(std::size_t bands, std::size_t count, std::uint64_t seed);

/// Voronoi regions, each mixing the library with one dominant endmember and a
/// per-region brightness; abundance maps are Gaussian-blurred at boundaries.
SpectralCube gen_hsi(std::size_t height, std::size_t width, const EndmemberLibrary& library,
                     std::uint64_t seed, const SynthParams& params = {});
/// Same with a scene-private library drawn from `seed`.
SpectralCube gen_hsi(std::size_t height, std::size_t width, std::size_t bands, std::uint64_t seed,
                     const SynthParams& params = {});

struct NoiseSpec {
  double sigma = 0.005;
  bool quantize = true;  // round to 8 bits after the noise
  std::uint64_t seed = 0;
};

/// rgb = phi * spectrum per pixel, then optional noise and 8-bit rounding,
/// clipped to [0,1].
RgbImage project_rgb(const SpectralCube& cube, const SensitivityMatrix& phi,
                     const std::optional<NoiseSpec>& noise = std::nullopt);

SpectralCube crop(const SpectralCube& cube, std::size_t y, std::size_t x, std::size_t h, std::size_t w);
RgbImage crop(const RgbImage& rgb, std::size_t y, std::size_t x, std::size_t h, std::size_t w);

struct ScenePair {
  std::string id;
  RgbImage rgb;
  SpectralCube cube;
};

struct PatchPair {
  std::size_t scene = 0;  // index into the source list
  std::size_t y = 0;
  std::size_t x = 0;
  RgbImage rgb;
  SpectralCube cube;
};

/// Aligned random crops; the same window is applied to both modalities.
std::vector<PatchPair> crop_patches(const ScenePair& pair, std::size_t size, std::size_t count,
                                    std::uint64_t seed);

// ---------------------------------------------------------------------------
// HSC1 cube files: "HSC1", u32 B, H, W, then B*H*W f32, all little-endian.

inline constexpr std::size_t kCubeHeaderBytes = 16;
inline constexpr std::uint64_t kCubeMaxValues = std::uint64_t{1} << 32;

class CubeParseError : public IoError {
 public:
  CubeParseError(const std::string& what, std::size_t offset) : IoError(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class CubeBadMagic : public CubeParseError {
  using CubeParseError::CubeParseError;
};
class CubeTruncated : public CubeParseError {
  using CubeParseError::CubeParseError;
};
class CubeDimensionOverflow : public CubeParseError {
  using CubeParseError::CubeParseError;
};

void write_cube(const std::filesystem::path& path, const SpectralCube& cube);
/// Wavelengths are not stored; the result carries the default 400-700 nm grid.
SpectralCube read_cube(const std::filesystem::path& path);
std::vector<unsigned char> encode_cube(const SpectralCube& cube);
SpectralCube decode_cube(const std::vector<unsigned char>& bytes, const std::string& source = "cube");

// ---------------------------------------------------------------------------
// PNG.

/// Any PNG is expanded to 8-bit RGB; values become v/255.
RgbImage read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const RgbImage& rgb);
/// Interleaved 8-bit RGB rows.
void write_png_rgb8(const std::filesystem::path& path, std::size_t height, std::size_t width,
                    const std::vector<std::uint8_t>& rgb);
void write_png_gray16(const std::filesystem::path& path, std::size_t height, std::size_t width,
                      const std::vector<std::uint16_t>& values);
void write_label_png(const std::filesystem::path& path, const LabelMap& labels);

// ---------------------------------------------------------------------------
// Splits and corpora.

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  /// Throws ContractError when an id appears in more than one list.
  void validate() const;
};

void write_split(const std::filesystem::path& dir, const DatasetSplit& split);
DatasetSplit read_split(const std::filesystem::path& dir);

struct CorpusSpec {
  std::size_t n_train = 24;
  std::size_t n_val = 4;
  std::size_t n_test = 4;
  std::size_t size = 128;
  std::size_t bands = 31;
  std::uint64_t seed = 0;
  SynthParams synth;
  std::optional<NoiseSpec> noise;  // "Real World" inputs when set
};

struct Corpus {
  SensitivityMatrix phi;
  EndmemberLibrary library;
  std::vector<ScenePair> scenes;  // train, then val, then test
  DatasetSplit split;
};

/// Scenes share one endmember library and one camera response.
Corpus make_corpus(const CorpusSpec& spec);
/// Writes <id>.hsc, <id>.png, sensitivity.csv and the split lists.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
/// Reads <id>.hsc and <id>.png for each id.
std::vector<ScenePair> load_scenes(const std::filesystem::path& dir, const std::vector<std::string>& ids);

}  // namespace hprn
