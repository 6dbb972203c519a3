#include "hprn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <set>

namespace hprn {

namespace {

using Rng64 = std::mt19937_64;

// Separable Gaussian blur with clamped borders, in place on an H x W plane.
void gaussian_blur(std::vector<double>& plane, std::size_t h, std::size_t w, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += taps[i + radius];
  }
  for (auto& t : taps) t /= total;
  const int ih = static_cast<int>(h), iw = static_cast<int>(w);
  std::vector<double> tmp(plane.size());
  for (int y = 0; y < ih; ++y) {
    for (int x = 0; x < iw; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * plane[y * iw + std::clamp(x + k, 0, iw - 1)];
      tmp[y * iw + x] = acc;
    }
  }
  for (int y = 0; y < ih; ++y) {
    for (int x = 0; x < iw; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * tmp[std::clamp(y + k, 0, ih - 1) * iw + x];
      plane[y * iw + x] = acc;
    }
  }
}

double catmull_rom(const std::vector<double>& ctrl, double t) {
  const double pos = t * static_cast<double>(ctrl.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(pos), ctrl.size() - 2);
  const double u = pos - static_cast<double>(i);
  auto p = [&](std::ptrdiff_t k) {
    return ctrl[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(ctrl.size()) - 1))];
  };
  const auto si = static_cast<std::ptrdiff_t>(i);
  const double p0 = p(si - 1), p1 = p(si), p2 = p(si + 1), p3 = p(si + 2);
  return 0.5 * (2.0 * p1 + (-p0 + p2) * u + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u * u * u);
}

std::vector<std::string> read_id_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open split list " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

void write_id_list(const std::filesystem::path& path, const std::vector<std::string>& ids) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write split list " + path.string());
  for (const auto& id : ids) out << id << "\n";
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void SensitivityMatrix::validate() const {
  if (values.size() != 3 * bands || wavelengths_nm.size() != bands) {
    throw ContractError("sensitivity matrix holds " + std::to_string(values.size()) + " values for " +
                        std::to_string(bands) + " bands");
  }
  for (std::size_t c = 0; c < 3; ++c) {
    double total = 0.0;
    for (std::size_t b = 0; b < bands; ++b) {
      if (!(at(c, b) >= 0.0)) throw ContractError("sensitivity matrix has a negative entry");
      total += at(c, b);
    }
    if (!(total > 0.0)) throw ContractError("sensitivity row " + std::to_string(c) + " sums to zero");
  }
}

SensitivityMatrix gen_sensitivity(std::size_t bands, std::uint64_t seed) {
  if (bands < 3) throw ContractError("gen_sensitivity: need at least 3 bands, got " + std::to_string(bands));
  Rng64 rng(seed);
  std::uniform_real_distribution<double> jitter(-10.0, 10.0);
  std::uniform_real_distribution<double> width(30.0, 50.0);
  const double centers[3] = {620.0, 550.0, 450.0};  // rows R, G, B
  SensitivityMatrix phi;
  phi.bands = bands;
  phi.wavelengths_nm = default_wavelengths(bands);
  phi.values.assign(3 * bands, 0.0);
  for (std::size_t c = 0; c < 3; ++c) {
    const double mu = centers[c] + jitter(rng);
    const double sd = width(rng);
    double total = 0.0;
    for (std::size_t b = 0; b < bands; ++b) {
      const double d = (phi.wavelengths_nm[b] - mu) / sd;
      phi.values[c * bands + b] = std::exp(-0.5 * d * d);
      total += phi.values[c * bands + b];
    }
    for (std::size_t b = 0; b < bands; ++b) phi.values[c * bands + b] /= total;
  }
  return phi;
}

EndmemberLibrary gen_endmembers(std::size_t bands, std::size_t count, std::uint64_t seed) {
  if (bands == 0 || count == 0) throw ContractError("gen_endmembers: bands and count must be positive");
  Rng64 rng(seed);
  std::uniform_real_distribution<double> level(0.1, 0.9);
  EndmemberLibrary lib;
  lib.bands = bands;
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> ctrl(6);
    for (auto& c : ctrl) c = level(rng);
    std::vector<double> s(bands);
    for (std::size_t b = 0; b < bands; ++b) {
      const double t = bands == 1 ? 0.0 : static_cast<double>(b) / static_cast<double>(bands - 1);
      s[b] = std::clamp(catmull_rom(ctrl, t), 0.05, 0.95);
    }
    lib.spectra.push_back(std::move(s));
  }
  return lib;
}

SpectralCube gen_hsi(std::size_t height, std::size_t width, const EndmemberLibrary& library,
                     std::uint64_t seed, const SynthParams& params) {
  if (height == 0 || width == 0 || library.bands == 0 || library.spectra.empty()) {
    throw ContractError("gen_hsi: dimensions must be positive");
  }
  if (params.n_regions == 0) throw ContractError("gen_hsi: need at least one region");
  const std::size_t k_e = library.spectra.size();
  const std::size_t hw = height * width;
  Rng64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, k_e - 1);

  std::vector<double> sy(params.n_regions), sx(params.n_regions);
  std::vector<std::vector<double>> abundance(params.n_regions, std::vector<double>(k_e, 0.0));
  for (std::size_t r = 0; r < params.n_regions; ++r) {
    sy[r] = unit(rng) * static_cast<double>(height);
    sx[r] = unit(rng) * static_cast<double>(width);
    const std::size_t dominant = pick(rng);
    const double brightness = params.min_brightness + (1.0 - params.min_brightness) * unit(rng);
    std::vector<double> rest(k_e);
    double rest_total = 0.0;
    for (auto& v : rest) rest_total += (v = unit(rng));
    for (std::size_t k = 0; k < k_e; ++k) {
      const double w = (k_e == 1 ? 1.0 : (1.0 - params.dominant_weight) * rest[k] / rest_total) +
                       (k == dominant && k_e > 1 ? params.dominant_weight : 0.0);
      abundance[r][k] = brightness * w;
    }
  }

  std::vector<std::vector<double>> maps(k_e, std::vector<double>(hw, 0.0));
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      std::size_t best = 0;
      double best_d = INFINITY;
      for (std::size_t r = 0; r < params.n_regions; ++r) {
        const double dy = static_cast<double>(y) + 0.5 - sy[r];
        const double dx = static_cast<double>(x) + 0.5 - sx[r];
        const double d = dy * dy + dx * dx;
        if (d < best_d) {
          best_d = d;
          best = r;
        }
      }
      for (std::size_t k = 0; k < k_e; ++k) maps[k][y * width + x] = abundance[best][k];
    }
  }
  for (auto& m : maps) gaussian_blur(m, height, width, params.blur_sigma);

  SpectralCube cube(library.bands, height, width);
  for (std::size_t b = 0; b < library.bands; ++b) {
    for (std::size_t p = 0; p < hw; ++p) {
      double v = 0.0;
      for (std::size_t k = 0; k < k_e; ++k) v += maps[k][p] * library.spectra[k][b];
      cube.values[b * hw + p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return cube;
}

SpectralCube gen_hsi(std::size_t height, std::size_t width, std::size_t bands, std::uint64_t seed,
                     const SynthParams& params) {
  return gen_hsi(height, width, gen_endmembers(bands, params.n_endmembers, derive_seed(seed, 0)),
                 derive_seed(seed, 1), params);
}

RgbImage project_rgb(const SpectralCube& cube, const SensitivityMatrix& phi,
                     const std::optional<NoiseSpec>& noise) {
  if (phi.bands != cube.bands) {
    throw DimensionError("project_rgb: sensitivity has " + std::to_string(phi.bands) +
                         " bands, cube has " + std::to_string(cube.bands));
  }
  const std::size_t hw = cube.pixels();
  RgbImage rgb(cube.height, cube.width);
  std::optional<Rng64> rng;
  std::normal_distribution<double> gauss(0.0, noise ? noise->sigma : 0.0);
  if (noise) rng.emplace(noise->seed);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < hw; ++p) {
      double v = 0.0;
      for (std::size_t b = 0; b < cube.bands; ++b) v += phi.at(c, b) * static_cast<double>(cube.values[b * hw + p]);
      if (noise) {
        if (noise->sigma > 0.0) v += gauss(*rng);
        v = std::clamp(v, 0.0, 1.0);
        if (noise->quantize) v = std::round(v * 255.0) / 255.0;
      }
      rgb.values[c * hw + p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return rgb;
}

SpectralCube crop(const SpectralCube& cube, std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
  if (h == 0 || w == 0 || y + h > cube.height || x + w > cube.width) {
    throw ContractError("crop: window " + std::to_string(h) + "x" + std::to_string(w) + " at (" +
                        std::to_string(y) + "," + std::to_string(x) + ") exceeds " +
                        std::to_string(cube.height) + "x" + std::to_string(cube.width));
  }
  SpectralCube out(cube.bands, h, w);
  out.wavelengths_nm = cube.wavelengths_nm;
  for (std::size_t b = 0; b < cube.bands; ++b) {
    for (std::size_t r = 0; r < h; ++r) {
      const float* src = &cube.values[(b * cube.height + y + r) * cube.width + x];
      std::copy(src, src + w, &out.values[(b * h + r) * w]);
    }
  }
  return out;
}

RgbImage crop(const RgbImage& rgb, std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
  if (h == 0 || w == 0 || y + h > rgb.height || x + w > rgb.width) {
    throw ContractError("crop: window " + std::to_string(h) + "x" + std::to_string(w) + " at (" +
                        std::to_string(y) + "," + std::to_string(x) + ") exceeds " +
                        std::to_string(rgb.height) + "x" + std::to_string(rgb.width));
  }
  RgbImage out(h, w);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t r = 0; r < h; ++r) {
      const float* src = &rgb.values[(c * rgb.height + y + r) * rgb.width + x];
      std::copy(src, src + w, &out.values[(c * h + r) * w]);
    }
  }
  return out;
}

std::vector<PatchPair> crop_patches(const ScenePair& pair, std::size_t size, std::size_t count,
                                    std::uint64_t seed) {
  if (pair.rgb.height != pair.cube.height || pair.rgb.width != pair.cube.width) {
    throw DimensionError("crop_patches: rgb and cube sizes differ for " + pair.id);
  }
  if (size == 0 || size > std::min(pair.cube.height, pair.cube.width)) {
    throw ContractError("crop_patches: patch size " + std::to_string(size) + " exceeds scene " +
                        std::to_string(pair.cube.height) + "x" + std::to_string(pair.cube.width));
  }
  Rng64 rng(seed);
  std::uniform_int_distribution<std::size_t> py(0, pair.cube.height - size);
  std::uniform_int_distribution<std::size_t> px(0, pair.cube.width - size);
  std::vector<PatchPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    PatchPair p;
    p.y = py(rng);
    p.x = px(rng);
    p.rgb = crop(pair.rgb, p.y, p.x, size, size);
    p.cube = crop(pair.cube, p.y, p.x, size, size);
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<unsigned char> encode_cube(const SpectralCube& cube) {
  if (cube.values.size() != cube.bands * cube.height * cube.width) {
    throw ContractError("write_cube: value count does not match dimensions");
  }
  if (cube.bands > 0xFFFFFFFFu || cube.height > 0xFFFFFFFFu || cube.width > 0xFFFFFFFFu) {
    throw ContractError("write_cube: dimension exceeds u32");
  }
  ByteWriter w;
  w.bytes("HSC1", 4);
  w.u32(static_cast<std::uint32_t>(cube.bands));
  w.u32(static_cast<std::uint32_t>(cube.height));
  w.u32(static_cast<std::uint32_t>(cube.width));
  w.bytes(cube.values.data(), cube.values.size() * sizeof(float));
  return w.buffer();
}

SpectralCube decode_cube(const std::vector<unsigned char>& bytes, const std::string& source) {
  if (bytes.size() < 4) {
    throw CubeTruncated(source + ": truncated header at offset " + std::to_string(bytes.size()), bytes.size());
  }
  if (std::memcmp(bytes.data(), "HSC1", 4) != 0) throw CubeBadMagic(source + ": bad magic at offset 0", 0);
  if (bytes.size() < kCubeHeaderBytes) {
    throw CubeTruncated(source + ": truncated header at offset " + std::to_string(bytes.size()), bytes.size());
  }
  std::uint32_t dims[3];
  std::memcpy(dims, bytes.data() + 4, sizeof(dims));
  const std::uint64_t n = std::uint64_t{dims[0]} * dims[1] * dims[2];
  if (n == 0 || n > kCubeMaxValues) {
    throw CubeDimensionOverflow(source + ": dimensions " + std::to_string(dims[0]) + "x" +
                                    std::to_string(dims[1]) + "x" + std::to_string(dims[2]) +
                                    " out of range at offset 4",
                                4);
  }
  const std::uint64_t expected = kCubeHeaderBytes + 4 * n;
  if (bytes.size() < expected) {
    throw CubeTruncated(source + ": payload truncated at offset " + std::to_string(bytes.size()) +
                            ", expected " + std::to_string(expected) + " bytes",
                        bytes.size());
  }
  if (bytes.size() > expected) {
    throw CubeParseError(source + ": trailing bytes at offset " + std::to_string(expected), expected);
  }
  SpectralCube cube(dims[0], dims[1], dims[2]);
  std::memcpy(cube.values.data(), bytes.data() + kCubeHeaderBytes, n * sizeof(float));
  return cube;
}

void write_cube(const std::filesystem::path& path, const SpectralCube& cube) {
  ByteWriter w;
  const auto bytes = encode_cube(cube);
  w.bytes(bytes.data(), bytes.size());
  w.save(path);
}

SpectralCube read_cube(const std::filesystem::path& path) {
  auto r = ByteReader::load(path);
  std::vector<unsigned char> bytes(r.size());
  r.bytes(bytes.data(), bytes.size());
  return decode_cube(bytes, path.string());
}

// ---------------------------------------------------------------------------

void DatasetSplit::validate() const {
  std::set<std::string> seen;
  for (const auto* list : {&train, &val, &test}) {
    std::set<std::string> local(list->begin(), list->end());
    for (const auto& id : local) {
      if (!seen.insert(id).second) throw ContractError("split id '" + id + "' appears in more than one list");
    }
  }
}

void write_split(const std::filesystem::path& dir, const DatasetSplit& split) {
  split.validate();
  write_id_list(dir / "train.txt", split.train);
  write_id_list(dir / "val.txt", split.val);
  write_id_list(dir / "test.txt", split.test);
}

DatasetSplit read_split(const std::filesystem::path& dir) {
  DatasetSplit s;
  s.train = read_id_list(dir / "train.txt");
  s.val = read_id_list(dir / "val.txt");
  s.test = read_id_list(dir / "test.txt");
  s.validate();
  return s;
}

Corpus make_corpus(const CorpusSpec& spec) {
  if (spec.n_train + spec.n_val + spec.n_test == 0) throw ContractError("make_corpus: empty corpus");
  Corpus c;
  c.phi = gen_sensitivity(spec.bands, derive_seed(spec.seed, 0));
  c.library = gen_endmembers(spec.bands, spec.synth.n_endmembers, derive_seed(spec.seed, 1));
  const std::size_t total = spec.n_train + spec.n_val + spec.n_test;
  for (std::size_t i = 0; i < total; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "scene_%03zu", i);
    ScenePair s;
    s.id = id;
    s.cube = gen_hsi(spec.size, spec.size, c.library, derive_seed(spec.seed, 100 + i), spec.synth);
    std::optional<NoiseSpec> noise = spec.noise;
    if (noise) noise->seed = derive_seed(spec.seed, 10000 + i);
    s.rgb = project_rgb(s.cube, c.phi, noise);
    (i < spec.n_train ? c.split.train : i < spec.n_train + spec.n_val ? c.split.val : c.split.test).push_back(s.id);
    c.scenes.push_back(std::move(s));
  }
  return c;
}

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& s : corpus.scenes) {
    write_cube(dir / (s.id + ".hsc"), s.cube);
    write_png_rgb(dir / (s.id + ".png"), s.rgb);
  }
  std::ofstream out(dir / "sensitivity.csv");
  if (!out) throw IoError("cannot write " + (dir / "sensitivity.csv").string());
  out.precision(17);
  out << "wavelength_nm,r,g,b\n";
  for (std::size_t b = 0; b < corpus.phi.bands; ++b) {
    out << corpus.phi.wavelengths_nm[b] << "," << corpus.phi.at(0, b) << "," << corpus.phi.at(1, b) << ","
        << corpus.phi.at(2, b) << "\n";
  }
  write_split(dir, corpus.split);
}

std::vector<ScenePair> load_scenes(const std::filesystem::path& dir, const std::vector<std::string>& ids) {
  std::vector<ScenePair> scenes;
  for (const auto& id : ids) {
    ScenePair s;
    s.id = id;
    s.cube = read_cube(dir / (id + ".hsc"));
    s.rgb = read_png_rgb(dir / (id + ".png"));
    if (s.rgb.height != s.cube.height || s.rgb.width != s.cube.width) {
      throw DimensionError("scene " + id + ": rgb and cube sizes differ");
    }
    scenes.push_back(std::move(s));
  }
  return scenes;
}

}  // namespace hprn
