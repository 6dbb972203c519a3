#include "hprn/slic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

namespace hprn {

void LabelMap::validate() const {
  if (labels.size() != height * width) {
    throw ContractError("label map holds " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(height) + "x" + std::to_string(width));
  }
  for (auto l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_labels) {
      throw ContractError("label " + std::to_string(l) + " outside [0," + std::to_string(n_labels) + ")");
    }
  }
}

void srgb_to_lab(double r, double g, double b, double& l, double& a, double& bb) {
  auto linear = [](double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
  };
  const double rl = linear(r), gl = linear(g), bl = linear(b);
  // D65 reference white.
  const double x = (0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl) / 0.95047;
  const double y = (0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl) / 1.0;
  const double z = (0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl) / 1.08883;
  auto f = [](double t) {
    constexpr double eps = 216.0 / 24389.0, kappa = 24389.0 / 27.0;
    return t > eps ? std::cbrt(t) : (kappa * t + 16.0) / 116.0;
  };
  const double fx = f(x), fy = f(y), fz = f(z);
  l = 116.0 * fy - 16.0;
  a = 500.0 * (fx - fy);
  bb = 200.0 * (fy - fz);
}

namespace {

struct Center {
  std::array<double, 3> color;
  double y = 0;
  double x = 0;
};

std::vector<std::array<double, 3>> pixel_colors(const RgbImage& rgb, bool use_lab) {
  const std::size_t n = rgb.height * rgb.width;
  std::vector<std::array<double, 3>> colors(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double r = rgb.values[p], g = rgb.values[n + p], b = rgb.values[2 * n + p];
    if (use_lab) {
      srgb_to_lab(r, g, b, colors[p][0], colors[p][1], colors[p][2]);
    } else {
      colors[p] = {100.0 * r, 100.0 * g, 100.0 * b};
    }
  }
  return colors;
}

double color_distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
  return std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
}

// Moves a seed to the lowest-gradient pixel of its 3x3 neighbourhood.
void perturb_seed(Center& c, const std::vector<std::array<double, 3>>& colors, std::size_t h,
                  std::size_t w) {
  auto gradient = [&](std::size_t y, std::size_t x) {
    if (y == 0 || x == 0 || y + 1 >= h || x + 1 >= w) return std::numeric_limits<double>::infinity();
    const auto& l = colors[y * w + x - 1];
    const auto& r = colors[y * w + x + 1];
    const auto& u = colors[(y - 1) * w + x];
    const auto& d = colors[(y + 1) * w + x];
    const double gx = color_distance(l, r), gy = color_distance(u, d);
    return gx * gx + gy * gy;
  };
  const auto cy = static_cast<std::size_t>(c.y), cx = static_cast<std::size_t>(c.x);
  double best = gradient(cy, cx);
  std::size_t by = cy, bx = cx;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const auto ny = static_cast<std::ptrdiff_t>(cy) + dy;
      const auto nx = static_cast<std::ptrdiff_t>(cx) + dx;
      if (ny < 0 || nx < 0 || ny >= static_cast<std::ptrdiff_t>(h) || nx >= static_cast<std::ptrdiff_t>(w)) {
        continue;
      }
      const double g = gradient(static_cast<std::size_t>(ny), static_cast<std::size_t>(nx));
      if (g < best) {
        best = g;
        by = static_cast<std::size_t>(ny);
        bx = static_cast<std::size_t>(nx);
      }
    }
  }
  c.color = colors[by * w + bx];
  if (by == cy && bx == cx) return;  // grid position kept when nothing is strictly flatter
  c.y = static_cast<double>(by) + 0.5;
  c.x = static_cast<double>(bx) + 0.5;
}

}  // namespace

LabelMap slic_segment(const RgbImage& rgb, const SlicParams& params) {
  const std::size_t h = rgb.height, w = rgb.width, n = h * w;
  if (params.scale < 1 || params.scale > n) {
    throw ContractError("slic: scale " + std::to_string(params.scale) + " outside [1," +
                        std::to_string(n) + "]");
  }
  if (!(params.compactness > 0) || params.max_iters < 1) {
    throw ContractError("slic: compactness must be > 0 and max_iters >= 1");
  }
  if (rgb.values.size() != 3 * n) throw ContractError("slic: RGB buffer size mismatch");

  const auto colors = pixel_colors(rgb, params.use_lab);
  const double k = static_cast<double>(params.scale);
  const double step = std::sqrt(static_cast<double>(n) / k);

  // Grid of ny x nx seeds approximating K with the image's aspect ratio.
  std::size_t ny = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(
                                                 std::sqrt(k * static_cast<double>(h) / static_cast<double>(w)))));
  ny = std::min(ny, h);
  std::size_t nx = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(k / static_cast<double>(ny))));
  nx = std::min(nx, w);

  std::vector<Center> centers;
  centers.reserve(ny * nx);
  for (std::size_t i = 0; i < ny; ++i) {
    for (std::size_t j = 0; j < nx; ++j) {
      Center c;
      c.y = (static_cast<double>(i) + 0.5) * static_cast<double>(h) / static_cast<double>(ny);
      c.x = (static_cast<double>(j) + 0.5) * static_cast<double>(w) / static_cast<double>(nx);
      perturb_seed(c, colors, h, w);
      centers.push_back(c);
    }
  }

  const double m = params.compactness;
  std::vector<std::int32_t> labels(n, -1);
  std::vector<double> best(n);
  auto distance = [&](const Center& c, std::size_t y, std::size_t x) {
    const double dy = static_cast<double>(y) + 0.5 - c.y;
    const double dx = static_cast<double>(x) + 0.5 - c.x;
    return color_distance(colors[y * w + x], c.color) + m * std::sqrt(dy * dy + dx * dx) / step;
  };

  for (std::size_t iter = 0; iter < params.max_iters; ++iter) {
    std::fill(labels.begin(), labels.end(), -1);
    std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
      const Center& c = centers[ci];
      const auto y0 = static_cast<std::ptrdiff_t>(std::floor(c.y - step));
      const auto y1 = static_cast<std::ptrdiff_t>(std::ceil(c.y + step));
      const auto x0 = static_cast<std::ptrdiff_t>(std::floor(c.x - step));
      const auto x1 = static_cast<std::ptrdiff_t>(std::ceil(c.x + step));
      for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(0, y0); y < std::min<std::ptrdiff_t>(h, y1); ++y) {
        for (std::ptrdiff_t x = std::max<std::ptrdiff_t>(0, x0); x < std::min<std::ptrdiff_t>(w, x1); ++x) {
          const auto p = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
          const double d = distance(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
          if (d < best[p]) {
            best[p] = d;
            labels[p] = static_cast<std::int32_t>(ci);
          }
        }
      }
    }
    // Pixels outside every window fall back to the globally nearest centre.
    for (std::size_t p = 0; p < n; ++p) {
      if (labels[p] >= 0) continue;
      for (std::size_t ci = 0; ci < centers.size(); ++ci) {
        const double d = distance(centers[ci], p / w, p % w);
        if (d < best[p]) {
          best[p] = d;
          labels[p] = static_cast<std::int32_t>(ci);
        }
      }
    }

    std::vector<Center> sums(centers.size(), Center{{0, 0, 0}, 0, 0});
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t p = 0; p < n; ++p) {
      auto& s = sums[static_cast<std::size_t>(labels[p])];
      for (int q = 0; q < 3; ++q) s.color[q] += colors[p][q];
      s.y += static_cast<double>(p / w) + 0.5;
      s.x += static_cast<double>(p % w) + 0.5;
      ++counts[static_cast<std::size_t>(labels[p])];
    }
    double movement = 0.0;
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
      if (counts[ci] == 0) continue;
      const double inv = 1.0 / static_cast<double>(counts[ci]);
      Center next{{sums[ci].color[0] * inv, sums[ci].color[1] * inv, sums[ci].color[2] * inv},
                  sums[ci].y * inv, sums[ci].x * inv};
      const double dy = (next.y - centers[ci].y) / step, dx = (next.x - centers[ci].x) / step;
      const double dc = color_distance(next.color, centers[ci].color);
      movement = std::max(movement, std::sqrt(dc * dc + dy * dy + dx * dx));
      centers[ci] = next;
    }
    if (movement < params.convergence) break;
  }

  LabelMap raw;
  raw.height = h;
  raw.width = w;
  raw.labels = std::move(labels);
  raw.n_labels = centers.size();
  raw.scale = params.scale;
  return enforce_connectivity(raw);
}

LabelMap enforce_connectivity(const LabelMap& map) {
  map.validate();
  const std::size_t h = map.height, w = map.width, n = h * w;

  // 4-connected components of equal label, numbered in raster discovery order.
  std::vector<std::size_t> comp(n, SIZE_MAX);
  std::vector<std::size_t> size;
  std::vector<std::size_t> stack;
  for (std::size_t p = 0; p < n; ++p) {
    if (comp[p] != SIZE_MAX) continue;
    const std::size_t id = size.size();
    size.push_back(0);
    comp[p] = id;
    stack.push_back(p);
    while (!stack.empty()) {
      const std::size_t q = stack.back();
      stack.pop_back();
      ++size[id];
      const std::size_t y = q / w, x = q % w;
      auto visit = [&](std::size_t r) {
        if (comp[r] == SIZE_MAX && map.labels[r] == map.labels[q]) {
          comp[r] = id;
          stack.push_back(r);
        }
      };
      if (x > 0) visit(q - 1);
      if (x + 1 < w) visit(q + 1);
      if (y > 0) visit(q - w);
      if (y + 1 < h) visit(q + w);
    }
  }

  const std::size_t nc = size.size();
  std::vector<std::set<std::size_t>> adjacent(nc);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t x = p % w;
    if (x + 1 < w && comp[p] != comp[p + 1]) {
      adjacent[comp[p]].insert(comp[p + 1]);
      adjacent[comp[p + 1]].insert(comp[p]);
    }
    if (p + w < n && comp[p] != comp[p + w]) {
      adjacent[comp[p]].insert(comp[p + w]);
      adjacent[comp[p + w]].insert(comp[p]);
    }
  }

  std::vector<std::size_t> parent(nc);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t c) {
    while (parent[c] != c) {
      parent[c] = parent[parent[c]];
      c = parent[c];
    }
    return c;
  };

  const double min_size = static_cast<double>(n) / static_cast<double>(std::max<std::size_t>(1, map.scale)) / 4.0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t c = 0; c < nc; ++c) {
      if (find(c) != c || static_cast<double>(size[c]) >= min_size) continue;
      std::size_t target = SIZE_MAX;
      for (std::size_t nb : adjacent[c]) {
        const std::size_t r = find(nb);
        if (r == c) continue;
        if (target == SIZE_MAX || size[r] > size[target] || (size[r] == size[target] && r < target)) {
          target = r;
        }
      }
      if (target == SIZE_MAX) continue;
      parent[c] = target;
      size[target] += size[c];
      adjacent[target].insert(adjacent[c].begin(), adjacent[c].end());
      adjacent[c].clear();
      changed = true;
    }
  }

  LabelMap out;
  out.height = h;
  out.width = w;
  out.scale = map.scale;
  out.labels.assign(n, -1);
  std::vector<std::int32_t> dense(nc, -1);
  std::int32_t next = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t r = find(comp[p]);
    if (dense[r] < 0) dense[r] = next++;
    out.labels[p] = dense[r];
  }
  out.n_labels = static_cast<std::size_t>(next);
  return out;
}

std::vector<LabelMap> multiscale_labels(const RgbImage& rgb, const std::vector<std::size_t>& scales,
                                        const SlicParams& base) {
  if (scales.empty()) throw ContractError("multiscale_labels: no scales requested");
  std::vector<LabelMap> maps;
  maps.reserve(scales.size());
  for (std::size_t s : scales) {
    SlicParams p = base;
    p.scale = s;
    maps.push_back(slic_segment(rgb, p));
  }
  return maps;
}

}  // namespace hprn
