#include "hprn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hprn/ops.hpp"

namespace hprn {

namespace {

template <typename T>
Tensor<T> uniform_tensor(const Shape& shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> values(shape.numel());
  for (auto& v : values) v = static_cast<T>(dist(rng));
  return Tensor<T>::from(shape, std::move(values), true);
}

// Unfolds x [C x H x W] into [C*k*k x H*W] with zero padding (k-1)/2.
template <typename T>
void im2col(const T* x, std::size_t c, std::size_t h, std::size_t w, std::size_t k, T* col) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k - 1) / 2;
  const auto hh = static_cast<std::ptrdiff_t>(h), ww = static_cast<std::ptrdiff_t>(w);
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < c; ++ci) {
    const T* plane = x + ci * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx, ++row) {
        T* dst = col + row * h * w;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(ww, ww - dx);
        for (std::ptrdiff_t y = 0; y < hh; ++y) {
          T* out_row = dst + y * ww;
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= hh || x0 >= x1) {
            std::fill(out_row, out_row + ww, T(0));
            continue;
          }
          std::fill(out_row, out_row + x0, T(0));
          std::memcpy(out_row + x0, plane + sy * ww + x0 + dx,
                      static_cast<std::size_t>(x1 - x0) * sizeof(T));
          std::fill(out_row + x1, out_row + ww, T(0));
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates col back into dx.
template <typename T>
void col2im(const T* col, std::size_t c, std::size_t h, std::size_t w, std::size_t k, T* dx) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k - 1) / 2;
  const auto hh = static_cast<std::ptrdiff_t>(h), ww = static_cast<std::ptrdiff_t>(w);
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < c; ++ci) {
    T* plane = dx + ci * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx, ++row) {
        const T* src = col + row * h * w;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dxo = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dxo);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(ww, ww - dxo);
        for (std::ptrdiff_t y = 0; y < hh; ++y) {
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= hh) continue;
          const T* in_row = src + y * ww;
          T* out_row = plane + sy * ww + dxo;
          for (std::ptrdiff_t xx = x0; xx < x1; ++xx) out_row[xx] += in_row[xx];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void Conv2D<T>::collect(ParameterList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

template <typename T>
Conv2D<T> make_conv2d(std::size_t c_in, std::size_t c_out, std::size_t kernel, Rng& rng) {
  if (kernel % 2 == 0) throw ContractError("conv2d kernel must be odd, got " + std::to_string(kernel));
  const double bound = 1.0 / std::sqrt(static_cast<double>(c_in * kernel * kernel));
  Conv2D<T> layer;
  layer.weight = uniform_tensor<T>(Shape{c_out, c_in, kernel, kernel}, bound, rng);
  layer.bias = Tensor<T>::zeros(Shape{c_out}, true);
  return layer;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Conv2D<T>& layer) {
  if (x.rank() != 3 || x.dim(0) != layer.in_channels()) {
    throw DimensionError("conv2d: input " + x.shape().str() + " does not match weight " +
                         layer.weight.shape().str());
  }
  const std::size_t c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t c_out = layer.out_channels(), k = layer.kernel();
  const std::size_t hw = h * w, rows = c_in * k * k;

  std::vector<T> col;
  const T* col_ptr = x.data().data();
  if (k != 1) {
    col.resize(rows * hw);
    im2col(x.data().data(), c_in, h, w, k, col.data());
    col_ptr = col.data();
  }
  std::vector<T> out(c_out * hw);
  const T* b = layer.bias.data().data();
  for (std::size_t co = 0; co < c_out; ++co) std::fill_n(out.data() + co * hw, hw, b[co]);
  gemm<T>(false, false, c_out, hw, rows, T(1), layer.weight.data().data(), col_ptr, T(1),
          out.data());

  return make_result<T>(Shape{c_out, h, w}, std::move(out), {x, layer.weight, layer.bias},
                        [c_in, c_out, h, w, k, hw, rows](TensorNode<T>& self) {
    auto& nx = *self.parents[0];
    auto& nw = *self.parents[1];
    auto& nb = *self.parents[2];
    const T* g = self.grad.data();
    if (nb.requires_grad) {
      for (std::size_t co = 0; co < c_out; ++co) {
        T acc = T(0);
        for (std::size_t i = 0; i < hw; ++i) acc += g[co * hw + i];
        nb.grad[co] += acc;
      }
    }
    std::vector<T> col;
    const T* col_ptr = nx.data.data();
    if (k != 1 && nw.requires_grad) {
      col.resize(rows * hw);
      im2col(nx.data.data(), c_in, h, w, k, col.data());
      col_ptr = col.data();
    }
    if (nw.requires_grad) {
      gemm<T>(false, true, c_out, rows, hw, T(1), g, col_ptr, T(1), nw.grad.data());
    }
    if (nx.requires_grad) {
      if (k == 1) {
        gemm<T>(true, false, rows, hw, c_out, T(1), nw.data.data(), g, T(1), nx.grad.data());
      } else {
        std::vector<T> dcol(rows * hw);
        gemm<T>(true, false, rows, hw, c_out, T(1), nw.data.data(), g, T(0), dcol.data());
        col2im(dcol.data(), c_in, h, w, k, nx.grad.data());
      }
    }
  });
}

template <typename T>
void Linear<T>::collect(ParameterList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

template <typename T>
Linear<T> make_linear(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear<T> layer;
  layer.weight = uniform_tensor<T>(Shape{out, in}, bound, rng);
  layer.bias = Tensor<T>::zeros(Shape{out}, true);
  return layer;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Linear<T>& layer) {
  const std::size_t in = layer.weight.dim(1), out_dim = layer.weight.dim(0);
  if (x.rank() != 2 || x.dim(1) != in) {
    throw DimensionError("linear: input " + x.shape().str() + " does not match weight " +
                         layer.weight.shape().str());
  }
  const std::size_t n = x.dim(0);
  std::vector<T> out(n * out_dim);
  const T* b = layer.bias.data().data();
  for (std::size_t i = 0; i < n; ++i) std::copy_n(b, out_dim, out.data() + i * out_dim);
  gemm<T>(false, true, n, out_dim, in, T(1), x.data().data(), layer.weight.data().data(), T(1),
          out.data());
  return make_result<T>(Shape{n, out_dim}, std::move(out), {x, layer.weight, layer.bias},
                        [n, in, out_dim](TensorNode<T>& self) {
    auto& nx = *self.parents[0];
    auto& nw = *self.parents[1];
    auto& nb = *self.parents[2];
    const T* g = self.grad.data();
    if (nx.requires_grad) {
      gemm<T>(false, false, n, in, out_dim, T(1), g, nw.data.data(), T(1), nx.grad.data());
    }
    if (nw.requires_grad) {
      gemm<T>(true, false, out_dim, in, n, T(1), g, nx.data.data(), T(1), nw.grad.data());
    }
    if (nb.requires_grad) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < out_dim; ++j) nb.grad[j] += g[i * out_dim + j];
      }
    }
  });
}

template <typename T>
void PReLU<T>::collect(ParameterList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".slope", slope});
}

template <typename T>
PReLU<T> make_prelu(std::size_t channels) {
  return {Tensor<T>::full(Shape{channels}, static_cast<T>(kPReLUInitialSlope), true)};
}

template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope) {
  if (x.rank() == 0) throw DimensionError("prelu: scalar input");
  const std::size_t c = x.dim(0);
  if (slope.numel() != c && slope.numel() != 1) {
    throw DimensionError("prelu: slope " + slope.shape().str() + " for input " + x.shape().str());
  }
  const std::size_t inner = x.numel() / c;
  const bool shared = slope.numel() == 1;
  std::vector<T> out(x.numel());
  const T* src = x.data().data();
  const T* a = slope.data().data();
  const bool trace = KinkTrace::active();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T s = a[shared ? 0 : ch];
    for (std::size_t i = ch * inner; i < (ch + 1) * inner; ++i) {
      out[i] = src[i] > T(0) ? src[i] : s * src[i];
      if (trace) KinkTrace::record(src[i] > T(0));
    }
  }
  return make_result<T>(x.shape(), std::move(out), {x, slope},
                        [c, inner, shared](TensorNode<T>& self) {
    auto& nx = *self.parents[0];
    auto& ns = *self.parents[1];
    const T* g = self.grad.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t si = shared ? 0 : ch;
      const T s = ns.data[si];
      T ds = T(0);
      for (std::size_t i = ch * inner; i < (ch + 1) * inner; ++i) {
        const T v = nx.data[i];
        if (v > T(0)) {
          if (nx.requires_grad) nx.grad[i] += g[i];
        } else {
          if (nx.requires_grad) nx.grad[i] += s * g[i];
          ds += v * g[i];
        }
      }
      if (ns.requires_grad) ns.grad[si] += ds;
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  const T* src = x.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-src[i]));
  return make_result<T>(x.shape(), std::move(out), {x}, [](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T y = self.data[i];
      p.grad[i] += self.grad[i] * y * (T(1) - y);
    }
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         x.shape().str());
  }
  const auto& dims = x.shape().dims();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= dims[i];
  for (std::size_t i = axis + 1; i < dims.size(); ++i) inner *= dims[i];
  const std::size_t len = dims[axis];
  std::vector<T> out(x.numel());
  const T* src = x.data().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t q = 0; q < inner; ++q) {
      const std::size_t base = o * len * inner + q;
      T mx = src[base];
      for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, src[base + j * inner]);
      T total = T(0);
      for (std::size_t j = 0; j < len; ++j) {
        const T e = std::exp(src[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= total;
    }
  }
  return make_result<T>(x.shape(), std::move(out), {x},
                        [outer, inner, len](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    const T* y = self.data.data();
    const T* g = self.grad.data();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t q = 0; q < inner; ++q) {
        const std::size_t base = o * len * inner + q;
        T dot = T(0);
        for (std::size_t j = 0; j < len; ++j) dot += g[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t i = base + j * inner;
          p.grad[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> local_avg_pool(const Tensor<T>& x, std::size_t grid_h, std::size_t grid_w) {
  if (x.rank() != 3) throw DimensionError("local_avg_pool: expected CxHxW, got " + x.shape().str());
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (grid_h == 0 || grid_w == 0 || grid_h > h || grid_w > w) {
    throw ContractError("local_avg_pool: grid " + std::to_string(grid_h) + "x" +
                        std::to_string(grid_w) + " does not fit input " + x.shape().str());
  }
  std::vector<std::size_t> ys(grid_h + 1), xs(grid_w + 1);
  for (std::size_t i = 0; i <= grid_h; ++i) ys[i] = i * h / grid_h;
  for (std::size_t j = 0; j <= grid_w; ++j) xs[j] = j * w / grid_w;

  std::vector<T> out(c * grid_h * grid_w);
  const T* src = x.data().data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < grid_h; ++i) {
      for (std::size_t j = 0; j < grid_w; ++j) {
        T acc = T(0);
        for (std::size_t y = ys[i]; y < ys[i + 1]; ++y) {
          for (std::size_t xx = xs[j]; xx < xs[j + 1]; ++xx) acc += src[(ch * h + y) * w + xx];
        }
        const auto count = static_cast<T>((ys[i + 1] - ys[i]) * (xs[j + 1] - xs[j]));
        out[(ch * grid_h + i) * grid_w + j] = acc / count;
      }
    }
  }
  return make_result<T>(Shape{c, grid_h, grid_w}, std::move(out), {x},
                        [c, h, w, grid_h, grid_w, ys, xs](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < grid_h; ++i) {
        for (std::size_t j = 0; j < grid_w; ++j) {
          const auto count = static_cast<T>((ys[i + 1] - ys[i]) * (xs[j + 1] - xs[j]));
          const T g = self.grad[(ch * grid_h + i) * grid_w + j] / count;
          for (std::size_t y = ys[i]; y < ys[i + 1]; ++y) {
            for (std::size_t xx = xs[j]; xx < xs[j + 1]; ++xx) p.grad[(ch * h + y) * w + xx] += g;
          }
        }
      }
    }
  });
}

template <typename T>
void MultiHeadAttention<T>::collect(ParameterList<T>& out, const std::string& prefix) const {
  query.collect(out, prefix + ".query");
  key.collect(out, prefix + ".key");
  value.collect(out, prefix + ".value");
  output.collect(out, prefix + ".output");
}

template <typename T>
MultiHeadAttention<T> make_multi_head_attention(std::size_t dim, std::size_t heads, bool scaling,
                                                Rng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw ContractError("attention dim " + std::to_string(dim) + " not divisible by " +
                        std::to_string(heads) + " heads");
  }
  MultiHeadAttention<T> mha;
  mha.dim = dim;
  mha.heads = heads;
  mha.scaling = scaling;
  mha.query = make_linear<T>(dim, dim, rng);
  mha.key = make_linear<T>(dim, dim, rng);
  mha.value = make_linear<T>(dim, dim, rng);
  mha.output = make_linear<T>(dim, dim, rng);
  return mha;
}

template <typename T>
Tensor<T> multi_head_self_attention(const Tensor<T>& tokens, const MultiHeadAttention<T>& mha,
                                    Tensor<T>* attention) {
  if (mha.heads == 0 || mha.dim % mha.heads != 0) {
    throw ContractError("attention dim " + std::to_string(mha.dim) + " not divisible by " +
                        std::to_string(mha.heads) + " heads");
  }
  if (tokens.rank() != 2 || tokens.dim(1) != mha.dim) {
    throw DimensionError("attention: tokens " + tokens.shape().str() + " for dim " +
                         std::to_string(mha.dim));
  }
  const std::size_t n = tokens.dim(0), h = mha.heads, dh = mha.dim / mha.heads;
  const Shape split{n, h, dh};
  auto q = permute(reshape(linear(tokens, mha.query), split), {1, 0, 2});  // h x n x dh
  auto k = permute(reshape(linear(tokens, mha.key), split), {1, 2, 0});    // h x dh x n
  auto v = permute(reshape(linear(tokens, mha.value), split), {1, 0, 2});  // h x n x dh
  auto logits = batched_matmul(q, k);
  if (mha.scaling) logits = scale(logits, T(1) / std::sqrt(static_cast<T>(dh)));
  auto weights = softmax(logits, 2);
  if (attention) *attention = weights;
  auto context = reshape(permute(batched_matmul(weights, v), {1, 0, 2}), Shape{n, mha.dim});
  return linear(context, mha.output);
}

#define HPRN_INSTANTIATE_NN(T)                                                                 \
  template struct Conv2D<T>;                                                                   \
  template struct Linear<T>;                                                                   \
  template struct PReLU<T>;                                                                    \
  template struct MultiHeadAttention<T>;                                                       \
  template Conv2D<T> make_conv2d(std::size_t, std::size_t, std::size_t, Rng&);                 \
  template Tensor<T> conv2d(const Tensor<T>&, const Conv2D<T>&);                               \
  template Linear<T> make_linear(std::size_t, std::size_t, Rng&);                              \
  template Tensor<T> linear(const Tensor<T>&, const Linear<T>&);                               \
  template PReLU<T> make_prelu(std::size_t);                                                   \
  template Tensor<T> prelu(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                   \
  template Tensor<T> local_avg_pool(const Tensor<T>&, std::size_t, std::size_t);               \
  template MultiHeadAttention<T> make_multi_head_attention(std::size_t, std::size_t, bool, Rng&); \
  template Tensor<T> multi_head_self_attention(const Tensor<T>&, const MultiHeadAttention<T>&, \
                                               Tensor<T>*);

HPRN_INSTANTIATE_NN(float)
HPRN_INSTANTIATE_NN(double)

}  // namespace hprn
