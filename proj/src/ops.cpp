#include "hprn/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hprn {

template <>
void gemm<float>(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                 float alpha, const float* a, const float* b, float beta, float* c) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), alpha, a, static_cast<int>(trans_a ? m : k), b,
              static_cast<int>(trans_b ? k : n), beta, c, static_cast<int>(n));
}

template <>
void gemm<double>(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                  double alpha, const double* a, const double* b, double beta, double* c) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), alpha, a, static_cast<int>(trans_a ? m : k), b,
              static_cast<int>(trans_b ? k : n), beta, c, static_cast<int>(n));
}

namespace {

std::vector<std::size_t> row_major_strides(const std::vector<std::size_t>& dims) {
  std::vector<std::size_t> s(dims.size(), 1);
  for (std::size_t i = dims.size(); i-- > 1;) s[i - 1] = s[i] * dims[i];
  return s;
}

// Two-operand strided walk over `dims`; strides of 0 broadcast.
struct StridedPlan {
  std::vector<std::size_t> dims;
  std::vector<std::size_t> sa;
  std::vector<std::size_t> sb;
};

template <class F>
void strided_for_each(const StridedPlan& p, F&& f) {
  const std::size_t r = p.dims.size();
  std::size_t total = 1;
  for (std::size_t d : p.dims) total *= d;
  std::vector<std::size_t> ctr(r, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < total; ++i) {
    f(i, ia, ib);
    for (std::size_t ax = r; ax-- > 0;) {
      ++ctr[ax];
      ia += p.sa[ax];
      ib += p.sb[ax];
      if (ctr[ax] < p.dims[ax]) break;
      ia -= p.sa[ax] * p.dims[ax];
      ib -= p.sb[ax] * p.dims[ax];
      ctr[ax] = 0;
    }
  }
}

// Right-aligned broadcast of a and b.
StridedPlan broadcast_plan(const Shape& a, const Shape& b, Shape& out) {
  const std::size_t r = std::max(a.rank(), b.rank());
  StridedPlan p;
  p.dims.assign(r, 1);
  p.sa.assign(r, 0);
  p.sb.assign(r, 0);
  auto sa = row_major_strides(a.dims());
  auto sb = row_major_strides(b.dims());
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t off_a = r - a.rank(), off_b = r - b.rank();
    std::size_t da = i >= off_a ? a[i - off_a] : 1;
    std::size_t db = i >= off_b ? b[i - off_b] : 1;
    if (da != db && da != 1 && db != 1) {
      throw DimensionError("cannot broadcast shapes " + a.str() + " and " + b.str());
    }
    p.dims[i] = std::max(da, db);
    if (i >= off_a && da != 1) p.sa[i] = sa[i - off_a];
    if (i >= off_b && db != 1) p.sb[i] = sb[i - off_b];
  }
  out = Shape(p.dims);
  return p;
}

enum class BinaryKind { add, sub, mul, div };

template <typename T>
T guard_denominator(T d, std::uint64_t& hits) {
  const T g = static_cast<T>(kDivisionGuard);
  if (std::abs(d) >= g) return d;
  ++hits;
  return d < T(0) ? -g : g;
}

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinaryKind kind) {
  Shape out_shape;
  StridedPlan plan = broadcast_plan(a.shape(), b.shape(), out_shape);
  std::vector<T> out(out_shape.numel());
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  std::uint64_t hits = 0;
  const bool same = a.shape() == b.shape();
  auto apply = [&](std::size_t i, std::size_t ia, std::size_t ib) {
    switch (kind) {
      case BinaryKind::add: out[i] = pa[ia] + pb[ib]; break;
      case BinaryKind::sub: out[i] = pa[ia] - pb[ib]; break;
      case BinaryKind::mul: out[i] = pa[ia] * pb[ib]; break;
      case BinaryKind::div: out[i] = pa[ia] / guard_denominator(pb[ib], hits); break;
    }
  };
  if (same) {
    for (std::size_t i = 0; i < out.size(); ++i) apply(i, i, i);
  } else {
    strided_for_each(plan, apply);
  }
  if (hits) record_division_guard_hit(hits);

  return make_result<T>(out_shape, std::move(out), {a, b},
                        [plan, kind, same](TensorNode<T>& self) {
    auto& na = *self.parents[0];
    auto& nb = *self.parents[1];
    const T* g = self.grad.data();
    std::uint64_t unused = 0;
    auto step = [&](std::size_t i, std::size_t ia, std::size_t ib) {
      switch (kind) {
        case BinaryKind::add:
          if (na.requires_grad) na.grad[ia] += g[i];
          if (nb.requires_grad) nb.grad[ib] += g[i];
          break;
        case BinaryKind::sub:
          if (na.requires_grad) na.grad[ia] += g[i];
          if (nb.requires_grad) nb.grad[ib] -= g[i];
          break;
        case BinaryKind::mul:
          if (na.requires_grad) na.grad[ia] += g[i] * nb.data[ib];
          if (nb.requires_grad) nb.grad[ib] += g[i] * na.data[ia];
          break;
        case BinaryKind::div: {
          const T d = nb.data[ib];
          const T dg = guard_denominator(d, unused);
          if (na.requires_grad) na.grad[ia] += g[i] / dg;
          // Clamped denominators are constants.
          if (nb.requires_grad && dg == d) nb.grad[ib] -= g[i] * na.data[ia] / (d * d);
          break;
        }
      }
    };
    if (same) {
      for (std::size_t i = 0; i < self.data.size(); ++i) step(i, i, i);
    } else {
      strided_for_each(plan, step);
    }
  });
}

void check_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.rank()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + s.str());
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + a.shape().str() + " and " +
                         b.shape().str());
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n);
  gemm<T>(false, false, m, n, k, T(1), a.data().data(), b.data().data(), T(0), out.data());
  return make_result<T>(Shape{m, n}, std::move(out), {a, b}, [m, k, n](TensorNode<T>& self) {
    auto& na = *self.parents[0];
    auto& nb = *self.parents[1];
    if (na.requires_grad) {
      gemm<T>(false, true, m, k, n, T(1), self.grad.data(), nb.data.data(), T(1), na.grad.data());
    }
    if (nb.requires_grad) {
      gemm<T>(true, false, k, n, m, T(1), na.data.data(), self.grad.data(), T(1), nb.grad.data());
    }
  });
}

template <typename T>
Tensor<T> batched_matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    throw DimensionError("batched_matmul: incompatible shapes " + a.shape().str() + " and " +
                         b.shape().str());
  }
  const std::size_t g = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  std::vector<T> out(g * m * n);
  for (std::size_t i = 0; i < g; ++i) {
    gemm<T>(false, false, m, n, k, T(1), a.data().data() + i * m * k,
            b.data().data() + i * k * n, T(0), out.data() + i * m * n);
  }
  return make_result<T>(Shape{g, m, n}, std::move(out), {a, b},
                        [g, m, k, n](TensorNode<T>& self) {
    auto& na = *self.parents[0];
    auto& nb = *self.parents[1];
    for (std::size_t i = 0; i < g; ++i) {
      const T* dc = self.grad.data() + i * m * n;
      if (na.requires_grad) {
        gemm<T>(false, true, m, k, n, T(1), dc, nb.data.data() + i * k * n, T(1),
                na.grad.data() + i * m * k);
      }
      if (nb.requires_grad) {
        gemm<T>(true, false, k, n, m, T(1), na.data.data() + i * m * k, dc, T(1),
                nb.grad.data() + i * k * n);
      }
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& t, const Shape& shape) {
  if (shape.numel() != t.numel()) {
    throw DimensionError("reshape: cannot view " + t.shape().str() + " as " + shape.str());
  }
  std::vector<T> out(t.data().begin(), t.data().end());
  return make_result<T>(shape, std::move(out), {t}, [](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> permute(const Tensor<T>& t, const std::vector<std::size_t>& axes) {
  const std::size_t r = t.rank();
  std::vector<bool> used(r, false);
  if (axes.size() != r) {
    throw DimensionError("permute: " + std::to_string(axes.size()) + " axes for shape " +
                         t.shape().str());
  }
  for (std::size_t ax : axes) {
    if (ax >= r || used[ax]) {
      throw DimensionError("permute: invalid axis permutation for shape " + t.shape().str());
    }
    used[ax] = true;
  }
  auto in_strides = row_major_strides(t.shape().dims());
  StridedPlan plan;
  plan.dims.resize(r);
  plan.sa.resize(r);
  plan.sb.assign(r, 0);
  for (std::size_t i = 0; i < r; ++i) {
    plan.dims[i] = t.dim(axes[i]);
    plan.sa[i] = in_strides[axes[i]];
  }
  std::vector<T> out(t.numel());
  const T* src = t.data().data();
  strided_for_each(plan, [&](std::size_t i, std::size_t ia, std::size_t) { out[i] = src[ia]; });
  return make_result<T>(Shape(plan.dims), std::move(out), {t}, [plan](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    strided_for_each(plan, [&](std::size_t i, std::size_t ia, std::size_t) {
      p.grad[ia] += self.grad[i];
    });
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& t) {
  if (t.rank() < 2) throw DimensionError("transpose: rank < 2 for shape " + t.shape().str());
  std::vector<std::size_t> axes(t.rank());
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[t.rank() - 1], axes[t.rank() - 2]);
  return permute(t, axes);
}

template <typename T>
Tensor<T> index_select(const Tensor<T>& t, std::size_t axis,
                       const std::vector<std::size_t>& indices) {
  check_axis(t.shape(), axis, "index_select");
  const auto& dims = t.shape().dims();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= dims[i];
  for (std::size_t i = axis + 1; i < dims.size(); ++i) inner *= dims[i];
  const std::size_t len = dims[axis];
  for (std::size_t idx : indices) {
    if (idx >= len) {
      throw DimensionError("index_select: index " + std::to_string(idx) + " out of range for axis " +
                           std::to_string(axis) + " of " + t.shape().str());
    }
  }
  const std::size_t n = indices.size();
  std::vector<std::size_t> out_dims = dims;
  out_dims[axis] = n;
  std::vector<T> out(outer * n * inner);
  const T* src = t.data().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < n; ++j) {
      std::copy_n(src + (o * len + indices[j]) * inner, inner, out.data() + (o * n + j) * inner);
    }
  }
  return make_result<T>(Shape(out_dims), std::move(out), {t},
                        [indices, outer, inner, len](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    const std::size_t n = indices.size();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = 0; j < n; ++j) {
        const T* g = self.grad.data() + (o * n + j) * inner;
        T* dst = p.grad.data() + (o * len + indices[j]) * inner;
        for (std::size_t q = 0; q < inner; ++q) dst[q] += g[q];
      }
    }
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& first = parts.front().shape();
  check_axis(first, axis, "concat");
  std::vector<std::size_t> out_dims = first.dims();
  out_dims[axis] = 0;
  std::vector<std::size_t> lens;
  for (const auto& p : parts) {
    bool ok = p.rank() == first.rank();
    for (std::size_t i = 0; ok && i < first.rank(); ++i) {
      if (i != axis && p.dim(i) != first[i]) ok = false;
    }
    if (!ok) {
      throw DimensionError("concat: shape " + p.shape().str() + " incompatible with " +
                           first.str() + " along axis " + std::to_string(axis));
    }
    lens.push_back(p.dim(axis));
    out_dims[axis] += p.dim(axis);
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= out_dims[i];
  for (std::size_t i = axis + 1; i < out_dims.size(); ++i) inner *= out_dims[i];
  const std::size_t total = out_dims[axis];
  std::vector<T> out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const T* src = parts[k].data().data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src + o * lens[k] * inner, lens[k] * inner,
                  out.data() + (o * total + offset) * inner);
    }
    offset += lens[k];
  }
  return make_result<T>(Shape(out_dims), std::move(out), parts,
                        [lens, outer, inner, total](TensorNode<T>& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < lens.size(); ++k) {
      auto& p = *self.parents[k];
      if (p.requires_grad) {
        for (std::size_t o = 0; o < outer; ++o) {
          const T* g = self.grad.data() + (o * total + offset) * inner;
          T* dst = p.grad.data() + o * lens[k] * inner;
          for (std::size_t q = 0; q < lens[k] * inner; ++q) dst[q] += g[q];
        }
      }
      offset += lens[k];
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) { return binary(a, b, BinaryKind::add); }
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) { return binary(a, b, BinaryKind::sub); }
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) { return binary(a, b, BinaryKind::mul); }
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) { return binary(a, b, BinaryKind::div); }

template <typename T>
Tensor<T> abs(const Tensor<T>& t) {
  std::vector<T> out(t.numel());
  const T* src = t.data().data();
  const bool trace = KinkTrace::active();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::abs(src[i]);
    if (trace) KinkTrace::record(src[i] > T(0));
  }
  return make_result<T>(t.shape(), std::move(out), {t}, [](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T x = p.data[i];
      p.grad[i] += x > T(0) ? self.grad[i] : (x < T(0) ? -self.grad[i] : T(0));
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& t, T factor) {
  std::vector<T> out(t.numel());
  const T* src = t.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = src[i] * factor;
  return make_result<T>(t.shape(), std::move(out), {t}, [factor](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& t, T value) {
  std::vector<T> out(t.numel());
  const T* src = t.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = src[i] + value;
  return make_result<T>(t.shape(), std::move(out), {t}, [](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& t, const std::vector<std::size_t>& axes, bool keepdims) {
  const std::size_t r = t.rank();
  std::vector<bool> reduced(r, false);
  for (std::size_t ax : axes) {
    check_axis(t.shape(), ax, "sum");
    if (reduced[ax]) throw DimensionError("sum: axis " + std::to_string(ax) + " repeated");
    reduced[ax] = true;
  }
  std::vector<std::size_t> kept(r);
  std::vector<std::size_t> squeezed;
  for (std::size_t i = 0; i < r; ++i) {
    kept[i] = reduced[i] ? 1 : t.dim(i);
    if (!reduced[i]) squeezed.push_back(t.dim(i));
  }
  auto out_strides = row_major_strides(kept);
  StridedPlan plan;
  plan.dims = t.shape().dims();
  plan.sa.resize(r);
  plan.sb = row_major_strides(plan.dims);
  for (std::size_t i = 0; i < r; ++i) plan.sa[i] = reduced[i] ? 0 : out_strides[i];

  Shape out_shape = keepdims ? Shape(kept) : Shape(squeezed);
  std::vector<T> out(out_shape.numel(), T(0));
  const T* src = t.data().data();
  strided_for_each(plan, [&](std::size_t, std::size_t io, std::size_t ii) { out[io] += src[ii]; });
  return make_result<T>(out_shape, std::move(out), {t}, [plan](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    strided_for_each(plan, [&](std::size_t, std::size_t io, std::size_t ii) {
      p.grad[ii] += self.grad[io];
    });
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& t, const std::vector<std::size_t>& axes, bool keepdims) {
  std::size_t count = 1;
  for (std::size_t ax : axes) {
    check_axis(t.shape(), ax, "mean");
    count *= t.dim(ax);
  }
  return scale(sum(t, axes, keepdims), T(1) / static_cast<T>(count));
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& t) {
  T acc = T(0);
  for (T v : t.data()) acc += v;
  return make_result<T>(Shape{}, {acc}, {t}, [](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    const T g = self.grad[0];
    for (auto& v : p.grad) v += g;
  });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& t) {
  return scale(sum_all(t), T(1) / static_cast<T>(t.numel()));
}

#define HPRN_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> batched_matmul(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                                    \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&);                 \
  template Tensor<T> transpose(const Tensor<T>&);                                                \
  template Tensor<T> index_select(const Tensor<T>&, std::size_t, const std::vector<std::size_t>&); \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                         \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> abs(const Tensor<T>&);                                                      \
  template Tensor<T> scale(const Tensor<T>&, T);                                                 \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                            \
  template Tensor<T> sum(const Tensor<T>&, const std::vector<std::size_t>&, bool);               \
  template Tensor<T> mean(const Tensor<T>&, const std::vector<std::size_t>&, bool);              \
  template Tensor<T> sum_all(const Tensor<T>&);                                                  \
  template Tensor<T> mean_all(const Tensor<T>&);

HPRN_INSTANTIATE_OPS(float)
HPRN_INSTANTIATE_OPS(double)

}  // namespace hprn
