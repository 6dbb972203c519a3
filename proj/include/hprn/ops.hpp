#pragma once

#include <vector>

#include "hprn/tensor.hpp"

namespace hprn {

// Matrix products. Backward: dA = dC·Bᵀ, dB = Aᵀ·dC.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// Independent matmul per leading batch index: [G×m×k]·[G×k×n] -> [G×m×n].
template <typename T>
Tensor<T> batched_matmul(const Tensor<T>& a, const Tensor<T>& b);

// Layout.
template <typename T>
Tensor<T> reshape(const Tensor<T>& t, const Shape& shape);
/// Output axis i is input axis axes[i].
template <typename T>
Tensor<T> permute(const Tensor<T>& t, const std::vector<std::size_t>& axes);
/// Swaps the last two axes.
template <typename T>
Tensor<T> transpose(const Tensor<T>& t);
/// Gathers entries along `axis`; indices may repeat. Backward scatter-adds.
template <typename T>
Tensor<T> index_select(const Tensor<T>& t, std::size_t axis, const std::vector<std::size_t>& indices);
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);

// Elementwise with right-aligned broadcasting (size-1 or missing axes).
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
/// Denominators are clamped to magnitude >= kDivisionGuard; clamps are
/// counted in division_guard_hits().
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

inline constexpr double kDivisionGuard = 1e-8;

template <typename T>
Tensor<T> abs(const Tensor<T>& t);
template <typename T>
Tensor<T> scale(const Tensor<T>& t, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& t, T value);

// Reductions. Axes must be distinct and in range.
template <typename T>
Tensor<T> sum(const Tensor<T>& t, const std::vector<std::size_t>& axes, bool keepdims = false);
template <typename T>
Tensor<T> mean(const Tensor<T>& t, const std::vector<std::size_t>& axes, bool keepdims = false);
template <typename T>
Tensor<T> sum_all(const Tensor<T>& t);
template <typename T>
Tensor<T> mean_all(const Tensor<T>& t);

// Operator sugar for the common binary ops.
template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }

/// Row-major GEMM, C = alpha·op(A)·op(B) + beta·C.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, const T* b, T beta, T* c);

}  // namespace hprn
