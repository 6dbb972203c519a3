#pragma once

#include <random>
#include <string>
#include <vector>

#include "hprn/checkpoint.hpp"
#include "hprn/tensor.hpp"

namespace hprn {

using Rng = std::mt19937_64;

/// Same-padding, stride-1 2-D convolution (cross-correlation) with bias.
template <typename T>
struct Conv2D {
  Tensor<T> weight;  // [C_out x C_in x k x k]
  Tensor<T> bias;    // [C_out]

  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t kernel() const { return weight.dim(2); }
  void collect(ParameterList<T>& out, const std::string& prefix) const;
};

/// Weights from U(-1/sqrt(fan_in), 1/sqrt(fan_in)); zero bias.
template <typename T>
Conv2D<T> make_conv2d(std::size_t c_in, std::size_t c_out, std::size_t kernel, Rng& rng);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Conv2D<T>& layer);

/// Fully connected layer on row vectors: y = x·Wᵀ + b.
template <typename T>
struct Linear {
  Tensor<T> weight;  // [out x in]
  Tensor<T> bias;    // [out]
  void collect(ParameterList<T>& out, const std::string& prefix) const;
};

template <typename T>
Linear<T> make_linear(std::size_t in, std::size_t out, Rng& rng);

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Linear<T>& layer);

template <typename T>
struct PReLU {
  Tensor<T> slope;  // [channels] or [1]
  void collect(ParameterList<T>& out, const std::string& prefix) const;
};

inline constexpr double kPReLUInitialSlope = 0.25;

template <typename T>
PReLU<T> make_prelu(std::size_t channels);

/// x if x > 0 else slope·x, with one slope per entry of axis 0 (or shared).
template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// Max-subtracted softmax along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

/// Averages each channel over a grid_h x grid_w partition with cell
/// boundaries at floor(i*H/grid_h).
template <typename T>
Tensor<T> local_avg_pool(const Tensor<T>& x, std::size_t grid_h, std::size_t grid_w);

template <typename T>
struct MultiHeadAttention {
  std::size_t dim = 16;
  std::size_t heads = 4;
  // Scales logits by 1/sqrt(dim/heads) when set.
  bool scaling = true;
  Linear<T> query, key, value, output;
  void collect(ParameterList<T>& out, const std::string& prefix) const;
};

template <typename T>
MultiHeadAttention<T> make_multi_head_attention(std::size_t dim, std::size_t heads, bool scaling,
                                                Rng& rng);

/// Self-attention over the rows of `tokens` [n x dim]. When `attention` is
/// non-null it receives the [heads x n x n] attention weights.
template <typename T>
Tensor<T> multi_head_self_attention(const Tensor<T>& tokens, const MultiHeadAttention<T>& mha,
                                    Tensor<T>* attention = nullptr);

}  // namespace hprn
