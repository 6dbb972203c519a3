#pragma once

#include <vector>

#include "hprn/image.hpp"
#include "hprn/tensor.hpp"

namespace hprn {

/// Band covariance of a [B x H x W] cube: X_ij = (1/n) sum_p (I_ip - mean_i)(I_jp - mean_j),
/// n = H*W >= 2. Differentiable.
template <typename T>
Tensor<T> covariance_matrix(const Tensor<T>& cube);

/// Mean absolute difference of the two B x B covariance matrices.
template <typename T>
Tensor<T> sopc_loss(const Tensor<T>& pred, const Tensor<T>& gt);

/// Mean absolute error over every entry.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& gt);

template <typename T>
struct LossBreakdown {
  Tensor<T> l1;
  Tensor<T> sopc;
  Tensor<T> total;  // l1 + tau * sopc; the l1 node itself when tau == 0
  double tau = 0.0;
};

template <typename T>
LossBreakdown<T> total_loss(const Tensor<T>& pred, const Tensor<T>& gt, double tau);

/// Components computed per sample, then averaged over the batch.
template <typename T>
LossBreakdown<T> total_loss(const std::vector<Tensor<T>>& preds, const std::vector<Tensor<T>>& gts,
                            double tau);

double sopc_loss(const SpectralCube& pred, const SpectralCube& gt);

}  // namespace hprn
