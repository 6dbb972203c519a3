#include "hprn/loss.hpp"

#include <string>

#include "hprn/ops.hpp"

namespace hprn {

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": " + a.shape().str() + " vs " + b.shape().str());
  }
}

}  // namespace

template <typename T>
Tensor<T> covariance_matrix(const Tensor<T>& cube) {
  if (cube.rank() != 3) throw DimensionError("covariance: expected BxHxW, got " + cube.shape().str());
  const std::size_t b = cube.dim(0);
  const std::size_t n = cube.dim(1) * cube.dim(2);
  if (n < 2) throw ContractError("covariance: need at least 2 pixels, got " + std::to_string(n));
  auto flat = reshape(cube, Shape{b, n});
  auto centered = sub(flat, mean(flat, {1}, true));
  return scale(matmul(centered, transpose(centered)), T(1) / static_cast<T>(n));
}

template <typename T>
Tensor<T> sopc_loss(const Tensor<T>& pred, const Tensor<T>& gt) {
  require_same_shape(pred, gt, "sopc_loss");
  return mean_all(abs(sub(covariance_matrix(pred), covariance_matrix(gt))));
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& gt) {
  require_same_shape(pred, gt, "l1_loss");
  return mean_all(abs(sub(pred, gt)));
}

template <typename T>
LossBreakdown<T> total_loss(const Tensor<T>& pred, const Tensor<T>& gt, double tau) {
  if (!(tau >= 0.0)) throw ContractError("total_loss: tau must be >= 0");
  LossBreakdown<T> out;
  out.tau = tau;
  out.l1 = l1_loss(pred, gt);
  out.sopc = sopc_loss(pred, gt);
  out.total = tau == 0.0 ? out.l1 : add(out.l1, scale(out.sopc, static_cast<T>(tau)));
  return out;
}

template <typename T>
LossBreakdown<T> total_loss(const std::vector<Tensor<T>>& preds, const std::vector<Tensor<T>>& gts,
                            double tau) {
  if (preds.empty() || preds.size() != gts.size()) {
    throw ContractError("total_loss: " + std::to_string(preds.size()) + " predictions for " +
                        std::to_string(gts.size()) + " targets");
  }
  if (preds.size() == 1) return total_loss(preds[0], gts[0], tau);
  if (!(tau >= 0.0)) throw ContractError("total_loss: tau must be >= 0");
  const T inv = T(1) / static_cast<T>(preds.size());
  Tensor<T> l1, sopc;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto a = l1_loss(preds[i], gts[i]);
    auto s = sopc_loss(preds[i], gts[i]);
    l1 = i == 0 ? a : add(l1, a);
    sopc = i == 0 ? s : add(sopc, s);
  }
  LossBreakdown<T> out;
  out.tau = tau;
  out.l1 = scale(l1, inv);
  out.sopc = scale(sopc, inv);
  out.total = tau == 0.0 ? out.l1 : add(out.l1, scale(out.sopc, static_cast<T>(tau)));
  return out;
}

double sopc_loss(const SpectralCube& pred, const SpectralCube& gt) {
  NoGradGuard no_grad;
  return sopc_loss(to_tensor<double>(pred), to_tensor<double>(gt)).item();
}

#define HPRN_INSTANTIATE_LOSS(T)                                                          \
  template Tensor<T> covariance_matrix(const Tensor<T>&);                                 \
  template Tensor<T> sopc_loss(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> l1_loss(const Tensor<T>&, const Tensor<T>&);                         \
  template struct LossBreakdown<T>;                                                       \
  template LossBreakdown<T> total_loss(const Tensor<T>&, const Tensor<T>&, double);       \
  template LossBreakdown<T> total_loss(const std::vector<Tensor<T>>&,                     \
                                       const std::vector<Tensor<T>>&, double);

HPRN_INSTANTIATE_LOSS(float)
HPRN_INSTANTIATE_LOSS(double)

}  // namespace hprn
