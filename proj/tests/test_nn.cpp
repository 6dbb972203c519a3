#include <gtest/gtest.h>

#include <cmath>

#include "hprn/nn.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace hprn {
namespace {

using testing::random_tensor;
using testing::Rng;
using testing::values;

std::vector<double> naive_conv(const Tensor<double>& x, const Conv2D<double>& c) {
  return oracle::conv(oracle::to_vec(x), x.dim(1), x.dim(2), c);
}

TEST(Conv2d, IdentityKernel) {
  Rng rng(1);
  auto conv = make_conv2d<double>(1, 1, 1, rng);
  conv.weight.mutable_data()[0] = 1.0;
  auto x = random_tensor(Shape{1, 5, 4}, rng);
  EXPECT_EQ(values(conv2d(x, conv)), values(x));
}

TEST(Conv2d, AveragingKernelOnConstantImage) {
  Rng rng(2);
  auto conv = make_conv2d<double>(1, 1, 3, rng);
  for (auto& v : conv.weight.mutable_data()) v = 1.0 / 9.0;
  auto x = Tensor<double>::full(Shape{1, 6, 6}, 0.7);
  auto y = conv2d(x, conv);
  const auto oracle = naive_conv(x, conv);
  for (std::size_t i = 0; i < 36; ++i) EXPECT_NEAR(y[i], oracle[i], 1e-14);
  EXPECT_NEAR(y[2 * 6 + 3], 0.7, 1e-14);        // interior
  EXPECT_NEAR(y[0], 0.7 * 4.0 / 9.0, 1e-14);    // corner sees 4 of 9 taps
  EXPECT_NEAR(y[3], 0.7 * 6.0 / 9.0, 1e-14);    // top edge sees 6 of 9
}

TEST(Conv2d, MatchesSlidingWindowOracle) {
  Rng rng(3);
  auto conv = make_conv2d<double>(3, 4, 3, rng);
  for (auto& b : conv.bias.mutable_data()) b = 0.1;
  auto x = random_tensor(Shape{3, 7, 5}, rng);
  const auto y = values(conv2d(x, conv));
  const auto oracle = naive_conv(x, conv);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], oracle[i], 1e-12);
}

TEST(Conv2d, ChannelMismatchAndEvenKernel) {
  Rng rng(4);
  auto conv = make_conv2d<double>(3, 2, 3, rng);
  EXPECT_THROW(conv2d(random_tensor(Shape{2, 4, 4}, rng), conv), DimensionError);
  EXPECT_THROW(make_conv2d<double>(3, 2, 2, rng), ContractError);
}

TEST(Conv2d, Gradients) {
  Rng rng(5);
  auto conv = make_conv2d<double>(2, 3, 3, rng);
  auto x = random_tensor(Shape{2, 4, 5}, rng);
  testing::expect_gradients_match(
      [&](const auto& in) {
        Conv2D<double> c{in[1], in[2]};
        return conv2d(in[0], c);
      },
      {x, conv.weight, conv.bias});
}

TEST(Conv2d, TranslationEquivariantAwayFromBorders) {
  Rng rng(6);
  auto conv = make_conv2d<double>(1, 1, 3, rng);
  auto x = random_tensor(Shape{1, 8, 8}, rng, -1, 1, false);
  std::vector<double> shifted(64, 0.0);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t c = 1; c < 8; ++c) shifted[y * 8 + c] = x[y * 8 + c - 1];
  auto a = conv2d(x, conv);
  auto b = conv2d(Tensor<double>::from(Shape{1, 8, 8}, shifted), conv);
  for (std::size_t y = 1; y < 7; ++y)
    for (std::size_t c = 2; c < 7; ++c) EXPECT_NEAR(b[y * 8 + c], a[y * 8 + c - 1], 1e-14);
}

TEST(Linear, RowVectorsTimesWeightTranspose) {
  Rng rng(7);
  auto lin = make_linear<double>(3, 2, rng);
  auto x = random_tensor(Shape{4, 3}, rng);
  auto y = linear(x, lin);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t o = 0; o < 2; ++o) {
      double acc = lin.bias[o];
      for (std::size_t i = 0; i < 3; ++i) acc += x[r * 3 + i] * lin.weight[o * 3 + i];
      EXPECT_NEAR(y[r * 2 + o], acc, 1e-14);
    }
}

TEST(PReLU, Definition) {
  auto slope = Tensor<double>::from(Shape{1}, {0.25});
  EXPECT_EQ(values(prelu(Tensor<double>::from(Shape{2}, {2.0, -2.0}), slope)), (std::vector<double>{2.0, -0.5}));
  auto x = Tensor<double>::from(Shape{3}, {-1.5, 0.0, 2.0});
  EXPECT_EQ(values(prelu(x, Tensor<double>::from(Shape{1}, {1.0}))), values(x));
  EXPECT_DOUBLE_EQ(make_prelu<double>(3).slope[2], kPReLUInitialSlope);
}

TEST(PReLU, SlopeGradientIsSumOfNegativeInputs) {
  auto x = Tensor<double>::from(Shape{1, 2}, {-1.0, -3.0});
  auto slope = Tensor<double>::from(Shape{1}, {0.25}, true);
  sum_all(prelu(x, slope)).backward();
  EXPECT_DOUBLE_EQ(slope.grad()[0], -4.0);
  Rng rng(8);
  auto xs = Tensor<double>::from(Shape{2, 3}, {-0.5, 0.7, -1.2, 0.9, -0.3, 0.4}, true);
  testing::expect_gradients_match([](const auto& in) { return prelu(in[0], in[1]); },
                                  {xs, Tensor<double>::from(Shape{2}, {0.25, 0.1}, true)});
}

TEST(Sigmoid, ValueAndGradient) {
  EXPECT_DOUBLE_EQ(sigmoid(Tensor<double>::scalar(0.0)).item(), 0.5);
  Rng rng(9);
  testing::expect_gradients_match([](const auto& in) { return sigmoid(in[0]); }, {random_tensor(Shape{5}, rng, -3, 3)});
}

TEST(Softmax, ClosedForms) {
  auto u = softmax(Tensor<double>::from(Shape{3}, {0.0, 0.0, 0.0}), 0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(u[i], 1.0 / 3.0, 1e-15);
  auto r = softmax(Tensor<double>::from(Shape{3}, {std::log(1.0), std::log(2.0), std::log(3.0)}), 0);
  EXPECT_NEAR(r[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(r[1], 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(r[2], 3.0 / 6.0, 1e-15);
}

TEST(Softmax, ShiftInvariantAndStochastic) {
  Rng rng(10);
  auto x = random_tensor(Shape{3, 4, 5}, rng, -5, 5, false);
  auto a = softmax(x, 1);
  auto b = softmax(add_scalar(x, 100.0), 1);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
  for (std::size_t p = 0; p < 3; ++p)
    for (std::size_t q = 0; q < 5; ++q) {
      double total = 0.0;
      for (std::size_t k = 0; k < 4; ++k) total += a[(p * 4 + k) * 5 + q];
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  testing::expect_gradients_match([](const auto& in) { return softmax(in[0], 2); },
                                  {random_tensor(Shape{2, 3, 4}, rng)});
}

TEST(LocalAvgPool, HandCells) {
  std::vector<double> v(16);
  for (std::size_t i = 0; i < 16; ++i) v[i] = static_cast<double>(i + 1);
  auto y = local_avg_pool(Tensor<double>::from(Shape{1, 4, 4}, v), 2, 2);
  EXPECT_EQ(values(y), (std::vector<double>{3.5, 5.5, 11.5, 13.5}));
  auto ones = local_avg_pool(Tensor<double>::full(Shape{2, 8, 8}, 1.0), 4, 4);
  for (double o : values(ones)) EXPECT_DOUBLE_EQ(o, 1.0);
}

TEST(LocalAvgPool, DegenerateGridIsGlobalMeanAndOversizeGridFails) {
  Rng rng(11);
  auto x = random_tensor(Shape{2, 5, 7}, rng);
  auto g = local_avg_pool(x, 1, 1);
  auto m = mean(x, {1, 2});
  EXPECT_NEAR(g[0], m[0], 1e-14);
  EXPECT_NEAR(g[1], m[1], 1e-14);
  EXPECT_THROW(local_avg_pool(x, 6, 2), ContractError);
}

TEST(LocalAvgPool, UnevenCellsFollowFloorBoundaries) {
  Rng rng(12);
  auto x = random_tensor(Shape{1, 5, 7}, rng, -1, 1, false);
  auto y = local_avg_pool(x, 2, 3);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const std::size_t y0 = i * 5 / 2, y1 = (i + 1) * 5 / 2, x0 = j * 7 / 3, x1 = (j + 1) * 7 / 3;
      double acc = 0.0;
      for (std::size_t r = y0; r < y1; ++r)
        for (std::size_t c = x0; c < x1; ++c) acc += x[r * 7 + c];
      EXPECT_NEAR(y[i * 3 + j], acc / static_cast<double>((y1 - y0) * (x1 - x0)), 1e-14);
    }
  testing::expect_gradients_match([](const auto& in) { return local_avg_pool(in[0], 2, 3); },
                                  {random_tensor(Shape{2, 5, 7}, rng)});
}

TEST(LocalAvgPool, UpsampledPoolPreservesCellMeans) {
  Rng rng(13);
  auto x = random_tensor(Shape{1, 8, 8}, rng, -1, 1, false);
  auto p = local_avg_pool(x, 4, 4);
  std::vector<double> up(64);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) up[r * 8 + c] = p[(r / 2) * 4 + c / 2];
  auto again = local_avg_pool(Tensor<double>::from(Shape{1, 8, 8}, up), 4, 4);
  EXPECT_EQ(values(again), values(p));
}

std::vector<double> naive_attention(const Tensor<double>& t, const MultiHeadAttention<double>& m,
                                    std::vector<double>* weights_out = nullptr) {
  return oracle::attention(oracle::to_vec(t), t.dim(0), m, weights_out);
}

TEST(Attention, ZeroLogitsAverageTokens) {
  Rng rng(14);
  auto m = make_multi_head_attention<double>(3, 1, true, rng);
  for (auto* l : {&m.query, &m.key}) {
    for (auto& w : l->weight.mutable_data()) w = 0.0;
  }
  for (auto* l : {&m.value, &m.output}) {
    auto w = l->weight.mutable_data();
    for (std::size_t i = 0; i < 9; ++i) w[i] = (i % 4 == 0) ? 1.0 : 0.0;
  }
  auto tokens = random_tensor(Shape{4, 3}, rng);
  auto y = multi_head_self_attention(tokens, m);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      double avg = 0.0;
      for (std::size_t j = 0; j < 4; ++j) avg += tokens[j * 3 + c] / 4.0;
      EXPECT_NEAR(y[r * 3 + c], avg, 1e-14);
    }
}

TEST(Attention, MatchesStraightLineOracle) {
  Rng rng(15);
  for (bool scaling : {true, false}) {
    for (std::size_t heads : {1u, 2u, 4u}) {
      auto m = make_multi_head_attention<double>(4, heads, scaling, rng);
      for (auto* l : {&m.query, &m.key, &m.value, &m.output})
        for (auto& b : l->bias.mutable_data()) b = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
      auto tokens = random_tensor(Shape{5, 4}, rng);
      Tensor<double> attn;
      auto y = values(multi_head_self_attention(tokens, m, &attn));
      std::vector<double> oracle_w;
      auto oracle = naive_attention(tokens, m, &oracle_w);
      for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], oracle[i], 1e-10);
      for (std::size_t i = 0; i < oracle_w.size(); ++i) EXPECT_NEAR(attn[i], oracle_w[i], 1e-10);
    }
  }
}

TEST(Attention, ThreeTokensSingleHead) {
  Rng rng(16);
  auto m = make_multi_head_attention<double>(2, 1, true, rng);
  auto tokens = random_tensor(Shape{3, 2}, rng);
  auto y = values(multi_head_self_attention(tokens, m));
  auto oracle = naive_attention(tokens, m);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], oracle[i], 1e-10);
}

TEST(Attention, RowsAreStochasticAndHeadsMustDivide) {
  Rng rng(17);
  auto m = make_multi_head_attention<double>(16, 4, true, rng);
  Tensor<double> attn;
  multi_head_self_attention(random_tensor(Shape{6, 16}, rng, -3, 3), m, &attn);
  ASSERT_EQ(attn.shape(), (Shape{4, 6, 6}));
  for (std::size_t r = 0; r < 24; ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < 6; ++j) total += attn[r * 6 + j];
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
  EXPECT_THROW(make_multi_head_attention<double>(6, 4, true, rng), ContractError);
}

TEST(Attention, Gradients) {
  Rng rng(18);
  auto m = make_multi_head_attention<double>(4, 2, true, rng);
  auto tokens = random_tensor(Shape{3, 4}, rng);
  testing::expect_gradients_match(
      [&](const auto& in) {
        auto mm = m;
        mm.query.weight = in[1];
        mm.value.weight = in[2];
        return multi_head_self_attention(in[0], mm);
      },
      {tokens, m.query.weight, m.value.weight});
}

TEST(Modules, ParameterNames) {
  Rng rng(19);
  ParameterList<double> params;
  make_conv2d<double>(2, 3, 3, rng).collect(params, "c");
  make_multi_head_attention<double>(4, 2, true, rng).collect(params, "a");
  make_prelu<double>(3).collect(params, "p");
  std::vector<std::string> names;
  for (const auto& p : params) names.push_back(p.name);
  EXPECT_EQ(names, (std::vector<std::string>{"c.weight", "c.bias", "a.query.weight", "a.query.bias", "a.key.weight",
                                             "a.key.bias", "a.value.weight", "a.value.bias", "a.output.weight",
                                             "a.output.bias", "p.slope"}));
}

TEST(Init, FanInBoundsAndZeroBias) {
  Rng rng(20);
  auto conv = make_conv2d<double>(4, 5, 3, rng);
  const double bound = 1.0 / std::sqrt(36.0);
  for (double w : values(conv.weight)) EXPECT_LE(std::abs(w), bound);
  for (double b : values(conv.bias)) EXPECT_EQ(b, 0.0);
}

}  // namespace
}  // namespace hprn
