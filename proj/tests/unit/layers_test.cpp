#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "negcnn/errors.hpp"
#include "negcnn/exec_mode.hpp"
#include "negcnn/grad_check.hpp"
#include "negcnn/ops.hpp"
#include "oracles.hpp"

using namespace negcnn;

namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Random weighted sum so every output coordinate gets a distinct upstream.
Var<double> project(Tape<double>& t, const Var<double>& y, std::mt19937_64& rng) {
  return ops::sum(ops::mul(y, t.constant(oracle::random_tensor<double>(y.shape(), rng))));
}

}  // namespace

TEST(Conv2d, OnesKernelOnOnesInput) {
  Tape<float> t;
  const auto y = ops::conv2d(t.constant(Tensor::ones({1, 1, 3, 3})),
                             t.constant(Tensor::ones({1, 1, 3, 3})), t.constant(Tensor({1})), 0);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.value().data()[0], 9.0f);
}

TEST(Conv2d, DeltaKernelWithSamePaddingIsIdentity) {
  std::mt19937_64 rng(1);
  const auto x = oracle::random_tensor<float>({2, 1, 6, 7}, rng);
  Tensor w({1, 1, 3, 3});
  w.at({0, 0, 1, 1}) = 1.0f;
  Tape<float> t;
  EXPECT_EQ(ops::conv2d(t.constant(x), t.constant(w), t.constant(Tensor({1})), 1).value(), x);
}

TEST(Conv2d, MatchesSixLoopOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t k = trial % 2 ? 5 : 3;
    const std::size_t pad = pick(rng, 0, k / 2);
    const auto x = oracle::random_tensor<float>({2, 3, 8, 8}, rng);
    const auto w = oracle::random_tensor<float>({4, 3, k, k}, rng);
    const auto b = oracle::random_tensor<float>({4}, rng);
    Tape<float> t;
    const auto got = ops::conv2d(t.constant(x), t.constant(w), t.constant(b), pad).value();
    const auto want = oracle::conv2d(x, w, b, pad);
    ASSERT_EQ(got.shape(), want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.data()[i], want.data()[i], 1e-5);
  }
}

TEST(Conv2d, SamePaddingPreservesSpatialSize) {
  Tape<float> t;
  const auto y = ops::conv2d(t.constant(Tensor({1, 2, 9, 5})), t.constant(Tensor({3, 2, 3, 3})),
                             t.constant(Tensor({3})), 1);
  EXPECT_EQ(y.shape(), (Shape{1, 3, 9, 5}));
}

TEST(Conv2d, Errors) {
  Tape<float> t;
  EXPECT_THROW(ops::conv2d(t.constant(Tensor({1, 2, 8, 8})), t.constant(Tensor({3, 1, 3, 3})),
                           t.constant(Tensor({3})), 0),
               DimensionError);
  EXPECT_THROW(ops::conv2d(t.constant(Tensor({1, 1, 8, 8})), t.constant(Tensor({3, 1, 4, 4})),
                           t.constant(Tensor({3})), 0),
               ContractError);
  EXPECT_THROW(ops::conv2d(t.constant(Tensor({1, 1, 2, 2})), t.constant(Tensor({1, 1, 3, 3})),
                           t.constant(Tensor({1})), 0),
               DimensionError);
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t k = trial % 2 ? 5 : 3;
    const std::size_t pad = trial % 3 == 0 ? k / 2 : 0;
    const std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 3), f = pick(rng, 1, 3);
    const std::size_t h = pick(rng, k, 7), w = pick(rng, k, 7);
    const auto x = oracle::random_tensor<double>({n, c, h, w}, rng);
    const auto wt = oracle::random_tensor<double>({f, c, k, k}, rng);
    const auto b = oracle::random_tensor<double>({f}, rng);
    const auto seed = rng();
    auto check = [&](int which) {
      std::mt19937_64 proj(seed);
      const auto r = grad_check(
          [&](Tape<double>& t, const Var<double>& p) {
            proj.seed(seed);
            const auto xi = which == 0 ? p : t.constant(x);
            const auto wi = which == 1 ? p : t.constant(wt);
            const auto bi = which == 2 ? p : t.constant(b);
            return project(t, ops::conv2d(xi, wi, bi, pad), proj);
          },
          which == 0 ? x : which == 1 ? wt : b);
      EXPECT_LT(r.max_relative_error, 1e-4) << "argument " << which << " k=" << k;
    };
    check(0);
    check(1);
    check(2);
  }
}

TEST(Conv2d, FastModeAgreesWithReference) {
  std::mt19937_64 rng(4);
  const auto x = oracle::random_tensor<float>({9, 3, 10, 10}, rng);
  const auto w = oracle::random_tensor<float>({5, 3, 3, 3}, rng);
  const auto b = oracle::random_tensor<float>({5}, rng);
  auto run = [&] {
    Tape<float> t;
    const auto wp = t.parameter(w);
    const auto y = ops::conv2d(t.constant(x), wp, t.constant(b), 1);
    t.backward(ops::sum(ops::mul(y, y)));
    return std::pair{y.value(), t.grad(wp)};
  };
  const auto ref = run();
  set_exec_mode(ExecMode::kFast);
  const auto fast = run();
  set_exec_mode(ExecMode::kReference);
  EXPECT_EQ(ref.first, fast.first);
  for (std::size_t i = 0; i < ref.second.size(); ++i) {
    EXPECT_NEAR(ref.second.data()[i], fast.second.data()[i], 1e-3 * std::abs(ref.second.data()[i]) + 1e-4);
  }
}

TEST(MaxPool, ConstantInputGivesConstantOutput) {
  Tape<float> t;
  const auto y = ops::maxpool2d(t.constant(Tensor::full({1, 2, 8, 8}, 0.25f)), 2);
  EXPECT_EQ(y.value(), Tensor::full({1, 2, 4, 4}, 0.25f));
}

TEST(MaxPool, SingleWindow) {
  Tape<float> t;
  EXPECT_EQ(ops::maxpool2d(t.constant(Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4})), 2).value().item(), 4.0f);
}

TEST(MaxPool, MatchesWindowScanExactly) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t s = trial % 2 ? 4 : 2;
    const auto x = oracle::random_tensor<float>({1, 2, 8, 8}, rng);
    Tape<float> t;
    const auto xp = t.parameter(x);
    const auto y = ops::maxpool2d(xp, s);
    Tensor route;
    EXPECT_EQ(y.value(), oracle::maxpool2d(x, s, &route));
    t.backward(ops::sum(y));
    EXPECT_EQ(t.grad(xp), route);
  }
}

TEST(MaxPool, TiesRouteToFirstMaximumInRowMajorOrder) {
  Tape<float> t;
  const auto x = t.parameter(Tensor::from({1, 1, 2, 2}, {3, 3, 3, 3}));
  t.backward(ops::sum(ops::maxpool2d(x, 2)));
  EXPECT_EQ(t.grad(x), Tensor::from({1, 1, 2, 2}, {1, 0, 0, 0}));
}

TEST(MaxPool, BackwardPreservesPerWindowSumsWithOneNonzero) {
  std::mt19937_64 rng(6);
  const auto x = oracle::random_tensor<float>({2, 3, 8, 8}, rng);
  const auto up = oracle::random_tensor<float>({2, 3, 4, 4}, rng);
  Tape<float> t;
  const auto xp = t.parameter(x);
  t.backward(ops::sum(ops::mul(ops::maxpool2d(xp, 2), t.constant(up))));
  const auto& g = t.grad(xp);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t xw = 0; xw < 4; ++xw) {
          float sum = 0;
          int nonzero = 0;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const float v = g.at({n, c, 2 * y + dy, 2 * xw + dx});
              sum += v;
              nonzero += v != 0.0f;
            }
          EXPECT_EQ(sum, up.at({n, c, y, xw}));
          EXPECT_LE(nonzero, 1);
        }
}

TEST(MaxPool, Errors) {
  Tape<float> t;
  EXPECT_THROW(ops::maxpool2d(t.constant(Tensor({1, 1, 6, 5})), 2), DimensionError);
  EXPECT_THROW(ops::maxpool2d(t.constant(Tensor({1, 1, 6, 6})), 3), ContractError);
}

TEST(MaxPool, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t s = trial % 2 ? 4 : 2;
    const auto x = oracle::random_tensor<double>({2, 2, 2 * s, s * 2}, rng);
    const auto seed = rng();
    std::mt19937_64 proj;
    const auto r = grad_check(
        [&](Tape<double>& t, const Var<double>& p) {
          proj.seed(seed);
          return project(t, ops::maxpool2d(p, s), proj);
        },
        x);
    EXPECT_LT(r.max_relative_error, 1e-4);
  }
}

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLogK) {
  Tape<float> t;
  const std::vector<std::int32_t> labels = {3, 7};
  const auto loss = ops::softmax_cross_entropy(t.constant(Tensor({2, 10})), labels);
  EXPECT_NEAR(loss.value().item(), std::log(10.0), 1e-6);
}

TEST(SoftmaxCrossEntropy, ConfidentCorrectLogitApproachesZero) {
  Tape<float> t;
  Tensor logits({1, 10});
  logits.at({0, 4}) = 1e4f;
  const std::vector<std::int32_t> labels = {4};
  const auto loss = ops::softmax_cross_entropy(t.constant(logits), labels);
  EXPECT_TRUE(std::isfinite(loss.value().item()));
  EXPECT_NEAR(loss.value().item(), 0.0f, 1e-6);
}

TEST(SoftmaxCrossEntropy, MatchesDirectFormula) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto logits = oracle::random_tensor<float>({6, 10}, rng, -8, 8);
    std::vector<std::int32_t> labels(6);
    for (auto& l : labels) l = static_cast<std::int32_t>(pick(rng, 0, 9));
    Tape<float> t;
    EXPECT_NEAR(ops::softmax_cross_entropy(t.constant(logits), labels).value().item(),
                oracle::softmax_cross_entropy(logits, labels), 1e-6);
  }
}

TEST(SoftmaxCrossEntropy, LabelOutOfRange) {
  Tape<float> t;
  const std::vector<std::int32_t> labels = {10};
  EXPECT_THROW(ops::softmax_cross_entropy(t.constant(Tensor({1, 10})), labels), ContractError);
}

TEST(FullyConnected, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = pick(rng, 1, 4), in = pick(rng, 2, 6), out = pick(rng, 2, 6);
    const auto x = oracle::random_tensor<double>({n, in}, rng);
    const auto w = oracle::random_tensor<double>({in, out}, rng);
    const auto b = oracle::random_tensor<double>({out}, rng);
    const auto seed = rng();
    std::mt19937_64 proj;
    for (int which = 0; which < 3; ++which) {
      const auto r = grad_check(
          [&](Tape<double>& t, const Var<double>& p) {
            proj.seed(seed);
            const auto xi = which == 0 ? p : t.constant(x);
            const auto wi = which == 1 ? p : t.constant(w);
            const auto bi = which == 2 ? p : t.constant(b);
            return project(t, ops::relu(ops::add_bias(ops::matmul(xi, wi), bi)), proj);
          },
          which == 0 ? x : which == 1 ? w : b);
      EXPECT_LT(r.max_relative_error, 1e-4);
    }
  }
}
