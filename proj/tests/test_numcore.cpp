#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mgstc/adam.hpp"
#include "mgstc/error.hpp"
#include "mgstc/ops.hpp"
#include "mgstc/rng.hpp"
#include "mgstc/tensor.hpp"
#include "support/gradcheck.hpp"

using namespace mgstc;
using mgstc::gradcheck::check_gradient;
using mgstc::gradcheck::describe;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, bool rg = true) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = rng.normal();
  return Tensor::matrix(r, c, std::move(v), rg);
}

// Fixed random readout so every gradient check sees a non-trivial upstream.
Tensor readout(const Tensor& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  std::vector<double> w(y.size());
  for (auto& x : w) x = rng.normal();
  Tensor weights(y.shape(), std::move(w));
  return sum(reshape(mse_loss(y, weights), {1}));
}

}  // namespace

// ---------------------------------------------------------------- tensor

TEST(Tensor, ShapeMatchesDataLength) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  Tensor t({2, 3}, std::vector<double>(6, 1.0));
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(shape_string(t.shape()), "[2x3]");
}

TEST(Tensor, GradientLengthMatchesData) {
  Rng rng(1);
  auto a = random_matrix(3, 4, rng);
  sum(a).backward();
  ASSERT_TRUE(a.has_grad());
  EXPECT_EQ(a.grad().size(), a.size());
}

TEST(Tensor, CopiesShareStorage) {
  auto a = Tensor::zeros({2});
  Tensor b = a;
  b.mutable_data()[0] = 3.0;
  EXPECT_EQ(a.data()[0], 3.0);
  auto c = a.detach();
  c.mutable_data()[0] = 4.0;
  EXPECT_EQ(a.data()[0], 3.0);
}

// ---------------------------------------------------------------- matmul

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Rng rng(2);
  auto m = random_matrix(3, 3, rng, false);
  auto eye = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto out = matmul(eye, m);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(out.data()[i], m.data()[i]);
}

TEST(Matmul, HandArithmetic) {
  auto out = matmul(Tensor::matrix(2, 2, {1, 2, 3, 4}), Tensor::matrix(2, 1, {1, 1}));
  ASSERT_EQ(out.shape(), (Shape{2, 1}));
  EXPECT_EQ(out.data()[0], 3.0);
  EXPECT_EQ(out.data()[1], 7.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 5}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  auto a = random_matrix(5, 4, rng);
  auto b = random_matrix(4, 3, rng);
  auto loss = [&] { return readout(matmul(a, b)); };
  auto ra = check_gradient(a, loss, 1e-6);
  auto rb = check_gradient(b, loss, 1e-6);
  EXPECT_TRUE(ra.failures.empty()) << describe(ra);
  EXPECT_TRUE(rb.failures.empty()) << describe(rb);
}

// ---------------------------------------------------------------- softmax

TEST(Softmax, EqualValuesGiveUniformRow) {
  auto out = softmax_rows(Tensor::matrix(1, 4, {2, 2, 2, 2}));
  for (double p : out.data()) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(Softmax, LogThreeClosedForm) {
  auto out = softmax_rows(Tensor::matrix(1, 2, {0.0, std::log(3.0)}));
  EXPECT_NEAR(out.data()[0], 0.25, 1e-15);
  EXPECT_NEAR(out.data()[1], 0.75, 1e-15);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  auto out = softmax_rows(Tensor::matrix(1, 2, {1000.0, 0.0}));
  // Extended-precision oracle: 1 / (1 + e^-1000) and e^-1000 / (1 + e^-1000).
  const long double tail = std::exp(-1000.0L);
  const long double p0 = 1.0L / (1.0L + tail);
  const long double p1 = tail / (1.0L + tail);
  EXPECT_TRUE(all_finite(out.data()));
  EXPECT_EQ(out.data()[0], static_cast<double>(p0));
  EXPECT_EQ(out.data()[1], static_cast<double>(p1));
}

TEST(Softmax, RowsSumToOneAndArePermutationEquivariant) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_matrix(3, 7, rng, false);
    auto y = softmax_rows(x);
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        EXPECT_GE(y.at(r, c), 0.0);
        s += y.at(r, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
    auto perm = rng.permutation(7);
    std::vector<double> px(21);
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 7; ++c) px[r * 7 + c] = x.at(r, perm[c]);
    auto py = softmax_rows(Tensor::matrix(3, 7, px));
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 7; ++c) EXPECT_NEAR(py.at(r, c), y.at(r, perm[c]), 1e-15);
  }
}

// ---------------------------------------------------------------- layer norm

TEST(LayerNorm, ConstantInputGivesBeta) {
  auto x = Tensor::full({3, 4}, 2.5);
  auto zero = layer_norm(x, Tensor::scalar(1.0), Tensor::scalar(0.0), 1e-5);
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);
  auto five = layer_norm(x, Tensor::scalar(2.0), Tensor::scalar(5.0), 1e-5);
  for (double v : five.data()) EXPECT_EQ(v, 5.0);
}

TEST(LayerNorm, StandardizesEachRow) {
  Rng rng(5);
  auto x = random_matrix(4, 8, rng, false);
  auto y = layer_norm(x, Tensor::scalar(1.0), Tensor::scalar(0.0), 1e-12);
  for (std::size_t r = 0; r < 4; ++r) {
    double m = 0.0, v = 0.0;
    for (std::size_t c = 0; c < 8; ++c) m += y.at(r, c);
    m /= 8;
    for (std::size_t c = 0; c < 8; ++c) v += (y.at(r, c) - m) * (y.at(r, c) - m);
    v /= 8;
    EXPECT_NEAR(m, 0.0, 1e-6);
    EXPECT_NEAR(v, 1.0, 1e-6);
  }
}

TEST(LayerNorm, InvariantToAdditiveShift) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_matrix(3, 6, rng, false);
    const double c = rng.uniform(-50.0, 50.0);
    std::vector<double> shifted(x.data().begin(), x.data().end());
    for (auto& v : shifted) v += c;
    auto a = layer_norm(x, Tensor::scalar(1.0), Tensor::scalar(0.0), 1e-5);
    auto b = layer_norm(Tensor::matrix(3, 6, shifted), Tensor::scalar(1.0), Tensor::scalar(0.0), 1e-5);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-9);
  }
}

TEST(LayerNorm, RejectsNonPositiveEpsilon) {
  EXPECT_THROW(layer_norm(Tensor::zeros({1, 2}), Tensor::scalar(1), Tensor::scalar(0), 0.0), ConfigError);
}

// ---------------------------------------------------------------- gradients of every op

TEST(Gradients, ElementwiseAndReductions) {
  Rng rng(7);
  auto a = random_matrix(3, 4, rng);
  auto b = random_matrix(3, 4, rng);
  const std::vector<std::pair<const char*, std::function<Tensor()>>> cases = {
      {"add", [&] { return readout(add(a, b)); }},
      {"sub", [&] { return readout(sub(a, b)); }},
      {"scale", [&] { return readout(scale(a, -1.7)); }},
      {"sum", [&] { return sum(scale(a, 0.3)); }},
      {"mean", [&] { return mean(a); }},
      {"gelu", [&] { return readout(gelu(a)); }},
      {"relu", [&] { return readout(relu(a)); }},
      {"softmax", [&] { return readout(softmax_rows(a)); }},
      {"reshape", [&] { return readout(reshape(a, {2, 6})); }},
      {"mse", [&] { return mse_loss(a, b); }},
  };
  for (const auto& [name, loss] : cases) {
    auto r = check_gradient(a, loss, 1e-4);
    EXPECT_TRUE(r.failures.empty()) << name << ": " << describe(r);
  }
}

TEST(Gradients, RankOneAndRankThree) {
  Rng rng(8);
  std::vector<double> v(5), w(24);
  for (auto& x : v) x = rng.normal();
  for (auto& x : w) x = rng.normal();
  Tensor vec({5}, v, true);
  Tensor cube({2, 3, 4}, w, true);
  auto r1 = check_gradient(vec, [&] { return readout(gelu(vec)); }, 1e-4);
  auto r3 = check_gradient(cube, [&] { return readout(gelu(scale(cube, 2.0))); }, 1e-4);
  EXPECT_TRUE(r1.failures.empty()) << describe(r1);
  EXPECT_TRUE(r3.failures.empty()) << describe(r3);
}

TEST(Gradients, TiledAddAndGather) {
  Rng rng(9);
  auto x = random_matrix(6, 3, rng);
  auto tile = random_matrix(2, 3, rng);
  std::vector<double> bv(3);
  for (auto& v : bv) v = rng.normal();
  Tensor bias({3}, bv, true);
  const std::vector<std::size_t> index = {5, 0, 0, 3, 2};
  auto loss = [&] { return readout(gather_rows(add_tiled_rows(add_tiled_rows(x, tile), bias), index)); };
  for (auto* p : {&x, &tile, &bias}) {
    auto r = check_gradient(*p, loss, 1e-4);
    EXPECT_TRUE(r.failures.empty()) << describe(r);
  }
}

TEST(Gradients, LayerNormAllArguments) {
  Rng rng(10);
  auto x = random_matrix(4, 5, rng);
  std::vector<double> g(5), b(5);
  for (auto& v : g) v = rng.uniform(0.5, 1.5);
  for (auto& v : b) v = rng.normal();
  Tensor gamma({5}, g, true), beta({5}, b, true);
  Tensor gs = Tensor::scalar(1.3, true), bs = Tensor::scalar(-0.2, true);
  auto vec_loss = [&] { return readout(layer_norm(x, gamma, beta, 1e-5)); };
  auto scalar_loss = [&] { return readout(layer_norm(x, gs, bs, 1e-5)); };
  for (auto* p : {&x, &gamma, &beta}) {
    auto r = check_gradient(*p, vec_loss, 1e-4);
    EXPECT_TRUE(r.failures.empty()) << describe(r);
  }
  for (auto* p : {&gs, &bs}) {
    auto r = check_gradient(*p, scalar_loss, 1e-4);
    EXPECT_TRUE(r.failures.empty()) << describe(r);
  }
}

// ---------------------------------------------------------------- backward

TEST(Backward, SumGivesOnes) {
  auto x = Tensor::full({2, 3}, 0.7, true);
  sum(x).backward();
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, AffineMseMatchesFiniteDifferences) {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 1 + rng.index(4), k = 1 + rng.index(5), m = 1 + rng.index(3);
    auto x = random_matrix(n, k, rng, false);
    auto w = random_matrix(k, m, rng);
    auto b = random_matrix(1, m, rng);
    auto y = random_matrix(n, m, rng, false);
    auto loss = [&] { return mse_loss(add_tiled_rows(matmul(x, w), b), y); };
    auto rw = check_gradient(w, loss, 1e-4);
    auto rb = check_gradient(b, loss, 1e-4);
    EXPECT_TRUE(rw.failures.empty()) << describe(rw);
    EXPECT_TRUE(rb.failures.empty()) << describe(rb);
  }
}

TEST(Backward, ConstantLossGivesZeroGrad) {
  auto x = Tensor::full({3}, 2.0, true);
  auto c = Tensor::full({3}, 1.0);
  sum(add(scale(x, 0.0), c)).backward();
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, RepeatedCallsAccumulate) {
  auto x = Tensor::full({2}, 1.0, true);
  auto loss = sum(scale(x, 3.0));
  loss.backward();
  loss.backward();
  for (double g : x.grad()) EXPECT_EQ(g, 6.0);
  x.zero_grad();
  loss.backward();
  for (double g : x.grad()) EXPECT_EQ(g, 3.0);
}

TEST(Backward, SharedSubgraphVisitedOnce) {
  auto x = Tensor::full({1}, 2.0, true);
  auto y = scale(x, 3.0);
  sum(add(y, y)).backward();  // d/dx (6x) = 6
  EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(Backward, NonScalarIsUsageError) {
  auto x = Tensor::full({2}, 1.0, true);
  EXPECT_THROW(scale(x, 2.0).backward(), UsageError);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  auto x = Tensor::full({2}, 1.0, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = scale(x, 2.0);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(grad_enabled());
}

TEST(Backward, BitDeterministic) {
  auto run = [] {
    Rng rng(12);
    auto a = random_matrix(4, 5, rng);
    auto b = random_matrix(5, 3, rng);
    auto loss = readout(gelu(layer_norm(matmul(a, b), Tensor::scalar(1), Tensor::scalar(0), 1e-5)));
    loss.backward();
    std::vector<double> out(a.grad().begin(), a.grad().end());
    out.push_back(loss.item());
    return out;
  };
  EXPECT_EQ(run(), run());
}

// ---------------------------------------------------------------- adam

TEST(AdamStep, ZeroGradientLeavesParamsUnchanged) {
  auto p = Tensor::full({3}, 1.5, true);
  AdamState state(3, AdamConfig{});
  p.mutable_grad();  // allocate zeros
  adam_step(p, state);
  for (double v : p.data()) EXPECT_EQ(v, 1.5);
  EXPECT_EQ(state.step_count, 1u);
}

TEST(AdamStep, FirstStepMovesByLearningRate) {
  auto p = Tensor::scalar(0.0, true);
  AdamConfig cfg;
  cfg.lr = 0.1;
  AdamState state(1, cfg);
  p.mutable_grad()[0] = 1.0;
  adam_step(p, state);
  // m_hat = 1, v_hat = 1: step = lr * 1 / (1 + eps)
  EXPECT_NEAR(p.item(), -0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_TRUE(!p.has_grad() || p.grad()[0] == 0.0);
}

TEST(AdamStep, MissingGradientIsUsageError) {
  auto p = Tensor::scalar(0.0, true);
  AdamState state(1, AdamConfig{});
  EXPECT_THROW(adam_step(p, state), UsageError);
}

TEST(AdamStep, IdenticalParamsFollowIdenticalTrajectories) {
  auto a = Tensor::full({2}, 0.3, true);
  auto b = Tensor::full({2}, 0.3, true);
  Adam opt({a, b}, AdamConfig{0.01});
  for (int i = 0; i < 20; ++i) {
    sum(add(gelu(a), gelu(b))).backward();
    opt.step();
    EXPECT_EQ(a.data()[0], b.data()[0]);
    EXPECT_EQ(a.data()[1], b.data()[1]);
  }
  EXPECT_EQ(opt.states()[0].step_count, 20u);
}

TEST(AdamStep, StepCountIncrementsByOne) {
  auto p = Tensor::full({2}, 1.0, true);
  Adam opt({p}, AdamConfig{});
  for (std::uint64_t i = 1; i <= 5; ++i) {
    sum(p).backward();
    opt.step();
    EXPECT_EQ(opt.states()[0].step_count, i);
    EXPECT_EQ(opt.states()[0].first_moment.size(), p.size());
  }
}

TEST(AdamStep, MinimizesQuadratic) {
  auto p = Tensor::full({1}, 5.0, true);
  Adam opt({p}, AdamConfig{0.1});
  for (int i = 0; i < 500; ++i) {
    sum(mse_loss(p, Tensor::full({1}, 2.0))).backward();
    opt.step();
  }
  EXPECT_NEAR(p.data()[0], 2.0, 1e-2);
}

// ---------------------------------------------------------------- metrics helpers

TEST(ErrorMetrics, HandArithmeticAndJensen) {
  const std::vector<double> pred = {1, 2}, zero = {0, 0};
  EXPECT_DOUBLE_EQ(mse(pred, zero), 2.5);
  EXPECT_DOUBLE_EQ(mae(pred, zero), 1.5);
  EXPECT_EQ(mse(pred, pred), 0.0);
  EXPECT_EQ(mae(pred, pred), 0.0);
  Rng rng(13);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(10), b(10);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    const double m = mae(a, b);
    EXPECT_GE(mse(a, b), m * m - 1e-12);
  }
  EXPECT_THROW(mse(pred, std::vector<double>{1}), DimensionError);
}
