#include <gtest/gtest.h>

#include <cmath>

#include "gecor/tensor.hpp"
#include "support/oracles.hpp"

using namespace gecor;
using gecor::testing::random_tensor;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tape tape;
  Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  Tensor m = Tensor::matrix(2, 2, {3, 4, 5, 6});
  EXPECT_EQ(vals(matmul(tape, eye, m)), (std::vector<double>{3, 4, 5, 6}));
}

TEST(Matmul, RowTimesColumn) {
  Tape tape;
  Tensor out = matmul(tape, Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(2, 1, {3, 4}));
  EXPECT_EQ(out.shape(), (Shape{1, 1}));
  EXPECT_DOUBLE_EQ(out[0], 11.0);
}

TEST(Matmul, MatchesReferenceLoop) {
  std::mt19937_64 rng(5);
  Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  Tape tape;
  auto ref = gecor::testing::reference_matmul(vals(a), vals(b), 3, 4, 2);
  auto got = vals(matmul(tape, a, b));
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(got[i], ref[i], 1e-12);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tape tape;
  try {
    matmul(tape, Tensor::zeros({2, 3}), Tensor::zeros({4, 2}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x2]"), std::string::npos) << msg;
  }
}

TEST(Matmul, RandomGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(17);
  Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  Tensor w = random_tensor({3, 2}, rng, 1.0, false);
  auto report = grad_check(
      [&](Tape& t) {
        Tensor prod = matmul(t, a, b);
        Tensor acc = Tensor::scalar(0.0);
        std::vector<Tensor> rows;
        for (std::size_t i = 0; i < 3; ++i) rows.push_back(row(t, prod, i));
        Tensor flat = concat(t, rows);
        return dot(t, flat, Tensor::vector(vals(w)));
      },
      {{"a", a}, {"b", b}}, 1e-5, 1e-4);
  EXPECT_TRUE(report.passed()) << report.max_rel_error();
}

TEST(Softmax, SymmetricInputIsUniform) {
  Tape tape;
  auto out = vals(softmax(tape, Tensor::vector({0, 0})));
  EXPECT_DOUBLE_EQ(out[0], 0.5);
  EXPECT_DOUBLE_EQ(out[1], 0.5);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  Tape tape;
  auto out = vals(softmax(tape, Tensor::vector({1000, 0})));
  EXPECT_TRUE(std::isfinite(out[0]) && std::isfinite(out[1]));
  EXPECT_NEAR(out[0], 1.0, 1e-12);
  EXPECT_NEAR(out[1], 0.0, 1e-12);
}

TEST(Softmax, DirectEvaluation) {
  // exp(1..3) / Σ exp(1..3), evaluated independently
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  Tape tape;
  auto out = vals(softmax(tape, Tensor::vector({1, 2, 3})));
  EXPECT_NEAR(out[0], std::exp(1.0) / z, 1e-12);
  EXPECT_NEAR(out[0], 0.09003, 1e-5);
  EXPECT_NEAR(out[1], 0.24473, 1e-5);
  EXPECT_NEAR(out[2], 0.66524, 1e-5);
}

TEST(Softmax, MaskedPositionsAreExactlyZero) {
  Tape tape;
  std::vector<bool> mask = {true, false, true};
  auto out = vals(softmax(tape, Tensor::vector({1, 50, 1}), &mask));
  EXPECT_EQ(out[1], 0.0);
  EXPECT_DOUBLE_EQ(out[0] + out[2], 1.0);
}

TEST(Softmax, AllMaskedIsDegenerate) {
  Tape tape;
  std::vector<bool> mask = {false, false};
  EXPECT_THROW(softmax(tape, Tensor::vector({1, 2}), &mask), ContractError);
}

TEST(Softmax, PropertyProbabilityVector) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Tape tape;
    auto out = vals(softmax(tape, random_tensor({1 + std::size_t(trial % 17)}, rng, 30.0)));
    double s = 0.0;
    for (double p : out) {
      EXPECT_GE(p, 0.0);
      s += p;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(GruCell, ZeroParametersHalveThePreviousState) {
  GruParams p{Tensor::zeros({9, 2}), Tensor::zeros({9, 3}), Tensor::zeros({9})};
  Tape tape;
  auto out = vals(gru_cell(tape, Tensor::vector({0.3, -2}), Tensor::vector({0.4, -0.8, 0.1}), p));
  EXPECT_DOUBLE_EQ(out[0], 0.2);
  EXPECT_DOUBLE_EQ(out[1], -0.4);
  EXPECT_DOUBLE_EQ(out[2], 0.05);
}

TEST(GruCell, ZeroInputAndStateGiveZero) {
  std::mt19937_64 rng(8);
  GruParams p{random_tensor({9, 2}, rng), random_tensor({9, 3}, rng), Tensor::zeros({9})};
  Tape tape;
  auto out = vals(gru_cell(tape, Tensor::zeros({2}), Tensor::zeros({3}), p));
  for (double v : out) EXPECT_EQ(v, 0.0);
}

TEST(GruCell, StateStaysInOpenUnitInterval) {
  std::mt19937_64 rng(9);
  GruParams p{random_tensor({12, 5}, rng), random_tensor({12, 4}, rng), random_tensor({12}, rng)};
  Tensor h = Tensor::zeros({4});
  Tape tape(false);
  for (int i = 0; i < 50; ++i) {
    h = gru_cell(tape, random_tensor({5}, rng, 1.0, false), h, p);
    for (double v : h.values()) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(GruCell, SaturatedStateStaysBoundedAndFinite) {
  std::mt19937_64 rng(10);
  GruParams p{random_tensor({12, 5}, rng, 3.0), random_tensor({12, 4}, rng, 3.0),
              random_tensor({12}, rng, 3.0)};
  Tensor h = Tensor::zeros({4});
  Tape tape(false);
  for (int i = 0; i < 50; ++i) {
    h = gru_cell(tape, random_tensor({5}, rng, 100.0, false), h, p);
    for (double v : h.values()) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_LE(std::abs(v), 1.0);
    }
  }
}

TEST(GruCell, DimensionMismatchThrows) {
  GruParams p{Tensor::zeros({9, 2}), Tensor::zeros({9, 3}), Tensor::zeros({9})};
  Tape tape;
  EXPECT_THROW(gru_cell(tape, Tensor::zeros({3}), Tensor::zeros({3}), p), DimensionError);
  EXPECT_THROW(gru_cell(tape, Tensor::zeros({2}), Tensor::zeros({2}), p), DimensionError);
}

TEST(Backward, SumGivesOnes) {
  Tensor x = Tensor::vector({1, 2, 3}, true);
  Tape tape;
  tape.backward(sum(tape, x));
  EXPECT_EQ(vals(Tensor::vector({x.grad().begin(), x.grad().end()})),
            (std::vector<double>{1, 1, 1}));
}

TEST(Backward, SquareGivesTwiceX) {
  Tensor x = Tensor::vector({1, 2}, true);
  Tape tape;
  tape.backward(sum(tape, mul(tape, x, x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 4.0);
}

TEST(Backward, SecondCallAccumulates) {
  Tensor x = Tensor::vector({1, 2}, true);
  Tape tape;
  Tensor loss = sum(tape, mul(tape, x, x));
  tape.backward(loss);
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 8.0);
}

TEST(Backward, NonScalarLossIsRejected) {
  Tensor x = Tensor::vector({1, 2}, true);
  Tape tape;
  EXPECT_THROW(tape.backward(mul(tape, x, x)), ContractError);
}

TEST(Backward, LinearInLossScale) {
  std::mt19937_64 rng(21);
  Tensor m = random_tensor({3, 3}, rng), x = random_tensor({3}, rng);
  auto grads_for = [&](double a) {
    m.zero_grad();
    Tape tape;
    Tensor loss = sum(tape, tanh(tape, matvec(tape, m, x)));
    tape.backward(scale(tape, loss, a));
    return std::vector<double>(m.grad().begin(), m.grad().end());
  };
  auto g1 = grads_for(1.0);
  auto g3 = grads_for(-3.0);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g3[i], -3.0 * g1[i], 1e-12);
}

TEST(GradCheck, SquareAtOne) {
  Tensor x = Tensor::vector({1.0}, true);
  auto report = grad_check([&](Tape& t) { return mul(t, x, x); }, {{"x", x}}, 1e-5, 1e-4);
  EXPECT_TRUE(report.passed());
  EXPECT_NEAR(x.grad()[0], 2.0, 1e-12);
}

TEST(GradCheck, AttentionScorerOnTwoPositions) {
  std::mt19937_64 rng(4);
  Tensor wh = random_tensor({3, 4}, rng), ws = random_tensor({3, 2}, rng), b = random_tensor({3}, rng),
         v = random_tensor({3}, rng), h0 = random_tensor({4}, rng), h1 = random_tensor({4}, rng),
         s = random_tensor({2}, rng);
  auto report = grad_check(
      [&](Tape& t) {
        auto score = [&](const Tensor& hi) {
          return dot(t, v, tanh(t, add(t, add(t, matvec(t, wh, hi), matvec(t, ws, s)), b)));
        };
        Tensor e[] = {score(h0), score(h1)};
        Tensor a = softmax(t, concat(t, e));
        std::size_t first[] = {0};
        return log(t, select_sum(t, a, first));
      },
      {{"W_h", wh}, {"W_s", ws}, {"b_attn", b}, {"v", v}, {"h0", h0}, {"h1", h1}, {"s", s}}, 1e-5,
      1e-4);
  EXPECT_TRUE(report.passed()) << report.max_rel_error();
}

TEST(GradCheck, CorruptedBackwardIsFlagged) {
  Tensor x = Tensor::vector({0.7, -1.3}, true);
  // y = x² with a backward rule that forgets the factor 2
  auto bad_square = [](Tape& t, const Tensor& in) {
    Tensor out = Tensor::vector({in[0] * in[0], in[1] * in[1]}, true);
    Tensor src = in;
    t.record(out, [src, out]() mutable {
      for (std::size_t i = 0; i < 2; ++i) src.grad()[i] += out.grad()[i] * src[i];
    });
    return out;
  };
  auto report = grad_check([&](Tape& t) { return sum(t, bad_square(t, x)); }, {{"x", x}}, 1e-5, 1e-4);
  EXPECT_FALSE(report.passed());
}

TEST(GradCheck, NonFiniteLossIsAnError) {
  Tensor x = Tensor::vector({1.0}, true);
  EXPECT_THROW(grad_check([&](Tape& t) { return scale(t, x, std::nan("")); }, {{"x", x}}),
               std::runtime_error);
}

TEST(GradCheck, EveryOperationPasses) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (const auto& check : gecor::testing::op_gradient_suite(seed)) {
      EXPECT_TRUE(check.report.passed())
          << check.name << " seed " << seed << " max rel err " << check.report.max_rel_error();
    }
  }
}

TEST(Ops, FiniteOnExtremeInputs) {
  Tape tape;
  Tensor x = Tensor::vector({-1e4, -700, 0, 700, 1e4});
  for (const auto& out : {sigmoid(tape, x), tanh(tape, x), softmax(tape, x)})
    for (double v : out.values()) EXPECT_TRUE(std::isfinite(v));
  std::size_t idx[] = {0};
  EXPECT_TRUE(std::isfinite(log_softmax_select(tape, x, idx).item()));
}

TEST(Ops, LogSoftmaxSelectMatchesLogOfSummedSoftmax) {
  std::mt19937_64 rng(12);
  Tensor x = random_tensor({7}, rng, 3.0);
  Tape tape;
  std::size_t idx[] = {1, 4, 4, 6};
  auto p = vals(softmax(tape, x));
  EXPECT_NEAR(log_softmax_select(tape, x, idx).item(), std::log(p[1] + p[4] + p[6]), 1e-12);
}

TEST(Tensor, ShapeMustMatchValues) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor({0}, {}), DimensionError);
}
