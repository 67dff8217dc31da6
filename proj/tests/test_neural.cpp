#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "diacritize/neural/grad_check.hpp"
#include "diacritize/neural/matrix.hpp"
#include "diacritize/neural/optim.hpp"
#include "diacritize/neural/tape.hpp"
#include "diacritize/random.hpp"

using namespace diacritize;
using namespace diacritize::neural;

namespace {

Matrix<double> random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix<double> m(r, c);
  for (auto& v : m.values()) v = rng.uniform(-scale, scale);
  return m;
}

Matrix<double> triple_loop(const Matrix<double>& a, const Matrix<double>& b) {
  Matrix<double> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

std::vector<Parameter<double>*> ptrs(std::vector<Parameter<double>>& ps) {
  std::vector<Parameter<double>*> out;
  for (auto& p : ps) out.push_back(&p);
  return out;
}

}  // namespace

TEST(Matrix, MatmulMatchesTripleLoop) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto n = 1 + rng.uniform_index(9), k = 1 + rng.uniform_index(9), m = 1 + rng.uniform_index(9);
    const auto a = random_matrix(n, k, rng), b = random_matrix(k, m, rng);
    const auto got = matmul(a, b), want = triple_loop(a, b);
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Matrix, IdentityIsNeutral) {
  Rng rng(2);
  const auto a = random_matrix(4, 6, rng);
  const auto r = matmul(a, Matrix<double>::identity(6));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(r[i], a[i]);
}

TEST(Matrix, ShapeErrorNamesShapes) {
  Matrix<double> a(2, 3), b(4, 5);
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("4x5"), std::string::npos) << msg;
  }
  EXPECT_THROW(Matrix<double>(2, 2, std::vector<double>(3)), ShapeError);
  EXPECT_THROW(a += b, ShapeError);
}

TEST(Matrix, SoftmaxRowsSumToOneAndAreStable) {
  Rng rng(3);
  Matrix<double> z = random_matrix(5, 7, rng, 10.0);
  z(0, 0) = 1000.0;
  z(1, 2) = -1000.0;
  const auto p = softmax_rows(z);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double s = 0.0;
    for (double v : p.row(r)) {
      ASSERT_TRUE(std::isfinite(v));
      ASSERT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_NEAR(p(0, 0), 1.0, 1e-12);
}

TEST(Matrix, SigmoidExtremes) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(800.0), 1.0, 0.0);
  EXPECT_EQ(sigmoid(-800.0), 0.0);
}

TEST(Matrix, CrossEntropyUniformIsLogV) {
  Matrix<double> z(3, 11, 0.25);
  const std::vector<std::size_t> t = {0, 5, 10};
  EXPECT_NEAR(cross_entropy(z, std::span<const std::size_t>(t)), std::log(11.0), 1e-12);
}

TEST(Matrix, CrossEntropyMasking) {
  Rng rng(4);
  const auto z = random_matrix(3, 4, rng);
  const std::vector<std::size_t> all = {1, 2, 3}, masked = {1, kIgnoreIndex, 3};
  double want = 0.0;
  for (std::size_t r : {0u, 2u}) {
    double lse = 0.0;
    for (double v : z.row(r)) lse += std::exp(v);
    want -= z(r, all[r]) - std::log(lse);
  }
  EXPECT_NEAR(cross_entropy(z, std::span<const std::size_t>(masked)), want / 2.0, 1e-12);
  const std::vector<std::size_t> bad = {1, 2, 4};
  EXPECT_THROW(cross_entropy(z, std::span<const std::size_t>(bad)), InputError);
  const std::vector<std::size_t> short_t = {1};
  EXPECT_THROW(cross_entropy(z, std::span<const std::size_t>(short_t)), ShapeError);
}

TEST(Tape, CrossEntropyNodeMatchesFreeFunction) {
  Rng rng(5);
  const auto z = random_matrix(4, 6, rng);
  const std::vector<std::size_t> t = {0, kIgnoreIndex, 5, 2};
  Tape<double> tape;
  const Var l = tape.cross_entropy(tape.constant(z), t);
  EXPECT_NEAR(tape.scalar(l), cross_entropy(z, std::span<const std::size_t>(t)), 1e-14);
}

TEST(Tape, BackwardRequiresScalar) {
  Tape<double> tape;
  const Var v = tape.constant(Matrix<double>(2, 2));
  EXPECT_THROW(tape.backward(v), ShapeError);
}

TEST(Tape, GradientsAccumulateAcrossUses) {
  Parameter<double> p("p", Matrix<double>(1, 1, 3.0));
  Tape<double> tape;
  const Var x = tape.param(p);
  tape.backward(tape.sum(tape.mul(x, x)));  // d(x^2)/dx = 2x
  EXPECT_DOUBLE_EQ(p.grad[0], 6.0);
}

// Each op composed into a scalar and checked against central differences.
class OpGradients : public ::testing::Test {
protected:
  void SetUp() override {
    Rng rng(11);
    ps.emplace_back("a", random_matrix(3, 4, rng));
    ps.emplace_back("b", random_matrix(4, 5, rng));
    ps.emplace_back("bias", random_matrix(1, 5, rng));
    ps.emplace_back("c", random_matrix(3, 5, rng));
    ps.emplace_back("table", random_matrix(6, 5, rng));
    ps.emplace_back("gates", random_matrix(3, 20, rng));
    ps.emplace_back("cprev", random_matrix(3, 5, rng));
  }

  void check(const std::function<Var(Tape<double>&, std::vector<Var>&)>& f) {
    auto build = [&](Tape<double>& t) {
      std::vector<Var> v;
      for (auto& p : ps) v.push_back(t.param(p));
      return f(t, v);
    };
    auto params = ptrs(ps);
    GradCheckOptions o;
    o.min_coordinates = 1000;
    const auto r = grad_check(std::span<Parameter<double>* const>(params), build, o);
    EXPECT_LT(r.max_relative_error, 1e-6) << r.worst_parameter << "[" << r.worst_index << "] "
                                          << r.worst_analytic << " vs " << r.worst_numeric;
  }

  Var weighted(Tape<double>& t, Var x) {
    // fixed random weights so every entry gets a distinct gradient
    Rng rng(99);
    const auto& v = t.value(x);
    return t.sum(t.mul(x, t.constant(random_matrix(v.rows(), v.cols(), rng))));
  }

  std::vector<Parameter<double>> ps;
};

TEST_F(OpGradients, MatmulAddBias) {
  check([&](auto& t, auto& v) { return weighted(t, t.add_bias(t.matmul(v[0], v[1]), v[2])); });
}

TEST_F(OpGradients, AddMulScale) {
  check([&](auto& t, auto& v) { return weighted(t, t.scale(t.mul(t.add(v[3], v[3]), v[3]), 0.7)); });
}

TEST_F(OpGradients, SigmoidTanh) {
  check([&](auto& t, auto& v) { return weighted(t, t.tanh(t.sigmoid(t.matmul(v[0], v[1])))); });
}

TEST_F(OpGradients, SoftmaxConcat) {
  check([&](auto& t, auto& v) { return weighted(t, t.softmax_rows(t.concat_cols(v[3], v[6]))); });
}

TEST_F(OpGradients, EmbeddingGatherSelect) {
  check([&](auto& t, auto& v) {
    const std::vector<std::size_t> ids = {2, 0, 2};
    const std::vector<std::size_t> rows = {1, 1, 0};
    const std::vector<unsigned char> mask = {1, 0, 1};
    const Var e = t.embedding(v[4], ids);
    return weighted(t, t.select_rows(t.gather_rows(t.add(e, v[3]), rows), v[6], mask));
  });
}

TEST_F(OpGradients, LstmCell) {
  check([&](auto& t, auto& v) {
    const Var c = t.lstm_cell_state(v[5], v[6]);
    return weighted(t, t.concat_cols(c, t.lstm_hidden(v[5], c)));
  });
}

TEST_F(OpGradients, Attention) {
  check([&](auto& t, auto& v) {
    const std::vector<Var> memory = {v[3], v[6], t.tanh(v[3])};
    const std::vector<std::size_t> lens = {3, 1, 2};
    const Var a = t.attention_weights(t.matmul(v[0], v[1]), memory, lens);
    return weighted(t, t.attention_context(a, memory));
  });
}

TEST_F(OpGradients, WeightedNllAndSumScalars) {
  check([&](auto& t, auto& v) {
    const std::vector<std::size_t> tg = {4, kIgnoreIndex, 0};
    const std::vector<double> w = {0.5, 1.0, 2.0};
    const Var l1 = t.weighted_nll(t.matmul(v[0], v[1]), tg, w);
    const Var l2 = t.cross_entropy(v[3], tg);
    const std::vector<Var> terms = {l1, l2};
    return t.sum_scalars(terms);
  });
}

TEST(Attention, MaskedPositionsAreZeroAndRowsSumToOne) {
  Rng rng(6);
  Tape<double> t(false);
  std::vector<Var> mem;
  for (int s = 0; s < 5; ++s) mem.push_back(t.constant(random_matrix(4, 3, rng)));
  const std::vector<std::size_t> lens = {5, 1, 3, 2};
  const Var a = t.attention_weights(t.constant(random_matrix(4, 3, rng)), mem, lens);
  const auto& w = t.value(a);
  for (std::size_t b = 0; b < 4; ++b) {
    double s = 0.0;
    for (std::size_t k = 0; k < 5; ++k) {
      if (k >= lens[b]) {
        EXPECT_EQ(w(b, k), 0.0);
      }
      s += w(b, k);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  const std::vector<std::size_t> bad = {0, 1, 1, 1};
  EXPECT_THROW(t.attention_weights(t.constant(random_matrix(4, 3, rng)), mem, bad), ShapeError);
}

TEST(GradCheck, DetectsCorruptedGradient) {
  // f(x) = sum x^3, analytic gradient deliberately scaled
  Rng rng(8);
  for (double factor : {2.0, 1.5}) {
    Parameter<double> p("x", random_matrix(2, 3, rng));
    std::vector<Parameter<double>*> params = {&p};
    auto build = [&](Tape<double>& t) {
      const Var x = t.param(p);
      const Var cube = t.mul(t.mul(x, x), x);
      return t.scale(t.sum(cube), t.tracks_grads() ? factor : 1.0);
    };
    const auto r = grad_check(std::span<Parameter<double>* const>(params), build);
    EXPECT_NEAR(r.max_relative_error, 1.0 - 1.0 / factor, 1e-6);
  }
}

TEST(GradCheck, MixedPrecisionMirror) {
  Rng rng(9);
  Parameter<double> p("x", random_matrix(3, 3, rng));
  Parameter<long double> q("x", Matrix<long double>(3, 3));
  for (std::size_t i = 0; i < 9; ++i) q.value[i] = p.value[i];
  std::vector<Parameter<double>*> params = {&p};
  std::vector<Parameter<long double>*> ref = {&q};
  auto f = [](auto& param) {
    return [&param](auto& t) { return t.sum(t.tanh(t.matmul(t.param(param), t.param(param)))); };
  };
  const auto r = grad_check(std::span<Parameter<double>* const>(params), f(p),
                            std::span<Parameter<long double>* const>(ref), f(q));
  EXPECT_LT(r.max_relative_error, 1e-8);
  EXPECT_EQ(r.coordinates, 9u);
  Parameter<long double> wrong("x", Matrix<long double>(2, 2));
  std::vector<Parameter<long double>*> bad = {&wrong};
  EXPECT_THROW(grad_check(std::span<Parameter<double>* const>(params), f(p),
                          std::span<Parameter<long double>* const>(bad), f(wrong)),
               ShapeError);
}

TEST(Clip, GlobalNormBound) {
  Rng rng(10);
  for (int t = 0; t < 100; ++t) {
    std::vector<Parameter<double>> ps;
    for (int k = 0; k < 3; ++k) {
      ps.emplace_back("p", Matrix<double>(2, 4));
      ps.back().grad = random_matrix(2, 4, rng, rng.uniform(0.01, 20.0));
    }
    auto params = ptrs(ps);
    std::span<Parameter<double>* const> s(params);
    const double before = global_grad_norm(s);
    std::vector<Matrix<double>> old;
    for (auto& p : ps) old.push_back(p.grad);
    const double reported = clip_grad_norm(s, 5.0);
    EXPECT_EQ(reported, before);
    const double after = global_grad_norm(s);
    EXPECT_LE(after, 5.0 + 1e-12);
    if (before <= 5.0) {
      for (std::size_t k = 0; k < ps.size(); ++k) {
        for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(ps[k].grad[i], old[k][i]);
      }
    } else {
      EXPECT_NEAR(after, 5.0, 1e-9);
      // direction is preserved
      for (std::size_t k = 0; k < ps.size(); ++k) {
        for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(ps[k].grad[i], old[k][i] * 5.0 / before, 1e-12);
      }
    }
  }
}

TEST(Clip, NonFiniteNormThrows) {
  Parameter<double> p("p", Matrix<double>(1, 1));
  p.grad[0] = std::nan("");
  std::vector<Parameter<double>*> v = {&p};
  EXPECT_THROW(clip_grad_norm(std::span<Parameter<double>* const>(v), 5.0), NumericError);
}

TEST(Optimizer, SgdStep) {
  Parameter<double> p("p", Matrix<double>(1, 2, std::vector<double>{1.0, -2.0}));
  p.grad = Matrix<double>(1, 2, std::vector<double>{0.5, -1.0});
  std::vector<Parameter<double>*> v = {&p};
  Optimizer<double> opt(OptimizerKind::kSgd);
  opt.step(std::span<Parameter<double>* const>(v), 0.1);
  EXPECT_DOUBLE_EQ(p.value[0], 0.95);
  EXPECT_DOUBLE_EQ(p.value[1], -1.9);
}

TEST(Optimizer, AdamFirstStepIsLrTimesSign) {
  Parameter<double> p("p", Matrix<double>(1, 3, std::vector<double>{0.0, 0.0, 0.0}));
  p.grad = Matrix<double>(1, 3, std::vector<double>{3.0, -0.01, 0.0});
  std::vector<Parameter<double>*> v = {&p};
  Optimizer<double> opt(OptimizerKind::kAdam);
  opt.step(std::span<Parameter<double>* const>(v), 0.01);
  EXPECT_NEAR(p.value[0], -0.01, 1e-9);
  EXPECT_NEAR(p.value[1], 0.01, 1e-6);
  EXPECT_EQ(p.value[2], 0.0);
}

TEST(Optimizer, AdamMinimizesQuadratic) {
  Parameter<double> p("p", Matrix<double>(1, 2, std::vector<double>{4.0, -3.0}));
  std::vector<Parameter<double>*> v = {&p};
  Optimizer<double> opt(OptimizerKind::kAdam);
  for (int i = 0; i < 3000; ++i) {
    p.zero_grad();
    Tape<double> t;
    const Var x = t.param(p);
    t.backward(t.sum(t.mul(x, x)));
    opt.step(std::span<Parameter<double>* const>(v), 0.01);
  }
  EXPECT_NEAR(p.value[0], 0.0, 1e-2);
  EXPECT_NEAR(p.value[1], 0.0, 1e-2);
}

TEST(Optimizer, ParseNames) {
  EXPECT_EQ(parse_optimizer("sgd"), OptimizerKind::kSgd);
  EXPECT_EQ(parse_optimizer("adam"), OptimizerKind::kAdam);
  EXPECT_THROW(parse_optimizer("rmsprop"), InputError);
}

TEST(Dropout, ZeroProbabilityIsIdentityAndScaleIsInverted) {
  Rng rng(12);
  Tape<double> t;
  const Var x = t.constant(Matrix<double>(200, 50, 1.0));
  EXPECT_EQ(t.dropout(x, 0.0, rng).id, x.id);
  const auto& y = t.value(t.dropout(x, 0.3, rng));
  double mean = 0.0;
  for (double v : y.values()) {
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.7) < 1e-12);
    mean += v;
  }
  EXPECT_NEAR(mean / static_cast<double>(y.size()), 1.0, 0.05);
}
