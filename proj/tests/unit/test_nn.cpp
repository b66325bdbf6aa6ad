#include <gtest/gtest.h>

#include "../gradchecks.hpp"
#include "sfc/nn.hpp"

using namespace sfc;
using namespace sfc::nn;

TEST(Affine, IdentityAndBiasOnly) {
  Tensor x(1, 2);
  x << 1, 0;
  const Tensor y = affine(x, Tensor::Identity(2, 2), Tensor::Zero(1, 2));
  EXPECT_EQ(y(0, 0), 1.0);
  EXPECT_EQ(y(0, 1), 0.0);
  Tensor b(1, 3);
  b << 0.5, -1, 2;
  EXPECT_EQ(affine(Tensor::Ones(2, 4), Tensor::Zero(4, 3), b).row(1), b.row(0));
  EXPECT_THROW(affine(Tensor::Ones(1, 3), Tensor::Zero(4, 3), b), ShapeError);
  EXPECT_THROW(affine(Tensor::Ones(1, 4), Tensor::Zero(4, 3), Tensor::Zero(1, 2)), ShapeError);
}

TEST(Affine, GradCheck) {
  for (std::uint64_t s = 1; s <= 3; ++s) {
    const auto rep = sfc::testing::check_affine(s);
    EXPECT_TRUE(rep.pass) << rep.max_rel_err;
  }
}

TEST(Gru, ZeroWeightsClosedForm) {
  ParamSet p;
  Rng rng(1);
  add_gru_params(p, "g.", 2, 3, rng);
  for (auto& [name, t] : p) t.setZero();
  Tensor h(1, 3);
  h << 1.0, -2.0, 4.0;
  GruCache c;
  const Tensor out = gru_cell(h, Tensor::Ones(1, 2), p, "g.", &c);
  EXPECT_DOUBLE_EQ(c.z(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(c.r(0, 2), 0.5);
  EXPECT_DOUBLE_EQ(c.c(0, 1), 0.0);
  EXPECT_TRUE(out.isApprox(0.5 * h));
  EXPECT_TRUE(gru_cell(Tensor::Zero(1, 3), Tensor::Ones(1, 2), p, "g.").isZero());
  EXPECT_THROW(gru_cell(h, Tensor::Ones(1, 5), p, "g."), ShapeError);
}

TEST(Gru, GradCheck) {
  for (std::uint64_t s = 1; s <= 3; ++s) {
    const auto rep = sfc::testing::check_gru(s);
    EXPECT_TRUE(rep.pass) << rep.max_rel_err;
  }
}

TEST(MaskedSoftmax, Examples) {
  const std::vector<double> z3{0, 0, 0};
  const std::vector<char> all3{1, 1, 1};
  for (double p : masked_softmax(z3, all3)) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  const std::vector<double> l{5, -1};
  const std::vector<char> m{1, 0};
  const auto p = masked_softmax(l, m);
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(p[1], 0.0);
  const std::vector<char> none{0, 0};
  EXPECT_THROW(masked_softmax(l, none), std::invalid_argument);
}

TEST(MaskedSoftmax, NormalizationOnRandomInputs) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = uniform_int(rng, 1, 20);
    std::vector<double> logits(n);
    std::vector<char> mask(n);
    for (int i = 0; i < n; ++i) {
      logits[i] = (uniform_real(rng) - 0.5) * 60.0;
      mask[i] = bernoulli(rng, 0.5);
    }
    mask[uniform_int(rng, 0, n - 1)] = 1;
    const auto p = masked_softmax(logits, mask);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      EXPECT_GE(p[i], 0.0);
      if (!mask[i]) { EXPECT_EQ(p[i], 0.0); }
      sum += p[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(MaskedSoftmax, GradCheck) {
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const auto rep = sfc::testing::check_masked_softmax(s);
    EXPECT_TRUE(rep.pass) << rep.max_rel_err;
  }
}

TEST(Sgd, Arithmetic) {
  ParamSet p;
  p.add("a", Tensor::Zero(2, 2));
  GradSet g = p.zeros_like();
  sgd_update(p, g, 1.0, Direction::Ascend);
  EXPECT_TRUE(p["a"].isZero());
  g["a"].setOnes();
  sgd_update(p, g, 1e-5, Direction::Ascend);
  EXPECT_TRUE((p["a"].array() == 1e-5).all());
  sgd_update(p, g, 1e-5, Direction::Descend);
  EXPECT_TRUE(p["a"].isZero());
}

TEST(Sgd, RejectsNonFiniteAndMismatchedGradients) {
  ParamSet p;
  p.add("a", Tensor::Ones(1, 3));
  const ParamSet before = p;
  GradSet g = p.zeros_like();
  g["a"](0, 1) = std::nan("");
  EXPECT_THROW(sgd_update(p, g, 0.1, Direction::Ascend), NumericError);
  EXPECT_EQ(p, before);
  GradSet wrong;
  wrong.add("a", Tensor::Ones(3, 1));
  EXPECT_THROW(sgd_update(p, wrong, 0.1, Direction::Ascend), ShapeError);
}

TEST(Sgd, BitIdenticalRepeats) {
  Rng rng(3);
  ParamSet p;
  p.add("w", sfc::testing::random_tensor(4, 4, rng));
  GradSet g;
  g.add("w", sfc::testing::random_tensor(4, 4, rng));
  ParamSet a = p, b = p;
  sgd_update(a, g, 0.37, Direction::Ascend);
  sgd_update(b, g, 0.37, Direction::Ascend);
  EXPECT_EQ(a, b);
}

TEST(FiniteDiff, QuadraticIsExact) {
  Rng rng(4);
  ParamSet p;
  p.add("t", sfc::testing::random_tensor(3, 3, rng));
  auto f = [](const ParamSet& q) { return q["t"].squaredNorm(); };
  GradSet g = p.zeros_like();
  g["t"] = 2.0 * p["t"];
  const auto rep = finite_diff_check(f, p, g, 1e-5, 1e-9);
  EXPECT_TRUE(rep.pass) << rep.max_rel_err;
  EXPECT_EQ(rep.entries.size(), 9u);
}

TEST(FiniteDiff, DetectsWrongGradientAndNonFiniteObjective) {
  ParamSet p;
  p.add("t", Tensor::Ones(1, 2));
  auto f = [](const ParamSet& q) { return q["t"].squaredNorm(); };
  GradSet g = p.zeros_like();
  g["t"].setConstant(1.0);
  EXPECT_FALSE(finite_diff_check(f, p, g, 1e-5, 1e-6).pass);
  auto bad = [](const ParamSet&) { return std::nan(""); };
  EXPECT_THROW(finite_diff_check(bad, p, g, 1e-5, 1e-6), NumericError);
}

TEST(RelativeError, Floor) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-9), 1e-9 / 1e-4);
}

TEST(ParamSet, JsonRoundTripAndLayout) {
  Rng rng(5);
  ParamSet p;
  p.add("a", sfc::testing::random_tensor(2, 3, rng));
  p.add("b", sfc::testing::random_tensor(1, 1, rng));
  const ParamSet back = params_from_json(nlohmann::json::parse(params_to_json(p).dump()));
  EXPECT_EQ(back, p);
  EXPECT_THROW(p.add("a", Tensor::Zero(1, 1)), ShapeError);
  EXPECT_THROW(p["missing"], ShapeError);
  EXPECT_EQ(p.scalar_count(), 7u);
  EXPECT_THROW(params_from_json(nlohmann::json::parse(R"({"a":{"shape":[2,2],"data":[1,2,3]}})")),
               ParseError);
}
