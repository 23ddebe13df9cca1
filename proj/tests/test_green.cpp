#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hgff/errors.hpp"
#include "hgff/green.hpp"

using namespace hgff;

namespace {
// closed form of the simple cubic return integral
double watson_over_six() {
  const double pi = std::numbers::pi;
  const double W = std::sqrt(6.0) / (32.0 * pi * pi * pi) * std::tgamma(1.0 / 24) * std::tgamma(5.0 / 24) *
                   std::tgamma(7.0 / 24) * std::tgamma(11.0 / 24);
  return W / 6.0;
}
}  // namespace

TEST(GreenValue, OriginMatchesClosedForm) {
  GreenValue g = green_value({0, 0, 0}, 0.0, 3);
  EXPECT_NEAR(g.value, watson_over_six(), 1e-10);
  EXPECT_NEAR(g.value, 0.2527, 1e-4);
  EXPECT_LT(g.error, 1e-6);
  EXPECT_NEAR(green_value({0, 0, 0}, 0.0, 3, 20).value, g.value, 1e-6);
}

TEST(GreenValue, NeighbourFromDiscreteEquation) {
  // 6 G(0) - 6 G(e_1) = 1
  EXPECT_NEAR(green_value({1, 0, 0}, 0.0, 3).value, watson_over_six() - 1.0 / 6.0, 1e-10);
}

TEST(GreenValue, OneDimensionalMassiveClosedForm) {
  for (double lambda : {0.1, 1.0, 3.0}) {
    const double s = std::sqrt(lambda * (lambda + 4.0));
    const double r = (2.0 + lambda - s) / 2.0;
    for (long x : {0L, 1L, 4L}) EXPECT_NEAR(green_value({x}, lambda, 1).value, std::pow(r, x) / s, 1e-10);
  }
}

TEST(GreenValue, Symmetries) {
  const double a = green_value({2, 1, 0}, 0.0, 3).value;
  EXPECT_DOUBLE_EQ(a, green_value({-2, -1, 0}, 0.0, 3).value);
  EXPECT_NEAR(a, green_value({0, 2, 1}, 0.0, 3).value, 1e-14);
  EXPECT_NEAR(a, green_value({1, 0, -2}, 0.0, 3).value, 1e-14);
}

TEST(GreenValue, DecreasingInMass) {
  double prev = green_value({0, 0, 0}, 0.0, 3).value;
  for (double lambda : {0.01, 0.1, 1.0, 10.0}) {
    const double v = green_value({0, 0, 0}, lambda, 3).value;
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(GreenValue, Errors) {
  EXPECT_THROW(green_value({0, 0}, 0.0, 2), DivergenceError);
  EXPECT_THROW(green_value({0}, 0.0, 1), DivergenceError);
  EXPECT_THROW(green_value({0, 0, 0}, -1.0, 3), DomainError);
  EXPECT_NO_THROW(green_value({0, 0}, 0.5, 2));
}

TEST(GreenTable, SatisfiesEquationOnCachedBox) {
  for (double lambda : {0.0, 0.5}) {
    GreenTable T(3, lambda, 8);
    double worst = 0.0;
    for (long x = -7; x <= 7; ++x)
      for (long y = -7; y <= 7; ++y)
        for (long z = -7; z <= 7; ++z) worst = std::max(worst, std::abs(T.equation_residual({x, y, z})));
    EXPECT_LT(worst, 1e-8) << "lambda " << lambda;
  }
}

TEST(GreenTable, AgreesWithPointEvaluation) {
  GreenTable T(3, 0.0, 6);
  EXPECT_NEAR(T({3, -1, 2}), green_value({3, -1, 2}, 0.0, 3).value, 1e-12);
  EXPECT_THROW(T({7, 0, 0}), DomainError);
}

TEST(GradGradGreen, IsSecondDifferenceOfValues) {
  auto G = [](std::vector<long> x) { return green_value(x, 0.0, 3).value; };
  const double expect = G({1, -1, 0}) - G({1, 0, 0}) - G({0, -1, 0}) + G({0, 0, 0});
  EXPECT_NEAR(grad_grad_green(0, 1, {0, 0, 0}, 0.0), expect, 1e-12);
  // the y-slot difference enters with a minus sign: G(x + e - e) - G(x + e) - G(x - e) + G(x)
  const double diag = G({1, 0, 0}) - G({2, 0, 0}) - G({0, 0, 0}) + G({1, 0, 0});
  EXPECT_NEAR(grad_grad_green(0, 0, {1, 0, 0}, 0.0), diag, 1e-12);
}

TEST(HessianRowSum, OffDiagonalDecaysWithBox) {
  GreenTable T(3, 0.0, 20);
  for (auto [i, j] : {std::pair{0, 1}, std::pair{2, 0}}) {
    const double s4 = std::abs(hessian_row_sum(T, i, j, 4));
    const double s8 = std::abs(hessian_row_sum(T, i, j, 8));
    const double s16 = std::abs(hessian_row_sum(T, i, j, 16));
    EXPECT_GT(s4, s8);
    EXPECT_GT(s8, s16);
    // R^{1-d}: each doubling divides by about 4
    EXPECT_NEAR(s8 / s16, 4.0, 1.0);
  }
}

TEST(HessianRowSum, DiagonalBoxSumIsFaceFlux) {
  // the sum telescopes to the flux of grad_i G through two faces of the cube,
  // which tends to 1/d rather than 0
  GreenTable T(3, 0.0, 20);
  for (int R : {4, 8, 16}) EXPECT_NEAR(hessian_row_sum(T, 1, 1, R), 1.0 / 3.0, 1e-10);
}

TEST(HessianL2Sum, PositiveSymmetricAndConverging) {
  GreenTable T(3, 0.0, 26);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_GT(hessian_l2_sum(T, i, j, 24).total, 0.0);
  EXPECT_NEAR(hessian_l2_sum(T, 0, 1, 24).total, hessian_l2_sum(T, 1, 0, 24).total, 1e-12);
  const double s6 = hessian_l2_sum(T, 0, 1, 6).partial;
  const double s12 = hessian_l2_sum(T, 0, 1, 12).partial;
  const double s24 = hessian_l2_sum(T, 0, 1, 24).partial;
  // remainder ~ R^{-d}
  EXPECT_NEAR((s12 - s6) / (s24 - s12), 8.0, 2.0);
  TailSum t = hessian_l2_sum(T, 0, 1, 24);
  EXPECT_LT(t.tail / t.total, 1e-4);
  EXPECT_NEAR(t.total, s24 + t.tail, 1e-15);
}

TEST(HessianL2Sum, LargeMassLocalises) {
  GreenTable T(3, 100.0, 12);
  const TailSum t = hessian_l2_sum(T, 0, 1, 10);
  // the stencil touches the origin at four y
  double near = 0.0;
  for (std::vector<long> y : {std::vector<long>{0, 0, 0}, {-1, 1, 0}, {0, 1, 0}, {-1, 0, 0}})
    near += std::pow(hessian_kernel(T, 0, 1, y), 2);
  EXPECT_NEAR(t.total / near, 1.0, 0.05);
}

TEST(HessianL2Sum, Errors) {
  EXPECT_THROW(hessian_l2_sum(0, 1, 0.0, 1), DomainError);
  GreenTable T(3, 0.0, 6);
  EXPECT_THROW(hessian_l2_sum(T, 0, 1, 8), DomainError);
}

TEST(TripleGrad, DecayExponentAndUniformConstant) {
  DecayReport r = triple_grad_decay_check({0.0, 0.01, 0.1, 1.0}, 24);
  ASSERT_EQ(r.fits.size(), 4u);
  for (const auto& f : r.fits) EXPECT_LE(f.exponent, -4.0 + 0.3) << "lambda " << f.lambda;
  EXPECT_LE(r.constant_ratio, 2.0);
  EXPECT_GT(r.max_constant, 0.0);
}

TEST(TripleGrad, FiniteNearOrigin) {
  GreenTable T(3, 1.0, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) EXPECT_TRUE(std::isfinite(triple_grad(T, i, j, k, {1, 0, 0})));
  EXPECT_THROW(triple_grad_decay_check({0.0}, 3), FitError);
}
