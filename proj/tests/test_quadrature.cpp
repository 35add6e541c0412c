#include <gtest/gtest.h>

#include <cmath>

#include "bpfem/quadrature.hpp"

using namespace bpfem;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// int_T x^a y^b over the reference triangle = a! b! / (a + b + 2)!
double monomial_integral(int a, int b) { return factorial(a) * factorial(b) / factorial(a + b + 2); }

}  // namespace

class RuleExactness : public ::testing::TestWithParam<int> {};

TEST_P(RuleExactness, IntegratesMonomials) {
  const int degree = GetParam();
  const QuadratureRule r = triangle_rule(degree);
  EXPECT_GE(r.degree, degree);
  double wsum = 0.0;
  for (double w : r.weights) {
    EXPECT_GT(w, 0.0);
    wsum += w;
  }
  EXPECT_NEAR(wsum, 0.5, 1e-14);
  for (int a = 0; a <= degree; ++a) {
    for (int b = 0; a + b <= degree; ++b) {
      double s = 0.0;
      for (std::size_t q = 0; q < r.size(); ++q) {
        s += r.weights[q] * std::pow(r.points[q][0], a) * std::pow(r.points[q][1], b);
      }
      EXPECT_NEAR(s, monomial_integral(a, b), 1e-14) << "x^" << a << " y^" << b;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Degrees, RuleExactness, ::testing::Values(1, 2, 3, 4, 5, 6, 7, 8, 10, 12));

TEST(Quadrature, PointsInsideReference) {
  for (int d = 1; d <= 12; ++d) {
    for (const auto& p : triangle_rule(d).points) {
      EXPECT_GT(p[0], 0.0);
      EXPECT_GT(p[1], 0.0);
      EXPECT_LT(p[0] + p[1], 1.0);
    }
  }
}

TEST(Basis, KroneckerAndPartitionOfUnity) {
  for (int k : {1, 2}) {
    const LagrangeBasis basis(k);
    const auto nodes = LagrangeBasis::reference_nodes();
    std::array<double, 6> phi{};
    for (std::size_t i = 0; i < basis.size(); ++i) {
      basis.eval(nodes[i][0], nodes[i][1], phi.data());
      for (std::size_t j = 0; j < basis.size(); ++j) EXPECT_NEAR(phi[j], i == j ? 1.0 : 0.0, 1e-15);
    }
    basis.eval(0.2, 0.3, phi.data());
    double s = 0.0;
    for (std::size_t j = 0; j < basis.size(); ++j) s += phi[j];
    EXPECT_NEAR(s, 1.0, 1e-15);
  }
}

TEST(Basis, GradientsMatchFiniteDifferences) {
  const double h = 1e-6;
  for (int k : {1, 2}) {
    const LagrangeBasis basis(k);
    std::array<double, 6> p{}, m{};
    std::array<std::array<double, 2>, 6> g{};
    const double xi = 0.23, eta = 0.41;
    basis.eval_grad(xi, eta, g.data());
    basis.eval(xi + h, eta, p.data());
    basis.eval(xi - h, eta, m.data());
    for (std::size_t j = 0; j < basis.size(); ++j) EXPECT_NEAR(g[j][0], (p[j] - m[j]) / (2 * h), 1e-8);
    basis.eval(xi, eta + h, p.data());
    basis.eval(xi, eta - h, m.data());
    for (std::size_t j = 0; j < basis.size(); ++j) EXPECT_NEAR(g[j][1], (p[j] - m[j]) / (2 * h), 1e-8);
  }
}

TEST(Basis, RejectsDegree) {
  EXPECT_THROW(LagrangeBasis(0), std::invalid_argument);
  EXPECT_THROW(LagrangeBasis(3), std::invalid_argument);
}
