#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bpfem/analysis.hpp"
#include "oracle_util.hpp"

using namespace bpfem;
using std::numbers::pi;

namespace {

double sinsin(Point p) { return std::sin(pi * p.x) * std::sin(pi * p.y); }

NodalField random_interior_field(const SpacePtr& s, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  NodalField v = NodalField::zeros(s);
  for (auto i : s->interior_dofs()) v[i] = u(rng);
  return v;
}

}  // namespace

TEST(ErrorNorms, LinearIsReproduced) {
  const auto s = build_space(generate_obtuse_layer(2), 1);
  auto g = [](Point p) { return 1.0 + 2.0 * p.x - 0.5 * p.y; };
  const ExactSolution exact{g, [](Point) { return std::array<double, 2>{2.0, -0.5}; }};
  ProblemSpec spec;
  spec.reaction = 3.0;
  const auto e = error_norms(interpolate(s, g), exact, spec);
  EXPECT_LE(e.l2, 1e-12);
  EXPECT_LE(e.h1semi, 1e-12);
  EXPECT_LE(e.energy, 1e-12);
}

TEST(ErrorNorms, ZeroIsZero) {
  const auto s = build_space(generate_criss_cross(3, 3), 2);
  const auto e = error_norms(NodalField::zeros(s), ExactSolution{}, ProblemSpec{});
  EXPECT_EQ(e.l2, 0.0);
  EXPECT_EQ(e.h1semi, 0.0);
  EXPECT_EQ(e.energy, 0.0);
}

TEST(ErrorNorms, InterpolationErrorMatchesRefinedQuadrature) {
  const auto s = build_space(generate_criss_cross(4, 4), 1);
  const NodalField ih = interpolate(s, sinsin);
  const double lib = error_norms(ih, ExactSolution{sinsin, {}}, ProblemSpec{}).l2;
  const double ref =
      std::sqrt(oracle::integrate_field(ih, [](Point x, double v) { return (v - sinsin(x)) * (v - sinsin(x)); }, 3));
  EXPECT_NEAR(lib, ref, 1e-8 * ref);
}

TEST(ErrorNorms, EnergyCombinesDiffusionAndReaction) {
  const auto s = build_space(generate_criss_cross(4, 4), 2);
  const NodalField ih = interpolate(s, sinsin);
  const ExactSolution exact{sinsin, [](Point p) {
                              return std::array<double, 2>{pi * std::cos(pi * p.x) * std::sin(pi * p.y),
                                                           pi * std::sin(pi * p.x) * std::cos(pi * p.y)};
                            }};
  ProblemSpec spec;
  spec.diffusion = Tensor2::identity(0.01);
  spec.reaction = 4.0;
  const auto e = error_norms(ih, exact, spec);
  EXPECT_NEAR(e.energy, std::sqrt(0.01 * e.h1semi * e.h1semi + 4.0 * e.l2 * e.l2), 1e-14);
  spec.exponent = 4.0;  // semilinear: only the diffusion part
  EXPECT_NEAR(error_norms(ih, exact, spec).energy, 0.1 * e.h1semi, 1e-14);
}

TEST(ErrorNorms, EnergyNormMatchesMatrixForm) {
  for (int k : {1, 2}) {
    const auto s = build_space(generate_obtuse_layer(2), k);
    ProblemSpec spec;
    spec.diffusion = Tensor2::rotated(3.0, 0.5, 0.4);
    spec.reaction = 2.0;
    const auto sys = assemble_system(s, spec, 1.0);
    std::mt19937 rng(17);
    for (int r = 0; r < 10; ++r) {
      const NodalField v = random_interior_field(s, rng);
      const Eigen::VectorXd x = sys.restrict(v);
      const double a = std::sqrt(x.dot(sys.A * x));
      EXPECT_NEAR(energy_norm(v, spec), a, 1e-10 * a);
    }
  }
}

TEST(Quasinorm, ExponentTwoIsL2) {
  const auto s = build_space(generate_criss_cross(4, 4), 1);
  std::mt19937 rng(2);
  const NodalField v = random_interior_field(s, rng);
  const double l2 = error_norms(v, ExactSolution{}, ProblemSpec{}).l2;
  EXPECT_NEAR(quasinorm(v, sinsin, 2.0), l2, 1e-13);
  EXPECT_EQ(quasinorm(NodalField::zeros(s), sinsin, 4.0), 0.0);
  EXPECT_THROW(quasinorm(v, sinsin, 1.5), std::invalid_argument);
}

TEST(Quasinorm, MatchesIndependentQuadrature) {
  const auto s = build_space(generate_criss_cross(4, 4), 1);
  std::mt19937 rng(8);
  const NodalField v = random_interior_field(s, rng);
  // w = 0.5 + x is linear, so |v|^2 (|w| + |v|)^2 is piecewise polynomial of
  // degree 4 only where v does not change sign; use a fine composite rule.
  auto w = [](Point p) { return 0.5 + p.x; };
  const double ref = std::sqrt(oracle::integrate_field(
      v, [&](Point x, double vv) { return vv * vv * std::pow(std::abs(w(x)) + std::abs(vv), 2.0); }, 3));
  EXPECT_NEAR(quasinorm(v, w, 4.0), ref, 1e-6 * ref);
}

TEST(Quasinorm, ErrorOfExactInterpolantIsZeroForLinears) {
  const auto s = build_space(generate_criss_cross(3, 3), 1);
  auto g = [](Point p) { return p.x - p.y; };
  EXPECT_LE(quasinorm_error(interpolate(s, g), g, 4.0), 1e-14);
}

TEST(MeshNormsTest, ZeroAndOrdering) {
  const auto s = build_space(generate_criss_cross(4, 4), 1);
  ProblemSpec spec;
  spec.reaction = 1.0;
  const auto sys = assemble_system(s, spec, 1.0);
  const auto z = stab_and_mesh_norms(sys, NodalField::zeros(s));
  EXPECT_EQ(z.stab, 0.0);
  EXPECT_EQ(z.lumped, 0.0);
  EXPECT_EQ(z.mesh, 0.0);
  std::mt19937 rng(4);
  for (int r = 0; r < 20; ++r) {
    const NodalField v = random_interior_field(s, rng);
    const auto n = stab_and_mesh_norms(sys, v);
    const Eigen::VectorXd x = sys.restrict(v);
    EXPECT_GE(n.mesh, std::sqrt(x.dot(sys.A * x)));
    EXPECT_GE(n.mesh, n.stab);
  }
}

TEST(MeshNormsTest, SingleNodeByHand) {
  // One interior node at the centre of [0, 0.5]^2, mesh function 0.5.
  const auto s = build_space(generate_criss_cross(1, 1, Rect{0, 0.5, 0, 0.5}), 1);
  ProblemSpec spec;
  spec.reaction = 4.0;
  const auto sys = assemble_system(s, spec, 1.0);
  NodalField v = NodalField::zeros(s);
  v[s->interior_dofs()[0]] = 3.0;
  const auto n = stab_and_mesh_norms(sys, v);
  const double s_weight = 1.0 + 4.0 * 0.25;
  EXPECT_DOUBLE_EQ(n.stab, 3.0 * std::sqrt(s_weight));
  EXPECT_DOUBLE_EQ(n.lumped, 3.0 * 0.5);
  // Hat function on four right triangles with legs 0.5/sqrt 2: |grad|^2 area
  // sums to 4 and the mass entry to |patch| / 6 = 0.25 / 6.
  const double a = 9.0 * (4.0 + 4.0 * 0.25 / 6.0);
  EXPECT_NEAR(n.mesh, std::sqrt(a + 9.0 * s_weight), 1e-13);
}

TEST(Eoc, Examples) {
  const auto r = eoc({{0.1, 0.1}, {0.05, 0.025}});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_FALSE(r[0]);
  ASSERT_TRUE(r[1]);
  EXPECT_NEAR(*r[1], 2.0, 1e-15);
  EXPECT_EQ(*eoc({{0.2, 0.3}, {0.1, 0.3}})[1], 0.0);
  const auto bad = eoc({{0.2, 0.3}, {0.1, 0.0}, {0.05, 0.1}});
  EXPECT_FALSE(bad[1]);
  EXPECT_FALSE(bad[2]);
  EXPECT_FALSE(eoc({{0.1, 0.3}, {0.1, 0.2}})[1]);
  EXPECT_TRUE(eoc({}).empty());
}

TEST(NodalExtremaTest, ConstantAndInteriorOnly) {
  const auto s = build_space(generate_criss_cross(3, 3), 2);
  NodalField c = interpolate(s, [](Point) { return 0.7; });
  auto [lo, hi] = nodal_extrema(c);
  EXPECT_EQ(lo, 0.7);
  EXPECT_EQ(hi, 0.7);
  for (auto b : s->boundary_dofs()) c[b] = -100.0;
  EXPECT_EQ(nodal_extrema(c).first, 0.7);
}
