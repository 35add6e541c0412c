#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "bpfem/projection.hpp"

using namespace bpfem;

namespace {

NodalField vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return NodalField(nullptr, x);
}

}  // namespace

TEST(Split, ClipsIntoBox) {
  const auto s = split(vec({-0.5, 0.3, 1.2}), BoundsBox{0.0, 1.0});
  EXPECT_EQ(s.plus.values, vec({0.0, 0.3, 1.0}).values);
  EXPECT_EQ(s.minus[0], -0.5);
  EXPECT_EQ(s.minus[1], 0.0);
  EXPECT_NEAR(s.minus[2], 0.2, 1e-15);
}

TEST(Split, AdmissibleIsIdentity) {
  const auto v = vec({0.0, 0.5, 1.0});
  const auto s = split(v, BoundsBox{0.0, 1.0});
  EXPECT_EQ(s.plus.values, v.values);
  EXPECT_EQ(s.minus.values, Eigen::VectorXd::Zero(3));
}

TEST(Split, HalfInfiniteBox) {
  const auto s = split(vec({-1.0, 2.0}), BoundsBox{});
  EXPECT_EQ(s.plus.values, vec({0.0, 2.0}).values);
  EXPECT_EQ(s.minus.values, vec({-1.0, 0.0}).values);
}

TEST(Split, NodalBounds) {
  Eigen::VectorXd lo(3), hi(3);
  lo << 0, 0.5, -1;
  hi << 1, 0.6, 0;
  const auto s = split(vec({2.0, 0.0, -0.5}), BoundsBox{Bound(lo), Bound(hi)});
  EXPECT_EQ(s.plus.values, vec({1.0, 0.5, -0.5}).values);
}

TEST(Split, BoundaryDofsPassThrough) {
  const auto space = build_space(generate_criss_cross(1, 1), 1);
  NodalField v = NodalField::zeros(space);
  v.values.setConstant(-3.0);
  const auto s = split(v, BoundsBox{0.0, 1.0});
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (space->is_boundary(i)) {
      EXPECT_EQ(s.plus[i], -3.0);
      EXPECT_EQ(s.minus[i], 0.0);
    } else {
      EXPECT_EQ(s.plus[i], 0.0);
      EXPECT_EQ(s.minus[i], -3.0);
    }
  }
}

TEST(Split, RejectsInvalidBox) {
  EXPECT_THROW(split(vec({0.0}), BoundsBox{1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(split(vec({0.0}), BoundsBox{1.0, 0.0}), std::invalid_argument);
  Eigen::VectorXd lo(2);
  lo << 0, 0;
  EXPECT_THROW(split(vec({0.0, 1.0, 2.0}), BoundsBox{Bound(lo), 1.0}), std::invalid_argument);
}

TEST(Admissible, ClosedAndExact) {
  const BoundsBox box{0.0, 1.0};
  EXPECT_TRUE(is_admissible(split(vec({-7, 0.4, 9}), box).plus, box));
  EXPECT_TRUE(is_admissible(vec({1.0}), box));
  EXPECT_TRUE(is_admissible(vec({0.0}), box));
  EXPECT_FALSE(is_admissible(vec({1.0 + 1e-15}), box));
  EXPECT_FALSE(is_admissible(vec({std::nextafter(0.0, -1.0)}), box));
  EXPECT_FALSE(is_admissible(vec({std::numeric_limits<double>::quiet_NaN()}), box));
}
