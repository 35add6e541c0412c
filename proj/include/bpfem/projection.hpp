#pragma once

/// \file projection.hpp
/// Nodal box projection v -> (v+, v-) onto the admissible set.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bpfem/space.hpp"

namespace bpfem {

/// One side of the box: a constant, or one value per dof.
class Bound {
 public:
  Bound(double value = 0.0) : constant_(value) {}  // NOLINT: implicit from a number is intended
  explicit Bound(Eigen::VectorXd nodal) : nodal_(std::move(nodal)) {}

  [[nodiscard]] bool is_nodal() const { return nodal_.size() > 0; }
  [[nodiscard]] double at(std::size_t i) const {
    return is_nodal() ? nodal_[static_cast<Eigen::Index>(i)] : constant_;
  }
  [[nodiscard]] double constant() const { return constant_; }
  [[nodiscard]] const Eigen::VectorXd& nodal() const { return nodal_; }

 private:
  double constant_ = 0.0;
  Eigen::VectorXd nodal_;
};

struct BoundsBox {
  Bound lower = 0.0;
  Bound upper = std::numeric_limits<double>::infinity();

  static BoundsBox unbounded() {
    return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  }

  /// Throws unless lower < upper at every one of the first n dofs. lower may
  /// be -inf and upper +inf; NaN is rejected.
  void validate(std::size_t n) const {
    if (lower.is_nodal() && static_cast<std::size_t>(lower.nodal().size()) != n) {
      throw std::invalid_argument("lower bound length mismatch");
    }
    if (upper.is_nodal() && static_cast<std::size_t>(upper.nodal().size()) != n) {
      throw std::invalid_argument("upper bound length mismatch");
    }
    const std::size_t count = (lower.is_nodal() || upper.is_nodal()) ? n : 1;
    for (std::size_t i = 0; i < count; ++i) {
      const double lo = lower.at(i), hi = upper.at(i);
      if (std::isnan(lo) || std::isnan(hi) || !(lo < hi) || lo == std::numeric_limits<double>::infinity() ||
          hi == -std::numeric_limits<double>::infinity()) {
        throw std::invalid_argument("invalid bounds box: need lower < upper");
      }
    }
  }

  [[nodiscard]] double clip(std::size_t i, double v) const {
    return std::max(lower.at(i), std::min(v, upper.at(i)));
  }
};

struct SplitField {
  NodalField plus;
  NodalField minus;
};

/// Interior dofs are clipped into the box; boundary dofs go to v+ unchanged.
inline SplitField split(const NodalField& v, const BoundsBox& box) {
  box.validate(v.size());
  SplitField out{v, v};
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v.is_interior(i)) {
      out.plus[i] = box.clip(i, v[i]);
      out.minus[i] = v[i] - out.plus[i];
    } else {
      out.minus[i] = 0.0;
    }
  }
  return out;
}

/// Exact check, no tolerance: every interior value lies in [lower, upper].
inline bool is_admissible(const NodalField& v, const BoundsBox& box) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v.is_interior(i)) continue;
    if (!(v[i] >= box.lower.at(i) && v[i] <= box.upper.at(i))) return false;
  }
  return true;
}

}  // namespace bpfem
