#pragma once

/// \file coefficients.hpp
/// Coefficient fields for the reaction-diffusion problem and the problem
/// description consumed by assembly.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <type_traits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bpfem/mesh.hpp"
#include "bpfem/projection.hpp"

namespace bpfem {

/// Symmetric 2x2 tensor.
struct Tensor2 {
  double xx = 1.0;
  double xy = 0.0;
  double yy = 1.0;

  static Tensor2 identity(double scale = 1.0) { return {scale, 0.0, scale}; }
  /// R diag(a1, a2) R^T with R = [[cos, sin], [-sin, cos]].
  static Tensor2 rotated(double a1, double a2, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return {a1 * c * c + a2 * s * s, -a1 * c * s + a2 * s * c, a1 * s * s + a2 * c * c};
  }

  [[nodiscard]] Tensor2 scaled(double f) const { return {f * xx, f * xy, f * yy}; }
  [[nodiscard]] std::array<double, 2> eigenvalues() const {
    const double m = 0.5 * (xx + yy);
    const double r = std::hypot(0.5 * (xx - yy), xy);
    return {m - r, m + r};
  }
  [[nodiscard]] double min_eigenvalue() const { return eigenvalues()[0]; }
  /// Operator 2-norm.
  [[nodiscard]] double spectral_norm() const {
    const auto e = eigenvalues();
    return std::max(std::abs(e[0]), std::abs(e[1]));
  }
  [[nodiscard]] std::array<double, 2> apply(std::array<double, 2> g) const {
    return {xx * g[0] + xy * g[1], xy * g[0] + yy * g[1]};
  }
};

/// A coefficient given as a constant, one value per triangle, or a pointwise
/// function sampled wherever it is needed.
template <class T>
class Coefficient {
 public:
  Coefficient(T constant) : data_(std::move(constant)) {}  // NOLINT: implicit by design of the API
  Coefficient(std::vector<T> per_triangle) : data_(std::move(per_triangle)) {}  // NOLINT
  template <class F>
    requires(std::is_invocable_r_v<T, F, Point> && !std::is_convertible_v<F, T>)
  Coefficient(F fn) : data_(std::function<T(Point)>(std::move(fn))) {}  // NOLINT

  [[nodiscard]] bool is_constant() const { return std::holds_alternative<T>(data_); }
  [[nodiscard]] bool is_function() const { return std::holds_alternative<std::function<T(Point)>>(data_); }

  [[nodiscard]] T at(std::size_t cell, Point x) const {
    if (auto c = std::get_if<T>(&data_)) return *c;
    if (auto v = std::get_if<std::vector<T>>(&data_)) return v->at(cell);
    return std::get<std::function<T(Point)>>(data_)(x);
  }

  /// Samples used for sup-norms and validation of function coefficients:
  /// the corners, edge midpoints and centroid of the cell.
  template <class Fn>
  void for_each_sample(const Mesh& mesh, std::size_t cell, Fn&& fn) const {
    if (!is_function()) {
      fn(at(cell, Point{}));
      return;
    }
    const auto c = mesh.corners(cell);
    const std::array<Point, 7> pts{c[0], c[1], c[2], midpoint(c[0], c[1]), midpoint(c[1], c[2]),
                                   midpoint(c[2], c[0]),
                                   Point{(c[0].x + c[1].x + c[2].x) / 3.0, (c[0].y + c[1].y + c[2].y) / 3.0}};
    for (const auto& p : pts) fn(at(cell, p));
  }

  void check_size(const Mesh& mesh, const char* name) const {
    if (auto v = std::get_if<std::vector<T>>(&data_); v && v->size() != mesh.num_triangles()) {
      throw std::invalid_argument(std::string(name) + ": per-triangle coefficient has wrong length");
    }
  }

 private:
  std::variant<T, std::vector<T>, std::function<T(Point)>> data_;
};

using DirichletFunction = std::function<double(Point, int /*marker*/)>;

inline DirichletFunction dirichlet_by_marker(std::map<int, double> values) {
  return [values = std::move(values)](Point, int marker) {
    auto it = values.find(marker);
    return it == values.end() ? 0.0 : it->second;
  };
}

class ProblemError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// -div(D grad u) + mu u = f  (linear), or  -div(D grad u) + |u|^{p-2} u = f
/// (semilinear, when `exponent` is set; `reaction` is then ignored),
/// with u = g_D on the boundary and known bounds lower <= u <= upper.
struct ProblemSpec {
  Coefficient<Tensor2> diffusion = Tensor2::identity();
  Coefficient<double> reaction = 0.0;
  std::optional<double> exponent;
  Coefficient<double> source = 0.0;
  DirichletFunction dirichlet = [](Point, int) { return 0.0; };
  BoundsBox bounds;

  [[nodiscard]] bool semilinear() const { return exponent.has_value(); }

  void validate(const Mesh& mesh) const {
    diffusion.check_size(mesh, "diffusion");
    reaction.check_size(mesh, "reaction");
    source.check_size(mesh, "source");
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      diffusion.for_each_sample(mesh, t, [&](const Tensor2& d) {
        if (!(d.min_eigenvalue() > 0.0)) {
          throw ProblemError("diffusion tensor is not positive definite on triangle " + std::to_string(t));
        }
      });
      if (!semilinear()) {
        reaction.for_each_sample(mesh, t, [&](double mu) {
          if (!(mu >= 0.0)) throw ProblemError("negative reaction coefficient on triangle " + std::to_string(t));
        });
      }
      if (diffusion.is_constant() && (semilinear() || reaction.is_constant())) break;
    }
    if (semilinear() && !(*exponent >= 2.0)) throw ProblemError("reaction exponent must be >= 2");
    if (!bounds.lower.is_nodal() && !bounds.upper.is_nodal()) bounds.validate(1);
  }
};

}  // namespace bpfem
