#pragma once

/// \file quadrature.hpp
/// Quadrature on the reference triangle {(xi, eta) : xi, eta >= 0, xi + eta <= 1}
/// and Lagrange P1/P2 shape functions.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace bpfem {

struct QuadratureRule {
  std::vector<std::array<double, 2>> points;  // reference coordinates (xi, eta)
  std::vector<double> weights;                // sum to 1/2, the reference area
  int degree = 0;

  [[nodiscard]] std::size_t size() const { return weights.size(); }
};

/// Gauss-Legendre nodes and weights on [0, 1], by Newton iteration on P_n.
inline void gauss_legendre_unit(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[static_cast<std::size_t>(i)] = 0.5 * (1.0 - x);
    weights[static_cast<std::size_t>(i)] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
}

/// Conical-product (collapsed) Gauss rule exact for total degree `degree`.
/// The Duffy map x = s, y = t (1 - s) adds one power of (1 - s) through its
/// Jacobian, so the s-direction carries degree + 1 and needs
/// ceil((degree + 2) / 2) Gauss points; the t-direction uses the same count.
inline QuadratureRule collapsed_gauss_rule(int degree) {
  if (degree < 0) throw std::invalid_argument("quadrature degree must be >= 0");
  const int n = (degree + 3) / 2;
  std::vector<double> x, w;
  gauss_legendre_unit(n, x, w);
  QuadratureRule rule;
  rule.degree = degree;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double s = x[static_cast<std::size_t>(i)];
      const double t = x[static_cast<std::size_t>(j)];
      rule.points.push_back({s, t * (1.0 - s)});
      rule.weights.push_back(w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(j)] * (1.0 - s));
    }
  }
  return rule;
}

namespace detail {

inline void add_orbit3(QuadratureRule& r, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  r.points.push_back({a, a});
  r.points.push_back({b, a});
  r.points.push_back({a, b});
  for (int k = 0; k < 3; ++k) r.weights.push_back(w);
}

}  // namespace detail

/// Fully symmetric rules (centroid, 3-point, Dunavant 6- and 7-point).
/// Degrees above 5 fall back to the collapsed Gauss rule.
inline QuadratureRule triangle_rule(int degree) {
  QuadratureRule r;
  if (degree <= 1) {
    r.degree = 1;
    r.points.push_back({1.0 / 3.0, 1.0 / 3.0});
    r.weights.push_back(0.5);
  } else if (degree == 2) {
    r.degree = 2;
    detail::add_orbit3(r, 1.0 / 6.0, 1.0 / 6.0);
  } else if (degree <= 4) {
    r.degree = 4;
    detail::add_orbit3(r, 0.445948490915965, 0.5 * 0.223381589678011);
    detail::add_orbit3(r, 0.091576213509771, 0.5 * 0.109951743655322);
  } else if (degree == 5) {
    r.degree = 5;
    const double s15 = std::sqrt(15.0);
    r.points.push_back({1.0 / 3.0, 1.0 / 3.0});
    r.weights.push_back(9.0 / 80.0);
    detail::add_orbit3(r, (6.0 - s15) / 21.0, (155.0 - s15) / 2400.0);
    detail::add_orbit3(r, (6.0 + s15) / 21.0, (155.0 + s15) / 2400.0);
  } else {
    return collapsed_gauss_rule(degree);
  }
  return r;
}

/// Lagrange basis on the reference triangle. Local ordering: vertices 0,1,2,
/// then (k = 2) midpoints of edges (0,1), (1,2), (2,0).
class LagrangeBasis {
 public:
  explicit LagrangeBasis(int degree) : degree_(degree) {
    if (degree != 1 && degree != 2) throw std::invalid_argument("Lagrange degree must be 1 or 2");
  }

  [[nodiscard]] int degree() const { return degree_; }
  [[nodiscard]] std::size_t size() const { return degree_ == 1 ? 3 : 6; }

  static constexpr std::array<std::array<double, 2>, 6> reference_nodes() {
    return {{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {0.5, 0.0}, {0.5, 0.5}, {0.0, 0.5}}};
  }

  /// Fills `values[0..size())`.
  void eval(double xi, double eta, double* values) const {
    const double l0 = 1.0 - xi - eta, l1 = xi, l2 = eta;
    if (degree_ == 1) {
      values[0] = l0;
      values[1] = l1;
      values[2] = l2;
      return;
    }
    values[0] = l0 * (2.0 * l0 - 1.0);
    values[1] = l1 * (2.0 * l1 - 1.0);
    values[2] = l2 * (2.0 * l2 - 1.0);
    values[3] = 4.0 * l0 * l1;
    values[4] = 4.0 * l1 * l2;
    values[5] = 4.0 * l2 * l0;
  }

  /// Reference gradients, `grads[k] = {d/dxi, d/deta}`.
  void eval_grad(double xi, double eta, std::array<double, 2>* grads) const {
    if (degree_ == 1) {
      grads[0] = {-1.0, -1.0};
      grads[1] = {1.0, 0.0};
      grads[2] = {0.0, 1.0};
      return;
    }
    const double l0 = 1.0 - xi - eta, l1 = xi, l2 = eta;
    grads[0] = {-(4.0 * l0 - 1.0), -(4.0 * l0 - 1.0)};
    grads[1] = {4.0 * l1 - 1.0, 0.0};
    grads[2] = {0.0, 4.0 * l2 - 1.0};
    grads[3] = {4.0 * (l0 - l1), -4.0 * l1};
    grads[4] = {4.0 * l2, 4.0 * l1};
    grads[5] = {-4.0 * l2, 4.0 * (l0 - l2)};
  }

 private:
  int degree_;
};

}  // namespace bpfem
