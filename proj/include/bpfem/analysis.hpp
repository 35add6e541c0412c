#pragma once

/// \file analysis.hpp
/// Error norms, the semilinear quasinorm, discrete norms of the method,
/// nodal extrema and estimated orders of convergence.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bpfem/coefficients.hpp"
#include "bpfem/forms.hpp"
#include "bpfem/quadrature.hpp"
#include "bpfem/space.hpp"

namespace bpfem {

using GradientFunction = std::function<std::array<double, 2>(Point)>;

struct ExactSolution {
  ScalarFunction value;
  GradientFunction gradient;
};

struct ErrorRecord {
  std::size_t level = 0;
  double h = 0.0;
  std::size_t ndof = 0;
  double err_l2 = 0.0;
  double err_h1semi = 0.0;
  double err_energy = 0.0;
  std::optional<double> err_quasinorm;
  std::size_t iterations = 0;
  double min_nodal = 0.0;
  double max_nodal = 0.0;
};

struct NormErrors {
  double l2 = 0.0;
  double h1semi = 0.0;
  double energy = 0.0;
};

inline int error_quadrature_degree(int k) { return std::max(2 * k + 2, 8); }

/// Value and physical gradient of a field at a reference point of cell t.
inline std::pair<double, std::array<double, 2>> eval_with_gradient(const NodalField& v, std::size_t t, double xi,
                                                                   double eta) {
  const FeSpace& space = *v.space;
  const std::size_t nloc = space.dofs_per_cell();
  std::array<double, 6> phi{};
  std::array<std::array<double, 2>, 6> gref{};
  space.basis().eval(xi, eta, phi.data());
  space.basis().eval_grad(xi, eta, gref.data());
  const CellGeometry geo = space.geometry(t);
  const std::size_t* dofs = space.cell_dofs(t);
  double val = 0.0;
  std::array<double, 2> g{0.0, 0.0};
  for (std::size_t a = 0; a < nloc; ++a) {
    const double c = v[dofs[a]];
    const auto ga = geo.push_grad(gref[a]);
    val += c * phi[a];
    g[0] += c * ga[0];
    g[1] += c * ga[1];
  }
  return {val, g};
}

/// L2, H1-seminorm and energy norm of e = u_h - exact, the energy norm being
/// sqrt((D grad e, grad e) + (mu e, e)). Semilinear specs contribute only the
/// diffusion part.
inline NormErrors error_norms(const NodalField& uh, const ExactSolution& exact, const ProblemSpec& spec) {
  if (!uh.space) throw std::invalid_argument("error_norms needs a finite element field");
  const FeSpace& space = *uh.space;
  const QuadratureRule rule = triangle_rule(error_quadrature_degree(space.degree()));
  double l2 = 0.0, h1 = 0.0, en = 0.0;
  for (std::size_t t = 0; t < space.mesh().num_triangles(); ++t) {
    const CellGeometry geo = space.geometry(t);
    const double jdet = std::abs(geo.det);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto [xi, eta] = rule.points[q];
      const Point x = geo.map(xi, eta);
      auto [val, g] = eval_with_gradient(uh, t, xi, eta);
      const double e = val - (exact.value ? exact.value(x) : 0.0);
      if (exact.gradient) {
        const auto ge = exact.gradient(x);
        g[0] -= ge[0];
        g[1] -= ge[1];
      }
      const double w = rule.weights[q] * jdet;
      const auto dg = spec.diffusion.at(t, x).apply(g);
      const double mu = spec.semilinear() ? 0.0 : spec.reaction.at(t, x);
      l2 += w * e * e;
      h1 += w * (g[0] * g[0] + g[1] * g[1]);
      en += w * (dg[0] * g[0] + dg[1] * g[1] + mu * e * e);
    }
  }
  return {std::sqrt(l2), std::sqrt(h1), std::sqrt(std::max(0.0, en))};
}

/// Energy norm of a finite element function, sqrt(a(v, v)) by quadrature.
inline double energy_norm(const NodalField& v, const ProblemSpec& spec) {
  return error_norms(v, ExactSolution{}, spec).energy;
}

/// Evaluates a pointwise quantity at quadrature point (t, xi, eta, x).
using CellEvaluator = std::function<double(std::size_t t, double xi, double eta, Point x)>;

inline CellEvaluator field_evaluator(const NodalField& v) {
  return [&v](std::size_t t, double xi, double eta, Point) { return v.eval_cell(t, xi, eta); };
}

inline CellEvaluator function_evaluator(ScalarFunction g) {
  return [g = std::move(g)](std::size_t, double, double, Point x) { return g(x); };
}

/// Integral over the mesh of fn(v(x), w(x)) by the rule of the given degree.
inline double integrate_pair(const FeSpace& space, const CellEvaluator& v, const CellEvaluator& w, int degree,
                             const std::function<double(double, double)>& fn) {
  const QuadratureRule rule = triangle_rule(degree);
  double s = 0.0;
  for (std::size_t t = 0; t < space.mesh().num_triangles(); ++t) {
    const CellGeometry geo = space.geometry(t);
    const double jdet = std::abs(geo.det);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto [xi, eta] = rule.points[q];
      const Point x = geo.map(xi, eta);
      s += rule.weights[q] * jdet * fn(v(t, xi, eta, x), w ? w(t, xi, eta, x) : 0.0);
    }
  }
  return s;
}

/// |||v|||_{w,p} = sqrt(int |v|^2 (|w| + |v|)^{p-2}).
inline double quasinorm(const FeSpace& space, const CellEvaluator& v, const CellEvaluator& w, double p) {
  if (!(p >= 2.0)) throw std::invalid_argument("quasinorm needs p >= 2");
  const double s = integrate_pair(space, v, w, nonlinear_quadrature_degree(space.degree()), [p](double a, double b) {
    return a * a * std::pow(std::abs(a) + std::abs(b), p - 2.0);
  });
  return std::sqrt(std::max(0.0, s));
}

inline double quasinorm(const NodalField& v, const ScalarFunction& w, double p) {
  if (!v.space) throw std::invalid_argument("quasinorm needs a finite element field");
  return quasinorm(*v.space, field_evaluator(v), w ? function_evaluator(w) : CellEvaluator{}, p);
}

/// |||u - u_h|||_{u,p}, the reference being the exact solution.
inline double quasinorm_error(const NodalField& uh, const ScalarFunction& exact, double p) {
  if (!uh.space) throw std::invalid_argument("quasinorm needs a finite element field");
  const CellEvaluator diff = [&](std::size_t t, double xi, double eta, Point x) {
    return exact(x) - uh.eval_cell(t, xi, eta);
  };
  return quasinorm(*uh.space, diff, function_evaluator(exact), p);
}

/// ||v||_{0,p} with the same quadrature as the quasinorm.
inline double lp_norm(const FeSpace& space, const CellEvaluator& v, double p) {
  const double s = integrate_pair(space, v, {}, nonlinear_quadrature_degree(space.degree()),
                                  [p](double a, double) { return std::pow(std::abs(a), p); });
  return std::pow(std::max(0.0, s), 1.0 / p);
}

struct MeshNorms {
  double stab = 0.0;    // ||v||_s
  double lumped = 0.0;  // |v|_h
  double mesh = 0.0;    // ||v||_P = sqrt(||v||_a^2 + ||v||_s^2)
};

/// Discrete norms of an interior-supported field on the system's space;
/// ||v||_a^2 is taken as v^T A v over interior values.
inline MeshNorms stab_and_mesh_norms(const AssembledSystem& sys, const NodalField& v) {
  const Eigen::VectorXd vi = sys.restrict(v);
  const double s2 = (sys.s_diag.array() * vi.array().square()).sum();
  const double a2 = vi.dot(sys.A * vi);
  const double h2 = sys.space ? lumped_product(sys.space, v, v) : 0.0;
  return {std::sqrt(s2), std::sqrt(std::max(0.0, h2)), std::sqrt(std::max(0.0, a2 + s2))};
}

/// rate_j = log(e_{j-1}/e_j) / log(h_{j-1}/h_j); entry 0 is always absent,
/// as is any rate involving a non-positive error or non-decreasing h.
inline std::vector<std::optional<double>> eoc(const std::vector<std::pair<double, double>>& h_err) {
  std::vector<std::optional<double>> rates(h_err.size());
  for (std::size_t j = 1; j < h_err.size(); ++j) {
    const auto [h0, e0] = h_err[j - 1];
    const auto [h1, e1] = h_err[j];
    if (!(e0 > 0.0 && e1 > 0.0 && h1 > 0.0 && h0 > h1)) continue;
    rates[j] = std::log(e0 / e1) / std::log(h0 / h1);
  }
  return rates;
}

/// (min, max) over interior nodal values; (+inf, -inf) when there are none.
inline std::pair<double, double> nodal_extrema(const NodalField& v) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v.is_interior(i)) continue;
    lo = std::min(lo, v[i]);
    hi = std::max(hi, v[i]);
  }
  return {lo, hi};
}

}  // namespace bpfem
