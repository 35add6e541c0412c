#pragma once

/// \file space.hpp
/// Continuous Lagrange P1/P2 spaces, nodal fields, node patches and the
/// mesh-size function.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bpfem/mesh.hpp"
#include "bpfem/quadrature.hpp"

namespace bpfem {

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

/// Affine map of a triangle from the reference element.
struct CellGeometry {
  Point origin;
  std::array<double, 4> jac{};      // column-major [x1-x0, x2-x0] as (j00, j10, j01, j11)
  std::array<double, 4> inv_jac_t{};  // J^{-T}, same layout
  double det = 0.0;

  explicit CellGeometry(const std::array<Point, 3>& c) : origin(c[0]) {
    const Point e1 = c[1] - c[0];
    const Point e2 = c[2] - c[0];
    jac = {e1.x, e1.y, e2.x, e2.y};
    det = e1.x * e2.y - e2.x * e1.y;
    // J = [[e1.x, e2.x], [e1.y, e2.y]];  J^{-T} = 1/det [[e2.y, -e1.y], [-e2.x, e1.x]]
    inv_jac_t = {e2.y / det, -e2.x / det, -e1.y / det, e1.x / det};
  }

  [[nodiscard]] Point map(double xi, double eta) const {
    return {origin.x + jac[0] * xi + jac[2] * eta, origin.y + jac[1] * xi + jac[3] * eta};
  }
  /// Physical gradient from a reference gradient.
  [[nodiscard]] std::array<double, 2> push_grad(std::array<double, 2> g) const {
    return {inv_jac_t[0] * g[0] + inv_jac_t[2] * g[1], inv_jac_t[1] * g[0] + inv_jac_t[3] * g[1]};
  }
  /// Reference coordinates of a physical point.
  [[nodiscard]] std::array<double, 2> pull(Point p) const {
    const Point d = p - origin;
    // (xi, eta) = J^{-1} d, and J^{-1} is the transpose of inv_jac_t.
    return {inv_jac_t[0] * d.x + inv_jac_t[1] * d.y, inv_jac_t[2] * d.x + inv_jac_t[3] * d.y};
  }
};

class FeSpace {
 public:
  FeSpace(std::shared_ptr<const Mesh> mesh, int degree) : mesh_(std::move(mesh)), basis_(degree) {
    if (!mesh_) throw std::invalid_argument("FeSpace needs a mesh");
    build();
  }

  [[nodiscard]] const Mesh& mesh() const { return *mesh_; }
  [[nodiscard]] const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  [[nodiscard]] int degree() const { return basis_.degree(); }
  [[nodiscard]] const LagrangeBasis& basis() const { return basis_; }
  [[nodiscard]] std::size_t dofs_per_cell() const { return basis_.size(); }
  [[nodiscard]] std::size_t num_dofs() const { return nodes_.size(); }
  [[nodiscard]] const std::vector<Point>& nodes() const { return nodes_; }

  [[nodiscard]] const std::vector<std::size_t>& interior_dofs() const { return interior_; }
  [[nodiscard]] const std::vector<std::size_t>& boundary_dofs() const { return boundary_; }
  [[nodiscard]] std::size_t num_interior() const { return interior_.size(); }
  [[nodiscard]] bool is_boundary(std::size_t dof) const { return marker_.at(dof) != 0; }
  /// Boundary marker of a dof (0 for interior dofs). Vertices on several
  /// boundary segments take the smallest marker.
  [[nodiscard]] int marker(std::size_t dof) const { return marker_.at(dof); }
  /// Position of `dof` in interior_dofs(), or kNoIndex for boundary dofs.
  [[nodiscard]] std::size_t interior_index(std::size_t dof) const { return interior_index_.at(dof); }

  [[nodiscard]] const std::size_t* cell_dofs(std::size_t t) const {
    return &cell_dofs_[t * dofs_per_cell()];
  }
  [[nodiscard]] const std::vector<std::size_t>& cell_dof_map() const { return cell_dofs_; }
  [[nodiscard]] CellGeometry geometry(std::size_t t) const { return CellGeometry(mesh_->corners(t)); }

  friend bool operator==(const FeSpace& a, const FeSpace& b) {
    return a.degree() == b.degree() && *a.mesh_ == *b.mesh_ && a.cell_dofs_ == b.cell_dofs_ &&
           a.interior_ == b.interior_ && a.boundary_ == b.boundary_ && a.marker_ == b.marker_;
  }

 private:
  void build() {
    const Mesh& m = *mesh_;
    const std::size_t nv = m.num_vertices();
    nodes_ = m.vertices();
    if (degree() == 2) {
      for (const auto& e : m.edges()) nodes_.push_back(midpoint(m.vertices()[e[0]], m.vertices()[e[1]]));
    }
    const std::size_t ndof = nodes_.size();

    const std::size_t per = dofs_per_cell();
    cell_dofs_.resize(m.num_triangles() * per);
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
      const auto& tri = m.triangles()[t];
      std::size_t* d = &cell_dofs_[t * per];
      d[0] = tri[0];
      d[1] = tri[1];
      d[2] = tri[2];
      if (per == 6) {
        d[3] = nv + m.edge_index(tri[0], tri[1]);
        d[4] = nv + m.edge_index(tri[1], tri[2]);
        d[5] = nv + m.edge_index(tri[2], tri[0]);
      }
    }

    marker_.assign(ndof, 0);
    for (std::size_t e = 0; e < m.edges().size(); ++e) {
      const int mk = m.edge_marker(e);
      if (mk == 0) continue;
      for (auto v : m.edges()[e]) {
        if (marker_[v] == 0 || mk < marker_[v]) marker_[v] = mk;
      }
      if (degree() == 2) marker_[nv + e] = mk;
    }
    interior_index_.assign(ndof, kNoIndex);
    for (std::size_t i = 0; i < ndof; ++i) {
      if (marker_[i] == 0) {
        interior_index_[i] = interior_.size();
        interior_.push_back(i);
      } else {
        boundary_.push_back(i);
      }
    }
  }

  std::shared_ptr<const Mesh> mesh_;
  LagrangeBasis basis_;
  std::vector<Point> nodes_;
  std::vector<std::size_t> cell_dofs_;
  std::vector<int> marker_;
  std::vector<std::size_t> interior_;
  std::vector<std::size_t> boundary_;
  std::vector<std::size_t> interior_index_;
};

using SpacePtr = std::shared_ptr<const FeSpace>;

inline SpacePtr build_space(std::shared_ptr<const Mesh> mesh, int degree) {
  return std::make_shared<const FeSpace>(std::move(mesh), degree);
}

inline SpacePtr build_space(Mesh mesh, int degree) {
  return build_space(std::make_shared<const Mesh>(std::move(mesh)), degree);
}

/// Coefficient vector over the dofs of a space. A field without a space is
/// a plain algebraic vector whose entries are all treated as interior dofs.
struct NodalField {
  SpacePtr space;
  Eigen::VectorXd values;

  NodalField() = default;
  NodalField(SpacePtr s, Eigen::VectorXd v) : space(std::move(s)), values(std::move(v)) {
    if (space && static_cast<std::size_t>(values.size()) != space->num_dofs()) {
      throw std::invalid_argument("NodalField length does not match the space");
    }
  }
  static NodalField zeros(SpacePtr s) {
    const auto n = static_cast<Eigen::Index>(s->num_dofs());
    return {std::move(s), Eigen::VectorXd::Zero(n)};
  }

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  [[nodiscard]] bool is_interior(std::size_t i) const { return !space || !space->is_boundary(i); }
  double operator[](std::size_t i) const { return values[static_cast<Eigen::Index>(i)]; }
  double& operator[](std::size_t i) { return values[static_cast<Eigen::Index>(i)]; }

  /// Value at reference point (xi, eta) of cell t.
  [[nodiscard]] double eval_cell(std::size_t t, double xi, double eta) const {
    std::array<double, 6> phi{};
    space->basis().eval(xi, eta, phi.data());
    const std::size_t* d = space->cell_dofs(t);
    double s = 0.0;
    for (std::size_t k = 0; k < space->dofs_per_cell(); ++k) s += phi[k] * (*this)[d[k]];
    return s;
  }
};

inline void require_same_space(const NodalField& a, const NodalField& b) {
  if (a.space != b.space || a.size() != b.size()) {
    throw std::invalid_argument("fields live on different spaces");
  }
}

using ScalarFunction = std::function<double(Point)>;

inline NodalField interpolate(const SpacePtr& space, const ScalarFunction& g) {
  NodalField f = NodalField::zeros(space);
  for (std::size_t i = 0; i < space->num_dofs(); ++i) f[i] = g(space->nodes()[i]);
  return f;
}

/// Mean diameter of the triangles around each vertex, extended as a P1
/// function; at P2 midside nodes the value is the mean of the two endpoints.
inline NodalField mesh_function(const SpacePtr& space) {
  const Mesh& m = space->mesh();
  std::vector<double> diam(m.num_triangles());
  for (std::size_t t = 0; t < m.num_triangles(); ++t) diam[t] = m.diameter(t);
  NodalField h = NodalField::zeros(space);
  for (std::size_t v = 0; v < m.num_vertices(); ++v) {
    const auto& tris = m.vertex_triangles(v);
    double s = 0.0;
    for (auto t : tris) s += diam[t];
    h[v] = s / static_cast<double>(tris.size());
  }
  if (space->degree() == 2) {
    const std::size_t nv = m.num_vertices();
    for (std::size_t e = 0; e < m.edges().size(); ++e) {
      const auto& ed = m.edges()[e];
      h[nv + e] = 0.5 * (h[ed[0]] + h[ed[1]]);
    }
  }
  return h;
}

/// Triangles whose closure contains node `dof`.
inline std::vector<std::size_t> node_patch(const FeSpace& space, std::size_t dof) {
  if (dof >= space.num_dofs()) throw std::out_of_range("dof index out of range");
  const Mesh& m = space.mesh();
  if (dof < m.num_vertices()) return m.vertex_triangles(dof);
  std::vector<std::size_t> tris = m.edge_triangles(dof - m.num_vertices());
  std::sort(tris.begin(), tris.end());
  return tris;
}

/// Triangles sharing at least one vertex with a triangle of node_patch(dof).
inline std::vector<std::size_t> extended_patch(const FeSpace& space, std::size_t dof) {
  const Mesh& m = space.mesh();
  std::vector<std::size_t> out;
  for (auto t : node_patch(space, dof)) {
    for (auto v : m.triangles()[t]) {
      const auto& vt = m.vertex_triangles(v);
      out.insert(out.end(), vt.begin(), vt.end());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Cell containing point p (closed triangles, tolerance relative to the cell)
/// together with reference coordinates, or nullopt when p lies outside.
inline std::optional<std::pair<std::size_t, std::array<double, 2>>> locate(const FeSpace& space, Point p,
                                                                          double tol = 1e-12) {
  const Mesh& m = space.mesh();
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const CellGeometry g = space.geometry(t);
    const auto r = g.pull(p);
    if (r[0] >= -tol && r[1] >= -tol && r[0] + r[1] <= 1.0 + tol) return std::make_pair(t, r);
  }
  return std::nullopt;
}

}  // namespace bpfem
