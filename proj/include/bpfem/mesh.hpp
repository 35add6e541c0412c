#pragma once

/// \file mesh.hpp
/// Conforming 2D triangulations: construction, red refinement, quality
/// metrics and the plain-text mesh file format.
///
/// File format (whitespace separated, `#` starts a comment, indices 0-based):
///
///     nv nt nbe
///     x y            (nv lines)
///     v0 v1 v2       (nt lines, counter-clockwise)
///     v0 v1 marker   (nbe lines)

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bpfem {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline Point midpoint(Point a, Point b) { return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

using Triangle = std::array<std::size_t, 3>;
using Edge = std::array<std::size_t, 2>;  // stored with v[0] < v[1]

struct BoundaryEdge {
  Edge vertices{};
  int marker = 1;
};

struct Rect {
  double xmin = 0.0;
  double xmax = 1.0;
  double ymin = 0.0;
  double ymax = 1.0;

  static Rect unit_square() { return {}; }
  [[nodiscard]] double width() const { return xmax - xmin; }
  [[nodiscard]] double height() const { return ymax - ymin; }
};

enum class MeshErrorKind {
  InvalidArgument,
  Malformed,
  NonConforming,
  InvertedTriangle,
  Io,
};

class MeshError : public std::runtime_error {
 public:
  MeshError(MeshErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] MeshErrorKind kind() const noexcept { return kind_; }

 private:
  MeshErrorKind kind_;
};

inline Edge make_edge(std::size_t a, std::size_t b) {
  return a < b ? Edge{a, b} : Edge{b, a};
}

/// Immutable conforming triangulation. The constructor validates
/// orientation, conformity and the boundary description, and builds the
/// edge and vertex-to-triangle adjacency used by the finite element layer.
class Mesh {
 public:
  Mesh(std::vector<Point> vertices, std::vector<Triangle> triangles,
       std::vector<BoundaryEdge> boundary)
      : vertices_(std::move(vertices)),
        triangles_(std::move(triangles)),
        boundary_(std::move(boundary)) {
    validate_and_index();
  }

  [[nodiscard]] const std::vector<Point>& vertices() const { return vertices_; }
  [[nodiscard]] const std::vector<Triangle>& triangles() const { return triangles_; }
  [[nodiscard]] const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_; }
  [[nodiscard]] std::size_t num_vertices() const { return vertices_.size(); }
  [[nodiscard]] std::size_t num_triangles() const { return triangles_.size(); }

  /// Unique edges, sorted lexicographically by (min, max) vertex index.
  [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }
  [[nodiscard]] std::size_t edge_index(std::size_t a, std::size_t b) const {
    auto it = std::lower_bound(edges_.begin(), edges_.end(), make_edge(a, b));
    if (it == edges_.end() || *it != make_edge(a, b)) {
      throw MeshError(MeshErrorKind::InvalidArgument, "edge not in mesh");
    }
    return static_cast<std::size_t>(it - edges_.begin());
  }
  [[nodiscard]] const std::vector<std::size_t>& edge_triangles(std::size_t e) const {
    return edge_triangles_.at(e);
  }
  /// Marker of edge `e`, or 0 for interior edges.
  [[nodiscard]] int edge_marker(std::size_t e) const { return edge_marker_.at(e); }
  [[nodiscard]] const std::vector<std::size_t>& vertex_triangles(std::size_t v) const {
    return vertex_triangles_.at(v);
  }

  [[nodiscard]] std::array<Point, 3> corners(std::size_t t) const {
    const auto& tri = triangles_.at(t);
    return {vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]};
  }
  [[nodiscard]] double signed_area(std::size_t t) const {
    const auto c = corners(t);
    return 0.5 * cross(c[1] - c[0], c[2] - c[0]);
  }
  /// Triangle diameter, i.e. its longest edge.
  [[nodiscard]] double diameter(std::size_t t) const {
    const auto c = corners(t);
    return std::max({distance(c[0], c[1]), distance(c[1], c[2]), distance(c[2], c[0])});
  }

  friend bool operator==(const Mesh& a, const Mesh& b) {
    auto same_point = [](Point p, Point q) { return p.x == q.x && p.y == q.y; };
    if (a.vertices_.size() != b.vertices_.size()) return false;
    for (std::size_t i = 0; i < a.vertices_.size(); ++i) {
      if (!same_point(a.vertices_[i], b.vertices_[i])) return false;
    }
    if (a.triangles_ != b.triangles_ || a.boundary_.size() != b.boundary_.size()) return false;
    for (std::size_t i = 0; i < a.boundary_.size(); ++i) {
      if (a.boundary_[i].vertices != b.boundary_[i].vertices ||
          a.boundary_[i].marker != b.boundary_[i].marker) {
        return false;
      }
    }
    return true;
  }

 private:
  void validate_and_index() {
    const std::size_t nv = vertices_.size();
    if (nv < 3 || triangles_.empty()) {
      throw MeshError(MeshErrorKind::Malformed, "mesh needs at least 3 vertices and 1 triangle");
    }
    std::set<std::array<std::size_t, 3>> seen;
    std::map<Edge, std::vector<std::size_t>> edge_use;
    vertex_triangles_.assign(nv, {});
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      const auto& tri = triangles_[t];
      for (auto v : tri) {
        if (v >= nv) {
          throw MeshError(MeshErrorKind::Malformed,
                          "triangle " + std::to_string(t) + " references missing vertex");
        }
      }
      if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
        throw MeshError(MeshErrorKind::Malformed,
                        "triangle " + std::to_string(t) + " repeats a vertex");
      }
      auto key = tri;
      std::sort(key.begin(), key.end());
      if (!seen.insert(key).second) {
        throw MeshError(MeshErrorKind::NonConforming,
                        "triangle " + std::to_string(t) + " is repeated");
      }
      if (!(signed_area(t) > 0.0)) {
        throw MeshError(MeshErrorKind::InvertedTriangle,
                        "triangle " + std::to_string(t) + " has non-positive signed area");
      }
      for (int k = 0; k < 3; ++k) {
        edge_use[make_edge(tri[k], tri[(k + 1) % 3])].push_back(t);
        vertex_triangles_[tri[k]].push_back(t);
      }
    }

    std::map<Edge, int> boundary_marker;
    for (auto& be : boundary_) {
      if (be.vertices[0] >= nv || be.vertices[1] >= nv || be.vertices[0] == be.vertices[1]) {
        throw MeshError(MeshErrorKind::Malformed, "invalid boundary edge");
      }
      if (be.marker <= 0) throw MeshError(MeshErrorKind::Malformed, "boundary markers must be positive");
      const Edge e = make_edge(be.vertices[0], be.vertices[1]);
      if (!boundary_marker.emplace(e, be.marker).second) {
        throw MeshError(MeshErrorKind::NonConforming, "boundary edge listed twice");
      }
    }

    edges_.reserve(edge_use.size());
    for (auto& [e, tris] : edge_use) {
      const bool on_boundary = boundary_marker.count(e) > 0;
      if (tris.size() > 2) {
        throw MeshError(MeshErrorKind::NonConforming, "edge shared by more than two triangles");
      }
      if (tris.size() == 1 && !on_boundary) {
        throw MeshError(MeshErrorKind::NonConforming,
                        "edge used by one triangle is not a boundary edge (hanging node?)");
      }
      if (tris.size() == 2 && on_boundary) {
        throw MeshError(MeshErrorKind::NonConforming, "boundary edge shared by two triangles");
      }
      edges_.push_back(e);
      edge_triangles_.push_back(tris);
      edge_marker_.push_back(on_boundary ? boundary_marker[e] : 0);
    }
    if (boundary_marker.size() !=
        static_cast<std::size_t>(std::count_if(edge_triangles_.begin(), edge_triangles_.end(),
                                               [](const auto& v) { return v.size() == 1; }))) {
      throw MeshError(MeshErrorKind::NonConforming, "boundary edge not present in any triangle");
    }
  }

  std::vector<Point> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<BoundaryEdge> boundary_;

  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> edge_triangles_;
  std::vector<int> edge_marker_;
  std::vector<std::vector<std::size_t>> vertex_triangles_;
};

struct MeshQuality {
  double h_max = 0.0;
  double h_min = 0.0;
  double min_angle = 0.0;  // radians
  double max_angle = 0.0;  // radians
  double shape_regularity_ratio = 0.0;  // max_K h_K / inradius_K
};

inline std::array<double, 3> triangle_angles(const std::array<Point, 3>& c) {
  std::array<double, 3> a{};
  for (int k = 0; k < 3; ++k) {
    const Point u = c[(k + 1) % 3] - c[k];
    const Point w = c[(k + 2) % 3] - c[k];
    a[k] = std::atan2(std::abs(cross(u, w)), u.x * w.x + u.y * w.y);
  }
  return a;
}

inline MeshQuality mesh_quality(const Mesh& mesh) {
  MeshQuality q;
  q.h_min = std::numeric_limits<double>::infinity();
  q.min_angle = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto c = mesh.corners(t);
    const double hk = mesh.diameter(t);
    const double perimeter = distance(c[0], c[1]) + distance(c[1], c[2]) + distance(c[2], c[0]);
    const double inradius = 2.0 * mesh.signed_area(t) / perimeter;
    q.h_max = std::max(q.h_max, hk);
    q.h_min = std::min(q.h_min, hk);
    q.shape_regularity_ratio = std::max(q.shape_regularity_ratio, hk / inradius);
    for (double ang : triangle_angles(c)) {
      q.min_angle = std::min(q.min_angle, ang);
      q.max_angle = std::max(q.max_angle, ang);
    }
  }
  return q;
}

/// Structured grid of nx*ny cells, each split into four triangles by its
/// diagonals. Grid vertices come first (row-major), then cell centres.
inline Mesh generate_criss_cross(std::size_t nx, std::size_t ny, Rect rect = Rect::unit_square()) {
  if (nx == 0 || ny == 0) {
    throw MeshError(MeshErrorKind::InvalidArgument, "criss-cross mesh needs nx, ny >= 1");
  }
  if (!(rect.width() > 0.0) || !(rect.height() > 0.0)) {
    throw MeshError(MeshErrorKind::InvalidArgument, "degenerate rectangle");
  }
  std::vector<Point> vertices;
  vertices.reserve((nx + 1) * (ny + 1) + nx * ny);
  auto grid = [&](std::size_t i, std::size_t j) { return j * (nx + 1) + i; };
  const double dx = rect.width() / static_cast<double>(nx);
  const double dy = rect.height() / static_cast<double>(ny);
  for (std::size_t j = 0; j <= ny; ++j) {
    for (std::size_t i = 0; i <= nx; ++i) {
      const double x = i == nx ? rect.xmax : rect.xmin + static_cast<double>(i) * dx;
      const double y = j == ny ? rect.ymax : rect.ymin + static_cast<double>(j) * dy;
      vertices.push_back({x, y});
    }
  }
  const std::size_t first_centre = vertices.size();
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      vertices.push_back(midpoint(vertices[grid(i, j)], vertices[grid(i + 1, j + 1)]));
    }
  }
  std::vector<Triangle> triangles;
  triangles.reserve(4 * nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t a = grid(i, j), b = grid(i + 1, j), c = grid(i + 1, j + 1),
                        d = grid(i, j + 1), m = first_centre + j * nx + i;
      triangles.push_back({a, b, m});
      triangles.push_back({b, c, m});
      triangles.push_back({c, d, m});
      triangles.push_back({d, a, m});
    }
  }
  std::vector<BoundaryEdge> boundary;
  for (std::size_t i = 0; i < nx; ++i) boundary.push_back({make_edge(grid(i, 0), grid(i + 1, 0)), 1});
  for (std::size_t j = 0; j < ny; ++j) boundary.push_back({make_edge(grid(nx, j), grid(nx, j + 1)), 1});
  for (std::size_t i = nx; i > 0; --i) boundary.push_back({make_edge(grid(i, ny), grid(i - 1, ny)), 1});
  for (std::size_t j = ny; j > 0; --j) boundary.push_back({make_edge(grid(0, j), grid(0, j - 1)), 1});
  return Mesh(std::move(vertices), std::move(triangles), std::move(boundary));
}

/// Red refinement: every triangle is split into four similar children
/// through its edge midpoints. Midpoint vertices are appended in edge order.
inline Mesh refine_uniform(const Mesh& mesh) {
  std::vector<Point> vertices = mesh.vertices();
  const std::size_t nv = vertices.size();
  for (const auto& e : mesh.edges()) vertices.push_back(midpoint(vertices[e[0]], vertices[e[1]]));
  auto mid = [&](std::size_t a, std::size_t b) { return nv + mesh.edge_index(a, b); };

  std::vector<Triangle> triangles;
  triangles.reserve(4 * mesh.num_triangles());
  for (const auto& t : mesh.triangles()) {
    const std::size_t m01 = mid(t[0], t[1]), m12 = mid(t[1], t[2]), m20 = mid(t[2], t[0]);
    triangles.push_back({t[0], m01, m20});
    triangles.push_back({m01, t[1], m12});
    triangles.push_back({m20, m12, t[2]});
    triangles.push_back({m01, m12, m20});
  }
  std::vector<BoundaryEdge> boundary;
  boundary.reserve(2 * mesh.boundary_edges().size());
  for (const auto& be : mesh.boundary_edges()) {
    const std::size_t m = mid(be.vertices[0], be.vertices[1]);
    boundary.push_back({make_edge(be.vertices[0], m), be.marker});
    boundary.push_back({make_edge(m, be.vertices[1]), be.marker});
  }
  return Mesh(std::move(vertices), std::move(triangles), std::move(boundary));
}

/// Angle at the apex of the obtuse seed triangle for a given apex shift on a
/// rectangle: the seed spans the bottom side with its apex raised by
/// `apex_shift * height` above the bottom midpoint.
inline double obtuse_seed_angle(double apex_shift, Rect rect) {
  return 2.0 * std::atan2(0.5 * rect.width(), apex_shift * rect.height());
}

/// Default apex shift: seed angle of 100 degrees on (-1,1)x(0,1).
inline double default_apex_shift() { return 1.0 / std::tan(50.0 * std::numbers::pi / 180.0); }

inline Rect obtuse_default_rect() { return {-1.0, 1.0, 0.0, 1.0}; }

/// Coarse five-triangle mesh of `rect` whose bottom triangle is obtuse,
/// refined uniformly `level - 1` times. Red refinement keeps every child
/// similar to its parent, so the seed turns into a layer of obtuse triangles
/// along the bottom side.
inline Mesh generate_obtuse_layer(std::size_t level, Rect rect = obtuse_default_rect(),
                                  double apex_shift = default_apex_shift()) {
  if (level == 0) throw MeshError(MeshErrorKind::InvalidArgument, "level must be >= 1");
  if (!(rect.width() > 0.0) || !(rect.height() > 0.0)) {
    throw MeshError(MeshErrorKind::InvalidArgument, "degenerate rectangle");
  }
  if (!(apex_shift > 0.0 && apex_shift < 1.0)) {
    throw MeshError(MeshErrorKind::InvalidArgument, "apex_shift must lie in (0, 1)");
  }
  const double xmid = 0.5 * (rect.xmin + rect.xmax);
  std::vector<Point> vertices{{rect.xmin, rect.ymin}, {rect.xmax, rect.ymin},
                              {rect.xmax, rect.ymax}, {xmid, rect.ymax},
                              {rect.xmin, rect.ymax}, {xmid, rect.ymin + apex_shift * rect.height()}};
  std::vector<Triangle> triangles{{0, 1, 5}, {1, 2, 5}, {2, 3, 5}, {3, 4, 5}, {4, 0, 5}};
  std::vector<BoundaryEdge> boundary{
      {make_edge(0, 1), 1}, {make_edge(1, 2), 1}, {make_edge(2, 3), 1},
      {make_edge(3, 4), 1}, {make_edge(4, 0), 1}};
  Mesh mesh(std::move(vertices), std::move(triangles), std::move(boundary));
  const double tiny = 1e-12 * rect.width() * rect.height();
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.signed_area(t) <= tiny) {
      throw MeshError(MeshErrorKind::InvalidArgument, "apex_shift yields a degenerate triangle");
    }
  }
  for (std::size_t l = 1; l < level; ++l) mesh = refine_uniform(mesh);
  return mesh;
}

namespace detail {

/// Reads whitespace-separated tokens, skipping `#` comments.
inline std::vector<std::string> tokenize_mesh_stream(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
  }
  return tokens;
}

template <class T>
T parse_token(const std::vector<std::string>& tokens, std::size_t& pos, const char* what) {
  if (pos >= tokens.size()) {
    throw MeshError(MeshErrorKind::Malformed, std::string("unexpected end of file reading ") + what);
  }
  const std::string& tok = tokens[pos++];
  std::istringstream ss(tok);
  T value{};
  if constexpr (std::is_unsigned_v<T>) {
    if (!tok.empty() && tok[0] == '-') {
      throw MeshError(MeshErrorKind::Malformed, std::string("negative ") + what + ": " + tok);
    }
  }
  if (!(ss >> value) || !ss.eof()) {
    throw MeshError(MeshErrorKind::Malformed, std::string("bad ") + what + ": " + tok);
  }
  return value;
}

}  // namespace detail

inline Mesh read_mesh(std::istream& in) {
  const auto tokens = detail::tokenize_mesh_stream(in);
  std::size_t pos = 0;
  const auto nv = detail::parse_token<std::size_t>(tokens, pos, "vertex count");
  const auto nt = detail::parse_token<std::size_t>(tokens, pos, "triangle count");
  const auto nbe = detail::parse_token<std::size_t>(tokens, pos, "boundary edge count");
  if (tokens.size() != 3 + 2 * nv + 3 * nt + 3 * nbe) {
    throw MeshError(MeshErrorKind::Malformed, "token count does not match header");
  }
  std::vector<Point> vertices(nv);
  for (auto& p : vertices) {
    p.x = detail::parse_token<double>(tokens, pos, "coordinate");
    p.y = detail::parse_token<double>(tokens, pos, "coordinate");
  }
  std::vector<Triangle> triangles(nt);
  for (auto& t : triangles) {
    for (auto& v : t) v = detail::parse_token<std::size_t>(tokens, pos, "vertex index");
  }
  std::vector<BoundaryEdge> boundary(nbe);
  for (auto& be : boundary) {
    be.vertices[0] = detail::parse_token<std::size_t>(tokens, pos, "vertex index");
    be.vertices[1] = detail::parse_token<std::size_t>(tokens, pos, "vertex index");
    be.marker = detail::parse_token<int>(tokens, pos, "marker");
  }
  return Mesh(std::move(vertices), std::move(triangles), std::move(boundary));
}

inline Mesh read_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError(MeshErrorKind::Io, "cannot open mesh file: " + path);
  return read_mesh(in);
}

inline void write_mesh(const Mesh& mesh, std::ostream& out) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << mesh.num_vertices() << ' ' << mesh.num_triangles() << ' '
      << mesh.boundary_edges().size() << '\n';
  for (const auto& p : mesh.vertices()) out << p.x << ' ' << p.y << '\n';
  for (const auto& t : mesh.triangles()) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& be : mesh.boundary_edges()) {
    out << be.vertices[0] << ' ' << be.vertices[1] << ' ' << be.marker << '\n';
  }
}

inline void write_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MeshError(MeshErrorKind::Io, "cannot write mesh file: " + path);
  write_mesh(mesh, out);
}

}  // namespace bpfem
