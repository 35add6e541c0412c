#pragma once

/// \file io.hpp
/// Field export in VTK legacy ASCII, a matching reader for round-trip checks,
/// and number formatting shared by the CSV writers.

#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bpfem/space.hpp"

namespace bpfem {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest round-trip text for a double ("%.17g"), locale independent
/// for the values we write.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Short tag for file names, e.g. 1e-05 for 1e-5.
inline std::string format_tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0e", v);
  return buf;
}

/// Linear sub-triangles used to draw a field: the mesh triangles for k = 1,
/// four sub-triangles per cell through the edge midpoints for k = 2.
inline std::vector<std::array<std::size_t, 3>> plot_triangles(const FeSpace& space) {
  std::vector<std::array<std::size_t, 3>> out;
  const std::size_t nt = space.mesh().num_triangles();
  out.reserve(space.degree() == 2 ? 4 * nt : nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const std::size_t* d = space.cell_dofs(t);
    if (space.degree() == 1) {
      out.push_back({d[0], d[1], d[2]});
    } else {
      out.push_back({d[0], d[3], d[5]});
      out.push_back({d[3], d[1], d[4]});
      out.push_back({d[5], d[4], d[2]});
      out.push_back({d[3], d[4], d[5]});
    }
  }
  return out;
}

using NamedField = std::pair<std::string, const NodalField*>;

/// Points are the Lagrange nodes in dof order (z = 0), cells are
/// plot_triangles (VTK type 5), one POINT_DATA scalar block per field.
inline void write_vtk(std::ostream& out, const FeSpace& space, const std::vector<NamedField>& fields,
                      const std::string& title = "bpfem field") {
  for (const auto& [name, f] : fields) {
    if (!f || f->size() != space.num_dofs()) throw IoError("field '" + name + "' does not match the space");
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
      throw IoError("VTK field names must be non-empty without whitespace");
    }
  }
  const auto tris = plot_triangles(space);
  const std::size_t n = space.num_dofs();
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << n << " double\n";
  for (const auto& p : space.nodes()) out << format_double(p.x) << ' ' << format_double(p.y) << " 0\n";
  out << "CELLS " << tris.size() << ' ' << 4 * tris.size() << '\n';
  for (const auto& t : tris) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  out << "CELL_TYPES " << tris.size() << '\n';
  for (std::size_t i = 0; i < tris.size(); ++i) out << "5\n";
  out << "POINT_DATA " << n << '\n';
  for (const auto& [name, f] : fields) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (std::size_t i = 0; i < n; ++i) out << format_double((*f)[i]) << '\n';
  }
}

inline void write_vtk(const std::string& path, const FeSpace& space, const std::vector<NamedField>& fields,
                      const std::string& title = "bpfem field") {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_vtk(out, space, fields, title);
  if (!out) throw IoError("write failed: " + path);
}

struct VtkData {
  std::vector<std::array<double, 2>> points;
  std::vector<std::array<std::size_t, 3>> cells;
  std::vector<std::pair<std::string, std::vector<double>>> scalars;

  [[nodiscard]] const std::vector<double>& scalar(const std::string& name) const {
    for (const auto& s : scalars) {
      if (s.first == name) return s.second;
    }
    throw IoError("no scalar field named " + name);
  }
};

/// Reads the subset of the legacy format produced by write_vtk.
inline VtkData read_vtk(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# vtk DataFile Version", 0) != 0) throw IoError("not a VTK file");
  std::getline(in, line);  // title
  std::string word;
  in >> word;
  if (word != "ASCII") throw IoError("only ASCII VTK is supported");
  VtkData d;
  std::size_t npoint_data = 0;
  while (in >> word) {
    if (word == "DATASET") {
      in >> word;
    } else if (word == "POINTS") {
      std::size_t n;
      in >> n >> word;
      d.points.resize(n);
      double z;
      for (auto& p : d.points) in >> p[0] >> p[1] >> z;
    } else if (word == "CELLS") {
      std::size_t n, total;
      in >> n >> total;
      d.cells.resize(n);
      for (auto& c : d.cells) {
        std::size_t k;
        in >> k;
        if (k != 3) throw IoError("only triangle cells are supported");
        in >> c[0] >> c[1] >> c[2];
      }
    } else if (word == "CELL_TYPES") {
      std::size_t n;
      in >> n;
      for (std::size_t i = 0; i < n; ++i) in >> word;
    } else if (word == "POINT_DATA") {
      in >> npoint_data;
    } else if (word == "SCALARS") {
      std::string name, type;
      in >> name >> type;
      std::getline(in, line);  // optional component count
      in >> word >> word;      // LOOKUP_TABLE default
      std::vector<double> v(npoint_data);
      for (auto& x : v) {
        // operator>> rejects "inf"/"nan", which write_vtk can emit.
        in >> word;
        x = std::stod(word);
      }
      d.scalars.emplace_back(name, std::move(v));
    } else {
      throw IoError("unexpected VTK keyword: " + word);
    }
    if (!in && !in.eof()) throw IoError("malformed VTK file");
  }
  return d;
}

inline VtkData read_vtk(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_vtk(in);
}

}  // namespace bpfem
