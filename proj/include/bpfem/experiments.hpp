#pragma once

/// \file experiments.hpp
/// Experiment configurations, the runners behind the CLI subcommands, and
/// their CSV / VTK / JSON outputs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "bpfem/analysis.hpp"
#include "bpfem/io.hpp"
#include "bpfem/oracle.hpp"
#include "bpfem/solver.hpp"

namespace bpfem {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids{"smooth-k1", "smooth-k2", "obtuse", "layers",
                                            "discbc", "interior-layer", "anisotropic-nl", "custom"};
  return ids;
}

struct ExperimentConfig {
  std::string experiment = "custom";
  std::string mesh = "criss-cross";  // criss-cross | obtuse | file
  std::string mesh_file;
  Rect domain = Rect::unit_square();
  /// criss-cross: n = 2^level; obtuse: generator level; file: uniform refinements.
  std::vector<std::size_t> levels;
  /// Criss-cross cells per side for single-mesh runs; 0 sizes the mesh from h_target.
  std::size_t n = 0;
  double h_target = 0.02;
  int degree = 1;
  double eps = 1e-5;
  std::vector<double> eps_list;
  double mu = 1.0;
  std::optional<double> p;
  /// D = eps R diag(anisotropy, 1) R^T with rotation angle theta.
  double anisotropy = 1.0;
  double theta = 0.0;
  double source = 1.0;
  std::map<int, double> dirichlet;
  /// discbc: value taken at the jump points of the boundary data.
  double discbc_tie = 1.0;
  double alpha = 1.0;
  double omega = 1.0;
  /// Sweeps use omega_small_eps once eps <= small_eps_threshold.
  double omega_small_eps = 0.5;
  double small_eps_threshold = 1e-5;
  double tol = 1e-12;
  std::size_t max_iter = 10000;
  bool auto_damp = false;
  double lower = 0.0;
  double upper = 1.0;
  std::size_t section_samples = 201;
  bool export_fields = true;
  std::string out = "out";

  [[nodiscard]] BoundsBox bounds() const { return {lower, upper}; }

  void validate() const {
    const auto& ids = experiment_ids();
    if (std::find(ids.begin(), ids.end(), experiment) == ids.end()) {
      throw ConfigError("unknown experiment: " + experiment);
    }
    if (mesh != "criss-cross" && mesh != "obtuse" && mesh != "file") {
      throw ConfigError("mesh must be criss-cross, obtuse or file");
    }
    if (mesh == "file") {
      if (mesh_file.empty()) throw ConfigError("mesh = file needs mesh_file");
      if (!std::filesystem::exists(mesh_file)) throw ConfigError("mesh_file does not exist: " + mesh_file);
    }
    if (!(domain.xmin < domain.xmax && domain.ymin < domain.ymax)) throw ConfigError("empty domain");
    if (degree != 1 && degree != 2) throw ConfigError("degree must be 1 or 2");
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    for (double e : eps_list) {
      if (!(e > 0.0)) throw ConfigError("eps_list entries must be positive");
    }
    if (!(mu >= 0.0)) throw ConfigError("mu must be non-negative");
    if (p && !(*p >= 2.0)) throw ConfigError("p must be >= 2");
    if (!(anisotropy > 0.0)) throw ConfigError("anisotropy must be positive");
    if (!std::isfinite(theta) || !std::isfinite(source)) throw ConfigError("theta and source must be finite");
    if (!(h_target > 0.0)) throw ConfigError("h_target must be positive");
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (!(omega > 0.0 && omega <= 1.0) || !(omega_small_eps > 0.0 && omega_small_eps <= 1.0)) {
      throw ConfigError("omega must lie in (0, 1]");
    }
    if (!(tol > 0.0)) throw ConfigError("tol must be positive");
    if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
    if (std::isnan(lower) || std::isnan(upper) || !(lower < upper)) throw ConfigError("need lower < upper");
    if (section_samples < 2) throw ConfigError("section_samples must be >= 2");
    for (auto l : levels) {
      if (mesh == "criss-cross" && l > 12) throw ConfigError("criss-cross level above 12");
      if (mesh == "obtuse" && (l < 1 || l > 10)) throw ConfigError("obtuse levels must lie in 1..10");
      if (mesh == "file" && l > 6) throw ConfigError("more than 6 refinements of a file mesh");
    }
  }
};

inline ExperimentConfig preset(const std::string& id) {
  using std::numbers::pi;
  ExperimentConfig c;
  c.experiment = id;
  c.out = "out/" + id;
  if (id == "smooth-k1" || id == "smooth-k2") {
    c.degree = id == "smooth-k1" ? 1 : 2;
    c.levels = c.degree == 1 ? std::vector<std::size_t>{3, 4, 5, 6, 7, 8} : std::vector<std::size_t>{2, 3, 4, 5, 6, 7};
    c.auto_damp = true;
  } else if (id == "obtuse") {
    c.mesh = "obtuse";
    c.domain = obtuse_default_rect();
    c.levels = {2, 3, 4, 5, 6, 7, 8};
    // omega = 1 also converges with damping but needs up to ~230 iterations here.
    c.omega = 0.25;
    c.auto_damp = true;
  } else if (id == "layers" || id == "discbc") {
    c.eps_list = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
    c.source = id == "layers" ? 1.0 : 0.0;
    c.auto_damp = true;
  } else if (id == "interior-layer") {
    c.eps_list = {1e-4, 1e-7};
    c.auto_damp = true;
  } else if (id == "anisotropic-nl") {
    c.mesh = "file";
    c.p = 4.0;
    c.anisotropy = 100.0;
    c.theta = -pi / 6.0;
    c.source = 0.0;
    c.dirichlet = {{1, 0.0}, {2, 2.0}};
    c.upper = 2.0;
    c.auto_damp = true;
  } else if (id != "custom") {
    throw ConfigError("unknown experiment: " + id);
  }
  return c;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a number: '" + v + "'");
  }
}

inline std::size_t parse_size(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(key + ": not a non-negative integer: '" + v + "'");
  }
  return std::stoul(v);
}

inline bool parse_bool(const std::string& key, std::string v) {
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": not a boolean: '" + v + "'");
}

}  // namespace detail

/// "3-8" or "3,4,5".
inline std::vector<std::size_t> parse_levels(const std::string& v) {
  std::vector<std::size_t> out;
  const auto dash = v.find('-');
  if (dash != std::string::npos) {
    const auto a = detail::parse_size("levels", detail::trim(v.substr(0, dash)));
    const auto b = detail::parse_size("levels", detail::trim(v.substr(dash + 1)));
    if (a > b) throw ConfigError("levels: empty range " + v);
    for (auto l = a; l <= b; ++l) out.push_back(l);
  } else {
    for (const auto& s : detail::split_list(v)) out.push_back(detail::parse_size("levels", s));
  }
  if (out.empty()) throw ConfigError("levels: empty list");
  return out;
}

/// Sets one configuration key from its text value.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  using detail::parse_double;
  const std::string v = detail::trim(raw);
  if (key == "experiment") {
    c.experiment = v;
  } else if (key == "mesh") {
    c.mesh = v;
  } else if (key == "mesh_file") {
    c.mesh_file = v;
  } else if (key == "domain") {
    const auto parts = detail::split_list(v);
    if (parts.size() != 4) throw ConfigError("domain: expected xmin, xmax, ymin, ymax");
    c.domain = {parse_double(key, parts[0]), parse_double(key, parts[1]), parse_double(key, parts[2]),
                parse_double(key, parts[3])};
  } else if (key == "levels") {
    c.levels = parse_levels(v);
  } else if (key == "n") {
    c.n = detail::parse_size(key, v);
  } else if (key == "h_target") {
    c.h_target = parse_double(key, v);
  } else if (key == "degree") {
    c.degree = static_cast<int>(detail::parse_size(key, v));
  } else if (key == "eps") {
    c.eps = parse_double(key, v);
  } else if (key == "eps_list") {
    c.eps_list.clear();
    for (const auto& s : detail::split_list(v)) c.eps_list.push_back(parse_double(key, s));
  } else if (key == "mu") {
    c.mu = parse_double(key, v);
  } else if (key == "p") {
    if (v == "none" || v.empty()) {
      c.p.reset();
    } else {
      c.p = parse_double(key, v);
    }
  } else if (key == "anisotropy") {
    c.anisotropy = parse_double(key, v);
  } else if (key == "theta") {
    c.theta = parse_double(key, v);
  } else if (key == "source") {
    c.source = parse_double(key, v);
  } else if (key == "dirichlet") {
    c.dirichlet.clear();
    for (const auto& s : detail::split_list(v)) {
      const auto colon = s.find(':');
      if (colon == std::string::npos) throw ConfigError("dirichlet: expected marker:value pairs");
      const auto marker = detail::parse_size(key, detail::trim(s.substr(0, colon)));
      c.dirichlet[static_cast<int>(marker)] = parse_double(key, detail::trim(s.substr(colon + 1)));
    }
  } else if (key == "discbc_tie") {
    c.discbc_tie = parse_double(key, v);
  } else if (key == "alpha") {
    c.alpha = parse_double(key, v);
  } else if (key == "omega") {
    c.omega = parse_double(key, v);
  } else if (key == "omega_small_eps") {
    c.omega_small_eps = parse_double(key, v);
  } else if (key == "small_eps_threshold") {
    c.small_eps_threshold = parse_double(key, v);
  } else if (key == "tol") {
    c.tol = parse_double(key, v);
  } else if (key == "max_iter") {
    c.max_iter = detail::parse_size(key, v);
  } else if (key == "auto_damp") {
    c.auto_damp = detail::parse_bool(key, v);
  } else if (key == "lower") {
    c.lower = parse_double(key, v);
  } else if (key == "upper") {
    c.upper = parse_double(key, v);
  } else if (key == "section_samples") {
    c.section_samples = detail::parse_size(key, v);
  } else if (key == "export_fields") {
    c.export_fields = detail::parse_bool(key, v);
  } else if (key == "out") {
    c.out = v;
  } else {
    throw ConfigError("unknown configuration key: " + key);
  }
}

/// Reads an INI file. Keys before the first section are shared defaults; the
/// chosen section (by name, or the only one present) overrides them. The
/// experiment preset named by `experiment`, or by the section name, is the
/// starting point. Relative mesh_file paths resolve against the file's folder.
inline ExperimentConfig load_config(const std::string& path, const std::string& section = "") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  std::vector<std::pair<std::string, std::string>> shared;
  std::map<std::string, const pt::ptree*> sections;
  for (const auto& [key, node] : tree) {
    if (node.empty()) {
      shared.emplace_back(key, node.data());
    } else {
      sections[key] = &node;
    }
  }
  const pt::ptree* chosen = nullptr;
  std::string name = section;
  if (!section.empty()) {
    auto it = sections.find(section);
    if (it == sections.end()) throw ConfigError("no section [" + section + "] in " + path);
    chosen = it->second;
  } else if (sections.size() == 1) {
    name = sections.begin()->first;
    chosen = sections.begin()->second;
  } else if (sections.size() > 1) {
    throw ConfigError(path + " has several sections; choose one with --experiment");
  }
  std::vector<std::pair<std::string, std::string>> keys = shared;
  if (chosen) {
    for (const auto& [key, node] : *chosen) keys.emplace_back(key, node.data());
  }
  std::string id = name.empty() ? "custom" : name;
  for (const auto& [key, value] : keys) {
    if (key == "experiment") id = detail::trim(value);
  }
  ExperimentConfig c = preset(id);
  for (const auto& [key, value] : keys) apply_setting(c, key, value);
  if (!c.mesh_file.empty()) {
    std::filesystem::path mp(c.mesh_file);
    if (mp.is_relative()) c.mesh_file = (std::filesystem::path(path).parent_path() / mp).lexically_normal().string();
  }
  return c;
}

// ---------------------------------------------------------------------------
// Meshes and problems

inline std::size_t criss_cross_cells_for(double h_target, Rect r) {
  // h_max of a criss-cross cell is its longer side (the half diagonals are shorter).
  const double side = std::max(r.width(), r.height());
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(side / h_target)));
}

/// Mesh of a study level, or of a single-mesh run when level is empty.
inline Mesh build_mesh(const ExperimentConfig& c, std::optional<std::size_t> level = std::nullopt) {
  if (c.mesh == "criss-cross") {
    std::size_t n;
    if (level) {
      n = std::size_t{1} << *level;
    } else if (c.n > 0) {
      n = c.n;
    } else {
      n = criss_cross_cells_for(c.h_target, c.domain);
    }
    return generate_criss_cross(n, n, c.domain);
  }
  if (c.mesh == "obtuse") {
    const std::size_t l = level ? *level : (c.levels.empty() ? 4 : c.levels.back());
    return generate_obtuse_layer(l, c.domain);
  }
  Mesh m = read_mesh(c.mesh_file);
  const std::size_t refinements = level ? *level : 0;
  for (std::size_t r = 0; r < refinements; ++r) m = refine_uniform(m);
  return m;
}

struct Problem {
  ProblemSpec spec;
  std::optional<ExactSolution> exact;
};

/// Piecewise constant boundary data of the discbc experiment on the unit
/// square: walking each side counter-clockwise from its first corner, 1 on
/// the first half and 0 on the second. Corners and side midpoints are jump
/// points and receive `tie`.
inline double discbc_value(Point x, double tie) {
  constexpr double tol = 1e-12;
  auto near = [](double a, double b) { return std::abs(a - b) <= tol; };
  const bool corner = (near(x.x, 0) || near(x.x, 1)) && (near(x.y, 0) || near(x.y, 1));
  const bool midpoint = ((near(x.x, 0) || near(x.x, 1)) && near(x.y, 0.5)) ||
                        ((near(x.y, 0) || near(x.y, 1)) && near(x.x, 0.5));
  if (corner || midpoint) return tie;
  double s;  // arc position within the side, in (0, 1)
  if (near(x.y, 0)) {
    s = x.x;
  } else if (near(x.x, 1)) {
    s = x.y;
  } else if (near(x.y, 1)) {
    s = 1.0 - x.x;
  } else {
    s = 1.0 - x.y;
  }
  return s < 0.5 ? 1.0 : 0.0;
}

inline Problem make_problem(const ExperimentConfig& c, double eps) {
  using std::numbers::pi;
  Problem pr;
  ProblemSpec& s = pr.spec;
  s.bounds = c.bounds();
  s.diffusion = Tensor2::rotated(c.anisotropy, 1.0, c.theta).scaled(eps);
  s.reaction = c.mu;
  s.exponent = c.p;
  s.source = c.source;
  s.dirichlet = dirichlet_by_marker(c.dirichlet);
  const std::string& id = c.experiment;
  if (id == "smooth-k1" || id == "smooth-k2") {
    const double mu = c.mu;
    const double factor = 2.0 * pi * pi * eps + mu;
    auto u = [](Point x) { return std::sin(pi * x.x) * std::sin(pi * x.y); };
    s.source = [u, factor](Point x) { return factor * u(x); };
    pr.exact = ExactSolution{u, [](Point x) {
                               return std::array<double, 2>{pi * std::cos(pi * x.x) * std::sin(pi * x.y),
                                                            pi * std::sin(pi * x.x) * std::cos(pi * x.y)};
                             }};
  } else if (id == "obtuse") {
    const double factor = (0.25 + 1.0) * pi * pi * eps + c.mu;
    auto u = [](Point x) { return std::sin(0.5 * pi * (x.x + 1.0)) * std::sin(pi * x.y); };
    s.source = [u, factor](Point x) { return factor * u(x); };
    pr.exact = ExactSolution{u, [](Point x) {
                               const double a = 0.5 * pi * (x.x + 1.0);
                               return std::array<double, 2>{0.5 * pi * std::cos(a) * std::sin(pi * x.y),
                                                            pi * std::sin(a) * std::cos(pi * x.y)};
                             }};
  } else if (id == "discbc") {
    const double tie = c.discbc_tie;
    s.dirichlet = [tie](Point x, int) { return discbc_value(x, tie); };
  } else if (id == "interior-layer") {
    s.source = [](Point x) {
      const bool inside = x.x >= 0.25 && x.x <= 0.75 && x.y >= 0.25 && x.y <= 0.75;
      return inside ? 0.5 : 1.0;
    };
  }
  return pr;
}

inline SolverConfig solver_config(const ExperimentConfig& c, double omega) {
  SolverConfig s;
  s.alpha = c.alpha;
  s.omega = omega;
  s.tol = c.tol;
  s.max_iter = c.max_iter;
  s.auto_damp = c.auto_damp;
  return s;
}

/// Bound-preserving solve, linear or semilinear according to the spec.
inline SolveReport bound_preserving_solve(const AssembledSystem& sys, const ProblemSpec& spec,
                                          const SolverConfig& cfg) {
  return spec.semilinear() ? nonlinear_richardson_solve(sys, spec, cfg) : richardson_solve(sys, spec.bounds, cfg);
}

struct GalerkinResult {
  NodalField u;
  std::size_t iterations = 0;  // 0 for the direct linear solve
  bool converged = true;
};

/// Plain Galerkin reference: a direct solve, or for the semilinear problem
/// the same Richardson iteration with no bounds.
inline GalerkinResult galerkin_reference(const AssembledSystem& sys, const ProblemSpec& spec,
                                         const SolverConfig& cfg) {
  if (!spec.semilinear()) return {galerkin_solve(sys), 0, true};
  ProblemSpec free = spec;
  free.bounds = BoundsBox::unbounded();
  const auto rep = nonlinear_richardson_solve(sys, free, cfg);
  return {rep.u_plus, rep.total_iterations, rep.converged};
}

inline void require_admissible(const NodalField& u, const BoundsBox& box, const std::string& what) {
  if (!is_admissible(u, box)) throw ExperimentError(what + ": constrained part left the box");
}

// ---------------------------------------------------------------------------
// Convergence studies

struct ConvergenceResult {
  std::vector<ErrorRecord> records;
  std::vector<bool> converged;
  std::vector<double> omega_used;
  std::vector<std::optional<double>> eoc_l2;
  std::vector<std::optional<double>> eoc_energy;
  std::vector<NodalField> fields;  // u+ per level
  std::vector<double> seconds;     // per level
};

/// EOC of an error column; rows that did not converge have no error and
/// break the rate on both sides.
inline std::vector<std::optional<double>> eoc_column(const std::vector<ErrorRecord>& recs,
                                                     const std::vector<bool>& converged, bool energy) {
  std::vector<std::pair<double, double>> h_err;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const double e = energy ? recs[i].err_energy : recs[i].err_l2;
    h_err.emplace_back(recs[i].h, converged[i] ? e : std::numeric_limits<double>::quiet_NaN());
  }
  return eoc(h_err);
}

inline ConvergenceResult run_convergence(const ExperimentConfig& c) {
  c.validate();
  if (c.levels.empty()) throw ConfigError("convergence study needs levels");
  const Problem pr = make_problem(c, c.eps);
  if (!pr.exact) throw ConfigError("experiment " + c.experiment + " has no manufactured solution");
  ConvergenceResult res;
  for (auto level : c.levels) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto space = build_space(build_mesh(c, level), c.degree);
    const auto sys = assemble_system(space, pr.spec, c.alpha);
    const auto rep = bound_preserving_solve(sys, pr.spec, solver_config(c, c.omega));
    require_admissible(rep.u_plus, pr.spec.bounds, "level " + std::to_string(level));
    const auto err = error_norms(rep.u_plus, *pr.exact, pr.spec);
    ErrorRecord r;
    r.level = level;
    r.h = mesh_quality(space->mesh()).h_max;
    r.ndof = space->num_dofs();
    r.err_l2 = err.l2;
    r.err_h1semi = err.h1semi;
    r.err_energy = err.energy;
    r.iterations = rep.total_iterations;
    std::tie(r.min_nodal, r.max_nodal) = nodal_extrema(rep.u_plus);
    res.records.push_back(r);
    res.converged.push_back(rep.converged);
    res.omega_used.push_back(rep.omega_used);
    res.fields.push_back(rep.u_plus);
    res.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  res.eoc_l2 = eoc_column(res.records, res.converged, false);
  res.eoc_energy = eoc_column(res.records, res.converged, true);
  return res;
}

// ---------------------------------------------------------------------------
// Epsilon sweeps

struct SweepRow {
  double eps = 0.0;
  double omega = 1.0;       // requested
  double omega_used = 1.0;  // after any damping
  std::size_t iterations = 0;
  bool converged = false;
  double min_nodal = 0.0;
  double max_nodal = 0.0;
};

struct SweepResult {
  std::size_t n = 0;  // criss-cross cells per side (0 for other meshes)
  double h_max = 0.0;
  std::vector<SweepRow> rows;
  std::vector<NodalField> fields;
  double seconds = 0.0;
};

inline double sweep_omega(const ExperimentConfig& c, double eps) {
  return eps <= c.small_eps_threshold ? c.omega_small_eps : c.omega;
}

inline SweepResult run_sweep(const ExperimentConfig& c) {
  c.validate();
  if (c.eps_list.empty()) throw ConfigError("sweep needs eps_list");
  const auto t0 = std::chrono::steady_clock::now();
  SweepResult res;
  const auto space = build_space(build_mesh(c), c.degree);
  res.h_max = mesh_quality(space->mesh()).h_max;
  if (c.mesh == "criss-cross") res.n = c.n > 0 ? c.n : criss_cross_cells_for(c.h_target, c.domain);
  for (double eps : c.eps_list) {
    const Problem pr = make_problem(c, eps);
    const auto sys = assemble_system(space, pr.spec, c.alpha);
    SweepRow row;
    row.eps = eps;
    row.omega = sweep_omega(c, eps);
    const auto rep = bound_preserving_solve(sys, pr.spec, solver_config(c, row.omega));
    require_admissible(rep.u_plus, pr.spec.bounds, "eps " + format_tag(eps));
    row.omega_used = rep.omega_used;
    row.iterations = rep.total_iterations;
    row.converged = rep.converged;
    std::tie(row.min_nodal, row.max_nodal) = nodal_extrema(rep.u_plus);
    res.rows.push_back(row);
    res.fields.push_back(rep.u_plus);
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// ---------------------------------------------------------------------------
// Galerkin versus bound-preserving comparisons

struct FieldSummary {
  std::size_t iterations = 0;
  bool converged = true;
  double min_nodal = 0.0;
  double max_nodal = 0.0;
  double undershoot = 0.0;  // max(0, lower - min)
  double overshoot = 0.0;   // max(0, max - upper)
};

inline FieldSummary summarise(const NodalField& u, const ExperimentConfig& c, std::size_t iterations,
                              bool converged) {
  FieldSummary s;
  s.iterations = iterations;
  s.converged = converged;
  std::tie(s.min_nodal, s.max_nodal) = nodal_extrema(u);
  s.undershoot = std::max(0.0, c.lower - s.min_nodal);
  s.overshoot = std::max(0.0, s.max_nodal - c.upper);
  return s;
}

struct SectionSample {
  double t = 0.0;  // arc parameter in [0, 1]
  Point x;
  double galerkin = 0.0;  // NaN outside the mesh
  double bounded = 0.0;
};

/// Point values along the diagonal of the mesh's bounding box.
inline std::vector<SectionSample> diagonal_section(const NodalField& galerkin, const NodalField& bounded,
                                                   std::size_t samples) {
  const auto& verts = galerkin.space->mesh().vertices();
  Point lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Point hi{-lo.x, -lo.y};
  for (const auto& v : verts) {
    lo = {std::min(lo.x, v.x), std::min(lo.y, v.y)};
    hi = {std::max(hi.x, v.x), std::max(hi.y, v.y)};
  }
  std::vector<SectionSample> out;
  for (std::size_t j = 0; j < samples; ++j) {
    SectionSample s;
    s.t = static_cast<double>(j) / static_cast<double>(samples - 1);
    s.x = lo + s.t * (hi - lo);
    if (const auto hit = locate(*galerkin.space, s.x)) {
      const auto [t, r] = *hit;
      s.galerkin = galerkin.eval_cell(t, r[0], r[1]);
      s.bounded = bounded.eval_cell(t, r[0], r[1]);
    } else {
      s.galerkin = s.bounded = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(s);
  }
  return out;
}

struct CompareCase {
  double eps = 0.0;
  NodalField galerkin;
  NodalField bounded;
  FieldSummary galerkin_summary;
  FieldSummary bounded_summary;
  double omega_used = 1.0;
  std::vector<SectionSample> section;
};

struct CompareResult {
  std::size_t n = 0;
  double h_max = 0.0;
  std::vector<CompareCase> cases;
  double seconds = 0.0;
};

inline CompareResult run_compare(const ExperimentConfig& c) {
  c.validate();
  const auto t0 = std::chrono::steady_clock::now();
  CompareResult res;
  const auto space = build_space(build_mesh(c), c.degree);
  res.h_max = mesh_quality(space->mesh()).h_max;
  if (c.mesh == "criss-cross") res.n = c.n > 0 ? c.n : criss_cross_cells_for(c.h_target, c.domain);
  const std::vector<double> eps_values = c.eps_list.empty() ? std::vector<double>{c.eps} : c.eps_list;
  for (double eps : eps_values) {
    const Problem pr = make_problem(c, eps);
    const auto sys = assemble_system(space, pr.spec, c.alpha);
    const auto cfg = solver_config(c, c.omega);
    const auto gal = galerkin_reference(sys, pr.spec, cfg);
    const auto rep = bound_preserving_solve(sys, pr.spec, cfg);
    require_admissible(rep.u_plus, pr.spec.bounds, "eps " + format_tag(eps));
    CompareCase cc;
    cc.eps = eps;
    cc.galerkin = gal.u;
    cc.bounded = rep.u_plus;
    cc.galerkin_summary = summarise(gal.u, c, gal.iterations, gal.converged);
    cc.bounded_summary = summarise(rep.u_plus, c, rep.total_iterations, rep.converged);
    cc.omega_used = rep.omega_used;
    cc.section = diagonal_section(gal.u, rep.u_plus, c.section_samples);
    res.cases.push_back(std::move(cc));
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// ---------------------------------------------------------------------------
// Single custom solve

struct SolveResult {
  AssembledSystem system;
  SolveReport report;
  GalerkinResult galerkin;
  double h_max = 0.0;
  double seconds = 0.0;
};

inline SolveResult run_solve(const ExperimentConfig& c) {
  c.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Problem pr = make_problem(c, c.eps);
  const auto space = build_space(build_mesh(c), c.degree);
  SolveResult res;
  res.h_max = mesh_quality(space->mesh()).h_max;
  res.system = assemble_system(space, pr.spec, c.alpha);
  const auto cfg = solver_config(c, c.omega);
  res.galerkin = galerkin_reference(res.system, pr.spec, cfg);
  res.report = bound_preserving_solve(res.system, pr.spec, cfg);
  require_admissible(res.report.u_plus, pr.spec.bounds, "solve");
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// ---------------------------------------------------------------------------
// Oracle equivalence suite

struct OracleCase {
  std::string mesh;
  int degree = 1;
  double eps = 1.0;
  std::optional<double> p;
  std::size_t ndof = 0;
  std::size_t active = 0;  // interior dofs on a bound
  bool solver_converged = false;
  double max_diff = 0.0;   // |u+ - u*|_inf
  double certificate = 0.0;
  double tolerance = 0.0;

  [[nodiscard]] bool pass() const { return solver_converged && max_diff <= tolerance; }
};

/// u+ of the method against the projected Gauss-Seidel solution of the
/// discrete obstacle problem on small meshes. The load changes sign and the
/// box [0, 0.1] is active on both sides for every case.
inline std::vector<OracleCase> run_oracle_check(const ExperimentConfig& base) {
  using std::numbers::pi;
  struct MeshCase {
    std::string name;
    Mesh mesh;
  };
  const std::vector<MeshCase> linear_meshes{{"criss-cross(8,8)", generate_criss_cross(8, 8)},
                                            {"obtuse level 2", generate_obtuse_layer(2)}};
  auto spec_for = [](double eps, std::optional<double> p) {
    ProblemSpec s;
    s.diffusion = Tensor2::identity(eps);
    s.reaction = 1.0;
    s.exponent = p;
    s.source = [](Point x) { return 10.0 * std::sin(2.0 * pi * x.x) * std::sin(2.0 * pi * x.y); };
    s.bounds = BoundsBox{0.0, 0.1};
    return s;
  };
  SolverConfig cfg;
  cfg.alpha = base.alpha;
  cfg.tol = 1e-13;
  cfg.max_iter = 100000;
  cfg.auto_damp = true;

  std::vector<OracleCase> out;
  auto run = [&](const std::string& name, const Mesh& mesh, int k, double eps, std::optional<double> p,
                 double tolerance) {
    const ProblemSpec spec = spec_for(eps, p);
    const auto space = build_space(mesh, k);
    const auto sys = assemble_system(space, spec, cfg.alpha);
    const auto rep = bound_preserving_solve(sys, spec, cfg);
    const ViProblem vi = p ? make_nonlinear_vi_problem(sys, spec.bounds) : make_vi_problem(sys, spec.bounds);
    const Eigen::VectorXd ref = p ? projected_nonlinear_gauss_seidel(vi, 1e-14) : projected_gauss_seidel(vi, 1e-14);
    const Eigen::VectorXd up = sys.restrict(rep.u_plus);
    OracleCase oc;
    oc.mesh = name;
    oc.degree = k;
    oc.eps = eps;
    oc.p = p;
    oc.ndof = space->num_dofs();
    for (Eigen::Index i = 0; i < up.size(); ++i) oc.active += (up[i] == vi.lower[i] || up[i] == vi.upper[i]);
    oc.solver_converged = rep.converged;
    oc.max_diff = (up - ref).lpNorm<Eigen::Infinity>();
    oc.certificate = vi_certificate_violation(vi, up, 1e-8);
    oc.tolerance = tolerance;
    out.push_back(oc);
  };
  for (const auto& m : linear_meshes) {
    for (int k : {1, 2}) {
      for (double eps : {1.0, 1e-3}) run(m.name, m.mesh, k, eps, std::nullopt, 1e-8);
    }
  }
  const Mesh small = generate_criss_cross(6, 6);
  for (int k : {1, 2}) {
    for (double eps : {1.0, 1e-3}) run("criss-cross(6,6)", small, k, eps, 4.0, 1e-6);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output writers

inline std::filesystem::path prepare_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

inline std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

inline nlohmann::json config_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["experiment"] = c.experiment;
  j["mesh"] = c.mesh;
  if (!c.mesh_file.empty()) j["mesh_file"] = c.mesh_file;
  j["domain"] = {c.domain.xmin, c.domain.xmax, c.domain.ymin, c.domain.ymax};
  j["levels"] = c.levels;
  j["degree"] = c.degree;
  j["eps"] = c.eps;
  j["eps_list"] = c.eps_list;
  j["mu"] = c.mu;
  j["p"] = c.p ? nlohmann::json(*c.p) : nlohmann::json(nullptr);
  j["anisotropy"] = c.anisotropy;
  j["theta"] = c.theta;
  j["alpha"] = c.alpha;
  j["omega"] = c.omega;
  j["omega_small_eps"] = c.omega_small_eps;
  j["small_eps_threshold"] = c.small_eps_threshold;
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  j["auto_damp"] = c.auto_damp;
  j["lower"] = c.lower;
  j["upper"] = std::isfinite(c.upper) ? nlohmann::json(c.upper) : nlohmann::json("inf");
  return j;
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  auto out = open_out(p);
  out << j.dump(2) << '\n';
}

inline void write_convergence_csv(std::ostream& out, const ConvergenceResult& r) {
  out << "level,h,ndof,err_l2,err_energy,eoc_l2,eoc_energy,iters,omega\n";
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& e = r.records[i];
    const bool ok = r.converged[i];
    out << e.level << ',' << format_double(e.h) << ',' << e.ndof << ',' << (ok ? format_double(e.err_l2) : "")
        << ',' << (ok ? format_double(e.err_energy) : "") << ',' << opt_cell(r.eoc_l2[i]) << ','
        << opt_cell(r.eoc_energy[i]) << ',' << (ok ? "" : "nc:") << e.iterations << ','
        << format_double(r.omega_used[i]) << '\n';
  }
}

inline void write_convergence_outputs(const ExperimentConfig& c, const ConvergenceResult& r) {
  const auto dir = prepare_dir(c.out);
  {
    auto out = open_out(dir / "convergence.csv");
    write_convergence_csv(out, r);
  }
  bool nonincreasing = true;
  for (std::size_t i = 1; i < r.records.size(); ++i) {
    nonincreasing = nonincreasing && r.records[i].iterations <= r.records[i - 1].iterations;
  }
  nlohmann::json meta;
  meta["config"] = config_json(c);
  meta["seconds_per_level"] = r.seconds;
  meta["iterations_nonincreasing"] = nonincreasing;
  write_json(dir / "metadata.json", meta);
  if (c.export_fields) {
    for (std::size_t i = 0; i < r.fields.size(); ++i) {
      require_admissible(r.fields[i], c.bounds(), "export");
      write_vtk((dir / ("level_" + std::to_string(r.records[i].level) + ".vtk")).string(), *r.fields[i].space,
                {{"u_plus", &r.fields[i]}}, c.experiment + " level " + std::to_string(r.records[i].level));
    }
  }
  auto py = open_out(dir / "plot_convergence.py");
  py << R"(import csv, sys
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

rows = [r for r in csv.DictReader(open("convergence.csv")) if r["err_l2"]]
h = [float(r["h"]) for r in rows]
fig, ax = plt.subplots()
ax.loglog(h, [float(r["err_l2"]) for r in rows], "o-", label="L2 error")
ax.loglog(h, [float(r["err_energy"]) for r in rows], "s-", label="energy error")
ax.set_xlabel("h")
ax.set_ylabel("error")
ax.legend()
fig.savefig("convergence.png", dpi=150)
)";
}

inline void write_sweep_outputs(const ExperimentConfig& c, const SweepResult& r) {
  const auto dir = prepare_dir(c.out);
  {
    auto out = open_out(dir / "sweep.csv");
    out << "eps,omega,iters,min_nodal,max_nodal\n";
    for (const auto& row : r.rows) {
      out << format_double(row.eps) << ',' << format_double(row.omega_used) << ',' << (row.converged ? "" : "nc:")
          << row.iterations << ',' << format_double(row.min_nodal) << ',' << format_double(row.max_nodal) << '\n';
    }
  }
  nlohmann::json meta;
  meta["config"] = config_json(c);
  meta["n"] = r.n;
  meta["h_max"] = r.h_max;
  meta["seconds"] = r.seconds;
  write_json(dir / "metadata.json", meta);
  if (c.export_fields) {
    for (std::size_t i = 0; i < r.fields.size(); ++i) {
      require_admissible(r.fields[i], c.bounds(), "export");
      write_vtk((dir / ("eps_" + format_tag(r.rows[i].eps) + ".vtk")).string(), *r.fields[i].space,
                {{"u_plus", &r.fields[i]}}, c.experiment + " eps " + format_tag(r.rows[i].eps));
    }
  }
  auto py = open_out(dir / "plot_sweep.py");
  py << R"(import csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("sweep.csv")))
eps = [float(r["eps"]) for r in rows]
its = [int(r["iters"].replace("nc:", "")) for r in rows]
fig, ax = plt.subplots()
ax.semilogx(eps, its, "o-")
ax.invert_xaxis()
ax.set_xlabel("eps")
ax.set_ylabel("Richardson iterations")
fig.savefig("sweep.png", dpi=150)
)";
}

inline void write_compare_outputs(const ExperimentConfig& c, const CompareResult& r) {
  const auto dir = prepare_dir(c.out);
  {
    auto out = open_out(dir / "compare.csv");
    out << "eps,method,iters,min_nodal,max_nodal,undershoot,overshoot\n";
    for (const auto& cc : r.cases) {
      for (const auto& [name, s] : {std::pair{"galerkin", cc.galerkin_summary}, std::pair{"bounded", cc.bounded_summary}}) {
        out << format_double(cc.eps) << ',' << name << ',' << (s.converged ? "" : "nc:") << s.iterations << ','
            << format_double(s.min_nodal) << ',' << format_double(s.max_nodal) << ',' << format_double(s.undershoot)
            << ',' << format_double(s.overshoot) << '\n';
      }
    }
  }
  for (const auto& cc : r.cases) {
    const std::string tag = format_tag(cc.eps);
    auto out = open_out(dir / ("section_eps_" + tag + ".csv"));
    out << "t,x,y,galerkin,bounded\n";
    for (const auto& s : cc.section) {
      const bool in = !std::isnan(s.galerkin);
      out << format_double(s.t) << ',' << format_double(s.x.x) << ',' << format_double(s.x.y) << ','
          << (in ? format_double(s.galerkin) : "") << ',' << (in ? format_double(s.bounded) : "") << '\n';
    }
    if (c.export_fields) {
      require_admissible(cc.bounded, c.bounds(), "export");
      write_vtk((dir / ("compare_eps_" + tag + ".vtk")).string(), *cc.bounded.space,
                {{"galerkin", &cc.galerkin}, {"u_plus", &cc.bounded}}, c.experiment + " eps " + tag);
    }
  }
  nlohmann::json meta;
  meta["config"] = config_json(c);
  meta["n"] = r.n;
  meta["h_max"] = r.h_max;
  meta["seconds"] = r.seconds;
  write_json(dir / "metadata.json", meta);
  auto py = open_out(dir / "plot_compare.py");
  py << R"(import csv, glob
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

for name in sorted(glob.glob("section_eps_*.csv")):
    rows = [r for r in csv.DictReader(open(name)) if r["galerkin"]]
    t = [float(r["t"]) for r in rows]
    fig, ax = plt.subplots()
    ax.plot(t, [float(r["galerkin"]) for r in rows], label="Galerkin")
    ax.plot(t, [float(r["bounded"]) for r in rows], label="bound preserving")
    ax.set_xlabel("position along x = y")
    ax.legend()
    fig.savefig(name.replace(".csv", ".png"), dpi=150)
)";
}

inline void write_solve_outputs(const ExperimentConfig& c, const SolveResult& r) {
  const auto dir = prepare_dir(c.out);
  const auto& rep = r.report;
  require_admissible(rep.u_plus, c.bounds(), "export");
  if (c.export_fields) {
    write_vtk((dir / "solution.vtk").string(), *rep.u_plus.space,
              {{"u_plus", &rep.u_plus}, {"u_minus", &rep.u_minus}, {"galerkin", &r.galerkin.u}}, c.experiment);
  }
  const auto [lo, hi] = nodal_extrema(rep.u_plus);
  const auto [glo, ghi] = nodal_extrema(r.galerkin.u);
  nlohmann::json j;
  j["config"] = config_json(c);
  j["ndof"] = rep.u_plus.size();
  j["h_max"] = r.h_max;
  j["converged"] = rep.converged;
  j["iterations"] = rep.total_iterations;
  j["omega_used"] = rep.omega_used;
  j["min_nodal"] = lo;
  j["max_nodal"] = hi;
  j["galerkin_min_nodal"] = glo;
  j["galerkin_max_nodal"] = ghi;
  j["galerkin_converged"] = r.galerkin.converged;
  j["seconds"] = r.seconds;
  write_json(dir / "summary.json", j);
}

inline void write_oracle_outputs(const ExperimentConfig& c, const std::vector<OracleCase>& cases) {
  const auto dir = prepare_dir(c.out);
  auto out = open_out(dir / "oracle.csv");
  out << "mesh,degree,eps,p,ndof,active,max_diff,tolerance,certificate,pass\n";
  for (const auto& oc : cases) {
    out << '"' << oc.mesh << "\"," << oc.degree << ',' << format_double(oc.eps) << ','
        << (oc.p ? format_double(*oc.p) : "") << ',' << oc.ndof << ',' << oc.active << ','
        << format_double(oc.max_diff) << ',' << format_double(oc.tolerance) << ',' << format_double(oc.certificate)
        << ',' << (oc.pass() ? "yes" : "no") << '\n';
  }
}

}  // namespace bpfem
