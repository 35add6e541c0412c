#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <unistd.h>

#include "bpfem/experiments.hpp"

using namespace bpfem;
namespace fs = std::filesystem;

namespace {

fs::path scratch_root() { return fs::temp_directory_path() / ("bpfem_test_" + std::to_string(::getpid())); }

class RemoveScratch : public ::testing::Environment {
 public:
  void TearDown() override { fs::remove_all(scratch_root()); }
};
const auto* const kRemoveScratch = ::testing::AddGlobalTestEnvironment(new RemoveScratch);

fs::path scratch(const std::string& name) {
  const fs::path p = scratch_root() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run_cli(const std::string& args, const fs::path& dir) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(BPFEM_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

ExperimentConfig small_smooth(const fs::path& out) {
  ExperimentConfig c = preset("smooth-k1");
  c.levels = {2, 3, 4};
  c.out = out.string();
  return c;
}

}  // namespace

TEST(Presets, ExperimentValues) {
  const auto k1 = preset("smooth-k1");
  EXPECT_EQ(k1.eps, 1e-5);
  EXPECT_EQ(k1.mu, 1.0);
  EXPECT_EQ(k1.degree, 1);
  EXPECT_EQ(preset("smooth-k2").degree, 2);
  EXPECT_EQ(k1.tol, 1e-12);
  EXPECT_EQ(k1.alpha, 1.0);

  const auto ob = preset("obtuse");
  EXPECT_EQ(ob.domain.xmin, -1.0);
  EXPECT_EQ(ob.domain.xmax, 1.0);
  EXPECT_EQ(ob.domain.ymin, 0.0);
  EXPECT_EQ(ob.domain.ymax, 1.0);
  // The manufactured solution stays in [0, 1] on the domain.
  const auto pr = make_problem(ob, ob.eps);
  for (double x = -1.0; x <= 1.0; x += 0.05) {
    for (double y = 0.0; y <= 1.0; y += 0.05) {
      const double u = pr.exact->value({x, y});
      EXPECT_GE(u, -1e-15);
      EXPECT_LE(u, 1.0);
    }
  }

  const auto an = preset("anisotropic-nl");
  EXPECT_EQ(an.eps, 1e-5);
  EXPECT_EQ(an.anisotropy, 100.0);
  EXPECT_DOUBLE_EQ(an.theta, -std::numbers::pi / 6.0);
  ASSERT_TRUE(an.p);
  EXPECT_EQ(*an.p, 4.0);
  EXPECT_EQ(an.dirichlet.at(1), 0.0);
  EXPECT_EQ(an.dirichlet.at(2), 2.0);
  EXPECT_EQ(an.source, 0.0);

  EXPECT_EQ(preset("obtuse").omega, 0.25);
  EXPECT_EQ(preset("layers").eps_list, (std::vector<double>{1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7}));
  EXPECT_EQ(preset("interior-layer").eps_list, (std::vector<double>{1e-4, 1e-7}));
  EXPECT_THROW(preset("nonsense"), ConfigError);
}

TEST(Presets, AnisotropicTensorIsRotatedDiagonal) {
  auto c = preset("anisotropic-nl");
  c.mesh = "criss-cross";
  const auto pr = make_problem(c, c.eps);
  const Tensor2 d = pr.spec.diffusion.at(0, {});
  const auto ev = d.eigenvalues();
  EXPECT_NEAR(ev[0], 1e-5, 1e-18);
  EXPECT_NEAR(ev[1], 1e-3, 1e-16);
  // Leading eigenvector of R diag(100, 1) R^T is the first column of R.
  const double c0 = std::cos(-std::numbers::pi / 6), s0 = -std::sin(-std::numbers::pi / 6);
  const auto dv = d.apply({c0, s0});
  EXPECT_NEAR(dv[0], 1e-3 * c0, 1e-16);
  EXPECT_NEAR(dv[1], 1e-3 * s0, 1e-16);
}

TEST(Presets, ManufacturedSourcesMatchTheOperator) {
  // -eps Laplace u + mu u checked against a finite-difference Laplacian.
  for (const char* id : {"smooth-k1", "obtuse"}) {
    auto c = preset(id);
    c.eps = 0.3;
    c.mu = 2.0;
    const auto pr = make_problem(c, c.eps);
    const Point x{0.31, 0.42};
    const double h = 1e-4;
    auto u = pr.exact->value;
    const double lap = (u({x.x + h, x.y}) + u({x.x - h, x.y}) + u({x.x, x.y + h}) + u({x.x, x.y - h}) - 4 * u(x)) / (h * h);
    EXPECT_NEAR(pr.spec.source.at(0, x), -0.3 * lap + 2.0 * u(x), 1e-6) << id;
    const auto g = pr.exact->gradient(x);
    EXPECT_NEAR(g[0], (u({x.x + h, x.y}) - u({x.x - h, x.y})) / (2 * h), 1e-7) << id;
    EXPECT_NEAR(g[1], (u({x.x, x.y + h}) - u({x.x, x.y - h})) / (2 * h), 1e-7) << id;
  }
}

TEST(Config, SizingForTargetMeshWidth) {
  const std::size_t n = criss_cross_cells_for(0.02, Rect::unit_square());
  EXPECT_EQ(n, 50u);
  const double h = mesh_quality(generate_criss_cross(n, n)).h_max;
  EXPECT_GE(h, 0.018);
  EXPECT_LE(h, 0.022);
}

TEST(Config, ParsesSectionsAndSharedKeys) {
  const auto dir = scratch("config");
  write_text(dir / "a.ini",
             "eps = 1e-3\nomega = 0.5\n\n[layers]\neps_list = 1e-2, 1e-4\nupper = inf\n"
             "dirichlet = 1:0.25, 3:2\n\n[mine]\nexperiment = smooth-k2\nlevels = 2-4\n"
             "mesh = file\nmesh_file = sub/m.mesh\n");
  fs::create_directories(dir / "sub");
  write_mesh(generate_criss_cross(2, 2), (dir / "sub" / "m.mesh").string());

  const auto a = load_config((dir / "a.ini").string(), "layers");
  EXPECT_EQ(a.experiment, "layers");
  EXPECT_EQ(a.eps, 1e-3);
  EXPECT_EQ(a.omega, 0.5);
  EXPECT_EQ(a.eps_list, (std::vector<double>{1e-2, 1e-4}));
  EXPECT_TRUE(std::isinf(a.upper));
  EXPECT_EQ(a.dirichlet.at(1), 0.25);
  EXPECT_EQ(a.dirichlet.at(3), 2.0);

  const auto b = load_config((dir / "a.ini").string(), "mine");
  EXPECT_EQ(b.experiment, "smooth-k2");
  EXPECT_EQ(b.degree, 2);  // from the preset
  EXPECT_EQ(b.levels, (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_EQ(fs::path(b.mesh_file), (dir / "sub" / "m.mesh").lexically_normal());
  EXPECT_NO_THROW(b.validate());

  EXPECT_THROW(load_config((dir / "a.ini").string()), ConfigError);  // two sections
  EXPECT_THROW(load_config((dir / "a.ini").string(), "absent"), ConfigError);
}

TEST(Config, RejectsBadValues) {
  ExperimentConfig c;
  EXPECT_THROW(apply_setting(c, "no_such_key", "1"), ConfigError);
  EXPECT_THROW(apply_setting(c, "eps", "abc"), ConfigError);
  EXPECT_THROW(apply_setting(c, "eps", "1e-3x"), ConfigError);
  EXPECT_THROW(apply_setting(c, "max_iter", "-3"), ConfigError);
  EXPECT_THROW(apply_setting(c, "auto_damp", "maybe"), ConfigError);
  EXPECT_THROW(apply_setting(c, "dirichlet", "1=0"), ConfigError);
  EXPECT_THROW(parse_levels("5-3"), ConfigError);
  EXPECT_EQ(parse_levels("3,5"), (std::vector<std::size_t>{3, 5}));

  auto bad = [](auto mutate) {
    ExperimentConfig x;
    mutate(x);
    return x;
  };
  EXPECT_THROW(bad([](auto& x) { x.degree = 3; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& x) { x.eps = 0.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& x) { x.p = 1.5; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& x) { x.omega = 1.5; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& x) { x.lower = 1.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& x) { x.mesh = "file"; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& x) {
                 x.mesh = "file";
                 x.mesh_file = "/no/such/file.mesh";
               }).validate(),
               ConfigError);
  EXPECT_THROW(bad([](auto& x) { x.experiment = "bogus"; }).validate(), ConfigError);
}

TEST(DiscontinuousBoundaryData, PatternAndTies) {
  EXPECT_EQ(discbc_value({0.25, 0.0}, 1.0), 1.0);
  EXPECT_EQ(discbc_value({0.75, 0.0}, 1.0), 0.0);
  EXPECT_EQ(discbc_value({1.0, 0.25}, 1.0), 1.0);
  EXPECT_EQ(discbc_value({1.0, 0.75}, 1.0), 0.0);
  EXPECT_EQ(discbc_value({0.75, 1.0}, 1.0), 1.0);
  EXPECT_EQ(discbc_value({0.25, 1.0}, 1.0), 0.0);
  EXPECT_EQ(discbc_value({0.0, 0.75}, 1.0), 1.0);
  EXPECT_EQ(discbc_value({0.0, 0.25}, 1.0), 0.0);
  // Jump points take the tie value.
  for (Point p : {Point{0, 0}, Point{1, 0}, Point{1, 1}, Point{0, 1}, Point{0.5, 0}, Point{1, 0.5}, Point{0.5, 1},
                  Point{0, 0.5}}) {
    EXPECT_EQ(discbc_value(p, 1.0), 1.0);
    EXPECT_EQ(discbc_value(p, 0.3), 0.3);
  }
}

TEST(Convergence, CsvEocColumnsComeFromTheErrorColumns) {
  const auto dir = scratch("conv");
  const auto c = small_smooth(dir);
  const auto r = run_convergence(c);
  write_convergence_outputs(c, r);
  const auto rows = read_csv(dir / "convergence.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"level", "h", "ndof", "err_l2", "err_energy", "eoc_l2", "eoc_energy",
                                               "iters", "omega"}));
  std::vector<std::pair<double, double>> l2, en;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    l2.emplace_back(std::stod(rows[i][1]), std::stod(rows[i][3]));
    en.emplace_back(std::stod(rows[i][1]), std::stod(rows[i][4]));
  }
  const auto e2 = eoc(l2), ee = eoc(en);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i][5], e2[i - 1] ? format_double(*e2[i - 1]) : "");
    EXPECT_EQ(rows[i][6], ee[i - 1] ? format_double(*ee[i - 1]) : "");
  }
  EXPECT_TRUE(rows[1][5].empty());
  EXPECT_GT(std::stod(rows[3][5]), 1.8);
}

TEST(Convergence, NonConvergedLevelIsFlagged) {
  auto c = small_smooth(scratch("nc"));
  c.max_iter = 1;
  c.auto_damp = false;
  const auto r = run_convergence(c);
  ASSERT_FALSE(r.converged.back());
  std::ostringstream csv;
  write_convergence_csv(csv, r);
  std::string last;
  std::istringstream in(csv.str());
  for (std::string line; std::getline(in, line);) last = line;
  EXPECT_NE(last.find(",,,,nc:1,"), std::string::npos) << last;
  EXPECT_FALSE(r.eoc_l2.back());
}

TEST(Convergence, CliRerunIsByteIdenticalAndFieldsAdmissible) {
  const auto dir = scratch("rerun");
  const std::string args = "convergence --experiment smooth-k2 --levels 2-3 --out ";
  const auto a = run_cli(args + (dir / "a").string(), dir);
  const auto b = run_cli(args + (dir / "b").string(), dir);
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const std::string csv = slurp(dir / "a" / "convergence.csv");
  ASSERT_FALSE(csv.empty());
  EXPECT_EQ(csv, slurp(dir / "b" / "convergence.csv"));
  for (const char* level : {"level_2.vtk", "level_3.vtk"}) {
    EXPECT_EQ(slurp(dir / "a" / level), slurp(dir / "b" / level));
    const auto vtk = read_vtk((dir / "a" / level).string());
    for (double v : vtk.scalar("u_plus")) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_TRUE(fs::exists(dir / "a" / "plot_convergence.py"));
  EXPECT_TRUE(fs::exists(dir / "a" / "metadata.json"));
}

TEST(Vtk, RoundTripIsExact) {
  for (int k : {1, 2}) {
    const auto s = build_space(generate_obtuse_layer(2), k);
    const NodalField f = interpolate(s, [](Point p) { return std::exp(p.x) / 3.0 - p.y; });
    std::stringstream ss;
    write_vtk(ss, *s, {{"f", &f}, {"g", &f}});
    const auto d = read_vtk(ss);
    ASSERT_EQ(d.points.size(), s->num_dofs());
    EXPECT_EQ(d.cells.size(), (k == 1 ? 1 : 4) * s->mesh().num_triangles());
    for (std::size_t i = 0; i < s->num_dofs(); ++i) {
      EXPECT_EQ(d.points[i][0], s->nodes()[i].x);
      EXPECT_EQ(d.points[i][1], s->nodes()[i].y);
      EXPECT_EQ(d.scalar("f")[i], f[i]);
    }
    // Sub-triangles tile the domain with positive orientation.
    double area = 0.0;
    for (const auto& c : d.cells) {
      const Point a{d.points[c[0]][0], d.points[c[0]][1]}, b{d.points[c[1]][0], d.points[c[1]][1]},
          e{d.points[c[2]][0], d.points[c[2]][1]};
      const double a2 = cross(b - a, e - a);
      EXPECT_GT(a2, 0.0);
      area += 0.5 * a2;
    }
    EXPECT_NEAR(area, 2.0, 1e-14);
  }
  const auto s = build_space(generate_criss_cross(1, 1), 1);
  const NodalField f = NodalField::zeros(s);
  std::stringstream ss;
  EXPECT_THROW(write_vtk(ss, *s, {{"has space", &f}}), IoError);
}

TEST(Sweep, CoarseLayersAreBoundedAndFast) {
  auto c = preset("layers");
  c.h_target = 0.1;
  c.eps_list = {1e-2, 1e-5};
  c.auto_damp = true;
  c.out = scratch("sweep").string();
  const auto r = run_sweep(c);
  write_sweep_outputs(c, r);
  EXPECT_EQ(r.n, 10u);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].omega, 1.0);
  EXPECT_EQ(r.rows[1].omega, 0.5);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_TRUE(r.rows[i].converged);
    EXPECT_TRUE(is_admissible(r.fields[i], c.bounds()));
    EXPECT_GE(r.rows[i].min_nodal, 0.0);
    EXPECT_LE(r.rows[i].max_nodal, 1.0);
  }
  EXPECT_LE(r.rows[0].iterations, 4u);
  const auto csv = read_csv(fs::path(c.out) / "sweep.csv");
  EXPECT_EQ(csv[0], (std::vector<std::string>{"eps", "omega", "iters", "min_nodal", "max_nodal"}));
  EXPECT_TRUE(fs::exists(fs::path(c.out) / "eps_1e-05.vtk"));
}

TEST(Compare, BoundedFieldHasNoOvershootAndSectionIsExact) {
  auto c = preset("interior-layer");
  c.h_target = 0.05;
  c.eps_list = {1e-7};
  c.section_samples = 11;
  c.out = scratch("compare").string();
  const auto r = run_compare(c);
  write_compare_outputs(c, r);
  ASSERT_EQ(r.cases.size(), 1u);
  const auto& cc = r.cases[0];
  EXPECT_EQ(cc.bounded_summary.undershoot, 0.0);
  EXPECT_EQ(cc.bounded_summary.overshoot, 0.0);
  EXPECT_GT(cc.galerkin_summary.undershoot + cc.galerkin_summary.overshoot, 0.0);
  ASSERT_EQ(cc.section.size(), 11u);
  EXPECT_EQ(cc.section.front().x.x, 0.0);
  EXPECT_EQ(cc.section.back().x.y, 1.0);
  // Corners carry the Dirichlet value.
  EXPECT_EQ(cc.section.front().galerkin, 0.0);
  const auto csv = read_csv(fs::path(c.out) / "section_eps_1e-07.csv");
  EXPECT_EQ(csv.size(), 12u);
  const auto vtk = read_vtk((fs::path(c.out) / "compare_eps_1e-07.vtk").string());
  for (double v : vtk.scalar("u_plus")) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Compare, SectionSkipsHolesAndReproducesLinears) {
  const auto s = build_space(read_mesh(std::string(BPFEM_FIXTURES) + "/square_with_hole.mesh"), 1);
  const NodalField f = interpolate(s, [](Point p) { return 2.0 * p.x - p.y; });
  const auto sec = diagonal_section(f, f, 19);
  std::size_t holes = 0;
  for (const auto& q : sec) {
    if (std::isnan(q.galerkin)) {
      ++holes;
      EXPECT_GT(q.x.x, 4.0 / 9.0);
      EXPECT_LT(q.x.x, 5.0 / 9.0);
    } else {
      EXPECT_NEAR(q.galerkin, 2.0 * q.x.x - q.x.y, 1e-12);
    }
  }
  EXPECT_EQ(holes, 1u);  // only t = 0.5 falls strictly inside the hole
}

TEST(OracleCheck, AllCasesAgree) {
  const auto cases = run_oracle_check(ExperimentConfig{});
  EXPECT_EQ(cases.size(), 12u);
  for (const auto& oc : cases) {
    EXPECT_TRUE(oc.pass()) << oc.mesh << " k=" << oc.degree << " eps=" << oc.eps << " diff=" << oc.max_diff;
    EXPECT_LE(oc.certificate, 0.0) << oc.mesh;
    EXPECT_GT(oc.active, 0u) << oc.mesh;
  }
}

TEST(ObtuseMesh, DiscreteMaximumPrincipleFails) {
  // Level 2: the Poisson stiffness matrix has an inverse with a negative
  // entry, so a non-negative load can give a negative Galerkin solution.
  ProblemSpec poisson;
  const auto s = build_space(generate_obtuse_layer(2), 1);
  const auto sys = assemble_system(s, poisson, 1.0);
  const SpdFactorization f(sys.A);
  double lowest = 0.0;
  for (Eigen::Index i = 0; i < sys.size(); ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(sys.size());
    e[i] = 1.0;
    lowest = std::min(lowest, f.solve(e).minCoeff());
  }
  EXPECT_LT(lowest, 0.0);

  // The smooth obtuse problem: Galerkin overshoots 1 at level 3, u+ does not.
  auto c = preset("obtuse");
  c.levels = {3};
  const auto res = run_solve(c);
  EXPECT_GT(nodal_extrema(res.galerkin.u).second, 1.0);
  EXPECT_LE(nodal_extrema(res.report.u_plus).second, 1.0);
  EXPECT_GT(res.report.total_iterations, 1u);
}

TEST(Cli, MachineReadableErrors) {
  const auto dir = scratch("cli");
  struct Case {
    std::string args;
    int code;
    std::string type;
  };
  write_text(dir / "bad.ini", "[custom]\nthis_key = 1\n");
  const std::vector<Case> cases{{"solve --set degree=3", 2, "config"},
                                {"solve --config " + (dir / "missing.ini").string(), 2, "config"},
                                {"solve --config " + (dir / "bad.ini").string(), 2, "config"},
                                {"solve --omega abc", 2, "usage"},
                                {"", 2, "usage"}};
  for (const auto& k : cases) {
    const auto r = run_cli(k.args, dir);
    EXPECT_EQ(r.code, k.code) << k.args;
    const auto j = nlohmann::json::parse(r.err, nullptr, false);
    ASSERT_FALSE(j.is_discarded()) << k.args << ": " << r.err;
    EXPECT_EQ(j["error"]["type"], k.type) << k.args;
    EXPECT_EQ(j["error"]["exit_code"], k.code);
  }
}

TEST(Cli, FlagsOverrideFileKeys) {
  const auto dir = scratch("override");
  write_text(dir / "c.ini", "[custom]\nn = 4\neps = 1e-2\nomega = 0.5\nauto_damp = true\nout = " +
                                (dir / "from_file").string() + "\n");
  const auto r = run_cli("solve --config " + (dir / "c.ini").string() + " --omega 0.25 --alpha 2 --no-auto-damp --out " +
                             (dir / "flag").string(),
                         dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(fs::exists(dir / "from_file"));
  const auto j = nlohmann::json::parse(slurp(dir / "flag" / "summary.json"));
  EXPECT_EQ(j["config"]["omega"], 0.25);
  EXPECT_EQ(j["config"]["alpha"], 2.0);
  EXPECT_EQ(j["config"]["auto_damp"], false);
  EXPECT_EQ(j["config"]["eps"], 1e-2);
  EXPECT_TRUE(j["converged"].get<bool>());
}

TEST(Cli, NonConvergenceExitsNonzero) {
  const auto dir = scratch("cli_nc");
  const auto r = run_cli("solve --experiment layers --set n=8 --set eps=1e-6 --set max_iter=2 --no-auto-damp --out " +
                             (dir / "o").string(),
                         dir);
  EXPECT_EQ(r.code, 5);
  const auto j = nlohmann::json::parse(r.err, nullptr, false);
  ASSERT_FALSE(j.is_discarded()) << r.err;
  EXPECT_EQ(j["error"]["type"], "not_converged");
  // Outputs are still written and u+ is still admissible.
  const auto vtk = read_vtk((dir / "o" / "solution.vtk").string());
  for (double v : vtk.scalar("u_plus")) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}
