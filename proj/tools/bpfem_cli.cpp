// Experiment driver: convergence studies, eps sweeps, Galerkin comparisons,
// the oracle equivalence suite and single solves.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>

#include "bpfem/experiments.hpp"

using namespace bpfem;

namespace {

enum Exit { kOk = 0, kUsage = 2, kRuntime = 3, kCheckFailed = 4, kNotConverged = 5 };

int fail(int code, const std::string& type, const std::string& message) {
  nlohmann::json j;
  j["error"] = {{"type", type}, {"message", message}, {"exit_code", code}};
  std::cerr << j.dump() << std::endl;
  return code;
}

struct Options {
  std::string config;
  std::string experiment;
  std::string out;
  std::string levels;
  std::vector<std::string> settings;
  std::optional<double> omega;
  std::optional<double> alpha;
  bool no_auto_damp = false;
};

ExperimentConfig resolve(const Options& o, const std::string& default_id) {
  ExperimentConfig c = o.config.empty() ? preset(o.experiment.empty() ? default_id : o.experiment)
                                        : load_config(o.config, o.experiment);
  for (const auto& s : o.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + s);
    apply_setting(c, detail::trim(s.substr(0, eq)), s.substr(eq + 1));
  }
  if (!o.out.empty()) c.out = o.out;
  if (!o.levels.empty()) c.levels = parse_levels(o.levels);
  if (o.omega) c.omega = *o.omega;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.no_auto_damp) c.auto_damp = false;
  c.validate();
  return c;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "INI configuration file");
  sub->add_option("--experiment", o.experiment, "experiment id, or section of the config file");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--levels", o.levels, "levels, e.g. 3-8 or 3,4,5");
  sub->add_option("--omega", o.omega, "Richardson damping in (0, 1]");
  sub->add_option("--alpha", o.alpha, "stabilisation parameter");
  sub->add_option("--set", o.settings, "override any configuration key: key=value");
  sub->add_flag("--no-auto-damp", o.no_auto_damp, "keep omega fixed");
}

std::string iters_cell(std::size_t n, bool converged) { return (converged ? "" : "nc:") + std::to_string(n); }

int run_convergence_cmd(const Options& o) {
  const auto c = resolve(o, "smooth-k1");
  const auto r = run_convergence(c);
  write_convergence_outputs(c, r);
  std::printf("%-6s %-10s %-8s %-12s %-12s %-7s %-7s %s\n", "level", "h", "ndof", "err_l2", "err_energy", "eoc_l2",
              "eoc_en", "iters");
  bool all = true;
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& e = r.records[i];
    auto rate = [](const std::optional<double>& v) { return v ? std::to_string(*v).substr(0, 5) : std::string("-"); };
    std::printf("%-6zu %-10.4g %-8zu %-12.4e %-12.4e %-7s %-7s %s\n", e.level, e.h, e.ndof, e.err_l2, e.err_energy,
                rate(r.eoc_l2[i]).c_str(), rate(r.eoc_energy[i]).c_str(),
                iters_cell(e.iterations, r.converged[i]).c_str());
    all = all && r.converged[i];
  }
  std::printf("wrote %s\n", c.out.c_str());
  return all ? kOk : fail(kNotConverged, "not_converged", "some levels did not converge; see convergence.csv");
}

int run_sweep_cmd(const Options& o) {
  const auto c = resolve(o, "layers");
  const auto r = run_sweep(c);
  write_sweep_outputs(c, r);
  std::printf("mesh: n = %zu, h_max = %.4g\n%-8s %-8s %-8s %-12s %s\n", r.n, r.h_max, "eps", "omega", "iters", "min",
              "max");
  bool all = true;
  for (const auto& row : r.rows) {
    std::printf("%-8.0e %-8.4g %-8s %-12.4e %.4e\n", row.eps, row.omega_used,
                iters_cell(row.iterations, row.converged).c_str(), row.min_nodal, row.max_nodal);
    all = all && row.converged;
  }
  std::printf("wrote %s\n", c.out.c_str());
  return all ? kOk : fail(kNotConverged, "not_converged", "some eps values did not converge; see sweep.csv");
}

int run_compare_cmd(const Options& o) {
  const auto c = resolve(o, "interior-layer");
  const auto r = run_compare(c);
  write_compare_outputs(c, r);
  std::printf("%-8s %-10s %-8s %-12s %-12s %-12s %s\n", "eps", "method", "iters", "min", "max", "undershoot",
              "overshoot");
  bool all = true;
  for (const auto& cc : r.cases) {
    for (const auto& [name, s] : {std::pair{"galerkin", cc.galerkin_summary}, std::pair{"bounded", cc.bounded_summary}}) {
      std::printf("%-8.0e %-10s %-8s %-12.4e %-12.4e %-12.4e %.4e\n", cc.eps, name,
                  iters_cell(s.iterations, s.converged).c_str(), s.min_nodal, s.max_nodal, s.undershoot, s.overshoot);
      all = all && s.converged;
    }
  }
  std::printf("wrote %s\n", c.out.c_str());
  return all ? kOk : fail(kNotConverged, "not_converged", "a solve did not converge; see compare.csv");
}

int run_oracle_cmd(const Options& o) {
  auto c = resolve(o, "custom");
  if (o.out.empty() && o.config.empty()) c.out = "out/oracle-check";
  const auto cases = run_oracle_check(c);
  write_oracle_outputs(c, cases);
  bool all = true;
  for (const auto& oc : cases) {
    std::printf("%-18s k=%d eps=%-6.0e %-4s active=%-4zu |u+ - u*|=%.3e  %s\n", oc.mesh.c_str(), oc.degree, oc.eps,
                oc.p ? "p=4" : "lin", oc.active, oc.max_diff, oc.pass() ? "ok" : "MISMATCH");
    all = all && oc.pass();
  }
  std::printf("wrote %s\n", c.out.c_str());
  return all ? kOk : fail(kCheckFailed, "oracle_mismatch", "method and obstacle oracle disagree; see oracle.csv");
}

int run_solve_cmd(const Options& o) {
  const auto c = resolve(o, "custom");
  const auto r = run_solve(c);
  write_solve_outputs(c, r);
  const auto [lo, hi] = nodal_extrema(r.report.u_plus);
  std::printf("ndof %zu, iterations %zu, omega %.4g, u+ in [%.6g, %.6g]\n", r.report.u_plus.size(),
              r.report.total_iterations, r.report.omega_used, lo, hi);
  std::printf("wrote %s\n", c.out.c_str());
  return r.report.converged ? kOk : fail(kNotConverged, "not_converged", "Richardson iteration did not converge");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bound-preserving finite element experiments"};
  app.require_subcommand(1);
  Options o;
  struct Cmd {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Cmd cmds[] = {{"convergence", "manufactured-solution convergence study", run_convergence_cmd},
                      {"sweep", "iteration counts and fields over eps", run_sweep_cmd},
                      {"compare", "Galerkin against the bound-preserving solution", run_compare_cmd},
                      {"oracle-check", "method against the obstacle-problem oracle", run_oracle_cmd},
                      {"solve", "single solve from a configuration", run_solve_cmd}};
  std::vector<std::pair<CLI::App*, const Cmd*>> subs;
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub, o);
    subs.emplace_back(sub, &c);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kUsage, "usage", e.what());
  }
  try {
    for (const auto& [sub, cmd] : subs) {
      if (sub->parsed()) return cmd->run(o);
    }
  } catch (const ConfigError& e) {
    return fail(kUsage, "config", e.what());
  } catch (const MeshError& e) {
    return fail(kUsage, "mesh", e.what());
  } catch (const IoError& e) {
    return fail(kRuntime, "io", e.what());
  } catch (const std::exception& e) {
    return fail(kRuntime, "runtime", e.what());
  }
  return kOk;
}
