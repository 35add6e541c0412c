// Minimal library walk-through: a reaction-dominated problem whose Galerkin
// solution overshoots, solved again with the bound-preserving method.

#include <cstdio>

#include "bpfem/analysis.hpp"
#include "bpfem/solver.hpp"

using namespace bpfem;

int main() {
  const auto space = build_space(generate_criss_cross(32, 32), 1);

  ProblemSpec spec;
  spec.diffusion = Tensor2::identity(1e-6);
  spec.reaction = 1.0;
  spec.source = 1.0;
  spec.bounds = BoundsBox{0.0, 1.0};

  const auto sys = assemble_system(space, spec, /*alpha=*/1.0);
  const NodalField fem = galerkin_solve(sys);

  SolverConfig cfg;
  cfg.auto_damp = true;
  const SolveReport rep = richardson_solve(sys, spec.bounds, cfg);

  const auto [glo, ghi] = nodal_extrema(fem);
  const auto [lo, hi] = nodal_extrema(rep.u_plus);
  std::printf("Galerkin:         nodal range [%.6f, %.6f]\n", glo, ghi);
  std::printf("bound preserving: nodal range [%.6f, %.6f] after %zu iterations (omega %.3g)\n", lo, hi,
              rep.total_iterations, rep.omega_used);
  std::printf("admissible: %s\n", is_admissible(rep.u_plus, spec.bounds) ? "yes" : "no");
  return rep.converged ? 0 : 1;
}
