#pragma once

// Darboux transformation engine for the 1D problems that appear on the xi
// line of the separated 2D form: a nodeless eigenfunction phi at eigenvalue
// lambda maps V to V - 2 (ln phi)'' while deleting lambda from the
// spectrum, states map by psi -> psi' - (ln phi)' psi, and the state lost
// to annihilation is recovered from the reduction-of-order formula
// U = -(1/phi) integral phi^2.  embed_2d lifts one step back to a full 2D
// intertwined pair on the conformal chart.

#include <limits>
#include <optional>
#include <vector>

#include "isospec/expr.hpp"
#include "isospec/numerics.hpp"
#include "isospec/potentials.hpp"

namespace isospec {

struct DarbouxStep {
  std::vector<double> V_new;      // transformed potential on the grid nodes
  std::vector<double> log_deriv;  // w = phi'/phi, central differences
  double lambda = 0.0;            // seed eigenvalue (bookkeeping)
  bool seed_has_nodes = false;    // interior sign change: V_new has poles

  // psi -> psi' - w psi on the same grid (zero at the two edge nodes).
  std::vector<double> transform(std::span<const double> psi, double h) const;
};

// Grid form: V and phi sampled on grid nodes.  (ln phi)'' by central
// differences of ln|phi|; one-sided at the two edge nodes.  A node value
// |phi| <= 1e-15 max|phi| (zero at grid precision) throws solver_error;
// sign changes only warn via seed_has_nodes, matching the convention that
// transformations may be driven by non-normalizable solutions.
DarbouxStep darboux_step(const std::vector<double>& V, const std::vector<double>& phi,
                         double lambda, const Grid1D& grid);

// Exact form for analytic seeds: V_new = V - 2 [phi''/phi - (phi'/phi)^2],
// w = phi'/phi, both as expressions in `var`.
struct DarbouxStepExpr {
  Expr V_new;
  Expr w;
};
DarbouxStepExpr darboux_step(const Expr& V, const Expr& phi, const std::string& var);

// Second solution at the seed eigenvalue, U = -(1/phi) integral phi^2 with
// a cumulative trapezoid from the left edge (phi = 0 there under Dirichlet
// conditions; the free additive constant is fixed to zero).  Requires a
// nodeless phi.
std::vector<double> missing_state(const std::vector<double>& phi, const Grid1D& grid);

struct HierarchySeed {
  int index = 0;             // eigenstate of the current level
  std::optional<Expr> phi;   // explicit seed in "xi" overrides the index
};

struct HierarchyLevel {
  std::vector<double> V;  // node samples of this level's potential
  Spectrum spectrum;      // head of the spectrum at this level
  // eigenvalue removed by the step leading to the next level; NaN on the
  // last level.
  double deleted_eigenvalue = std::numeric_limits<double>::quiet_NaN();
  bool seed_had_nodes = false;
};

struct Hierarchy {
  std::vector<HierarchyLevel> levels;  // seeds.size() + 1 entries
};

// Repeated Darboux steps from V(xi); each seed is taken in the potential it
// steps from.  Explicit Expr seeds record their Rayleigh quotient as the
// deleted eigenvalue.  An empty seed list returns the input level alone.
Hierarchy build_hierarchy(const Expr& V_xi, const std::vector<HierarchySeed>& seeds,
                          const Grid1D& grid, int k_spectrum = 6);

// 2D pair on the conformal chart from one separated level:
//   V0 = e^{-2 c rho} [V(xi) + H(rho)]
//   V1 = e^{-2 c rho} [2 (phi'/phi)^2 + 2 E_n - V(xi) + H(rho)]
// with f(xi) = -phi'/phi.  phi must solve -phi'' + V phi = E_n phi; the
// sampled residual of that equation must stay below 1e-6 (relative to
// max |phi|) or the seed is rejected.  V_xi and phi are expressions in
// "xi", H_rho in "rho"; c is the chart constant.
PotentialPair embed_2d(const Expr& V_xi, const Expr& H_rho, double E_n, const Expr& phi,
                       double c);

}  // namespace isospec
