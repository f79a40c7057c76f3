#include "isospec/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace isospec {

namespace {

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double w : v) m = std::max(m, std::fabs(w));
  return m;
}

int sign_changes(const std::vector<double>& phi, double floor) {
  int changes = 0;
  double prev = 0.0;
  for (double w : phi) {
    if (std::fabs(w) <= floor) continue;
    if (prev != 0.0 && w * prev < 0.0) ++changes;
    prev = w;
  }
  return changes;
}

void require_var(const Expr& e, const std::string& var, const std::string& what) {
  for (const auto& v : e.variables())
    if (v != var) throw invalid_params(what + " must be a function of " + var + " only");
}

}  // namespace

std::vector<double> DarbouxStep::transform(std::span<const double> psi, double h) const {
  const std::size_t n = log_deriv.size();
  if (psi.size() != n) throw invalid_params("state size does not match the step's grid");
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i)
    out[i] = (psi[i + 1] - psi[i - 1]) / (2.0 * h) - log_deriv[i] * psi[i];
  return out;
}

DarbouxStep darboux_step(const std::vector<double>& V, const std::vector<double>& phi,
                         double lambda, const Grid1D& grid) {
  const auto n = static_cast<std::size_t>(grid.n);
  if (V.size() != n || phi.size() != n)
    throw invalid_params("potential and seed must be sampled on the grid nodes");
  const double h = grid.h();
  double phimax = max_abs(phi);
  if (phimax == 0.0) throw solver_error("seed is identically zero");
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) {
    // ln stays smooth however small phi gets; only a value indistinguishable
    // from zero (an actual node on the grid) breaks the log derivative.
    if (std::fabs(phi[i]) <= 1e-15 * phimax)
      throw solver_error("seed vanishes at a grid node; log derivative undefined");
    u[i] = std::log(std::fabs(phi[i]));
  }

  DarbouxStep step;
  step.lambda = lambda;
  step.seed_has_nodes = sign_changes(phi, 1e-8 * phimax) > 0;
  step.log_deriv.resize(n);
  step.V_new.resize(n);
  for (std::size_t i = 1; i + 1 < n; ++i)
    step.log_deriv[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
  step.log_deriv[0] = (u[1] - u[0]) / h;
  step.log_deriv[n - 1] = (u[n - 1] - u[n - 2]) / h;
  for (std::size_t i = 1; i + 1 < n; ++i)
    step.V_new[i] = V[i] - 2.0 * (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
  // One-sided second differences at the edges keep the array total.
  step.V_new[0] = V[0] - 2.0 * (u[0] - 2.0 * u[1] + u[2]) / (h * h);
  step.V_new[n - 1] = V[n - 1] - 2.0 * (u[n - 1] - 2.0 * u[n - 2] + u[n - 3]) / (h * h);
  return step;
}

DarbouxStepExpr darboux_step(const Expr& V, const Expr& phi, const std::string& var) {
  Expr p = phi.derivative(var);
  Expr pp = p.derivative(var);
  DarbouxStepExpr step;
  step.w = p / phi;
  step.V_new = V - Expr::constant(2.0) * (pp / phi - step.w * step.w);
  return step;
}

std::vector<double> missing_state(const std::vector<double>& phi, const Grid1D& grid) {
  const auto n = static_cast<std::size_t>(grid.n);
  if (phi.size() != n) throw invalid_params("seed must be sampled on the grid nodes");
  const double h = grid.h();
  double phimax = max_abs(phi);
  if (phimax == 0.0) throw solver_error("seed is identically zero");
  if (sign_changes(phi, 1e-8 * phimax) > 0)
    throw invalid_params("missing-state seed must be nodeless");
  std::vector<double> U(n);
  // Trapezoid of phi^2 from the left edge, where phi = 0 under Dirichlet
  // conditions; the additive constant only shifts U by a multiple of the
  // homogeneous solution 1/phi.
  double S = 0.5 * h * phi[0] * phi[0];
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) S += 0.5 * h * (phi[i - 1] * phi[i - 1] + phi[i] * phi[i]);
    if (std::fabs(phi[i]) <= 1e-13 * phimax)
      throw solver_error("seed vanishes at a grid node");
    U[i] = -S / phi[i];
  }
  return U;
}

Hierarchy build_hierarchy(const Expr& V_xi, const std::vector<HierarchySeed>& seeds,
                          const Grid1D& grid, int k_spectrum) {
  require_var(V_xi, "xi", "the level-0 potential");
  if (k_spectrum < 1) throw invalid_params("need k_spectrum >= 1");
  std::vector<std::string> xv{"xi"};
  auto V = V_xi.compile(xv);
  const auto n = static_cast<std::size_t>(grid.n);
  const double h = grid.h();
  std::vector<double> Vcur(n);
  for (int i = 0; i < grid.n; ++i) {
    double x = grid.point(i);
    Vcur[static_cast<std::size_t>(i)] = V(std::span<const double>(&x, 1));
  }

  // T phi with the same stencil the eigensolver uses; Dirichlet edges.
  auto apply_T = [&](const std::vector<double>& Vs, const std::vector<double>& q,
                     std::size_t i) {
    double lapq = -2.0 * q[i];
    if (i > 0) lapq += q[i - 1];
    if (i + 1 < n) lapq += q[i + 1];
    return -lapq / (h * h) + Vs[i] * q[i];
  };

  Hierarchy chain;
  for (const auto& seed : seeds) {
    HierarchyLevel level;
    level.V = Vcur;
    level.spectrum = solve_1d_eigen(grid_field(grid, Vcur), grid, k_spectrum);

    std::vector<double> phi;
    double lambda;
    if (seed.phi) {
      require_var(*seed.phi, "xi", "an explicit seed");
      auto pc = seed.phi->compile(xv);
      phi.resize(n);
      for (int i = 0; i < grid.n; ++i) {
        double x = grid.point(i);
        phi[static_cast<std::size_t>(i)] = pc(std::span<const double>(&x, 1));
      }
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        num += phi[i] * apply_T(Vcur, phi, i);
        den += phi[i] * phi[i];
      }
      if (den == 0.0) throw solver_error("explicit seed is identically zero");
      lambda = num / den;  // Rayleigh quotient stands in for the eigenvalue
    } else {
      if (seed.index < 0 || seed.index >= k_spectrum)
        throw invalid_params("seed index outside the computed spectrum head");
      phi = level.spectrum.eigenfunctions[static_cast<std::size_t>(seed.index)];
      lambda = level.spectrum.eigenvalues[static_cast<std::size_t>(seed.index)];
    }

    DarbouxStep step = darboux_step(Vcur, phi, lambda, grid);
    level.deleted_eigenvalue = lambda;
    level.seed_had_nodes = step.seed_has_nodes;
    chain.levels.push_back(std::move(level));
    Vcur = step.V_new;
  }

  HierarchyLevel last;
  last.V = Vcur;
  last.spectrum = solve_1d_eigen(grid_field(grid, Vcur), grid, k_spectrum);
  chain.levels.push_back(std::move(last));
  return chain;
}

PotentialPair embed_2d(const Expr& V_xi, const Expr& H_rho, double E_n, const Expr& phi,
                       double c) {
  if (c == 0.0) throw invalid_params("the conformal chart requires c != 0");
  require_var(V_xi, "xi", "the xi potential");
  require_var(H_rho, "rho", "the rho potential");
  require_var(phi, "xi", "the seed");

  // The seed must actually solve -phi'' + V phi = E_n phi.
  std::vector<std::string> xv{"xi"};
  auto pc = phi.compile(xv);
  auto ppc = phi.derivative("xi").derivative("xi").compile(xv);
  auto Vc = V_xi.compile(xv);
  double worst = 0.0, scale = 0.0;
  for (int i = 0; i < 50; ++i) {
    double xi = -2.5 + 5.0 * i / 49.0;
    std::span<const double> xs(&xi, 1);
    double pv = pc(xs);
    scale = std::max(scale, std::fabs(pv));
    worst = std::max(worst, std::fabs(-ppc(xs) + (Vc(xs) - E_n) * pv));
  }
  if (scale == 0.0 || worst / scale > 1e-6)
    throw invalid_params("seed does not solve its xi equation at the given eigenvalue");

  Expr f_xi = -(phi.derivative("xi") / phi);
  Expr xi_of_eta = atan(Expr::variable("eta")) / Expr::constant(c);
  Expr f_eta = f_xi.substitute("xi", xi_of_eta);

  Expr kappa = Expr::variable("kappa");
  Expr rho_of_kappa = ln(kappa) / Expr::constant(c);
  Expr h_kappa = Expr::constant(2.0) * (H_rho.substitute("rho", rho_of_kappa) + Expr::constant(E_n)) /
                 (kappa * kappa);

  PotentialPair pair = build_2d_pair(0.0, 0.0, c, f_eta, h_kappa);
  pair.family = "embedded";
  return pair;
}

}  // namespace isospec
