#pragma once

// Grids, finite differences, a symmetric-tridiagonal eigensolver, and the
// residual verifiers: intertwining L H0 = H1 L, the hidden symmetry
// operators L'L and L L', the ladder relations of the shifted oscillator
// family, partner spectra of the 1D pair f^2 +- f', and the separated 2D
// problem on the conformal (rho, xi) chart.
//
// All derivatives are central differences on uniform tensor grids, so every
// residual that vanishes in the continuum is expected to decay at O(h^2).

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "isospec/errors.hpp"
#include "isospec/expr.hpp"
#include "isospec/potentials.hpp"

namespace isospec {

struct Grid1D {
  double lo = 0.0, hi = 1.0;
  int n = 3;  // interior nodes

  Grid1D(double lo, double hi, int n);  // requires hi > lo, n >= 3
  double h() const { return (hi - lo) / (n + 1); }
  double point(int i) const { return lo + (i + 1) * h(); }  // i in [0, n)
  std::vector<double> points() const;
};

struct Spectrum {
  std::vector<double> eigenvalues;                  // strictly ascending
  std::vector<std::vector<double>> eigenfunctions;  // interior node values
  std::vector<double> residuals;                    // ||H psi - E psi||_inf per pair
  double matrix_width = 0.0;                        // Gershgorin spectral width
};

// Lowest k Dirichlet eigenpairs of -d^2/dx^2 + V on the grid: diagonal
// 2/h^2 + V_i, off-diagonal -1/h^2.  Eigenvalues by bisection on Sturm
// counts, eigenvectors by inverse iteration, normalized to h sum psi^2 = 1
// with the first extremal component positive.  Deterministic.
Spectrum solve_1d_eigen(const ScalarField& V, const Grid1D& grid, int k);
Spectrum solve_1d_eigen(const std::function<double(double)>& V, const Grid1D& grid, int k);

// Field backed by per-node values of `grid`; evaluation at any other point
// throws.  Lets grid-sampled potentials re-enter the eigensolver.
ScalarField grid_field(const Grid1D& grid, std::vector<double> values);

// Symmetric tridiagonal building blocks (exposed for reuse and testing).
// off has size diag.size() - 1.
int sturm_count_below(const std::vector<double>& diag, const std::vector<double>& off, double x);
std::vector<double> tridiag_lowest_eigenvalues(const std::vector<double>& diag,
                                               const std::vector<double>& off, int k);
std::vector<double> tridiag_eigenvector(const std::vector<double>& diag,
                                        const std::vector<double>& off, double lambda,
                                        std::uint64_t seed = 7);

using TestField = std::function<double(std::span<const double>)>;

// ||(L H0 - H1 L) psi||_inf over nodes at least 2 layers inside the box
// [lo, hi]^n sampled with `nodes` points per axis.  psi must be smooth and
// the pair regular on the whole box (singular node -> invalid_params).
double intertwining_residual(const PotentialPair& pair, const TestField& psi,
                             const std::vector<double>& lo, const std::vector<double>& hi,
                             int nodes);

// Norms of [H0, L'L] psi and [L L', H1] psi with L' = L0 - L.grad (the
// formal adjoint; div L = 0 because c is antisymmetric).
std::pair<double, double> symmetry_residual(const PotentialPair& pair, const TestField& psi,
                                            const std::vector<double>& lo,
                                            const std::vector<double>& hi, int nodes);

struct LadderReport {
  double lower_residual = 0.0;    // ||[H0, L] psi + p0 L psi||
  double raise_residual = 0.0;    // ||[H0, L'] psi - p0 L' psi||
  double pair_residual = 0.0;     // ||([L, L'] - p0 a^2) psi|| on the grid
  double algebra_residual = 0.0;  // exact polynomial check of [L, L'] = p0 a^2
  double h = 0.0;
};

// Ladder relations of the shifted-oscillator family built from (a, p0, b, g).
LadderReport ladder_check(const std::vector<double>& a, double p0, const std::vector<double>& b,
                          const Expr& g, const TestField& psi, const std::vector<double>& lo,
                          const std::vector<double>& hi, int nodes);

struct PartnerReport {
  Spectrum minus, plus;                    // H-+ = -d^2 + f^2 -+ f'
  std::vector<double> pairing_dev;         // |E_k(H+) - E_{k+1}(H-)|
  std::vector<double> transform_residual;  // relative ||(H+ - E) L psi|| per H- pair
  std::vector<bool> annihilated;           // ||L psi|| ~ 0
  double h = 0.0;
};

// Spectra of the 1D partner Hamiltonians for f(xi), the unbroken-case
// pairing E_k(H+) = E_{k+1}(H-), and the residuals of the transformed
// eigenfunctions L psi = f psi + psi'.
PartnerReport partner_spectrum_check(const Expr& f, const Grid1D& grid, int k);

struct SeparatedReport {
  Spectrum xi_spectrum;        // of -d^2/dxi^2 + V(xi)
  double seed_energy = 0.0;    // eigenvalue at the seed index
  double M = 0.0;              // separation constant, E(n_plus) - E(n_seed)
  double minus_target = 0.0;   // E(n_seed) - M
  int minus_index = -1;        // xi-spectrum index matching minus_target, or -1
  bool seed_has_nodes = false;
  double E0 = 0.0;             // full 2D eigenvalue found by the scan
  double rho_residual = 0.0;   // |mu(E0) - (-E(n_plus))| at the accepted E0
  std::vector<double> R;       // rho eigenfunction at E0
  std::vector<double> U1;      // transformed xi function (f + d/dxi) phi_{n_plus}
  double transform_residual = 0.0;  // residual of W' = -M phi_n phi_plus, W = phi_n U1
                                    // (the Wronskian form of U1's equation, regular at
                                    // seed nodes where U1 itself has poles)
  bool annihilated = false;         // n_plus == n_seed
  std::vector<std::pair<double, double>> scan_trace;  // (E0, mu) evaluations
};

// Separated solve of H0 = e^{-2 c rho}[(-d_rho^2 + H(rho)) + (-d_xi^2 + V(xi))]:
// the xi equation picks the n_plus-th eigenpair, and the rho equation
//   [-d_rho^2 + H(rho) - e^{2 c rho} E0] R = -E(n_plus) R
// is solved for E0 by bisection: its k_rho-th eigenvalue mu(E0) is strictly
// decreasing in E0, so the scan is monotone.  The transformed function
// U1 = (f + d/dxi) phi_{n_plus} with f = -phi'_{n_seed}/phi_{n_seed} is
// checked in the partner xi equation with eigenvalue -(E(n_seed) - M).
SeparatedReport separated_2d_solve(const Expr& V_xi, const Expr& H_rho, double c,
                                   const Grid1D& xi_grid, const Grid1D& rho_grid, int n_seed,
                                   int n_plus, int k_rho = 0);

// log2(r[i]/r[i+1]) for consecutive residuals under h-halving.
std::vector<double> convergence_orders(std::span<const double> residuals);

struct ResidualSweep {
  std::vector<double> h;
  std::vector<double> residual;
  std::vector<double> orders;
};

// Residual at nodes, 2*nodes-1, 4*nodes-3, ... points per axis (halving h).
ResidualSweep intertwining_convergence(const PotentialPair& pair, const TestField& psi,
                                       const std::vector<double>& lo,
                                       const std::vector<double>& hi, int base_nodes,
                                       int halvings);

// Laplacian of a smooth field by the tensor-grid stencil at the box center,
// for convergence tests of the stencil itself.
double lattice_laplacian_at_center(const TestField& f, const std::vector<double>& lo,
                                   const std::vector<double>& hi, int nodes);

}  // namespace isospec
