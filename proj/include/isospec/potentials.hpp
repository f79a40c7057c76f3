#pragma once

// Builders for isospectral potential pairs (V0, V1) intertwined by
// L = L0 + L.grad:  L H0 = H1 L with H_i = -laplacian + V_i.  Every builder
// returns the same package: the two potentials, the scalar part L0, the
// difference P = V1 - V0, and the parameters of the derivative part, so the
// numerical verifiers can treat all families uniformly.
//
// The closed system behind the constructions:
//   2 d_j L0 = P L_j
//   lap L0   = (L.grad P)/2
//   L0 P     = L.grad(V0 + V1)/2

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isospec/coords.hpp"
#include "isospec/errors.hpp"
#include "isospec/euclid.hpp"
#include "isospec/expr.hpp"

namespace isospec {

struct PotentialPair {
  IntertwinerParams params;
  ScalarField V0, V1, L0, P;
  std::string family;
  std::string chart;          // which eta ratio / projection the family uses
  std::string singular_desc;  // human-readable description of guarded loci
  std::string f_source, h_source;
  // Box the pair is regular on for sampling-based checks (per-axis bounds).
  std::vector<double> box_lo, box_hi;
};

// Width of the guard band around singular loci: evaluation closer than this
// to a vanishing denominator raises singularity_error.
inline constexpr double singular_guard = 1e-6;

// 1D partner pair V0 = L0^2 - L0' + b, V1 = L0^2 + L0' + b from a scalar
// L0(x); the intertwiner is L0 + d/dx.
PotentialPair build_1d_pair(const Expr& L0, double b);

// Oscillator-shifted family: V0 = p0^2 r^2/4 + p0 b.r + g, V1 = V0 + p0 with
// L0 = p0 a.r/2 + a.b.  g must be constant along a (checked by sampling
// a.grad g); [H0, L] = -p0 L makes L a ladder operator.
PotentialPair build_constant_shift(const std::vector<double>& a, double p0,
                                   const std::vector<double>& b, const Expr& g);

// Pure translation case, zeta = a.r/2: V''{+,-} = f^2/a^2 +- f'/2 and
// V_i = g/2 + V_{-,+}; g constant along a.
PotentialPair build_translational(const std::vector<double>& a, const Expr& f, const Expr& g);

// Generic family for any admissible (a, c) with c_ij != 0 (0-based indices):
// eta = L_i/L_j, L0 = f(eta), P = (2 c_ij/L_j^2) f'(eta),
// V{+,-} = f^2 +- c_ij (L^2/L_j^2) f', V_k = h/2 + V'/L^2.
// h (optional) must satisfy L.grad h = 0, checked by sampling.
PotentialPair build_general_pair(const IntertwinerParams& p, int i, int j, const Expr& f,
                                 const ScalarField* h = nullptr,
                                 const std::string& h_desc = "");

// Planar specialization written out in kappa = |L| and eta = L1/L2:
// V' = f^2 +- c (1 + eta^2) f', V_k = h(kappa)/2 + V'/kappa^2.
PotentialPair build_2d_pair(double a1, double a2, double c, const Expr& f,
                            const std::optional<Expr>& h_of_kappa = std::nullopt);

// Closed-form solutions f(eta) of f^2 - c (1 + eta^2) f' = b:
//   b < 0:  sqrt(-b) tan[(sqrt(-b)/c)(atan eta - b1)]
//   b > 0:  sqrt(b) tanh[(sqrt(b)/c)(b1 - atan eta)]
//   b = 0:  c/(b1 - atan eta)
Expr solve_riccati_2d(double b, double b1, double c);

// Composition: V0 = 0 and V1 the planar free-motion partner for the chosen
// Riccati branch (h = 0 when b = 0, h = -2b/kappa^2 otherwise).
PotentialPair free_motion_partners_2d(double b, double b1, double c, double a1, double a2);

// Spatial family on the (beta, gamma, eta) chart: L0 = f(eta),
// V' = f^2 +- p(eta) f', V_k = h(beta, gamma)/2 + V'/L^2 with L^2 = a^2 - 2 gamma.
PotentialPair build_3d_pair(const IntertwinerParams& p, const Expr& f,
                            const std::optional<Expr>& h_of_beta_gamma = std::nullopt,
                            int eta_variant = 1);

// Partners of spatial free motion, V0 = 0:
//   kind 1: f = [b1 - atan(p'(eta)/2c)/c]^{-1},          V1 = 2 f^2/L^2
//   kind 2: f = p'(eta)/2,                               V1 = (2/L^2)(c^2 + p'^2/4)
//   kind 3: f = p'(eta)/2 + p(eta)/(b1 - eta),           V1 = (2/L^2)(c^2 + f^2)
PotentialPair free_motion_partners_3d(const IntertwinerParams& p, int kind, double b1 = 0.0,
                                      int eta_variant = 1);

struct PairIdentityReport {
  double grad_residual = 0.0;      // max |2 d_j L0 - P L_j|
  double laplace_residual = 0.0;   // max |lap L0 - (L.grad P)/2|
  double product_residual = 0.0;   // max |L0 P - L.grad(V0 + V1)/2|
  int points_used = 0;
};

// Evaluates the closed-system identities at deterministic pseudo-random
// points inside the pair's sampling box, skipping guarded loci.
PairIdentityReport check_pair_identities(const PotentialPair& pair, int npoints = 20,
                                         std::uint64_t seed = 2024);

// K_jk P + 2 c_jk P with K_jk = L_j d_k - L_k d_j, maximized over j < k;
// vanishes when P satisfies the integrability conditions.
double rotation_covariance_residual(const PotentialPair& pair, std::span<const double> x);

}  // namespace isospec
