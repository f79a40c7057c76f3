#pragma once

// Curvilinear charts adapted to the intertwining vector field L.
//
// 2D: kappa = |L|, eta = L1/L2, and the conformal pair rho = ln(kappa)/c,
// xi = atan(eta)/c, in which the Laplacian becomes
// e^{-2 c rho} (d_rho^2 + d_xi^2).
//
// 3D (a.c = 0): beta = r.c, gamma = r.(a x c) + [(r.c)^2 - c^2 r^2]/2 and
// one of the ratios eta = L1/L2, L1/L3, L2/L3.  The coordinates are
// orthogonal; L.grad beta = L.grad gamma = 0 and L.grad eta = p(eta) with p
// quadratic, so the eta direction is the flow of L.

#include <array>
#include <span>
#include <string>

#include "isospec/errors.hpp"
#include "isospec/euclid.hpp"
#include "isospec/expr.hpp"

namespace isospec {

struct Chart2D {
  double a1 = 0.0, a2 = 0.0, c = 1.0;

  Chart2D(double a1, double a2, double c);  // requires c != 0

  struct Coords {
    double kappa, eta, rho, xi;
  };

  // Requires kappa > guard and |L2| > guard; throws singularity_error at the
  // center point or on the L2 = 0 branch cut.
  Coords forward(double x, double y) const;

  // Principal branch |c xi| < pi/2.  inverse(forward(x, y)) = (x, y)
  // wherever L2 > 0.
  std::array<double, 2> inverse(double rho, double xi) const;

  std::array<double, 2> vector_field(double x, double y) const;  // (L1, L2)

  // Laplacian of a chart-coordinate field F at a chart point, by central
  // differences of the conformal form (rho, xi) or the (kappa, eta) form.
  double laplacian_rho_xi(const ScalarField& F, double rho, double xi, double step = 1e-4) const;
  double laplacian_kappa_eta(const ScalarField& F, double kappa, double eta, double step = 1e-4) const;

  static constexpr double guard = 1e-6;
};

struct Chart3D {
  IntertwinerParams params;  // n = 3 with a.c = 0
  int eta_variant = 1;       // 1: L1/L2, 2: L1/L3, 3: L2/L3

  Chart3D(const IntertwinerParams& p, int eta_variant = 1);

  std::array<double, 3> forward(std::span<const double> x) const;  // (beta, gamma, eta)

  // det d(beta, gamma, eta)/d(x, y, z) = c^2 p(eta).
  double jacobian(std::span<const double> x) const;

  // Diagonal metric (g_bb, g_gg, g_ee) = (1/c^2, 1/(c^2 L^2), Lden^4/(cvar^2 L^2)).
  std::array<double, 3> metric(std::span<const double> x) const;

  // Laplacian of a chart field F(beta, gamma, eta) evaluated at the chart
  // image of the Cartesian point x:
  //   c^2 [F_bb + d_g (L^2 F_g)] + (p/L^2) d_e (p F_e).
  double laplacian(const ScalarField& F, std::span<const double> x, double step = 1e-4) const;

  // Exact gradients of the chart functions.
  std::array<double, 3> grad_beta() const;
  std::array<double, 3> grad_gamma(std::span<const double> x) const;  // = L x c
  std::array<double, 3> grad_eta(std::span<const double> x) const;    // = (cvar/Lden^2) L

  double eta(std::span<const double> x) const;
  double eta_numerator(std::span<const double> x) const;
  double eta_denominator(std::span<const double> x) const;
  double L_squared(std::span<const double> x) const;

  // p(eta) = cvar L^2 / Lden^2 as a quadratic with constant coefficients.
  double p_of(double eta) const;
  double p_prime_of(double eta) const;
  Expr p_expr(const std::string& var) const;

  double c_norm2() const;  // c1^2 + c2^2 + c3^2
  double cvar() const;     // c-matrix entry pairing numerator and denominator

  std::string eta_desc() const;

  static constexpr double guard = 1e-6;
  static double constraint_guard();  // tolerance on a.c = 0

 private:
  int num_ = 0, den_ = 1;          // L indices of the eta ratio (0-based)
  double A_ = 0, B_ = 0, C_ = 0;   // p(eta) = A eta^2 + B eta + C
};

// Max-norm difference between the finite-difference gradient of eta and the
// closed form (c_ij/L_j^2) L.
double eta_gradient_parallel_2d(const Chart2D& chart, double x, double y, double step = 1e-5);
double eta_gradient_parallel_3d(const Chart3D& chart, std::span<const double> x, double step = 1e-5);

// Normalized cross-product magnitude between grad(alpha_i) and L, where
// alpha_i = L_i/(r.a); zero means parallel.
double alpha_gradient_parallel(const IntertwinerParams& p, int i, std::span<const double> x,
                               double step = 1e-5);

}  // namespace isospec
