#pragma once

// Parameters of the first-order intertwiner L = L0 + sum_j L_j(x) d_j with
// L_j = a_j + sum_k c_jk x_k, c antisymmetric.  The derivative part
// decomposes over the Euclidean algebra e(n): translations T_j = d_j and
// rotations L_jk = x_k d_j - x_j d_k, so L_d = sum a_j T_j + sum_{j<k} c_jk L_jk.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "isospec/errors.hpp"
#include "isospec/polynomial.hpp"

namespace isospec {

struct IntertwinerParams {
  int n = 0;
  std::vector<double> a;                // n entries
  std::vector<std::vector<double>> c;   // n x n, exactly antisymmetric

  IntertwinerParams() = default;
  // Validates sizes and exact antisymmetry (c_jk == -c_kj bit for bit).
  IntertwinerParams(int n, std::vector<double> a, std::vector<std::vector<double>> c);

  // n = 3 convenience: c given as the dual vector (c1, c2, c3) = (c23, c31, c12).
  static IntertwinerParams from_dual_3d(const std::array<double, 3>& a,
                                        const std::array<double, 3>& cvec);
  // n = 2 convenience: single rotation coefficient c = c12.
  static IntertwinerParams planar(double a1, double a2, double c12);

  std::array<double, 3> dual_c() const;  // n == 3 only
  bool c_is_zero() const;
};

// A scalar function on R^n (or on a chart).  `value` must be callable;
// `singular` and `gradient` may be empty.  operator() applies the guard:
// evaluation at a flagged point raises singularity_error instead of
// returning a huge float.
struct ScalarField {
  std::function<double(std::span<const double>)> value;
  std::function<bool(std::span<const double>)> singular;
  std::function<std::vector<double>(std::span<const double>)> gradient;

  double operator()(std::span<const double> x) const;
  bool is_singular(std::span<const double> x) const;
  // Exact gradient when the hook exists, Richardson finite difference otherwise.
  std::vector<double> grad(std::span<const double> x, double step = 1e-5) const;
};

ScalarField constant_field(double v);

// L evaluated at a point: L_j = a_j + sum_k c_jk x_k.
std::vector<double> vector_field(const IntertwinerParams& p, std::span<const double> x);

// The components L_j as exact polynomials in x.
std::vector<Polynomial> vector_field_polynomials(const IntertwinerParams& p);

// Directional derivative (L . grad phi)(x).
double apply_ld(const IntertwinerParams& p, const ScalarField& phi,
                std::span<const double> x, double step = 1e-5);

// Exact application of L_d to a polynomial.
Polynomial apply_ld(const IntertwinerParams& p, const Polynomial& phi);

struct CommutatorEntry {
  std::string lhs, rhs;  // generator labels
  double residual;       // coefficient-level norm of [lhs,rhs] - algebra RHS
};

struct CommutatorReport {
  int n = 0;
  double max_residual = 0.0;
  std::vector<CommutatorEntry> entries;
};

// Verifies the e(n) commutation relations
//   [T_j, T_k] = 0
//   [T_j, L_km] = delta_jm T_k - delta_jk T_m
//   [L_jk, L_lm] = delta_jm L_lk - delta_jl L_mk + delta_kl L_mj - delta_km L_lj
// by applying both sides to random cubic polynomials.
CommutatorReport commutator_table(int n, std::uint64_t seed = 12345);

// Coefficient norm of [laplacian, L_d] phi with L_d built from params.
// Vanishes identically because div L = 0 and the rotation part is
// antisymmetric; kept as a measured quantity so corrupted coefficients
// are detectable.
double laplacian_commutator_residual(const IntertwinerParams& p, const Polynomial& phi);

// Same, with explicit first-order coefficients (negative controls).
double laplacian_commutator_residual(const std::vector<Polynomial>& L, const Polynomial& phi);

}  // namespace isospec
