#pragma once

// Dense-exponent multivariate polynomials over double coefficients.  The
// generator-algebra checks need exact derivatives of test functions; with
// polynomials every commutator identity can be verified at the coefficient
// level instead of through finite differences.

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <vector>

namespace isospec {

class Polynomial {
 public:
  explicit Polynomial(int dim = 1);

  static Polynomial constant(int dim, double v);
  static Polynomial variable(int dim, int axis);  // x_axis, axis in [0, dim)

  // Uniform coefficients in [-1, 1] on all monomials of total degree <= deg.
  static Polynomial random(int dim, int max_degree, std::mt19937_64& rng);

  int dim() const { return dim_; }

  Polynomial operator+(const Polynomial&) const;
  Polynomial operator-(const Polynomial&) const;
  Polynomial operator*(const Polynomial&) const;
  Polynomial operator*(double) const;
  Polynomial& operator+=(const Polynomial&);

  Polynomial derivative(int axis) const;
  Polynomial laplacian() const;

  double eval(std::span<const double> x) const;
  double max_abs_coeff() const;
  bool is_zero() const { return terms_.empty(); }

  const std::map<std::vector<int>, double>& terms() const { return terms_; }

 private:
  void add_term(const std::vector<int>& expo, double coeff);
  int dim_;
  std::map<std::vector<int>, double> terms_;  // exponent vector -> coefficient
};

}  // namespace isospec
