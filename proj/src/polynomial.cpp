#include "isospec/polynomial.hpp"

#include <cmath>
#include <stdexcept>

namespace isospec {

Polynomial::Polynomial(int dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("polynomial dimension must be >= 1");
}

Polynomial Polynomial::constant(int dim, double v) {
  Polynomial p(dim);
  p.add_term(std::vector<int>(static_cast<std::size_t>(dim), 0), v);
  return p;
}

Polynomial Polynomial::variable(int dim, int axis) {
  if (axis < 0 || axis >= dim) throw std::invalid_argument("variable axis out of range");
  Polynomial p(dim);
  std::vector<int> e(static_cast<std::size_t>(dim), 0);
  e[static_cast<std::size_t>(axis)] = 1;
  p.add_term(e, 1.0);
  return p;
}

namespace {

void enumerate_monomials(int dim, int degree_left, std::vector<int>& expo,
                         std::vector<std::vector<int>>& out) {
  if (static_cast<int>(expo.size()) == dim) {
    out.push_back(expo);
    return;
  }
  for (int d = 0; d <= degree_left; ++d) {
    expo.push_back(d);
    enumerate_monomials(dim, degree_left - d, expo, out);
    expo.pop_back();
  }
}

}  // namespace

Polynomial Polynomial::random(int dim, int max_degree, std::mt19937_64& rng) {
  std::vector<std::vector<int>> monomials;
  std::vector<int> scratch;
  enumerate_monomials(dim, max_degree, scratch, monomials);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Polynomial p(dim);
  for (const auto& e : monomials) p.add_term(e, u(rng));
  return p;
}

void Polynomial::add_term(const std::vector<int>& expo, double coeff) {
  if (coeff == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(expo, coeff);
  if (!inserted) {
    it->second += coeff;
    if (it->second == 0.0) terms_.erase(it);
  }
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  if (dim_ != o.dim_) throw std::invalid_argument("polynomial dimension mismatch");
  Polynomial out = *this;
  for (const auto& [e, c] : o.terms_) out.add_term(e, c);
  return out;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  if (dim_ != o.dim_) throw std::invalid_argument("polynomial dimension mismatch");
  for (const auto& [e, c] : o.terms_) add_term(e, c);
  return *this;
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
  if (dim_ != o.dim_) throw std::invalid_argument("polynomial dimension mismatch");
  Polynomial out = *this;
  for (const auto& [e, c] : o.terms_) out.add_term(e, -c);
  return out;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
  if (dim_ != o.dim_) throw std::invalid_argument("polynomial dimension mismatch");
  Polynomial out(dim_);
  std::vector<int> e(static_cast<std::size_t>(dim_));
  for (const auto& [ea, ca] : terms_) {
    for (const auto& [eb, cb] : o.terms_) {
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
      out.add_term(e, ca * cb);
    }
  }
  return out;
}

Polynomial Polynomial::operator*(double s) const {
  Polynomial out(dim_);
  for (const auto& [e, c] : terms_) out.add_term(e, c * s);
  return out;
}

Polynomial Polynomial::derivative(int axis) const {
  if (axis < 0 || axis >= dim_) throw std::invalid_argument("derivative axis out of range");
  Polynomial out(dim_);
  std::vector<int> e(static_cast<std::size_t>(dim_));
  auto ax = static_cast<std::size_t>(axis);
  for (const auto& [expo, c] : terms_) {
    if (expo[ax] == 0) continue;
    e = expo;
    e[ax] -= 1;
    out.add_term(e, c * expo[ax]);
  }
  return out;
}

Polynomial Polynomial::laplacian() const {
  Polynomial out(dim_);
  for (int ax = 0; ax < dim_; ++ax) out += derivative(ax).derivative(ax);
  return out;
}

double Polynomial::eval(std::span<const double> x) const {
  if (x.size() < static_cast<std::size_t>(dim_))
    throw std::invalid_argument("too few coordinates for polynomial evaluation");
  double total = 0.0;
  for (const auto& [expo, c] : terms_) {
    double m = c;
    for (std::size_t i = 0; i < expo.size(); ++i) {
      for (int k = 0; k < expo[i]; ++k) m *= x[i];
    }
    total += m;
  }
  return total;
}

double Polynomial::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& [e, c] : terms_) m = std::max(m, std::fabs(c));
  return m;
}

}  // namespace isospec
