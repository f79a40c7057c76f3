#include "isospec/euclid.hpp"

#include <cmath>

#include "isospec/fd.hpp"

namespace isospec {

IntertwinerParams::IntertwinerParams(int n_, std::vector<double> a_,
                                     std::vector<std::vector<double>> c_)
    : n(n_), a(std::move(a_)), c(std::move(c_)) {
  if (n < 1) throw invalid_params("dimension must be >= 1");
  if (a.size() != static_cast<std::size_t>(n))
    throw invalid_params("translation vector a must have n entries");
  if (c.size() != static_cast<std::size_t>(n))
    throw invalid_params("rotation matrix c must be n x n");
  for (const auto& row : c)
    if (row.size() != static_cast<std::size_t>(n))
      throw invalid_params("rotation matrix c must be n x n");
  for (int j = 0; j < n; ++j) {
    auto ju = static_cast<std::size_t>(j);
    if (c[ju][ju] != 0.0) throw invalid_params("rotation matrix must have zero diagonal");
    for (int k = j + 1; k < n; ++k) {
      auto ku = static_cast<std::size_t>(k);
      if (c[ju][ku] != -c[ku][ju])
        throw invalid_params("rotation matrix must be exactly antisymmetric");
    }
  }
  for (double v : a)
    if (!std::isfinite(v)) throw invalid_params("non-finite entry in a");
  for (const auto& row : c)
    for (double v : row)
      if (!std::isfinite(v)) throw invalid_params("non-finite entry in c");
}

IntertwinerParams IntertwinerParams::from_dual_3d(const std::array<double, 3>& a,
                                                  const std::array<double, 3>& cvec) {
  // c_jk x_k reproduces (r x c)_j: c12 = c3, c13 = -c2, c23 = c1.
  std::vector<std::vector<double>> c(3, std::vector<double>(3, 0.0));
  c[0][1] = cvec[2];
  c[1][0] = -cvec[2];
  c[0][2] = -cvec[1];
  c[2][0] = cvec[1];
  c[1][2] = cvec[0];
  c[2][1] = -cvec[0];
  return IntertwinerParams(3, {a[0], a[1], a[2]}, std::move(c));
}

IntertwinerParams IntertwinerParams::planar(double a1, double a2, double c12) {
  std::vector<std::vector<double>> c(2, std::vector<double>(2, 0.0));
  c[0][1] = c12;
  c[1][0] = -c12;
  return IntertwinerParams(2, {a1, a2}, std::move(c));
}

std::array<double, 3> IntertwinerParams::dual_c() const {
  if (n != 3) throw invalid_params("dual_c is defined for n = 3 only");
  return {c[1][2], c[2][0], c[0][1]};
}

bool IntertwinerParams::c_is_zero() const {
  for (const auto& row : c)
    for (double v : row)
      if (v != 0.0) return false;
  return true;
}

double ScalarField::operator()(std::span<const double> x) const {
  if (singular && singular(x)) throw singularity_error("field evaluated inside singular guard band");
  return value(x);
}

bool ScalarField::is_singular(std::span<const double> x) const {
  return singular ? singular(x) : false;
}

std::vector<double> ScalarField::grad(std::span<const double> x, double step) const {
  if (singular && singular(x)) throw singularity_error("gradient requested inside singular guard band");
  if (gradient) return gradient(x);
  return fd::gradient([this](std::span<const double> p) { return (*this)(p); }, x, step);
}

ScalarField constant_field(double v) {
  ScalarField f;
  f.value = [v](std::span<const double>) { return v; };
  f.gradient = [v](std::span<const double> x) {
    (void)v;
    return std::vector<double>(x.size(), 0.0);
  };
  return f;
}

std::vector<double> vector_field(const IntertwinerParams& p, std::span<const double> x) {
  if (x.size() < static_cast<std::size_t>(p.n))
    throw invalid_params("point has fewer coordinates than the parameter dimension");
  std::vector<double> L(static_cast<std::size_t>(p.n));
  for (int j = 0; j < p.n; ++j) {
    auto ju = static_cast<std::size_t>(j);
    double v = p.a[ju];
    for (int k = 0; k < p.n; ++k) v += p.c[ju][static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(k)];
    L[ju] = v;
  }
  return L;
}

std::vector<Polynomial> vector_field_polynomials(const IntertwinerParams& p) {
  std::vector<Polynomial> L;
  L.reserve(static_cast<std::size_t>(p.n));
  for (int j = 0; j < p.n; ++j) {
    auto ju = static_cast<std::size_t>(j);
    Polynomial comp = Polynomial::constant(p.n, p.a[ju]);
    for (int k = 0; k < p.n; ++k) {
      double cjk = p.c[ju][static_cast<std::size_t>(k)];
      if (cjk != 0.0) comp += Polynomial::variable(p.n, k) * cjk;
    }
    L.push_back(comp);
  }
  return L;
}

double apply_ld(const IntertwinerParams& p, const ScalarField& phi,
                std::span<const double> x, double step) {
  std::vector<double> L = vector_field(p, x);
  std::vector<double> g = phi.grad(x, step);
  double total = 0.0;
  for (std::size_t j = 0; j < L.size(); ++j) total += L[j] * g[j];
  return total;
}

Polynomial apply_ld(const IntertwinerParams& p, const Polynomial& phi) {
  std::vector<Polynomial> L = vector_field_polynomials(p);
  Polynomial out(p.n);
  for (int j = 0; j < p.n; ++j) out += L[static_cast<std::size_t>(j)] * phi.derivative(j);
  return out;
}

namespace {

// Generators of e(n) acting on polynomials.  Rotations accept any index
// pair; L_ab = -L_ba holds structurally.
struct Generator {
  bool translation;
  int j = 0, k = 0;  // T_j, or L_jk
  std::string label;
};

Polynomial apply_generator(const Generator& g, const Polynomial& p) {
  if (g.translation) return p.derivative(g.j);
  int dim = p.dim();
  // L_jk = x_k d_j - x_j d_k
  return Polynomial::variable(dim, g.k) * p.derivative(g.j) -
         Polynomial::variable(dim, g.j) * p.derivative(g.k);
}

Polynomial apply_rotation(int dim, int j, int k, const Polynomial& p) {
  return Polynomial::variable(dim, k) * p.derivative(j) -
         Polynomial::variable(dim, j) * p.derivative(k);
}

// Right-hand side of the algebra relation for [A, B] applied to p.
Polynomial algebra_rhs(int dim, const Generator& A, const Generator& B, const Polynomial& p) {
  Polynomial out(dim);
  if (A.translation && B.translation) return out;  // [T_j, T_k] = 0
  if (A.translation && !B.translation) {
    // [T_j, L_km] = delta_jm T_k - delta_jk T_m
    int j = A.j, k = B.j, m = B.k;
    if (j == m) out += p.derivative(k);
    if (j == k) out += p.derivative(m) * -1.0;
    return out;
  }
  if (!A.translation && B.translation) {
    // [L_km, T_j] = -[T_j, L_km]
    int j = B.j, k = A.j, m = A.k;
    if (j == m) out += p.derivative(k) * -1.0;
    if (j == k) out += p.derivative(m);
    return out;
  }
  // [L_jk, L_lm] = delta_jm L_lk - delta_jl L_mk + delta_kl L_mj - delta_km L_lj
  int j = A.j, k = A.k, l = B.j, m = B.k;
  if (j == m) out += apply_rotation(dim, l, k, p);
  if (j == l) out += apply_rotation(dim, m, k, p) * -1.0;
  if (k == l) out += apply_rotation(dim, m, j, p);
  if (k == m) out += apply_rotation(dim, l, j, p) * -1.0;
  return out;
}

}  // namespace

CommutatorReport commutator_table(int n, std::uint64_t seed) {
  if (n < 1) throw invalid_params("dimension must be >= 1");
  std::vector<Generator> gens;
  for (int j = 0; j < n; ++j) gens.push_back({true, j, 0, "T" + std::to_string(j + 1)});
  for (int j = 0; j < n; ++j)
    for (int k = j + 1; k < n; ++k)
      gens.push_back({false, j, k, "L" + std::to_string(j + 1) + std::to_string(k + 1)});

  std::mt19937_64 rng(seed);
  std::vector<Polynomial> tests;
  for (int t = 0; t < 3; ++t) tests.push_back(Polynomial::random(n, 3, rng));

  CommutatorReport report;
  report.n = n;
  for (std::size_t i = 0; i < gens.size(); ++i) {
    for (std::size_t j = i + 1; j < gens.size(); ++j) {
      double worst = 0.0;
      for (const Polynomial& p : tests) {
        Polynomial lhs = apply_generator(gens[i], apply_generator(gens[j], p)) -
                         apply_generator(gens[j], apply_generator(gens[i], p));
        Polynomial rhs = algebra_rhs(n, gens[i], gens[j], p);
        worst = std::max(worst, (lhs - rhs).max_abs_coeff());
      }
      report.entries.push_back({gens[i].label, gens[j].label, worst});
      report.max_residual = std::max(report.max_residual, worst);
    }
  }
  return report;
}

double laplacian_commutator_residual(const IntertwinerParams& p, const Polynomial& phi) {
  if (phi.dim() != p.n) throw invalid_params("test polynomial dimension mismatch");
  return laplacian_commutator_residual(vector_field_polynomials(p), phi);
}

double laplacian_commutator_residual(const std::vector<Polynomial>& L, const Polynomial& phi) {
  int dim = phi.dim();
  if (L.size() != static_cast<std::size_t>(dim))
    throw invalid_params("first-order coefficient count must match dimension");
  Polynomial Ld_phi(dim);
  for (int j = 0; j < dim; ++j) Ld_phi += L[static_cast<std::size_t>(j)] * phi.derivative(j);
  Polynomial Ld_lap(dim);
  Polynomial lap = phi.laplacian();
  for (int j = 0; j < dim; ++j) Ld_lap += L[static_cast<std::size_t>(j)] * lap.derivative(j);
  return (Ld_phi.laplacian() - Ld_lap).max_abs_coeff();
}

}  // namespace isospec
