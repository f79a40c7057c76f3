// Euclidean-algebra layer: parameter validation, the vector field L,
// polynomial machinery, commutator tables, and [laplacian, L_d] = 0.

#include "doctest.h"

#include <cmath>
#include <random>

#include "isospec/euclid.hpp"
#include "isospec/polynomial.hpp"

using namespace isospec;

TEST_CASE("IntertwinerParams validates antisymmetry and sizes") {
  CHECK_THROWS_AS(IntertwinerParams(2, {1.0, 2.0}, {{1.0, 0.0}, {0.0, 0.0}}), invalid_params);
  CHECK_THROWS_AS(IntertwinerParams(2, {1.0, 2.0}, {{0.0, 1.0}, {1.0, 0.0}}), invalid_params);
  CHECK_THROWS_AS(IntertwinerParams(2, {1.0}, {{0.0, 1.0}, {-1.0, 0.0}}), invalid_params);
  CHECK_NOTHROW(IntertwinerParams(2, {1.0, 2.0}, {{0.0, 1.0}, {-1.0, 0.0}}));
}

TEST_CASE("dual 3D form round-trips") {
  IntertwinerParams p = IntertwinerParams::from_dual_3d({1.0, 2.0, 3.0}, {0.5, -1.0, 2.0});
  auto d = p.dual_c();
  CHECK(d[0] == doctest::Approx(0.5));
  CHECK(d[1] == doctest::Approx(-1.0));
  CHECK(d[2] == doctest::Approx(2.0));
  // c23 = c1, c31 = c2, c12 = c3
  CHECK(p.c[1][2] == doctest::Approx(0.5));
  CHECK(p.c[2][0] == doctest::Approx(-1.0));
  CHECK(p.c[0][1] == doctest::Approx(2.0));
}

TEST_CASE("vector_field agrees with its polynomial form") {
  IntertwinerParams p = IntertwinerParams::from_dual_3d({1.0, -0.5, 2.0}, {0.3, 0.7, -1.1});
  auto polys = vector_field_polynomials(p);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  for (int t = 0; t < 20; ++t) {
    double x[3] = {dist(rng), dist(rng), dist(rng)};
    auto L = vector_field(p, x);
    for (int j = 0; j < 3; ++j)
      CHECK(L[static_cast<std::size_t>(j)] ==
            doctest::Approx(polys[static_cast<std::size_t>(j)].eval(x)).epsilon(1e-14));
  }
}

TEST_CASE("ScalarField guard turns flagged points into singularity_error") {
  ScalarField F;
  F.value = [](std::span<const double> x) { return 1.0 / x[0]; };
  F.singular = [](std::span<const double> x) { return std::fabs(x[0]) < 1e-3; };
  double ok[1] = {0.5}, bad[1] = {1e-5};
  CHECK(F(ok) == doctest::Approx(2.0));
  CHECK(F.is_singular(bad));
  CHECK_THROWS_AS(F(bad), singularity_error);
}

TEST_CASE("exact gradient hook is preferred over finite differences") {
  ScalarField F;
  F.value = [](std::span<const double> x) { return x[0] * x[0]; };
  F.gradient = [](std::span<const double>) { return std::vector<double>{42.0}; };
  double x[1] = {1.0};
  CHECK(F.grad(x)[0] == doctest::Approx(42.0));
}

TEST_CASE("polynomial calculus identities") {
  std::mt19937_64 rng(2718);
  for (int t = 0; t < 10; ++t) {
    Polynomial p = Polynomial::random(3, 3, rng);
    Polynomial q = Polynomial::random(3, 3, rng);
    // lap(pq) = p lap q + 2 grad p . grad q + q lap p
    Polynomial lhs = (p * q).laplacian();
    Polynomial rhs = p * q.laplacian() + q * p.laplacian();
    for (int ax = 0; ax < 3; ++ax)
      rhs += p.derivative(ax) * q.derivative(ax) * 2.0;
    CHECK((lhs - rhs).max_abs_coeff() <= 1e-10);
  }
}

TEST_CASE("commutator table of e(n) closes for n = 2..5") {
  for (int n = 2; n <= 5; ++n) {
    CommutatorReport rep = commutator_table(n);
    CHECK(rep.n == n);
    CHECK(rep.max_residual <= 1e-10);
    for (const auto& e : rep.entries) CHECK(e.residual <= 1e-10);
  }
}

TEST_CASE("L_d commutes with the laplacian for any antisymmetric c") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int n = 2; n <= 4; ++n) {
    std::vector<double> a(static_cast<std::size_t>(n));
    std::vector<std::vector<double>> c(static_cast<std::size_t>(n),
                                       std::vector<double>(static_cast<std::size_t>(n), 0.0));
    for (auto& v : a) v = dist(rng);
    for (int j = 0; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        double v = dist(rng);
        c[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = v;
        c[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = -v;
      }
    IntertwinerParams p(n, a, c);
    for (int t = 0; t < 5; ++t) {
      Polynomial phi = Polynomial::random(n, 4, rng);
      CHECK(laplacian_commutator_residual(p, phi) <= 1e-10);
    }
  }
}

TEST_CASE("a first-order operator with divergence does not commute") {
  // L = (x1, 0): div L = 1, so [lap, L.grad] = 2 d_x^2 survives.
  std::vector<Polynomial> L{Polynomial::variable(2, 0), Polynomial::constant(2, 0.0)};
  Polynomial phi = Polynomial::variable(2, 0) * Polynomial::variable(2, 0);
  CHECK(laplacian_commutator_residual(L, phi) > 0.1);
}

TEST_CASE("apply_ld matches the polynomial route on scalar fields") {
  IntertwinerParams p = IntertwinerParams::planar(0.4, -1.0, 0.8);
  std::mt19937_64 seed_rng(5);
  Polynomial phi = Polynomial::random(2, 3, seed_rng);
  ScalarField F;
  F.value = [&phi](std::span<const double> x) { return phi.eval(x); };
  Polynomial exact = apply_ld(p, phi);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int t = 0; t < 10; ++t) {
    double x[2] = {dist(rng), dist(rng)};
    CHECK(apply_ld(p, F, x) == doctest::Approx(exact.eval(x)).epsilon(1e-7));
  }
}
