// Darboux steps against hand-computed transforms, the recovered missing
// state, chained hierarchies, and the lift of a separated level back to an
// intertwined 2D pair.

#include <array>
#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "doctest.h"
#include "isospec/coords.hpp"
#include "isospec/errors.hpp"
#include "isospec/expr.hpp"
#include "isospec/hierarchy.hpp"
#include "isospec/numerics.hpp"
#include "isospec/potentials.hpp"

using namespace isospec;

namespace {

std::vector<double> sample(const Expr& e, const Grid1D& grid) {
  auto f = e.compile({"xi"});
  std::vector<double> out(static_cast<std::size_t>(grid.n));
  for (int i = 0; i < grid.n; ++i) {
    std::array<double, 1> x{grid.point(i)};
    out[static_cast<std::size_t>(i)] = f(x);
  }
  return out;
}

}  // namespace

TEST_CASE("Darboux step on the oscillator ground state shifts V by 2") {
  // phi = e^{-xi^2/2}: (ln phi)'' = -1, so V - 2(ln phi)'' = xi^2 + 2.
  Expr V = Expr::parse("xi^2", {"xi"});
  Expr phi = Expr::parse("exp(-xi^2/2)", {"xi"});
  auto ex = darboux_step(V, phi, "xi");
  for (double x : {-1.5, 0.0, 0.7, 2.2}) {
    std::map<std::string, double> env{{"xi", x}};
    CHECK(ex.V_new.eval(env) == doctest::Approx(x * x + 2.0).epsilon(1e-12));
    CHECK(ex.w.eval(env) == doctest::Approx(-x).epsilon(1e-12));
  }

  // The grid form differentiates ln phi = -xi^2/2 exactly (the central
  // stencil is exact on quadratics), so V_new matches to round-off inside.
  Grid1D grid(-6.0, 6.0, 500);
  auto step = darboux_step(sample(V, grid), sample(phi, grid), 1.0, grid);
  CHECK_FALSE(step.seed_has_nodes);
  CHECK(step.lambda == doctest::Approx(1.0));
  for (int i = 1; i + 1 < grid.n; ++i) {
    double x = grid.point(i);
    CHECK(step.V_new[static_cast<std::size_t>(i)] ==
          doctest::Approx(x * x + 2.0).epsilon(1e-8));
    CHECK(step.log_deriv[static_cast<std::size_t>(i)] == doctest::Approx(-x).epsilon(1e-8));
  }
}

TEST_CASE("Darboux step removes the well from the one-gap potential") {
  // V = 1 - 2 sech^2 has phi = sech at lambda = 0; the step yields V = 1.
  Expr V = Expr::parse("1 - 2*sech(xi)^2", {"xi"});
  Expr phi = Expr::parse("sech(xi)", {"xi"});
  auto ex = darboux_step(V, phi, "xi");
  for (double x : {-2.0, -0.3, 0.0, 1.1, 3.0}) {
    std::map<std::string, double> env{{"xi", x}};
    CHECK(ex.V_new.eval(env) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("a constant seed leaves any potential unchanged") {
  // w = 0 identically, so the double FD of ln phi must cancel node by node
  // whatever V is; this pins the discretization of the step itself.
  Grid1D grid(-3.0, 3.0, 201);
  std::vector<double> V(static_cast<std::size_t>(grid.n));
  for (int i = 0; i < grid.n; ++i) {
    double x = grid.point(i);
    V[static_cast<std::size_t>(i)] = std::sin(3.0 * x) + 0.5 * x * x;
  }
  auto step = darboux_step(V, std::vector<double>(static_cast<std::size_t>(grid.n), 0.7),
                           0.0, grid);
  for (int i = 0; i < grid.n; ++i) {
    CHECK(step.V_new[static_cast<std::size_t>(i)] ==
          doctest::Approx(V[static_cast<std::size_t>(i)]));
    CHECK(step.log_deriv[static_cast<std::size_t>(i)] == doctest::Approx(0.0));
  }
}

TEST_CASE("state transform maps the first excited oscillator state down") {
  // With w = -xi: (d/dxi - w)(xi e^{-xi^2/2}) = (1 - xi^2 + xi^2) e^{-xi^2/2}.
  Grid1D grid(-7.0, 7.0, 800);
  auto phi0 = sample(Expr::parse("exp(-xi^2/2)", {"xi"}), grid);
  auto psi1 = sample(Expr::parse("xi*exp(-xi^2/2)", {"xi"}), grid);
  auto V = sample(Expr::parse("xi^2", {"xi"}), grid);
  auto step = darboux_step(V, phi0, 1.0, grid);
  auto mapped = step.transform(psi1, grid.h());
  REQUIRE(mapped.size() == phi0.size());
  double max_err = 0.0;
  for (int i = 2; i + 2 < grid.n; ++i) {
    auto iu = static_cast<std::size_t>(i);
    max_err = std::max(max_err, std::fabs(mapped[iu] - phi0[iu]));
  }
  // Central first derivative: O(h^2) with h = 14/801.
  CHECK(max_err < 5e-4);
  CHECK(max_err > 0.0);
}

TEST_CASE("interior sign changes set the node flag; an exact node throws") {
  Grid1D even(-4.0, 4.0, 400);  // nodes straddle xi = 0
  auto psi1 = sample(Expr::parse("xi*exp(-xi^2/2)", {"xi"}), even);
  auto V = sample(Expr::parse("xi^2", {"xi"}), even);
  auto step = darboux_step(V, psi1, 3.0, even);
  CHECK(step.seed_has_nodes);

  Grid1D odd(-4.0, 4.0, 399);  // symmetric odd count puts a node at xi = 0
  auto psi_odd = sample(Expr::parse("xi*exp(-xi^2/2)", {"xi"}), odd);
  auto V_odd = sample(Expr::parse("xi^2", {"xi"}), odd);
  CHECK_THROWS_AS(darboux_step(V_odd, psi_odd, 3.0, odd), solver_error);
}

TEST_CASE("missing state solves the transformed equation at the seed energy") {
  // phi = sech solves V = 1 - 2 sech^2 at lambda = 0; the Darboux partner is
  // the free line V_new = 1, and U = -(1/phi) integral phi^2 is the partner
  // state at lambda: here U = -(sinh xi + tanh(1) cosh xi), with U'' = U.
  Grid1D grid(-1.0, 1.0, 1023);
  auto phi = sample(Expr::parse("sech(xi)", {"xi"}), grid);
  auto U = missing_state(phi, grid);
  REQUIRE(U.size() == phi.size());

  double h = grid.h();
  double max_res = 0.0, scale = 0.0;
  for (int i = 1; i + 1 < grid.n; ++i) {
    auto iu = static_cast<std::size_t>(i);
    double lap = (U[iu + 1] - 2.0 * U[iu] + U[iu - 1]) / (h * h);
    max_res = std::max(max_res, std::fabs(-lap + 1.0 * U[iu] - 0.0 * U[iu]));
    scale = std::max(scale, std::fabs(U[iu]));
  }
  CHECK(max_res / scale < 1e-5);

  // Value check against the closed form.  The cumulative trapezoid fixes the
  // free constant slightly differently (sech does not vanish at the box
  // edge), which admixes O(h) of the homogeneous solution 1/phi.
  double t0 = std::tanh(1.0);
  for (int i : {100, grid.n / 2, 900}) {
    auto iu = static_cast<std::size_t>(i);
    double x = grid.point(i);
    double exact = -(std::sinh(x) + t0 * std::cosh(x));
    CHECK(U[iu] == doctest::Approx(exact).epsilon(2e-3));
  }

  // U' = -phi + S phi'/phi^2, so at the symmetric center U'(0) = -phi(0) = -1.
  int mid = grid.n / 2;
  auto m = static_cast<std::size_t>(mid);
  double dU = (U[m + 1] - U[m - 1]) / (2.0 * h);
  CHECK(dU == doctest::Approx(-1.0).epsilon(1e-3));

  // A seed with nodes has no single-branch reduction of order.
  auto noded = sample(Expr::parse("xi*exp(-xi^2/2)", {"xi"}), Grid1D(-4.0, 4.0, 400));
  CHECK_THROWS_AS(missing_state(noded, Grid1D(-4.0, 4.0, 400)), invalid_params);
}

TEST_CASE("hierarchy chains ground-state steps and deletes the bottom level") {
  Grid1D grid(-7.0, 7.0, 1000);
  std::vector<HierarchySeed> seeds{{0, std::nullopt}, {0, std::nullopt}};
  auto h = build_hierarchy(Expr::parse("xi^2", {"xi"}), seeds, grid, 4);
  REQUIRE(h.levels.size() == 3);
  // Level spectra {1,3,5,7}, {3,5,7,9}, {5,7,9,11}: each step deletes the
  // current ground state.
  for (std::size_t lvl = 0; lvl < 3; ++lvl) {
    for (int k = 0; k < 4; ++k) {
      double expect = 2.0 * (static_cast<double>(lvl) + k) + 1.0;
      CHECK(std::fabs(h.levels[lvl].spectrum.eigenvalues[static_cast<std::size_t>(k)] -
                      expect) < 5e-3);
    }
  }
  CHECK(h.levels[0].deleted_eigenvalue == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(h.levels[1].deleted_eigenvalue == doctest::Approx(3.0).epsilon(1e-3));
  CHECK(std::isnan(h.levels[2].deleted_eigenvalue));
  CHECK_FALSE(h.levels[0].seed_had_nodes);

  // Empty seed list: just the base level.
  auto base = build_hierarchy(Expr::parse("xi^2", {"xi"}), {}, grid, 3);
  CHECK(base.levels.size() == 1);
  CHECK(std::isnan(base.levels[0].deleted_eigenvalue));

  // Out-of-range eigenstate index is a configuration error.
  std::vector<HierarchySeed> bad{{9, std::nullopt}};
  CHECK_THROWS_AS(build_hierarchy(Expr::parse("xi^2", {"xi"}), bad, grid, 4), invalid_params);
}

TEST_CASE("an explicit expression seed records its Rayleigh quotient") {
  Grid1D grid(-7.0, 7.0, 1000);
  std::vector<HierarchySeed> seeds{{0, Expr::parse("exp(-xi^2/2)", {"xi"})}};
  auto h = build_hierarchy(Expr::parse("xi^2", {"xi"}), seeds, grid, 3);
  REQUIRE(h.levels.size() == 2);
  CHECK(h.levels[0].deleted_eigenvalue == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(std::fabs(h.levels[1].spectrum.eigenvalues[0] - 3.0) < 5e-3);
}

TEST_CASE("an excited-index seed is flagged as noded") {
  Grid1D grid(-7.0, 7.0, 1000);
  std::vector<HierarchySeed> seeds{{1, std::nullopt}};
  auto h = build_hierarchy(Expr::parse("xi^2", {"xi"}), seeds, grid, 3);
  REQUIRE(h.levels.size() == 2);
  CHECK(h.levels[0].seed_had_nodes);
  CHECK(h.levels[0].deleted_eigenvalue == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("embed_2d lifts the oscillator ground level to a conformal pair") {
  Expr V = Expr::parse("xi^2", {"xi"});
  Expr H = Expr::parse("0", {});
  Expr phi = Expr::parse("exp(-xi^2/2)", {"xi"});
  double c = 1.0;
  auto pair = embed_2d(V, H, 1.0, phi, c);
  CHECK(pair.family == "embedded");

  // On the chart with a = 0: rho = ln(kappa)/c, xi = atan(eta)/c, and
  // V1 = e^{-2 c rho} [2 xi^2 + 2 - xi^2 + 0] = (xi^2 + 2)/kappa^2.
  Chart2D chart(0.0, 0.0, c);
  for (auto [x, y] : {std::pair{0.8, 0.4}, {-0.5, 1.2}, {1.5, -0.9}}) {
    auto co = chart.forward(x, y);
    std::array<double, 2> q{x, y};
    double k2 = co.kappa * co.kappa;
    CHECK(pair.V0(q) == doctest::Approx(co.xi * co.xi / k2).epsilon(1e-10));
    CHECK(pair.V1(q) == doctest::Approx((co.xi * co.xi + 2.0) / k2).epsilon(1e-10));
  }
  auto rep = check_pair_identities(pair);
  CHECK(rep.grad_residual < 1e-6);
  CHECK(rep.laplace_residual < 1e-6);
  CHECK(rep.product_residual < 1e-6);

  // A function that is not an eigenfunction at the stated energy is refused.
  CHECK_THROWS_AS(embed_2d(V, H, 1.0, Expr::parse("exp(-xi^2)", {"xi"}), c), invalid_params);
  CHECK_THROWS_AS(embed_2d(V, H, 2.0, phi, c), invalid_params);
}

TEST_CASE("embedded pair intertwines at second order") {
  auto pair = embed_2d(Expr::parse("xi^2", {"xi"}), Expr::parse("0", {}), 1.0,
                       Expr::parse("exp(-xi^2/2)", {"xi"}), 1.0);
  // A narrow gaussian keeps the FD error dominated by its own interior
  // derivatives; the box keeps a unit margin from kappa = 0, where the
  // lifted potentials are singular and the error constant grows steeply.
  TestField psi = [](std::span<const double> x) {
    return std::exp(-2.0 * ((x[0] - 1.5) * (x[0] - 1.5) + (x[1] - 0.1) * (x[1] - 0.1)));
  };
  std::vector<double> lo{0.9, -0.5}, hi{2.1, 0.7};
  auto sweep = intertwining_convergence(pair, psi, lo, hi, 17, 3);
  REQUIRE(sweep.orders.size() == 3);
  for (double ord : sweep.orders) CHECK(ord == doctest::Approx(2.0).epsilon(0.2));
}
