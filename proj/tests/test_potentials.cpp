// Partner-pair builders: closed-form spot checks done by hand, the
// closed-system identities on sampled points for every family, and the
// guard/validation behavior on bad inputs.

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "doctest.h"
#include "isospec/coords.hpp"
#include "isospec/errors.hpp"
#include "isospec/expr.hpp"
#include "isospec/integrability.hpp"
#include "isospec/potentials.hpp"

using namespace isospec;

namespace {

double at(const ScalarField& f, std::initializer_list<double> x) {
  std::vector<double> p(x);
  return f(std::span<const double>(p));
}

}  // namespace

TEST_CASE("1D pair from L0 = x gives shifted oscillator partners") {
  // V-+ = L0^2 -+ L0' + b with L0 = x: V0 = x^2 - 1 + b, V1 = x^2 + 1 + b.
  auto pair = build_1d_pair(Expr::parse("x", {"x"}), 0.5);
  for (double x : {-1.7, -0.2, 0.0, 0.9, 2.3}) {
    CHECK(at(pair.V0, {x}) == doctest::Approx(x * x - 0.5).epsilon(1e-12));
    CHECK(at(pair.V1, {x}) == doctest::Approx(x * x + 1.5).epsilon(1e-12));
    CHECK(at(pair.P, {x}) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(at(pair.L0, {x}) == doctest::Approx(x).epsilon(1e-12));
  }
  auto rep = check_pair_identities(pair);
  CHECK(rep.points_used == 20);
  CHECK(rep.grad_residual < 1e-8);
  CHECK(rep.laplace_residual < 1e-7);
  CHECK(rep.product_residual < 1e-8);
}

TEST_CASE("1D pair from L0 = tanh x has a constant upper partner") {
  // tanh^2 + sech^2 = 1, so V1 = 1 + b everywhere while V0 = 1 + b - 2 sech^2.
  double b = -0.25;
  auto pair = build_1d_pair(Expr::parse("tanh(x)", {"x"}), b);
  for (double x : {-2.0, -0.5, 0.0, 1.3}) {
    double sech2 = 1.0 / (std::cosh(x) * std::cosh(x));
    CHECK(at(pair.V1, {x}) == doctest::Approx(1.0 + b).epsilon(1e-12));
    CHECK(at(pair.V0, {x}) == doctest::Approx(1.0 + b - 2.0 * sech2).epsilon(1e-12));
  }
  auto rep = check_pair_identities(pair);
  CHECK(rep.grad_residual < 1e-6);
  CHECK(rep.laplace_residual < 1e-6);
  CHECK(rep.product_residual < 1e-6);
}

TEST_CASE("constant-shift family: P is identically p0 and L0 is linear") {
  // a = (1,1), p0 = 2, b = (0.3,-0.2); g = (x1-x2)^2 is constant along a.
  std::vector<double> a{1.0, 1.0}, b{0.3, -0.2};
  auto pair = build_constant_shift(a, 2.0, b, Expr::parse("(x1-x2)^2", {"x1", "x2"}));
  for (auto [x, y] : {std::pair{0.4, -1.1}, {1.6, 0.2}, {-0.7, -0.7}}) {
    double r2 = x * x + y * y;
    double v0 = r2 + 2.0 * (0.3 * x - 0.2 * y) + (x - y) * (x - y);
    CHECK(at(pair.V0, {x, y}) == doctest::Approx(v0).epsilon(1e-12));
    CHECK(at(pair.P, {x, y}) == doctest::Approx(2.0).epsilon(1e-12));
    // L0 = p0 a.r/2 + a.b = (x + y) + 0.1.
    CHECK(at(pair.L0, {x, y}) == doctest::Approx(x + y + 0.1).epsilon(1e-12));
  }
  auto rep = check_pair_identities(pair);
  CHECK(rep.grad_residual < 1e-6);
  CHECK(rep.laplace_residual < 1e-6);
  CHECK(rep.product_residual < 1e-6);

  // g with a.grad g != 0 is not a transverse profile.
  CHECK_THROWS_AS(build_constant_shift(a, 2.0, b, Expr::parse("x1^2", {"x1", "x2"})),
                  invalid_params);
}

TEST_CASE("translational pair is constant along directions orthogonal to a") {
  std::vector<double> a{1.0, 1.0};
  auto pair = build_translational(a, Expr::parse("tanh(zeta)", {"zeta"}),
                                  Expr::parse("0", {}));
  // zeta = (x+y)/2 only; shifting along (1,-1) keeps both potentials fixed.
  for (double t : {0.3, -0.8, 1.4}) {
    CHECK(at(pair.V0, {0.5 + t, 0.5 - t}) ==
          doctest::Approx(at(pair.V0, {0.5, 0.5})).epsilon(1e-12));
    CHECK(at(pair.V1, {0.5 + t, 0.5 - t}) ==
          doctest::Approx(at(pair.V1, {0.5, 0.5})).epsilon(1e-12));
  }
  // V-+ = f^2/a^2 -+ f'/2 + g/2 at zeta = 1 (a^2 = 2).
  double th = std::tanh(1.0), sech2 = 1.0 - th * th;
  CHECK(at(pair.V0, {1.0, 1.0}) == doctest::Approx(th * th / 2.0 - sech2 / 2.0).epsilon(1e-12));
  CHECK(at(pair.V1, {1.0, 1.0}) == doctest::Approx(th * th / 2.0 + sech2 / 2.0).epsilon(1e-12));
  auto rep = check_pair_identities(pair);
  CHECK(rep.grad_residual < 1e-6);
  CHECK(rep.laplace_residual < 1e-6);
  CHECK(rep.product_residual < 1e-6);
}

TEST_CASE("ratio family accepts flow invariants of L and rejects other h") {
  // a = (1,0,0), dual c = (0,0,1): L = (1+y, -x, 0), so r.c = z is constant
  // along the flow while eta = L1/L2 is not (L.grad eta = c kappa^2/L2^2).
  auto p = IntertwinerParams::from_dual_3d({1.0, 0.0, 0.0}, {0.0, 0.0, 1.0});
  Expr f = Expr::parse("tanh(eta)", {"eta"});

  ScalarField h_ok;
  h_ok.value = [](std::span<const double> x) { return x[2] * x[2]; };
  h_ok.gradient = [](std::span<const double> x) {
    return std::vector<double>{0.0, 0.0, 2.0 * x[2]};
  };
  auto pair = build_general_pair(p, 0, 1, f, &h_ok, "z^2");
  CHECK(pair.family == "ratio");
  auto rep = check_pair_identities(pair);
  CHECK(rep.grad_residual < 1e-6);
  CHECK(rep.laplace_residual < 1e-6);
  CHECK(rep.product_residual < 1e-6);

  ScalarField h_bad;
  h_bad.value = [](std::span<const double> x) { return -(1.0 + x[1]) / x[0]; };
  h_bad.singular = [](std::span<const double> x) { return std::fabs(x[0]) < 1e-2; };
  CHECK_THROWS_AS(build_general_pair(p, 0, 1, f, &h_bad, "eta"), invalid_params);
}

TEST_CASE("ratio family rejects parameters violating the closure conditions") {
  // a parallel to the dual of c breaks a.c = 0.
  auto p = IntertwinerParams::from_dual_3d({1.0, 0.0, 0.0}, {1.0, 0.0, 0.0});
  CHECK_FALSE(check_pfaffian_conditions(p).all_satisfied);
  CHECK_THROWS_AS(build_general_pair(p, 0, 1, Expr::parse("eta", {"eta"})), invalid_params);

  // Same indices, or a pair with c_ij = 0, cannot define eta.
  auto ok = IntertwinerParams::planar(0.3, 1.1, 0.7);
  CHECK_THROWS_AS(build_general_pair(ok, 1, 1, Expr::parse("eta", {"eta"})), invalid_params);
}

TEST_CASE("planar builder agrees with the general ratio builder") {
  double a1 = 0.3, a2 = 1.1, c = 0.7;
  Expr f = Expr::parse("tanh(eta)", {"eta"});
  auto planar = build_2d_pair(a1, a2, c, f);
  auto general = build_general_pair(IntertwinerParams::planar(a1, a2, c), 0, 1, f);
  // kappa^2/L2^2 = 1 + eta^2, so the two forms of V' coincide identically.
  for (auto [x, y] : {std::pair{0.4, -1.1}, {1.2, 0.6}, {-0.9, 0.3}, {0.1, 1.8}}) {
    CHECK(at(planar.V0, {x, y}) == doctest::Approx(at(general.V0, {x, y})).epsilon(1e-12));
    CHECK(at(planar.V1, {x, y}) == doctest::Approx(at(general.V1, {x, y})).epsilon(1e-12));
    CHECK(at(planar.L0, {x, y}) == doctest::Approx(at(general.L0, {x, y})).epsilon(1e-12));
    CHECK(at(planar.P, {x, y}) == doctest::Approx(at(general.P, {x, y})).epsilon(1e-12));
  }
}

TEST_CASE("planar builder with an h(kappa) term keeps the identities") {
  // Oscillator-dressed free motion: f = c eta, h = 2c^2/kappa^2 + 2 kappa^2.
  auto pair = build_2d_pair(0.0, 1.0, 1.0, Expr::parse("eta", {"eta"}),
                            Expr::parse("2/kappa^2 + 2*kappa^2", {"kappa"}));
  // V1 = h/2 + [f^2 + c(1+eta^2) f']/kappa^2 at (x,y) = (0.5, 1.0):
  // L = (y, 1-x) = (1, 0.5), kappa^2 = 1.25, eta = 2.
  double k2 = 1.25, eta = 2.0;
  double v1 = (1.0 / k2 + k2) + (eta * eta + (1.0 + eta * eta)) / k2;
  CHECK(at(pair.V1, {0.5, 1.0}) == doctest::Approx(v1).epsilon(1e-12));
  auto rep = check_pair_identities(pair);
  CHECK(rep.grad_residual < 1e-6);
  CHECK(rep.laplace_residual < 1e-6);
  CHECK(rep.product_residual < 1e-6);
}

TEST_CASE("Riccati branches solve f^2 - c(1+eta^2) f' = b") {
  struct Case {
    double b, b1, c, lo, hi;
  };
  // Ranges keep tan arguments inside (-pi/2, pi/2) and stay off the b = 0 pole
  // at atan(eta) = b1.
  for (const Case& tc : {Case{-0.7, 0.3, 1.0, -2.0, 2.0},
                         Case{0.9, -0.4, 0.8, -3.0, 3.0},
                         Case{0.0, 0.4, 1.2, 0.8, 4.0}}) {
    Expr f = solve_riccati_2d(tc.b, tc.b1, tc.c);
    Expr fp = f.derivative("eta");
    for (int k = 0; k <= 50; ++k) {
      double eta = tc.lo + (tc.hi - tc.lo) * k / 50.0;
      std::map<std::string, double> env{{"eta", eta}};
      double res = f.eval(env) * f.eval(env) -
                   tc.c * (1.0 + eta * eta) * fp.eval(env) - tc.b;
      CHECK(std::fabs(res) < 1e-9);
    }
  }
  // b = -c^2, b1 = 0 degenerates to the linear solution f = c eta.
  Expr lin = solve_riccati_2d(-1.44, 0.0, 1.2);
  for (double eta : {-2.0, -0.3, 0.0, 1.5}) {
    std::map<std::string, double> env{{"eta", eta}};
    CHECK(std::fabs(lin.eval(env) - 1.2 * eta) < 1e-12);
  }
}

TEST_CASE("planar free-motion partners: V0 = 0 and V1 matches closed forms") {
  // b = -c^2, b1 = 0, a = (0,1), c = 1: f = c eta and V1 = 2c^2/L2^2 = 2/(1-x)^2.
  auto tied = free_motion_partners_2d(-1.0, 0.0, 1.0, 0.0, 1.0);
  for (auto [x, y] : {std::pair{0.5, -1.0}, {-0.8, 0.4}, {0.2, 1.7}}) {
    CHECK(std::fabs(at(tied.V0, {x, y})) < 1e-12);
    CHECK(at(tied.V1, {x, y}) ==
          doctest::Approx(2.0 / ((1.0 - x) * (1.0 - x))).epsilon(1e-12));
  }
  auto rep = check_pair_identities(tied);
  CHECK(rep.grad_residual < 1e-6);
  CHECK(rep.laplace_residual < 1e-6);
  CHECK(rep.product_residual < 1e-6);

  // b = 0 branch: V1 kappa^2 = 2c^2/(b1 - atan eta)^2.
  double b1 = 0.4, c = 1.2;
  auto log_branch = free_motion_partners_2d(0.0, b1, c, 0.0, 1.0);
  for (auto [x, y] : {std::pair{0.5, -1.0}, {-0.6, -0.9}, {0.3, -2.0}}) {
    double l1 = c * y, l2 = 1.0 - c * x;
    double k2 = l1 * l1 + l2 * l2, eta = l1 / l2;
    double v1 = 2.0 * c * c / (k2 * std::pow(b1 - std::atan(eta), 2));
    CHECK(std::fabs(at(log_branch.V0, {x, y})) < 1e-12);
    CHECK(at(log_branch.V1, {x, y}) == doctest::Approx(v1).epsilon(1e-12));
  }
}

TEST_CASE("spatial free-motion kinds: V0 = 0, closed-form V1, identities") {
  auto p = IntertwinerParams::from_dual_3d({1.0, 0.0, 0.0}, {0.0, 0.0, 1.0});
  Chart3D chart(p, 1);
  double c2 = chart.c_norm2();
  std::vector<std::array<double, 3>> pts{
      {0.9, 0.5, -0.3}, {1.4, -0.6, 0.2}, {0.7, 1.1, 0.8}, {1.8, 0.4, -1.0}};

  for (int kind : {1, 2, 3}) {
    CAPTURE(kind);
    auto pair = free_motion_partners_3d(p, kind, kind == 2 ? 0.0 : 0.8);
    CHECK(pair.family == "spatial-free");
    int used = 0;
    for (const auto& q : pts) {
      std::span<const double> x(q);
      if (pair.V0.is_singular(x)) continue;
      ++used;
      CHECK(std::fabs(pair.V0(x)) < 1e-9);
      double L2 = chart.L_squared(x);
      double eta = chart.eta(x);
      double pp = chart.p_prime_of(eta);
      double f;
      if (kind == 1)
        f = 1.0 / (0.8 - std::atan(pp / (2.0 * std::sqrt(c2))) / std::sqrt(c2));
      else if (kind == 2)
        f = 0.5 * pp;
      else
        f = 0.5 * pp + chart.p_of(eta) / (0.8 - eta);
      // Kind 1 solves f^2 = p f' directly, so V1 = 2 f^2/L^2; the others carry
      // h = 2c^2/L^2 and give V1 = 2(c^2 + f^2)/L^2.
      double v1 = kind == 1 ? 2.0 * f * f / L2 : 2.0 * (c2 + f * f) / L2;
      CHECK(pair.V1(x) == doctest::Approx(v1).epsilon(1e-9));
    }
    CHECK(used >= 3);
    auto rep = check_pair_identities(pair);
    CHECK(rep.grad_residual < 1e-6);
    CHECK(rep.laplace_residual < 1e-6);
    CHECK(rep.product_residual < 1e-6);
  }
  CHECK_THROWS_AS(free_motion_partners_3d(p, 4), invalid_params);
}

TEST_CASE("spatial builder on a catalog row keeps the identities") {
  auto preset = preset_table1(2);
  auto pair = build_3d_pair(preset.params, Expr::parse("tanh(eta)", {"eta"}),
                            std::nullopt, preset.eta_variant);
  auto rep = check_pair_identities(pair);
  CHECK(rep.points_used == 20);
  CHECK(rep.grad_residual < 1e-6);
  CHECK(rep.laplace_residual < 1e-6);
  CHECK(rep.product_residual < 1e-6);
}

TEST_CASE("identity check flags a corrupted pair") {
  auto pair = build_translational({1.0, 1.0}, Expr::parse("tanh(zeta)", {"zeta"}),
                                  Expr::parse("0", {}));
  PotentialPair broken = pair;
  ScalarField orig = pair.P;
  broken.P.value = [orig](std::span<const double> x) { return 1.05 * orig.value(x); };
  // 2 d_j L0 = P L_j holds for the true P only.
  auto rep = check_pair_identities(broken);
  CHECK(rep.grad_residual > 1e-3);
}

TEST_CASE("rotation covariance residual is small for admissible parameters") {
  auto pair = build_2d_pair(0.3, 1.1, 0.7, Expr::parse("tanh(eta)", {"eta"}));
  for (auto [x, y] : {std::pair{0.4, -1.1}, {1.2, 0.6}, {-0.9, 0.3}}) {
    std::array<double, 2> q{x, y};
    CHECK(rotation_covariance_residual(pair, q) < 1e-6);
  }
}

TEST_CASE("evaluation inside a guard band raises singularity_error") {
  // a = (0,1), c = 1: L2 = 1 - x vanishes on the line x = 1.
  auto pair = build_2d_pair(0.0, 1.0, 1.0, Expr::parse("tanh(eta)", {"eta"}));
  std::array<double, 2> on{1.0, 0.3};
  CHECK(pair.V0.is_singular(on));
  CHECK_THROWS_AS(at(pair.V0, {1.0, 0.3}), singularity_error);
  CHECK_THROWS_AS(at(pair.L0, {1.0 + 1e-9, -0.2}), singularity_error);
  std::array<double, 2> off{0.2, 0.3};
  CHECK_FALSE(pair.V0.is_singular(off));
}
