#include "isospec/coords.hpp"

#include <cmath>

#include "isospec/fd.hpp"

namespace isospec {

Chart2D::Chart2D(double a1_, double a2_, double c_) : a1(a1_), a2(a2_), c(c_) {
  if (c == 0.0) throw invalid_params("planar chart requires c != 0");
}

std::array<double, 2> Chart2D::vector_field(double x, double y) const {
  return {a1 + c * y, a2 - c * x};
}

Chart2D::Coords Chart2D::forward(double x, double y) const {
  auto [L1, L2] = vector_field(x, y);
  double kappa = std::hypot(L1, L2);
  if (kappa <= guard) throw singularity_error("chart center: kappa = |L| vanishes");
  if (std::fabs(L2) <= guard) throw singularity_error("eta = L1/L2 undefined on the L2 = 0 locus");
  Coords out;
  out.kappa = kappa;
  out.eta = L1 / L2;
  out.rho = std::log(kappa) / c;
  out.xi = std::atan(out.eta) / c;
  return out;
}

std::array<double, 2> Chart2D::inverse(double rho, double xi) const {
  double angle = c * xi;
  if (!(std::fabs(angle) < M_PI / 2.0))
    throw invalid_params("inverse requires |c xi| < pi/2 (principal branch)");
  double kappa = std::exp(c * rho);
  double L1 = kappa * std::sin(angle);
  double L2 = kappa * std::cos(angle);
  return {(a2 - L2) / c, (L1 - a1) / c};
}

double Chart2D::laplacian_rho_xi(const ScalarField& F, double rho, double xi, double step) const {
  std::array<double, 2> q{rho, xi};
  double frr = fd::second_partial(F, std::span<const double>(q), 0, step);
  double fxx = fd::second_partial(F, std::span<const double>(q), 1, step);
  return std::exp(-2.0 * c * rho) * (frr + fxx);
}

double Chart2D::laplacian_kappa_eta(const ScalarField& F, double kappa, double eta, double step) const {
  std::array<double, 2> q{kappa, eta};
  auto span = std::span<const double>(q);
  double fk = fd::partial(F, span, 0, step);
  double fkk = fd::second_partial(F, span, 0, step);
  double fe = fd::partial(F, span, 1, step);
  double fee = fd::second_partial(F, span, 1, step);
  double w = 1.0 + eta * eta;
  // (c^2/kappa^2) { kappa d_k(kappa d_k F) + w d_e(w d_e F) }
  return (c * c) / (kappa * kappa) *
         (kappa * fk + kappa * kappa * fkk + w * (2.0 * eta * fe + w * fee));
}

namespace {

std::array<double, 3> cross(const std::array<double, 3>& u, const std::array<double, 3>& v) {
  return {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
}

}  // namespace

Chart3D::Chart3D(const IntertwinerParams& p, int variant) : params(p), eta_variant(variant) {
  if (p.n != 3) throw invalid_params("spatial chart requires n = 3");
  auto cv = p.dual_c();
  double adotc = p.a[0] * cv[0] + p.a[1] * cv[1] + p.a[2] * cv[2];
  if (std::fabs(adotc) > constraint_guard())
    throw invalid_params("spatial chart requires a.c = 0");
  double c2 = cv[0] * cv[0] + cv[1] * cv[1] + cv[2] * cv[2];
  if (c2 == 0.0) throw invalid_params("spatial chart requires c != 0");
  switch (variant) {
    case 1:
      num_ = 0, den_ = 1;
      if (cv[2] == 0.0) throw invalid_params("eta = L1/L2 requires c3 != 0");
      A_ = (c2 - cv[1] * cv[1]) / cv[2];
      B_ = 2.0 * cv[0] * cv[1] / cv[2];
      C_ = (c2 - cv[0] * cv[0]) / cv[2];
      break;
    case 2:
      num_ = 0, den_ = 2;
      if (cv[1] == 0.0) throw invalid_params("eta = L1/L3 requires c2 != 0");
      A_ = -(c2 - cv[2] * cv[2]) / cv[1];
      B_ = -2.0 * cv[0] * cv[2] / cv[1];
      C_ = -(c2 - cv[0] * cv[0]) / cv[1];
      break;
    case 3:
      num_ = 1, den_ = 2;
      if (cv[0] == 0.0) throw invalid_params("eta = L2/L3 requires c1 != 0");
      A_ = (c2 - cv[2] * cv[2]) / cv[0];
      B_ = 2.0 * cv[1] * cv[2] / cv[0];
      C_ = (c2 - cv[1] * cv[1]) / cv[0];
      break;
    default:
      throw invalid_params("eta variant must be 1, 2 or 3");
  }
}

double Chart3D::constraint_guard() { return 1e-12; }

double Chart3D::c_norm2() const {
  auto cv = params.dual_c();
  return cv[0] * cv[0] + cv[1] * cv[1] + cv[2] * cv[2];
}

double Chart3D::cvar() const {
  return params.c[static_cast<std::size_t>(num_)][static_cast<std::size_t>(den_)];
}

double Chart3D::eta_numerator(std::span<const double> x) const {
  return vector_field(params, x)[static_cast<std::size_t>(num_)];
}

double Chart3D::eta_denominator(std::span<const double> x) const {
  return vector_field(params, x)[static_cast<std::size_t>(den_)];
}

double Chart3D::eta(std::span<const double> x) const {
  double den = eta_denominator(x);
  if (std::fabs(den) <= guard) throw singularity_error("eta denominator vanishes");
  return eta_numerator(x) / den;
}

double Chart3D::L_squared(std::span<const double> x) const {
  auto L = vector_field(params, x);
  return L[0] * L[0] + L[1] * L[1] + L[2] * L[2];
}

std::array<double, 3> Chart3D::forward(std::span<const double> x) const {
  auto cv = params.dual_c();
  const auto& a = params.a;
  double rc = x[0] * cv[0] + x[1] * cv[1] + x[2] * cv[2];
  double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
  std::array<double, 3> axc = cross({a[0], a[1], a[2]}, cv);
  double gamma = x[0] * axc[0] + x[1] * axc[1] + x[2] * axc[2] +
                 0.5 * (rc * rc - c_norm2() * r2);
  return {rc, gamma, eta(x)};
}

double Chart3D::p_of(double e) const { return (A_ * e + B_) * e + C_; }

double Chart3D::p_prime_of(double e) const { return 2.0 * A_ * e + B_; }

Expr Chart3D::p_expr(const std::string& var) const {
  Expr e = Expr::variable(var);
  return Expr::constant(A_) * e * e + Expr::constant(B_) * e + Expr::constant(C_);
}

double Chart3D::jacobian(std::span<const double> x) const {
  return c_norm2() * p_of(eta(x));
}

std::array<double, 3> Chart3D::metric(std::span<const double> x) const {
  double c2 = c_norm2();
  double L2 = L_squared(x);
  if (L2 <= guard * guard) throw singularity_error("metric degenerate where L vanishes");
  double den = eta_denominator(x);
  double cv = cvar();
  return {1.0 / c2, 1.0 / (c2 * L2), den * den * den * den / (cv * cv * L2)};
}

std::array<double, 3> Chart3D::grad_beta() const {
  auto cv = params.dual_c();
  return {cv[0], cv[1], cv[2]};
}

std::array<double, 3> Chart3D::grad_gamma(std::span<const double> x) const {
  auto L = vector_field(params, x);
  return cross({L[0], L[1], L[2]}, params.dual_c());
}

std::array<double, 3> Chart3D::grad_eta(std::span<const double> x) const {
  auto L = vector_field(params, x);
  double den = eta_denominator(x);
  if (std::fabs(den) <= guard) throw singularity_error("eta denominator vanishes");
  double s = cvar() / (den * den);
  return {s * L[0], s * L[1], s * L[2]};
}

double Chart3D::laplacian(const ScalarField& F, std::span<const double> x, double step) const {
  auto q = forward(x);
  auto span = std::span<const double>(q);
  double c2 = c_norm2();
  double L2 = L_squared(x);
  double p = p_of(q[2]);
  double pp = p_prime_of(q[2]);
  double fbb = fd::second_partial(F, span, 0, step);
  double fg = fd::partial(F, span, 1, step);
  double fgg = fd::second_partial(F, span, 1, step);
  double fe = fd::partial(F, span, 2, step);
  double fee = fd::second_partial(F, span, 2, step);
  // c^2 [F_bb + L^2 F_gg - 2 F_g] + (p/L^2)(p F_ee + p' F_e); d(L^2)/d gamma = -2.
  return c2 * (fbb + L2 * fgg - 2.0 * fg) + (p / L2) * (p * fee + pp * fe);
}

std::string Chart3D::eta_desc() const {
  switch (eta_variant) {
    case 1: return "eta = L1/L2";
    case 2: return "eta = L1/L3";
    default: return "eta = L2/L3";
  }
}

double eta_gradient_parallel_2d(const Chart2D& chart, double x, double y, double step) {
  auto eta_fn = [&chart](std::span<const double> q) {
    auto [L1, L2] = chart.vector_field(q[0], q[1]);
    return L1 / L2;
  };
  std::array<double, 2> q{x, y};
  auto [L1, L2] = chart.vector_field(x, y);
  double worst = 0.0;
  for (int ax = 0; ax < 2; ++ax) {
    double num = fd::partial_richardson(eta_fn, std::span<const double>(q), ax, step);
    double closed = chart.c / (L2 * L2) * (ax == 0 ? L1 : L2);
    worst = std::max(worst, std::fabs(num - closed));
  }
  return worst;
}

double eta_gradient_parallel_3d(const Chart3D& chart, std::span<const double> x, double step) {
  auto eta_fn = [&chart](std::span<const double> q) {
    return chart.eta_numerator(q) / chart.eta_denominator(q);
  };
  auto closed = chart.grad_eta(x);
  double worst = 0.0;
  for (int ax = 0; ax < 3; ++ax) {
    double num = fd::partial_richardson(eta_fn, x, ax, step);
    worst = std::max(worst, std::fabs(num - closed[static_cast<std::size_t>(ax)]));
  }
  return worst;
}

double alpha_gradient_parallel(const IntertwinerParams& p, int i, std::span<const double> x,
                               double step) {
  if (p.n != 3) throw invalid_params("alpha parallelism check is implemented for n = 3");
  if (i < 0 || i >= 3) throw invalid_params("alpha index out of range");
  auto alpha_fn = [&p, i](std::span<const double> q) {
    double ra = 0.0;
    for (int k = 0; k < 3; ++k)
      ra += q[static_cast<std::size_t>(k)] * p.a[static_cast<std::size_t>(k)];
    return vector_field(p, q)[static_cast<std::size_t>(i)] / ra;
  };
  std::vector<double> g = fd::gradient(alpha_fn, x, step);
  std::vector<double> L = vector_field(p, x);
  std::array<double, 3> cr = cross({g[0], g[1], g[2]}, {L[0], L[1], L[2]});
  double gn = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
  double Ln = std::sqrt(L[0] * L[0] + L[1] * L[1] + L[2] * L[2]);
  double cn = std::sqrt(cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]);
  return cn / (gn * Ln);
}

}  // namespace isospec
