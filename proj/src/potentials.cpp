#include "isospec/potentials.hpp"

#include <array>
#include <cmath>
#include <random>
#include <set>

#include "isospec/fd.hpp"
#include "isospec/integrability.hpp"

namespace isospec {

namespace {

std::vector<std::string> cartesian_names(int n) {
  std::vector<std::string> names;
  for (int i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

void require_vars(const Expr& e, const std::set<std::string>& allowed, const std::string& what) {
  for (const auto& v : e.variables())
    if (!allowed.count(v))
      throw invalid_params(what + " uses unknown variable '" + v + "'");
}

double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

// g entering the shifted and translational families must be constant along
// a; checked with the exact symbolic gradient at scattered points.
void require_transverse(const Expr& g, const std::vector<double>& a, int n,
                        const std::string& what) {
  auto names = cartesian_names(n);
  require_vars(g, std::set<std::string>(names.begin(), names.end()), what);
  std::vector<CompiledExpr> grads;
  for (int k = 0; k < n; ++k) grads.push_back(g.derivative(names[static_cast<std::size_t>(k)]).compile(names));
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int trial = 0; trial < 40; ++trial) {
    for (double& v : x) v = u(rng);
    double along = 0.0;
    for (int k = 0; k < n; ++k) along += a[static_cast<std::size_t>(k)] * grads[static_cast<std::size_t>(k)](x);
    if (std::fabs(along) > 1e-8)
      throw invalid_params(what + " must be constant along a (a.grad g != 0)");
  }
}

void wrap_singular(ScalarField& f, std::function<bool(std::span<const double>)> extra) {
  if (!f.singular) {
    f.singular = std::move(extra);
    return;
  }
  auto prev = f.singular;
  f.singular = [prev, extra](std::span<const double> x) { return prev(x) || extra(x); };
}

void add_singular(PotentialPair& pair, std::function<bool(std::span<const double>)> pred) {
  wrap_singular(pair.V0, pred);
  wrap_singular(pair.V1, pred);
  wrap_singular(pair.L0, pred);
  wrap_singular(pair.P, pred);
}

}  // namespace

PotentialPair build_1d_pair(const Expr& L0_expr, double b) {
  require_vars(L0_expr, {"x"}, "L0");
  std::vector<std::string> vars{"x"};
  auto f = L0_expr.compile(vars);
  auto fp = L0_expr.derivative("x").compile(vars);
  auto fpp = L0_expr.derivative("x").derivative("x").compile(vars);

  PotentialPair pair;
  pair.params = IntertwinerParams(1, {1.0}, {{0.0}});
  pair.family = "line";
  pair.chart = "x";
  pair.f_source = L0_expr.str();
  pair.box_lo = {-3.0};
  pair.box_hi = {3.0};

  pair.L0.value = [f](std::span<const double> x) { return f(x); };
  pair.L0.gradient = [fp](std::span<const double> x) { return std::vector<double>{fp(x)}; };
  pair.P.value = [fp](std::span<const double> x) { return 2.0 * fp(x); };
  pair.P.gradient = [fpp](std::span<const double> x) { return std::vector<double>{2.0 * fpp(x)}; };
  pair.V0.value = [f, fp, b](std::span<const double> x) {
    double v = f(x);
    return v * v - fp(x) + b;
  };
  pair.V1.value = [f, fp, b](std::span<const double> x) {
    double v = f(x);
    return v * v + fp(x) + b;
  };
  pair.V0.gradient = [f, fp, fpp](std::span<const double> x) {
    return std::vector<double>{2.0 * f(x) * fp(x) - fpp(x)};
  };
  pair.V1.gradient = [f, fp, fpp](std::span<const double> x) {
    return std::vector<double>{2.0 * f(x) * fp(x) + fpp(x)};
  };
  return pair;
}

PotentialPair build_constant_shift(const std::vector<double>& a, double p0,
                                   const std::vector<double>& b, const Expr& g) {
  const int n = static_cast<int>(a.size());
  if (n < 1) throw invalid_params("translation vector a must be non-empty");
  if (b.size() != a.size()) throw invalid_params("shift vector b must match the dimension of a");
  if (p0 == 0.0) throw invalid_params("p0 = 0 gives V1 = V0; the shifted family needs p0 != 0");
  require_transverse(g, a, n, "g");

  auto names = cartesian_names(n);
  auto gc = g.compile(names);
  std::vector<CompiledExpr> ggrad;
  for (int k = 0; k < n; ++k) ggrad.push_back(g.derivative(names[static_cast<std::size_t>(k)]).compile(names));

  double ab = dot(a, b);

  PotentialPair pair;
  pair.params = IntertwinerParams(
      n, a, std::vector<std::vector<double>>(static_cast<std::size_t>(n),
                                             std::vector<double>(static_cast<std::size_t>(n), 0.0)));
  pair.family = "shifted";
  pair.chart = "cartesian";
  pair.h_source = g.str();
  pair.box_lo.assign(static_cast<std::size_t>(n), -2.0);
  pair.box_hi.assign(static_cast<std::size_t>(n), 2.0);

  std::vector<double> av = a, bv = b;
  pair.L0.value = [av, p0, ab](std::span<const double> x) { return 0.5 * p0 * dot(av, x) + ab; };
  pair.L0.gradient = [av, p0](std::span<const double> x) {
    (void)x;
    std::vector<double> out(av.size());
    for (std::size_t m = 0; m < av.size(); ++m) out[m] = 0.5 * p0 * av[m];
    return out;
  };
  pair.P = constant_field(p0);
  auto base = [p0, bv, gc](std::span<const double> x) {
    double r2 = dot(x, x);
    return 0.25 * p0 * p0 * r2 + p0 * dot(bv, x) + gc(x);
  };
  pair.V0.value = base;
  pair.V1.value = [base, p0](std::span<const double> x) { return base(x) + p0; };
  auto base_grad = [p0, bv, ggrad](std::span<const double> x) {
    std::vector<double> out(x.size());
    for (std::size_t m = 0; m < x.size(); ++m)
      out[m] = 0.5 * p0 * p0 * x[m] + p0 * bv[m] + ggrad[m](x);
    return out;
  };
  pair.V0.gradient = base_grad;
  pair.V1.gradient = base_grad;
  return pair;
}

PotentialPair build_translational(const std::vector<double>& a, const Expr& f_expr,
                                  const Expr& g) {
  const int n = static_cast<int>(a.size());
  if (n < 1) throw invalid_params("translation vector a must be non-empty");
  double a2 = dot(a, a);
  if (a2 == 0.0) throw invalid_params("translational family requires a != 0");
  require_vars(f_expr, {"zeta"}, "f");
  require_transverse(g, a, n, "g");

  std::vector<std::string> zv{"zeta"};
  auto f = f_expr.compile(zv);
  auto fp = f_expr.derivative("zeta").compile(zv);
  auto fpp = f_expr.derivative("zeta").derivative("zeta").compile(zv);
  auto names = cartesian_names(n);
  auto gc = g.compile(names);
  std::vector<CompiledExpr> ggrad;
  for (int k = 0; k < n; ++k) ggrad.push_back(g.derivative(names[static_cast<std::size_t>(k)]).compile(names));

  PotentialPair pair;
  pair.params = IntertwinerParams(
      n, a, std::vector<std::vector<double>>(static_cast<std::size_t>(n),
                                             std::vector<double>(static_cast<std::size_t>(n), 0.0)));
  pair.family = "translational";
  pair.chart = "zeta = a.r/2";
  pair.f_source = f_expr.str();
  pair.h_source = g.str();
  pair.box_lo.assign(static_cast<std::size_t>(n), -2.0);
  pair.box_hi.assign(static_cast<std::size_t>(n), 2.0);

  std::vector<double> av = a;
  auto zeta = [av](std::span<const double> x) { return 0.5 * dot(av, x); };

  pair.L0.value = [f, zeta](std::span<const double> x) {
    double z = zeta(x);
    return f(std::span<const double>(&z, 1));
  };
  pair.L0.gradient = [fp, zeta, av](std::span<const double> x) {
    double z = zeta(x);
    double d = fp(std::span<const double>(&z, 1));
    std::vector<double> out(av.size());
    for (std::size_t m = 0; m < av.size(); ++m) out[m] = 0.5 * d * av[m];
    return out;
  };
  pair.P.value = [fp, zeta](std::span<const double> x) {
    double z = zeta(x);
    return fp(std::span<const double>(&z, 1));
  };
  pair.P.gradient = [fpp, zeta, av](std::span<const double> x) {
    double z = zeta(x);
    double d = fpp(std::span<const double>(&z, 1));
    std::vector<double> out(av.size());
    for (std::size_t m = 0; m < av.size(); ++m) out[m] = 0.5 * d * av[m];
    return out;
  };
  auto make_v = [f, fp, gc, zeta, a2](double sign) {
    return [f, fp, gc, zeta, a2, sign](std::span<const double> x) {
      double z = zeta(x);
      std::span<const double> zs(&z, 1);
      double fv = f(zs);
      return 0.5 * gc(x) + fv * fv / a2 + sign * 0.5 * fp(zs);
    };
  };
  pair.V0.value = make_v(-1.0);
  pair.V1.value = make_v(+1.0);
  auto make_vgrad = [f, fp, fpp, ggrad, zeta, a2, av](double sign) {
    return [f, fp, fpp, ggrad, zeta, a2, av, sign](std::span<const double> x) {
      double z = zeta(x);
      std::span<const double> zs(&z, 1);
      double dz = 2.0 * f(zs) * fp(zs) / a2 + sign * 0.5 * fpp(zs);
      std::vector<double> out(x.size());
      for (std::size_t m = 0; m < x.size(); ++m)
        out[m] = 0.5 * ggrad[m](x) + 0.5 * dz * av[m];
      return out;
    };
  };
  pair.V0.gradient = make_vgrad(-1.0);
  pair.V1.gradient = make_vgrad(+1.0);
  return pair;
}

namespace {

// Shared state for the generic eta = L_i/L_j family.
struct RatioCtx {
  IntertwinerParams par;
  int i, j;
  double cij;
  CompiledExpr f, fp, fpp;
  bool has_h = false;
  ScalarField h;

  std::vector<double> L(std::span<const double> x) const { return vector_field(par, x); }

  double Lj(std::span<const double> x) const {
    return L(x)[static_cast<std::size_t>(j)];
  }

  double eta(std::span<const double> x) const {
    auto l = L(x);
    return l[static_cast<std::size_t>(i)] / l[static_cast<std::size_t>(j)];
  }

  bool is_singular(std::span<const double> x) const {
    auto l = L(x);
    double l2 = dot(l, l);
    return std::fabs(l[static_cast<std::size_t>(j)]) <= singular_guard ||
           l2 <= singular_guard * singular_guard;
  }

  // grad eta = (c_ij / L_j^2) L
  std::vector<double> grad_eta(std::span<const double> x) const {
    auto l = L(x);
    double lj = l[static_cast<std::size_t>(j)];
    double s = cij / (lj * lj);
    std::vector<double> out(l.size());
    for (std::size_t m = 0; m < l.size(); ++m) out[m] = s * l[m];
    return out;
  }

  double f1(double e) const { return f(std::span<const double>(&e, 1)); }
  double fp1(double e) const { return fp(std::span<const double>(&e, 1)); }
  double fpp1(double e) const { return fpp(std::span<const double>(&e, 1)); }
};

}  // namespace

PotentialPair build_general_pair(const IntertwinerParams& p, int i, int j, const Expr& f_expr,
                                 const ScalarField* h, const std::string& h_desc) {
  if (i < 0 || i >= p.n || j < 0 || j >= p.n || i == j)
    throw invalid_params("eta ratio needs two distinct component indices");
  double cij = p.c[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  if (cij == 0.0)
    throw invalid_params("eta = L_i/L_j requires c_ij != 0 for the chosen pair");
  ConstraintReport admissible = check_pfaffian_conditions(p);
  if (!admissible.all_satisfied)
    throw invalid_params("parameters violate the integrability conditions");
  require_vars(f_expr, {"eta"}, "f");

  auto ctx = std::make_shared<RatioCtx>();
  ctx->par = p;
  ctx->i = i;
  ctx->j = j;
  ctx->cij = cij;
  std::vector<std::string> ev{"eta"};
  ctx->f = f_expr.compile(ev);
  ctx->fp = f_expr.derivative("eta").compile(ev);
  ctx->fpp = f_expr.derivative("eta").derivative("eta").compile(ev);
  if (h) {
    ctx->has_h = true;
    ctx->h = *h;
    // h must be a flow invariant of L.
    std::mt19937_64 rng(991);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> x(static_cast<std::size_t>(p.n));
    int accepted = 0;
    for (int trial = 0; trial < 4000 && accepted < 50; ++trial) {
      for (double& v : x) v = u(rng);
      if (ctx->is_singular(x) || ctx->h.is_singular(x)) continue;
      double along;
      try {
        along = apply_ld(p, ctx->h, x);
      } catch (const std::runtime_error&) {
        continue;
      }
      ++accepted;
      if (std::fabs(along) > 1e-8)
        throw invalid_params("h must satisfy L.grad h = 0");
    }
    if (accepted == 0) throw invalid_params("could not sample h away from singular loci");
  }

  PotentialPair pair;
  pair.params = p;
  pair.family = "ratio";
  pair.chart = "eta = L" + std::to_string(i + 1) + "/L" + std::to_string(j + 1);
  pair.f_source = f_expr.str();
  pair.h_source = h_desc;
  pair.singular_desc = "L" + std::to_string(j + 1) + " = 0 and |L| = 0";
  pair.box_lo.assign(static_cast<std::size_t>(p.n), -2.0);
  pair.box_hi.assign(static_cast<std::size_t>(p.n), 2.0);

  auto singular = [ctx](std::span<const double> x) { return ctx->is_singular(x); };

  pair.L0.value = [ctx](std::span<const double> x) { return ctx->f1(ctx->eta(x)); };
  pair.L0.singular = singular;
  pair.L0.gradient = [ctx](std::span<const double> x) {
    double d = ctx->fp1(ctx->eta(x));
    auto ge = ctx->grad_eta(x);
    for (double& v : ge) v *= d;
    return ge;
  };

  pair.P.value = [ctx](std::span<const double> x) {
    double lj = ctx->Lj(x);
    return 2.0 * ctx->cij / (lj * lj) * ctx->fp1(ctx->eta(x));
  };
  pair.P.singular = singular;
  pair.P.gradient = [ctx](std::span<const double> x) {
    auto l = ctx->L(x);
    double lj = l[static_cast<std::size_t>(ctx->j)];
    double e = ctx->eta(x);
    auto ge = ctx->grad_eta(x);
    std::vector<double> out(l.size());
    for (std::size_t m = 0; m < l.size(); ++m) {
      double dlj = ctx->par.c[static_cast<std::size_t>(ctx->j)][m];
      out[m] = 2.0 * ctx->cij *
               (ctx->fpp1(e) * ge[m] / (lj * lj) - 2.0 * ctx->fp1(e) * dlj / (lj * lj * lj));
    }
    return out;
  };

  auto make_v = [ctx](double sign) {
    ScalarField out;
    out.value = [ctx, sign](std::span<const double> x) {
      auto l = ctx->L(x);
      double l2 = dot(l, l);
      double lj = l[static_cast<std::size_t>(ctx->j)];
      double e = l[static_cast<std::size_t>(ctx->i)] / lj;
      double fv = ctx->f1(e);
      double vpm = fv * fv + sign * ctx->cij * (l2 / (lj * lj)) * ctx->fp1(e);
      double hv = ctx->has_h ? ctx->h(x) : 0.0;
      return 0.5 * hv + vpm / l2;
    };
    out.singular = [ctx](std::span<const double> x) {
      return ctx->is_singular(x) || (ctx->has_h && ctx->h.is_singular(x));
    };
    bool exact_h = !ctx->has_h || static_cast<bool>(ctx->h.gradient);
    if (exact_h) {
      out.gradient = [ctx, sign](std::span<const double> x) {
        auto l = ctx->L(x);
        double l2 = dot(l, l);
        double lj = l[static_cast<std::size_t>(ctx->j)];
        double e = l[static_cast<std::size_t>(ctx->i)] / lj;
        double fv = ctx->f1(e), fpv = ctx->fp1(e), fppv = ctx->fpp1(e);
        auto ge = ctx->grad_eta(x);
        double q = l2 / (lj * lj);
        double vpm = fv * fv + sign * ctx->cij * q * fpv;
        std::vector<double> out_g(l.size());
        for (std::size_t m = 0; m < l.size(); ++m) {
          double dl2 = 0.0;  // d_m L^2 = 2 sum_k L_k c_km
          for (std::size_t k = 0; k < l.size(); ++k) dl2 += 2.0 * l[k] * ctx->par.c[k][m];
          double dlj = ctx->par.c[static_cast<std::size_t>(ctx->j)][m];
          double dq = dl2 / (lj * lj) - 2.0 * l2 * dlj / (lj * lj * lj);
          double dvpm = 2.0 * fv * fpv * ge[m] +
                        sign * ctx->cij * (dq * fpv + q * fppv * ge[m]);
          double dh = 0.0;
          if (ctx->has_h) dh = ctx->h.gradient(x)[m];
          out_g[m] = 0.5 * dh + (dvpm * l2 - vpm * dl2) / (l2 * l2);
        }
        return out_g;
      };
    }
    return out;
  };
  pair.V0 = make_v(-1.0);
  pair.V1 = make_v(+1.0);
  return pair;
}

PotentialPair build_2d_pair(double a1, double a2, double c, const Expr& f_expr,
                            const std::optional<Expr>& h_of_kappa) {
  if (c == 0.0) throw invalid_params("planar family requires c != 0");
  require_vars(f_expr, {"eta"}, "f");

  std::vector<std::string> ev{"eta"};
  auto f = f_expr.compile(ev);
  auto fp = f_expr.derivative("eta").compile(ev);
  auto fpp = f_expr.derivative("eta").derivative("eta").compile(ev);

  bool has_h = h_of_kappa.has_value();
  CompiledExpr h, hp;
  if (has_h) {
    require_vars(*h_of_kappa, {"kappa"}, "h");
    std::vector<std::string> kv{"kappa"};
    h = h_of_kappa->compile(kv);
    hp = h_of_kappa->derivative("kappa").compile(kv);
  }

  PotentialPair pair;
  pair.params = IntertwinerParams::planar(a1, a2, c);
  pair.family = "planar";
  pair.chart = "eta = L1/L2, kappa = |L|";
  pair.f_source = f_expr.str();
  if (has_h) pair.h_source = h_of_kappa->str();
  pair.singular_desc = "kappa = 0 and the L2 = 0 locus";
  pair.box_lo = {-2.0, -2.0};
  pair.box_hi = {2.0, 2.0};

  auto L12 = [a1, a2, c](std::span<const double> x) {
    return std::array<double, 2>{a1 + c * x[1], a2 - c * x[0]};
  };
  auto singular = [L12](std::span<const double> x) {
    auto [l1, l2] = L12(x);
    return std::fabs(l2) <= singular_guard ||
           l1 * l1 + l2 * l2 <= singular_guard * singular_guard;
  };

  auto eval1 = [](const CompiledExpr& ce, double v) { return ce(std::span<const double>(&v, 1)); };

  pair.L0.value = [L12, f, eval1](std::span<const double> x) {
    auto [l1, l2] = L12(x);
    return eval1(f, l1 / l2);
  };
  pair.L0.singular = singular;
  pair.L0.gradient = [L12, fp, c, eval1](std::span<const double> x) {
    auto [l1, l2] = L12(x);
    double d = eval1(fp, l1 / l2) * c / (l2 * l2);
    return std::vector<double>{d * l1, d * l2};
  };

  pair.P.value = [L12, fp, c, eval1](std::span<const double> x) {
    auto [l1, l2] = L12(x);
    return 2.0 * c / (l2 * l2) * eval1(fp, l1 / l2);
  };
  pair.P.singular = singular;
  pair.P.gradient = [L12, fp, fpp, c, eval1](std::span<const double> x) {
    auto [l1, l2] = L12(x);
    double e = l1 / l2;
    double ge1 = c / (l2 * l2) * l1, ge2 = c / (l2 * l2) * l2;
    // d_m L2: (-c, 0) for m = (x, y)? L2 = a2 - c x: d_x L2 = -c, d_y L2 = 0.
    double k = 2.0 * c / (l2 * l2);
    double fppv = eval1(fpp, e), fpv = eval1(fp, e);
    double dx = k * (fppv * ge1) - 2.0 * k / l2 * fpv * (-c);
    double dy = k * (fppv * ge2);
    return std::vector<double>{dx, dy};
  };

  auto make_v = [L12, f, fp, fpp, h, hp, has_h, c, eval1](double sign) {
    ScalarField out;
    out.value = [L12, f, fp, h, has_h, c, sign, eval1](std::span<const double> x) {
      auto [l1, l2] = L12(x);
      double k2 = l1 * l1 + l2 * l2;
      double e = l1 / l2;
      double fv = eval1(f, e);
      double vpm = fv * fv + sign * c * (1.0 + e * e) * eval1(fp, e);
      double hv = has_h ? eval1(h, std::sqrt(k2)) : 0.0;
      return 0.5 * hv + vpm / k2;
    };
    out.gradient = [L12, f, fp, fpp, h, hp, has_h, c, sign, eval1](std::span<const double> x) {
      auto [l1, l2] = L12(x);
      double k2 = l1 * l1 + l2 * l2;
      double kappa = std::sqrt(k2);
      double e = l1 / l2;
      double fv = eval1(f, e), fpv = eval1(fp, e), fppv = eval1(fpp, e);
      double vpm = fv * fv + sign * c * (1.0 + e * e) * fpv;
      // grad eta = (c/L2^2)(L1, L2); grad kappa = (-c L2, c L1)/kappa.
      double ge[2] = {c / (l2 * l2) * l1, c / (l2 * l2) * l2};
      double gk[2] = {-c * l2 / kappa, c * l1 / kappa};
      double dvpm_de = 2.0 * fv * fpv + sign * c * (2.0 * e * fpv + (1.0 + e * e) * fppv);
      double hpv = has_h ? eval1(hp, kappa) : 0.0;
      std::vector<double> out_g(2);
      for (int m = 0; m < 2; ++m) {
        double dk2 = 2.0 * kappa * gk[m];
        out_g[static_cast<std::size_t>(m)] =
            0.5 * hpv * gk[m] + (dvpm_de * ge[m] * k2 - vpm * dk2) / (k2 * k2);
      }
      return out_g;
    };
    return out;
  };
  pair.V0 = make_v(-1.0);
  pair.V1 = make_v(+1.0);
  pair.V0.singular = singular;
  pair.V1.singular = singular;
  return pair;
}

Expr solve_riccati_2d(double b, double b1, double c) {
  if (c == 0.0) throw invalid_params("the planar Riccati equation requires c != 0");
  Expr eta = Expr::variable("eta");
  Expr at = atan(eta);
  if (b < 0.0) {
    double k = std::sqrt(-b);
    return Expr::constant(k) * tan(Expr::constant(k / c) * (at - Expr::constant(b1)));
  }
  if (b > 0.0) {
    double k = std::sqrt(b);
    return Expr::constant(k) * tanh(Expr::constant(k / c) * (Expr::constant(b1) - at));
  }
  return Expr::constant(c) / (Expr::constant(b1) - at);
}

PotentialPair free_motion_partners_2d(double b, double b1, double c, double a1, double a2) {
  Expr f = solve_riccati_2d(b, b1, c);
  std::optional<Expr> h;
  if (b != 0.0) {
    // h = -2b/kappa^2 keeps V0 = 0 when V- = b.
    Expr kap = Expr::variable("kappa");
    h = Expr::constant(-2.0 * b) / (kap * kap);
  }
  PotentialPair pair = build_2d_pair(a1, a2, c, f, h);
  pair.family = "planar-free";

  // Branch-specific pole guards on top of the structural loci.
  auto L12 = [a1, a2, c](std::span<const double> x) {
    return std::array<double, 2>{a1 + c * x[1], a2 - c * x[0]};
  };
  if (b == 0.0) {
    auto guard = [L12, b1](std::span<const double> x) {
      auto [l1, l2] = L12(x);
      return std::fabs(b1 - std::atan(l1 / l2)) <= singular_guard;
    };
    add_singular(pair, guard);
    pair.singular_desc += "; pole where atan(eta) = b1";
  } else if (b < 0.0) {
    double k = std::sqrt(-b);
    auto guard = [L12, b1, c, k](std::span<const double> x) {
      auto [l1, l2] = L12(x);
      double u = k / c * (std::atan(l1 / l2) - b1);
      return std::fabs(std::cos(u)) <= singular_guard;
    };
    add_singular(pair, guard);
    pair.singular_desc += "; pole lattice of tan[(sqrt(-b)/c)(atan(eta) - b1)]";
  }
  return pair;
}

namespace {

struct SpatialCtx {
  Chart3D chart;
  CompiledExpr f, fp, fpp;
  bool has_h = false;
  CompiledExpr h, hb, hg;  // h(beta, gamma) and its two partials

  explicit SpatialCtx(Chart3D c) : chart(std::move(c)) {}

  bool is_singular(std::span<const double> x) const {
    double den = chart.eta_denominator(x);
    if (std::fabs(den) <= singular_guard) return true;
    return chart.L_squared(x) <= singular_guard * singular_guard;
  }

  double f1(double e) const { return f(std::span<const double>(&e, 1)); }
  double fp1(double e) const { return fp(std::span<const double>(&e, 1)); }
  double fpp1(double e) const { return fpp(std::span<const double>(&e, 1)); }
};

}  // namespace

PotentialPair build_3d_pair(const IntertwinerParams& p, const Expr& f_expr,
                            const std::optional<Expr>& h_of_beta_gamma, int eta_variant) {
  Chart3D chart(p, eta_variant);
  require_vars(f_expr, {"eta"}, "f");

  auto ctx = std::make_shared<SpatialCtx>(chart);
  std::vector<std::string> ev{"eta"};
  ctx->f = f_expr.compile(ev);
  ctx->fp = f_expr.derivative("eta").compile(ev);
  ctx->fpp = f_expr.derivative("eta").derivative("eta").compile(ev);
  if (h_of_beta_gamma) {
    require_vars(*h_of_beta_gamma, {"beta", "gamma"}, "h");
    ctx->has_h = true;
    std::vector<std::string> bg{"beta", "gamma"};
    ctx->h = h_of_beta_gamma->compile(bg);
    ctx->hb = h_of_beta_gamma->derivative("beta").compile(bg);
    ctx->hg = h_of_beta_gamma->derivative("gamma").compile(bg);
  }

  PotentialPair pair;
  pair.params = p;
  pair.family = "spatial";
  pair.chart = chart.eta_desc();
  pair.f_source = f_expr.str();
  if (h_of_beta_gamma) pair.h_source = h_of_beta_gamma->str();
  pair.singular_desc = "eta denominator = 0 and the |L| = 0 axis";
  pair.box_lo = {-2.0, -2.0, -2.0};
  pair.box_hi = {2.0, 2.0, 2.0};

  auto singular = [ctx](std::span<const double> x) { return ctx->is_singular(x); };

  pair.L0.value = [ctx](std::span<const double> x) { return ctx->f1(ctx->chart.eta(x)); };
  pair.L0.singular = singular;
  pair.L0.gradient = [ctx](std::span<const double> x) {
    auto ge = ctx->chart.grad_eta(x);
    double d = ctx->fp1(ctx->chart.eta(x));
    return std::vector<double>{d * ge[0], d * ge[1], d * ge[2]};
  };

  pair.P.value = [ctx](std::span<const double> x) {
    double den = ctx->chart.eta_denominator(x);
    return 2.0 * ctx->chart.cvar() / (den * den) * ctx->fp1(ctx->chart.eta(x));
  };
  pair.P.singular = singular;
  pair.P.gradient = [ctx](std::span<const double> x) {
    double den = ctx->chart.eta_denominator(x);
    double e = ctx->chart.eta(x);
    auto ge = ctx->chart.grad_eta(x);
    double cv = ctx->chart.cvar();
    // d_m Lden = c[den][m]
    int den_idx = ctx->chart.eta_variant == 1 ? 1 : 2;
    std::vector<double> out(3);
    for (int m = 0; m < 3; ++m) {
      double dden = ctx->chart.params.c[static_cast<std::size_t>(den_idx)][static_cast<std::size_t>(m)];
      out[static_cast<std::size_t>(m)] =
          2.0 * cv * (ctx->fpp1(e) * ge[static_cast<std::size_t>(m)] / (den * den) -
                      2.0 * ctx->fp1(e) * dden / (den * den * den));
    }
    return out;
  };

  auto make_v = [ctx](double sign) {
    ScalarField out;
    out.value = [ctx, sign](std::span<const double> x) {
      double l2 = ctx->chart.L_squared(x);
      double e = ctx->chart.eta(x);
      double fv = ctx->f1(e);
      double vpm = fv * fv + sign * ctx->chart.p_of(e) * ctx->fp1(e);
      double hv = 0.0;
      if (ctx->has_h) {
        auto q = ctx->chart.forward(x);
        hv = ctx->h(std::span<const double>(q.data(), 2));
      }
      return 0.5 * hv + vpm / l2;
    };
    out.singular = [ctx](std::span<const double> x) { return ctx->is_singular(x); };
    out.gradient = [ctx, sign](std::span<const double> x) {
      double l2 = ctx->chart.L_squared(x);
      double e = ctx->chart.eta(x);
      double fv = ctx->f1(e), fpv = ctx->fp1(e), fppv = ctx->fpp1(e);
      double pv = ctx->chart.p_of(e), ppv = ctx->chart.p_prime_of(e);
      auto ge = ctx->chart.grad_eta(x);
      auto gg = ctx->chart.grad_gamma(x);  // grad L^2 = -2 grad gamma
      double vpm = fv * fv + sign * pv * fpv;
      double dvpm_de = 2.0 * fv * fpv + sign * (ppv * fpv + pv * fppv);
      std::vector<double> out_g(3);
      for (int m = 0; m < 3; ++m) {
        auto mu = static_cast<std::size_t>(m);
        double dl2 = -2.0 * gg[mu];
        double dh = 0.0;
        if (ctx->has_h) {
          auto q = ctx->chart.forward(x);
          auto qs = std::span<const double>(q.data(), 2);
          auto gb = ctx->chart.grad_beta();
          dh = ctx->hb(qs) * gb[mu] + ctx->hg(qs) * gg[mu];
        }
        out_g[mu] = 0.5 * dh + (dvpm_de * ge[mu] * l2 - vpm * dl2) / (l2 * l2);
      }
      return out_g;
    };
    return out;
  };
  pair.V0 = make_v(-1.0);
  pair.V1 = make_v(+1.0);
  return pair;
}

PotentialPair free_motion_partners_3d(const IntertwinerParams& p, int kind, double b1,
                                      int eta_variant) {
  Chart3D chart(p, eta_variant);
  double c = std::sqrt(chart.c_norm2());
  Expr eta = Expr::variable("eta");
  Expr pe = chart.p_expr("eta");
  Expr ppe = pe.derivative("eta");

  Expr f;
  std::optional<Expr> h;
  switch (kind) {
    case 1:
      // b = 0 branch of f^2 = p f': the antiderivative of 1/p is
      // atan(p'/2c)/c, so f = 1/(b1 - atan(p'/2c)/c); V0 = 0 needs no h.
      f = Expr::constant(1.0) /
          (Expr::constant(b1) - atan(ppe / Expr::constant(2.0 * c)) / Expr::constant(c));
      break;
    case 2:
      f = Expr::constant(0.5) * ppe;
      break;
    case 3:
      f = Expr::constant(0.5) * ppe + pe / (Expr::constant(b1) - eta);
      break;
    default:
      throw invalid_params("free-motion partner kind must be 1, 2 or 3");
  }
  if (kind != 1) {
    // V- = -c^2 for kinds 2 and 3; h = 2c^2/L^2 = 2c^2/(a^2 - 2 gamma) keeps V0 = 0.
    double a2 = 0.0;
    for (double v : p.a) a2 += v * v;
    h = Expr::constant(2.0 * c * c) /
        (Expr::constant(a2) - Expr::constant(2.0) * Expr::variable("gamma"));
  }

  PotentialPair pair = build_3d_pair(p, f, h, eta_variant);
  pair.family = "spatial-free";

  if (kind == 1) {
    auto chart_copy = std::make_shared<Chart3D>(chart);
    double cc = c;
    double bb1 = b1;
    auto guard = [chart_copy, cc, bb1](std::span<const double> x) {
      double e = chart_copy->eta(x);
      double w = bb1 - std::atan(chart_copy->p_prime_of(e) / (2.0 * cc)) / cc;
      return std::fabs(w) <= singular_guard;
    };
    add_singular(pair, guard);
    pair.singular_desc += "; pole of 1/(b1 - atan(p'/2c)/c)";
  } else if (kind == 3) {
    auto chart_copy = std::make_shared<Chart3D>(chart);
    double bb1 = b1;
    auto guard = [chart_copy, bb1](std::span<const double> x) {
      return std::fabs(bb1 - chart_copy->eta(x)) <= singular_guard;
    };
    add_singular(pair, guard);
    pair.singular_desc += "; pole where eta = b1";
  }
  return pair;
}

PairIdentityReport check_pair_identities(const PotentialPair& pair, int npoints,
                                         std::uint64_t seed) {
  const int n = pair.params.n;
  std::mt19937_64 rng(seed);
  std::vector<std::uniform_real_distribution<double>> axis;
  for (int m = 0; m < n; ++m) {
    auto mu = static_cast<std::size_t>(m);
    double lo = pair.box_lo.size() == static_cast<std::size_t>(n) ? pair.box_lo[mu] : -2.0;
    double hi = pair.box_hi.size() == static_cast<std::size_t>(n) ? pair.box_hi[mu] : 2.0;
    axis.emplace_back(lo, hi);
  }

  PairIdentityReport report;
  std::vector<double> x(static_cast<std::size_t>(n));
  const int max_attempts = 400 * npoints;
  for (int attempt = 0; attempt < max_attempts && report.points_used < npoints; ++attempt) {
    for (int m = 0; m < n; ++m) x[static_cast<std::size_t>(m)] = axis[static_cast<std::size_t>(m)](rng);
    try {
      double v0 = pair.V0(x), v1 = pair.V1(x), l0 = pair.L0(x), pv = pair.P(x);
      // Identities are checked where the fields are moderate; near poles the
      // finite-difference pieces lose the digits the tolerances assume.
      if (std::fabs(v0) > 100.0 || std::fabs(v1) > 100.0 || std::fabs(l0) > 10.0 ||
          std::fabs(pv) > 10.0)
        continue;

      std::vector<double> L = vector_field(pair.params, x);
      std::vector<double> gL0 = pair.L0.grad(x);
      double eq11 = 0.0;
      for (int m = 0; m < n; ++m)
        eq11 = std::max(eq11, std::fabs(2.0 * gL0[static_cast<std::size_t>(m)] -
                                        pv * L[static_cast<std::size_t>(m)]));

      double lap = fd::laplacian_richardson(
          [&pair](std::span<const double> q) { return pair.L0(q); }, x, 2e-3);
      double ldP = apply_ld(pair.params, pair.P, x);
      double eq14 = std::fabs(lap - 0.5 * ldP);

      std::vector<double> g0 = pair.V0.grad(x), g1 = pair.V1.grad(x);
      double ldV = 0.0;
      for (int m = 0; m < n; ++m) {
        auto mu = static_cast<std::size_t>(m);
        ldV += L[mu] * (g0[mu] + g1[mu]);
      }
      double eq15 = std::fabs(l0 * pv - 0.5 * ldV);

      report.grad_residual = std::max(report.grad_residual, eq11);
      report.laplace_residual = std::max(report.laplace_residual, eq14);
      report.product_residual = std::max(report.product_residual, eq15);
      ++report.points_used;
    } catch (const std::runtime_error&) {
      continue;  // singular or out-of-domain draw
    }
  }
  if (report.points_used < npoints)
    throw solver_error("could not sample enough non-singular points in the pair's box");
  return report;
}

double rotation_covariance_residual(const PotentialPair& pair, std::span<const double> x) {
  std::vector<double> L = vector_field(pair.params, x);
  std::vector<double> gp = pair.P.grad(x);
  double pv = pair.P(x);
  double cmax = 0.0;
  for (const auto& row : pair.params.c)
    for (double v : row) cmax = std::max(cmax, std::fabs(v));
  double worst = 0.0;
  for (int jj = 0; jj < pair.params.n; ++jj)
    for (int kk = jj + 1; kk < pair.params.n; ++kk) {
      auto J = static_cast<std::size_t>(jj), K = static_cast<std::size_t>(kk);
      double kjk = L[J] * gp[K] - L[K] * gp[J];
      worst = std::max(worst, std::fabs(kjk + 2.0 * pair.params.c[J][K] * pv));
    }
  return worst / std::max(1.0, cmax * std::fabs(pv));
}

}  // namespace isospec
