#include "isospec/integrability.hpp"

#include <cmath>

namespace isospec {

namespace {

double cyc(const std::vector<std::vector<double>>& c, const std::vector<double>& w,
           int j, int k, int l) {
  // w_j c_kl + w_k c_lj + w_l c_jk
  auto J = static_cast<std::size_t>(j), K = static_cast<std::size_t>(k), L = static_cast<std::size_t>(l);
  return w[J] * c[K][L] + w[K] * c[L][J] + w[L] * c[J][K];
}

std::string triple_id(int j, int k, int l) {
  return std::to_string(j + 1) + std::to_string(k + 1) + std::to_string(l + 1);
}

void push(ConstraintReport& r, std::string id, double value) {
  bool ok = std::fabs(value) <= constraint_tolerance;
  r.constraints.push_back({std::move(id), value, ok});
  r.all_satisfied = r.all_satisfied && ok;
}

// Rows of the n = 4 translation-constraint matrix: a . c_(j) = 0 collects
// the four conditions a_[j c_kl] = 0.
std::vector<std::vector<double>> n4_rows(const std::vector<std::vector<double>>& c) {
  return {
      {0.0, c[2][3], -c[1][3], c[1][2]},
      {c[2][3], 0.0, -c[0][3], c[0][2]},
      {c[1][3], -c[0][3], 0.0, c[0][1]},
      {c[1][2], -c[0][2], c[0][1], 0.0},
  };
}

double pfaffian_4(const std::vector<std::vector<double>>& c, int p, int q, int r, int s) {
  auto P = static_cast<std::size_t>(p), Q = static_cast<std::size_t>(q),
       R = static_cast<std::size_t>(r), S = static_cast<std::size_t>(s);
  return c[P][Q] * c[R][S] - c[P][R] * c[Q][S] + c[P][S] * c[Q][R];
}

// Nullspace of a small dense matrix by Gaussian elimination with full
// pivoting, followed by Gram-Schmidt orthonormalization.
std::vector<std::vector<double>> nullspace(std::vector<std::vector<double>> m, double rel_tol) {
  const std::size_t rows = m.size();
  const std::size_t cols = rows ? m[0].size() : 0;
  std::vector<std::size_t> colperm(cols);
  for (std::size_t i = 0; i < cols; ++i) colperm[i] = i;

  double scale = 0.0;
  for (const auto& row : m)
    for (double v : row) scale = std::max(scale, std::fabs(v));
  const double tol = rel_tol * std::max(scale, 1.0);

  std::size_t rank = 0;
  for (; rank < std::min(rows, cols); ++rank) {
    std::size_t pr = rank, pc = rank;
    double best = 0.0;
    for (std::size_t i = rank; i < rows; ++i)
      for (std::size_t j = rank; j < cols; ++j)
        if (std::fabs(m[i][j]) > best) best = std::fabs(m[i][j]), pr = i, pc = j;
    if (best <= tol) break;
    std::swap(m[rank], m[pr]);
    for (auto& row : m) std::swap(row[rank], row[pc]);
    std::swap(colperm[rank], colperm[pc]);
    for (std::size_t i = rank + 1; i < rows; ++i) {
      double f = m[i][rank] / m[rank][rank];
      for (std::size_t j = rank; j < cols; ++j) m[i][j] -= f * m[rank][j];
    }
  }

  // Back substitution: one basis vector per free (permuted) column.
  std::vector<std::vector<double>> basis;
  for (std::size_t free = rank; free < cols; ++free) {
    std::vector<double> y(cols, 0.0);  // solution in permuted coordinates
    y[free] = 1.0;
    for (std::size_t i = rank; i-- > 0;) {
      double s = 0.0;
      for (std::size_t j = i + 1; j < cols; ++j) s += m[i][j] * y[j];
      y[i] = -s / m[i][i];
    }
    std::vector<double> v(cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j) v[colperm[j]] = y[j];
    basis.push_back(std::move(v));
  }

  // Modified Gram-Schmidt.
  for (std::size_t i = 0; i < basis.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < cols; ++k) dot += basis[i][k] * basis[j][k];
      for (std::size_t k = 0; k < cols; ++k) basis[i][k] -= dot * basis[j][k];
    }
    double norm = 0.0;
    for (double v : basis[i]) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : basis[i]) v /= norm;
  }
  return basis;
}

}  // namespace

ConstraintReport check_pfaffian_conditions(const IntertwinerParams& p) {
  ConstraintReport report;
  report.n = p.n;
  if (p.n <= 2) {
    report.note = "conditions vanish identically for n <= 2";
    report.free_parameters = p.n == 2 ? 3 : 1;
    return report;
  }
  for (int j = 0; j < p.n; ++j)
    for (int k = j + 1; k < p.n; ++k)
      for (int l = k + 1; l < p.n; ++l)
        push(report, "a(" + triple_id(j, k, l) + ")", cyc(p.c, p.a, j, k, l));
  for (int m = 0; m < p.n; ++m) {
    auto mu = static_cast<std::size_t>(m);
    for (int j = 0; j < p.n; ++j)
      for (int k = j + 1; k < p.n; ++k)
        for (int l = k + 1; l < p.n; ++l) {
          if (m == j || m == k || m == l) continue;  // holds identically
          push(report, "c" + std::to_string(m + 1) + "(" + triple_id(j, k, l) + ")",
               cyc(p.c, p.c[mu], j, k, l));
        }
  }
  if (p.n == 3) {
    report.note = "single condition a.c = 0 with c = (c23, c31, c12)";
    if (report.all_satisfied) report.free_parameters = 5;
  }
  return report;
}

ConstraintReport check_n4(const IntertwinerParams& p) {
  if (p.n != 4) throw invalid_params("check_n4 requires n = 4");
  ConstraintReport report;
  report.n = 4;
  push(report, "pfaffian", pfaffian_4(p.c, 0, 1, 2, 3));
  auto rows = n4_rows(p.c);
  for (int j = 0; j < 4; ++j) {
    double dot = 0.0;
    for (int k = 0; k < 4; ++k)
      dot += p.a[static_cast<std::size_t>(k)] * rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
    push(report, "a.c_(" + std::to_string(j + 1) + ")", dot);
  }
  report.rank = 4 - static_cast<int>(nullspace(rows, 1e-10).size());
  if (report.all_satisfied) report.free_parameters = 7;  // five c's and two a's
  return report;
}

std::vector<std::vector<double>> solve_n4_translations(const std::vector<std::vector<double>>& c) {
  if (c.size() != 4 || c[0].size() != 4)
    throw invalid_params("solve_n4_translations expects a 4 x 4 rotation matrix");
  double pf = pfaffian_4(c, 0, 1, 2, 3);
  double scale = 0.0;
  for (const auto& row : c)
    for (double v : row) scale = std::max(scale, std::fabs(v));
  if (std::fabs(pf) > 1e-10 * std::max(1.0, scale * scale))
    throw invalid_params("rotation matrix violates the n = 4 Pfaffian relation; run check_n4");
  return nullspace(n4_rows(c), 1e-10);
}

ConstraintReport check_n5(const IntertwinerParams& p) {
  if (p.n != 5) throw invalid_params("check_n5 requires n = 5");
  ConstraintReport report;
  report.n = 5;
  // No translation part survives in five dimensions: every a_j must vanish.
  for (int j = 0; j < 5; ++j)
    push(report, "a" + std::to_string(j + 1) + " = 0", p.a[static_cast<std::size_t>(j)]);
  // One Pfaffian relation per 4-index subset; the relations with a repeated
  // index hold identically and are omitted.
  for (int skip = 0; skip < 5; ++skip) {
    std::vector<int> idx;
    for (int i = 0; i < 5; ++i)
      if (i != skip) idx.push_back(i);
    std::string id = "pfaffian(";
    for (int i : idx) id += std::to_string(i + 1);
    id += ")";
    push(report, id, pfaffian_4(p.c, idx[0], idx[1], idx[2], idx[3]));
  }
  if (report.all_satisfied) report.free_parameters = 5;  // 10 rotations minus 5 relations
  return report;
}

double pfaffian_identity_residual(const IntertwinerParams& p, std::span<const double> x) {
  double worst = 0.0;
  for (int j = 0; j < p.n; ++j)
    for (int k = j + 1; k < p.n; ++k)
      for (int l = k + 1; l < p.n; ++l) {
        double lhs = cyc(p.c, p.a, j, k, l);
        double rhs = 0.0;
        for (int m = 0; m < p.n; ++m)
          rhs += x[static_cast<std::size_t>(m)] * cyc(p.c, p.c[static_cast<std::size_t>(m)], j, k, l);
        worst = std::max(worst, std::fabs(lhs - rhs));
      }
  return worst;
}

double rotation_consistency_residual(const IntertwinerParams& p, std::span<const double> x) {
  std::vector<double> L = vector_field(p, x);
  double worst = 0.0;
  for (int j = 0; j < p.n; ++j)
    for (int k = j + 1; k < p.n; ++k)
      for (int l = k + 1; l < p.n; ++l) worst = std::max(worst, std::fabs(cyc(p.c, L, j, k, l)));
  return worst;
}

Table1Preset preset_table1(int row) {
  auto make = [](int r, const char* constraints, const char* beta, const char* gamma2,
                 const char* eta, int variant, std::array<double, 3> a,
                 std::array<double, 3> cvec) {
    Table1Preset preset;
    preset.row = r;
    preset.constraints = constraints;
    preset.beta_desc = beta;
    preset.gamma2_desc = gamma2;
    preset.eta_desc = eta;
    preset.eta_variant = variant;
    preset.params = IntertwinerParams::from_dual_3d(a, cvec);
    return preset;
  };
  switch (row) {
    case 1:
      return make(1, "a1 = 0, a2 c2 + a3 c3 = 0", "r.c",
                  "2 r.(a x c) + (r.c)^2 - c^2 r^2",
                  "(c3 y - c2 z)/(a2 - c3 x + c1 z)", 1, {0, 1, 1}, {0.5, 1, -1});
    case 2:
      return make(2, "a2 = 0, a1 c1 + a3 c3 = 0", "r.c",
                  "2 r.(a x c) + (r.c)^2 - c^2 r^2",
                  "(a1 + c3 y - c2 z)/(c1 z - c3 x)", 1, {1, 0, 1}, {1, 0.5, -1});
    case 3:
      return make(3, "a3 = 0, a1 c1 + a2 c2 = 0", "r.c",
                  "2 r.(a x c) + (r.c)^2 - c^2 r^2",
                  "(a1 + c3 y - c2 z)/(a2 - c3 x + c1 z)", 1, {1, 1, 0}, {1, -1, 0.5});
    case 4:
      return make(4, "a1 = a2 = 0, c3 = 0", "c1 x + c2 y",
                  "2 a3 (c1 y - c2 x) + (c1 x + c2 y)^2 - (c1^2 + c2^2) r^2",
                  "-c2 z/(a3 + c2 x - c1 y)", 2, {0, 0, 1}, {0.7, 1, 0});
    case 5:
      return make(5, "a1 = a3 = 0, c2 = 0", "c1 x + c3 z",
                  "2 a2 (c3 x - c1 z) + (c1 x + c3 z)^2 - (c1^2 + c3^2) r^2",
                  "c3 y/(a2 - c3 x + c1 z)", 1, {0, 1, 0}, {0.6, 0, 1});
    case 6:
      return make(6, "a2 = a3 = 0, c1 = 0", "c2 y + c3 z",
                  "2 a1 (c2 z - c3 y) + (c2 y + c3 z)^2 - (c2^2 + c3^2) r^2",
                  "(a1 + c3 y - c2 z)/(-c3 x)", 1, {1, 0, 0}, {0, 0.8, 1});
    case 7:
      return make(7, "a1 = 0, c2 = c3 = 0", "c1 x",
                  "2 c1 (a2 y - a3 z) - c1^2 (y^2 + z^2)",
                  "(a2 + c1 z)/(a3 - c1 y)", 3, {0, 1, 1}, {1, 0, 0});
    case 8:
      return make(8, "a2 = 0, c1 = c3 = 0", "c2 y",
                  "2 c2 (a1 z - a3 x) - c2^2 (x^2 + z^2)",
                  "(a1 - c2 z)/(a3 + c2 x)", 2, {1, 0, 1}, {0, 1, 0});
    case 9:
      return make(9, "a3 = 0, c1 = c2 = 0", "c3 z",
                  "2 c3 (a2 x - a1 y) - c3^2 (x^2 + y^2)",
                  "(a1 + c3 y)/(a2 - c3 x)", 1, {1, 1, 0}, {0, 0, 1});
    case 10:
      return make(10, "a = 0", "r.c", "(r.c)^2 - c^2 r^2",
                  "(c3 y - c2 z)/(c1 z - c3 x)", 1, {0, 0, 0}, {0.3, 0.4, 1});
    default:
      throw invalid_params("preset row must be 1..10");
  }
}

}  // namespace isospec
