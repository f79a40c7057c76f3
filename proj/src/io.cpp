#include "isospec/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace isospec {

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

// NaN (e.g. the last level's deleted eigenvalue) serializes as null.
nlohmann::json num_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace

void to_json(nlohmann::json& j, const Constraint& c) {
  j = {{"id", c.id}, {"value", c.value}, {"satisfied", c.satisfied}};
}

void to_json(nlohmann::json& j, const ConstraintReport& r) {
  j = {{"n", r.n},
       {"constraints", r.constraints},
       {"all_satisfied", r.all_satisfied},
       {"free_parameters", r.free_parameters},
       {"rank", r.rank},
       {"note", r.note}};
}

void to_json(nlohmann::json& j, const CommutatorEntry& e) {
  j = {{"lhs", e.lhs}, {"rhs", e.rhs}, {"residual", e.residual}};
}

void to_json(nlohmann::json& j, const CommutatorReport& r) {
  j = {{"n", r.n}, {"max_residual", r.max_residual}, {"entries", r.entries}};
}

void to_json(nlohmann::json& j, const PairIdentityReport& r) {
  j = {{"grad_residual", r.grad_residual},
       {"laplace_residual", r.laplace_residual},
       {"product_residual", r.product_residual},
       {"points_used", r.points_used}};
}

void to_json(nlohmann::json& j, const Spectrum& s) {
  j = {{"eigenvalues", s.eigenvalues},
       {"residuals", s.residuals},
       {"matrix_width", s.matrix_width}};
}

void to_json(nlohmann::json& j, const LadderReport& r) {
  j = {{"lower_residual", r.lower_residual},
       {"raise_residual", r.raise_residual},
       {"pair_residual", r.pair_residual},
       {"algebra_residual", r.algebra_residual},
       {"h", r.h}};
}

void to_json(nlohmann::json& j, const PartnerReport& r) {
  j = {{"minus", r.minus},
       {"plus", r.plus},
       {"pairing_dev", r.pairing_dev},
       {"transform_residual", r.transform_residual},
       {"annihilated", r.annihilated},
       {"h", r.h}};
}

void to_json(nlohmann::json& j, const SeparatedReport& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& [e0, mu] : r.scan_trace) trace.push_back({e0, mu});
  j = {{"xi_spectrum", r.xi_spectrum},
       {"seed_energy", r.seed_energy},
       {"M", r.M},
       {"minus_target", r.minus_target},
       {"minus_index", r.minus_index},
       {"seed_has_nodes", r.seed_has_nodes},
       {"E0", r.E0},
       {"rho_residual", r.rho_residual},
       {"transform_residual", r.transform_residual},
       {"annihilated", r.annihilated},
       {"scan_trace", trace}};
}

void to_json(nlohmann::json& j, const ResidualSweep& s) {
  j = {{"h", s.h}, {"residual", s.residual}, {"orders", s.orders}};
}

void to_json(nlohmann::json& j, const HierarchyLevel& l) {
  j = {{"eigenvalues", l.spectrum.eigenvalues},
       {"residuals", l.spectrum.residuals},
       {"deleted_eigenvalue", num_or_null(l.deleted_eigenvalue)},
       {"seed_had_nodes", l.seed_had_nodes}};
}

void to_json(nlohmann::json& j, const Hierarchy& h) { j = {{"levels", h.levels}}; }

nlohmann::json pair_summary(const PotentialPair& pair) {
  nlohmann::json j;
  j["family"] = pair.family;
  j["chart"] = pair.chart;
  j["n"] = pair.params.n;
  j["a"] = pair.params.a;
  j["c"] = pair.params.c;
  j["singular"] = pair.singular_desc;
  j["f"] = pair.f_source;
  j["h"] = pair.h_source;
  j["box_lo"] = pair.box_lo;
  j["box_hi"] = pair.box_hi;
  return j;
}

void write_spectrum_csv(std::ostream& os, const Spectrum& s) {
  os << "index,eigenvalue,residual\n";
  for (std::size_t i = 0; i < s.eigenvalues.size(); ++i)
    os << i << ',' << format_g17(s.eigenvalues[i]) << ',' << format_g17(s.residuals[i]) << '\n';
}

void write_eigenfunctions_csv(std::ostream& os, const Grid1D& grid, const Spectrum& s) {
  os << "x";
  for (std::size_t k = 0; k < s.eigenfunctions.size(); ++k) os << ",psi" << k;
  os << '\n';
  for (int i = 0; i < grid.n; ++i) {
    os << format_g17(grid.point(i));
    for (const auto& psi : s.eigenfunctions)
      os << ',' << format_g17(psi[static_cast<std::size_t>(i)]);
    os << '\n';
  }
}

void write_samples_csv(std::ostream& os, const PotentialPair& pair,
                       const std::vector<std::vector<double>>& points) {
  const int n = pair.params.n;
  for (int m = 0; m < n; ++m) os << 'x' << (m + 1) << ',';
  os << "V0,V1,L0,P,status\n";
  for (const auto& x : points) {
    if (static_cast<int>(x.size()) != n) throw invalid_params("sample point has wrong dimension");
    for (double xi : x) os << format_g17(xi) << ',';
    try {
      double v0 = pair.V0(x), v1 = pair.V1(x), l0 = pair.L0(x), p = pair.P(x);
      os << format_g17(v0) << ',' << format_g17(v1) << ',' << format_g17(l0) << ','
         << format_g17(p) << ",ok\n";
    } catch (const singularity_error&) {
      os << ",,,,singular\n";
    }
  }
}

void write_sweep_csv(std::ostream& os, const ResidualSweep& s) {
  os << "h,residual,order\n";
  for (std::size_t i = 0; i < s.h.size(); ++i) {
    os << format_g17(s.h[i]) << ',' << format_g17(s.residual[i]) << ',';
    if (i > 0 && i - 1 < s.orders.size()) os << format_g17(s.orders[i - 1]);
    os << '\n';
  }
}

void write_partner_csv(std::ostream& os, const PartnerReport& r) {
  os << "index,E_minus,E_plus,pairing_dev,transform_residual,annihilated\n";
  for (std::size_t i = 0; i < r.minus.eigenvalues.size(); ++i) {
    os << i << ',' << format_g17(r.minus.eigenvalues[i]) << ','
       << format_g17(r.plus.eigenvalues[i]) << ',';
    if (i < r.pairing_dev.size()) os << format_g17(r.pairing_dev[i]);
    os << ',' << format_g17(r.transform_residual[i]) << ',' << (r.annihilated[i] ? 1 : 0)
       << '\n';
  }
}

void write_hierarchy_csv(std::ostream& os, const Hierarchy& h) {
  std::size_t k = 0;
  for (const auto& l : h.levels) k = std::max(k, l.spectrum.eigenvalues.size());
  os << "level,deleted_eigenvalue";
  for (std::size_t j = 0; j < k; ++j) os << ",E" << j;
  os << '\n';
  for (std::size_t i = 0; i < h.levels.size(); ++i) {
    const auto& l = h.levels[i];
    os << i << ',';
    if (!std::isnan(l.deleted_eigenvalue)) os << format_g17(l.deleted_eigenvalue);
    for (std::size_t j = 0; j < k; ++j) {
      os << ',';
      if (j < l.spectrum.eigenvalues.size()) os << format_g17(l.spectrum.eigenvalues[j]);
    }
    os << '\n';
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw solver_error("cannot open " + path + " for writing");
  out << content;
  out.flush();
  if (!out) throw solver_error("short write to " + path);
}

}  // namespace isospec
