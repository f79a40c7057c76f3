#pragma once

// Admissibility of (a, c): the one-form P Gamma entering the closed system
// for L0 is integrable only when the coefficient identities
//   a_j c_kl + a_k c_lj + a_l c_jk = 0          (all j < k < l)
//   c_mj c_kl + c_mk c_lj + c_ml c_jk = 0       (all m and j < k < l)
// hold.  For n = 3 they collapse to a.c = 0 with the dual vector
// c = (c23, c31, c12); n = 4 reduces to one Pfaffian relation plus four
// linear conditions on a; n = 5 forces a = 0 and five Pfaffian relations.

#include <span>
#include <string>
#include <vector>

#include "isospec/euclid.hpp"

namespace isospec {

// |lhs| at or below this counts as satisfied; the conditions are polynomial
// in user-supplied literals, so exact-arithmetic expectations apply.
inline constexpr double constraint_tolerance = 1e-12;

struct Constraint {
  std::string id;
  double value = 0.0;
  bool satisfied = false;
};

struct ConstraintReport {
  int n = 0;
  std::vector<Constraint> constraints;
  bool all_satisfied = true;
  // Dimension of the admissible parameter stratum when documented for this
  // case (n=2: 3, n=3: 5, n=4: 7, n=5 with a=0: 5); -1 otherwise.
  int free_parameters = -1;
  int rank = -1;  // n = 4 only: rank of the translation-constraint matrix
  std::string note;
};

// Evaluates every coefficient identity for arbitrary n (vacuous for n <= 2).
ConstraintReport check_pfaffian_conditions(const IntertwinerParams& p);

// n = 4: the Pfaffian relation c12 c34 - c13 c24 + c14 c23 = 0 plus the four
// conditions a . c_(j) = 0, with the rank of the c_(j) matrix (2 at generic
// admissible c).
ConstraintReport check_n4(const IntertwinerParams& p);

// Orthonormal basis of translations compatible with an admissible n = 4
// rotation matrix, i.e. the nullspace of the c_(j) rows.  Throws
// invalid_params if c violates the Pfaffian relation (run check_n4 first).
std::vector<std::vector<double>> solve_n4_translations(
    const std::vector<std::vector<double>>& c);

// n = 5 requires a = 0; evaluates the five independent Pfaffian relations
// (one per 4-index subset) and reports 10 - 5 = 5 free rotation parameters
// when all hold.
ConstraintReport check_n5(const IntertwinerParams& p);

// max over triples of | a_[j c_kl] - sum_m x_m c_m[j c_kl] |; the identity
// must hold for every x, which is what forces both coefficient families to
// vanish separately.
double pfaffian_identity_residual(const IntertwinerParams& p, std::span<const double> x);

// max over triples of | L_j c_kl + L_k c_lj + L_l c_jk | at a point.
double rotation_consistency_residual(const IntertwinerParams& p, std::span<const double> x);

// The ten admissible three-dimensional parameter families, keyed 1..10.
// Each preset carries a concrete representative parameter set plus the
// coordinate recipe (which eta variant and p polynomial apply).
struct Table1Preset {
  int row = 0;
  std::string constraints;
  std::string beta_desc;
  std::string gamma2_desc;  // description of 2*gamma
  std::string eta_desc;
  int eta_variant = 1;  // 1: L1/L2, 2: L1/L3, 3: L2/L3
  IntertwinerParams params;
};

Table1Preset preset_table1(int row);

}  // namespace isospec
