#pragma once

// Serialization of the report structs: JSON via nlohmann (adl to_json
// overloads) and flat CSV writers.  All CSV numbers are printed with %.17g
// so outputs round-trip and identical inputs produce identical bytes.
// Spectrum JSON carries eigenvalues and residuals only; eigenfunctions go
// to CSV where each row is one grid node.

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "isospec/euclid.hpp"
#include "isospec/hierarchy.hpp"
#include "isospec/integrability.hpp"
#include "isospec/numerics.hpp"
#include "isospec/potentials.hpp"

namespace isospec {

std::string format_g17(double v);

void to_json(nlohmann::json& j, const Constraint& c);
void to_json(nlohmann::json& j, const ConstraintReport& r);
void to_json(nlohmann::json& j, const CommutatorEntry& e);
void to_json(nlohmann::json& j, const CommutatorReport& r);
void to_json(nlohmann::json& j, const PairIdentityReport& r);
void to_json(nlohmann::json& j, const Spectrum& s);
void to_json(nlohmann::json& j, const LadderReport& r);
void to_json(nlohmann::json& j, const PartnerReport& r);
void to_json(nlohmann::json& j, const SeparatedReport& r);
void to_json(nlohmann::json& j, const ResidualSweep& s);
void to_json(nlohmann::json& j, const HierarchyLevel& l);
void to_json(nlohmann::json& j, const Hierarchy& h);

// Pair metadata (family, chart, parameters, box, sources); the fields
// themselves are callables and stay out of serialization.
nlohmann::json pair_summary(const PotentialPair& pair);

// index,eigenvalue,residual
void write_spectrum_csv(std::ostream& os, const Spectrum& s);
// x,psi0,...,psi{k-1} with one row per grid node
void write_eigenfunctions_csv(std::ostream& os, const Grid1D& grid, const Spectrum& s);
// x1,...,xn,V0,V1,L0,P,status; guarded points keep their coordinates and
// get status "singular" with empty value fields
void write_samples_csv(std::ostream& os, const PotentialPair& pair,
                       const std::vector<std::vector<double>>& points);
// h,residual,order (order blank on the first row)
void write_sweep_csv(std::ostream& os, const ResidualSweep& s);
// index,E_minus,E_plus,pairing_dev,transform_residual,annihilated
void write_partner_csv(std::ostream& os, const PartnerReport& r);
// level,deleted_eigenvalue,E0,...,E{k-1}
void write_hierarchy_csv(std::ostream& os, const Hierarchy& h);

// Atomic-enough file write for CLI outputs; throws solver_error on failure.
void write_file(const std::string& path, const std::string& content);

}  // namespace isospec
