#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "gradpce/basis.hpp"
#include "gradpce/diagnostics.hpp"
#include "gradpce/experiments.hpp"
#include "gradpce/solver.hpp"

namespace gradpce {

/// `git describe` of the source tree at build time, or "unknown".
std::string build_id();

nlohmann::ordered_json to_json(const StudyConfig& config);
nlohmann::ordered_json to_json(const ExperimentReport& report);
nlohmann::ordered_json to_json(const SparseSolution& solution);
nlohmann::ordered_json to_json(const CvReport& report);
nlohmann::ordered_json to_json(const RicEstimate& estimate);

/// Header: label,n_tilde,n_e,n_g,equivalent_size,replications,successes,
/// nonconverged,success_probability,mean_rrmse,std_rrmse. One row per grid value.
void write_curve_csv(std::ostream& out, const std::vector<ExperimentReport>& curves,
                     bool header = true);

/// Header: j,multi_index,coefficient.
void write_coefficients_csv(std::ostream& out, const Basis& basis, const Eigen::VectorXd& values);

/// Basis listing: "j,total,i_1,...,i_d", one row per function in column order.
void write_basis_csv(std::ostream& out, const Basis& basis);

/// Writes `text` to dir/name, creating dir. Throws on I/O failure.
void write_text_file(const std::filesystem::path& dir, const std::string& name,
                     const std::string& text);

/// %.17g, enough to round-trip a double.
std::string format_double(double value);

}  // namespace gradpce
