#include "gradpce/report.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "build_id.hpp"

namespace gradpce {

std::string build_id() { return GRADPCE_BUILD_ID; }

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

nlohmann::ordered_json to_json(const StudyConfig& config) {
  nlohmann::ordered_json j;
  j["n_grid"] = config.n_grid;
  j["gradient_fraction"] = config.gradient_fraction;
  j["nu"] = config.nu;
  j["noise_variance"] = config.noise.variance;
  j["noise_target"] = to_string(config.noise.target);
  j["replications"] = config.replications;
  j["seed"] = config.seed;
  j["folds"] = config.folds;
  j["cv_grid_size"] = config.cv_grid_size;
  j["success_threshold"] = config.success_threshold;
  j["solver_tolerance"] = config.solver.tolerance;
  j["solver_max_iterations"] = config.solver.max_iterations;
  return j;
}

nlohmann::ordered_json to_json(const ExperimentReport& report) {
  nlohmann::ordered_json j;
  j["label"] = report.label;
  j["config"] = to_json(report.config);
  auto& points = j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : report.points) {
    nlohmann::ordered_json pj;
    pj["n_tilde"] = p.n_tilde;
    pj["n_e"] = p.cost.n_e;
    pj["n_g"] = p.cost.n_g;
    pj["equivalent_size"] = p.cost.equivalent_size();
    pj["replications"] = p.replications;
    pj["successes"] = p.successes;
    pj["nonconverged"] = p.nonconverged;
    pj["success_probability"] = p.success_probability;
    pj["mean_rrmse"] = p.mean_rrmse;
    pj["std_rrmse"] = p.std_rrmse;
    auto& outs = pj["outcomes"] = nlohmann::ordered_json::array();
    for (const auto& o : p.outcomes) {
      outs.push_back({{"replication", o.replication},
                      {"rrmse", o.rrmse},
                      {"chosen_delta", o.chosen_delta},
                      {"status", to_string(o.status)},
                      {"success", o.success}});
    }
    points.push_back(std::move(pj));
  }
  return j;
}

nlohmann::ordered_json to_json(const SparseSolution& solution) {
  nlohmann::ordered_json j;
  j["status"] = to_string(solution.status);
  j["converged"] = solution.converged;
  j["delta_used"] = solution.delta_used;
  j["residual_norm"] = solution.residual_norm;
  j["iterations"] = solution.iterations;
  j["duality_gap"] = solution.duality_gap;
  j["lambda"] = solution.lambda;
  int nonzeros = 0;
  for (Eigen::Index i = 0; i < solution.coefficients.size(); ++i) {
    nonzeros += solution.coefficients[i] != 0.0 ? 1 : 0;
  }
  j["nonzeros"] = nonzeros;
  return j;
}

nlohmann::ordered_json to_json(const CvReport& report) {
  nlohmann::ordered_json j;
  j["folds"] = report.folds;
  j["candidate_deltas"] = report.candidate_deltas;
  j["validation_errors"] = report.validation_errors;
  j["chosen_delta"] = report.chosen_delta;
  return j;
}

nlohmann::ordered_json to_json(const RicEstimate& estimate) {
  return {{"s", estimate.s},
          {"value", estimate.value},
          {"subsets_examined", estimate.subsets_examined},
          {"exact", estimate.exact}};
}

void write_curve_csv(std::ostream& out, const std::vector<ExperimentReport>& curves, bool header) {
  if (header) {
    out << "label,n_tilde,n_e,n_g,equivalent_size,replications,successes,nonconverged,"
           "success_probability,mean_rrmse,std_rrmse\n";
  }
  for (const auto& curve : curves) {
    for (const auto& p : curve.points) {
      out << curve.label << ',' << format_double(p.n_tilde) << ',' << p.cost.n_e << ','
          << p.cost.n_g << ',' << format_double(p.cost.equivalent_size()) << ','
          << p.replications << ',' << p.successes << ',' << p.nonconverged << ','
          << format_double(p.success_probability) << ',' << format_double(p.mean_rrmse) << ','
          << format_double(p.std_rrmse) << '\n';
    }
  }
}

void write_coefficients_csv(std::ostream& out, const Basis& basis, const Eigen::VectorXd& values) {
  if (values.size() != static_cast<Eigen::Index>(basis.size())) {
    throw std::invalid_argument("coefficient count does not match the basis");
  }
  out << "j,multi_index,coefficient\n";
  for (std::size_t j = 0; j < basis.size(); ++j) {
    out << j << ",\"" << basis[j].to_string() << "\","
        << format_double(values[static_cast<Eigen::Index>(j)]) << '\n';
  }
}

void write_basis_csv(std::ostream& out, const Basis& basis) {
  out << "j,total";
  for (int k = 0; k < basis.dimension(); ++k) out << ",i_" << (k + 1);
  out << '\n';
  for (std::size_t j = 0; j < basis.size(); ++j) {
    out << j << ',' << basis[j].total();
    for (int deg : basis[j].degrees()) out << ',' << deg;
    out << '\n';
  }
}

void write_text_file(const std::filesystem::path& dir, const std::string& name,
                     const std::string& text) {
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path.string() + " for writing");
  file << text;
  if (!file) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace gradpce
