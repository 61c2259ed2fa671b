#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gradpce/basis.hpp"
#include "gradpce/diagnostics.hpp"
#include "gradpce/experiments.hpp"
#include "gradpce/parallel.hpp"
#include "gradpce/pde.hpp"
#include "gradpce/report.hpp"
#include "gradpce/sampling.hpp"
#include "gradpce/selftest.hpp"
#include "gradpce/solver.hpp"

namespace gradpce {

namespace {

using Json = nlohmann::ordered_json;

// Seed streams below the global seed; experiments use their own streams inside.
constexpr std::uint64_t kProblemStream = 100;
constexpr std::uint64_t kStudyStream = 200;
constexpr std::uint64_t kReferenceStream = 300;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw CLI::ValidationError(flag, "'" + item + "' is not a number");
    values.push_back(v);
  }
  if (values.empty()) throw CLI::ValidationError(flag, "expected a comma-separated list");
  return values;
}

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    std::ostringstream s;
    s << values[i];
    out += s.str();
  }
  return out;
}

// Flat key=value lines become --key=value flags placed before the user's own
// flags, so the command line wins under the take-last policy.
std::vector<std::string> config_flags(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw CLI::ValidationError("--config", "cannot read " + path);
  std::vector<std::string> flags;
  std::string line;
  int number = 0;
  while (std::getline(file, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--config", path + ":" + std::to_string(number) +
                                                 ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key[0] == '-') key.erase(0, 1);
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty() || key == "config") {
      throw CLI::ValidationError("--config", path + ":" + std::to_string(number) + ": bad key");
    }
    flags.push_back("--" + key + "=" + value);
  }
  return flags;
}

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path) return args;
  std::size_t insert_at = 0;
  while (insert_at < args.size() && !args[insert_at].empty() && args[insert_at][0] != '-') {
    ++insert_at;
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(insert_at));
  const auto injected = config_flags(*path);
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(insert_at), args.end());
  return out;
}

Json envelope(const std::string& command, std::uint64_t seed, Json config) {
  Json j;
  j["tool"] = "gradpce";
  j["command"] = command;
  j["build_id"] = build_id();
  j["seed"] = seed;
  j["config"] = std::move(config);
  return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

int worker_count(int requested) { return requested > 0 ? requested : default_worker_count(); }

struct BasisArgs {
  int dim = 0;
  int order = 0;
};

struct DiagnoseArgs {
  int dim = 8;
  int order = 3;
  int samples = 0;
  double fraction = 1.0;
  std::string kind = "gradient-enhanced";
  std::uint64_t seed = 1;
  int budget = 1000;
  std::string sparsity_levels = "1,2";
  int trials = 2000;
  int eq_samples = 20000;
  double epsilon = 1e-2;
  std::string system;
  bool save_system = false;
  int planted_sparsity = 10;
  std::string out;
};

struct RecoverArgs {
  std::string system;
  std::optional<double> delta;
  bool cv = false;
  int folds = 4;
  int cv_grid_size = 12;
  std::uint64_t seed = 1;
  double tolerance = 1e-8;
  int max_iterations = 100000;
  std::string out;
};

struct ManufacturedArgs {
  int dim = 8;
  int order = 3;
  int sparsity = 10;
  double nu = 2.0;
  std::string fraction = "0,1";
  double noise_variance = 0.0;
  std::string noise_target = "both";
  std::string n_grid = join(default_manufactured_grid());
  int reps = 100;
  std::uint64_t seed = 1;
  int folds = 4;
  bool full_scale = false;
  int workers = 0;
  std::string out;
};

struct PdeArgs {
  std::string preset = "desk";
  int dim = 0;
  int mesh = 32;
  int reference_mesh = 0;
  int order = 3;
  double nu = 2.0;
  std::string fraction = "0,1";
  std::string n_grid = join(default_pde_grid());
  int reps = 50;
  std::uint64_t seed = 1;
  int folds = 4;
  int oversampling = 20;
  int max_terms = 300;
  int kl_grid = 0;
  int workers = 0;
  std::string out;
};

Basis basis_for_system(const MeasurementSystem& system) {
  Basis basis = enumerate_basis(system.dim, system.order);
  if (static_cast<Eigen::Index>(basis.size()) < system.cols()) {
    throw std::runtime_error("system has more columns than the total-degree basis");
  }
  return basis.truncate(static_cast<std::size_t>(system.cols()));
}

int run_basis(const BasisArgs& a, std::ostream& out) {
  const Basis basis = enumerate_basis(a.dim, a.order);
  out << "P=" << basis.size() << '\n';
  write_basis_csv(out, basis);
  return 0;
}

int run_diagnose(const DiagnoseArgs& a, std::ostream& out, std::ostream& err) {
  Json config;
  std::optional<ManufacturedProblem> planted;
  MeasurementSystem system;
  std::optional<Basis> basis;
  if (!a.system.empty()) {
    std::ifstream file(a.system);
    if (!file) throw std::runtime_error("cannot read system file " + a.system);
    system = read_system_csv(file);
    basis = basis_for_system(system);
    config["system"] = std::filesystem::path(a.system).filename().string();
  } else {
    basis = enumerate_basis(a.dim, a.order);
    const int n = a.samples > 0 ? a.samples : static_cast<int>(basis->size()) * 2;
    const SystemKind kind = system_kind_from_string(a.kind);
    const double fraction = kind == SystemKind::standard ? 0.0 : a.fraction;
    const SampleSet samples = draw_samples(a.dim, n, fraction, a.seed);
    QoiEvaluator evaluator;
    if (a.save_system) {
      planted = manufacture(*basis, std::min<int>(a.planted_sparsity, static_cast<int>(basis->size())),
                            derive_seed(a.seed, kProblemStream, 0));
      evaluator = [&planted](std::span<const double> x, bool g) { return evaluate_planted(*planted, x, g); };
    }
    system = assemble(*basis, samples, evaluator, kind, kind == SystemKind::gradient_enhanced);
    config["dim"] = a.dim;
    config["order"] = a.order;
    config["samples"] = n;
    config["fraction"] = fraction;
    config["kind"] = to_string(kind);
    if (a.save_system) {
      config["planted_sparsity"] = a.planted_sparsity;
      std::ostringstream sys_csv, samples_csv, planted_csv;
      write_system_csv(sys_csv, system);
      write_samples_csv(samples_csv, samples);
      write_coefficients_csv(planted_csv, *basis, planted->planted);
      write_text_file(a.out, "system.csv", sys_csv.str());
      write_text_file(a.out, "samples.csv", samples_csv.str());
      write_text_file(a.out, "planted.csv", planted_csv.str());
    }
  }
  config["budget"] = a.budget;
  config["sparsity_levels"] = a.sparsity_levels;
  config["trials"] = a.trials;
  config["eq_samples"] = a.eq_samples;
  config["epsilon"] = a.epsilon;

  const auto trunc = TruncationSet::for_order(basis->order(), a.epsilon);
  const RowMatrix candidates = coherence_candidates(basis->dimension(), trunc, a.budget, a.seed);
  Json report = envelope("diagnose", a.seed, config);
  report["mu"] = coherence_mu(*basis, candidates);
  report["beta"] = coherence_beta(*basis, candidates);
  auto& ric = report["ric"] = Json::array();
  for (double level : parse_list(a.sparsity_levels, "--sparsity-levels")) {
    const int s = static_cast<int>(level);
    if (s < 1 || s > system.cols() || s != level) {
      throw std::invalid_argument("sparsity level " + std::to_string(level) + " is not in [1, P]");
    }
    const bool exhaustive = subset_count(static_cast<std::uint64_t>(system.cols()),
                                         static_cast<std::uint64_t>(s)) <= 1'000'000;
    const RicEstimate est = exhaustive ? ric_exhaustive(system, s)
                                       : ric_monte_carlo(system, s, a.trials, a.seed);
    Json e = to_json(est);
    e["mode"] = exhaustive ? "exhaustive" : "monte-carlo";
    ric.push_back(std::move(e));
  }
  report["nullspace_dim"] = nullspace_dim(system);
  report["max_offdiag_inner_product"] = column_inner_products(system).maxCoeff();
  report["epsilon_Q_estimate"] = epsilon_q_estimate(*basis, trunc, system.kind, a.eq_samples, a.seed);
  report["P"] = basis->size();
  report["rows"] = system.rows();
  report["ric_threshold"] = ric_threshold();

  if (a.out.empty()) {
    out << dump(report);
  } else {
    write_text_file(a.out, "diagnose.json", dump(report));
  }
  (void)err;
  return 0;
}

int run_recover(const RecoverArgs& a, std::ostream& out) {
  std::ifstream file(a.system);
  if (!file) throw std::runtime_error("cannot read system file " + a.system);
  const MeasurementSystem system = read_system_csv(file);
  const Basis basis = basis_for_system(system);
  SolverOptions options;
  options.tolerance = a.tolerance;
  options.max_iterations = a.max_iterations;

  Json config;
  config["system"] = std::filesystem::path(a.system).filename().string();
  config["mode"] = a.cv ? "cv" : "delta";
  if (a.delta) config["delta"] = *a.delta;
  config["folds"] = a.folds;
  config["cv_grid_size"] = a.cv_grid_size;
  config["tolerance"] = a.tolerance;
  config["max_iterations"] = a.max_iterations;
  Json report = envelope("recover", a.seed, config);
  report["kind"] = to_string(system.kind);
  report["weights_applied"] = system.weights_applied;

  double delta = a.delta.value_or(0.0);
  if (a.cv) {
    const auto grid = default_delta_grid(system.rhs.norm(), a.cv_grid_size);
    const CvReport cv = cross_validate_delta(system, a.folds, grid, a.seed, options);
    delta = cv.chosen_delta;
    report["cv"] = to_json(cv);
  }
  const SparseSolution sol = solve_bpdn(system, delta, options);
  report["solver"] = to_json(sol);
  const Eigen::VectorXd coefficients = unweight(sol, basis, system.weights_applied);

  std::ostringstream csv;
  write_coefficients_csv(csv, basis, coefficients);
  if (a.out.empty()) {
    report["coefficients"] = std::vector<double>(coefficients.data(), coefficients.data() + coefficients.size());
    out << dump(report);
  } else {
    write_text_file(a.out, "solution.csv", csv.str());
    write_text_file(a.out, "telemetry.json", dump(report));
  }
  return 0;
}

StudyConfig study_config(const std::vector<double>& grid, double fraction, double nu, int reps,
                         std::uint64_t seed, int folds, int workers) {
  StudyConfig c;
  c.n_grid = grid;
  c.gradient_fraction = fraction;
  c.nu = nu;
  c.replications = reps;
  c.seed = derive_seed(seed, kStudyStream, 0);
  c.folds = folds;
  c.workers = workers;
  return c;
}

std::string curve_label(double fraction) {
  std::ostringstream s;
  s << "fraction=" << fraction;
  return s.str();
}

int run_manufactured(ManufacturedArgs a, std::ostream& err) {
  if (a.full_scale) {
    a.dim = 25;
    a.order = 3;
    a.sparsity = 50;
    err << "warning: full-scale configuration (d=25, p=3, P=3276, |C|=50) is slow\n";
  }
  const auto fractions = parse_list(a.fraction, "--fraction");
  const auto grid = parse_list(a.n_grid, "--n-grid");
  const NoiseTarget target = noise_target_from_string(a.noise_target);
  const ManufacturedProblem problem =
      manufacture(enumerate_basis(a.dim, a.order), a.sparsity, derive_seed(a.seed, kProblemStream, 0));

  Json config;
  config["dim"] = a.dim;
  config["order"] = a.order;
  config["sparsity"] = a.sparsity;
  config["nu"] = a.nu;
  config["fraction"] = fractions;
  config["noise_variance"] = a.noise_variance;
  config["noise_target"] = to_string(target);
  config["n_grid"] = grid;
  config["reps"] = a.reps;
  config["folds"] = a.folds;
  config["full_scale"] = a.full_scale;
  Json report = envelope("experiment manufactured", a.seed, config);
  report["problem"] = {{"P", problem.basis.size()},
                       {"sparsity", problem.sparsity},
                       {"planted_norm", problem.planted.norm()}};

  std::vector<ExperimentReport> curves;
  auto& curves_json = report["curves"] = Json::array();
  for (double f : fractions) {
    StudyConfig c = study_config(grid, f, a.nu, a.reps, a.seed, a.folds, worker_count(a.workers));
    c.noise = {a.noise_variance, target};
    ExperimentReport r = run_recovery_study(problem, c);
    r.label = curve_label(f);
    curves_json.push_back(to_json(r));
    curves.push_back(std::move(r));
  }
  std::ostringstream csv;
  write_curve_csv(csv, curves);
  std::ostringstream planted;
  write_coefficients_csv(planted, problem.basis, problem.planted);
  write_text_file(a.out, "report.json", dump(report));
  write_text_file(a.out, "curves.csv", csv.str());
  write_text_file(a.out, "planted_coefficients.csv", planted.str());
  return 0;
}

int run_pde(const PdeArgs& a, std::ostream& err) {
  KlConfig kl = kl_preset(a.preset);
  if (a.dim > 0) kl.dim = a.dim;
  if (a.kl_grid > 0) kl.grid_resolution = a.kl_grid;
  if (a.preset == "paper-pde") {
    err << "warning: paper-pde preset (d=" << kl.dim << ") is slow at desk scale\n";
  }
  const auto fractions = parse_list(a.fraction, "--fraction");
  const auto grid = parse_list(a.n_grid, "--n-grid");
  const int reference_mesh = a.reference_mesh > 0 ? a.reference_mesh : a.mesh;
  const int workers = worker_count(a.workers);
  const KlField field = build_kl(kl);
  const Basis basis =
      enumerate_basis(kl.dim, a.order).truncate(static_cast<std::size_t>(std::max(1, a.max_terms)));

  ReferenceConfig rc;
  rc.oversampling = a.oversampling;
  rc.seed = derive_seed(a.seed, kReferenceStream, 0);
  rc.workers = workers;
  const ReferenceExpansion reference = compute_reference(field, reference_mesh, basis, rc);

  Json config;
  config["preset"] = a.preset;
  config["dim"] = kl.dim;
  config["kl_grid"] = kl.grid_resolution;
  config["sigma"] = kl.sigma;
  config["mean_log"] = kl.mean_log;
  config["correlation_length"] = kl.correlation_length;
  config["mesh"] = a.mesh;
  config["reference_mesh"] = reference_mesh;
  config["order"] = a.order;
  config["max_terms"] = a.max_terms;
  config["nu"] = a.nu;
  config["fraction"] = fractions;
  config["n_grid"] = grid;
  config["reps"] = a.reps;
  config["folds"] = a.folds;
  config["oversampling"] = a.oversampling;
  Json report = envelope("experiment pde", a.seed, config);
  report["kl_eigenvalues"] = std::vector<double>(field.eigenvalues().data(),
                                                 field.eigenvalues().data() + field.dim());
  report["reference"] = {{"mesh", reference_mesh},
                         {"samples", reference.samples},
                         {"P", basis.size()},
                         {"validation_error", reference.validation_error}};

  std::vector<ExperimentReport> curves;
  auto& curves_json = report["curves"] = Json::array();
  for (double f : fractions) {
    const StudyConfig c = study_config(grid, f, a.nu, a.reps, a.seed, a.folds, workers);
    ExperimentReport r = run_pde_study(field, a.mesh, basis, reference.coefficients, c);
    r.label = curve_label(f);
    curves_json.push_back(to_json(r));
    curves.push_back(std::move(r));
  }
  std::ostringstream csv;
  write_curve_csv(csv, curves);
  std::ostringstream coefficients;
  write_coefficients_csv(coefficients, basis, reference.coefficients);
  write_text_file(a.out, "report.json", dump(report));
  write_text_file(a.out, "curves.csv", csv.str());
  write_text_file(a.out, "reference_coefficients.csv", coefficients.str());
  return 0;
}

int run_selftest_command(std::ostream& out) {
  int failures = 0;
  for (const auto& c : run_selftest()) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    failures += c.passed ? 0 : 1;
  }
  out << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient-enhanced l1 recovery of sparse Hermite polynomial chaos expansions",
               "gradpce"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "Flat key=value file; command-line flags override it");

  BasisArgs basis_args;
  auto* basis_cmd = app.add_subcommand("basis", "Print the ordered total-degree basis as CSV");
  basis_cmd->add_option("--dim", basis_args.dim, "Number of random inputs d")->required()->check(CLI::PositiveNumber);
  basis_cmd->add_option("--order", basis_args.order, "Total order p")->required()->check(CLI::NonNegativeNumber);

  DiagnoseArgs diag;
  auto* diag_cmd = app.add_subcommand("diagnose", "Coherence, RIC, null space and inner-product diagnostics");
  diag_cmd->add_option("--dim", diag.dim, "Number of random inputs d")->check(CLI::PositiveNumber);
  diag_cmd->add_option("--order", diag.order, "Total order p")->check(CLI::NonNegativeNumber);
  diag_cmd->add_option("--samples", diag.samples, "Sample count N (default 2P)");
  diag_cmd->add_option("--fraction", diag.fraction, "Fraction of samples with gradients")->check(CLI::Range(0.0, 1.0));
  diag_cmd->add_option("--kind", diag.kind, "standard or gradient-enhanced");
  diag_cmd->add_option("--seed", diag.seed, "Global seed");
  diag_cmd->add_option("--budget", diag.budget, "Candidate points for coherence (>= 1000)");
  diag_cmd->add_option("--sparsity-levels", diag.sparsity_levels, "Comma-separated RIC sparsity levels");
  diag_cmd->add_option("--trials", diag.trials, "Monte Carlo RIC subsets when exhaustive is too large");
  diag_cmd->add_option("--eq-samples", diag.eq_samples, "Monte Carlo samples for epsilon_Q");
  diag_cmd->add_option("--epsilon", diag.epsilon, "Truncation set epsilon");
  diag_cmd->add_option("--system", diag.system, "Diagnose an existing system CSV instead of sampling");
  diag_cmd->add_flag("--save-system", diag.save_system, "Also write system.csv, samples.csv, planted.csv");
  diag_cmd->add_option("--planted-sparsity", diag.planted_sparsity, "Planted nonzeros for --save-system");
  diag_cmd->add_option("--out", diag.out, "Output directory (default: JSON on stdout)");

  RecoverArgs rec;
  auto* rec_cmd = app.add_subcommand("recover", "Solve a saved system by BPDN");
  rec_cmd->add_option("--system", rec.system, "System CSV")->required();
  auto* delta_opt = rec_cmd->add_option("--delta", rec.delta, "Residual tolerance")->check(CLI::NonNegativeNumber);
  auto* cv_opt = rec_cmd->add_flag("--cv", rec.cv, "Select the tolerance by cross-validation");
  delta_opt->excludes(cv_opt);
  rec_cmd->add_option("--folds", rec.folds, "Cross-validation folds")->check(CLI::Range(2, 1000));
  rec_cmd->add_option("--cv-grid-size", rec.cv_grid_size, "Tolerance grid size")->check(CLI::PositiveNumber);
  rec_cmd->add_option("--seed", rec.seed, "Seed for fold assignment");
  rec_cmd->add_option("--tolerance", rec.tolerance, "Relative duality gap")->check(CLI::PositiveNumber);
  rec_cmd->add_option("--max-iter", rec.max_iterations, "Iteration cap")->check(CLI::PositiveNumber);
  rec_cmd->add_option("--out", rec.out, "Output directory (default: JSON on stdout)");

  auto* exp_cmd = app.add_subcommand("experiment", "Recovery studies");
  exp_cmd->require_subcommand(1);

  ManufacturedArgs man;
  auto* man_cmd = exp_cmd->add_subcommand("manufactured", "Planted sparse PCE recovery study");
  man_cmd->add_option("--dim", man.dim, "Number of random inputs d")->check(CLI::PositiveNumber);
  man_cmd->add_option("--order", man.order, "Total order p")->check(CLI::NonNegativeNumber);
  man_cmd->add_option("--sparsity", man.sparsity, "Planted nonzeros |C|")->check(CLI::NonNegativeNumber);
  man_cmd->add_option("--nu", man.nu, "Relative cost of a gradient sample")->check(CLI::PositiveNumber);
  man_cmd->add_option("--fraction", man.fraction, "Comma-separated gradient fractions, one curve each");
  man_cmd->add_option("--noise-variance", man.noise_variance, "Multiplicative noise variance")->check(CLI::NonNegativeNumber);
  man_cmd->add_option("--noise-target", man.noise_target, "values, derivatives or both");
  man_cmd->add_option("--n-grid", man.n_grid, "Comma-separated equivalent sample sizes");
  man_cmd->add_option("--reps", man.reps, "Replications per grid value")->check(CLI::PositiveNumber);
  man_cmd->add_option("--seed", man.seed, "Global seed");
  man_cmd->add_option("--folds", man.folds, "Cross-validation folds")->check(CLI::Range(2, 1000));
  man_cmd->add_flag("--full-scale", man.full_scale, "Use d=25, p=3, |C|=50");
  man_cmd->add_option("--workers", man.workers, "Worker threads (default GRADPCE_WORKERS or all cores)");
  man_cmd->add_option("--out", man.out, "Output directory")->required();

  PdeArgs pde;
  auto* pde_cmd = exp_cmd->add_subcommand("pde", "Stochastic elliptic PDE recovery study");
  pde_cmd->add_option("--preset", pde.preset, "desk or paper-pde");
  pde_cmd->add_option("--dim", pde.dim, "Override the preset KL dimension")->check(CLI::PositiveNumber);
  pde_cmd->add_option("--mesh", pde.mesh, "Elements per side for the study")->check(CLI::Range(8, 4096));
  pde_cmd->add_option("--reference-mesh", pde.reference_mesh, "Elements per side for the reference (default --mesh)");
  pde_cmd->add_option("--order", pde.order, "Total order p")->check(CLI::NonNegativeNumber);
  pde_cmd->add_option("--nu", pde.nu, "Relative cost of a gradient sample")->check(CLI::PositiveNumber);
  pde_cmd->add_option("--fraction", pde.fraction, "Comma-separated gradient fractions, one curve each");
  pde_cmd->add_option("--n-grid", pde.n_grid, "Comma-separated equivalent sample sizes");
  pde_cmd->add_option("--reps", pde.reps, "Replications per grid value")->check(CLI::PositiveNumber);
  pde_cmd->add_option("--seed", pde.seed, "Global seed");
  pde_cmd->add_option("--folds", pde.folds, "Cross-validation folds")->check(CLI::Range(2, 1000));
  pde_cmd->add_option("--oversampling", pde.oversampling, "Reference least-squares samples per basis function");
  pde_cmd->add_option("--max-terms", pde.max_terms, "Keep the first terms of the basis");
  pde_cmd->add_option("--kl-grid", pde.kl_grid, "Override the KL Nystrom points per axis");
  pde_cmd->add_option("--workers", pde.workers, "Worker threads (default GRADPCE_WORKERS or all cores)");
  pde_cmd->add_option("--out", pde.out, "Output directory")->required();

  auto* self_cmd = app.add_subcommand("selftest", "Run oracle property checks");

  std::vector<std::string> args;
  for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
  std::string command = "gradpce";
  try {
    std::vector<std::string> forward(args.rbegin(), args.rend());
    forward = expand_config(forward);
    std::reverse(forward.begin(), forward.end());
    app.parse(forward);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return 2;
  }

  try {
    if (*basis_cmd) return run_basis(basis_args, out);
    if (*diag_cmd) {
      if (diag.save_system && diag.out.empty()) {
        throw CLI::ValidationError("--save-system", "requires --out");
      }
      return run_diagnose(diag, out, err);
    }
    if (*rec_cmd) {
      if (!rec.delta && !rec.cv) throw CLI::ValidationError("recover", "one of --delta or --cv is required");
      return run_recover(rec, out);
    }
    if (*man_cmd) return run_manufactured(man, err);
    if (*pde_cmd) return run_pde(pde, err);
    if (*self_cmd) return run_selftest_command(out);
  } catch (const CLI::Error& e) {
    err << e.what() << '\n' << app.help();
    return 2;
  } catch (const std::exception& e) {
    Json error;
    error["error"] = e.what();
    for (const auto* sub : app.get_subcommands()) {
      command = sub->get_name();
      for (const auto* inner : sub->get_subcommands()) command += " " + inner->get_name();
    }
    error["command"] = command;
    err << error.dump() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace gradpce
