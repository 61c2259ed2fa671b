#include "gradpce/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gradpce/parallel.hpp"

namespace gradpce {

namespace {

// Seed streams; see derive_seed.
constexpr std::uint64_t kSampleStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kFoldStream = 3;

bool noise_hits(NoiseTarget target, int role) {
  switch (target) {
    case NoiseTarget::values:
      return role == 0;
    case NoiseTarget::derivatives:
      return role > 0;
    case NoiseTarget::both:
      return true;
  }
  return true;
}

void validate(const StudyConfig& config) {
  if (config.n_grid.empty()) throw std::invalid_argument("study grid is empty");
  if (config.replications < 1) throw std::invalid_argument("study needs replications >= 1");
  if (!(config.gradient_fraction >= 0.0 && config.gradient_fraction <= 1.0)) {
    throw std::invalid_argument("gradient fraction must lie in [0, 1]");
  }
  if (!(config.nu > 0.0)) throw std::invalid_argument("cost ratio nu must be > 0");
  if (!(config.noise.variance >= 0.0)) throw std::invalid_argument("noise variance must be >= 0");
  if (config.folds < 2) throw std::invalid_argument("cross validation needs folds >= 2");
  if (config.cv_grid_size < 1) throw std::invalid_argument("delta grid size must be >= 1");
}

}  // namespace

ManufacturedProblem manufacture(Basis basis, int sparsity, std::uint64_t seed) {
  const auto p = static_cast<int>(basis.size());
  if (sparsity < 0 || sparsity > p) {
    throw std::invalid_argument("sparsity " + std::to_string(sparsity) + " outside [0, " +
                                std::to_string(p) + "]");
  }
  Rng rng(seed);
  Eigen::VectorXd draw(p);
  for (int j = 0; j < p; ++j) draw[j] = rng.normal();
  std::vector<int> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::abs(draw[a]) > std::abs(draw[b]); });
  Eigen::VectorXd planted = Eigen::VectorXd::Zero(p);
  for (int t = 0; t < sparsity; ++t) planted[order[t]] = draw[order[t]];
  return {std::move(basis), std::move(planted), sparsity, seed};
}

QoiSample evaluate_planted(const ManufacturedProblem& problem, std::span<const double> point,
                           bool with_gradient) {
  const Basis& basis = problem.basis;
  if (point.size() != static_cast<std::size_t>(basis.dimension())) {
    throw std::invalid_argument("evaluate_planted: point has dimension " +
                                std::to_string(point.size()));
  }
  const auto p = static_cast<Eigen::Index>(basis.size());
  Eigen::VectorXd values(p);
  QoiSample out;
  if (with_gradient) {
    Eigen::MatrixXd partials(basis.dimension(), p);
    basis.evaluate_with_gradient(point, {values.data(), static_cast<std::size_t>(p)}, partials);
    const Eigen::VectorXd grad = partials * problem.planted;
    out.gradient.assign(grad.data(), grad.data() + grad.size());
  } else {
    basis.evaluate(point, {values.data(), static_cast<std::size_t>(p)});
  }
  out.value = values.dot(problem.planted);
  return out;
}

double apply_noise(double x, double variance, Rng& rng) {
  if (!(variance >= 0.0)) throw std::invalid_argument("noise variance must be >= 0");
  if (variance == 0.0) return x;
  return x * (1.0 + std::sqrt(variance) * rng.normal());
}

CostModel split_equivalent_size(double n_tilde, double fraction, double nu) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("gradient fraction must lie in [0, 1]");
  }
  if (!(nu > 0.0)) throw std::invalid_argument("cost ratio nu must be > 0");
  auto split = [&](int n) {
    const auto n_g = static_cast<int>(std::lround(fraction * n));
    return CostModel{nu, n - n_g, n_g};
  };
  // Cost grows by 1 or nu per added sample, so the first overshoot ends the scan.
  int n = 0;
  while (split(n + 1).equivalent_size() <= n_tilde + 1e-9) ++n;
  if (n == 0) {
    throw std::invalid_argument("equivalent size " + std::to_string(n_tilde) +
                                " admits no sample at this fraction and cost");
  }
  return split(n);
}

std::string to_string(NoiseTarget target) {
  switch (target) {
    case NoiseTarget::values:
      return "values";
    case NoiseTarget::derivatives:
      return "derivatives";
    case NoiseTarget::both:
      return "both";
  }
  return "both";
}

NoiseTarget noise_target_from_string(const std::string& name) {
  if (name == "values") return NoiseTarget::values;
  if (name == "derivatives") return NoiseTarget::derivatives;
  if (name == "both") return NoiseTarget::both;
  throw std::invalid_argument("unknown noise target '" + name + "'");
}

double rrmse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& reference) {
  if (estimate.size() != reference.size()) {
    throw std::invalid_argument("rrmse: vectors differ in length");
  }
  const double ref = reference.norm();
  if (ref == 0.0) throw std::invalid_argument("rrmse: reference vector is zero");
  return (estimate - reference).norm() / ref;
}

ExperimentReport run_study(const Basis& basis, const Eigen::VectorXd& reference,
                           const QoiEvaluator& evaluator, const StudyConfig& config,
                           std::string label) {
  validate(config);
  if (reference.size() != static_cast<Eigen::Index>(basis.size())) {
    throw std::invalid_argument("reference has " + std::to_string(reference.size()) +
                                " coefficients, basis has " + std::to_string(basis.size()));
  }
  const bool enhanced = config.gradient_fraction > 0.0;
  const SystemKind kind = enhanced ? SystemKind::gradient_enhanced : SystemKind::standard;
  const auto reps = static_cast<std::size_t>(config.replications);

  ExperimentReport report;
  report.label = std::move(label);
  report.config = config;
  for (std::size_t g = 0; g < config.n_grid.size(); ++g) {
    CurvePoint point;
    point.n_tilde = config.n_grid[g];
    point.cost = split_equivalent_size(point.n_tilde, config.gradient_fraction, config.nu);
    point.replications = config.replications;
    point.outcomes.resize(reps);

    parallel_for(reps, config.workers, [&](std::size_t r) {
      const std::uint64_t counter = g * reps + r;
      const SampleSet samples =
          draw_samples(basis.dimension(), point.cost.samples(), config.gradient_fraction,
                       derive_seed(config.seed, kSampleStream, counter));
      MeasurementSystem system = assemble(basis, samples, evaluator, kind, enhanced);
      if (config.noise.variance > 0.0) {
        Rng noise(derive_seed(config.seed, kNoiseStream, counter));
        for (Eigen::Index row = 0; row < system.rows(); ++row) {
          if (noise_hits(config.noise.target, system.row_map[static_cast<std::size_t>(row)].role)) {
            system.rhs[row] = apply_noise(system.rhs[row], config.noise.variance, noise);
          }
        }
      }
      const auto grid = default_delta_grid(system.rhs.norm(), config.cv_grid_size);
      const CvReport cv = cross_validate_delta(system, config.folds, grid,
                                               derive_seed(config.seed, kFoldStream, counter),
                                               config.solver);
      const SparseSolution sol = solve_bpdn(system, cv.chosen_delta, config.solver);

      ReplicationOutcome& out = point.outcomes[r];
      out.replication = static_cast<int>(r);
      out.chosen_delta = cv.chosen_delta;
      out.status = sol.status;
      out.rrmse = rrmse(unweight(sol, basis, enhanced), reference);
      out.success = sol.status != SolveStatus::iteration_limit &&
                    out.rrmse < config.success_threshold;
    });

    double sum = 0.0;
    for (const auto& out : point.outcomes) {
      point.successes += out.success ? 1 : 0;
      point.nonconverged += out.status == SolveStatus::iteration_limit ? 1 : 0;
      sum += out.rrmse;
    }
    const double n = static_cast<double>(reps);
    point.success_probability = point.successes / n;
    point.mean_rrmse = sum / n;
    double sq = 0.0;
    for (const auto& out : point.outcomes) sq += (out.rrmse - point.mean_rrmse) * (out.rrmse - point.mean_rrmse);
    point.std_rrmse = reps > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
    report.points.push_back(std::move(point));
  }
  return report;
}

ExperimentReport run_recovery_study(const ManufacturedProblem& problem, const StudyConfig& config) {
  const QoiEvaluator evaluator = [&problem](std::span<const double> point, bool with_gradient) {
    return evaluate_planted(problem, point, with_gradient);
  };
  return run_study(problem.basis, problem.planted, evaluator, config, "manufactured");
}

bool proportion_exceeds(int k1, int n1, int k2, int n2, double z) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("proportion test needs n >= 1");
  const double p1 = static_cast<double>(k1) / n1;
  const double p2 = static_cast<double>(k2) / n2;
  const double pooled = static_cast<double>(k1 + k2) / (n1 + n2);
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
  if (se == 0.0) return p1 > p2;
  return (p1 - p2) > z * se;
}

std::vector<double> default_manufactured_grid() { return {30, 50, 70, 90, 120, 165, 250}; }

}  // namespace gradpce
