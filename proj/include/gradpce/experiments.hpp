#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gradpce/basis.hpp"
#include "gradpce/random.hpp"
#include "gradpce/sampling.hpp"
#include "gradpce/solver.hpp"

namespace gradpce {

struct ManufacturedProblem {
  Basis basis;
  Eigen::VectorXd planted;
  int sparsity = 0;
  std::uint64_t seed = 0;
};

/// Keeps the `sparsity` largest-magnitude entries of an i.i.d. standard normal
/// draw over the basis and zeroes the rest. Magnitude ties keep the lower index.
ManufacturedProblem manufacture(Basis basis, int sparsity, std::uint64_t seed);

/// u and du/dxi of the planted expansion at `point`.
QoiSample evaluate_planted(const ManufacturedProblem& problem, std::span<const double> point,
                           bool with_gradient = true);

/// x (1 + eps), eps ~ N(0, variance).
double apply_noise(double x, double variance, Rng& rng);

/// Equivalent sample size N_e + nu N_g.
struct CostModel {
  double nu = 2.0;
  int n_e = 0;
  int n_g = 0;

  int samples() const { return n_e + n_g; }
  double equivalent_size() const { return n_e + nu * n_g; }
};

/// Largest N with N_e + nu N_g <= n_tilde, where N_g = round(fraction N) and
/// N_e = N - N_g. Throws when not even one sample fits.
CostModel split_equivalent_size(double n_tilde, double fraction, double nu);

enum class NoiseTarget { values, derivatives, both };
std::string to_string(NoiseTarget target);
NoiseTarget noise_target_from_string(const std::string& name);

struct NoiseConfig {
  double variance = 0.0;
  NoiseTarget target = NoiseTarget::both;
};

struct StudyConfig {
  std::vector<double> n_grid;
  double gradient_fraction = 0.0;
  double nu = 2.0;
  NoiseConfig noise;
  int replications = 100;
  std::uint64_t seed = 0;
  int folds = 4;
  int cv_grid_size = 12;
  double success_threshold = 1e-4;
  int workers = 1;
  SolverOptions solver;
};

struct ReplicationOutcome {
  int replication = 0;
  double rrmse = 0.0;
  double chosen_delta = 0.0;
  SolveStatus status = SolveStatus::optimal;
  bool success = false;
};

struct CurvePoint {
  double n_tilde = 0.0;
  CostModel cost;
  int replications = 0;
  int successes = 0;
  int nonconverged = 0;
  double success_probability = 0.0;
  double mean_rrmse = 0.0;
  double std_rrmse = 0.0;
  std::vector<ReplicationOutcome> outcomes;
};

struct ExperimentReport {
  std::string label;
  StudyConfig config;
  std::vector<CurvePoint> points;
};

/// ||estimate - reference|| / ||reference||.
double rrmse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& reference);

/// Generic recovery study. For each grid value and replication: fresh samples,
/// assembly (weighted when any sample carries gradients), optional noise,
/// cross-validated delta, BPDN solve, unweighting and RRMSE against
/// `reference`. Only an exhausted iteration budget counts as non-convergence;
/// such replications always count as failures.
ExperimentReport run_study(const Basis& basis, const Eigen::VectorXd& reference,
                           const QoiEvaluator& evaluator, const StudyConfig& config,
                           std::string label = {});

ExperimentReport run_recovery_study(const ManufacturedProblem& problem, const StudyConfig& config);

/// Pooled two-proportion z-test: true when k1/n1 exceeds k2/n2 by more than
/// z standard errors (z = 1.96 is the two-sided 95% level).
bool proportion_exceeds(int k1, int n1, int k2, int n2, double z = 1.96);

/// Desk-scale defaults for the manufactured study.
std::vector<double> default_manufactured_grid();

}  // namespace gradpce
