#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gradpce/basis.hpp"
#include "gradpce/sampling.hpp"

namespace gradpce {

struct SolverOptions {
  /// Relative duality gap required to certify optimality.
  double tolerance = 1e-8;
  /// Cap on homotopy breakpoints.
  int max_iterations = 100000;
};

enum class SolveStatus {
  optimal,          ///< residual <= delta and duality gap certified
  infeasible,       ///< delta below dist(rhs, range(A)); minimum-residual point returned
  iteration_limit,  ///< ran out of iterations; best iterate returned
  uncertified,      ///< feasible but the duality gap exceeded the tolerance
};

std::string to_string(SolveStatus status);

/// Result of min ||c||_1 s.t. ||rhs - A c||_2 <= delta. Coefficients live in
/// the variable of the system (the weighted one when weights were applied).
struct SparseSolution {
  Eigen::VectorXd coefficients;
  double delta_used = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  SolveStatus status = SolveStatus::iteration_limit;
  /// Relative gap between ||c||_1 and the dual objective.
  double duality_gap = 0.0;
  /// Multiplier of the equivalent penalized problem at the solution.
  double lambda = 0.0;
};

/// Constrained basis pursuit denoising, solved exactly by following the
/// piecewise-linear l1-penalized path from lambda = ||A^T b||_inf down to the
/// breakpoint segment where the residual norm equals delta.
SparseSolution solve_bpdn(const RowMatrix& matrix, const Eigen::VectorXd& rhs, double delta,
                          const SolverOptions& options = {});
SparseSolution solve_bpdn(const MeasurementSystem& system, double delta,
                          const SolverOptions& options = {});

/// One path traversal serving several tolerances; results follow the order of
/// `deltas`.
std::vector<SparseSolution> solve_bpdn_path(const RowMatrix& matrix, const Eigen::VectorXd& rhs,
                                            std::span<const double> deltas,
                                            const SolverOptions& options = {});

struct CvReport {
  std::vector<double> candidate_deltas;
  std::vector<double> validation_errors;
  double chosen_delta = 0.0;
  int folds = 0;
};

/// `count` log-spaced tolerances spanning [lo, hi] * rhs_norm, ascending.
std::vector<double> default_delta_grid(double rhs_norm, int count = 12, double lo = 1e-6,
                                       double hi = 1.0);

/// K-fold selection of delta. Samples (not rows) are split into folds so a
/// sample's value and derivative rows stay together; each fold trains with
/// delta * sqrt(train_rows / total_rows) and scores the held-out residual norm.
/// Ties resolve to the smaller delta.
CvReport cross_validate_delta(const MeasurementSystem& system, int folds,
                              std::span<const double> grid, std::uint64_t seed,
                              const SolverOptions& options = {});

/// Minimum-residual solution by column-pivoted QR. Throws when the matrix is
/// numerically rank deficient.
SparseSolution solve_least_squares(const MeasurementSystem& system);

/// Maps a weighted-variable solution to PCE coefficients: entry j times the
/// gradient weight of basis function j. Identity when weights were not applied.
Eigen::VectorXd unweight(const Eigen::VectorXd& weighted, const Basis& basis,
                         bool weights_applied);
Eigen::VectorXd unweight(const SparseSolution& solution, const Basis& basis,
                         bool weights_applied);

/// Inverse of unweight.
Eigen::VectorXd reweight(const Eigen::VectorXd& coefficients, const Basis& basis,
                         bool weights_applied);

}  // namespace gradpce
