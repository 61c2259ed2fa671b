#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include <Eigen/Core>

#include "gradpce/basis.hpp"
#include "gradpce/sampling.hpp"

namespace gradpce {

/// Ball {xi : ||xi||^2 <= (4 + epsilon) p + 2} on which Hermite polynomials of
/// total order p are uniformly bounded.
struct TruncationSet {
  double epsilon = 1e-2;
  double radius_sq = 0.0;

  static TruncationSet for_order(int order, double epsilon = 1e-2);
  bool contains(std::span<const double> point) const;
};

/// Candidate points for coherence suprema: the origin plus a uniform radial
/// grid, out to the boundary, along every signed coordinate axis and along
/// seeded random directions. At least `budget` points in total (budget >= 1000).
RowMatrix coherence_candidates(int dim, const TruncationSet& trunc, int budget,
                               std::uint64_t seed);

/// max_k max_points psi_k(xi)^2. A lower bound on the supremum over Q.
double coherence_mu(const Basis& basis, const RowMatrix& candidates);
double coherence_mu(const Basis& basis, const TruncationSet& trunc, int budget,
                    std::uint64_t seed = 0);

/// max_k max_points ||X(:, k)||^2 with X the gradient-normalized block of the
/// d derivative rows and the value row at one point.
double coherence_beta(const Basis& basis, const RowMatrix& candidates);
double coherence_beta(const Basis& basis, const TruncationSet& trunc, int budget,
                      std::uint64_t seed = 0);

/// Restricted isometry constant of the N^{-1/2}-scaled matrix at sparsity s,
/// or a lower bound on it when only some subsets were examined.
struct RicEstimate {
  int s = 0;
  double value = 0.0;
  std::uint64_t subsets_examined = 0;
  bool exact = false;
};

/// 3 / (4 + sqrt(6)): the RIC level below which l1 recovery is stable.
double ric_threshold();

/// Number of s-subsets of p columns, saturating at UINT64_MAX.
std::uint64_t subset_count(std::uint64_t p, std::uint64_t s);

/// Every s-column subset; throws std::length_error past `max_subsets`.
RicEstimate ric_exhaustive(const MeasurementSystem& system, int s,
                           std::uint64_t max_subsets = 1'000'000);

/// Max over `trials` seeded random subsets. Trial t depends only on (seed, s, t),
/// so raising `trials` only adds subsets and never lowers the value.
RicEstimate ric_monte_carlo(const MeasurementSystem& system, int s, int trials,
                            std::uint64_t seed);

/// Columns minus numerical rank (singular values above rel_tol * sigma_max).
int nullspace_dim(const MeasurementSystem& system, double rel_tol = 1e-10);

/// |(col_i, col_j)| for i != j, zero diagonal.
Eigen::MatrixXd column_inner_products(const MeasurementSystem& system);

/// Off-diagonal column inner products of the weighted gradient-enhanced
/// matrix versus the unweighted standard matrix built from the same samples.
struct InnerProductComparison {
  double sup_enhanced = 0.0;
  /// sup over pairs of |(Psi_i, Psi_j)| (1 + sum_k sqrt(i_k j_k)) / sqrt((1+|i|)(1+|j|)).
  double sup_weighted_standard = 0.0;
  double sup_standard = 0.0;
  /// Largest deviation of (PsiT_i, PsiT_j) from
  /// w_i w_j [(Psi_i, Psi_j) + sum_k sqrt(i_k j_k) (Psi_{i-e_k}, Psi_{j-e_k})].
  double max_decomposition_error = 0.0;
  /// Every pair satisfies |(PsiT_i, PsiT_j)| <= sup_standard * factor_ij <= sup_standard.
  bool pairwise_bound_holds = false;
  std::size_t pairs = 0;
};

/// Requires a downward-closed basis, an unweighted standard system and a
/// weighted gradient-enhanced system with every sample flagged.
InnerProductComparison compare_inner_products(const Basis& basis,
                                              const MeasurementSystem& standard,
                                              const MeasurementSystem& enhanced,
                                              double slack = 1e-12);

/// Smallest N with N delta* >= (s mu / C_Q)[s + log 2s + s log(P/s) - log(prob_Q^N - p*)],
/// scanning N = 1, 2, ... up to `cap`. Empty when no N qualifies.
std::optional<std::int64_t> sample_bound(int s, double basis_size, double mu, double c_q,
                                         double delta_star, double p_star, double prob_q,
                                         std::int64_t cap = 100'000'000);

/// Monte Carlo estimate of ||E[X^T X | xi in Q] - I||_2, with X the value row
/// (standard) or the weighted (d+1)-row block (gradient-enhanced).
double epsilon_q_estimate(const Basis& basis, const TruncationSet& trunc, SystemKind kind,
                          int samples, std::uint64_t seed);

}  // namespace gradpce
