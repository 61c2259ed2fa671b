#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "gradpce/basis.hpp"
#include "gradpce/experiments.hpp"
#include "gradpce/sampling.hpp"

namespace gradpce {

struct KlConfig {
  int dim = 4;
  /// Nystrom points per axis on [0, 1].
  int grid_resolution = 128;
  double sigma = 0.5;
  double mean_log = 0.1;
  double correlation_length = 0.25;
};

/// d = 30, l_c = 1/16, sigma = 0.5, mean 0.1.
KlConfig paper_pde_preset();
/// d = 4, l_c = 1/4, sigma = 0.5, mean 0.1.
KlConfig desk_preset();
/// "paper-pde" or "desk".
KlConfig kl_preset(const std::string& name);

/// Truncated Karhunen-Loeve expansion of log a on [0, 1]^2 with covariance
/// exp(-(dx^2 + dy^2) / l_c^2). The kernel is a product of two 1-D kernels, so
/// its eigenpairs are products of 1-D eigenpairs; those come from a midpoint
/// Nystrom discretization and are evaluated off-grid by Nystrom interpolation.
class KlField {
 public:
  explicit KlField(const KlConfig& config);

  const KlConfig& config() const noexcept { return config_; }
  int dim() const noexcept { return config_.dim; }
  /// Descending.
  const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
  /// 1-D factor indices (along x, along y) of mode k.
  std::pair<int, int> mode(int k) const { return modes_[static_cast<std::size_t>(k)]; }

  /// phi_k(x, y).
  double eigenfunction(int k, double x, double y) const;
  /// Rows: points; columns: modes.
  Eigen::MatrixXd eigenfunctions_at(std::span<const double> xs, std::span<const double> ys) const;
  /// Eigenfunctions on the tensor Nystrom grid, columns are modes; with the
  /// grid quadrature weights h^2 they are orthonormal.
  Eigen::MatrixXd eigenfunctions_on_grid() const;
  double grid_weight() const;

  /// log a(x, y; xi) - mean_log.
  double log_fluctuation(double x, double y, std::span<const double> xi) const;
  double coefficient(double x, double y, std::span<const double> xi) const;

  /// xi' with a(x, y; xi') = a(y, x; xi). Throws when a mode's transpose
  /// partner is outside the retained set.
  std::vector<double> transposed(std::span<const double> xi) const;

 private:
  double axis_function(int i, double t) const;

  KlConfig config_;
  Eigen::VectorXd nodes_;
  Eigen::VectorXd axis_values_;   // 1-D eigenvalues, descending
  Eigen::MatrixXd axis_vectors_;  // 1-D eigenfunctions at the nodes
  Eigen::VectorXd eigenvalues_;
  std::vector<std::pair<int, int>> modes_;
};

KlField build_kl(const KlConfig& config);

/// Stiffness system of -div(a grad u) = 1 on [0,1]^2, u = 0 on the boundary,
/// with bilinear elements on an n x n grid and a taken at element centroids.
/// Unknowns are the interior nodes, numbered row by row.
struct DiscreteOperator {
  int mesh_n = 0;
  Eigen::SparseMatrix<double> stiffness;
  Eigen::VectorXd load;
  /// Coefficient per element, row-major over elements.
  Eigen::VectorXd element_coefficient;
  /// Degree of freedom of the node at (0.5, 0.5) (or the nearest node).
  int qoi_dof = 0;

  int interior() const noexcept { return mesh_n - 1; }
  /// Unknown at grid node (i, j), or -1 on the boundary.
  int dof(int i, int j) const;
};

struct ForwardSolution {
  double u_qoi = 0.0;
  Eigen::VectorXd state;
  DiscreteOperator op;
  int linear_solves = 0;
};

/// Element centroids (x, y) of an n x n grid, row-major.
std::pair<std::vector<double>, std::vector<double>> element_centroids(int mesh_n);

/// Assembles the operator for a given element coefficient field.
DiscreteOperator assemble_operator(int mesh_n, const Eigen::VectorXd& element_coefficient);

/// Direct sparse solve; throws when the relative residual exceeds 1e-10.
Eigen::VectorXd solve_spd(const Eigen::SparseMatrix<double>& matrix, const Eigen::VectorXd& rhs);

ForwardSolution solve_forward(const KlField& field, std::span<const double> xi, int mesh_n);

enum class SensitivityAssembly {
  /// Sparse dK/dxi_k assembled per mode, then lambda^T (dK/dxi_k) w.
  sparse_matrix,
  /// Per-element adjoint-weighted energies contracted with the mode values.
  element_chain_rule,
};

struct AdjointGradient {
  std::vector<double> gradient;
  int linear_solves = 0;
};

/// du_qoi/dxi from one adjoint solve K lambda = -e_qoi (the matrix is
/// refactorized, as the cost model assumes) and du/dxi_k = lambda^T (dK/dxi_k) w,
/// with da_e/dxi_k = a_e sigma sqrt(lambda_k) phi_k(centroid_e).
AdjointGradient solve_adjoint_gradient(const ForwardSolution& forward, const KlField& field,
                                       SensitivityAssembly assembly =
                                           SensitivityAssembly::element_chain_rule);

/// Evaluator for assemble(): forward solve plus, when asked, the adjoint.
QoiEvaluator pde_evaluator(const KlField& field, int mesh_n);

struct ReferenceConfig {
  /// Least-squares samples = oversampling * P.
  int oversampling = 20;
  int validation_samples = 200;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct ReferenceExpansion {
  Eigen::VectorXd coefficients;
  int samples = 0;
  /// ||u - u_hat|| / ||u|| on fresh validation samples.
  double validation_error = 0.0;
};

ReferenceExpansion compute_reference(const KlField& field, int mesh_n, const Basis& basis,
                                     const ReferenceConfig& config);

/// Recovery study on the PDE quantity of interest at mesh `mesh_n`, scored
/// against `reference` (typically computed on a finer mesh).
ExperimentReport run_pde_study(const KlField& field, int mesh_n, const Basis& basis,
                               const Eigen::VectorXd& reference, const StudyConfig& config);

std::vector<double> default_pde_grid();

}  // namespace gradpce
