#pragma once

#include <Eigen/Core>

namespace gradpce {

struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// n-point Gauss-Hermite rule for the standard normal density (weights sum to
/// one), from the eigen-decomposition of the Jacobi matrix of the monic
/// probabilists' Hermite recurrence. Exact for polynomials of degree <= 2n - 1.
QuadratureRule gauss_hermite(int n);

}  // namespace gradpce
