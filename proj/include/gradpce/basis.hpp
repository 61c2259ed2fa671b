#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace gradpce {

/// Orthonormal probabilists' Hermite polynomial psi_n(x), E[psi_n^2] = 1 under
/// the standard Gaussian. Evaluated with the normalized three-term recurrence.
double hermite_eval(int order, double x);

/// d/dx psi_n(x) = sqrt(n) psi_{n-1}(x); zero for n == 0.
double hermite_derivative(int order, double x);

/// Fills out[n] = psi_n(x) for n = 0..out.size()-1.
void hermite_table(double x, std::span<double> out);

/// Degrees of a tensor-product Hermite polynomial, one per input variable.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> degrees);

  std::size_t dimension() const noexcept { return degrees_.size(); }
  int total() const noexcept { return total_; }
  int operator[](std::size_t k) const { return degrees_[k]; }
  const std::vector<int>& degrees() const noexcept { return degrees_; }

  /// (variable, degree) pairs with degree > 0, ascending by variable.
  const std::vector<std::pair<int, int>>& support() const noexcept { return support_; }

  std::string to_string() const;

  friend bool operator==(const MultiIndex& a, const MultiIndex& b) {
    return a.degrees_ == b.degrees_;
  }

 private:
  std::vector<int> degrees_;
  std::vector<std::pair<int, int>> support_;
  int total_ = 0;
};

/// Ordered set of multi-indices. Instances returned by enumerate_basis hold the
/// full total-degree set; truncate() keeps a leading prefix.
class Basis {
 public:
  Basis(int dimension, std::vector<MultiIndex> indices);

  int dimension() const noexcept { return dimension_; }
  /// Largest total degree present.
  int order() const noexcept { return order_; }
  std::size_t size() const noexcept { return indices_.size(); }
  const MultiIndex& operator[](std::size_t j) const { return indices_[j]; }
  const std::vector<MultiIndex>& indices() const noexcept { return indices_; }

  /// First `count` functions (or all of them when count >= size()).
  Basis truncate(std::size_t count) const;

  /// Column position of `index`, or size() when absent.
  std::size_t find(const MultiIndex& index) const;

  /// values[j] = psi_j(point).
  void evaluate(std::span<const double> point, std::span<double> values) const;

  /// As evaluate(); additionally partials(k, j) = d psi_j / d xi_k.
  void evaluate_with_gradient(std::span<const double> point, std::span<double> values,
                              Eigen::Ref<Eigen::MatrixXd> partials) const;

 private:
  int dimension_ = 0;
  int order_ = 0;
  std::vector<MultiIndex> indices_;
};

/// Number of multi-indices of dimension d with total degree <= p, i.e.
/// (d+p)!/(d! p!). Throws std::overflow_error when it does not fit size_t.
std::size_t total_degree_cardinality(int dimension, int order);

/// All multi-indices with total <= order, ascending in total degree and, within
/// one degree, descending lexicographically so lower-numbered variables carry
/// degree first: (1,0,...) precedes (0,1,...).
Basis enumerate_basis(int dimension, int order);

/// Product over k of psi_{i_k}(point_k).
double eval_multivariate(const MultiIndex& index, std::span<const double> point);

/// Partial derivative of the tensor product along variable `direction` (0-based).
double eval_multivariate_partial(const MultiIndex& index, std::span<const double> point,
                                 int direction);

/// (1 + total degree)^(-1/2): scales a column of the gradient-enhanced matrix
/// to unit expected squared norm.
double gradient_weight(const MultiIndex& index);

Eigen::VectorXd gradient_weights(const Basis& basis);

}  // namespace gradpce
