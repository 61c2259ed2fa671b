#include "gradpce/basis.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gradpce {

namespace {

void require_finite(double x) {
  if (!std::isfinite(x)) {
    throw std::domain_error("hermite polynomial evaluated at a non-finite point");
  }
}

void check_dimension(const MultiIndex& index, std::span<const double> point) {
  if (index.dimension() != point.size()) {
    throw std::invalid_argument("multi-index has dimension " +
                                std::to_string(index.dimension()) + " but point has " +
                                std::to_string(point.size()));
  }
}

// Appends every composition of `total` into `slots` parts, descending lex.
void append_compositions(int total, std::vector<int>& prefix, std::size_t slots,
                         std::vector<MultiIndex>& out) {
  if (slots == 1) {
    prefix.push_back(total);
    out.emplace_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int first = total; first >= 0; --first) {
    prefix.push_back(first);
    append_compositions(total - first, prefix, slots - 1, out);
    prefix.pop_back();
  }
}

}  // namespace

double hermite_eval(int order, double x) {
  if (order < 0) throw std::invalid_argument("hermite order must be non-negative");
  require_finite(x);
  double prev = 0.0;
  double cur = 1.0;
  for (int n = 0; n < order; ++n) {
    const double next = (x * cur - std::sqrt(static_cast<double>(n)) * prev) /
                        std::sqrt(static_cast<double>(n + 1));
    prev = cur;
    cur = next;
  }
  return cur;
}

double hermite_derivative(int order, double x) {
  if (order < 0) throw std::invalid_argument("hermite order must be non-negative");
  if (order == 0) {
    require_finite(x);
    return 0.0;
  }
  return std::sqrt(static_cast<double>(order)) * hermite_eval(order - 1, x);
}

void hermite_table(double x, std::span<double> out) {
  require_finite(x);
  if (out.empty()) return;
  out[0] = 1.0;
  if (out.size() == 1) return;
  out[1] = x;
  for (std::size_t n = 1; n + 1 < out.size(); ++n) {
    out[n + 1] = (x * out[n] - std::sqrt(static_cast<double>(n)) * out[n - 1]) /
                 std::sqrt(static_cast<double>(n + 1));
  }
}

MultiIndex::MultiIndex(std::vector<int> degrees) : degrees_(std::move(degrees)) {
  for (std::size_t k = 0; k < degrees_.size(); ++k) {
    if (degrees_[k] < 0) throw std::invalid_argument("multi-index degrees must be >= 0");
    total_ += degrees_[k];
    if (degrees_[k] > 0) support_.emplace_back(static_cast<int>(k), degrees_[k]);
  }
}

std::string MultiIndex::to_string() const {
  std::string s = "(";
  for (std::size_t k = 0; k < degrees_.size(); ++k) {
    if (k) s += ' ';
    s += std::to_string(degrees_[k]);
  }
  return s + ")";
}

Basis::Basis(int dimension, std::vector<MultiIndex> indices)
    : dimension_(dimension), indices_(std::move(indices)) {
  if (dimension < 1) throw std::invalid_argument("basis dimension must be >= 1");
  for (const auto& idx : indices_) {
    if (idx.dimension() != static_cast<std::size_t>(dimension)) {
      throw std::invalid_argument("multi-index dimension does not match basis dimension");
    }
    order_ = std::max(order_, idx.total());
  }
}

Basis Basis::truncate(std::size_t count) const {
  if (count >= indices_.size()) return *this;
  return Basis(dimension_, {indices_.begin(), indices_.begin() + count});
}

std::size_t Basis::find(const MultiIndex& index) const {
  for (std::size_t j = 0; j < indices_.size(); ++j) {
    if (indices_[j] == index) return j;
  }
  return indices_.size();
}

void Basis::evaluate(std::span<const double> point, std::span<double> values) const {
  if (point.size() != static_cast<std::size_t>(dimension_) || values.size() != size()) {
    throw std::invalid_argument("Basis::evaluate: size mismatch");
  }
  const std::size_t stride = static_cast<std::size_t>(order_) + 1;
  std::vector<double> table(stride * point.size());
  for (std::size_t k = 0; k < point.size(); ++k) {
    hermite_table(point[k], std::span<double>(table).subspan(k * stride, stride));
  }
  for (std::size_t j = 0; j < indices_.size(); ++j) {
    double v = 1.0;
    for (auto [k, deg] : indices_[j].support()) v *= table[k * stride + deg];
    values[j] = v;
  }
}

void Basis::evaluate_with_gradient(std::span<const double> point, std::span<double> values,
                                   Eigen::Ref<Eigen::MatrixXd> partials) const {
  if (partials.rows() != dimension_ || partials.cols() != static_cast<Eigen::Index>(size())) {
    throw std::invalid_argument("Basis::evaluate_with_gradient: partials has wrong shape");
  }
  evaluate(point, values);
  const std::size_t stride = static_cast<std::size_t>(order_) + 1;
  std::vector<double> table(stride * point.size());
  for (std::size_t k = 0; k < point.size(); ++k) {
    hermite_table(point[k], std::span<double>(table).subspan(k * stride, stride));
  }
  partials.setZero();
  for (std::size_t j = 0; j < indices_.size(); ++j) {
    const auto& support = indices_[j].support();
    for (std::size_t a = 0; a < support.size(); ++a) {
      const auto [dir, deg] = support[a];
      double v = std::sqrt(static_cast<double>(deg)) * table[dir * stride + deg - 1];
      for (std::size_t b = 0; b < support.size(); ++b) {
        if (b != a) v *= table[support[b].first * stride + support[b].second];
      }
      partials(dir, static_cast<Eigen::Index>(j)) = v;
    }
  }
}

std::size_t total_degree_cardinality(int dimension, int order) {
  if (dimension < 1 || order < 0) {
    throw std::invalid_argument("cardinality requires dimension >= 1 and order >= 0");
  }
  // C(d+p, p) built as prod_{k=1..p} (d+k)/k; every partial product is an
  // integer binomial coefficient, so the division is exact.
  unsigned __int128 value = 1;
  for (int k = 1; k <= order; ++k) {
    value = value * static_cast<unsigned>(dimension + k) / static_cast<unsigned>(k);
    if (value > std::numeric_limits<std::size_t>::max()) {
      throw std::overflow_error("basis cardinality overflows for dimension=" +
                                std::to_string(dimension) +
                                ", order=" + std::to_string(order));
    }
  }
  return static_cast<std::size_t>(value);
}

Basis enumerate_basis(int dimension, int order) {
  const std::size_t count = total_degree_cardinality(dimension, order);
  std::vector<MultiIndex> indices;
  indices.reserve(count);
  std::vector<int> prefix;
  prefix.reserve(static_cast<std::size_t>(dimension));
  for (int total = 0; total <= order; ++total) {
    append_compositions(total, prefix, static_cast<std::size_t>(dimension), indices);
  }
  return Basis(dimension, std::move(indices));
}

double eval_multivariate(const MultiIndex& index, std::span<const double> point) {
  check_dimension(index, point);
  double v = 1.0;
  for (std::size_t k = 0; k < point.size(); ++k) v *= hermite_eval(index[k], point[k]);
  return v;
}

double eval_multivariate_partial(const MultiIndex& index, std::span<const double> point,
                                 int direction) {
  check_dimension(index, point);
  if (direction < 0 || static_cast<std::size_t>(direction) >= point.size()) {
    throw std::out_of_range("partial derivative direction " + std::to_string(direction) +
                            " outside [0, " + std::to_string(point.size()) + ")");
  }
  double v = 1.0;
  for (std::size_t k = 0; k < point.size(); ++k) {
    v *= (static_cast<int>(k) == direction) ? hermite_derivative(index[k], point[k])
                                            : hermite_eval(index[k], point[k]);
  }
  return v;
}

double gradient_weight(const MultiIndex& index) {
  return 1.0 / std::sqrt(1.0 + static_cast<double>(index.total()));
}

Eigen::VectorXd gradient_weights(const Basis& basis) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j) {
    w[static_cast<Eigen::Index>(j)] = gradient_weight(basis[j]);
  }
  return w;
}

}  // namespace gradpce
