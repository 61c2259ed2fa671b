#include "gradpce/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "gradpce/random.hpp"

namespace gradpce {

namespace {

constexpr int kRadialPoints = 32;

double max_identity_deviation(const Eigen::MatrixXd& m) {
  if (m.rows() == 1) return std::abs(m(0, 0) - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  return std::max(std::abs(ev.minCoeff() - 1.0), std::abs(ev.maxCoeff() - 1.0));
}

double subset_deviation(const Eigen::MatrixXd& gram, std::span<const Eigen::Index> cols) {
  const auto s = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd sub(s, s);
  for (Eigen::Index a = 0; a < s; ++a) {
    for (Eigen::Index b = 0; b < s; ++b) sub(a, b) = gram(cols[a], cols[b]);
  }
  return max_identity_deviation(sub);
}

void check_sparsity(const MeasurementSystem& system, int s) {
  if (s < 1 || s > system.cols()) {
    throw std::invalid_argument("RIC sparsity " + std::to_string(s) + " outside [1, " +
                                std::to_string(system.cols()) + "]");
  }
}

}  // namespace

TruncationSet TruncationSet::for_order(int order, double epsilon) {
  if (order < 0) throw std::invalid_argument("truncation order must be >= 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("truncation epsilon must be > 0");
  return {epsilon, (4.0 + epsilon) * order + 2.0};
}

bool TruncationSet::contains(std::span<const double> point) const {
  double sq = 0.0;
  for (double v : point) sq += v * v;
  return sq <= radius_sq;
}

RowMatrix coherence_candidates(int dim, const TruncationSet& trunc, int budget,
                               std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("coherence search needs dim >= 1");
  if (budget < 1000) throw std::invalid_argument("coherence search budget must be >= 1000");
  const int per_direction = kRadialPoints - 1;
  const int axis_dirs = 2 * dim;
  const int directions = std::max(axis_dirs, (budget - 1 + per_direction - 1) / per_direction);
  const double radius = std::sqrt(trunc.radius_sq);

  RowMatrix pts = RowMatrix::Zero(1 + static_cast<Eigen::Index>(directions) * per_direction, dim);
  Rng rng(seed);
  Eigen::VectorXd dir(dim);
  Eigen::Index row = 1;
  for (int t = 0; t < directions; ++t) {
    if (t < axis_dirs) {
      dir.setZero();
      dir[t / 2] = (t % 2 == 0) ? 1.0 : -1.0;
    } else {
      double norm = 0.0;
      while (norm < 1e-12) {
        for (int k = 0; k < dim; ++k) dir[k] = rng.normal();
        norm = dir.norm();
      }
      dir /= norm;
    }
    for (int r = 1; r <= per_direction; ++r) {
      // Last grid point sits exactly on the boundary sphere.
      const double rad = (r == per_direction) ? radius : radius * r / per_direction;
      pts.row(row++) = (rad * dir).transpose();
    }
  }
  return pts;
}

double coherence_mu(const Basis& basis, const RowMatrix& candidates) {
  std::vector<double> values(basis.size());
  double best = 0.0;
  for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
    basis.evaluate({candidates.row(i).data(), static_cast<std::size_t>(candidates.cols())}, values);
    for (double v : values) best = std::max(best, v * v);
  }
  return best;
}

double coherence_mu(const Basis& basis, const TruncationSet& trunc, int budget,
                    std::uint64_t seed) {
  return coherence_mu(basis, coherence_candidates(basis.dimension(), trunc, budget, seed));
}

double coherence_beta(const Basis& basis, const RowMatrix& candidates) {
  const auto p = static_cast<Eigen::Index>(basis.size());
  const Eigen::VectorXd w = gradient_weights(basis);
  std::vector<double> values(basis.size());
  Eigen::MatrixXd partials(basis.dimension(), p);
  double best = 0.0;
  for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
    basis.evaluate_with_gradient(
        {candidates.row(i).data(), static_cast<std::size_t>(candidates.cols())}, values, partials);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double col_sq = (values[j] * values[j] + partials.col(j).squaredNorm()) * w[j] * w[j];
      best = std::max(best, col_sq);
    }
  }
  return best;
}

double coherence_beta(const Basis& basis, const TruncationSet& trunc, int budget,
                      std::uint64_t seed) {
  return coherence_beta(basis, coherence_candidates(basis.dimension(), trunc, budget, seed));
}

double ric_threshold() { return 3.0 / (4.0 + std::sqrt(6.0)); }

std::uint64_t subset_count(std::uint64_t p, std::uint64_t s) {
  if (s > p) return 0;
  s = std::min(s, p - s);
  unsigned __int128 value = 1;
  for (std::uint64_t k = 1; k <= s; ++k) {
    value = value * (p - s + k) / k;
    if (value > std::numeric_limits<std::uint64_t>::max()) {
      return std::numeric_limits<std::uint64_t>::max();
    }
  }
  return static_cast<std::uint64_t>(value);
}

RicEstimate ric_exhaustive(const MeasurementSystem& system, int s, std::uint64_t max_subsets) {
  check_sparsity(system, s);
  const auto p = static_cast<std::uint64_t>(system.cols());
  const std::uint64_t total = subset_count(p, static_cast<std::uint64_t>(s));
  if (total > max_subsets) {
    throw std::length_error("exhaustive RIC would examine " + std::to_string(total) +
                            " subsets (limit " + std::to_string(max_subsets) +
                            "); use ric_monte_carlo instead");
  }
  const Eigen::MatrixXd gram = gramian(system);
  std::vector<Eigen::Index> cols(static_cast<std::size_t>(s));
  for (int t = 0; t < s; ++t) cols[t] = t;
  RicEstimate est{s, 0.0, 0, true};
  while (true) {
    est.value = std::max(est.value, subset_deviation(gram, cols));
    ++est.subsets_examined;
    // Next combination in lexicographic order.
    int t = s - 1;
    while (t >= 0 && cols[t] == static_cast<Eigen::Index>(p) - s + t) --t;
    if (t < 0) break;
    ++cols[t];
    for (int u = t + 1; u < s; ++u) cols[u] = cols[u - 1] + 1;
  }
  return est;
}

RicEstimate ric_monte_carlo(const MeasurementSystem& system, int s, int trials,
                            std::uint64_t seed) {
  check_sparsity(system, s);
  if (trials < 1) throw std::invalid_argument("ric_monte_carlo needs trials >= 1");
  const Eigen::MatrixXd gram = gramian(system);
  const auto p = static_cast<std::uint64_t>(system.cols());
  std::set<std::vector<Eigen::Index>> seen;
  std::vector<Eigen::Index> pool(p);
  RicEstimate est{s, 0.0, 0, false};
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(t)));
    for (std::uint64_t j = 0; j < p; ++j) pool[j] = static_cast<Eigen::Index>(j);
    for (int k = 0; k < s; ++k) {
      const auto pick = k + static_cast<std::size_t>(rng.below(p - static_cast<std::uint64_t>(k)));
      std::swap(pool[static_cast<std::size_t>(k)], pool[pick]);
    }
    std::vector<Eigen::Index> cols(pool.begin(), pool.begin() + s);
    std::sort(cols.begin(), cols.end());
    est.value = std::max(est.value, subset_deviation(gram, cols));
    seen.insert(std::move(cols));
  }
  est.subsets_examined = seen.size();
  est.exact = est.subsets_examined == subset_count(p, static_cast<std::uint64_t>(s));
  return est;
}

int nullspace_dim(const MeasurementSystem& system, double rel_tol) {
  if (system.cols() == 0) return 0;
  if (system.rows() == 0) return static_cast<int>(system.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(system.matrix);
  const auto& sv = svd.singularValues();
  const double cut = rel_tol * sv.maxCoeff();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv[i] > cut ? 1 : 0;
  return static_cast<int>(system.cols()) - rank;
}

Eigen::MatrixXd column_inner_products(const MeasurementSystem& system) {
  const auto p = system.matrix.cols();
  Eigen::MatrixXd ip = Eigen::MatrixXd::Zero(p, p);
  ip.selfadjointView<Eigen::Lower>().rankUpdate(system.matrix.transpose());
  ip = ip.selfadjointView<Eigen::Lower>();
  ip = ip.cwiseAbs();
  ip.diagonal().setZero();
  return ip;
}

InnerProductComparison compare_inner_products(const Basis& basis,
                                              const MeasurementSystem& standard,
                                              const MeasurementSystem& enhanced,
                                              double slack) {
  const auto p = static_cast<Eigen::Index>(basis.size());
  if (standard.kind != SystemKind::standard || standard.weights_applied) {
    throw std::invalid_argument("compare_inner_products: expected an unweighted standard system");
  }
  if (enhanced.kind != SystemKind::gradient_enhanced || !enhanced.weights_applied) {
    throw std::invalid_argument(
        "compare_inner_products: expected a weighted gradient-enhanced system");
  }
  if (standard.cols() != p || enhanced.cols() != p ||
      enhanced.rows() != standard.rows() * (basis.dimension() + 1)) {
    throw std::invalid_argument(
        "compare_inner_products: systems must share samples, all flagged for gradients");
  }

  const Eigen::MatrixXd std_ip = standard.matrix.transpose() * standard.matrix;
  const Eigen::MatrixXd enh_ip = enhanced.matrix.transpose() * enhanced.matrix;
  const Eigen::VectorXd w = gradient_weights(basis);
  const int d = basis.dimension();

  // lower[j][k] = column of the index j - e_k, or -1 when i_k == 0.
  std::vector<std::vector<Eigen::Index>> lower(static_cast<std::size_t>(p),
                                               std::vector<Eigen::Index>(d, -1));
  for (Eigen::Index j = 0; j < p; ++j) {
    for (int k = 0; k < d; ++k) {
      auto deg = basis[j].degrees();
      if (deg[k] == 0) continue;
      --deg[k];
      const std::size_t pos = basis.find(MultiIndex(deg));
      if (pos == basis.size()) {
        throw std::invalid_argument("compare_inner_products: basis is not downward closed");
      }
      lower[j][k] = static_cast<Eigen::Index>(pos);
    }
  }

  InnerProductComparison out;
  std::vector<double> factor(static_cast<std::size_t>(p * p), 0.0);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (i == j) continue;
      double cross = 0.0;
      double decomposed = std_ip(i, j);
      for (int k = 0; k < d; ++k) {
        const double root = std::sqrt(static_cast<double>(basis[i][k]) * basis[j][k]);
        cross += root;
        if (root > 0.0) decomposed += root * std_ip(lower[i][k], lower[j][k]);
      }
      decomposed *= w[i] * w[j];
      const double f = (1.0 + cross) * w[i] * w[j];
      factor[static_cast<std::size_t>(i * p + j)] = f;
      out.max_decomposition_error =
          std::max(out.max_decomposition_error, std::abs(enh_ip(i, j) - decomposed));
      out.sup_enhanced = std::max(out.sup_enhanced, std::abs(enh_ip(i, j)));
      out.sup_standard = std::max(out.sup_standard, std::abs(std_ip(i, j)));
      out.sup_weighted_standard = std::max(out.sup_weighted_standard, std::abs(std_ip(i, j)) * f);
      ++out.pairs;
    }
  }
  out.pairwise_bound_holds = true;
  const double tol = slack * std::max(1.0, out.sup_standard);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (i == j) continue;
      const double f = factor[static_cast<std::size_t>(i * p + j)];
      const double bound = out.sup_standard * f;
      if (std::abs(enh_ip(i, j)) > bound + tol || bound > out.sup_standard + tol) {
        out.pairwise_bound_holds = false;
      }
    }
  }
  return out;
}

std::optional<std::int64_t> sample_bound(int s, double basis_size, double mu, double c_q,
                                         double delta_star, double p_star, double prob_q,
                                         std::int64_t cap) {
  if (s < 1) throw std::invalid_argument("sample_bound: s must be >= 1");
  if (!(basis_size >= s)) throw std::invalid_argument("sample_bound: need P >= s");
  if (!(mu > 0.0) || !(c_q > 0.0)) throw std::invalid_argument("sample_bound: mu, C_Q must be > 0");
  if (!(delta_star > 0.0 && delta_star < 1.0)) {
    throw std::invalid_argument("sample_bound: delta* must lie in (0, 1)");
  }
  if (!(p_star > 0.0 && p_star < 1.0)) {
    throw std::invalid_argument("sample_bound: p* must lie in (0, 1)");
  }
  if (!(prob_q > 0.0 && prob_q <= 1.0)) {
    throw std::invalid_argument("sample_bound: P(Q) must lie in (0, 1]");
  }
  const double sd = static_cast<double>(s);
  const double base = sd + std::log(2.0 * sd) + sd * std::log(basis_size / sd);
  const double scale = sd * mu / c_q;
  const double log_prob = std::log(prob_q);
  for (std::int64_t n = 1; n <= cap; ++n) {
    const double coverage = std::exp(static_cast<double>(n) * log_prob);
    if (coverage <= p_star) return std::nullopt;  // only shrinks as n grows
    const double rhs = scale * (base - std::log(coverage - p_star));
    if (static_cast<double>(n) * delta_star >= rhs) return n;
  }
  return std::nullopt;
}

double epsilon_q_estimate(const Basis& basis, const TruncationSet& trunc, SystemKind kind,
                          int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("epsilon_q_estimate needs samples >= 1");
  const int d = basis.dimension();
  const auto p = static_cast<Eigen::Index>(basis.size());
  const Eigen::VectorXd w = gradient_weights(basis);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
  std::vector<double> point(static_cast<std::size_t>(d));
  Eigen::VectorXd values(p);
  Eigen::MatrixXd partials(d, p);
  Eigen::MatrixXd block(d + 1, p);
  Rng rng(seed);
  long accepted = 0;
  for (int i = 0; i < samples; ++i) {
    for (auto& v : point) v = rng.normal();
    if (!trunc.contains(point)) continue;
    ++accepted;
    if (kind == SystemKind::standard) {
      basis.evaluate(point, {values.data(), static_cast<std::size_t>(p)});
      acc.selfadjointView<Eigen::Lower>().rankUpdate(values);
    } else {
      basis.evaluate_with_gradient(point, {values.data(), static_cast<std::size_t>(p)}, partials);
      block.topRows(d) = partials * w.asDiagonal();
      block.row(d) = values.cwiseProduct(w).transpose();
      acc.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
    }
  }
  if (accepted == 0) throw std::runtime_error("epsilon_q_estimate: no sample fell inside Q");
  Eigen::MatrixXd mean = acc.selfadjointView<Eigen::Lower>();
  mean /= static_cast<double>(accepted);
  mean -= Eigen::MatrixXd::Identity(p, p);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mean, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace gradpce
