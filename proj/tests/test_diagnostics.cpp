#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "gradpce/basis.hpp"
#include "gradpce/diagnostics.hpp"
#include "gradpce/experiments.hpp"
#include "gradpce/sampling.hpp"

using namespace gradpce;

namespace {

MeasurementSystem enhanced_system(int d, int p, int n, std::uint64_t seed, std::size_t keep = 0) {
  Basis b = enumerate_basis(d, p);
  if (keep > 0) b = b.truncate(keep);
  return assemble(b, draw_samples(d, n, 1.0, seed), nullptr, SystemKind::gradient_enhanced, true);
}

// Second code path for s = 2: closed-form eigenvalues of each 2x2 Gramian.
double brute_force_ric2(const MeasurementSystem& s) {
  const RowMatrix a = s.matrix / std::sqrt(static_cast<double>(s.num_samples));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
      const double p = a.col(i).squaredNorm(), q = a.col(j).squaredNorm(), r = a.col(i).dot(a.col(j));
      const double mid = 0.5 * (p + q), half = std::sqrt(0.25 * (p - q) * (p - q) + r * r);
      worst = std::max({worst, std::abs(mid + half - 1.0), std::abs(mid - half - 1.0)});
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("truncation set radius and membership") {
  const TruncationSet q = TruncationSet::for_order(3);
  CHECK(q.epsilon == 1e-2);
  CHECK(q.radius_sq == doctest::Approx(4.01 * 3 + 2.0).epsilon(1e-15));
  CHECK(q.contains(std::vector<double>{1.0, 1.0}));
  CHECK_FALSE(q.contains(std::vector<double>{3.0, 2.5}));
  CHECK_THROWS(TruncationSet::for_order(2, 0.0));
}

TEST_CASE("coherence examples in one dimension") {
  const TruncationSet q0 = TruncationSet::for_order(0);
  CHECK(coherence_mu(enumerate_basis(1, 0), q0, 1000) == 1.0);
  CHECK(coherence_beta(enumerate_basis(1, 0), q0, 1000) == 1.0);
  const TruncationSet q1 = TruncationSet::for_order(1);
  CHECK(coherence_mu(enumerate_basis(1, 1), q1, 1000) == doctest::Approx(q1.radius_sq).epsilon(1e-12));
  CHECK(coherence_beta(enumerate_basis(1, 1), q1, 1000) ==
        doctest::Approx((q1.radius_sq + 1.0) / 2.0).epsilon(1e-12));
  // Independent 1-d grid search of sup (1 + x^2)/2 over |x| <= sqrt(radius).
  double grid_best = 0.0;
  const double r = std::sqrt(q1.radius_sq);
  for (int t = 0; t <= 100000; ++t) {
    const double x = -r + 2.0 * r * t / 100000;
    grid_best = std::max(grid_best, (1.0 + x * x) / 2.0);
  }
  CHECK(coherence_beta(enumerate_basis(1, 1), q1, 1000) == doctest::Approx(grid_best).epsilon(1e-9));
}

TEST_CASE("coherence growth is of the order the asymptotic constant suggests") {
  const double mu = coherence_mu(enumerate_basis(2, 3), TruncationSet::for_order(3), 2000, 4);
  const double ratio = mu / std::pow(3.8, 3);
  CHECK(ratio > 0.1);
  CHECK(ratio < 10.0);
}

TEST_CASE("coherence candidates: origin, boundary, budget, determinism") {
  const TruncationSet q = TruncationSet::for_order(2);
  const RowMatrix c = coherence_candidates(3, q, 1000, 9);
  CHECK(c.rows() >= 1000);
  CHECK(c.row(0).norm() == 0.0);
  double max_sq = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    CHECK(c.row(i).squaredNorm() <= q.radius_sq * (1 + 1e-14));
    max_sq = std::max(max_sq, c.row(i).squaredNorm());
  }
  CHECK(max_sq == doctest::Approx(q.radius_sq).epsilon(1e-14));
  CHECK(coherence_candidates(3, q, 1000, 9) == c);
  CHECK_THROWS(coherence_candidates(3, q, 999, 9));
}

TEST_CASE("beta does not exceed mu on shared candidates") {
  for (int d = 1; d <= 3; ++d) {
    for (int p = 1; p <= 3; ++p) {
      const Basis b = enumerate_basis(d, p);
      const RowMatrix c = coherence_candidates(d, TruncationSet::for_order(p), 1000, 17 + d * p);
      CHECK(coherence_beta(b, c) < coherence_mu(b, c));
    }
  }
}

TEST_CASE("RIC at s = 1 is the worst column-norm deviation") {
  const MeasurementSystem s = enhanced_system(2, 3, 7, 21);
  const RicEstimate e = ric_exhaustive(s, 1);
  double expected = 0.0;
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    expected = std::max(expected, std::abs(s.matrix.col(j).squaredNorm() / s.num_samples - 1.0));
  }
  CHECK(e.value == doctest::Approx(expected).epsilon(1e-13));
  CHECK(e.exact);
  CHECK(e.subsets_examined == 10);
}

TEST_CASE("isometric columns have zero RIC") {
  MeasurementSystem s;
  s.num_samples = 4;
  s.matrix = RowMatrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) s.matrix(i, i) = 2.0;
  s.rhs = Eigen::VectorXd::Zero(4);
  for (int k = 1; k <= 4; ++k) CHECK(ric_exhaustive(s, k).value <= 1e-15);
}

TEST_CASE("exhaustive RIC matches a second code path") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const MeasurementSystem s = enhanced_system(2, 4, 10, seed, 12);
    REQUIRE(s.cols() == 12);
    CHECK(std::abs(ric_exhaustive(s, 2).value - brute_force_ric2(s)) <= 1e-12);
  }
}

TEST_CASE("RIC at s = P is the spectral deviation of the Gramian") {
  const MeasurementSystem s = enhanced_system(2, 2, 5, 31);
  const Eigen::MatrixXd m = gramian(s) - Eigen::MatrixXd::Identity(s.cols(), s.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const double norm = eig.eigenvalues().cwiseAbs().maxCoeff();
  CHECK(ric_exhaustive(s, static_cast<int>(s.cols())).value == doctest::Approx(norm).epsilon(1e-12));
}

TEST_CASE("Monte Carlo RIC: coverage, positivity, monotone in trials") {
  const MeasurementSystem s = enhanced_system(2, 4, 10, 5, 12);
  const RicEstimate full = ric_exhaustive(s, 3);
  const RicEstimate mc = ric_monte_carlo(s, 3, 20000, 99);
  CHECK(mc.exact);
  CHECK(mc.subsets_examined == subset_count(12, 3));
  CHECK(mc.value == full.value);
  CHECK(ric_monte_carlo(s, 3, 1, 99).value >= 0.0);
  double previous = 0.0;
  for (int trials = 1; trials <= 256; trials *= 2) {
    const RicEstimate e = ric_monte_carlo(s, 3, trials, 99);
    CHECK(e.value >= previous);
    CHECK(e.value <= full.value);
    previous = e.value;
  }
}

TEST_CASE("exhaustive guard and subset counting") {
  CHECK(subset_count(12, 3) == 220);
  CHECK(subset_count(165, 0) == 1);
  CHECK(subset_count(5, 7) == 0);
  CHECK(subset_count(3276, 50) == std::numeric_limits<std::uint64_t>::max());
  const MeasurementSystem s = enhanced_system(3, 3, 5, 1);
  CHECK_THROWS_AS(ric_exhaustive(s, 10, 1000), std::length_error);
  CHECK_THROWS(ric_exhaustive(s, 0));
  CHECK(ric_threshold() == doctest::Approx(0.4652).epsilon(1e-4));
}

TEST_CASE("null-space dimensions") {
  const Basis b = enumerate_basis(3, 3);  // P = 20
  const MeasurementSystem psi = assemble(b, draw_samples(3, 12, 1.0, 4), nullptr, SystemKind::standard, false);
  CHECK(nullspace_dim(psi) == 8);
  const MeasurementSystem small = enhanced_system(3, 3, 3, 4);
  CHECK(nullspace_dim(small) == 20 - 12);
  CHECK(nullspace_dim(enhanced_system(3, 3, 5, 4)) == 0);
}

TEST_CASE("column inner products of orthogonal columns vanish") {
  MeasurementSystem s;
  s.num_samples = 3;
  s.matrix = RowMatrix::Zero(3, 3);
  s.matrix(0, 0) = 1.0;
  s.matrix(1, 1) = -2.0;
  s.matrix(2, 2) = 0.5;
  CHECK(column_inner_products(s).cwiseAbs().maxCoeff() == 0.0);
  const MeasurementSystem t = enhanced_system(2, 2, 4, 8);
  const Eigen::MatrixXd ip = column_inner_products(t);
  CHECK(ip.diagonal().isZero(0.0));
  CHECK(ip == ip.transpose());
  CHECK(ip(1, 2) == doctest::Approx(std::abs(t.matrix.col(1).dot(t.matrix.col(2)))));
}

TEST_CASE("inner-product chain and 1-d decomposition") {
  const Basis b = enumerate_basis(1, 4);
  const SampleSet samples = draw_samples(1, 6, 1.0, 44);
  const auto psi = assemble(b, samples, nullptr, SystemKind::standard, false);
  const auto enhanced = assemble(b, samples, nullptr, SystemKind::gradient_enhanced, true);
  const auto cmp = compare_inner_products(b, psi, enhanced);
  CHECK(cmp.pairwise_bound_holds);
  CHECK(cmp.sup_enhanced <= cmp.sup_weighted_standard + 1e-12);
  CHECK(cmp.sup_weighted_standard <= cmp.sup_standard + 1e-12);
  CHECK(cmp.max_decomposition_error <= 1e-12);
  // Pair (1, 2): w1 w2 [(Psi_1, Psi_2) + sqrt(2) (Psi_0, Psi_1)], computed by hand.
  const double lhs = enhanced.matrix.col(1).dot(enhanced.matrix.col(2));
  const double rhs = (psi.matrix.col(1).dot(psi.matrix.col(2)) +
                      std::sqrt(2.0) * psi.matrix.col(0).dot(psi.matrix.col(1))) /
                     std::sqrt(2.0 * 3.0);
  CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
}

TEST_CASE("inner-product comparison validates its inputs") {
  const Basis b = enumerate_basis(2, 2);
  const SampleSet samples = draw_samples(2, 5, 1.0, 3);
  const auto psi = assemble(b, samples, nullptr, SystemKind::standard, false);
  const auto unweighted = assemble(b, samples, nullptr, SystemKind::gradient_enhanced, false);
  CHECK_THROWS(compare_inner_products(b, psi, unweighted));
  CHECK_THROWS(compare_inner_products(b, unweighted, unweighted));
}

TEST_CASE("weight factor never exceeds one") {
  for (int i = 1; i <= 50; ++i) {
    for (int j = 1; j <= 50; ++j) {
      const double f = (1.0 + std::sqrt(double(i) * j)) / std::sqrt((1.0 + i) * (1.0 + j));
      CHECK(f <= 1.0 + 1e-15);
      const double shifted =
          (1.0 + std::sqrt(double(i - 1) * (j - 1))) / std::sqrt(double(i) * double(j));
      CHECK(shifted <= 1.0 + 1e-15);
    }
  }
}

TEST_CASE("sample bound") {
  const double ds = ric_threshold();
  // Frozen from an independent scalar scan.
  CHECK(sample_bound(5, 165, 50, 1, 0.4652, 0.9, 1.0) == 14558);
  CHECK(sample_bound(2, 10, 3, 1, ds, 0.1, 0.99) == 103);
  // With P(Q) = 1 the bound is the ceiling of the closed form.
  const double closed = (5 * 50 / 0.4652) * (5 + std::log(10.0) + 5 * std::log(33.0) - std::log(0.1));
  CHECK(*sample_bound(5, 165, 50, 1, 0.4652, 0.9, 1.0) == static_cast<std::int64_t>(std::ceil(closed)));
  CHECK_FALSE(sample_bound(5, 165, 50, 1, ds, 0.5, 0.999).has_value());
  CHECK_THROWS(sample_bound(5, 165, 50, 1, 1.2, 0.5, 1.0));
  CHECK_THROWS(sample_bound(0, 165, 50, 1, ds, 0.5, 1.0));
}

TEST_CASE("epsilon_Q against truncated-Gaussian moments") {
  const TruncationSet q = TruncationSet::for_order(1);
  // 1 - E[x^2 | x^2 <= 6.01] for a standard normal, from scipy.
  const double bias = 0.09829797961234588;
  CHECK(epsilon_q_estimate(enumerate_basis(1, 1), q, SystemKind::standard, 400000, 3) ==
        doctest::Approx(bias).epsilon(0.03));
  CHECK(epsilon_q_estimate(enumerate_basis(1, 1), q, SystemKind::gradient_enhanced, 400000, 3) ==
        doctest::Approx(bias / 2).epsilon(0.05));
  const double a = epsilon_q_estimate(enumerate_basis(2, 2), TruncationSet::for_order(2),
                                      SystemKind::gradient_enhanced, 5000, 8);
  const double b = epsilon_q_estimate(enumerate_basis(2, 2), TruncationSet::for_order(2),
                                      SystemKind::gradient_enhanced, 5000, 8);
  CHECK(a == b);
}

}  // TEST_SUITE
