#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gradpce/basis.hpp"
#include "gradpce/experiments.hpp"
#include "gradpce/random.hpp"
#include "gradpce/sampling.hpp"
#include "gradpce/solver.hpp"
#include "probes.hpp"

using namespace gradpce;

namespace {

struct Planted {
  ManufacturedProblem problem;
  SampleSet samples;
  MeasurementSystem system;
};

Planted planted_system(int d, int p, int sparsity, int n, double fraction, std::uint64_t seed,
                       bool weights = true) {
  ManufacturedProblem problem = manufacture(enumerate_basis(d, p), sparsity, seed);
  SampleSet samples = draw_samples(d, n, fraction, seed + 1000);
  const auto kind = fraction > 0.0 ? SystemKind::gradient_enhanced : SystemKind::standard;
  QoiEvaluator f = [&problem](std::span<const double> x, bool g) { return evaluate_planted(problem, x, g); };
  MeasurementSystem system = assemble(problem.basis, samples, f, kind, weights && fraction > 0.0);
  return {std::move(problem), std::move(samples), std::move(system)};
}

RowMatrix gaussian_matrix(int m, int n, std::uint64_t seed) {
  Rng rng(seed);
  RowMatrix a(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  return a;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("zero solution when delta covers the data") {
  const RowMatrix a = gaussian_matrix(8, 12, 1);
  const Eigen::VectorXd b = a.col(3) * 2.0;
  for (double scale : {1.0, 1.5, 10.0}) {
    const SparseSolution s = solve_bpdn(a, b, b.norm() * scale);
    CHECK(s.coefficients.isZero(0.0));
    CHECK(s.status == SolveStatus::optimal);
    CHECK(s.residual_norm == doctest::Approx(b.norm()));
  }
}

TEST_CASE("orthogonal columns of norm sqrt(N) recover exactly") {
  const int n = 9;
  RowMatrix a = RowMatrix::Zero(n, 3);
  for (int i = 0; i < n; ++i) a(i, i % 3) = std::sqrt(3.0);
  Eigen::VectorXd c(3);
  c << -0.75, 0.0, 2.5;
  const SparseSolution s = solve_bpdn(a, a * c, 0.0);
  CHECK((s.coefficients - c).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(s.converged);
}

TEST_CASE("planted recovery at delta = 0, all-gradient weighted") {
  const Planted pl = planted_system(8, 3, 10, 60, 1.0, 77);
  const SparseSolution s = solve_bpdn(pl.system, 0.0);
  CHECK(s.status == SolveStatus::optimal);
  const Eigen::VectorXd c = unweight(s, pl.problem.basis, true);
  CHECK(rrmse(c, pl.problem.planted) < 1e-4);
}

TEST_CASE("feasibility and local optimality probes on random instances") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const RowMatrix a = gaussian_matrix(20, 40, seed);
    Rng rng(seed + 500);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(40);
    for (int k = 0; k < 4; ++k) x[static_cast<Eigen::Index>(rng.below(40))] = rng.normal();
    Eigen::VectorXd b = a * x;
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] += 0.05 * rng.normal();
    for (double frac : {0.0, 0.01, 0.1, 0.5}) {
      const double delta = frac * b.norm();
      const SparseSolution s = solve_bpdn(a, b, delta);
      CHECK(s.status == SolveStatus::optimal);
      CHECK(testing::feasible(s, a, b, delta));
      CHECK(testing::worst_l1_decrease(s, a, b, delta) <= 1e-6);
    }
  }
}

TEST_CASE("infeasible tolerance is reported") {
  // Overdetermined, inconsistent: the best residual is bounded away from zero.
  const RowMatrix a = gaussian_matrix(30, 5, 3);
  Rng rng(4);
  Eigen::VectorXd b(30);
  for (auto& v : b) v = rng.normal();
  const SparseSolution s = solve_bpdn(a, b, 1e-3);
  CHECK(s.status == SolveStatus::infeasible);
  CHECK_FALSE(s.converged);
  CHECK(s.residual_norm > 1e-3);
  CHECK_THROWS(solve_bpdn(a, b, -1.0));
}

TEST_CASE("iteration cap is reported, not hidden") {
  const RowMatrix a = gaussian_matrix(20, 40, 9);
  const Eigen::VectorXd b = a * Eigen::VectorXd::LinSpaced(40, -1, 1);
  SolverOptions opts;
  opts.max_iterations = 3;
  const SparseSolution s = solve_bpdn(a, b, 0.0, opts);
  CHECK(s.status == SolveStatus::iteration_limit);
  CHECK_FALSE(s.converged);
  CHECK(s.coefficients.allFinite());
}

TEST_CASE("path solve agrees with independent solves") {
  const Planted pl = planted_system(4, 3, 6, 20, 0.5, 5);
  const std::vector<double> deltas = {0.0, 0.3, 1e-4, 0.05};
  const auto path = solve_bpdn_path(pl.system.matrix, pl.system.rhs, deltas);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const SparseSolution one = solve_bpdn(pl.system, deltas[i]);
    CHECK((path[i].coefficients - one.coefficients).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(path[i].delta_used == deltas[i]);
  }
}

TEST_CASE("solver is deterministic") {
  const Planted pl = planted_system(5, 3, 8, 25, 1.0, 8);
  const SparseSolution a = solve_bpdn(pl.system, 1e-3);
  const SparseSolution b = solve_bpdn(pl.system, 1e-3);
  CHECK(a.coefficients == b.coefficients);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("discrete Sobolev loss equals the squared residual") {
  const Planted pl = planted_system(3, 3, 5, 8, 1.0, 15);
  const double delta = 0.2;
  const SparseSolution s = solve_bpdn(pl.system, delta);
  const Eigen::VectorXd c = unweight(s, pl.problem.basis, true);
  ManufacturedProblem fitted = pl.problem;
  fitted.planted = c;
  double loss = 0.0;
  for (int i = 0; i < pl.samples.size(); ++i) {
    const QoiSample truth = evaluate_planted(pl.problem, pl.samples.point(i));
    const QoiSample fit = evaluate_planted(fitted, pl.samples.point(i));
    loss += (truth.value - fit.value) * (truth.value - fit.value);
    for (int k = 0; k < 3; ++k) loss += std::pow(truth.gradient[k] - fit.gradient[k], 2);
  }
  CHECK(loss == doctest::Approx(s.residual_norm * s.residual_norm).epsilon(1e-9));
  CHECK(loss <= delta * delta * (1 + 1e-6));
}

TEST_CASE("default delta grid") {
  const auto g = default_delta_grid(2.0);
  REQUIRE(g.size() == 12);
  CHECK(g.front() == doctest::Approx(2e-6));
  CHECK(g.back() == doctest::Approx(2.0));
  for (std::size_t i = 1; i < g.size(); ++i) {
    CHECK(g[i] / g[i - 1] == doctest::Approx(std::pow(1e6, 1.0 / 11)));
  }
}

TEST_CASE("cross validation picks the smallest delta on noiseless data") {
  const Planted pl = planted_system(6, 3, 6, 30, 1.0, 21);
  const auto grid = default_delta_grid(pl.system.rhs.norm());
  const CvReport cv = cross_validate_delta(pl.system, 4, grid, 3);
  CHECK(cv.folds == 4);
  CHECK(cv.candidate_deltas == grid);
  REQUIRE(cv.validation_errors.size() == grid.size());
  CHECK(cv.chosen_delta == grid.front());
}

TEST_CASE("cross validation with one candidate") {
  const Planted pl = planted_system(3, 2, 3, 10, 0.0, 2);
  const std::vector<double> grid = {0.123};
  CHECK(cross_validate_delta(pl.system, 2, grid, 1).chosen_delta == 0.123);
}

TEST_CASE("cross validation tracks the noise level") {
  const Planted pl = planted_system(4, 3, 8, 60, 1.0, 33);
  MeasurementSystem noisy = pl.system;
  Rng rng(34);
  for (Eigen::Index i = 0; i < noisy.rhs.size(); ++i) noisy.rhs[i] = apply_noise(noisy.rhs[i], 1e-5, rng);
  const double eta = (noisy.rhs - pl.system.rhs).norm();
  std::vector<double> grid(40);
  for (int i = 0; i < 40; ++i) grid[i] = noisy.rhs.norm() * std::pow(10.0, -6.0 + 6.0 * i / 39);
  const CvReport cv = cross_validate_delta(noisy, 4, grid, 9);
  CHECK(cv.chosen_delta >= eta / 10.0);
  CHECK(cv.chosen_delta <= eta * 10.0);
}

TEST_CASE("cross validation preconditions") {
  const Planted pl = planted_system(2, 2, 3, 3, 0.0, 2);
  const std::vector<double> grid = {0.1};
  CHECK_THROWS(cross_validate_delta(pl.system, 1, grid, 1));
  CHECK_THROWS(cross_validate_delta(pl.system, 4, grid, 1));  // a fold would be empty
  CHECK_THROWS(cross_validate_delta(pl.system, 2, std::vector<double>{}, 1));
}

TEST_CASE("least squares") {
  const RowMatrix sq = gaussian_matrix(6, 6, 12);
  MeasurementSystem s;
  s.num_samples = 6;
  s.matrix = sq;
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(6, -2, 3);
  s.rhs = sq * x;
  CHECK((solve_least_squares(s).coefficients - x).norm() <= 1e-10 * x.norm());

  const Planted over = planted_system(3, 3, 20, 200, 0.0, 6);
  const SparseSolution ls = solve_least_squares(over.system);
  CHECK(ls.residual_norm <= 1e-10 * over.system.rhs.norm());
  CHECK(rrmse(ls.coefficients, over.problem.planted) <= 1e-8);

  // Ten times oversampled manufactured instance, weighted gradient-enhanced.
  const Planted ten = planted_system(4, 3, 12, 35, 1.0, 7);
  const SparseSolution lg = solve_least_squares(ten.system);
  CHECK(rrmse(unweight(lg, ten.problem.basis, true), ten.problem.planted) <= 1e-8);

  MeasurementSystem deficient = s;
  deficient.matrix.col(5) = deficient.matrix.col(0);
  CHECK_THROWS(solve_least_squares(deficient));
  MeasurementSystem wide = s;
  wide.matrix = gaussian_matrix(4, 6, 1);
  wide.rhs = Eigen::VectorXd::Ones(4);
  CHECK_THROWS(solve_least_squares(wide));
}

TEST_CASE("unweight and reweight") {
  const Basis b = enumerate_basis(3, 3);
  const auto p = static_cast<Eigen::Index>(b.size());
  CHECK(unweight(Eigen::VectorXd::Zero(p), b, true).isZero(0.0));
  Rng rng(3);
  Eigen::VectorXd v(p);
  for (auto& x : v) x = rng.normal();
  CHECK(unweight(v, b, false) == v);
  CHECK((unweight(reweight(v, b, true), b, true) - v).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(unweight(v, b, true)[p - 1] == doctest::Approx(v[p - 1] / 2.0));
  CHECK_THROWS(unweight(Eigen::VectorXd::Zero(3), b, true));
}

}  // TEST_SUITE
