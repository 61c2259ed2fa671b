#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Cholesky>

#include "gradpce/basis.hpp"
#include "gradpce/pde.hpp"
#include "gradpce/random.hpp"
#include "gradpce/report.hpp"

using namespace gradpce;

namespace {

const KlField& desk_field() {
  static const KlField field(desk_preset());
  return field;
}

std::vector<double> normal_vector(int d, Rng& rng) {
  std::vector<double> xi(static_cast<std::size_t>(d));
  for (auto& v : xi) v = rng.normal();
  return xi;
}

}  // namespace

TEST_SUITE("pde") {

TEST_CASE("presets") {
  const KlConfig paper = kl_preset("paper-pde");
  CHECK(paper.dim == 30);
  CHECK(paper.correlation_length == 1.0 / 16.0);
  CHECK(paper.sigma == 0.5);
  CHECK(paper.mean_log == 0.1);
  const KlConfig desk = kl_preset("desk");
  CHECK(desk.dim == 4);
  CHECK(desk.correlation_length == 0.25);
  CHECK_THROWS(kl_preset("cfd"));
}

TEST_CASE("KL eigenvalues are positive and descending") {
  const KlField& f = desk_field();
  // Frozen from the 128-point Nystrom pilot.
  CHECK(f.eigenvalues()[0] == doctest::Approx(0.1589).epsilon(1e-3));
  CHECK(f.eigenvalues()[1] == doctest::Approx(0.1159).epsilon(1e-3));
  CHECK(f.eigenvalues()[3] == doctest::Approx(0.08457).epsilon(1e-3));
  CHECK(f.mode(0) == std::make_pair(0, 0));
  CHECK(f.mode(1) == std::make_pair(0, 1));
  CHECK(f.mode(2) == std::make_pair(1, 0));
  for (int k = 0; k < f.dim(); ++k) {
    CHECK(f.eigenvalues()[k] > 0.0);
    if (k > 0) CHECK(f.eigenvalues()[k] <= f.eigenvalues()[k - 1]);
  }
  const KlField paper(paper_pde_preset());
  CHECK(paper.dim() == 30);
  for (int k = 1; k < 30; ++k) CHECK(paper.eigenvalues()[k] <= paper.eigenvalues()[k - 1]);
}

TEST_CASE("KL eigenvalues converge with the Nystrom grid") {
  KlConfig coarse = desk_preset();
  coarse.grid_resolution = 64;
  const KlField c(coarse);
  for (int k = 0; k < 4; ++k) {
    CHECK(c.eigenvalues()[k] == doctest::Approx(desk_field().eigenvalues()[k]).epsilon(1e-3));
  }
}

TEST_CASE("KL eigenfunctions are discretely orthonormal") {
  const KlField& f = desk_field();
  const Eigen::MatrixXd phi = f.eigenfunctions_on_grid();
  const Eigen::MatrixXd g = phi.transpose() * phi * f.grid_weight();
  CHECK((g - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("long correlation length gives a dominant constant mode") {
  KlConfig c{3, 16, 0.5, 0.1, 10.0};
  const KlField f(c);
  CHECK(f.eigenvalues()[1] / f.eigenvalues()[0] < 1e-2);
  const Eigen::MatrixXd phi = f.eigenfunctions_on_grid();
  CHECK((phi.col(0).array() - 1.0).abs().maxCoeff() < 1e-2);
  CHECK_THROWS(KlField(KlConfig{40, 16, 0.5, 0.1, 10.0}));
}

TEST_CASE("off-grid eigenfunctions interpolate the grid values") {
  const KlField& f = desk_field();
  const double h = 1.0 / 128;
  const Eigen::MatrixXd phi = f.eigenfunctions_on_grid();
  for (int k = 0; k < 4; ++k) {
    CHECK(f.eigenfunction(k, 0.5 * h, 0.5 * h) == doctest::Approx(phi(0, k)).epsilon(1e-10));
  }
  const std::vector<double> xs = {0.1, 0.77}, ys = {0.3, 0.5};
  const Eigen::MatrixXd at = f.eigenfunctions_at(xs, ys);
  CHECK(at(1, 2) == doctest::Approx(f.eigenfunction(2, 0.77, 0.5)));
}

TEST_CASE("coefficient is positive lognormal") {
  const KlField& f = desk_field();
  Rng rng(3);
  const auto xi = normal_vector(4, rng);
  const double a = f.coefficient(0.3, 0.6, xi);
  CHECK(a > 0.0);
  CHECK(std::log(a) == doctest::Approx(0.1 + f.log_fluctuation(0.3, 0.6, xi)));
}

TEST_CASE("constant coefficient: u scales as 1/A") {
  double first = 0.0;
  for (double a : {0.5, 1.0, 2.0}) {
    const KlField f(KlConfig{2, 32, 0.0, std::log(a), 0.25});
    const double scaled = solve_forward(f, std::vector<double>{0.7, -1.3}, 32).u_qoi * a;
    if (first == 0.0) first = scaled;
    CHECK(std::abs(scaled - first) <= 1e-10 * std::abs(first));
  }
  CHECK(first > 0.0);
}

TEST_CASE("mesh refinement converges at second order") {
  const std::vector<double> xi(4, 0.0);
  const double u32 = solve_forward(desk_field(), xi, 32).u_qoi;
  const double u64 = solve_forward(desk_field(), xi, 64).u_qoi;
  const double u128 = solve_forward(desk_field(), xi, 128).u_qoi;
  const double order = std::log2((u32 - u64) / (u64 - u128));
  CHECK(order == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("reflection symmetry") {
  const KlField& f = desk_field();
  Rng rng(19);
  for (int t = 0; t < 3; ++t) {
    const auto xi = normal_vector(4, rng);
    const auto swapped = f.transposed(xi);
    CHECK(swapped[0] == xi[0]);
    CHECK(swapped[1] == xi[2]);
    CHECK(f.coefficient(0.2, 0.7, xi) == doctest::Approx(f.coefficient(0.7, 0.2, swapped)).epsilon(1e-12));
    const double u = solve_forward(f, xi, 32).u_qoi;
    CHECK(std::abs(u - solve_forward(f, swapped, 32).u_qoi) <= 1e-10 * std::abs(u));
  }
  // A realization whose field is symmetric in x and y.
  const std::vector<double> sym = {0.4, -0.9, -0.9, 1.2};
  CHECK(f.transposed(sym) == sym);
  KlConfig three = desk_preset();
  three.dim = 2;
  CHECK_THROWS(KlField(three).transposed(std::vector<double>{0.1, 0.2}));
}

TEST_CASE("operator is symmetric positive definite with Dirichlet rows removed") {
  const KlField& f = desk_field();
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto xi = normal_vector(4, rng);
    const ForwardSolution s = solve_forward(f, xi, 8);
    const Eigen::MatrixXd k = s.op.stiffness;
    REQUIRE(k.rows() == 49);
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * k.cwiseAbs().maxCoeff());
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    CHECK(llt.info() == Eigen::Success);
  }
  const ForwardSolution s = solve_forward(f, std::vector<double>(4, 0.0), 16);
  CHECK(s.op.dof(8, 8) == s.op.qoi_dof);
  CHECK(s.op.dof(0, 5) == -1);
  CHECK(s.op.dof(16, 5) == -1);
  CHECK(s.linear_solves == 1);
  CHECK_THROWS(solve_forward(f, std::vector<double>(4, 0.0), 6));
  CHECK_THROWS(solve_forward(f, std::vector<double>(3, 0.0), 16));
}

TEST_CASE("adjoint gradient matches finite differences") {
  const KlField& f = desk_field();
  Rng rng(2);
  for (int t = 0; t < 3; ++t) {
    const auto xi = normal_vector(4, rng);
    const ForwardSolution fwd = solve_forward(f, xi, 16);
    const AdjointGradient g = solve_adjoint_gradient(fwd, f);
    CHECK(g.linear_solves == 1);
    const AdjointGradient g2 = solve_adjoint_gradient(fwd, f, SensitivityAssembly::sparse_matrix);
    for (int k = 0; k < 4; ++k) {
      auto xp = xi, xm = xi;
      xp[k] += 1e-5;
      xm[k] -= 1e-5;
      const double fd = (solve_forward(f, xp, 16).u_qoi - solve_forward(f, xm, 16).u_qoi) / 2e-5;
      CHECK(std::abs(fd - g.gradient[k]) <= 1e-4 * std::abs(g.gradient[k]));
      CHECK(std::abs(g.gradient[k] - g2.gradient[k]) <= 1e-10);
    }
  }
}

TEST_CASE("adjoint gradient vanishes without randomness") {
  const KlField f(KlConfig{3, 32, 0.0, 0.1, 0.25});
  const auto fwd = solve_forward(f, std::vector<double>{1.0, -2.0, 0.5}, 16);
  for (double g : solve_adjoint_gradient(fwd, f).gradient) CHECK(g == 0.0);
}

TEST_CASE("evaluator carries value and gradient") {
  const KlField& f = desk_field();
  const QoiEvaluator e = pde_evaluator(f, 16);
  const std::vector<double> xi = {0.3, -0.1, 0.8, 0.0};
  const QoiSample with = e(xi, true);
  const QoiSample without = e(xi, false);
  CHECK(with.value == without.value);
  CHECK(with.gradient.size() == 4);
  CHECK(without.gradient.empty());
}

TEST_CASE("reference expansion and a small study") {
  const KlField& f = desk_field();
  const Basis b = enumerate_basis(4, 2);
  ReferenceConfig rc;
  rc.oversampling = 5;
  rc.validation_samples = 50;
  rc.seed = 99;
  const ReferenceExpansion ref = compute_reference(f, 16, b, rc);
  CHECK(ref.samples == 5 * 15);
  CHECK(ref.coefficients.size() == 15);
  CHECK(ref.validation_error < 0.02);

  StudyConfig c;
  c.n_grid = {16};
  c.replications = 3;
  c.seed = 1;
  c.gradient_fraction = 1.0;
  const auto a = to_json(run_pde_study(f, 16, b, ref.coefficients, c)).dump();
  CHECK(a == to_json(run_pde_study(f, 16, b, ref.coefficients, c)).dump());
}

}  // TEST_SUITE
