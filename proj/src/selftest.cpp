#include "gradpce/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include "gradpce/basis.hpp"
#include "gradpce/diagnostics.hpp"
#include "gradpce/experiments.hpp"
#include "gradpce/pde.hpp"
#include "gradpce/quadrature.hpp"
#include "gradpce/random.hpp"
#include "gradpce/sampling.hpp"
#include "gradpce/solver.hpp"

namespace gradpce {

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

// Max deviation of the quadrature Gram matrices from their exact values, over
// all total-degree bases with d <= 3, p <= 5.
std::pair<double, double> quadrature_gram_errors() {
  const QuadratureRule rule = gauss_hermite(8);
  double plain = 0.0;
  double gradient = 0.0;
  for (int d = 1; d <= 3; ++d) {
    for (int p = 0; p <= 5; ++p) {
      const Basis basis = enumerate_basis(d, p);
      const auto n = static_cast<Eigen::Index>(basis.size());
      Eigen::MatrixXd g0 = Eigen::MatrixXd::Zero(n, n);
      Eigen::MatrixXd g1 = Eigen::MatrixXd::Zero(n, n);
      std::vector<int> digit(static_cast<std::size_t>(d), 0);
      std::vector<double> point(static_cast<std::size_t>(d));
      std::vector<double> values(static_cast<std::size_t>(n));
      Eigen::MatrixXd partials(d, n);
      const auto q = static_cast<int>(rule.nodes.size());
      while (true) {
        double weight = 1.0;
        for (int k = 0; k < d; ++k) {
          point[k] = rule.nodes[digit[k]];
          weight *= rule.weights[digit[k]];
        }
        basis.evaluate_with_gradient(point, values, partials);
        const Eigen::Map<const Eigen::VectorXd> v(values.data(), n);
        g0.noalias() += weight * v * v.transpose();
        g1.noalias() += weight * partials.transpose() * partials;
        int k = 0;
        while (k < d && ++digit[k] == q) digit[k++] = 0;
        if (k == d) break;
      }
      Eigen::MatrixXd expected_plain = Eigen::MatrixXd::Identity(n, n);
      Eigen::MatrixXd expected_gradient = Eigen::MatrixXd::Zero(n, n);
      for (Eigen::Index j = 0; j < n; ++j) expected_gradient(j, j) = 1.0 + basis[j].total();
      plain = std::max(plain, (g0 - expected_plain).cwiseAbs().maxCoeff());
      gradient = std::max(gradient, (g0 + g1 - expected_gradient).cwiseAbs().maxCoeff());
    }
  }
  return {plain, gradient};
}

SelfCheck check(std::string name, bool passed, std::string detail) {
  return {std::move(name), passed, std::move(detail)};
}

}  // namespace

std::vector<SelfCheck> run_selftest() {
  std::vector<SelfCheck> out;
  auto guarded = [&](const std::string& name, const std::function<SelfCheck()>& body) {
    try {
      out.push_back(body());
    } catch (const std::exception& e) {
      out.push_back(check(name, false, std::string("threw: ") + e.what()));
    }
  };

  guarded("basis cardinality", [] {
    const bool ok = enumerate_basis(25, 3).size() == 3276 && enumerate_basis(30, 3).size() == 5456 &&
                    enumerate_basis(1, 0).size() == 1;
    return check("basis cardinality", ok, "P(25,3)=3276, P(30,3)=5456, P(1,0)=1");
  });

  guarded("quadrature orthonormality", [] {
    const auto [plain, gradient] = quadrature_gram_errors();
    return check("quadrature orthonormality", plain <= 1e-10 && gradient <= 1e-10,
                 "max error " + sci(plain) + " (values), " + sci(gradient) + " (with gradients)");
  });

  guarded("hermite derivative identity", [] {
    Rng rng(20240601);
    int mismatches = 0;
    double fd_error = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const double x = rng.normal();
      for (int i = 0; i <= 20; ++i) {
        const double exact = hermite_derivative(i, x);
        const double identity = i == 0 ? 0.0 : std::sqrt(static_cast<double>(i)) * hermite_eval(i - 1, x);
        mismatches += exact != identity ? 1 : 0;
        const double h = 1e-6;
        const double fd = (hermite_eval(i, x + h) - hermite_eval(i, x - h)) / (2.0 * h);
        fd_error = std::max(fd_error, std::abs(fd - exact));
      }
    }
    return check("hermite derivative identity", mismatches == 0 && fd_error <= 1e-8,
                 std::to_string(mismatches) + " exact mismatches, FD error " + sci(fd_error));
  });

  guarded("planted gradient", [] {
    const auto problem = manufacture(enumerate_basis(4, 3), 8, 17);
    Rng rng(5);
    std::vector<double> x(4);
    for (auto& v : x) v = rng.normal();
    const QoiSample q = evaluate_planted(problem, x);
    double worst = 0.0;
    for (int k = 0; k < 4; ++k) {
      auto xp = x;
      auto xm = x;
      xp[k] += 1e-6;
      xm[k] -= 1e-6;
      const double fd = (evaluate_planted(problem, xp, false).value -
                         evaluate_planted(problem, xm, false).value) / 2e-6;
      worst = std::max(worst, std::abs(fd - q.gradient[k]) / std::max(1.0, std::abs(q.gradient[k])));
    }
    return check("planted gradient", worst <= 1e-6, "max relative FD error " + sci(worst));
  });

  guarded("bpdn analytic cases", [] {
    // Orthogonal columns of norm sqrt(N): scaled identity blocks.
    const int n = 6;
    RowMatrix a = RowMatrix::Zero(n, 3);
    for (int i = 0; i < n; ++i) a(i, i % 3) = std::sqrt(2.0);
    Eigen::VectorXd c(3);
    c << 1.5, -0.25, 0.0;
    const Eigen::VectorXd b = a * c;
    const SparseSolution exact = solve_bpdn(a, b, 0.0);
    const SparseSolution zero = solve_bpdn(a, b, b.norm() * 1.01);
    const double err = (exact.coefficients - c).cwiseAbs().maxCoeff();
    const bool ok = err <= 1e-10 && exact.converged && zero.coefficients.isZero(0.0);
    return check("bpdn analytic cases", ok, "orthogonal recovery error " + sci(err));
  });

  guarded("adjoint gradient", [] {
    const KlField field(desk_preset());
    Rng rng(11);
    double worst = 0.0;
    double paths = 0.0;
    for (int t = 0; t < 2; ++t) {
      std::vector<double> xi(static_cast<std::size_t>(field.dim()));
      for (auto& v : xi) v = rng.normal();
      const ForwardSolution fwd = solve_forward(field, xi, 16);
      const auto g = solve_adjoint_gradient(fwd, field).gradient;
      const auto g2 = solve_adjoint_gradient(fwd, field, SensitivityAssembly::sparse_matrix).gradient;
      for (int k = 0; k < field.dim(); ++k) {
        auto xp = xi;
        auto xm = xi;
        xp[k] += 1e-5;
        xm[k] -= 1e-5;
        const double fd = (solve_forward(field, xp, 16).u_qoi - solve_forward(field, xm, 16).u_qoi) / 2e-5;
        worst = std::max(worst, std::abs(fd - g[k]) / std::abs(g[k]));
        paths = std::max(paths, std::abs(g[k] - g2[k]));
      }
    }
    return check("adjoint gradient", worst <= 1e-4 && paths <= 1e-10,
                 "max relative FD error " + sci(worst) + ", assembly paths differ by " + sci(paths));
  });

  guarded("coherence ordering", [] {
    const Basis basis = enumerate_basis(2, 3);
    const auto trunc = TruncationSet::for_order(3);
    const RowMatrix pts = coherence_candidates(2, trunc, 1000, 3);
    const double mu = coherence_mu(basis, pts);
    const double beta = coherence_beta(basis, pts);
    return check("coherence ordering", beta < mu, "beta " + sci(beta) + " < mu " + sci(mu));
  });

  return out;
}

}  // namespace gradpce
