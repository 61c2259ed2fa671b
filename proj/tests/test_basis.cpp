#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gradpce/basis.hpp"
#include "gradpce/quadrature.hpp"
#include "gradpce/random.hpp"

using namespace gradpce;

TEST_SUITE("basis") {

TEST_CASE("cardinality of total-degree sets") {
  CHECK(enumerate_basis(25, 3).size() == 3276);
  CHECK(enumerate_basis(30, 3).size() == 5456);
  const Basis constant = enumerate_basis(1, 0);
  REQUIRE(constant.size() == 1);
  CHECK(constant[0].degrees() == std::vector<int>{0});
  CHECK(total_degree_cardinality(8, 3) == 165);
  CHECK(total_degree_cardinality(4, 4) == 70);
}

TEST_CASE("cardinality overflow is reported") {
  CHECK_THROWS_AS(total_degree_cardinality(2000, 2000), std::overflow_error);
  CHECK_THROWS(enumerate_basis(0, 2));
  CHECK_THROWS(enumerate_basis(2, -1));
}

TEST_CASE("ordering: ascending total, lower variables carry degree first") {
  const Basis b = enumerate_basis(2, 2);
  const std::vector<std::vector<int>> expected = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  REQUIRE(b.size() == expected.size());
  for (std::size_t j = 0; j < expected.size(); ++j) CHECK(b[j].degrees() == expected[j]);

  const Basis c = enumerate_basis(3, 2);
  CHECK(c[4].degrees() == std::vector<int>{2, 0, 0});
  CHECK(c[5].degrees() == std::vector<int>{1, 1, 0});
  CHECK(c[9].degrees() == std::vector<int>{0, 0, 2});
}

TEST_CASE("indices are unique, complete and deterministic") {
  const Basis a = enumerate_basis(4, 3);
  const Basis b = enumerate_basis(4, 3);
  CHECK(a.indices() == b.indices());
  int previous_total = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    CHECK(a[j].total() >= previous_total);
    previous_total = a[j].total();
    int sum = 0;
    for (int k = 0; k < 4; ++k) {
      CHECK(a[j][k] >= 0);
      sum += a[j][k];
    }
    CHECK(sum == a[j].total());
    CHECK(a.find(a[j]) == j);
    for (std::size_t i = 0; i < j; ++i) CHECK_FALSE(a[i] == a[j]);
  }
  CHECK(a.find(MultiIndex({4, 0, 0, 0})) == a.size());
}

TEST_CASE("truncate keeps the leading prefix") {
  const Basis b = enumerate_basis(3, 3);
  const Basis t = b.truncate(7);
  REQUIRE(t.size() == 7);
  for (std::size_t j = 0; j < 7; ++j) CHECK(t[j] == b[j]);
  CHECK(b.truncate(1000).size() == b.size());
}

TEST_CASE("hermite_eval examples") {
  for (double x : {-2.5, 0.0, 0.3, 7.0}) CHECK(hermite_eval(0, x) == 1.0);
  CHECK(std::abs(hermite_eval(2, 1.0)) <= 1e-15);
  // Frozen from numpy.polynomial.hermite_e divided by sqrt(n!).
  CHECK(std::abs(hermite_eval(3, 2.0) - 0.81649658092772615) <= 1e-15);
  CHECK(std::abs(hermite_eval(3, 2.0) - 2.0 / std::sqrt(6.0)) <= 1e-15);
  CHECK(std::abs(hermite_eval(20, 0.7) - (-0.47502159996371135)) <= 1e-13);
  CHECK(std::abs(hermite_eval(5, -1.1) - (-0.43822460242152073)) <= 1e-14);
}

TEST_CASE("hermite_derivative examples") {
  for (double x : {-1.0, 0.0, 2.0}) CHECK(hermite_derivative(0, x) == 0.0);
  CHECK(hermite_derivative(1, 0.7) == 1.0);
  const double expected = 2.0 * hermite_eval(3, 1.3);
  CHECK(std::abs(expected - (-1.3904936773199175)) <= 1e-14);
  CHECK(std::abs(hermite_derivative(4, 1.3) - expected) <= 1e-14);
  const double h = 1e-6;
  const double fd = (hermite_eval(4, 1.3 + h) - hermite_eval(4, 1.3 - h)) / (2 * h);
  CHECK(std::abs(fd - hermite_derivative(4, 1.3)) <= 1e-8);
}

TEST_CASE("derivative identity holds exactly as computed") {
  Rng rng(42);
  for (int t = 0; t < 1000; ++t) {
    const double x = rng.normal();
    for (int i = 1; i <= 20; ++i) {
      REQUIRE(hermite_derivative(i, x) == std::sqrt(static_cast<double>(i)) * hermite_eval(i - 1, x));
    }
  }
}

TEST_CASE("hermite_table matches pointwise evaluation") {
  std::vector<double> table(31);
  hermite_table(-0.8, table);
  for (int n = 0; n <= 30; ++n) CHECK(table[n] == hermite_eval(n, -0.8));
}

TEST_CASE("recurrence stays finite at high order") {
  for (double x : {-6.0, 0.1, 9.0}) CHECK(std::isfinite(hermite_eval(60, x)));
}

TEST_CASE("eval_multivariate examples") {
  const std::vector<double> any = {0.4, -1.7, 2.2};
  CHECK(eval_multivariate(MultiIndex({0, 0, 0}), any) == 1.0);
  CHECK(eval_multivariate(MultiIndex({1, 1}), std::vector<double>{0.6, -1.5}) ==
        doctest::Approx(0.6 * -1.5));
  CHECK(std::abs(eval_multivariate(MultiIndex({2, 1}), std::vector<double>{1.0, 3.0})) <= 1e-15);
  CHECK_THROWS(eval_multivariate(MultiIndex({1, 1}), any));
}

TEST_CASE("eval_multivariate_partial examples") {
  const std::vector<double> p2 = {0.9, -0.3};
  CHECK(eval_multivariate_partial(MultiIndex({0, 0}), p2, 0) == 0.0);
  CHECK(eval_multivariate_partial(MultiIndex({1, 0}), p2, 0) == 1.0);
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x = {rng.normal(), rng.normal()};
    const MultiIndex idx({2, 3});
    const double exact = eval_multivariate_partial(idx, x, 1);
    auto xp = x, xm = x;
    xp[1] += 1e-6;
    xm[1] -= 1e-6;
    const double fd = (eval_multivariate(idx, xp) - eval_multivariate(idx, xm)) / 2e-6;
    CHECK(std::abs(fd - exact) <= 1e-6 * std::max(1.0, std::abs(exact)));
  }
  CHECK_THROWS(eval_multivariate_partial(MultiIndex({1, 0}), p2, 2));
}

TEST_CASE("evaluate_with_gradient agrees with the scalar routines") {
  const Basis b = enumerate_basis(3, 4);
  const std::vector<double> x = {0.3, -1.2, 0.8};
  std::vector<double> values(b.size());
  Eigen::MatrixXd partials(3, static_cast<Eigen::Index>(b.size()));
  b.evaluate_with_gradient(x, values, partials);
  for (std::size_t j = 0; j < b.size(); ++j) {
    CHECK(values[j] == doctest::Approx(eval_multivariate(b[j], x)).epsilon(1e-14));
    for (int k = 0; k < 3; ++k) {
      CHECK(partials(k, static_cast<Eigen::Index>(j)) ==
            doctest::Approx(eval_multivariate_partial(b[j], x, k)).epsilon(1e-14));
    }
  }
}

TEST_CASE("gradient_weight examples") {
  CHECK(gradient_weight(MultiIndex({0, 0, 0})) == 1.0);
  CHECK(gradient_weight(MultiIndex({2, 0, 1})) == 0.5);
  CHECK(gradient_weight(MultiIndex({1, 1, 0})) == doctest::Approx(0.57735026918962584).epsilon(1e-15));
  const Basis b = enumerate_basis(3, 5);
  const Eigen::VectorXd w = gradient_weights(b);
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    CHECK(w[j] > 0.0);
    CHECK(w[j] <= 1.0);
  }
}

TEST_CASE("Gauss-Hermite rule integrates Gaussian moments") {
  const QuadratureRule rule = gauss_hermite(6);
  double m0 = 0, m2 = 0, m4 = 0, m10 = 0;
  for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
    const double x = rule.nodes[i], w = rule.weights[i];
    m0 += w;
    m2 += w * x * x;
    m4 += w * std::pow(x, 4);
    m10 += w * std::pow(x, 10);
  }
  CHECK(m0 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m2 == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(m4 == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(m10 == doctest::Approx(945.0).epsilon(1e-12));
}

TEST_CASE("orthonormality and gradient-norm identity by quadrature") {
  for (int d = 1; d <= 3; ++d) {
    for (int p = 0; p <= 5; ++p) {
      const Basis b = enumerate_basis(d, p);
      const QuadratureRule rule = gauss_hermite(2 * p + 1);
      const auto n = static_cast<Eigen::Index>(b.size());
      Eigen::MatrixXd plain = Eigen::MatrixXd::Zero(n, n), grad = Eigen::MatrixXd::Zero(n, n);
      std::vector<int> digit(d, 0);
      std::vector<double> x(d), values(n);
      Eigen::MatrixXd partials(d, n);
      const int q = static_cast<int>(rule.nodes.size());
      while (true) {
        double w = 1.0;
        for (int k = 0; k < d; ++k) {
          x[k] = rule.nodes[digit[k]];
          w *= rule.weights[digit[k]];
        }
        b.evaluate_with_gradient(x, values, partials);
        const Eigen::Map<const Eigen::VectorXd> v(values.data(), n);
        plain += w * v * v.transpose();
        grad += w * partials.transpose() * partials;
        int k = 0;
        while (k < d && ++digit[k] == q) digit[k++] = 0;
        if (k == d) break;
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          const double kron = i == j ? 1.0 : 0.0;
          REQUIRE(std::abs(plain(i, j) - kron) <= 1e-10);
          REQUIRE(std::abs(plain(i, j) + grad(i, j) - kron * (1.0 + b[i].total())) <= 1e-10);
        }
      }
    }
  }
}

}  // TEST_SUITE
