#include "gradpce/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "gradpce/random.hpp"

namespace gradpce {

namespace {

constexpr double kResidualSlack = 1e-6;
// Residuals below this fraction of ||rhs|| count as exact interpolation.
constexpr double kResidualFloor = 1e-10;
constexpr int kRefreshEvery = 32;
constexpr double kRsqNoise = 1e-10;

Eigen::MatrixXd gram_of(const RowMatrix& a) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(a.cols(), a.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  return g.selfadjointView<Eigen::Lower>();
}

// Follows the solution path of min 0.5||b - Ax||^2 + lambda ||x||_1 as lambda
// decreases. The path is piecewise linear in lambda with breakpoints where a
// coefficient enters or leaves the active set; along a segment the squared
// residual is an explicit quadratic, so the point where ||b - Ax|| = delta is
// located in closed form.
class LassoPath {
 public:
  LassoPath(const RowMatrix& a, const Eigen::VectorXd& b, Eigen::MatrixXd gram,
            const SolverOptions& options)
      : a_(a), b_(b), g_(std::move(gram)), options_(options) {
    const Eigen::Index p = a.cols();
    atb_ = a.transpose() * b;
    x_ = Eigen::VectorXd::Zero(p);
    corr_ = atb_;
    lambda_max_ = p > 0 ? atb_.cwiseAbs().maxCoeff() : 0.0;
    lambda_ = lambda_max_;
    b_norm_ = b.norm();
    rsq_ = b_norm_ * b_norm_;
    chol_ = Eigen::MatrixXd::Zero(p, p);
    in_active_.assign(static_cast<std::size_t>(p), 0);
    banned_.assign(static_cast<std::size_t>(p), 0);
  }

  // Calls must come with nonincreasing delta.
  SparseSolution solve_for(double delta) {
    if (!(delta >= 0.0)) throw std::invalid_argument("solve_bpdn: delta must be >= 0");
    const double floor = kResidualFloor * b_norm_;
    const double target = std::max(delta, floor);
    if (b_norm_ <= target) return zero_solution(delta);
    if (lambda_max_ == 0.0) return finalize(x_, 0.0, delta, Eigen::VectorXd(), false);

    if (active_.empty() && !ended_) {
      Eigen::Index j0;
      corr_.cwiseAbs().maxCoeff(&j0);
      enter(j0, corr_[j0] >= 0 ? 1.0 : -1.0);
    }

    while (true) {
      if (ended_) return finalize(x_, 0.0, delta, direction_v(), false);
      if (iterations_ >= options_.max_iterations) {
        return finalize(x_, lambda_, delta, Eigen::VectorXd(), true);
      }

      const auto k = static_cast<Eigen::Index>(active_.size());
      Eigen::VectorXd dir = solve_active(signs_);
      Eigen::VectorXd slope = Eigen::VectorXd::Zero(g_.rows());
      for (Eigen::Index t = 0; t < k; ++t) slope += g_.col(active_[t]) * dir[t];
      const double q = signs_.dot(dir);

      double gamma = lambda_;
      enum class Event { end, enter, drop } event = Event::end;
      Eigen::Index who = -1;
      double enter_sign = 0.0;
      for (Eigen::Index j = 0; j < g_.rows(); ++j) {
        if (in_active_[j] || banned_[j]) continue;
        for (double s : {1.0, -1.0}) {
          const double denom = 1.0 - s * slope[j];
          if (denom <= 1e-12) continue;
          const double step = std::max(0.0, (lambda_ - s * corr_[j]) / denom);
          // A coefficient that just left sits on its boundary; only a later
          // crossing counts as re-entry.
          if (j == just_dropped_ && step <= 1e-12 * lambda_) continue;
          if (step < gamma) {
            gamma = step;
            event = Event::enter;
            who = j;
            enter_sign = s;
          }
        }
      }
      for (Eigen::Index t = 0; t < k; ++t) {
        const Eigen::Index j = active_[t];
        if (dir[t] == 0.0 || x_[j] == 0.0) continue;
        const double step = -x_[j] / dir[t];
        if (j == just_added_ && step <= 1e-12 * lambda_) continue;
        if (step > 0.0 && step < gamma) {
          gamma = step;
          event = Event::drop;
          who = t;
        }
      }

      const double rsq_end = rsq_ - 2.0 * gamma * lambda_ * q + gamma * gamma * q;
      // The running squared residual carries cancellation error of order
      // eps * ||b||^2, so near the target the decision uses explicit residuals.
      const double rsq_noise = kRsqNoise * b_norm_ * b_norm_;
      if (rsq_end <= target * target + rsq_noise || event == Event::end) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(a_.rows());
        for (Eigen::Index t = 0; t < k; ++t) v += a_.col(active_[t]) * dir[t];
        const Eigen::VectorXd r0 = residual_of(x_);
        if ((r0 - gamma * v).norm() <= target) {
          const double disc = lambda_ * lambda_ - (r0.squaredNorm() - target * target) / q;
          const double step = crossing(r0, v, lambda_ - std::sqrt(std::max(disc, 0.0)), gamma,
                                       target);
          Eigen::VectorXd x = x_;
          for (Eigen::Index t = 0; t < k; ++t) x[active_[t]] += step * dir[t];
          if (delta < floor) polish_interpolant(x);
          return finalize(x, lambda_ - step, delta, v, false);
        }
      }

      for (Eigen::Index t = 0; t < k; ++t) x_[active_[t]] += gamma * dir[t];
      corr_ -= gamma * slope;
      lambda_ -= gamma;
      rsq_ = std::max(rsq_end, 0.0);
      ++iterations_;
      just_added_ = -1;
      just_dropped_ = -1;
      if (iterations_ % kRefreshEvery == 0) refresh();

      switch (event) {
        case Event::end:
          lambda_ = 0.0;
          ended_ = true;
          last_direction_ = dir;
          break;
        case Event::enter:
          enter(who, enter_sign);
          break;
        case Event::drop:
          drop(who);
          break;
      }
    }
  }

  int iterations() const { return iterations_; }

 private:
  Eigen::VectorXd residual_of(const Eigen::VectorXd& x) const {
    Eigen::VectorXd r = b_;
    for (Eigen::Index j : active_) {
      if (x[j] != 0.0) r -= a_.col(j) * x[j];
    }
    return r;
  }

  // Step along the segment where the residual norm first reaches `target`,
  // given that it is reached by `gamma`. The closed-form root loses accuracy
  // when the segment's minimum residual is close to zero, so it is polished by
  // bisection on the explicit residual, which decreases along the segment.
  static double crossing(const Eigen::VectorXd& r0, const Eigen::VectorXd& v, double guess,
                         double gamma, double target) {
    auto feasible = [&](double step) { return (r0 - step * v).norm() <= target; };
    if (feasible(0.0)) return 0.0;
    double lo = 0.0;
    double hi = gamma;
    const double g = std::clamp(guess, 0.0, gamma);
    (feasible(g) ? hi : lo) = g;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (feasible(mid) ? hi : lo) = mid;
    }
    return hi;
  }

  // With delta below the floor the wanted point is the lambda -> 0 end of the
  // final segment: the least-squares fit on the active columns. Taken only
  // when it keeps every sign and does not raise the residual.
  void polish_interpolant(Eigen::VectorXd& x) const {
    const auto k = static_cast<Eigen::Index>(active_.size());
    if (k == 0 || k > a_.rows()) return;
    Eigen::MatrixXd sub(a_.rows(), k);
    for (Eigen::Index t = 0; t < k; ++t) sub.col(t) = a_.col(active_[t]);
    const Eigen::VectorXd fit = sub.colPivHouseholderQr().solve(b_);
    Eigen::VectorXd candidate = Eigen::VectorXd::Zero(x.size());
    for (Eigen::Index t = 0; t < k; ++t) {
      const Eigen::Index j = active_[t];
      if (x[j] != 0.0 && fit[t] * x[j] <= 0.0) return;
      candidate[j] = fit[t];
    }
    if ((b_ - sub * fit).norm() <= (b_ - a_ * x).norm()) x = candidate;
  }

  Eigen::VectorXd solve_active(const Eigen::VectorXd& rhs) const {
    const auto k = static_cast<Eigen::Index>(active_.size());
    const auto l = chol_.topLeftCorner(k, k).triangularView<Eigen::Lower>();
    Eigen::VectorXd y = l.solve(rhs);
    return l.transpose().solve(y);
  }

  Eigen::VectorXd direction_v() const {
    if (last_direction_.size() != static_cast<Eigen::Index>(active_.size())) {
      return Eigen::VectorXd();
    }
    Eigen::VectorXd v = Eigen::VectorXd::Zero(a_.rows());
    for (std::size_t t = 0; t < active_.size(); ++t) {
      v += a_.col(active_[t]) * last_direction_[static_cast<Eigen::Index>(t)];
    }
    return v;
  }

  void enter(Eigen::Index j, double sign) {
    const auto k = static_cast<Eigen::Index>(active_.size());
    Eigen::VectorXd cross(k);
    for (Eigen::Index t = 0; t < k; ++t) cross[t] = g_(active_[t], j);
    Eigen::VectorXd w = chol_.topLeftCorner(k, k).triangularView<Eigen::Lower>().solve(cross);
    const double pivot = g_(j, j) - w.squaredNorm();
    if (!(pivot > 1e-11 * g_(j, j))) {
      // Column is (numerically) in the span of the active set.
      banned_[j] = 1;
      return;
    }
    chol_.row(k).head(k) = w.transpose();
    chol_(k, k) = std::sqrt(pivot);
    active_.push_back(j);
    signs_.conservativeResize(k + 1);
    signs_[k] = sign;
    in_active_[j] = 1;
    just_added_ = j;
  }

  void drop(Eigen::Index position) {
    const Eigen::Index j = active_[position];
    x_[j] = 0.0;
    in_active_[j] = 0;
    active_.erase(active_.begin() + position);
    const auto k = static_cast<Eigen::Index>(active_.size());
    Eigen::VectorXd signs(k);
    for (Eigen::Index t = 0, u = 0; t <= k; ++t) {
      if (t != position) signs[u++] = signs_[t];
    }
    signs_ = signs;
    rebuild_cholesky();
    just_dropped_ = j;
  }

  void rebuild_cholesky() {
    const auto k = static_cast<Eigen::Index>(active_.size());
    Eigen::MatrixXd sub(k, k);
    for (Eigen::Index s = 0; s < k; ++s) {
      for (Eigen::Index t = 0; t < k; ++t) sub(s, t) = g_(active_[s], active_[t]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sub);
    chol_.topLeftCorner(k, k) = llt.matrixL();
  }

  void refresh() {
    corr_ = atb_ - g_ * x_;
    rsq_ = residual_of(x_).squaredNorm();
  }

  SparseSolution zero_solution(double delta) const {
    SparseSolution sol;
    sol.coefficients = Eigen::VectorXd::Zero(a_.cols());
    sol.delta_used = delta;
    sol.residual_norm = b_norm_;
    sol.iterations = iterations_;
    sol.lambda = lambda_max_;
    sol.duality_gap = 0.0;
    sol.status = SolveStatus::optimal;
    sol.converged = true;
    return sol;
  }

  SparseSolution finalize(const Eigen::VectorXd& x, double lambda, double delta,
                          const Eigen::VectorXd& direction, bool out_of_iterations) const {
    SparseSolution sol;
    sol.coefficients = x;
    sol.delta_used = delta;
    sol.iterations = iterations_;
    sol.lambda = lambda;
    const Eigen::VectorXd r = b_ - a_ * x;
    sol.residual_norm = r.norm();

    // Any y with ||A^T y||_inf <= 1 bounds the optimum from below by
    // b^T y - delta ||y||. Candidates: r / lambda, exact on the path, and the
    // segment direction, its limit as lambda -> 0.
    const double enforced = std::max(delta, kResidualFloor * b_norm_);
    double dual = 0.0;
    auto try_dual = [&](Eigen::VectorXd y) {
      const double scale = std::max(1.0, (a_.transpose() * y).cwiseAbs().maxCoeff());
      y /= scale;
      dual = std::max(dual, b_.dot(y) - enforced * y.norm());
    };
    if (lambda > 0.0) try_dual(r / lambda);
    if (direction.size() == a_.rows()) try_dual(direction);
    const double primal = x.lpNorm<1>();
    sol.duality_gap = primal > 0.0 ? (primal - dual) / primal : 0.0;

    const bool feasible =
        sol.residual_norm <= enforced * (1.0 + kResidualSlack);
    if (out_of_iterations) {
      sol.status = SolveStatus::iteration_limit;
    } else if (!feasible) {
      sol.status = SolveStatus::infeasible;
    } else if (std::abs(sol.duality_gap) <= options_.tolerance) {
      sol.status = SolveStatus::optimal;
    } else {
      sol.status = SolveStatus::uncertified;
    }
    sol.converged = sol.status == SolveStatus::optimal;
    return sol;
  }

  const RowMatrix& a_;
  const Eigen::VectorXd& b_;
  Eigen::MatrixXd g_;
  SolverOptions options_;
  Eigen::VectorXd atb_;
  Eigen::VectorXd x_;
  Eigen::VectorXd corr_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd signs_;
  Eigen::VectorXd last_direction_;
  std::vector<Eigen::Index> active_;
  std::vector<char> in_active_;
  std::vector<char> banned_;
  Eigen::Index just_added_ = -1;
  Eigen::Index just_dropped_ = -1;
  double lambda_max_ = 0.0;
  double lambda_ = 0.0;
  double b_norm_ = 0.0;
  double rsq_ = 0.0;
  int iterations_ = 0;
  bool ended_ = false;
};

std::vector<SparseSolution> run_path(const RowMatrix& a, const Eigen::VectorXd& b,
                                     Eigen::MatrixXd gram, std::span<const double> deltas,
                                     const SolverOptions& options) {
  if (a.rows() != b.size()) throw std::invalid_argument("solve_bpdn: rhs size mismatch");
  std::vector<std::size_t> order(deltas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return deltas[i] > deltas[j]; });
  LassoPath path(a, b, std::move(gram), options);
  std::vector<SparseSolution> out(deltas.size());
  for (std::size_t i : order) out[i] = path.solve_for(deltas[i]);
  return out;
}

RowMatrix select_rows(const RowMatrix& m, const std::vector<Eigen::Index>& rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

Eigen::VectorXd select_entries(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Eigen::Index>(r)] = v[rows[r]];
  return out;
}

}  // namespace

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal:
      return "optimal";
    case SolveStatus::infeasible:
      return "infeasible";
    case SolveStatus::iteration_limit:
      return "iteration_limit";
    case SolveStatus::uncertified:
      return "uncertified";
  }
  return "unknown";
}

SparseSolution solve_bpdn(const RowMatrix& matrix, const Eigen::VectorXd& rhs, double delta,
                          const SolverOptions& options) {
  const double deltas[] = {delta};
  return run_path(matrix, rhs, gram_of(matrix), deltas, options).front();
}

SparseSolution solve_bpdn(const MeasurementSystem& system, double delta,
                          const SolverOptions& options) {
  return solve_bpdn(system.matrix, system.rhs, delta, options);
}

std::vector<SparseSolution> solve_bpdn_path(const RowMatrix& matrix, const Eigen::VectorXd& rhs,
                                            std::span<const double> deltas,
                                            const SolverOptions& options) {
  return run_path(matrix, rhs, gram_of(matrix), deltas, options);
}

std::vector<double> default_delta_grid(double rhs_norm, int count, double lo, double hi) {
  if (count < 1) throw std::invalid_argument("delta grid needs at least one value");
  if (!(lo > 0.0) || !(hi >= lo)) throw std::invalid_argument("delta grid bounds invalid");
  std::vector<double> grid(static_cast<std::size_t>(count));
  if (count == 1) {
    grid[0] = lo * rhs_norm;
    return grid;
  }
  const double step = std::log(hi / lo) / (count - 1);
  for (int i = 0; i < count; ++i) grid[i] = lo * std::exp(step * i) * rhs_norm;
  return grid;
}

CvReport cross_validate_delta(const MeasurementSystem& system, int folds,
                              std::span<const double> grid, std::uint64_t seed,
                              const SolverOptions& options) {
  if (folds < 2) throw std::invalid_argument("cross validation needs at least 2 folds");
  if (grid.empty()) throw std::invalid_argument("cross validation grid is empty");
  for (double d : grid) {
    if (!(d > 0.0)) throw std::invalid_argument("cross validation grid must be positive");
  }

  std::vector<int> sample_order(static_cast<std::size_t>(system.num_samples));
  std::iota(sample_order.begin(), sample_order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<int>(sample_order));
  std::vector<int> fold_of(sample_order.size());
  for (std::size_t i = 0; i < sample_order.size(); ++i) {
    fold_of[static_cast<std::size_t>(sample_order[i])] = static_cast<int>(i % folds);
  }

  const Eigen::MatrixXd full_gram = gram_of(system.matrix);
  std::vector<double> sq_error(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train, held;
    for (Eigen::Index r = 0; r < system.rows(); ++r) {
      const int s = system.row_map[static_cast<std::size_t>(r)].sample;
      (fold_of[static_cast<std::size_t>(s)] == f ? held : train).push_back(r);
    }
    if (train.empty() || held.empty()) {
      throw std::runtime_error("cross validation fold " + std::to_string(f) + " has no " +
                               (held.empty() ? "held-out" : "training") + " rows");
    }
    const RowMatrix a_train = select_rows(system.matrix, train);
    const RowMatrix a_held = select_rows(system.matrix, held);
    const Eigen::VectorXd b_train = select_entries(system.rhs, train);
    const Eigen::VectorXd b_held = select_entries(system.rhs, held);

    Eigen::MatrixXd gram = full_gram - gram_of(a_held);
    const double scale = std::sqrt(static_cast<double>(train.size()) /
                                   static_cast<double>(system.rows()));
    std::vector<double> deltas(grid.begin(), grid.end());
    for (double& d : deltas) d *= scale;
    const auto sols = run_path(a_train, b_train, std::move(gram), deltas, options);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      sq_error[g] += (b_held - a_held * sols[g].coefficients).squaredNorm();
    }
  }

  CvReport report;
  report.folds = folds;
  report.candidate_deltas.assign(grid.begin(), grid.end());
  report.validation_errors.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) report.validation_errors[g] = std::sqrt(sq_error[g]);

  std::vector<std::size_t> ascending(grid.size());
  std::iota(ascending.begin(), ascending.end(), 0);
  std::stable_sort(ascending.begin(), ascending.end(),
                   [&](std::size_t i, std::size_t j) { return grid[i] < grid[j]; });
  std::size_t best = ascending.front();
  for (std::size_t g : ascending) {
    if (report.validation_errors[g] < report.validation_errors[best]) best = g;
  }
  report.chosen_delta = grid[best];
  return report;
}

SparseSolution solve_least_squares(const MeasurementSystem& system) {
  if (system.rows() < system.cols()) {
    throw std::invalid_argument("least squares needs at least as many rows (" +
                                std::to_string(system.rows()) + ") as columns (" +
                                std::to_string(system.cols()) + ")");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(system.matrix);
  qr.setThreshold(1e-12);
  const Eigen::Index rank = qr.rank();
  if (rank < system.cols()) {
    throw std::runtime_error("least squares matrix is rank deficient by " +
                             std::to_string(system.cols() - rank) + " columns");
  }
  SparseSolution sol;
  sol.coefficients = qr.solve(system.rhs);
  sol.residual_norm = (system.rhs - system.matrix * sol.coefficients).norm();
  sol.delta_used = sol.residual_norm;
  sol.iterations = 1;
  sol.status = SolveStatus::optimal;
  sol.converged = true;
  return sol;
}

Eigen::VectorXd unweight(const Eigen::VectorXd& weighted, const Basis& basis,
                         bool weights_applied) {
  if (weighted.size() != static_cast<Eigen::Index>(basis.size())) {
    throw std::invalid_argument("unweight: coefficient count does not match basis size");
  }
  if (!weights_applied) return weighted;
  return weighted.cwiseProduct(gradient_weights(basis));
}

Eigen::VectorXd unweight(const SparseSolution& solution, const Basis& basis,
                         bool weights_applied) {
  return unweight(solution.coefficients, basis, weights_applied);
}

Eigen::VectorXd reweight(const Eigen::VectorXd& coefficients, const Basis& basis,
                         bool weights_applied) {
  if (coefficients.size() != static_cast<Eigen::Index>(basis.size())) {
    throw std::invalid_argument("reweight: coefficient count does not match basis size");
  }
  if (!weights_applied) return coefficients;
  return coefficients.cwiseQuotient(gradient_weights(basis));
}

}  // namespace gradpce
