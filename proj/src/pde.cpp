#include "gradpce/pde.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "gradpce/solver.hpp"

namespace gradpce {

namespace {

// Bilinear element stiffness for unit coefficient on a square; independent of
// the element size in two dimensions. Local nodes run counterclockwise from
// the lower-left corner.
constexpr double kElementStiffness[4][4] = {
    {4.0 / 6, -1.0 / 6, -2.0 / 6, -1.0 / 6},
    {-1.0 / 6, 4.0 / 6, -1.0 / 6, -2.0 / 6},
    {-2.0 / 6, -1.0 / 6, 4.0 / 6, -1.0 / 6},
    {-1.0 / 6, -2.0 / 6, -1.0 / 6, 4.0 / 6},
};

constexpr int kCornerDx[4] = {0, 1, 1, 0};
constexpr int kCornerDy[4] = {0, 0, 1, 1};

void check_mesh(int mesh_n) {
  if (mesh_n < 2) throw std::invalid_argument("mesh must have at least 2 elements per side");
}

// Unknown numbers of the four corners of element (ex, ey); -1 on the boundary.
std::array<int, 4> element_dofs(const DiscreteOperator& op, int ex, int ey) {
  std::array<int, 4> dofs{};
  for (int c = 0; c < 4; ++c) dofs[c] = op.dof(ex + kCornerDx[c], ey + kCornerDy[c]);
  return dofs;
}

// Mode values at element centroids, rows row-major over elements.
Eigen::MatrixXd centroid_modes(const KlField& field, int mesh_n) {
  const auto [xs, ys] = element_centroids(mesh_n);
  return field.eigenfunctions_at(xs, ys);
}

Eigen::VectorXd element_coefficients(const KlField& field, const Eigen::MatrixXd& modes,
                                     std::span<const double> xi) {
  const KlConfig& cfg = field.config();
  Eigen::VectorXd scaled(field.dim());
  for (int k = 0; k < field.dim(); ++k) {
    scaled[k] = cfg.sigma * std::sqrt(field.eigenvalues()[k]) * xi[k];
  }
  Eigen::VectorXd a = ((modes * scaled).array() + cfg.mean_log).exp();
  return a;
}

void check_xi(const KlField& field, std::span<const double> xi) {
  if (xi.size() != static_cast<std::size_t>(field.dim())) {
    throw std::invalid_argument("xi has dimension " + std::to_string(xi.size()) +
                                ", field has " + std::to_string(field.dim()));
  }
  for (double v : xi) {
    if (!std::isfinite(v)) throw std::invalid_argument("xi has non-finite entries");
  }
}

}  // namespace

KlConfig paper_pde_preset() { return {30, 128, 0.5, 0.1, 1.0 / 16.0}; }

KlConfig desk_preset() { return {4, 128, 0.5, 0.1, 0.25}; }

KlConfig kl_preset(const std::string& name) {
  if (name == "paper-pde") return paper_pde_preset();
  if (name == "desk") return desk_preset();
  throw std::invalid_argument("unknown preset '" + name + "' (expected paper-pde or desk)");
}

KlField::KlField(const KlConfig& config) : config_(config) {
  if (config.dim < 1) throw std::invalid_argument("KL dimension must be >= 1");
  if (config.grid_resolution < 2) throw std::invalid_argument("KL grid needs >= 2 points");
  if (!(config.correlation_length > 0.0)) {
    throw std::invalid_argument("correlation length must be > 0");
  }
  if (!(config.sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");

  const int n = config.grid_resolution;
  const double h = 1.0 / n;
  const double inv_l2 = 1.0 / (config.correlation_length * config.correlation_length);
  nodes_.resize(n);
  for (int a = 0; a < n; ++a) nodes_[a] = (a + 0.5) * h;
  Eigen::MatrixXd kernel(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const double dt = nodes_[a] - nodes_[b];
      kernel(a, b) = h * std::exp(-dt * dt * inv_l2);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kernel);
  if (eig.info() != Eigen::Success) throw std::runtime_error("KL eigensolver failed");

  // d modes of the product kernel need at most d factors along each axis.
  const int m = std::min(n, config.dim);
  axis_values_.resize(m);
  axis_vectors_.resize(n, m);
  for (int i = 0; i < m; ++i) {
    axis_values_[i] = eig.eigenvalues()[n - 1 - i];
    Eigen::VectorXd v = eig.eigenvectors().col(n - 1 - i) / std::sqrt(h);
    // Fix the sign: the first clearly nonzero entry is positive.
    const double cut = 1e-8 * v.cwiseAbs().maxCoeff();
    for (int a = 0; a < n; ++a) {
      if (std::abs(v[a]) > cut) {
        if (v[a] < 0.0) v = -v;
        break;
      }
    }
    axis_vectors_.col(i) = v;
  }

  std::vector<std::tuple<double, int, int>> products;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) products.emplace_back(axis_values_[i] * axis_values_[j], i, j);
  }
  std::stable_sort(products.begin(), products.end(), [](const auto& l, const auto& r) {
    if (std::get<0>(l) != std::get<0>(r)) return std::get<0>(l) > std::get<0>(r);
    return std::get<1>(l) < std::get<1>(r);
  });
  eigenvalues_.resize(config.dim);
  for (int k = 0; k < config.dim; ++k) {
    eigenvalues_[k] = std::get<0>(products[k]);
    modes_.emplace_back(std::get<1>(products[k]), std::get<2>(products[k]));
  }
  if (!(eigenvalues_[config.dim - 1] > 1e-12 * eigenvalues_[0])) {
    throw std::runtime_error("KL eigenvalue " + std::to_string(config.dim) +
                             " is below 1e-12 of the largest; refine the KL grid or lower d");
  }
}

double KlField::axis_function(int i, double t) const {
  // Nystrom interpolation: phi(t) = (1 / mu) sum_a h k(t, t_a) phi(t_a).
  const double h = 1.0 / config_.grid_resolution;
  const double inv_l2 = 1.0 / (config_.correlation_length * config_.correlation_length);
  double acc = 0.0;
  for (Eigen::Index a = 0; a < nodes_.size(); ++a) {
    const double dt = t - nodes_[a];
    acc += std::exp(-dt * dt * inv_l2) * axis_vectors_(a, i);
  }
  return h * acc / axis_values_[i];
}

double KlField::eigenfunction(int k, double x, double y) const {
  const auto [i, j] = mode(k);
  return axis_function(i, x) * axis_function(j, y);
}

Eigen::MatrixXd KlField::eigenfunctions_at(std::span<const double> xs,
                                           std::span<const double> ys) const {
  if (xs.size() != ys.size()) throw std::invalid_argument("coordinate lists differ in length");
  const auto m = static_cast<int>(axis_values_.size());
  // Structured point sets repeat coordinates; evaluate each 1-D value once.
  std::vector<double> coords(xs.begin(), xs.end());
  coords.insert(coords.end(), ys.begin(), ys.end());
  std::sort(coords.begin(), coords.end());
  coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
  Eigen::MatrixXd table(static_cast<Eigen::Index>(coords.size()), m);
  for (std::size_t c = 0; c < coords.size(); ++c) {
    for (int i = 0; i < m; ++i) table(static_cast<Eigen::Index>(c), i) = axis_function(i, coords[c]);
  }
  auto lookup = [&](double t) {
    return static_cast<Eigen::Index>(std::lower_bound(coords.begin(), coords.end(), t) -
                                     coords.begin());
  };
  Eigen::MatrixXd out(static_cast<Eigen::Index>(xs.size()), dim());
  for (std::size_t p = 0; p < xs.size(); ++p) {
    const Eigen::Index cx = lookup(xs[p]);
    const Eigen::Index cy = lookup(ys[p]);
    for (int k = 0; k < dim(); ++k) {
      const auto [i, j] = modes_[static_cast<std::size_t>(k)];
      out(static_cast<Eigen::Index>(p), k) = table(cx, i) * table(cy, j);
    }
  }
  return out;
}

Eigen::MatrixXd KlField::eigenfunctions_on_grid() const {
  const auto n = nodes_.size();
  Eigen::MatrixXd out(n * n, dim());
  for (Eigen::Index b = 0; b < n; ++b) {
    for (Eigen::Index a = 0; a < n; ++a) {
      for (int k = 0; k < dim(); ++k) {
        const auto [i, j] = modes_[static_cast<std::size_t>(k)];
        out(b * n + a, k) = axis_vectors_(a, i) * axis_vectors_(b, j);
      }
    }
  }
  return out;
}

double KlField::grid_weight() const {
  const double h = 1.0 / config_.grid_resolution;
  return h * h;
}

double KlField::log_fluctuation(double x, double y, std::span<const double> xi) const {
  check_xi(*this, xi);
  double acc = 0.0;
  for (int k = 0; k < dim(); ++k) {
    acc += std::sqrt(eigenvalues_[k]) * eigenfunction(k, x, y) * xi[k];
  }
  return config_.sigma * acc;
}

double KlField::coefficient(double x, double y, std::span<const double> xi) const {
  return std::exp(config_.mean_log + log_fluctuation(x, y, xi));
}

std::vector<double> KlField::transposed(std::span<const double> xi) const {
  check_xi(*this, xi);
  std::vector<double> out(xi.size());
  for (int k = 0; k < dim(); ++k) {
    const auto [i, j] = modes_[static_cast<std::size_t>(k)];
    const auto it = std::find(modes_.begin(), modes_.end(), std::make_pair(j, i));
    if (it == modes_.end()) {
      throw std::invalid_argument("mode " + std::to_string(k + 1) +
                                  " has no transposed partner among the retained modes");
    }
    out[static_cast<std::size_t>(it - modes_.begin())] = xi[k];
  }
  return out;
}

KlField build_kl(const KlConfig& config) { return KlField(config); }

int DiscreteOperator::dof(int i, int j) const {
  if (i <= 0 || j <= 0 || i >= mesh_n || j >= mesh_n) return -1;
  return (j - 1) * (mesh_n - 1) + (i - 1);
}

std::pair<std::vector<double>, std::vector<double>> element_centroids(int mesh_n) {
  check_mesh(mesh_n);
  const double h = 1.0 / mesh_n;
  std::vector<double> xs, ys;
  xs.reserve(static_cast<std::size_t>(mesh_n) * mesh_n);
  ys.reserve(xs.capacity());
  for (int ey = 0; ey < mesh_n; ++ey) {
    for (int ex = 0; ex < mesh_n; ++ex) {
      xs.push_back((ex + 0.5) * h);
      ys.push_back((ey + 0.5) * h);
    }
  }
  return {xs, ys};
}

DiscreteOperator assemble_operator(int mesh_n, const Eigen::VectorXd& element_coefficient) {
  check_mesh(mesh_n);
  if (element_coefficient.size() != static_cast<Eigen::Index>(mesh_n) * mesh_n) {
    throw std::invalid_argument("element coefficient count does not match the mesh");
  }
  if (!(element_coefficient.array() > 0.0).all() || !element_coefficient.allFinite()) {
    throw std::invalid_argument("diffusion coefficient must be finite and positive");
  }
  DiscreteOperator op;
  op.mesh_n = mesh_n;
  op.element_coefficient = element_coefficient;
  const int unknowns = (mesh_n - 1) * (mesh_n - 1);
  const double h = 1.0 / mesh_n;
  op.load = Eigen::VectorXd::Zero(unknowns);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh_n) * mesh_n * 16);
  for (int ey = 0; ey < mesh_n; ++ey) {
    for (int ex = 0; ex < mesh_n; ++ex) {
      const double a = element_coefficient[ey * mesh_n + ex];
      const auto dofs = element_dofs(op, ex, ey);
      for (int r = 0; r < 4; ++r) {
        if (dofs[r] < 0) continue;
        op.load[dofs[r]] += 0.25 * h * h;
        for (int c = 0; c < 4; ++c) {
          if (dofs[c] >= 0) triplets.emplace_back(dofs[r], dofs[c], a * kElementStiffness[r][c]);
        }
      }
    }
  }
  op.stiffness.resize(unknowns, unknowns);
  op.stiffness.setFromTriplets(triplets.begin(), triplets.end());
  op.qoi_dof = op.dof(mesh_n / 2, mesh_n / 2);
  return op;
}

Eigen::VectorXd solve_spd(const Eigen::SparseMatrix<double>& matrix, const Eigen::VectorXd& rhs) {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(matrix);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("stiffness matrix is not positive definite");
  }
  Eigen::VectorXd x = llt.solve(rhs);
  const double rel = (matrix * x - rhs).norm() / std::max(rhs.norm(), 1e-300);
  if (!(rel <= 1e-10)) {
    throw std::runtime_error("sparse solve residual " + std::to_string(rel) + " exceeds 1e-10");
  }
  return x;
}

ForwardSolution solve_forward(const KlField& field, std::span<const double> xi, int mesh_n) {
  check_xi(field, xi);
  if (mesh_n < 8) throw std::invalid_argument("mesh must have at least 8 elements per side");
  ForwardSolution out;
  out.op = assemble_operator(mesh_n, element_coefficients(field, centroid_modes(field, mesh_n), xi));
  out.state = solve_spd(out.op.stiffness, out.op.load);
  out.linear_solves = 1;
  out.u_qoi = out.state[out.op.qoi_dof];
  return out;
}

AdjointGradient solve_adjoint_gradient(const ForwardSolution& forward, const KlField& field,
                                       SensitivityAssembly assembly) {
  const DiscreteOperator& op = forward.op;
  const int n = op.mesh_n;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(op.stiffness.rows());
  rhs[op.qoi_dof] = -1.0;
  // The forward factorization is deliberately not reused.
  const Eigen::VectorXd adjoint = solve_spd(op.stiffness, rhs);

  const Eigen::MatrixXd modes = centroid_modes(field, n);
  const KlConfig& cfg = field.config();
  const int d = field.dim();
  Eigen::VectorXd mode_scale(d);
  for (int k = 0; k < d; ++k) mode_scale[k] = cfg.sigma * std::sqrt(field.eigenvalues()[k]);

  AdjointGradient out;
  out.linear_solves = 1;
  out.gradient.assign(static_cast<std::size_t>(d), 0.0);
  const auto& w = forward.state;

  if (assembly == SensitivityAssembly::element_chain_rule) {
    // g_e = lambda_e^T K_ref w_e, then du/dxi_k = sum_e g_e a_e s_k phi_k(c_e).
    Eigen::VectorXd weighted(static_cast<Eigen::Index>(n) * n);
    for (int ey = 0; ey < n; ++ey) {
      for (int ex = 0; ex < n; ++ex) {
        const auto dofs = element_dofs(op, ex, ey);
        double g = 0.0;
        for (int r = 0; r < 4; ++r) {
          if (dofs[r] < 0) continue;
          for (int c = 0; c < 4; ++c) {
            if (dofs[c] >= 0) g += adjoint[dofs[r]] * kElementStiffness[r][c] * w[dofs[c]];
          }
        }
        const int e = ey * n + ex;
        weighted[e] = g * op.element_coefficient[e];
      }
    }
    const Eigen::VectorXd grad = (modes.transpose() * weighted).cwiseProduct(mode_scale);
    out.gradient.assign(grad.data(), grad.data() + d);
    return out;
  }

  for (int k = 0; k < d; ++k) {
    std::vector<Eigen::Triplet<double>> triplets;
    for (int ey = 0; ey < n; ++ey) {
      for (int ex = 0; ex < n; ++ex) {
        const int e = ey * n + ex;
        const double da = op.element_coefficient[e] * mode_scale[k] * modes(e, k);
        const auto dofs = element_dofs(op, ex, ey);
        for (int r = 0; r < 4; ++r) {
          if (dofs[r] < 0) continue;
          for (int c = 0; c < 4; ++c) {
            if (dofs[c] >= 0) triplets.emplace_back(dofs[r], dofs[c], da * kElementStiffness[r][c]);
          }
        }
      }
    }
    Eigen::SparseMatrix<double> dk(op.stiffness.rows(), op.stiffness.cols());
    dk.setFromTriplets(triplets.begin(), triplets.end());
    out.gradient[static_cast<std::size_t>(k)] = adjoint.dot(dk * w);
  }
  return out;
}

QoiEvaluator pde_evaluator(const KlField& field, int mesh_n) {
  return [&field, mesh_n](std::span<const double> xi, bool with_gradient) {
    const ForwardSolution forward = solve_forward(field, xi, mesh_n);
    QoiSample out;
    out.value = forward.u_qoi;
    if (with_gradient) out.gradient = solve_adjoint_gradient(forward, field).gradient;
    return out;
  };
}

ReferenceExpansion compute_reference(const KlField& field, int mesh_n, const Basis& basis,
                                     const ReferenceConfig& config) {
  if (config.oversampling < 1) throw std::invalid_argument("reference oversampling must be >= 1");
  if (basis.dimension() != field.dim()) {
    throw std::invalid_argument("basis dimension does not match the KL dimension");
  }
  const QoiEvaluator evaluator = pde_evaluator(field, mesh_n);
  ReferenceExpansion ref;
  ref.samples = config.oversampling * static_cast<int>(basis.size());
  const SampleSet train = draw_samples(field.dim(), ref.samples, 0.0, config.seed);
  const MeasurementSystem system =
      assemble(basis, train, evaluator, SystemKind::standard, false, {config.workers});
  ref.coefficients = solve_least_squares(system).coefficients;

  if (config.validation_samples > 0) {
    const SampleSet check = draw_samples(field.dim(), config.validation_samples, 0.0,
                                         derive_seed(config.seed, 7, 0));
    const MeasurementSystem val =
        assemble(basis, check, evaluator, SystemKind::standard, false, {config.workers});
    ref.validation_error = (val.rhs - val.matrix * ref.coefficients).norm() / val.rhs.norm();
  }
  return ref;
}

ExperimentReport run_pde_study(const KlField& field, int mesh_n, const Basis& basis,
                               const Eigen::VectorXd& reference, const StudyConfig& config) {
  if (basis.dimension() != field.dim()) {
    throw std::invalid_argument("basis dimension does not match the KL dimension");
  }
  return run_study(basis, reference, pde_evaluator(field, mesh_n), config,
                   "pde mesh " + std::to_string(mesh_n));
}

std::vector<double> default_pde_grid() { return {8, 12, 16, 20, 28, 36, 48, 70}; }

}  // namespace gradpce
