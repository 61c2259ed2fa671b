#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <vector>

#include "gradpce/basis.hpp"
#include "gradpce/diagnostics.hpp"
#include "gradpce/experiments.hpp"
#include "gradpce/pde.hpp"
#include "gradpce/report.hpp"
#include "gradpce/sampling.hpp"
#include "gradpce/selftest.hpp"
#include "gradpce/solver.hpp"

namespace py = pybind11;
using namespace gradpce;

namespace {

std::vector<std::vector<int>> index_table(const Basis& basis) {
  std::vector<std::vector<int>> out;
  out.reserve(basis.size());
  for (const auto& m : basis.indices()) out.push_back(m.degrees());
  return out;
}

// Wraps a python callable f(point, with_gradient) -> (value, gradient or None).
QoiEvaluator python_evaluator(py::function f) {
  return [f](std::span<const double> point, bool with_gradient) {
    py::gil_scoped_acquire gil;
    const std::vector<double> x(point.begin(), point.end());
    const py::sequence r = f(x, with_gradient);
    QoiSample q;
    q.value = r[0].cast<double>();
    if (with_gradient && !r[1].is_none()) q.gradient = r[1].cast<std::vector<double>>();
    return q;
  };
}

StudyConfig study_config(std::vector<double> n_grid, double fraction, int reps, std::uint64_t seed,
                         double noise_variance, const std::string& noise_target, int workers) {
  StudyConfig c;
  c.n_grid = std::move(n_grid);
  c.gradient_fraction = fraction;
  c.replications = reps;
  c.seed = seed;
  c.noise.variance = noise_variance;
  c.noise.target = noise_target_from_string(noise_target);
  c.workers = workers;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gradient-enhanced sparse polynomial chaos recovery";
  m.attr("build_id") = build_id();

  m.def("hermite_eval", &hermite_eval, py::arg("order"), py::arg("x"));
  m.def("hermite_derivative", &hermite_derivative, py::arg("order"), py::arg("x"));
  m.def("total_degree_cardinality", &total_degree_cardinality, py::arg("dim"), py::arg("order"));

  py::class_<Basis>(m, "Basis")
      .def_property_readonly("dimension", &Basis::dimension)
      .def_property_readonly("order", &Basis::order)
      .def("__len__", &Basis::size)
      .def_property_readonly("indices", &index_table)
      .def("truncate", &Basis::truncate, py::arg("count"))
      .def("weights", &gradient_weights)
      .def("evaluate", [](const Basis& b, const std::vector<double>& x) {
        if (static_cast<int>(x.size()) != b.dimension()) throw py::value_error("point has wrong dimension");
        Eigen::VectorXd v(static_cast<Eigen::Index>(b.size()));
        b.evaluate(x, {v.data(), b.size()});
        return v;
      }, py::arg("point"))
      .def("evaluate_with_gradient", [](const Basis& b, const std::vector<double>& x) {
        if (static_cast<int>(x.size()) != b.dimension()) throw py::value_error("point has wrong dimension");
        Eigen::VectorXd v(static_cast<Eigen::Index>(b.size()));
        Eigen::MatrixXd g(b.dimension(), static_cast<Eigen::Index>(b.size()));
        b.evaluate_with_gradient(x, {v.data(), b.size()}, g);
        return py::make_tuple(v, g);
      }, py::arg("point"));
  m.def("enumerate_basis", &enumerate_basis, py::arg("dim"), py::arg("order"));

  py::class_<SampleSet>(m, "SampleSet")
      .def_readonly("points", &SampleSet::points)
      .def_property_readonly("with_gradient", [](const SampleSet& s) { return s.with_gradient; })
      .def_readonly("seed", &SampleSet::seed)
      .def("__len__", &SampleSet::size)
      .def_property_readonly("gradient_count", &SampleSet::gradient_count);
  m.def("draw_samples", &draw_samples, py::arg("dim"), py::arg("n"), py::arg("gradient_fraction"),
        py::arg("seed"));

  py::class_<MeasurementSystem>(m, "MeasurementSystem")
      .def_readonly("matrix", &MeasurementSystem::matrix)
      .def_readonly("rhs", &MeasurementSystem::rhs)
      .def_readonly("num_samples", &MeasurementSystem::num_samples)
      .def_readonly("weights_applied", &MeasurementSystem::weights_applied)
      .def_property_readonly("kind", [](const MeasurementSystem& s) { return to_string(s.kind); })
      .def("gramian", &gramian);
  m.def("assemble", [](const Basis& basis, const SampleSet& samples, const std::string& kind, bool apply_weights,
                       std::optional<py::function> evaluator) {
    const QoiEvaluator eval = evaluator ? python_evaluator(*evaluator) : QoiEvaluator{};
    return assemble(basis, samples, eval, system_kind_from_string(kind), apply_weights);
  }, py::arg("basis"), py::arg("samples"), py::arg("kind") = "gradient-enhanced", py::arg("apply_weights") = true,
        py::arg("evaluator") = py::none());

  m.def("coherence_mu", py::overload_cast<const Basis&, const TruncationSet&, int, std::uint64_t>(&coherence_mu),
        py::arg("basis"), py::arg("truncation"), py::arg("budget") = 1000, py::arg("seed") = 0);
  m.def("coherence_beta",
        py::overload_cast<const Basis&, const TruncationSet&, int, std::uint64_t>(&coherence_beta),
        py::arg("basis"), py::arg("truncation"), py::arg("budget") = 1000, py::arg("seed") = 0);
  py::class_<TruncationSet>(m, "TruncationSet")
      .def_static("for_order", &TruncationSet::for_order, py::arg("order"), py::arg("epsilon") = 1e-2)
      .def_readonly("epsilon", &TruncationSet::epsilon)
      .def_readonly("radius_sq", &TruncationSet::radius_sq);
  py::class_<RicEstimate>(m, "RicEstimate")
      .def_readonly("s", &RicEstimate::s)
      .def_readonly("value", &RicEstimate::value)
      .def_readonly("subsets_examined", &RicEstimate::subsets_examined)
      .def_readonly("exact", &RicEstimate::exact);
  m.def("ric_exhaustive", &ric_exhaustive, py::arg("system"), py::arg("s"), py::arg("max_subsets") = 1'000'000);
  m.def("ric_monte_carlo", &ric_monte_carlo, py::arg("system"), py::arg("s"), py::arg("trials"), py::arg("seed"));
  m.def("nullspace_dim", &nullspace_dim, py::arg("system"), py::arg("rel_tol") = 1e-10);
  m.def("column_inner_products", &column_inner_products, py::arg("system"));
  m.def("sample_bound", &sample_bound, py::arg("s"), py::arg("basis_size"), py::arg("mu"), py::arg("c_q"),
        py::arg("delta_star"), py::arg("p_star"), py::arg("prob_q"), py::arg("cap") = 100'000'000);

  py::class_<SparseSolution>(m, "SparseSolution")
      .def_readonly("coefficients", &SparseSolution::coefficients)
      .def_readonly("delta_used", &SparseSolution::delta_used)
      .def_readonly("residual_norm", &SparseSolution::residual_norm)
      .def_readonly("iterations", &SparseSolution::iterations)
      .def_readonly("converged", &SparseSolution::converged)
      .def_readonly("duality_gap", &SparseSolution::duality_gap)
      .def_property_readonly("status", [](const SparseSolution& s) { return to_string(s.status); });
  m.def("solve_bpdn", [](const RowMatrix& a, const Eigen::VectorXd& b, double delta) {
    py::gil_scoped_release release;
    return solve_bpdn(a, b, delta);
  }, py::arg("matrix"), py::arg("rhs"), py::arg("delta"));
  m.def("solve_least_squares", &solve_least_squares, py::arg("system"));
  m.def("cross_validate_delta", [](const MeasurementSystem& s, int folds, std::uint64_t seed) {
    const auto grid = default_delta_grid(s.rhs.norm());
    const CvReport r = cross_validate_delta(s, folds, grid, seed);
    return py::make_tuple(r.chosen_delta, r.candidate_deltas, r.validation_errors);
  }, py::arg("system"), py::arg("folds") = 4, py::arg("seed") = 0);
  m.def("unweight", py::overload_cast<const Eigen::VectorXd&, const Basis&, bool>(&unweight),
        py::arg("coefficients"), py::arg("basis"), py::arg("weights_applied") = true);

  py::class_<ManufacturedProblem>(m, "ManufacturedProblem")
      .def_readonly("basis", &ManufacturedProblem::basis)
      .def_readonly("planted", &ManufacturedProblem::planted)
      .def_readonly("sparsity", &ManufacturedProblem::sparsity);
  m.def("manufacture", &manufacture, py::arg("basis"), py::arg("sparsity"), py::arg("seed"));
  m.def("evaluate_planted", [](const ManufacturedProblem& p, const std::vector<double>& x) {
    const QoiSample q = evaluate_planted(p, x);
    return py::make_tuple(q.value, q.gradient);
  }, py::arg("problem"), py::arg("point"));
  m.def("rrmse", &rrmse, py::arg("estimate"), py::arg("reference"));
  m.def("proportion_exceeds", &proportion_exceeds, py::arg("k1"), py::arg("n1"), py::arg("k2"), py::arg("n2"),
        py::arg("z") = 1.96);
  m.def("_recovery_study_json",
        [](const ManufacturedProblem& p, std::vector<double> n_grid, double fraction, int reps, std::uint64_t seed,
           double noise_variance, const std::string& noise_target, int workers) {
          const StudyConfig c = study_config(std::move(n_grid), fraction, reps, seed, noise_variance, noise_target,
                                             workers);
          py::gil_scoped_release release;
          return to_json(run_recovery_study(p, c)).dump();
        },
        py::arg("problem"), py::arg("n_grid"), py::arg("gradient_fraction"), py::arg("replications"),
        py::arg("seed"), py::arg("noise_variance") = 0.0, py::arg("noise_target") = "both", py::arg("workers") = 1);

  py::class_<KlField>(m, "KlField")
      .def(py::init([](const std::string& preset) { return KlField(kl_preset(preset)); }),
           py::arg("preset") = "desk")
      .def_property_readonly("dim", &KlField::dim)
      .def_property_readonly("eigenvalues", &KlField::eigenvalues)
      .def("coefficient", [](const KlField& f, double x, double y, const std::vector<double>& xi) {
        return f.coefficient(x, y, xi);
      }, py::arg("x"), py::arg("y"), py::arg("xi"));
  m.def("solve_pde", [](const KlField& f, const std::vector<double>& xi, int mesh) {
    if (static_cast<int>(xi.size()) != f.dim()) throw py::value_error("xi has wrong dimension");
    py::gil_scoped_release release;
    const ForwardSolution fwd = solve_forward(f, xi, mesh);
    return std::make_pair(fwd.u_qoi, solve_adjoint_gradient(fwd, f).gradient);
  }, py::arg("field"), py::arg("xi"), py::arg("mesh") = 32);

  m.def("selftest", [] {
    std::vector<std::tuple<std::string, bool, std::string>> out;
    for (const auto& c : run_selftest()) out.emplace_back(c.name, c.passed, c.detail);
    return out;
  });
}
