#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gradpce/basis.hpp"

namespace gradpce {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Realized Gaussian inputs, one row per sample, plus which samples carry
/// derivative observations.
struct SampleSet {
  RowMatrix points;
  std::vector<bool> with_gradient;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(points.rows()); }
  int dimension() const { return static_cast<int>(points.cols()); }
  int gradient_count() const;
  std::span<const double> point(int i) const {
    return {points.data() + static_cast<Eigen::Index>(i) * points.cols(),
            static_cast<std::size_t>(points.cols())};
  }
};

/// n standard-Gaussian points in R^dim; exactly round(fraction * n) of them
/// flagged for gradients, chosen as the head of a seeded permutation.
SampleSet draw_samples(int dim, int n, double gradient_fraction, std::uint64_t seed);

enum class SystemKind { standard, gradient_enhanced };

std::string to_string(SystemKind kind);
SystemKind system_kind_from_string(const std::string& name);

/// Origin of one matrix row: the sample and role (0 = value, k = d/dxi_k).
struct RowTag {
  int sample = 0;
  int role = 0;
};

struct QoiSample {
  double value = 0.0;
  std::vector<double> gradient;
};

/// Quantity of interest at a point. When `with_gradient` is set the result
/// must carry the full gradient.
using QoiEvaluator = std::function<QoiSample(std::span<const double> point, bool with_gradient)>;

/// Measurement matrix and data. Rows are ordered as all value rows (sample
/// order) followed by the d derivative rows of each flagged sample, so the
/// standard matrix is the leading block of the gradient-enhanced one.
struct MeasurementSystem {
  int dim = 0;
  int order = 0;
  SystemKind kind = SystemKind::standard;
  bool weights_applied = false;
  int num_samples = 0;
  RowMatrix matrix;
  Eigen::VectorXd rhs;
  std::vector<RowTag> row_map;

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }
};

struct AssembleOptions {
  int workers = 1;
};

/// Builds the measurement system. A null evaluator leaves rhs at zero, which is
/// all the diagnostics need. Evaluator exceptions are rethrown with the sample
/// id; non-finite matrix or data entries are rejected.
MeasurementSystem assemble(const Basis& basis, const SampleSet& samples,
                           const QoiEvaluator& evaluator, SystemKind kind, bool apply_weights,
                           const AssembleOptions& options = {});

/// (1/N) A^T A with N the number of samples, not rows.
Eigen::MatrixXd gramian(const MeasurementSystem& system);

// CSV layouts. Samples: header `seed,sample,with_gradient,xi_1..xi_d`.
// Systems: header `dim,order,kind,weights_applied,sample,role,rhs,col_1..col_P`,
// one line per matrix row. Numbers are written with 17 significant digits.
void write_samples_csv(std::ostream& out, const SampleSet& samples);
SampleSet read_samples_csv(std::istream& in);
void write_system_csv(std::ostream& out, const MeasurementSystem& system);
MeasurementSystem read_system_csv(std::istream& in);

}  // namespace gradpce
