#include "gradpce/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "gradpce/parallel.hpp"
#include "gradpce/random.hpp"

namespace gradpce {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("malformed number in CSV: '" + s + "'");
  return v;
}

}  // namespace

int SampleSet::gradient_count() const {
  return static_cast<int>(std::count(with_gradient.begin(), with_gradient.end(), true));
}

SampleSet draw_samples(int dim, int n, double gradient_fraction, std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("draw_samples: dim must be >= 1");
  if (n < 1) throw std::invalid_argument("draw_samples: n must be >= 1");
  if (!(gradient_fraction >= 0.0 && gradient_fraction <= 1.0)) {
    throw std::invalid_argument("draw_samples: gradient fraction must lie in [0, 1]");
  }
  SampleSet set;
  set.seed = seed;
  set.points.resize(n, dim);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < dim; ++k) set.points(i, k) = rng.normal();
  }
  const auto flagged = static_cast<int>(std::lround(gradient_fraction * n));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<int>(order));
  set.with_gradient.assign(static_cast<std::size_t>(n), false);
  for (int i = 0; i < flagged; ++i) set.with_gradient[static_cast<std::size_t>(order[i])] = true;
  return set;
}

std::string to_string(SystemKind kind) {
  return kind == SystemKind::standard ? "standard" : "gradient-enhanced";
}

SystemKind system_kind_from_string(const std::string& name) {
  if (name == "standard") return SystemKind::standard;
  if (name == "gradient-enhanced" || name == "gradient") return SystemKind::gradient_enhanced;
  throw std::invalid_argument("unknown system kind '" + name + "'");
}

MeasurementSystem assemble(const Basis& basis, const SampleSet& samples,
                           const QoiEvaluator& evaluator, SystemKind kind, bool apply_weights,
                           const AssembleOptions& options) {
  const int d = basis.dimension();
  if (samples.dimension() != d) {
    throw std::invalid_argument("assemble: samples have dimension " +
                                std::to_string(samples.dimension()) + ", basis has " +
                                std::to_string(d));
  }
  const int n = samples.size();
  const auto p = static_cast<Eigen::Index>(basis.size());
  const bool enhanced = kind == SystemKind::gradient_enhanced;

  // Row layout: n value rows, then d rows per flagged sample.
  std::vector<int> derivative_block(static_cast<std::size_t>(n), -1);
  int flagged = 0;
  if (enhanced) {
    for (int i = 0; i < n; ++i) {
      if (samples.with_gradient[static_cast<std::size_t>(i)]) derivative_block[i] = flagged++;
    }
  }
  const Eigen::Index rows = n + static_cast<Eigen::Index>(flagged) * d;

  MeasurementSystem sys;
  sys.dim = d;
  sys.order = basis.order();
  sys.kind = kind;
  sys.weights_applied = apply_weights;
  sys.num_samples = n;
  sys.matrix.resize(rows, p);
  sys.rhs = Eigen::VectorXd::Zero(rows);
  sys.row_map.resize(static_cast<std::size_t>(rows));

  const Eigen::VectorXd weights =
      apply_weights ? gradient_weights(basis) : Eigen::VectorXd::Ones(p);

  parallel_for(static_cast<std::size_t>(n), options.workers, [&](std::size_t idx) {
    const int i = static_cast<int>(idx);
    const auto point = samples.point(i);
    const int block = derivative_block[idx];
    const bool want_gradient = block >= 0;

    std::vector<double> values(static_cast<std::size_t>(p));
    Eigen::MatrixXd partials;
    if (want_gradient) {
      partials.resize(d, p);
      basis.evaluate_with_gradient(point, values, partials);
    } else {
      basis.evaluate(point, values);
    }
    for (Eigen::Index j = 0; j < p; ++j) sys.matrix(i, j) = values[j] * weights[j];
    sys.row_map[idx] = {i, 0};
    const Eigen::Index base = n + static_cast<Eigen::Index>(block) * d;
    if (want_gradient) {
      for (int k = 0; k < d; ++k) {
        for (Eigen::Index j = 0; j < p; ++j) {
          sys.matrix(base + k, j) = partials(k, j) * weights[j];
        }
        sys.row_map[static_cast<std::size_t>(base + k)] = {i, k + 1};
      }
    }

    if (evaluator) {
      QoiSample q;
      try {
        q = evaluator(point, want_gradient);
      } catch (const std::exception& e) {
        throw std::runtime_error("evaluator failed at sample " + std::to_string(i) + ": " +
                                 e.what());
      }
      if (!std::isfinite(q.value)) {
        throw std::runtime_error("evaluator returned a non-finite value at sample " +
                                 std::to_string(i));
      }
      sys.rhs[i] = q.value;
      if (want_gradient) {
        if (q.gradient.size() != static_cast<std::size_t>(d)) {
          throw std::runtime_error("evaluator returned " + std::to_string(q.gradient.size()) +
                                   " derivatives at sample " + std::to_string(i) +
                                   ", expected " + std::to_string(d));
        }
        for (int k = 0; k < d; ++k) {
          if (!std::isfinite(q.gradient[k])) {
            throw std::runtime_error("evaluator returned a non-finite derivative at sample " +
                                     std::to_string(i));
          }
          sys.rhs[base + k] = q.gradient[k];
        }
      }
    }
  });

  if (!sys.matrix.allFinite()) {
    throw std::runtime_error("assembled measurement matrix has non-finite entries");
  }
  return sys;
}

Eigen::MatrixXd gramian(const MeasurementSystem& system) {
  if (system.num_samples < 1) throw std::invalid_argument("gramian: system has no samples");
  Eigen::MatrixXd m = system.matrix.transpose() * system.matrix;
  m /= static_cast<double>(system.num_samples);
  return 0.5 * (m + m.transpose());
}

void write_samples_csv(std::ostream& out, const SampleSet& samples) {
  out << "seed,sample,with_gradient";
  for (int k = 0; k < samples.dimension(); ++k) out << ",xi_" << (k + 1);
  out << '\n';
  for (int i = 0; i < samples.size(); ++i) {
    out << samples.seed << ',' << i << ',' << (samples.with_gradient[i] ? 1 : 0);
    for (int k = 0; k < samples.dimension(); ++k) out << ',' << format_double(samples.points(i, k));
    out << '\n';
  }
}

SampleSet read_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("sample CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "seed" || header[1] != "sample" ||
      header[2] != "with_gradient") {
    throw std::runtime_error("sample CSV header must start with seed,sample,with_gradient");
  }
  const auto d = static_cast<Eigen::Index>(header.size() - 3);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
    if (rows.back().size() != header.size()) {
      throw std::runtime_error("sample CSV row " + std::to_string(rows.size()) +
                               " has the wrong number of fields");
    }
  }
  SampleSet set;
  set.points.resize(static_cast<Eigen::Index>(rows.size()), d);
  set.with_gradient.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == 0) set.seed = std::stoull(rows[i][0]);
    set.with_gradient[i] = rows[i][2] == "1";
    for (Eigen::Index k = 0; k < d; ++k) {
      set.points(static_cast<Eigen::Index>(i), k) = parse_double(rows[i][3 + k]);
    }
  }
  return set;
}

void write_system_csv(std::ostream& out, const MeasurementSystem& system) {
  out << "dim,order,kind,weights_applied,sample,role,rhs";
  for (Eigen::Index j = 0; j < system.cols(); ++j) out << ",col_" << (j + 1);
  out << '\n';
  const std::string prefix = std::to_string(system.dim) + ',' + std::to_string(system.order) +
                             ',' + to_string(system.kind) + ',' +
                             (system.weights_applied ? "1" : "0") + ',';
  for (Eigen::Index r = 0; r < system.rows(); ++r) {
    const auto& tag = system.row_map[static_cast<std::size_t>(r)];
    out << prefix << tag.sample << ',' << tag.role << ',' << format_double(system.rhs[r]);
    for (Eigen::Index j = 0; j < system.cols(); ++j) out << ',' << format_double(system.matrix(r, j));
    out << '\n';
  }
}

MeasurementSystem read_system_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("system CSV is empty");
  const auto header = split_csv_line(line);
  static const char* expected[] = {"dim", "order", "kind", "weights_applied",
                                   "sample", "role", "rhs"};
  if (header.size() < 8) throw std::runtime_error("system CSV header is too short");
  for (std::size_t c = 0; c < 7; ++c) {
    if (header[c] != expected[c]) {
      throw std::runtime_error(std::string("system CSV header column ") + std::to_string(c + 1) +
                               " must be '" + expected[c] + "'");
    }
  }
  const auto p = static_cast<Eigen::Index>(header.size() - 7);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
    if (rows.back().size() != header.size()) {
      throw std::runtime_error("system CSV row " + std::to_string(rows.size()) +
                               " has the wrong number of fields");
    }
  }
  if (rows.empty()) throw std::runtime_error("system CSV has no rows");
  MeasurementSystem sys;
  sys.dim = std::stoi(rows[0][0]);
  sys.order = std::stoi(rows[0][1]);
  sys.kind = system_kind_from_string(rows[0][2]);
  sys.weights_applied = rows[0][3] == "1";
  sys.matrix.resize(static_cast<Eigen::Index>(rows.size()), p);
  sys.rhs.resize(static_cast<Eigen::Index>(rows.size()));
  sys.row_map.resize(rows.size());
  int max_sample = -1;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    sys.row_map[r] = {std::stoi(rows[r][4]), std::stoi(rows[r][5])};
    max_sample = std::max(max_sample, sys.row_map[r].sample);
    sys.rhs[ri] = parse_double(rows[r][6]);
    for (Eigen::Index j = 0; j < p; ++j) sys.matrix(ri, j) = parse_double(rows[r][7 + j]);
  }
  sys.num_samples = max_sample + 1;
  return sys;
}

}  // namespace gradpce
