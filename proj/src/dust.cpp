#include "splitlab/dust.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace splitlab::dust {

namespace {

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

Matrix diffusion_matrix(int n, double coeff) {
  Matrix m = Matrix::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    if (k > 0) {
      m(k, k - 1) += coeff;
      m(k, k) -= coeff;
    }
    if (k < n - 1) {
      m(k, k + 1) += coeff;
      m(k, k) -= coeff;
    }
  }
  return m;
}

}  // namespace

ProblemSpec make_scalar_problem(const ScalarParams& p) {
  require(positive(p.emission), "emission must be positive");
  require(positive(p.removal_rate), "removal rate must be positive");
  require(positive(p.mixing_rate), "mixing rate must be positive");
  require(std::isfinite(p.background) && p.background >= 0.0,
          "background mixing ratio must be non-negative");
  require(std::isfinite(p.initial), "initial value must be finite");

  const double e = p.emission, kd = p.removal_rate, km = p.mixing_rate, bg = p.background;
  std::vector<ProcessModel> processes;
  processes.push_back({"A", [e](const Vector& q) { return Vector::Constant(q.size(), e); },
                       [](const Vector& q) { return Matrix::Zero(q.size(), q.size()); }});
  processes.push_back({"B", [kd](const Vector& q) -> Vector { return -kd * q; },
                       [kd](const Vector& q) -> Matrix {
                         return -kd * Matrix::Identity(q.size(), q.size());
                       }});
  processes.push_back({"C",
                       [km, bg](const Vector& q) -> Vector {
                         return -km * (q.array() - bg).matrix();
                       },
                       [km](const Vector& q) -> Matrix {
                         return -km * Matrix::Identity(q.size(), q.size());
                       }});
  return ProblemSpec(std::move(processes), Vector::Constant(1, p.initial));
}

Vector column_mass_weights(const ColumnParams& p) {
  return Vector::Constant(p.layers, p.thickness);
}

ProblemSpec make_column_problem(const ColumnParams& p) {
  require(p.layers >= 2, "a column needs at least two layers");
  require(positive(p.thickness), "layer thickness must be positive");
  require(positive(p.emission_flux), "emission flux must be positive");
  require(positive(p.deposition_velocity), "deposition velocity must be positive");
  require(positive(p.diffusivity), "eddy diffusivity must be positive");

  const int n = p.layers;
  Vector q_ic(n);
  if (p.initial) {
    require(p.initial->size() == n, "initial profile length must equal the layer count");
    require(p.initial->allFinite(), "initial profile must be finite");
    q_ic = *p.initial;
  } else {
    require(positive(p.scale_height), "scale height must be positive");
    require(std::isfinite(p.surface_value), "surface value must be finite");
    for (int k = 0; k < n; ++k) {
      q_ic[k] = p.surface_value * std::exp(-(k + 0.5) * p.thickness / p.scale_height);
    }
  }

  const double source = p.emission_flux / p.thickness;
  const double sink = p.deposition_velocity / p.thickness;
  const Matrix mixing = diffusion_matrix(n, p.diffusivity / (p.thickness * p.thickness));

  std::vector<ProcessModel> processes;
  processes.push_back({"A",
                       [source](const Vector& q) {
                         Vector out = Vector::Zero(q.size());
                         out[0] = source;
                         return out;
                       },
                       [](const Vector& q) { return Matrix::Zero(q.size(), q.size()); }});
  processes.push_back({"B",
                       [sink](const Vector& q) {
                         Vector out = Vector::Zero(q.size());
                         out[0] = -sink * q[0];
                         return out;
                       },
                       [sink](const Vector& q) {
                         Matrix jac = Matrix::Zero(q.size(), q.size());
                         jac(0, 0) = -sink;
                         return jac;
                       }});
  processes.push_back({"C", [mixing](const Vector& q) -> Vector { return mixing * q; },
                       [mixing](const Vector&) -> Matrix { return mixing; }});
  return ProblemSpec(std::move(processes), std::move(q_ic));
}

std::string ComparisonReport::summary_line(std::size_t index) const {
  const ComparisonRow& row = rows.at(index);
  const char* sign = row.lte_original < 0.0 ? "negative" : row.lte_original > 0.0 ? "positive" : "zero";
  char buf[128];
  std::snprintf(buf, sizeof buf, "lte_B sign: %s (original); |Rev|/|Ori| = %.2f", sign, row.ratio);
  return buf;
}

ComparisonReport compare_schemes_report(const ProblemSpec& problem, double t_n,
                                        std::span<const double> dts, const Tolerances& tol,
                                        const SchemeSpec& original, const SchemeSpec& revised,
                                        Eigen::Index component) {
  if (problem.process_count() != 3) {
    throw std::invalid_argument("scheme comparison needs a three-process dust problem");
  }
  if (component < 0 || static_cast<std::size_t>(component) >= problem.dim()) {
    throw std::invalid_argument("comparison component out of range");
  }
  const std::string& removal = problem.process(1).name;
  const Stage* ori_stage = original.stage_for_process(removal);
  const Stage* rev_stage = revised.stage_for_process(removal);
  if (!ori_stage || !rev_stage) {
    throw std::invalid_argument("both schemes must integrate process " + removal);
  }

  ComparisonReport report;
  report.original_scheme = original.name;
  report.revised_scheme = revised.name;
  report.component = component;
  report.t_n = t_n;

  const Vector q = exact_state_at(problem, t_n, tol);
  report.noise_floor = 100.0 * tol.floor_at(q);
  report.emission = problem.process(0)(q)[component];
  report.removal = problem.process(1)(q)[component];
  report.mixing = problem.process(2)(q)[component];
  report.removal_slope = problem.process(1).jacobian_at(q)(component, component);
  report.abs_a_minus_c = std::abs(report.emission - report.mixing);
  report.abs_minus_a_minus_c = std::abs(-report.emission - report.mixing);

  for (double dt : dts) {
    const LteSample ori = sample_lte(original, problem, q, dt, tol);
    const LteSample rev = sample_lte(revised, problem, q, dt, tol);
    ComparisonRow row;
    row.dt = dt;
    row.lte_original = ori.measured_per_stage.at(ori_stage->id)[component];
    row.lte_revised = rev.measured_per_stage.at(rev_stage->id)[component];
    row.predicted_original = ori.predicted_per_stage.at(ori_stage->id)[component];
    row.predicted_revised = rev.predicted_per_stage.at(rev_stage->id)[component];
    row.original_negative = row.lte_original < 0.0;
    row.revised_not_larger = std::abs(row.lte_revised) <= std::abs(row.lte_original);
    row.ratio = row.lte_original != 0.0 ? std::abs(row.lte_revised) / std::abs(row.lte_original)
                                        : std::numeric_limits<double>::quiet_NaN();
    row.below_noise_floor = std::abs(row.lte_original) < report.noise_floor;
    report.rows.push_back(row);
  }
  return report;
}

ComparisonReport compare_schemes_report(const ProblemSpec& problem, double t_n,
                                        std::span<const double> dts, const Tolerances& tol,
                                        Eigen::Index component) {
  const auto names = problem.process_names();
  return compare_schemes_report(problem, t_n, dts, tol,
                                builtin_scheme(BuiltinKind::eam_original, names),
                                builtin_scheme(BuiltinKind::eam_revised, names), component);
}

}  // namespace splitlab::dust
