#include "splitlab/error_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace splitlab {

Rational CoefficientMatrix::at(const std::string& consumer, const std::string& source) const {
  const auto it = entries.find({consumer, source});
  if (it == entries.end()) {
    throw std::out_of_range("no coefficient s[" + consumer + " <- " + source + "]");
  }
  return it->second;
}

std::string CoefficientMatrix::to_table() const {
  std::size_t width = 8;
  for (const auto& p : processes) width = std::max(width, p.size() + 2);
  for (const auto& [key, value] : entries) width = std::max(width, to_signed_string(value).size() + 2);

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "s[i<-j]";
  for (const auto& source : processes) out << std::setw(static_cast<int>(width)) << source;
  out << "\n";
  for (const auto& consumer : processes) {
    out << std::setw(static_cast<int>(width)) << consumer;
    for (const auto& source : processes) {
      const std::string cell = consumer == source ? "." : to_signed_string(at(consumer, source));
      out << std::setw(static_cast<int>(width)) << cell;
    }
    out << "\n";
  }
  return out.str();
}

CoefficientMatrix predict_leading_coefficients(const SchemeSpec& scheme) {
  const auto report = validate_structure(scheme);
  if (!report.ok()) {
    throw std::invalid_argument("inconsistent scheme '" + scheme.name + "': " + report.summary());
  }

  CoefficientMatrix matrix;
  for (const auto& stage : scheme.stages) matrix.processes.push_back(stage.process);

  for (const auto& consumer : scheme.stages) {
    for (const auto& source : scheme.stages) {
      if (&consumer == &source) continue;
      const Rational c = consumer.coefficient_of(source.id);
      if (c != Rational{0} && c != Rational{1}) matrix.extrapolated = true;
      matrix.entries[{consumer.process, source.process}] = Rational{2} * c - Rational{1};
    }
  }
  return matrix;
}

LeadingPrediction predict_leading_lte(const SchemeSpec& scheme, const ProblemSpec& problem,
                                      const Vector& q, double dt) {
  problem.check_state(q);
  const CoefficientMatrix s = predict_leading_coefficients(scheme);

  std::map<std::string, Vector> tendency;
  for (const auto& name : s.processes) {
    const auto index = problem.index_of(name);
    if (!index) throw std::invalid_argument("scheme integrates unknown process " + name);
    tendency.emplace(name, problem.process(*index)(q));
  }

  const double half_dt2 = 0.5 * dt * dt;
  LeadingPrediction out{Vector::Zero(q.size()), {}};
  for (const auto& consumer : s.processes) {
    Vector weighted = Vector::Zero(q.size());
    for (const auto& source : s.processes) {
      if (source == consumer) continue;
      const Rational c = s.at(consumer, source);
      if (c != Rational{0}) weighted += to_double(c) * tendency.at(source);
    }
    const Matrix jac = problem.process(*problem.index_of(consumer)).jacobian_at(q);
    Vector term = half_dt2 * (jac * weighted);
    out.total += term;
    out.per_process.emplace(consumer, std::move(term));
  }
  return out;
}

double ErrorNorm::operator()(const Vector& v) const {
  if (component) return std::abs(v[*component]);
  return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
}

double ErrorNorm::signed_value(const Vector& v) const {
  if (component) return v[*component];
  if (v.size() == 1) return v[0];
  return (*this)(v);
}

Vector exact_state_at(const ProblemSpec& problem, double t_n, const Tolerances& tol) {
  return reference_solve(problem, problem.initial_condition(), t_n, tol).q_end;
}

LteSample sample_lte(const SchemeSpec& scheme, const ProblemSpec& problem, const Vector& q,
                     double dt, const Tolerances& tol, const IntegratorKind& integrator) {
  const auto report = validate_consistency(scheme, problem);
  if (!report.ok()) {
    throw SchemeError("inconsistent scheme '" + scheme.name + "': " + report.summary());
  }
  IntegratorKind integ = integrator;
  if (integ.kind == IntegratorKind::Kind::exact) integ.tol = tol;

  const StepResult split = step(scheme, problem, q, dt, integ);
  const SolveResult exact = reference_solve(problem, q, dt, tol);

  LteSample sample;
  sample.dt = dt;
  sample.measured_total = split.q_next - exact.q_end;
  for (const auto& stage : scheme.stages) {
    const std::size_t i = *problem.index_of(stage.process);
    sample.measured_per_stage.emplace(stage.id,
                                      split.increments.at(stage.id) - exact.process_integrals[i]);
  }

  LeadingPrediction predicted = predict_leading_lte(scheme, problem, q, dt);
  sample.predicted_total = std::move(predicted.total);
  for (const auto& stage : scheme.stages) {
    sample.predicted_per_stage.emplace(stage.id, predicted.per_process.at(stage.process));
  }
  return sample;
}

Vector measure_lte(const SchemeSpec& scheme, const ProblemSpec& problem, double t_n, double dt,
                   const Tolerances& tol) {
  return sample_lte(scheme, problem, exact_state_at(problem, t_n, tol), dt, tol).measured_total;
}

std::map<std::string, Vector> attribute_lte(const SchemeSpec& scheme,
                                            const ProblemSpec& problem, double t_n, double dt,
                                            const Tolerances& tol) {
  return sample_lte(scheme, problem, exact_state_at(problem, t_n, tol), dt, tol)
      .measured_per_stage;
}

OrderFit fit_order(std::span<const double> dts, std::span<const double> errors) {
  if (dts.size() != errors.size()) {
    throw std::invalid_argument("fit_order: dts and errors differ in length");
  }
  if (dts.size() < 3) throw std::invalid_argument("fit_order: at least three samples required");
  for (std::size_t k = 0; k < dts.size(); ++k) {
    if (!(errors[k] > 0.0) || !std::isfinite(errors[k])) {
      throw std::invalid_argument("fit_order: errors must be finite and strictly positive");
    }
    if (!(dts[k] > 0.0) || (k > 0 && !(dts[k] < dts[k - 1]))) {
      throw std::invalid_argument("fit_order: dts must be positive and strictly decreasing");
    }
  }

  const std::size_t n = dts.size();
  std::vector<double> x(n), y(n);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = std::log(dts[k]);
    y[k] = std::log(errors[k]);
  }
  const double x_mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (x[k] - x_mean) * (x[k] - x_mean);
    sxy += (x[k] - x_mean) * (y[k] - y_mean);
    syy += (y[k] - y_mean) * (y[k] - y_mean);
  }

  OrderFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = y_mean - fit.slope * x_mean;
  double ss_res = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = y[k] - (fit.intercept + fit.slope * x[k]);
    ss_res += r * r;
  }
  // A constant series is fitted exactly by a flat line.
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  fit.dts.assign(dts.begin(), dts.end());
  fit.errors.assign(errors.begin(), errors.end());
  return fit;
}

namespace {

SeriesFit fit_series(std::span<const double> dts, std::vector<double> values, double floor) {
  SeriesFit series;
  std::vector<double> kept_dts, kept_values;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const bool below = !(values[k] >= floor) || values[k] <= 0.0;
    series.below_noise_floor.push_back(below);
    if (!below) {
      kept_dts.push_back(dts[k]);
      kept_values.push_back(values[k]);
    }
  }
  if (kept_values.size() >= 3) series.fit = fit_order(kept_dts, kept_values);
  series.values = std::move(values);
  return series;
}

}  // namespace

LteReport lte_sweep(const SchemeSpec& scheme, const ProblemSpec& problem, double t_n,
                    std::span<const double> dts, const Tolerances& tol,
                    const SweepOptions& options) {
  if (dts.empty()) throw std::invalid_argument("lte_sweep: no time steps given");
  for (std::size_t k = 0; k < dts.size(); ++k) {
    if (!(dts[k] > 0.0) || (k > 0 && !(dts[k] < dts[k - 1]))) {
      throw std::invalid_argument("lte_sweep: dts must be positive and strictly decreasing");
    }
  }
  const auto consistency = validate_consistency(scheme, problem);
  if (!consistency.ok()) {
    throw SchemeError("inconsistent scheme '" + scheme.name + "': " + consistency.summary());
  }

  LteReport report;
  report.scheme_name = scheme.name;
  report.t_n = t_n;
  report.tol = tol;
  report.dts.assign(dts.begin(), dts.end());
  report.extrapolated_rule = predict_leading_coefficients(scheme).extrapolated;
  for (const auto& stage : scheme.stages) {
    report.stage_ids.push_back(stage.id);
    report.stage_process[stage.id] = stage.process;
  }

  const Vector q = exact_state_at(problem, t_n, tol);
  report.noise_floor = 100.0 * tol.floor_at(q);
  const IntegratorKind integ{options.integrator, tol};

  auto one = [&](double dt) {
    try {
      return sample_lte(scheme, problem, q, dt, tol, integ);
    } catch (const SolverFailure& e) {
      std::ostringstream msg;
      msg << "dt=" << dt << ": " << e.what();
      throw SolverFailure(msg.str(), e.last_good_time());
    }
  };
  if (options.concurrent && dts.size() > 1) {
    std::vector<std::future<LteSample>> pending;
    for (double dt : dts) pending.push_back(std::async(std::launch::async, one, dt));
    for (auto& f : pending) report.samples.push_back(f.get());
  } else {
    for (double dt : dts) report.samples.push_back(one(dt));
  }

  const ErrorNorm& norm = options.norm;
  auto collect = [&](auto&& pick) {
    std::vector<double> values;
    for (const auto& s : report.samples) values.push_back(norm(pick(s)));
    return values;
  };

  report.total =
      fit_series(dts, collect([](const LteSample& s) { return s.measured_total; }), report.noise_floor);
  report.residual = fit_series(
      dts, collect([](const LteSample& s) -> Vector { return s.measured_total - s.predicted_total; }),
      report.noise_floor);
  for (const auto& id : report.stage_ids) {
    report.per_stage[id] = fit_series(
        dts, collect([&id](const LteSample& s) { return s.measured_per_stage.at(id); }),
        report.noise_floor);
    report.per_stage_residual[id] = fit_series(
        dts,
        collect([&id](const LteSample& s) -> Vector {
          return s.measured_per_stage.at(id) - s.predicted_per_stage.at(id);
        }),
        report.noise_floor);
  }

  const auto below = std::count(report.total.below_noise_floor.begin(),
                                report.total.below_noise_floor.end(), true);
  if (below > 0) {
    report.notes.push_back("below noise floor: " + std::to_string(below) + " of " +
                           std::to_string(dts.size()) + " total samples");
  }
  if (!report.total.fit) report.notes.push_back("total order not fitted");
  if (report.extrapolated_rule) {
    report.notes.push_back("extrapolated rule: input coefficients outside {0,1} use 2c-1");
  }
  if (options.integrator != IntegratorKind::Kind::exact) {
    report.notes.push_back("predicted terms assume exact sub-integration");
  }
  return report;
}

double global_error(const SchemeSpec& scheme, const ProblemSpec& problem, double horizon,
                    double dt, const Tolerances& tol, const IntegratorKind& integrator,
                    const ErrorNorm& norm) {
  if (!(dt > 0.0) || !(horizon >= 0.0)) {
    throw std::invalid_argument("global_error: need dt > 0 and horizon >= 0");
  }
  const double steps = std::round(horizon / dt);
  if (std::abs(steps * dt - horizon) > 1e-9 * std::max(horizon, 1.0)) {
    throw std::invalid_argument("global_error: horizon must be an integer multiple of dt");
  }
  IntegratorKind integ = integrator;
  if (integ.kind == IntegratorKind::Kind::exact) integ.tol = tol;

  Vector q = problem.initial_condition();
  for (long k = 0; k < static_cast<long>(steps); ++k) {
    q = step(scheme, problem, q, dt, integ).q_next;
  }
  const Vector exact = reference_solve(problem, problem.initial_condition(), horizon, tol).q_end;
  return norm(q - exact);
}

}  // namespace splitlab
