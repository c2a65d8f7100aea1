#ifndef SPLITLAB_ERROR_ANALYSIS_HPP
#define SPLITLAB_ERROR_ANALYSIS_HPP

#include "splitlab/ode.hpp"
#include "splitlab/rational.hpp"
#include "splitlab/scheme.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace splitlab {

/// Signed coefficients s[i <- j] of the leading local truncation error
///
///   lte ~ (dt^2 / 2) * sum_{i != j} s[i <- j] * J_i(q) * X_j(q).
///
/// A stage integrating process i whose input contains c * increment(stage of
/// j) gets s[i <- j] = 2c - 1; if the input does not mention j the
/// coefficient is -1 (j's influence on i is missing). c = 1 gives +1 (one
/// full step of j's influence too much).
struct CoefficientMatrix {
  std::vector<std::string> processes;  // stage order
  std::map<std::pair<std::string, std::string>, Rational> entries;  // (consumer, source)
  /// Set when some input coefficient lies outside {0, 1}; the 2c - 1 rule is
  /// only derived for those two values.
  bool extrapolated = false;

  Rational at(const std::string& consumer, const std::string& source) const;

  /// Plain-text table, one row per consumer.
  std::string to_table() const;

  friend bool operator==(const CoefficientMatrix&, const CoefficientMatrix&) = default;
};

/// Throws std::invalid_argument when the scheme is structurally inconsistent.
CoefficientMatrix predict_leading_coefficients(const SchemeSpec& scheme);

struct LeadingPrediction {
  Vector total;
  std::map<std::string, Vector> per_process;  // consumer process -> term
};

/// Evaluates the leading (dt^2) term at state `q` with Jacobian-vector
/// products (finite-difference Jacobians when none is supplied).
LeadingPrediction predict_leading_lte(const SchemeSpec& scheme, const ProblemSpec& problem,
                                      const Vector& q, double dt);

/// Max-norm by default; a selected component gives |v[component]|.
struct ErrorNorm {
  std::optional<Eigen::Index> component;

  double operator()(const Vector& v) const;
  /// Signed value of the selected component (or the only one when dim is 1);
  /// falls back to the max-norm for vectors without a selection.
  double signed_value(const Vector& v) const;
};

struct LteSample {
  double dt = 0.0;
  Vector measured_total;
  std::map<std::string, Vector> measured_per_stage;
  Vector predicted_total;
  std::map<std::string, Vector> predicted_per_stage;
};

/// Exact state at t_n, obtained from the problem's initial condition.
Vector exact_state_at(const ProblemSpec& problem, double t_n, const Tolerances& tol = {});

/// Measures one step from the exact state `q`: the total error
/// step(q) - q(t+dt), the per-stage attribution (increment minus exact
/// process integral), and the leading-order prediction.
LteSample sample_lte(const SchemeSpec& scheme, const ProblemSpec& problem, const Vector& q,
                     double dt, const Tolerances& tol = {},
                     const IntegratorKind& integrator = IntegratorKind::exact());

Vector measure_lte(const SchemeSpec& scheme, const ProblemSpec& problem, double t_n, double dt,
                   const Tolerances& tol = {});

std::map<std::string, Vector> attribute_lte(const SchemeSpec& scheme,
                                            const ProblemSpec& problem, double t_n, double dt,
                                            const Tolerances& tol = {});

struct OrderFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<double> dts;
  std::vector<double> errors;
};

/// Least-squares line through (log dt, log error).
OrderFit fit_order(std::span<const double> dts, std::span<const double> errors);

/// Fit of one error series in a sweep. Samples under the noise floor are
/// flagged and left out; `fit` is empty when fewer than three remain.
struct SeriesFit {
  std::vector<double> values;  // norms, one per dt
  std::vector<bool> below_noise_floor;
  std::optional<OrderFit> fit;
};

struct SweepOptions {
  ErrorNorm norm{};
  IntegratorKind::Kind integrator = IntegratorKind::Kind::exact;
  bool concurrent = true;
};

struct LteReport {
  std::string scheme_name;
  double t_n = 0.0;
  Tolerances tol{};
  double noise_floor = 0.0;
  bool extrapolated_rule = false;
  std::vector<std::string> stage_ids;
  std::map<std::string, std::string> stage_process;
  std::vector<double> dts;
  std::vector<LteSample> samples;  // same order as dts

  SeriesFit total;
  std::map<std::string, SeriesFit> per_stage;
  SeriesFit residual;  // measured - predicted, total
  std::map<std::string, SeriesFit> per_stage_residual;
  std::vector<std::string> notes;
};

/// Samples lte at each dt (strictly decreasing) and fits orders for the
/// total, every stage, and the residual after removing the leading term.
LteReport lte_sweep(const SchemeSpec& scheme, const ProblemSpec& problem, double t_n,
                    std::span<const double> dts, const Tolerances& tol = {},
                    const SweepOptions& options = {});

/// || q^N - q(T) || with q^N from N = T/dt repeated steps starting at the
/// initial condition.
double global_error(const SchemeSpec& scheme, const ProblemSpec& problem, double horizon,
                    double dt, const Tolerances& tol = {},
                    const IntegratorKind& integrator = IntegratorKind::exact(),
                    const ErrorNorm& norm = {});

}  // namespace splitlab

#endif  // SPLITLAB_ERROR_ANALYSIS_HPP
