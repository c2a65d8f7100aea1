#ifndef SPLITLAB_ODE_HPP
#define SPLITLAB_ODE_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace splitlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using RhsFunction = std::function<Vector(const Vector&)>;
using JacobianFunction = std::function<Matrix(const Vector&)>;

/// Thrown when the adaptive integrator cannot make progress (step size
/// underflow or step budget exhausted). Carries the last accepted time.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, double last_good_time)
      : std::runtime_error(what), last_good_time_(last_good_time) {}

  double last_good_time() const noexcept { return last_good_time_; }

 private:
  double last_good_time_;
};

struct Tolerances {
  double rel = 1e-12;
  double abs = 1e-14;

  /// Absolute error scale of the oracle around a state of size `q`.
  double floor_at(const Vector& q) const;
};

/// Central-difference Jacobian of `f` at `q` with step
/// h_k = max(|q_k|, 1) * eps^(1/3).
Matrix finite_difference_jacobian(const RhsFunction& f, const Vector& q);

/// One right-hand-side term of a multi-process ODE.
struct ProcessModel {
  std::string name;
  RhsFunction rhs;
  JacobianFunction jacobian;  // optional; empty means finite differences

  /// Evaluates the tendency and checks that it has the dimension of `q`.
  Vector operator()(const Vector& q) const;

  /// Supplied Jacobian when present, finite-difference fallback otherwise.
  Matrix jacobian_at(const Vector& q) const;

  bool has_analytic_jacobian() const noexcept { return static_cast<bool>(jacobian); }
};

/// Ordered list of processes with a common state dimension and an initial
/// condition. Immutable after construction.
class ProblemSpec {
 public:
  ProblemSpec(std::vector<ProcessModel> processes, Vector initial_condition);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(q_ic_.size()); }
  std::size_t process_count() const noexcept { return processes_.size(); }
  const std::vector<ProcessModel>& processes() const noexcept { return processes_; }
  const ProcessModel& process(std::size_t i) const { return processes_.at(i); }
  const Vector& initial_condition() const noexcept { return q_ic_; }

  std::optional<std::size_t> index_of(const std::string& name) const;
  std::vector<std::string> process_names() const;

  /// Throws std::invalid_argument unless `q` has dimension dim().
  void check_state(const Vector& q) const;

 private:
  std::vector<ProcessModel> processes_;
  Vector q_ic_;
};

struct SolveStats {
  std::size_t steps = 0;
  std::size_t rejected = 0;
};

struct SolveResult {
  Vector q_end;
  /// Integral of each process tendency along the exact trajectory.
  std::vector<Vector> process_integrals;
  SolveStats stats;
};

/// Sum of all process tendencies at `q`.
Vector eval_total_rhs(const ProblemSpec& problem, const Vector& q);

/// Integrates the full multi-process ODE from `q0` over `horizon` with the
/// adaptive Dormand-Prince 5(4) pair. The per-process integrals are carried
/// as extra state components so they share the step-size control.
SolveResult reference_solve(const ProblemSpec& problem, const Vector& q0, double horizon,
                            const Tolerances& tol = {});

/// State reached by integrating one process in isolation for `dt`.
Vector process_solve(const ProcessModel& process, const Vector& q_in, double dt,
                     const Tolerances& tol = {});

/// Change of state produced by one process in isolation over `dt`, i.e.
/// process_solve(...) - q_in, integrated directly as a quadrature variable.
Vector process_increment(const ProcessModel& process, const Vector& q_in, double dt,
                         const Tolerances& tol = {});

namespace detail {

struct AdaptiveResult {
  Vector y_end;
  SolveStats stats;
};

/// Dormand-Prince 5(4) with PI step-size control on y' = f(y), t in [0, horizon].
AdaptiveResult integrate_dopri5(const RhsFunction& f, const Vector& y0, double horizon,
                                const Tolerances& tol);

}  // namespace detail

}  // namespace splitlab

#endif  // SPLITLAB_ODE_HPP
