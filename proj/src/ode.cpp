#include "splitlab/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace splitlab {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr std::size_t kMaxSteps = 5'000'000;

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
// Difference between the 5th- and embedded 4th-order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

// PI controller constants (Hairer & Wanner, DOPRI5 defaults).
constexpr double kBeta = 0.04;
constexpr double kExpo = 0.2 - kBeta * 0.75;
constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;   // h_new >= h / 5
constexpr double kMaxFactor = 10.0;  // h_new <= 10 h

double scaled_rms(const Vector& v, const Vector& scale) {
  if (v.size() == 0) return 0.0;
  return std::sqrt((v.array() / scale.array()).square().mean());
}

double initial_step(const RhsFunction& f, const Vector& y0, const Vector& f0, double horizon,
                    const Tolerances& tol) {
  const Vector scale = (tol.abs + tol.rel * y0.array().abs()).matrix();
  const double d0 = scaled_rms(y0, scale);
  const double d1 = scaled_rms(f0, scale);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, horizon);
  const Vector y1 = y0 + h0 * f0;
  const double d2 = scaled_rms(f(y1) - f0, scale) / h0;
  const double dmax = std::max(d1, d2);
  const double h1 =
      dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 1.0 / 5.0);
  return std::min({100.0 * h0, h1, horizon});
}

}  // namespace

double Tolerances::floor_at(const Vector& q) const {
  const double qmax = q.size() == 0 ? 0.0 : q.lpNorm<Eigen::Infinity>();
  return abs + rel * qmax;
}

Matrix finite_difference_jacobian(const RhsFunction& f, const Vector& q) {
  const Eigen::Index n = q.size();
  Matrix jac(n, n);
  const double root = std::cbrt(kEps);
  Vector probe = q;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double h = std::max(std::abs(q[k]), 1.0) * root;
    probe[k] = q[k] + h;
    const Vector fp = f(probe);
    probe[k] = q[k] - h;
    const Vector fm = f(probe);
    probe[k] = q[k];
    if (fp.size() != n || fm.size() != n) {
      throw std::invalid_argument("finite_difference_jacobian: rhs changed dimension");
    }
    jac.col(k) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

Vector ProcessModel::operator()(const Vector& q) const {
  Vector out = rhs(q);
  if (out.size() != q.size()) {
    std::ostringstream msg;
    msg << "process '" << name << "' returned a tendency of dimension " << out.size()
        << " for a state of dimension " << q.size();
    throw std::invalid_argument(msg.str());
  }
  return out;
}

Matrix ProcessModel::jacobian_at(const Vector& q) const {
  if (jacobian) {
    Matrix jac = jacobian(q);
    if (jac.rows() != q.size() || jac.cols() != q.size()) {
      throw std::invalid_argument("process '" + name + "' returned a non-square Jacobian");
    }
    return jac;
  }
  return finite_difference_jacobian([this](const Vector& x) { return (*this)(x); }, q);
}

ProblemSpec::ProblemSpec(std::vector<ProcessModel> processes, Vector initial_condition)
    : processes_(std::move(processes)), q_ic_(std::move(initial_condition)) {
  if (processes_.size() < 2) {
    throw std::invalid_argument("a multi-process problem needs at least two processes");
  }
  if (q_ic_.size() == 0) {
    throw std::invalid_argument("state dimension must be positive");
  }
  for (std::size_t i = 0; i < processes_.size(); ++i) {
    const auto& p = processes_[i];
    if (p.name.empty()) throw std::invalid_argument("process names must be non-empty");
    if (!p.rhs) throw std::invalid_argument("process '" + p.name + "' has no rhs");
    for (std::size_t j = 0; j < i; ++j) {
      if (processes_[j].name == p.name) {
        throw std::invalid_argument("duplicate process name '" + p.name + "'");
      }
    }
    // Evaluating at the initial condition checks dimension consistency.
    (void)p(q_ic_);
  }
}

std::optional<std::size_t> ProblemSpec::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < processes_.size(); ++i) {
    if (processes_[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<std::string> ProblemSpec::process_names() const {
  std::vector<std::string> names;
  names.reserve(processes_.size());
  for (const auto& p : processes_) names.push_back(p.name);
  return names;
}

void ProblemSpec::check_state(const Vector& q) const {
  if (static_cast<std::size_t>(q.size()) != dim()) {
    std::ostringstream msg;
    msg << "state has dimension " << q.size() << ", problem expects " << dim();
    throw std::invalid_argument(msg.str());
  }
}

Vector eval_total_rhs(const ProblemSpec& problem, const Vector& q) {
  problem.check_state(q);
  Vector total = Vector::Zero(q.size());
  for (const auto& p : problem.processes()) total += p(q);
  return total;
}

namespace detail {

AdaptiveResult integrate_dopri5(const RhsFunction& f, const Vector& y0, double horizon,
                                const Tolerances& tol) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("integration horizon must be finite and non-negative");
  }
  if (!(tol.rel >= 10.0 * kEps) || !(tol.abs >= 0.0)) {
    throw std::invalid_argument("relative tolerance must be at least 10 machine epsilons");
  }

  AdaptiveResult out{y0, {}};
  if (horizon == 0.0) return out;

  Vector y = y0;
  Vector k1 = f(y);
  double t = 0.0;
  double h = initial_step(f, y, k1, horizon, tol);
  double err_old = 1e-4;
  bool last_rejected = false;

  Vector k2, k3, k4, k5, k6, k7, y_new, err_vec, scale;
  while (t < horizon) {
    if (out.stats.steps + out.stats.rejected >= kMaxSteps) {
      throw SolverFailure("step budget exhausted", t);
    }
    if (!(h > 10.0 * kEps * std::abs(t)) || h < std::numeric_limits<double>::min()) {
      std::ostringstream msg;
      msg << "step size underflow at t = " << t;
      throw SolverFailure(msg.str(), t);
    }
    bool final_step = false;
    if (t + h >= horizon) {
      h = horizon - t;
      final_step = true;
    }

    k2 = f(y + h * (a21 * k1));
    k3 = f(y + h * (a31 * k1 + a32 * k2));
    k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    y_new = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    k7 = f(y_new);

    err_vec = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    scale = (tol.abs + tol.rel * y.array().abs().max(y_new.array().abs())).matrix();
    double err = scaled_rms(err_vec, scale);
    if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();

    const double fac11 = std::pow(err, kExpo);
    if (err <= 1.0) {
      double fac = fac11 / std::pow(err_old, kBeta);
      fac = std::clamp(fac / kSafety, 1.0 / kMaxFactor, 1.0 / kMinFactor);
      double h_new = h / fac;
      if (last_rejected) h_new = std::min(h_new, h);
      err_old = std::max(err, 1e-4);

      t = final_step ? horizon : t + h;
      y = y_new;
      k1 = k7;
      ++out.stats.steps;
      last_rejected = false;
      h = h_new;
    } else {
      const double shrink = std::isfinite(fac11) ? std::min(1.0 / kMinFactor, fac11 / kSafety)
                                                 : 1.0 / kMinFactor;
      h = h / shrink;
      ++out.stats.rejected;
      last_rejected = true;
    }
  }
  out.y_end = y;
  return out;
}

}  // namespace detail

SolveResult reference_solve(const ProblemSpec& problem, const Vector& q0, double horizon,
                            const Tolerances& tol) {
  problem.check_state(q0);
  const Eigen::Index n = q0.size();
  const std::size_t count = problem.process_count();

  // Layout: [q, integral_0, ..., integral_{I-1}].
  auto augmented = [&problem, n, count](const Vector& y) {
    const Vector q = y.head(n);
    Vector dy(y.size());
    Vector total = Vector::Zero(n);
    for (std::size_t i = 0; i < count; ++i) {
      Vector xi = problem.process(i)(q);
      total += xi;
      dy.segment(n * static_cast<Eigen::Index>(i + 1), n) = xi;
    }
    dy.head(n) = total;
    return dy;
  };

  Vector y0 = Vector::Zero(n * static_cast<Eigen::Index>(count + 1));
  y0.head(n) = q0;
  const auto run = detail::integrate_dopri5(augmented, y0, horizon, tol);

  SolveResult result;
  result.q_end = run.y_end.head(n);
  result.process_integrals.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    result.process_integrals.emplace_back(
        run.y_end.segment(n * static_cast<Eigen::Index>(i + 1), n));
  }
  result.stats = run.stats;
  return result;
}

Vector process_increment(const ProcessModel& process, const Vector& q_in, double dt,
                         const Tolerances& tol) {
  if (!(dt >= 0.0)) throw std::invalid_argument("process_increment: dt must be non-negative");
  const Eigen::Index n = q_in.size();
  if (dt == 0.0) return Vector::Zero(n);

  // Layout: [q, integral].
  auto augmented = [&process, n](const Vector& y) {
    Vector dy(2 * n);
    const Vector x = process(Vector(y.head(n)));
    dy.head(n) = x;
    dy.tail(n) = x;
    return dy;
  };
  Vector y0(2 * n);
  y0.head(n) = q_in;
  y0.tail(n).setZero();
  const auto run = detail::integrate_dopri5(augmented, y0, dt, tol);
  return run.y_end.tail(n);
}

Vector process_solve(const ProcessModel& process, const Vector& q_in, double dt,
                     const Tolerances& tol) {
  if (!(dt >= 0.0)) throw std::invalid_argument("process_solve: dt must be non-negative");
  if (dt == 0.0) return q_in;
  return detail::integrate_dopri5([&process](const Vector& y) { return process(y); }, q_in,
                                  dt, tol)
      .y_end;
}

}  // namespace splitlab
