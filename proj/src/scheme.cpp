#include "splitlab/scheme.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

namespace splitlab {

Rational Stage::coefficient_of(const std::string& stage_id) const {
  Rational total{0};
  for (const auto& term : input) {
    if (term.stage == stage_id) total += term.coefficient;
  }
  return total;
}

Rational SchemeSpec::output_weight(const std::string& stage_id) const {
  const auto it = output_weights.find(stage_id);
  if (it != output_weights.end()) return it->second;
  return explicit_output ? Rational{0} : Rational{1};
}

const Stage* SchemeSpec::find_stage(const std::string& stage_id) const {
  const auto it = std::find_if(stages.begin(), stages.end(),
                               [&](const Stage& s) { return s.id == stage_id; });
  return it == stages.end() ? nullptr : &*it;
}

const Stage* SchemeSpec::stage_for_process(const std::string& process) const {
  const auto it = std::find_if(stages.begin(), stages.end(),
                               [&](const Stage& s) { return s.process == process; });
  return it == stages.end() ? nullptr : &*it;
}

BuiltinKind builtin_kind_from_string(std::string_view name) {
  if (name == "parallel") return BuiltinKind::parallel;
  if (name == "sequential") return BuiltinKind::sequential;
  if (name == "eam_original") return BuiltinKind::eam_original;
  if (name == "eam_revised") return BuiltinKind::eam_revised;
  throw std::invalid_argument("unknown built-in scheme '" + std::string(name) + "'");
}

std::string_view to_string(BuiltinKind kind) {
  switch (kind) {
    case BuiltinKind::parallel: return "parallel";
    case BuiltinKind::sequential: return "sequential";
    case BuiltinKind::eam_original: return "eam_original";
    case BuiltinKind::eam_revised: return "eam_revised";
  }
  return "?";
}

namespace {

std::vector<std::string> stage_ids_for(const std::vector<std::string>& names) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::string id = names[i];
    std::transform(id.begin(), id.end(), id.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (std::find(ids.begin(), ids.end(), id) != ids.end()) id += "_" + std::to_string(i);
    ids.push_back(std::move(id));
  }
  return ids;
}

}  // namespace

SchemeSpec builtin_scheme(BuiltinKind kind, const std::vector<std::string>& process_names) {
  const std::size_t n = process_names.size();
  const bool eam = kind == BuiltinKind::eam_original || kind == BuiltinKind::eam_revised;
  if (eam && n != 3) {
    throw std::invalid_argument(std::string(to_string(kind)) +
                                " couples exactly three processes");
  }
  if (n < 2) {
    throw std::invalid_argument(std::string(to_string(kind)) +
                                " needs at least two processes");
  }
  const auto ids = stage_ids_for(process_names);

  SchemeSpec scheme;
  scheme.name = std::string(to_string(kind));
  for (std::size_t k = 0; k < n; ++k) {
    Stage stage{ids[k], process_names[k], {}};
    switch (kind) {
      case BuiltinKind::parallel:
        break;
      case BuiltinKind::sequential:
      case BuiltinKind::eam_original:
        for (std::size_t j = 0; j < k; ++j) stage.input.push_back({ids[j], Rational{1}});
        break;
      case BuiltinKind::eam_revised:
        // A and B from q^n; C from q^n + dt (A* + B*).
        if (k == 2) {
          stage.input.push_back({ids[0], Rational{1}});
          stage.input.push_back({ids[1], Rational{1}});
        }
        break;
    }
    scheme.stages.push_back(std::move(stage));
  }
  return scheme;
}

std::string ValidationReport::summary() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "\n";
    out += v.message;
  }
  return out;
}

ValidationReport validate_structure(const SchemeSpec& scheme) {
  ValidationReport report;
  auto add = [&report](Violation::Kind kind, std::string message) {
    report.violations.push_back({kind, std::move(message)});
  };

  std::set<std::string> seen_stages;
  std::set<std::string> referenced;
  for (const auto& stage : scheme.stages) {
    if (seen_stages.count(stage.id)) add(Violation::Kind::bad_reference,
                                         "duplicate stage id '" + stage.id + "'");
    for (const auto& term : stage.input) {
      if (!seen_stages.count(term.stage)) {
        add(Violation::Kind::bad_reference, "stage '" + stage.id +
                                                 "' references stage '" + term.stage +
                                                 "' which is not an earlier stage");
      }
      if (term.coefficient != Rational{0}) referenced.insert(term.stage);
    }
    seen_stages.insert(stage.id);
  }
  for (const auto& [id, weight] : scheme.output_weights) {
    if (!seen_stages.count(id)) {
      add(Violation::Kind::bad_reference, "output references unknown stage '" + id + "'");
    }
  }

  std::map<std::string, int> per_process;
  for (const auto& stage : scheme.stages) ++per_process[stage.process];
  for (const auto& [process, count] : per_process) {
    if (count > 1) {
      add(Violation::Kind::process_duplicated,
          "process " + process + " integrated " + std::to_string(count) +
              " times (substepping is not supported)");
    }
  }

  for (const auto& stage : scheme.stages) {
    const Rational w = scheme.output_weight(stage.id);
    if (w == Rational{0} && !referenced.count(stage.id)) {
      add(Violation::Kind::unused_stage, "stage '" + stage.id + "' is never used");
    } else if (w != Rational{1}) {
      add(Violation::Kind::output_weight,
          "stage '" + stage.id + "' has output weight " + to_string(w) +
              "; output weight != 1 breaks first-order consistency");
    }
  }
  return report;
}

ValidationReport validate_consistency(const SchemeSpec& scheme,
                                      std::span<const std::string> process_names) {
  ValidationReport report = validate_structure(scheme);
  auto known = [&](const std::string& name) {
    return std::find(process_names.begin(), process_names.end(), name) != process_names.end();
  };
  for (const auto& stage : scheme.stages) {
    if (!known(stage.process)) {
      report.violations.push_back({Violation::Kind::unknown_process,
                                   "stage '" + stage.id + "' integrates unknown process " +
                                       stage.process});
    }
  }
  for (const auto& name : process_names) {
    if (!scheme.stage_for_process(name)) {
      report.violations.push_back(
          {Violation::Kind::process_missing, "process " + name + " never integrated"});
    }
  }
  return report;
}

ValidationReport validate_consistency(const SchemeSpec& scheme, const ProblemSpec& problem) {
  const auto names = problem.process_names();
  return validate_consistency(scheme, std::span<const std::string>(names));
}

IntegratorKind::Kind integrator_kind_from_string(std::string_view name) {
  if (name == "exact") return IntegratorKind::Kind::exact;
  if (name == "forward-euler") return IntegratorKind::Kind::forward_euler;
  if (name == "backward-euler") return IntegratorKind::Kind::backward_euler;
  throw std::invalid_argument("unknown integrator '" + std::string(name) + "'");
}

std::string_view to_string(IntegratorKind::Kind kind) {
  switch (kind) {
    case IntegratorKind::Kind::exact: return "exact";
    case IntegratorKind::Kind::forward_euler: return "forward-euler";
    case IntegratorKind::Kind::backward_euler: return "backward-euler";
  }
  return "?";
}

Vector backward_euler_increment(const ProcessModel& process, const Vector& q_in, double dt) {
  constexpr int kMaxIterations = 50;
  constexpr double kTolerance = 1e-12;
  const Eigen::Index n = q_in.size();
  if (dt == 0.0) return Vector::Zero(n);

  auto residual = [&](const Vector& d) -> Vector { return d - dt * process(q_in + d); };

  Vector d = Vector::Zero(n);
  Vector g = residual(d);
  for (int it = 0; it < kMaxIterations; ++it) {
    const Matrix jac = Matrix::Identity(n, n) - dt * process.jacobian_at(q_in + d);
    const Vector delta = jac.partialPivLu().solve(-g);
    if (!delta.allFinite()) break;

    // Halve the step until the residual decreases.
    double lambda = 1.0;
    Vector trial = d + delta;
    Vector g_trial = residual(trial);
    for (int k = 0; k < 20 && !(g_trial.norm() < g.norm()) && g.norm() > 0.0; ++k) {
      lambda *= 0.5;
      trial = d + lambda * delta;
      g_trial = residual(trial);
    }
    d = trial;
    g = g_trial;
    const double scale = 1.0 + (q_in + d).lpNorm<Eigen::Infinity>();
    if ((lambda * delta).lpNorm<Eigen::Infinity>() <= kTolerance * scale ||
        g.lpNorm<Eigen::Infinity>() <= kTolerance * scale) {
      return d;
    }
  }
  throw NewtonFailure("backward Euler Newton iteration did not converge for process '" +
                      process.name + "'");
}

StepResult step(const SchemeSpec& scheme, const ProblemSpec& problem, const Vector& q_n,
                double dt, const IntegratorKind& integrator) {
  problem.check_state(q_n);
  if (!(dt >= 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("step: dt must be finite and non-negative");
  }

  StepResult result;
  Vector total_increment = Vector::Zero(q_n.size());
  Vector total_rate = Vector::Zero(q_n.size());
  for (const auto& stage : scheme.stages) {
    const auto index = problem.index_of(stage.process);
    if (!index) {
      throw SchemeError("stage '" + stage.id + "' integrates unknown process " +
                        stage.process);
    }
    const ProcessModel& process = problem.process(*index);

    Vector input = q_n;
    for (const auto& term : stage.input) {
      const auto it = result.increments.find(term.stage);
      if (it == result.increments.end()) {
        throw SchemeError("internal error: stage '" + stage.id +
                          "' references unresolved stage '" + term.stage + "'");
      }
      if (term.coefficient == Rational{1}) {
        input += it->second;
      } else {
        input += to_double(term.coefficient) * it->second;
      }
    }

    Vector increment, rate;
    if (dt == 0.0) {
      increment = Vector::Zero(q_n.size());
    } else {
      switch (integrator.kind) {
        case IntegratorKind::Kind::exact:
          increment = process_increment(process, input, dt, integrator.tol);
          break;
        case IntegratorKind::Kind::forward_euler:
          rate = process(input);
          increment = dt * rate;
          break;
        case IntegratorKind::Kind::backward_euler:
          increment = backward_euler_increment(process, input, dt);
          break;
      }
    }

    // Explicit stages accumulate tendencies; dt is applied once at the end.
    const Vector& contribution = rate.size() ? rate : increment;
    Vector& total = rate.size() ? total_rate : total_increment;
    const Rational w = scheme.output_weight(stage.id);
    if (w == Rational{1}) {
      total += contribution;
    } else if (w != Rational{0}) {
      total += to_double(w) * contribution;
    }
    result.increments.emplace(stage.id, std::move(increment));
  }
  if (integrator.kind == IntegratorKind::Kind::forward_euler && dt != 0.0) {
    total_increment = dt * total_rate;
  }
  result.q_next = q_n + total_increment;
  return result;
}

}  // namespace splitlab
