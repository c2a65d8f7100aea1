#ifndef SPLITLAB_SCHEME_HPP
#define SPLITLAB_SCHEME_HPP

#include "splitlab/ode.hpp"
#include "splitlab/rational.hpp"

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace splitlab {

/// `coefficient * increment(stage)` inside a stage's input expression.
struct InputTerm {
  std::string stage;
  Rational coefficient{1};

  friend bool operator==(const InputTerm&, const InputTerm&) = default;
};

/// One isolated integration of a single process. Its input state is
/// q^n plus a rational combination of increments of earlier stages.
struct Stage {
  std::string id;
  std::string process;
  std::vector<InputTerm> input;

  /// Total coefficient applied to `stage_id` (terms may repeat).
  Rational coefficient_of(const std::string& stage_id) const;

  friend bool operator==(const Stage&, const Stage&) = default;
};

/// A coupling scheme: ordered stages plus the weights with which the stage
/// increments are added to q^n to form q^{n+1}.
struct SchemeSpec {
  std::string name;
  std::vector<Stage> stages;
  /// Missing entries mean weight 1 unless `explicit_output` is set, in which
  /// case they mean weight 0.
  std::map<std::string, Rational> output_weights;
  bool explicit_output = false;

  Rational output_weight(const std::string& stage_id) const;
  const Stage* find_stage(const std::string& stage_id) const;
  const Stage* stage_for_process(const std::string& process) const;

  friend bool operator==(const SchemeSpec&, const SchemeSpec&) = default;
};

/// Structural error in a scheme (forward reference, duplicate id, ...).
class SchemeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// DSL syntax error with a 1-based source position.
class ParseError : public SchemeError {
 public:
  ParseError(const std::string& message, int line, int column);

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

/// Parses the scheme DSL:
///
///   # comment
///   scheme <ident> {
///     stage <ident> : <ident> from base { + <rational> * <ident> }
///     [output : base { + [<rational> *] <ident> }]
///   }
///
/// with rational := integer | integer "/" positive-integer.
SchemeSpec parse_scheme(std::string_view text);

/// Inverse of parse_scheme (canonical layout, explicit coefficients).
std::string format_scheme(const SchemeSpec& scheme);

enum class BuiltinKind { parallel, sequential, eam_original, eam_revised };

BuiltinKind builtin_kind_from_string(std::string_view name);
std::string_view to_string(BuiltinKind kind);

/// Stage ids are the lower-cased process names.
SchemeSpec builtin_scheme(BuiltinKind kind, const std::vector<std::string>& process_names);

struct Violation {
  enum class Kind {
    unknown_process,
    process_missing,
    process_duplicated,
    output_weight,
    unused_stage,
    bad_reference,
  };
  Kind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  std::string summary() const;
};

ValidationReport validate_consistency(const SchemeSpec& scheme,
                                      std::span<const std::string> process_names);
ValidationReport validate_consistency(const SchemeSpec& scheme, const ProblemSpec& problem);

/// Structure-only checks that need no problem: duplicated processes,
/// output weights, unused stages, dangling references.
ValidationReport validate_structure(const SchemeSpec& scheme);

/// How each stage integrates its process over dt.
struct IntegratorKind {
  enum class Kind { exact, forward_euler, backward_euler };
  Kind kind = Kind::exact;
  Tolerances tol{};

  static IntegratorKind exact(Tolerances t = {}) { return {Kind::exact, t}; }
  static IntegratorKind forward_euler() { return {Kind::forward_euler, {}}; }
  static IntegratorKind backward_euler() { return {Kind::backward_euler, {}}; }
};

IntegratorKind::Kind integrator_kind_from_string(std::string_view name);
std::string_view to_string(IntegratorKind::Kind kind);

/// Thrown when the backward-Euler Newton iteration does not converge.
class NewtonFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Backward-Euler update of one process: solves y = q_in + dt X(y) with
/// damped Newton and returns y - q_in.
Vector backward_euler_increment(const ProcessModel& process, const Vector& q_in, double dt);

struct StepResult {
  Vector q_next;
  /// Stage id -> increment (stage result minus stage input).
  std::map<std::string, Vector> increments;
};

/// Executes one coupled step of `scheme` from q_n. The scheme must pass
/// validate_consistency against `problem`.
StepResult step(const SchemeSpec& scheme, const ProblemSpec& problem, const Vector& q_n,
                double dt, const IntegratorKind& integrator = IntegratorKind::exact());

}  // namespace splitlab

#endif  // SPLITLAB_SCHEME_HPP
