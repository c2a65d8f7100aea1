#ifndef SPLITLAB_CLI_HPP
#define SPLITLAB_CLI_HPP

#include "splitlab/dust.hpp"
#include "splitlab/error_analysis.hpp"
#include "splitlab/scheme.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace splitlab::cli {

enum ExitCode : int { kSuccess = 0, kRuntimeFailure = 1, kInputError = 2 };

/// Bad user input: config, scheme source, flags. Maps to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProblemConfig {
  std::string name;
  nlohmann::json params = nlohmann::json::object();
};

/// One of: a built-in scheme name, a DSL file, or inline DSL text.
struct SchemeSource {
  std::string builtin;
  std::filesystem::path file;
  std::string dsl;
};

struct RunConfig {
  std::vector<ProblemConfig> problems;
  std::vector<SchemeSource> schemes;
  double t_n = 0.0;
  std::vector<double> dts;
  Tolerances tol{};
  IntegratorKind::Kind integrator = IntegratorKind::Kind::exact;
  std::optional<Eigen::Index> component;
  std::filesystem::path output_path;
  std::string format = "csv";
};

/// Validates and converts a config document. Relative scheme paths resolve
/// against `base_dir`.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Built-in problems: linear_pair, constant_pair, dust_scalar, dust_column.
ProblemSpec make_problem(const ProblemConfig& config);

SchemeSpec resolve_scheme(const SchemeSource& source, const std::vector<std::string>& processes);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double value);

struct CsvRow {
  std::string scheme;
  std::string process;
  double dt = 0.0;
  double measured = 0.0;
  double predicted_leading = 0.0;
  double residual = 0.0;
  bool below_noise_floor = false;
};

inline constexpr std::string_view kSweepCsvHeader =
    "scheme,process,dt,measured,predicted_leading,residual,below_noise_floor";

/// One row per (stage, dt) plus TOTAL rows, sorted by scheme, process, and
/// descending dt.
std::vector<CsvRow> sweep_rows(const LteReport& report, const ErrorNorm& norm);
std::string write_sweep_csv(const std::vector<CsvRow>& rows);
std::vector<CsvRow> read_sweep_csv(std::string_view text);

nlohmann::json report_to_json(const LteReport& report, const ErrorNorm& norm);

inline constexpr std::string_view kCompareCsvHeader =
    "problem,component,dt,lte_original,lte_revised,predicted_original,predicted_revised,"
    "original_negative,revised_not_larger,ratio,abs_a_minus_c,abs_minus_a_minus_c";

std::string write_compare_csv(const std::vector<std::pair<std::string, dust::ComparisonReport>>& blocks);

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace splitlab::cli

#endif  // SPLITLAB_CLI_HPP
