#include "splitlab/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace splitlab::cli {

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::optional<double> tol_rel;
  std::optional<double> tol_abs;
  std::string integrator;
  std::string out;
  std::string format;
};

void apply(const Overrides& o, RunConfig& cfg) {
  if (o.tol_rel) cfg.tol.rel = *o.tol_rel;
  if (o.tol_abs) cfg.tol.abs = *o.tol_abs;
  if (!o.integrator.empty()) cfg.integrator = integrator_kind_from_string(o.integrator);
  if (!o.out.empty()) cfg.output_path = o.out;
  if (!o.format.empty()) cfg.format = o.format;
  if (!(cfg.tol.rel > 0.0) || !(cfg.tol.abs >= 0.0)) {
    throw InputError("tolerances must be positive");
  }
}

std::vector<std::string> split_names(const std::string& list) {
  std::vector<std::string> names;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw InputError("empty process name in --processes");
    names.push_back(item);
  }
  return names;
}

std::string problem_label(const ProblemConfig& p) {
  std::string label = p.name;
  if (p.name == "dust_column") {
    label += "_n" + std::to_string(p.params.value("layers", dust::ColumnParams{}.layers));
  }
  return label;
}

void emit(const RunConfig& cfg, const std::string& content, std::ostream& out) {
  if (cfg.output_path.empty()) {
    out << content;
    return;
  }
  std::ofstream file(cfg.output_path);
  if (!file) throw InputError("cannot write " + cfg.output_path.string());
  file << content;
}

std::string describe_series(const std::string& label, const SeriesFit& series) {
  std::ostringstream line;
  const auto kept = std::count(series.below_noise_floor.begin(), series.below_noise_floor.end(), false);
  line << label << ' ';
  if (series.fit) {
    line << "slope=" << format_double(series.fit->slope)
         << " r_squared=" << format_double(series.fit->r_squared);
  } else {
    line << "below noise floor, not fitted";
  }
  line << " samples=" << kept << '/' << series.values.size() << '\n';
  return line.str();
}

int cmd_predict(const std::string& source, const std::string& process_list, std::ostream& out) {
  SchemeSpec scheme;
  std::vector<std::string> processes;
  if (!process_list.empty()) processes = split_names(process_list);

  if (fs::exists(source)) {
    scheme = resolve_scheme(SchemeSource{{}, source, {}}, processes);
  } else {
    BuiltinKind kind;
    try {
      kind = builtin_kind_from_string(source);
    } catch (const std::invalid_argument&) {
      throw InputError("'" + source + "' is neither a scheme file nor a built-in scheme");
    }
    if (processes.empty()) {
      const bool eam = kind == BuiltinKind::eam_original || kind == BuiltinKind::eam_revised;
      processes = eam ? std::vector<std::string>{"A", "B", "C"}
                      : std::vector<std::string>{"A", "B"};
    }
    scheme = resolve_scheme(SchemeSource{source, {}, {}}, processes);
  }

  const ValidationReport report =
      processes.empty() ? validate_structure(scheme)
                        : validate_consistency(scheme, std::span<const std::string>(processes));
  if (!report.ok()) throw InputError(report.summary());

  const CoefficientMatrix s = predict_leading_coefficients(scheme);
  out << "scheme " << scheme.name << "\n" << s.to_table();
  for (const auto& consumer : s.processes) {
    out << "lte_" << consumer << " = (dt^2/2) * d" << consumer << "/dq * (";
    bool first = true;
    for (const auto& source_name : s.processes) {
      if (source_name == consumer) continue;
      const Rational c = s.at(consumer, source_name);
      if (c == Rational{0}) continue;
      out << (first ? "" : " ");
      if (c == Rational{1}) {
        out << '+' << source_name;
      } else if (c == Rational{-1}) {
        out << '-' << source_name;
      } else {
        out << to_signed_string(c) << '*' << source_name;
      }
      first = false;
    }
    out << (first ? "0" : "") << ")\n";
  }
  if (s.extrapolated) out << "note: extrapolated rule (input coefficients outside {0,1})\n";
  return kSuccess;
}

int cmd_sweep(RunConfig cfg, std::ostream& out, std::ostream& err) {
  if (cfg.problems.size() != 1) throw InputError("sweep takes exactly one problem");
  if (cfg.schemes.empty()) throw InputError("sweep needs a 'scheme'");
  const ProblemSpec problem = make_problem(cfg.problems.front());
  const ErrorNorm norm{cfg.component};
  if (cfg.component && static_cast<std::size_t>(*cfg.component) >= problem.dim()) {
    throw InputError("'component' is out of range for this problem");
  }

  std::ostream& summary = cfg.output_path.empty() ? err : out;
  std::vector<CsvRow> rows;
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& source : cfg.schemes) {
    const SchemeSpec scheme = resolve_scheme(source, problem.process_names());
    const auto consistency = validate_consistency(scheme, problem);
    if (!consistency.ok()) throw InputError(consistency.summary());

    SweepOptions options;
    options.norm = norm;
    options.integrator = cfg.integrator;
    const LteReport report = lte_sweep(scheme, problem, cfg.t_n, cfg.dts, cfg.tol, options);

    summary << "scheme " << report.scheme_name << " on " << cfg.problems.front().name
            << " (t_n=" << format_double(cfg.t_n)
            << ", integrator=" << to_string(cfg.integrator) << ")\n";
    summary << describe_series("TOTAL", report.total);
    summary << describe_series("TOTAL residual", report.residual);
    for (const auto& id : report.stage_ids) {
      summary << describe_series(report.stage_process.at(id), report.per_stage.at(id));
    }
    for (const auto& note : report.notes) summary << "note: " << note << '\n';

    auto these = sweep_rows(report, norm);
    rows.insert(rows.end(), these.begin(), these.end());
    reports.push_back(report_to_json(report, norm));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const CsvRow& a, const CsvRow& b) {
    return std::tie(a.scheme, a.process, b.dt) < std::tie(b.scheme, b.process, a.dt);
  });

  emit(cfg, cfg.format == "json" ? reports.dump(2) + "\n" : write_sweep_csv(rows), out);
  return kSuccess;
}

int cmd_compare(RunConfig cfg, std::ostream& out, std::ostream& err) {
  if (!cfg.schemes.empty() && cfg.schemes.size() != 2) {
    throw InputError("compare takes exactly two schemes (original, revised)");
  }
  std::ostream& summary = cfg.output_path.empty() ? err : out;

  std::vector<std::pair<std::string, dust::ComparisonReport>> blocks;
  std::map<std::string, int> seen;
  for (const auto& pc : cfg.problems) {
    const ProblemSpec problem = make_problem(pc);
    if (problem.process_count() != 3) {
      throw InputError("compare needs a three-process problem, got '" + pc.name + "'");
    }
    const auto names = problem.process_names();
    const SchemeSpec original = cfg.schemes.empty()
                                    ? builtin_scheme(BuiltinKind::eam_original, names)
                                    : resolve_scheme(cfg.schemes[0], names);
    const SchemeSpec revised = cfg.schemes.empty()
                                   ? builtin_scheme(BuiltinKind::eam_revised, names)
                                   : resolve_scheme(cfg.schemes[1], names);
    for (const auto* s : {&original, &revised}) {
      const auto report = validate_consistency(*s, problem);
      if (!report.ok()) throw InputError(report.summary());
    }
    const Eigen::Index component = cfg.component.value_or(0);
    if (static_cast<std::size_t>(component) >= problem.dim()) {
      throw InputError("'component' is out of range for problem '" + pc.name + "'");
    }

    std::string label = problem_label(pc);
    if (seen[label]++ > 0) label += "_" + std::to_string(seen[label] - 1);
    auto report = dust::compare_schemes_report(problem, cfg.t_n, cfg.dts, cfg.tol, original,
                                               revised, component);
    summary << "[" << label << "] " << report.original_scheme << " vs " << report.revised_scheme
            << ", component " << component << ": |A-C|=" << format_double(report.abs_a_minus_c)
            << " |-A-C|=" << format_double(report.abs_minus_a_minus_c) << '\n';
    for (std::size_t k = 0; k < report.rows.size(); ++k) {
      summary << "[" << label << "] dt=" << format_double(report.rows[k].dt) << ": "
              << report.summary_line(k) << '\n';
    }
    blocks.emplace_back(label, std::move(report));
  }

  if (cfg.format == "json") {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& [label, r] : blocks) {
      nlohmann::json block{{"problem", label},
                           {"original", r.original_scheme},
                           {"revised", r.revised_scheme},
                           {"component", r.component},
                           {"t_n", r.t_n},
                           {"A", r.emission},
                           {"B", r.removal},
                           {"C", r.mixing},
                           {"dB_dq", r.removal_slope},
                           {"abs_a_minus_c", r.abs_a_minus_c},
                           {"abs_minus_a_minus_c", r.abs_minus_a_minus_c},
                           {"noise_floor", r.noise_floor},
                           {"rows", nlohmann::json::array()}};
      for (const auto& row : r.rows) {
        block["rows"].push_back({{"dt", row.dt},
                                 {"lte_original", row.lte_original},
                                 {"lte_revised", row.lte_revised},
                                 {"predicted_original", row.predicted_original},
                                 {"predicted_revised", row.predicted_revised},
                                 {"original_negative", row.original_negative},
                                 {"revised_not_larger", row.revised_not_larger},
                                 {"ratio", row.ratio},
                                 {"below_noise_floor", row.below_noise_floor}});
      }
      doc.push_back(std::move(block));
    }
    emit(cfg, doc.dump(2) + "\n", out);
  } else {
    emit(cfg, write_compare_csv(blocks), out);
  }
  return kSuccess;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"splitlab: operator-splitting error laboratory"};
  app.require_subcommand(1);

  Overrides overrides;
  std::string config_path;
  std::string predict_source;
  std::string predict_processes;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--tol-rel", overrides.tol_rel, "oracle relative tolerance");
    sub->add_option("--tol-abs", overrides.tol_abs, "oracle absolute tolerance");
    sub->add_option("--integrator", overrides.integrator, "per-process integrator")
        ->check(CLI::IsMember({"exact", "forward-euler", "backward-euler"}));
    sub->add_option("--out", overrides.out, "output path (default: standard output)");
    sub->add_option("--format", overrides.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));
  };

  CLI::App* predict = app.add_subcommand("predict", "print leading-order coefficient table");
  predict->add_option("scheme", predict_source, "scheme DSL file or built-in name")->required();
  predict->add_option("--processes", predict_processes,
                      "comma-separated process names to check the scheme against");

  CLI::App* sweep = app.add_subcommand("sweep", "measure lte over a list of time steps");
  add_common(sweep);
  CLI::App* compare = app.add_subcommand("compare", "compare original and revised couplings");
  add_common(compare);

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  try {
    if (predict->parsed()) return cmd_predict(predict_source, predict_processes, out);
    RunConfig cfg = load_config(config_path);
    apply(overrides, cfg);
    if (sweep->parsed()) return cmd_sweep(std::move(cfg), out, err);
    return cmd_compare(std::move(cfg), out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const SchemeError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const SolverFailure& e) {
    err << "solver failure: " << e.what() << '\n';
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

}  // namespace splitlab::cli
