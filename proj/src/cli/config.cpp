#include "splitlab/cli.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace splitlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw InputError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw InputError("unknown key '" + key + "' in " + where);
  }
}

double number(const json& obj, const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw InputError("'" + key + "' must be a number");
  return v.get<double>();
}

SchemeSource scheme_source(const json& node, const fs::path& base_dir) {
  SchemeSource src;
  if (node.is_string()) {
    src.builtin = node.get<std::string>();
  } else if (node.is_object()) {
    check_keys(node, {"builtin", "file", "dsl"}, "scheme");
    if (node.size() != 1) throw InputError("scheme needs exactly one of builtin, file, dsl");
    if (node.contains("builtin")) src.builtin = node.at("builtin").get<std::string>();
    if (node.contains("dsl")) src.dsl = node.at("dsl").get<std::string>();
    if (node.contains("file")) {
      src.file = node.at("file").get<std::string>();
      if (src.file.is_relative()) src.file = base_dir / src.file;
      if (!fs::exists(src.file)) throw InputError("scheme file not found: " + src.file.string());
    }
  } else {
    throw InputError("scheme must be a string or an object");
  }
  if (!src.builtin.empty()) {
    try {
      (void)builtin_kind_from_string(src.builtin);
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
  }
  return src;
}

ProblemConfig problem_config(const json& node) {
  ProblemConfig cfg;
  if (node.is_string()) {
    cfg.name = node.get<std::string>();
    return cfg;
  }
  check_keys(node, {"name", "params"}, "problem");
  if (!node.contains("name") || !node.at("name").is_string()) {
    throw InputError("problem needs a string 'name'");
  }
  cfg.name = node.at("name").get<std::string>();
  if (node.contains("params")) cfg.params = node.at("params");
  return cfg;
}

}  // namespace

RunConfig parse_config(const json& doc, const fs::path& base_dir) {
  try {
    check_keys(doc, {"problem", "problems", "scheme", "schemes", "sweep", "output"}, "config");
    RunConfig cfg;

    if (doc.contains("problem") == doc.contains("problems")) {
      throw InputError("config needs exactly one of 'problem' or 'problems'");
    }
    if (doc.contains("problem")) {
      cfg.problems.push_back(problem_config(doc.at("problem")));
    } else {
      if (!doc.at("problems").is_array() || doc.at("problems").empty()) {
        throw InputError("'problems' must be a non-empty array");
      }
      for (const auto& p : doc.at("problems")) cfg.problems.push_back(problem_config(p));
    }
    // Validate names and parameters up front.
    for (const auto& p : cfg.problems) (void)make_problem(p);

    if (doc.contains("scheme") && doc.contains("schemes")) {
      throw InputError("config may not contain both 'scheme' and 'schemes'");
    }
    if (doc.contains("scheme")) cfg.schemes.push_back(scheme_source(doc.at("scheme"), base_dir));
    if (doc.contains("schemes")) {
      if (!doc.at("schemes").is_array()) throw InputError("'schemes' must be an array");
      for (const auto& s : doc.at("schemes")) cfg.schemes.push_back(scheme_source(s, base_dir));
    }

    const json sweep = doc.value("sweep", json::object());
    check_keys(sweep, {"t_n", "dts", "tol_rel", "tol_abs", "integrator", "component"}, "sweep");
    cfg.t_n = number(sweep, "t_n", 0.0);
    if (!(cfg.t_n >= 0.0)) throw InputError("t_n must be non-negative");
    if (sweep.contains("dts")) {
      if (!sweep.at("dts").is_array()) throw InputError("'dts' must be an array");
      for (const auto& v : sweep.at("dts")) {
        if (!v.is_number()) throw InputError("'dts' entries must be numbers");
        cfg.dts.push_back(v.get<double>());
      }
    } else {
      cfg.dts = {0.04, 0.02, 0.01, 0.005};
    }
    if (cfg.dts.empty()) throw InputError("'dts' must not be empty");
    for (std::size_t k = 0; k < cfg.dts.size(); ++k) {
      if (!(cfg.dts[k] > 0.0) || (k > 0 && !(cfg.dts[k] < cfg.dts[k - 1]))) {
        throw InputError("'dts' must be positive and strictly decreasing");
      }
    }
    cfg.tol.rel = number(sweep, "tol_rel", cfg.tol.rel);
    cfg.tol.abs = number(sweep, "tol_abs", cfg.tol.abs);
    if (sweep.contains("integrator")) {
      cfg.integrator = integrator_kind_from_string(sweep.at("integrator").get<std::string>());
    }
    if (sweep.contains("component")) {
      if (!sweep.at("component").is_number_integer() || sweep.at("component").get<long>() < 0) {
        throw InputError("'component' must be a non-negative integer");
      }
      cfg.component = sweep.at("component").get<Eigen::Index>();
    }

    const json output = doc.value("output", json::object());
    check_keys(output, {"path", "format"}, "output");
    if (output.contains("path")) {
      cfg.output_path = output.at("path").get<std::string>();
      if (cfg.output_path.is_relative()) cfg.output_path = base_dir / cfg.output_path;
    }
    cfg.format = output.value("format", std::string("csv"));
    if (cfg.format != "csv" && cfg.format != "json") {
      throw InputError("output format must be csv or json");
    }
    return cfg;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

ProblemSpec make_problem(const ProblemConfig& config) {
  const json& p = config.params;
  try {
    if (config.name == "linear_pair") {
      check_keys(p, {"alpha", "beta", "initial"}, "linear_pair params");
      const double alpha = number(p, "alpha", -1.0);
      const double beta = number(p, "beta", -2.0);
      std::vector<ProcessModel> procs;
      procs.push_back({"A", [alpha](const Vector& q) -> Vector { return alpha * q; },
                       [alpha](const Vector& q) -> Matrix {
                         return alpha * Matrix::Identity(q.size(), q.size());
                       }});
      procs.push_back({"B", [beta](const Vector& q) -> Vector { return beta * q; },
                       [beta](const Vector& q) -> Matrix {
                         return beta * Matrix::Identity(q.size(), q.size());
                       }});
      return ProblemSpec(std::move(procs), Vector::Constant(1, number(p, "initial", 1.0)));
    }
    if (config.name == "constant_pair") {
      check_keys(p, {"a", "b", "initial"}, "constant_pair params");
      const double a = number(p, "a", 2.0);
      const double b = number(p, "b", -3.0);
      std::vector<ProcessModel> procs;
      procs.push_back({"A", [a](const Vector& q) { return Vector::Constant(q.size(), a); },
                       [](const Vector& q) { return Matrix::Zero(q.size(), q.size()); }});
      procs.push_back({"B", [b](const Vector& q) { return Vector::Constant(q.size(), b); },
                       [](const Vector& q) { return Matrix::Zero(q.size(), q.size()); }});
      return ProblemSpec(std::move(procs), Vector::Constant(1, number(p, "initial", 1.0)));
    }
    if (config.name == "dust_scalar") {
      check_keys(p, {"emission", "removal_rate", "mixing_rate", "background", "initial"},
                 "dust_scalar params");
      dust::ScalarParams sp;
      sp.emission = number(p, "emission", sp.emission);
      sp.removal_rate = number(p, "removal_rate", sp.removal_rate);
      sp.mixing_rate = number(p, "mixing_rate", sp.mixing_rate);
      sp.background = number(p, "background", sp.background);
      sp.initial = number(p, "initial", sp.initial);
      return dust::make_scalar_problem(sp);
    }
    if (config.name == "dust_column") {
      check_keys(p,
                 {"layers", "depth", "thickness", "emission_flux", "deposition_velocity",
                  "diffusivity", "surface_value", "scale_height", "initial"},
                 "dust_column params");
      dust::ColumnParams cp;
      if (p.contains("layers")) {
        if (!p.at("layers").is_number_integer()) throw InputError("'layers' must be an integer");
        cp.layers = p.at("layers").get<int>();
      }
      if (p.contains("depth") && p.contains("thickness")) {
        throw InputError("give either 'depth' or 'thickness', not both");
      }
      cp.thickness = number(p, "thickness", cp.thickness);
      if (p.contains("depth")) cp.thickness = number(p, "depth", 1.0) / cp.layers;
      cp.emission_flux = number(p, "emission_flux", cp.emission_flux);
      cp.deposition_velocity = number(p, "deposition_velocity", cp.deposition_velocity);
      cp.diffusivity = number(p, "diffusivity", cp.diffusivity);
      cp.surface_value = number(p, "surface_value", cp.surface_value);
      cp.scale_height = number(p, "scale_height", cp.scale_height);
      if (p.contains("initial")) {
        const auto values = p.at("initial").get<std::vector<double>>();
        cp.initial = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
      }
      return dust::make_column_problem(cp);
    }
  } catch (const json::exception& e) {
    throw InputError("problem '" + config.name + "': " + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError("problem '" + config.name + "': " + e.what());
  }
  throw InputError("unknown problem '" + config.name +
                   "' (expected linear_pair, constant_pair, dust_scalar, dust_column)");
}

SchemeSpec resolve_scheme(const SchemeSource& source, const std::vector<std::string>& processes) {
  try {
    if (!source.builtin.empty()) {
      return builtin_scheme(builtin_kind_from_string(source.builtin), processes);
    }
    std::string text = source.dsl;
    if (!source.file.empty()) {
      std::ifstream in(source.file);
      if (!in) throw InputError("cannot open scheme file " + source.file.string());
      std::ostringstream buf;
      buf << in.rdbuf();
      text = buf.str();
    }
    return parse_scheme(text);
  } catch (const ParseError& e) {
    const std::string where = source.file.empty() ? "<inline>" : source.file.string();
    throw InputError(where + ":" + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
}

}  // namespace splitlab::cli
