#include "splitlab/cli.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <sstream>
#include <tuple>

namespace splitlab::cli {

using nlohmann::json;

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf.data(), ptr);
}

namespace {

double parse_double(std::string_view s, std::size_t line) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw InputError("csv line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::vector<CsvRow> sweep_rows(const LteReport& report, const ErrorNorm& norm) {
  std::vector<CsvRow> rows;
  for (std::size_t k = 0; k < report.samples.size(); ++k) {
    const LteSample& s = report.samples[k];
    const Vector residual = s.measured_total - s.predicted_total;
    rows.push_back({report.scheme_name, "TOTAL", s.dt, norm.signed_value(s.measured_total),
                    norm.signed_value(s.predicted_total), norm.signed_value(residual),
                    report.total.below_noise_floor[k]});
    for (const auto& id : report.stage_ids) {
      const Vector& measured = s.measured_per_stage.at(id);
      const Vector& predicted = s.predicted_per_stage.at(id);
      rows.push_back({report.scheme_name, report.stage_process.at(id), s.dt,
                      norm.signed_value(measured), norm.signed_value(predicted),
                      norm.signed_value(Vector(measured - predicted)),
                      report.per_stage.at(id).below_noise_floor[k]});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const CsvRow& a, const CsvRow& b) {
    return std::tie(a.scheme, a.process, b.dt) < std::tie(b.scheme, b.process, a.dt);
  });
  return rows;
}

std::string write_sweep_csv(const std::vector<CsvRow>& rows) {
  std::ostringstream out;
  out << kSweepCsvHeader << "\n";
  for (const auto& r : rows) {
    out << r.scheme << ',' << r.process << ',' << format_double(r.dt) << ','
        << format_double(r.measured) << ',' << format_double(r.predicted_leading) << ','
        << format_double(r.residual) << ',' << (r.below_noise_floor ? "true" : "false") << "\n";
  }
  return out.str();
}

std::vector<CsvRow> read_sweep_csv(std::string_view text) {
  std::vector<CsvRow> rows;
  std::size_t line_no = 0;
  bool header_seen = false;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kSweepCsvHeader) throw InputError("csv: unexpected header");
      header_seen = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 7) throw InputError("csv line " + std::to_string(line_no) + ": expected 7 fields");
    if (f[6] != "true" && f[6] != "false") {
      throw InputError("csv line " + std::to_string(line_no) + ": bad below_noise_floor");
    }
    rows.push_back({std::string(f[0]), std::string(f[1]), parse_double(f[2], line_no),
                    parse_double(f[3], line_no), parse_double(f[4], line_no),
                    parse_double(f[5], line_no), f[6] == "true"});
  }
  if (!header_seen) throw InputError("csv: missing header");
  return rows;
}

namespace {

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json series_json(const SeriesFit& s) {
  json out;
  out["values"] = s.values;
  out["below_noise_floor"] = s.below_noise_floor;
  if (s.fit) {
    out["fit"] = {{"slope", s.fit->slope},
                  {"intercept", s.fit->intercept},
                  {"r_squared", s.fit->r_squared},
                  {"dts", s.fit->dts},
                  {"errors", s.fit->errors}};
  } else {
    out["fit"] = nullptr;
  }
  return out;
}

}  // namespace

json report_to_json(const LteReport& report, const ErrorNorm& norm) {
  json out;
  out["scheme"] = report.scheme_name;
  out["t_n"] = report.t_n;
  out["tol_rel"] = report.tol.rel;
  out["tol_abs"] = report.tol.abs;
  out["noise_floor"] = report.noise_floor;
  out["extrapolated_rule"] = report.extrapolated_rule;
  out["component"] = norm.component ? json(*norm.component) : json(nullptr);
  out["stages"] = json::array();
  for (const auto& id : report.stage_ids) {
    out["stages"].push_back({{"id", id}, {"process", report.stage_process.at(id)}});
  }
  out["samples"] = json::array();
  for (const auto& s : report.samples) {
    json sample{{"dt", s.dt},
                {"measured_total", vector_json(s.measured_total)},
                {"predicted_total", vector_json(s.predicted_total)}};
    for (const auto& id : report.stage_ids) {
      sample["measured_per_stage"][id] = vector_json(s.measured_per_stage.at(id));
      sample["predicted_per_stage"][id] = vector_json(s.predicted_per_stage.at(id));
    }
    out["samples"].push_back(std::move(sample));
  }
  out["fits"]["total"] = series_json(report.total);
  out["fits"]["residual"] = series_json(report.residual);
  for (const auto& id : report.stage_ids) {
    out["fits"]["stages"][id] = series_json(report.per_stage.at(id));
    out["fits"]["stage_residuals"][id] = series_json(report.per_stage_residual.at(id));
  }
  out["notes"] = report.notes;
  return out;
}

std::string write_compare_csv(
    const std::vector<std::pair<std::string, dust::ComparisonReport>>& blocks) {
  std::ostringstream out;
  out << kCompareCsvHeader << "\n";
  for (const auto& [label, report] : blocks) {
    for (const auto& row : report.rows) {
      out << label << ',' << report.component << ',' << format_double(row.dt) << ','
          << format_double(row.lte_original) << ',' << format_double(row.lte_revised) << ','
          << format_double(row.predicted_original) << ','
          << format_double(row.predicted_revised) << ','
          << (row.original_negative ? "true" : "false") << ','
          << (row.revised_not_larger ? "true" : "false") << ',' << format_double(row.ratio)
          << ',' << format_double(report.abs_a_minus_c) << ','
          << format_double(report.abs_minus_a_minus_c) << "\n";
    }
  }
  return out.str();
}

}  // namespace splitlab::cli
