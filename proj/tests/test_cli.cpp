#include "splitlab/cli.hpp"

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;
using namespace splitlab;
using namespace splitlab::cli;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("splitlab_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& content) const {
    std::ofstream(path / name) << content;
    return path / name;
  }
};

struct Run {
  int code;
  std::string out, err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "splitlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Runs the installed executable; returns its exit status.
int run_exe(const std::string& args) {
  const std::string cmd = std::string("\"") + SPLITLAB_EXE + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> summary_slopes(const std::string& text, const std::string& label) {
  std::vector<double> slopes;
  const std::regex re("(^|\n)" + label + " slope=([^ ]+)");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator();
       ++it) {
    slopes.push_back(std::stod((*it)[2]));
  }
  return slopes;
}

}  // namespace

TEST_CASE("predict prints coefficient tables") {
  SUBCASE("eam_original") {
    const Run r = run_cli({"predict", "eam_original"});
    CHECK(r.code == kSuccess);
    CHECK(r.out.find("lte_B = (dt^2/2) * dB/dq * (+A -C)") != std::string::npos);
  }
  SUBCASE("eam_revised") {
    const Run r = run_cli({"predict", "eam_revised"});
    CHECK(r.code == kSuccess);
    CHECK(r.out.find("lte_B = (dt^2/2) * dB/dq * (-A -C)") != std::string::npos);
  }
  SUBCASE("scheme file") {
    TempDir dir;
    const auto file = dir.write("half.scheme",
                                "scheme half {\n"
                                "  stage a: A from base\n"
                                "  stage b: B from base + 1*a\n"
                                "  stage c: C from base + 1/2*a + 1/2*b\n"
                                "}\n");
    const Run r = run_cli({"predict", file.string()});
    CHECK(r.code == kSuccess);
    CHECK(r.out.find("lte_C = (dt^2/2) * dC/dq * (0)") != std::string::npos);
    CHECK(r.out.find("extrapolated") != std::string::npos);
  }
  SUBCASE("inconsistent scheme") {
    TempDir dir;
    const auto file = dir.write("ab.scheme", "scheme ab {\nstage a: A from base\nstage b: B from base\n}\n");
    const Run r = run_cli({"predict", file.string(), "--processes", "A,B,C"});
    CHECK(r.code == kInputError);
    CHECK(r.err.find("process C never integrated") != std::string::npos);
  }
  SUBCASE("parse error reports the position") {
    TempDir dir;
    const auto file = dir.write("bad.scheme", "scheme s {\nstage a: A from base + 1*b\nstage b: B from base\n}\n");
    const Run r = run_cli({"predict", file.string()});
    CHECK(r.code == kInputError);
    CHECK(r.err.find("2:") != std::string::npos);
    CHECK(r.err.find("forward reference") != std::string::npos);
  }
}

TEST_CASE("sweep writes the CSV report") {
  TempDir dir;
  SUBCASE("parallel linear pair") {
    const auto cfg = dir.write(
        "par.json",
        R"({"problem": {"name": "linear_pair", "params": {"alpha": -1, "beta": -2}},
            "scheme": "parallel", "output": {"path": "par.csv"}})");
    const Run r = run_cli({"sweep", "--config", cfg.string()});
    REQUIRE(r.code == kSuccess);
    const std::string csv = slurp(dir.path / "par.csv");
    CHECK(csv.substr(0, csv.find('\n')) == kSweepCsvHeader);
    const auto rows = read_sweep_csv(csv);
    int total_rows = 0;
    for (const auto& row : rows) {
      if (row.process == "TOTAL") ++total_rows;
    }
    CHECK(total_rows == 4);
    const auto slopes = summary_slopes(r.out, "TOTAL");
    REQUIRE(slopes.size() == 1);
    CHECK(std::abs(slopes[0] - 2.0) < 0.05);
  }
  SUBCASE("sequential commuting pair is flagged") {
    const auto cfg = dir.write("seq.json", R"({"problem": "linear_pair", "scheme": "sequential"})");
    const Run r = run_cli({"sweep", "--config", cfg.string()});
    REQUIRE(r.code == kSuccess);
    for (const auto& row : read_sweep_csv(r.out)) {
      if (row.process == "TOTAL") CHECK(row.below_noise_floor);
    }
    CHECK(r.err.find("below noise floor") != std::string::npos);
  }
  SUBCASE("dust per-stage rows") {
    const auto cfg = dir.write("dust.json", R"({"problem": "dust_scalar", "scheme": "eam_original"})");
    const Run r = run_cli({"sweep", "--config", cfg.string()});
    REQUIRE(r.code == kSuccess);
    std::map<std::string, int> count;
    for (const auto& row : read_sweep_csv(r.out)) {
      ++count[row.process];
      CHECK(std::isfinite(row.measured));
    }
    CHECK(count["A"] == 4);
    CHECK(count["B"] == 4);
    CHECK(count["C"] == 4);
    CHECK(count["TOTAL"] == 4);
  }
  SUBCASE("json format") {
    const auto cfg = dir.write(
        "j.json", R"({"problem": "dust_scalar", "scheme": "eam_revised", "output": {"format": "json"}})");
    const Run r = run_cli({"sweep", "--config", cfg.string()});
    REQUIRE(r.code == kSuccess);
    const auto doc = nlohmann::json::parse(r.out);
    REQUIRE(doc.is_array());
    CHECK(doc[0].at("scheme") == "eam_revised");
  }
}

TEST_CASE("sweep output round-trips to identical slopes") {
  TempDir dir;
  const auto cfg = dir.write(
      "rt.json",
      R"({"problem": "dust_scalar", "schemes": ["parallel", "sequential", "eam_original", "eam_revised"],
          "output": {"path": "rt.csv"}})");
  const Run r = run_cli({"sweep", "--config", cfg.string()});
  REQUIRE(r.code == kSuccess);
  const auto rows = read_sweep_csv(slurp(dir.path / "rt.csv"));
  const auto summary = summary_slopes(r.out, "TOTAL");
  REQUIRE(summary.size() == 4);

  // Summary order follows the config; CSV rows are sorted by scheme name.
  const std::vector<std::string> order{"parallel", "sequential", "eam_original", "eam_revised"};
  for (std::size_t s = 0; s < order.size(); ++s) {
    std::vector<double> dts, errs;
    for (const auto& row : rows) {
      if (row.scheme != order[s] || row.process != "TOTAL" || row.below_noise_floor) continue;
      dts.push_back(row.dt);
      errs.push_back(std::abs(row.measured));
    }
    const auto fit = fit_order(dts, errs);
    CHECK(std::abs(fit.slope - summary[s]) <= 1e-12);
  }
}

TEST_CASE("compare prints the sign and ratio summary") {
  TempDir dir;
  SUBCASE("default dust scalar") {
    const auto cfg = dir.write("c.json", R"({"problem": "dust_scalar", "sweep": {"dts": [0.01]}})");
    const Run r = run_cli({"compare", "--config", cfg.string()});
    REQUIRE(r.code == kSuccess);
    CHECK(r.err.find("lte_B sign: negative (original); |Rev|/|Ori| = 0.60") != std::string::npos);
    CHECK(r.out.substr(0, r.out.find('\n')) == kCompareCsvHeader);
  }
  SUBCASE("vanishing mixing") {
    const auto cfg = dir.write(
        "k.json",
        R"({"problem": {"name": "dust_scalar", "params": {"mixing_rate": 1e-9}}, "sweep": {"dts": [0.01]},
            "output": {"path": "k.csv"}})");
    const Run r = run_cli({"compare", "--config", cfg.string()});
    REQUIRE(r.code == kSuccess);
    CHECK(r.out.find("|Rev|/|Ori| = 1.00") != std::string::npos);
    CHECK(fs::exists(dir.path / "k.csv"));
  }
  SUBCASE("two columns give two blocks") {
    const auto cfg = dir.write(
        "col.json",
        R"({"problems": [{"name": "dust_column", "params": {"layers": 10, "depth": 1}},
                         {"name": "dust_column", "params": {"layers": 40, "depth": 1}}],
            "sweep": {"dts": [0.01]}})");
    const Run r = run_cli({"compare", "--config", cfg.string()});
    REQUIRE(r.code == kSuccess);
    CHECK(r.err.find("[dust_column_n10]") != std::string::npos);
    CHECK(r.err.find("[dust_column_n40]") != std::string::npos);
    std::istringstream csv(r.out);
    std::string line;
    int lines = 0;
    while (std::getline(csv, line)) ++lines;
    CHECK(lines == 3);
  }
}

TEST_CASE("executable exit codes") {
  TempDir dir;
  CHECK(run_exe("predict eam_original") == 0);
  CHECK(run_exe("--help") == 0);
  CHECK(run_exe("frobnicate") == 2);
  CHECK(run_exe("sweep --config \"" + (dir.path / "missing.json").string() + "\"") == 2);

  const auto bad_json = dir.write("bad.json", "{ not json");
  CHECK(run_exe("sweep --config \"" + bad_json.string() + "\"") == 2);

  const auto unknown = dir.write("u.json", R"({"problem": "dust_scalar", "scheme": "strang"})");
  CHECK(run_exe("sweep --config \"" + unknown.string() + "\"") == 2);

  const auto incomplete = dir.write(
      "i.json", R"({"problem": "dust_scalar", "scheme": {"dsl": "scheme ab {\nstage a: A from base\nstage b: B from base\n}\n"}})");
  CHECK(run_exe("sweep --config \"" + incomplete.string() + "\"") == 2);

  const auto ok = dir.write("ok.json", R"({"problem": "linear_pair", "scheme": "parallel"})");
  CHECK(run_exe("sweep --config \"" + ok.string() + "\" --integrator forward-euler") == 0);
  CHECK(run_exe("sweep --config \"" + ok.string() + "\" --integrator leapfrog") == 2);
  CHECK(run_exe("sweep --config \"" + ok.string() + "\" --tol-rel 1e-20") == 2);
}

TEST_CASE("solver failure exits 1 and names the dt") {
  TempDir dir;
  const auto cfg = dir.write("f.json", R"({"problem": "dust_scalar", "scheme": "eam_original",
                                           "sweep": {"dts": [1e9]}})");
  const Run r = run_cli({"sweep", "--config", cfg.string()});
  CHECK(r.code == kRuntimeFailure);
  CHECK(r.err.find("dt=1e+09") != std::string::npos);
}

TEST_CASE("CSV helpers") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-1.25e-4) == "-0.000125");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  const std::vector<CsvRow> rows{{"s", "TOTAL", 0.01, -1.97e-4, -2e-4, 3e-6, false},
                                 {"s", "a", 0.01, 1.0 / 3.0, 0.0, 1e-300, true}};
  const auto back = read_sweep_csv(write_sweep_csv(rows));
  REQUIRE(back.size() == 2);
  CHECK(back[1].measured == 1.0 / 3.0);
  CHECK(back[1].residual == 1e-300);
  CHECK(back[1].below_noise_floor);
  CHECK_THROWS(read_sweep_csv("wrong,header\n"));
}
