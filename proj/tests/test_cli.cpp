#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kGolden = 0.61803398874989484820;

std::string cli_bin() {
  const char* bin = std::getenv("INVCIRC_BIN");
  REQUIRE(bin != nullptr);
  return bin;
}

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  std::string cmd = cli_bin() + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  int status = pclose(pipe);
  REQUIRE(WIFEXITED(status));
  r.code = WEXITSTATUS(status);
  return r;
}

// scratch directory per test, wiped on entry so reruns start clean
fs::path fresh_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / "invcirc_cli_tests" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// data rows of a stamped CSV: skips the # comment line and the header
std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  std::string line;
  REQUIRE(std::getline(f, line));
  REQUIRE(line.rfind("# invcirc ", 0) == 0);
  REQUIRE(line.find("config_hash=") != std::string::npos);
  REQUIRE(std::getline(f, line));  // header
  std::vector<std::vector<std::string>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    fields.push_back(cur);
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace

TEST_CASE("selftest passes and reports every check", "[cli]") {
  RunResult r = run_cli("selftest");
  CHECK(r.code == 0);
  CHECK(r.out.find("selftest: 7/7 passed") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("fixedpoints reports multipliers and the bifurcation phase", "[cli]") {
  fs::path dir = fresh_dir("fixedpoints");
  RunResult r = run_cli("--out " + dir.string() + " fixedpoints --m1 0 --m2 0");
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["command"] == "fixedpoints");
  CHECK(j["B"] == 0.5);
  REQUIRE(j["fixed_points"].size() == 2);

  // the origin's multipliers are the cube roots of B, all with modulus B^(1/3)
  const json& origin = j["fixed_points"][1];
  CHECK(origin["t"] == 0.0);
  CHECK(origin["stable"] == true);
  for (const json& m : origin["multipliers"])
    CHECK(std::fabs(m["modulus"].get<double>() - std::cbrt(0.5)) < 1e-12);
  const json& other = j["fixed_points"][0];
  CHECK(other["t"] == -0.5);
  CHECK(other["stable"] == false);

  // |(M2+1)/(2B)| = 1 exactly at M2 = 0: no complex pair, field absent, still exit 0
  CHECK(j["ns_phase_defined"] == false);
  CHECK(j["ns_phase"].is_null());

  // stable schema: identical invocation, identical bytes
  RunResult r2 = run_cli("--out " + dir.string() + " fixedpoints --m1 0 --m2 0");
  CHECK(r2.out == r.out);
  bool file_matches_stdout = slurp(dir / "fixedpoints.json") == r.out;
  CHECK(file_matches_stdout);

  RunResult rp = run_cli("fixedpoints --m1 0.60875 --m2 -0.263");
  REQUIRE(rp.code == 0);
  json jp = json::parse(rp.out);
  REQUIRE(jp["ns_phase_defined"] == true);
  CHECK(jp["ns_phase"].get<double>() ==
        Catch::Approx(std::acos(-(-0.263 + 1.0))).margin(1e-12));
}

TEST_CASE("rotnum self-test generators recover known rotation numbers", "[cli]") {
  fs::path dir = fresh_dir("rotnum_synth");
  RunResult r = run_cli("--out " + dir.string() +
                        " rotnum --synthetic rigid --target-rho 0.25 --n 4096 --no-timing");
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["rho"] == 0.25);
  CHECK(j["n_used"] == 4096);
  CHECK(j["winding_assumed"] == 1);
  CHECK(j.contains("config_hash"));
  CHECK_FALSE(j.contains("wall_time_ms"));

  RunResult rg = run_cli("--out " + dir.string() +
                         " rotnum --synthetic analytic --n 10000 --no-timing");
  REQUIRE(rg.code == 0);
  json jg = json::parse(rg.out);
  double rho = jg["rho"].get<double>();
  CHECK(rho >= 0.0);
  CHECK(rho < 1.0);
  CHECK(std::fabs(rho - kGolden) < 1e-10);

  // timing is reported unless suppressed
  RunResult rt = run_cli("--out " + dir.string() + " rotnum --synthetic rigid --n 512");
  REQUIRE(rt.code == 0);
  CHECK(json::parse(rt.out).contains("wall_time_ms"));
}

TEST_CASE("rotnum on the map measures the attractor or fails by category", "[cli]") {
  fs::path dir = fresh_dir("rotnum_map");
  RunResult r = run_cli("--out " + dir.string() +
                        " rotnum --m1 0.62 --m2 -0.263 --no-timing");
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(std::fabs(j["rho"].get<double>() - 0.620045945671) < 1e-9);
  CHECK(j["diagnostics"]["delta_spread"].get<double>() < 1.0);
  CHECK(fs::exists(dir / "rotnum.json"));

  // a stable fixed point has no invariant circle
  CHECK(run_cli("rotnum --m1 0 --m2 0").code == 4);
  // every seed escapes
  CHECK(run_cli("rotnum --m1 -0.5 --m2 0").code == 3);
}

TEST_CASE("scan writes stamped deterministic period maps", "[cli]") {
  fs::path dir = fresh_dir("scan");
  std::string args = "--out " + dir.string() +
                     " scan --rect 0.6 0.66 -0.27 -0.24 --nx 3 --ny 2"
                     " --transient 2000 --keep 400";
  REQUIRE(run_cli(args).code == 0);
  auto rows_min = csv_rows(dir / "scan_min.csv");
  auto rows_max = csv_rows(dir / "scan_max.csv");
  REQUIRE(rows_min.size() == 6);
  REQUIRE(rows_max.size() == 6);
  // row-major with M1 varying fastest, endpoints included
  CHECK(std::stod(rows_min[0][0]) == 0.6);
  CHECK(std::stod(rows_min[2][0]) == 0.66);
  CHECK(std::stod(rows_min[0][1]) == -0.27);
  CHECK(std::stod(rows_min[5][1]) == -0.24);

  std::string before_min = slurp(dir / "scan_min.csv");
  std::string before_max = slurp(dir / "scan_max.csv");
  REQUIRE(run_cli(args).code == 0);
  CHECK(slurp(dir / "scan_min.csv") == before_min);
  CHECK(slurp(dir / "scan_max.csv") == before_max);

  // workers must not change a byte
  REQUIRE(run_cli("--workers 4 " + args).code == 0);
  CHECK(slurp(dir / "scan_min.csv") == before_min);
  CHECK(slurp(dir / "scan_max.csv") == before_max);
}

TEST_CASE("scan classifies the origin cell as a stable fixed point", "[cli]") {
  fs::path dir = fresh_dir("scan_origin");
  // seeds restricted to the fixed point's basin so min and max agree
  REQUIRE(run_cli("--out " + dir.string() +
                  " scan --rect 0 0 0 0 --nx 1 --ny 1 --seed-lo -0.5 --seed-hi 0.5")
              .code == 0);
  auto rmin = csv_rows(dir / "scan_min.csv");
  auto rmax = csv_rows(dir / "scan_max.csv");
  REQUIRE(rmin.size() == 1);
  REQUIRE(rmax.size() == 1);
  CHECK(rmin[0][2] == "1");
  CHECK(rmax[0][2] == "1");
}

TEST_CASE("trace follows the affine test field and honors its tolerances", "[cli]") {
  fs::path dir = fresh_dir("trace_affine");
  std::string args = "--out " + dir.string() +
                     " trace --field affine --target-rho 0 --segment -0.05 0 0.1 0"
                     " --r0 0.01 --max-points 15 --initial-direction 1.5707963267948966";
  RunResult r = run_cli(args);
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["reason"] == "budget");
  CHECK(j["total_points"] == 15);

  auto rows = csv_rows(dir / "trace.csv");
  REQUIRE(rows.size() == 15);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(std::stoull(rows[i][0]) == i);
    CHECK(std::fabs(std::stod(rows[i][1])) <= 1e-10);   // M1 pinned to the contour
    CHECK(std::stod(rows[i][4]) <= 1e-9);               // residual within accept tol
    if (i > 0) CHECK(std::stod(rows[i][2]) > std::stod(rows[i - 1][2]));
  }
}

TEST_CASE("trace resume continues a truncated file to identical bytes", "[cli]") {
  fs::path full_dir = fresh_dir("trace_full");
  fs::path part_dir = fresh_dir("trace_part");
  std::string base = " trace --field circular --target-rho 0.5 --segment 0.3 0 0.8 0"
                     " --r0 0.02 --initial-direction 1.5707963267948966";
  REQUIRE(run_cli("--out " + full_dir.string() + base + " --max-points 60").code == 0);
  REQUIRE(run_cli("--out " + part_dir.string() + base + " --max-points 25").code == 0);

  // restart with a larger budget: picks up after row 25, no recomputation of old rows
  RunResult r = run_cli("--out " + part_dir.string() + base + " --max-points 60");
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["resumed_from"] == 25);
  CHECK(j["new_points"] == 35);
  CHECK(slurp(part_dir / "trace.csv") == slurp(full_dir / "trace.csv"));

  // rerun at the full budget: nothing to add, file untouched
  std::string before = slurp(part_dir / "trace.csv");
  RunResult r2 = run_cli("--out " + part_dir.string() + base + " --max-points 60");
  REQUIRE(r2.code == 0);
  CHECK(json::parse(r2.out)["new_points"] == 0);
  CHECK(slurp(part_dir / "trace.csv") == before);

  // every accepted point sits on the circular contour
  for (const auto& row : csv_rows(part_dir / "trace.csv")) {
    double m1 = std::stod(row[1]), m2 = std::stod(row[2]);
    CHECK(std::fabs(std::hypot(m1, m2) - 0.5) <= 1e-8);
  }
}

TEST_CASE("trace rejects resuming under a different configuration", "[cli]") {
  fs::path dir = fresh_dir("trace_stale");
  std::string base = "--out " + dir.string() + " trace --field affine --segment -0.05 0 0.1 0";
  REQUIRE(run_cli(base + " --target-rho 0 --max-points 5").code == 0);
  CHECK(run_cli(base + " --target-rho 0.25 --max-points 5").code == 2);
}

TEST_CASE("trace output is identical across worker counts", "[cli]") {
  fs::path d1 = fresh_dir("trace_w1");
  fs::path d3 = fresh_dir("trace_w3");
  std::string base = " trace --field circular --target-rho 0.5 --segment 0.3 0 0.8 0"
                     " --r0 0.02 --max-points 40 --initial-direction 1.5707963267948966";
  REQUIRE(run_cli("--workers 1 --out " + d1.string() + base).code == 0);
  REQUIRE(run_cli("--workers 3 --out " + d3.string() + base).code == 0);
  CHECK(slurp(d1 / "trace.csv") == slurp(d3 / "trace.csv"));
}

TEST_CASE("analyze exports orbit, bundles, and a sorted conjugacy", "[cli]") {
  fs::path dir = fresh_dir("analyze");
  RunResult r = run_cli("--out " + dir.string() +
                        " analyze --m1 0.62 --m2 -0.263 --dump 300");
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(std::fabs(j["rho"].get<double>() - 0.620045945671) < 1e-8);
  CHECK(j["reducible"] == true);
  double lsum = j["lambda_sum"].get<double>();
  CHECK(std::fabs(lsum - std::log(0.5)) < 1e-6);
  CHECK(std::fabs(j["lambda"][0].get<double>()) < 1e-4);

  auto orbit_rows = csv_rows(dir / "analyze_orbit.csv");
  CHECK(orbit_rows.size() == 300);

  auto bundle_rows = csv_rows(dir / "analyze_bundles.csv");
  REQUIRE(bundle_rows.size() == 300);
  for (const auto& row : bundle_rows) {
    REQUIRE(row.size() == 13);
    for (int c = 10; c < 13; ++c) {
      double ang = std::stod(row[c]);
      CHECK(ang >= 0.0);
      CHECK(ang <= 1.5707963267948966 + 1e-12);
    }
  }

  auto conj_rows = csv_rows(dir / "analyze_conjugacy.csv");
  REQUIRE(conj_rows.size() == 300);
  double prev = -1.0;
  for (const auto& row : conj_rows) {
    double theta = std::stod(row[0]);
    CHECK(theta > prev);  // strictly ascending
    prev = theta;
  }

  // no quasiperiodic attractor at a fixed-point parameter
  CHECK(run_cli("analyze --m1 0 --m2 0").code == 4);
}

TEST_CASE("options can come from a config file with command-line override", "[cli]") {
  fs::path dir = fresh_dir("config_file");
  fs::path cfg = dir / "run.ini";
  {
    std::ofstream f(cfg);
    f << "b=0.5\n";
    f << "out=" << dir.string() << "\n";
    f << "[rotnum]\n";
    f << "synthetic=rigid\n";
    f << "target-rho=0.25\n";
    f << "n=4096\n";
    f << "no-timing=true\n";
  }
  RunResult r = run_cli("--config " + cfg.string() + " rotnum");
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["rho"] == 0.25);
  CHECK(j["n_used"] == 4096);
  CHECK(fs::exists(dir / "rotnum.json"));

  // explicit flags beat the file
  RunResult r2 = run_cli("--config " + cfg.string() + " rotnum --n 2048");
  REQUIRE(r2.code == 0);
  CHECK(json::parse(r2.out)["n_used"] == 2048);
}

TEST_CASE("configuration mistakes exit with the documented code", "[cli]") {
  CHECK(run_cli("scan --rect 1 0 0 1 --nx 2 --ny 2").code == 2);   // inverted rectangle
  CHECK(run_cli("--b 0 rotnum --m1 0.62 --m2 -0.263").code == 2);  // non-invertible family
  CHECK(run_cli("trace --target-rho 0.5").code == 2);              // missing seed segment
  CHECK(run_cli("rotnum --synthetic nonsense").code == 2);         // unknown generator
  CHECK(run_cli("definitely-not-a-command").code == 2);
  CHECK(run_cli("trace --segment 0 0 1 1 --field affine --target-rho 9 --max-points 3")
            .code == 6);  // segment does not bracket the target
}
