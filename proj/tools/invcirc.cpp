// Command-line driver: period-map scans, rotation-number queries, contour
// traces with resume, bundle/angle diagnostics, and fixed-point reports.
// Every output file carries a version + config-hash stamp so artifacts are
// traceable to the exact configuration that produced them.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "invcirc/io.hpp"
#include "invcirc/map.hpp"
#include "invcirc/orbit.hpp"
#include "invcirc/rng.hpp"
#include "invcirc/rotation.hpp"
#include "invcirc/synthetic.hpp"
#include "invcirc/tangent.hpp"
#include "invcirc/tracer.hpp"
#include "invcirc/version.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace invcirc;

namespace {

constexpr double kGolden = 0.61803398874989484820;

// Documented exit codes. Everything not listed maps to 1.
//   0 success
//   2 configuration error (bad flags, invalid tolerances, B = 0, stale resume)
//   3 no attractor (every seed escaped)
//   4 periodic attractor, no invariant circle
//   5 degenerate measurement (projection, unwrap, cocycle, or intersection)
//   6 no bracket found
//   7 iteration budget exhausted without convergence
int exit_code_for(errc c) {
  switch (c) {
    case errc::config:
    case errc::singular_jacobian:
      return 2;
    case errc::no_attractor:
      return 3;
    case errc::periodic_attractor:
      return 4;
    case errc::degenerate_projection:
    case errc::degenerate_input:
    case errc::undefined_angle:
    case errc::sequence_too_short:
    case errc::ambiguous_unwrap:
    case errc::degenerate_cocycle:
    case errc::intersection_degenerate:
      return 5;
    case errc::no_bracket:
      return 6;
    case errc::non_convergence:
      return 7;
    default:
      return 1;
  }
}

// Canonical key=value serialization of the options that define a run's output.
// Worker count, output paths, and stop budgets are deliberately excluded: they
// must not change (or pin) the produced numbers.
class Hasher {
 public:
  Hasher& add(const std::string& key, const std::string& v) {
    text_ += key;
    text_ += '=';
    text_ += v;
    text_ += ';';
    return *this;
  }
  Hasher& add(const std::string& key, double v) { return add(key, format_g17(v)); }
  Hasher& add(const std::string& key, bool v) { return add(key, std::string(v ? "1" : "0")); }
  Hasher& add(const std::string& key, std::uint64_t v) { return add(key, std::to_string(v)); }
  Hasher& add(const std::string& key, int v) { return add(key, std::to_string(v)); }
  Hasher& add(const std::string& key, const std::vector<double>& v) {
    std::string s;
    for (double x : v) {
      s += format_g17(x);
      s += ' ';
    }
    return add(key, s);
  }
  std::uint64_t hash() const { return fnv1a64(text_); }

 private:
  std::string text_;
};

struct GlobalOpts {
  double B = 0.5;
  std::string out = ".";
  unsigned workers = 1;
  std::uint64_t seed = TangentConfig{}.seed;
};

std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::out) {
  std::ofstream f(p, mode);
  if (!f) fail(errc::io, "cannot open output file: " + p.string());
  return f;
}

void emit_json(const GlobalOpts& g, const std::string& name, const ordered_json& j) {
  fs::create_directories(g.out);
  fs::path p = fs::path(g.out) / name;
  open_out(p) << j.dump(2) << '\n';
  std::cout << j.dump(2) << '\n';
}

ordered_json diag_json(const RotationDiagnostics& d) {
  return ordered_json{{"max_nn_dist", d.max_nn_dist},
                      {"delta_spread", d.delta_spread},
                      {"min_dist_to_center", d.min_dist_to_center}};
}

// Classifies the seed lattice and iterates the attractor orbit of the first
// aperiodic seed. Failure picks the most specific explanation seen.
Orbit find_attractor_orbit(const MapParams& p, std::size_t n_transient, std::size_t n_keep,
                           const ClassifyConfig& ccfg = {}) {
  require_invertible(p);
  bool saw_trapped = false;
  for (const State& seed : seed_lattice()) {
    PeriodClass cls = classify_attractor(p, seed, ccfg);
    switch (cls.kind) {
      case PeriodClass::Kind::Aperiodic:
        if (auto orbit = iterate_orbit(p, seed, n_transient, n_keep)) return *orbit;
        break;
      case PeriodClass::Kind::FixedPoint:
      case PeriodClass::Kind::Periodic:
        saw_trapped = true;
        break;
      case PeriodClass::Kind::Escaped:
        break;
    }
  }
  if (saw_trapped)
    fail(errc::periodic_attractor, "attractor is periodic: no invariant circle here");
  fail(errc::no_attractor, "every seed escaped at this parameter point");
}

// ---------------------------------------------------------------------------
// scan

struct ScanOpts {
  std::vector<double> rect{0.4, 1.0, -0.4, 0.1};
  std::size_t nx = 41, ny = 41;
  int lattice = 3;
  double seed_lo = -1.5, seed_hi = 1.5;
  std::size_t transient = ClassifyConfig{}.n_transient;
  std::size_t keep = ClassifyConfig{}.n_keep;
  double eps_per = ClassifyConfig{}.eps_per;
  int p_max = ClassifyConfig{}.p_max;
  std::size_t window = ClassifyConfig{}.window;
};

int run_scan(const GlobalOpts& g, const ScanOpts& so) {
  if (!(so.rect[0] <= so.rect[1] && so.rect[2] <= so.rect[3]))
    fail(errc::config, "scan: rectangle must satisfy m1_min <= m1_max, m2_min <= m2_max");
  ScanRect rect{so.rect[0], so.rect[1], so.rect[2], so.rect[3]};
  ClassifyConfig ccfg;
  ccfg.n_transient = so.transient;
  ccfg.n_keep = so.keep;
  ccfg.eps_per = so.eps_per;
  ccfg.p_max = so.p_max;
  ccfg.window = so.window;

  GridScan scan = scan_grid(g.B, rect, so.nx, so.ny,
                            seed_lattice(so.lattice, so.seed_lo, so.seed_hi), ccfg,
                            g.workers);

  Hasher h;
  h.add("command", std::string("scan"))
      .add("B", g.B)
      .add("rect", so.rect)
      .add("nx", so.nx)
      .add("ny", so.ny)
      .add("lattice", so.lattice)
      .add("seed_lo", so.seed_lo)
      .add("seed_hi", so.seed_hi)
      .add("transient", so.transient)
      .add("keep", so.keep)
      .add("eps_per", so.eps_per)
      .add("p_max", so.p_max)
      .add("window", so.window);
  std::uint64_t ch = h.hash();

  fs::create_directories(g.out);
  auto write_map = [&](const char* name, bool use_min) {
    fs::path p = fs::path(g.out) / name;
    std::ofstream f = open_out(p);
    f << stamp_line(ch) << '\n' << "M1,M2,class" << '\n';
    for (const GridCell& cell : scan.cells) {
      const PeriodClass& cls = use_min ? cell.min_class : cell.max_class;
      f << format_g17(cell.m1) << ',' << format_g17(cell.m2) << ',' << cls.csv_code()
        << '\n';
    }
    return p.string();
  };
  std::string fmin = write_map("scan_min.csv", true);
  std::string fmax = write_map("scan_max.csv", false);

  ordered_json j{{"command", "scan"},
                 {"version", kVersion},
                 {"config_hash", hex64(ch)},
                 {"B", g.B},
                 {"nx", so.nx},
                 {"ny", so.ny},
                 {"cells", scan.cells.size()},
                 {"files", {fmin, fmax}}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// rotnum

struct RotnumOpts {
  double m1 = 0.0, m2 = 0.0;
  std::size_t n = 100000;
  std::size_t transient = 10000;
  int L = 3;
  std::string synthetic;  // "", "rigid", "analytic"
  double rho_true = kGolden;
  bool no_timing = false;
};

int run_rotnum(const GlobalOpts& g, const RotnumOpts& ro) {
  auto t0 = std::chrono::steady_clock::now();

  Orbit orbit;
  if (ro.synthetic == "rigid") {
    orbit = rigid_rotation_orbit(ro.rho_true, ro.n);
  } else if (ro.synthetic == "analytic") {
    orbit = analytic_circle_orbit(ro.rho_true, ro.n);
  } else {
    orbit = find_attractor_orbit({g.B, ro.m1, ro.m2}, ro.transient, ro.n);
  }
  RotationConfig rcfg;
  rcfg.L = ro.L;
  RotationResult rr = rotation_number(orbit, rcfg);

  Hasher h;
  h.add("command", std::string("rotnum"))
      .add("B", g.B)
      .add("m1", ro.m1)
      .add("m2", ro.m2)
      .add("n", ro.n)
      .add("transient", ro.transient)
      .add("L", ro.L)
      .add("synthetic", ro.synthetic)
      .add("rho_true", ro.rho_true);

  ordered_json j{{"command", "rotnum"}, {"version", kVersion},
                 {"config_hash", hex64(h.hash())}};
  if (ro.synthetic.empty()) {
    j["B"] = g.B;
    j["M1"] = ro.m1;
    j["M2"] = ro.m2;
  } else {
    j["synthetic"] = ro.synthetic;
    j["rho_true"] = ro.rho_true;
  }
  j["n_used"] = orbit.points.size();
  j["L"] = ro.L;
  j["rho"] = rr.rho;
  j["winding_assumed"] = rr.winding_assumed;
  j["diagnostics"] = diag_json(rr.diagnostics);
  if (!ro.no_timing) {
    auto dt = std::chrono::steady_clock::now() - t0;
    j["wall_time_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(dt).count();
  }
  emit_json(g, "rotnum.json", j);
  return 0;
}

// ---------------------------------------------------------------------------
// trace

struct TraceOpts {
  std::vector<double> segment;  // m1_a m2_a m1_b m2_b
  double target = kGolden;
  std::string field = "map";
  std::string file = "trace.csv";
  double r0 = TraceConfig{}.r0;
  double angular_step = TraceConfig{}.angular_step;
  double shrink = TraceConfig{}.shrink;
  double min_radius = TraceConfig{}.min_radius;
  double accept_tol = TraceConfig{}.accept_tol;
  double fpm_value_tol = FpmConfig{}.value_tol;
  double fpm_param_tol = FpmConfig{}.param_tol;
  int fpm_max_iter = FpmConfig{}.max_iter;
  bool no_illinois = false;
  std::size_t max_points = TraceConfig{}.max_points;
  double initial_direction = 0.0;
  std::size_t transient = RhoEvalConfig{}.n_transient;
  std::size_t keep = RhoEvalConfig{}.n_keep;
  int L = 3;
  bool no_enrich = false;
};

int run_trace(const GlobalOpts& g, const TraceOpts& to) {
  if (to.segment.size() != 4) fail(errc::config, "trace: --segment needs 4 numbers");
  if (!(to.r0 > 0.0 && to.min_radius > 0.0 && to.accept_tol > 0.0 &&
        to.angular_step > 0.0 && to.shrink > 0.0 && to.shrink < 1.0))
    fail(errc::config, "trace: radii, tolerances and shrink factor must be positive "
                       "(shrink < 1)");
  if (to.max_points < 1) fail(errc::config, "trace: --max-points must be >= 1");
  if (!std::isfinite(to.target)) fail(errc::config, "trace: target must be finite");

  RhoEvalConfig ecfg;
  ecfg.n_transient = to.transient;
  ecfg.n_keep = to.keep;
  ecfg.rotation.L = to.L;

  RhoField field;
  if (to.field == "map") {
    require_invertible({g.B, 0.0, 0.0});
    field = map_rho_field(g.B, ecfg);
  } else if (to.field == "affine") {
    field = [](const ParamPoint& p) {
      RhoSample s;
      s.status = RhoSample::Status::ok;
      s.value = p.M1;
      return s;
    };
  } else if (to.field == "circular") {
    field = [](const ParamPoint& p) {
      RhoSample s;
      s.status = RhoSample::Status::ok;
      s.value = std::hypot(p.M1, p.M2);
      return s;
    };
  } else {
    fail(errc::config, "trace: unknown field: " + to.field);
  }

  TangentConfig tcfg;
  tcfg.seed = g.seed;
  Enricher enrich = nullptr;
  if (to.field == "map" && !to.no_enrich) enrich = map_enricher(g.B, ecfg, tcfg);

  TraceConfig tc;
  tc.target = to.target;
  tc.r0 = to.r0;
  tc.angular_step = to.angular_step;
  tc.shrink = to.shrink;
  tc.min_radius = to.min_radius;
  tc.accept_tol = to.accept_tol;
  tc.fpm.value_tol = to.fpm_value_tol;
  tc.fpm.param_tol = to.fpm_param_tol;
  tc.fpm.max_iter = to.fpm_max_iter;
  tc.fpm.illinois = !to.no_illinois;
  tc.max_points = to.max_points;
  tc.initial_direction = to.initial_direction;
  tc.workers = g.workers;

  Hasher h;
  h.add("command", std::string("trace"))
      .add("B", g.B)
      .add("field", to.field)
      .add("target", to.target)
      .add("segment", to.segment)
      .add("r0", to.r0)
      .add("angular_step", to.angular_step)
      .add("shrink", to.shrink)
      .add("min_radius", to.min_radius)
      .add("accept_tol", to.accept_tol)
      .add("fpm_value_tol", to.fpm_value_tol)
      .add("fpm_param_tol", to.fpm_param_tol)
      .add("fpm_max_iter", to.fpm_max_iter)
      .add("illinois", !to.no_illinois)
      .add("initial_direction", to.initial_direction)
      .add("transient", to.transient)
      .add("keep", to.keep)
      .add("L", to.L)
      .add("enrich", to.field == "map" && !to.no_enrich)
      .add("jitter_seed", g.seed);
  std::uint64_t ch = h.hash();

  fs::create_directories(g.out);
  fs::path path = fs::path(g.out) / to.file;

  std::vector<ContourPoint> existing;
  bool fresh = !fs::exists(path);
  if (!fresh) {
    std::ifstream in(path);
    if (!in) fail(errc::io, "cannot read existing trace file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.find("config_hash=") == std::string::npos)
      fail(errc::io, "existing trace file lacks a config stamp: " + path.string());
    if (line.find(hex64(ch)) == std::string::npos)
      fail(errc::config,
           "existing trace file was produced by a different configuration: " +
               path.string());
    if (!std::getline(in, line) || line != kTraceHeader)
      fail(errc::io, "existing trace file has an unexpected header: " + path.string());
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ContourPoint cp = parse_trace_row(line);
      if (cp.index != existing.size())
        fail(errc::io, "trace rows are not contiguous in: " + path.string());
      existing.push_back(cp);
    }
  }

  std::ofstream outf = open_out(path, fresh ? std::ios::out : std::ios::app);
  if (fresh) outf << stamp_line(ch) << '\n' << kTraceHeader << '\n';
  PointSink sink = [&](const ContourPoint& cp) {
    outf << trace_row(cp) << '\n';
    outf.flush();
  };

  TraceResult res;
  if (existing.empty()) {
    res = trace_contour(field, {to.segment[0], to.segment[1]},
                        {to.segment[2], to.segment[3]}, tc, enrich, sink);
  } else {
    const ContourPoint& last = existing.back();
    std::optional<ParamPoint> prev;
    if (existing.size() >= 2) prev = existing[existing.size() - 2].point;
    res = trace_resume(field, prev, last.point, last.radius_used, existing.size(), tc,
                       enrich, sink);
  }

  ordered_json j{{"command", "trace"},
                 {"version", kVersion},
                 {"config_hash", hex64(ch)},
                 {"file", path.string()},
                 {"resumed_from", existing.size()},
                 {"new_points", res.points.size()},
                 {"total_points", existing.size() + res.points.size()},
                 {"reason", res.reason == TraceStop::breakdown ? "breakdown" : "budget"}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOpts {
  double m1 = 0.0, m2 = 0.0;
  std::size_t n1 = TangentConfig{}.N1;
  std::size_t n2 = TangentConfig{}.N2;
  std::size_t n3 = TangentConfig{}.N3;
  std::size_t transient = 10000;
  int L = 3;
  std::size_t dump = 5000;
};

int run_analyze(const GlobalOpts& g, const AnalyzeOpts& ao) {
  std::size_t need = ao.n1 + ao.n2 + ao.n3;
  Orbit orbit = find_attractor_orbit({g.B, ao.m1, ao.m2}, ao.transient, need);

  RotationConfig rcfg;
  rcfg.L = ao.L;
  RotationResult rr = rotation_number(orbit, rcfg);

  TangentConfig tcfg;
  tcfg.N1 = ao.n1;
  tcfg.N2 = ao.n2;
  tcfg.N3 = ao.n3;
  tcfg.seed = g.seed;
  TangentAnalysis ta = tangent_analysis(orbit, tcfg);

  Hasher h;
  h.add("command", std::string("analyze"))
      .add("B", g.B)
      .add("m1", ao.m1)
      .add("m2", ao.m2)
      .add("n1", ao.n1)
      .add("n2", ao.n2)
      .add("n3", ao.n3)
      .add("transient", ao.transient)
      .add("L", ao.L)
      .add("dump", ao.dump)
      .add("jitter_seed", g.seed);
  std::uint64_t ch = h.hash();

  fs::create_directories(g.out);
  std::size_t nd = std::min(ao.dump, ta.bundle_series.h0.size());

  fs::path orbit_path = fs::path(g.out) / "analyze_orbit.csv";
  {
    std::ofstream f = open_out(orbit_path);
    f << stamp_line(ch) << '\n' << "x,y,z" << '\n';
    for (std::size_t i = 0; i < nd; ++i) {
      const State& s = orbit.points[ao.n1 + i];
      f << format_g17(s.x) << ',' << format_g17(s.y) << ',' << format_g17(s.z) << '\n';
    }
  }

  fs::path bundle_path = fs::path(g.out) / "analyze_bundles.csv";
  {
    std::ofstream f = open_out(bundle_path);
    f << stamp_line(ch) << '\n'
      << "k,h0x,h0y,h0z,h1x,h1y,h1z,h2x,h2y,h2z,ang01,ang02,ang12" << '\n';
    for (std::size_t i = 0; i < nd; ++i) {
      const Vec3& a = ta.bundle_series.h0[i];
      const Vec3& b = ta.bundle_series.h1[i];
      const Vec3& c = ta.bundle_series.h2[i];
      f << ao.n1 + i << ',' << format_g17(a.x) << ',' << format_g17(a.y) << ','
        << format_g17(a.z) << ',' << format_g17(b.x) << ',' << format_g17(b.y) << ','
        << format_g17(b.z) << ',' << format_g17(c.x) << ',' << format_g17(c.y) << ','
        << format_g17(c.z) << ',' << format_g17(ta.angles.a01[i]) << ','
        << format_g17(ta.angles.a02[i]) << ',' << format_g17(ta.angles.a12[i]) << '\n';
    }
  }

  fs::path conj_path = fs::path(g.out) / "analyze_conjugacy.csv";
  {
    Orbit window;
    window.params = orbit.params;
    window.points.assign(orbit.points.begin() + static_cast<std::ptrdiff_t>(ao.n1),
                         orbit.points.begin() + static_cast<std::ptrdiff_t>(ao.n1 + nd));
    std::vector<ConjugacySample> conj = build_conjugacy(window, rr.rho);
    std::ofstream f = open_out(conj_path);
    f << stamp_line(ch) << '\n' << "theta,x,y,z" << '\n';
    for (const ConjugacySample& cs : conj)
      f << format_g17(cs.theta) << ',' << format_g17(cs.state.x) << ','
        << format_g17(cs.state.y) << ',' << format_g17(cs.state.z) << '\n';
  }

  ordered_json j{{"command", "analyze"},
                 {"version", kVersion},
                 {"config_hash", hex64(ch)},
                 {"B", g.B},
                 {"M1", ao.m1},
                 {"M2", ao.m2},
                 {"n_used", orbit.points.size()},
                 {"rho", rr.rho},
                 {"winding_assumed", rr.winding_assumed},
                 {"diagnostics", diag_json(rr.diagnostics)},
                 {"lambda", {ta.lyapunov.lambda[0], ta.lyapunov.lambda[1],
                             ta.lyapunov.lambda[2]}},
                 {"lambda_sum",
                  ta.lyapunov.lambda[0] + ta.lyapunov.lambda[1] + ta.lyapunov.lambda[2]},
                 {"log_abs_B", std::log(std::fabs(g.B))},
                 {"reducible", ta.lyapunov.reducible},
                 {"min01", ta.angles.min01},
                 {"min02", ta.angles.min02},
                 {"min12", ta.angles.min12},
                 {"reported_min12", ta.reported_min12},
                 {"files", {orbit_path.string(), bundle_path.string(),
                            conj_path.string()}}};
  emit_json(g, "analyze_summary.json", j);
  return 0;
}

// ---------------------------------------------------------------------------
// fixedpoints

struct FixedOpts {
  double m1 = 0.0, m2 = 0.0;
};

int run_fixedpoints(const GlobalOpts& g, const FixedOpts& fo) {
  MapParams p{g.B, fo.m1, fo.m2};
  require_invertible(p);

  Hasher h;
  h.add("command", std::string("fixedpoints")).add("B", g.B).add("m1", fo.m1).add("m2",
                                                                                  fo.m2);
  ordered_json fps = ordered_json::array();
  for (const State& s : fixed_points(p)) {
    auto mults = fixed_point_multipliers(p, s);
    ordered_json jm = ordered_json::array();
    bool stable = true;
    for (const auto& m : mults) {
      double mod = std::abs(m);
      stable = stable && mod < 1.0;
      jm.push_back(ordered_json{{"re", m.real()}, {"im", m.imag()}, {"modulus", mod}});
    }
    fps.push_back(ordered_json{
        {"t", s.x}, {"state", {s.x, s.y, s.z}}, {"multipliers", jm}, {"stable", stable}});
  }

  ordered_json j{{"command", "fixedpoints"},
                 {"version", kVersion},
                 {"config_hash", hex64(h.hash())},
                 {"B", g.B},
                 {"M1", fo.m1},
                 {"M2", fo.m2},
                 {"fixed_points", fps}};
  try {
    j["ns_phase"] = neimark_sacker_phase(p);
    j["ns_phase_defined"] = true;
  } catch (const error& e) {
    if (e.code() != errc::no_complex_pair) throw;
    j["ns_phase"] = nullptr;
    j["ns_phase_defined"] = false;
  }
  emit_json(g, "fixedpoints.json", j);
  return 0;
}

// ---------------------------------------------------------------------------
// selftest

int run_selftest(const GlobalOpts&) {
  int passed = 0, total = 0;
  auto check = [&](const std::string& name, bool ok, const std::string& detail) {
    ++total;
    if (ok) ++passed;
    std::cout << (ok ? "ok   " : "FAIL ") << name << "  (" << detail << ")\n";
  };

  {
    RotationResult r = rotation_number(rigid_rotation_orbit(0.25, 4096));
    check("rigid rotation 1/4", std::fabs(r.rho - 0.25) <= 1e-12,
          "rho=" + format_g17(r.rho));
  }
  {
    RotationResult r = rotation_number(rigid_rotation_orbit(0.4, 10000));
    check("rigid rotation 2/5", std::fabs(r.rho - 0.4) <= 1e-8,
          "rho=" + format_g17(r.rho));
  }
  {
    RotationResult r = rotation_number(analytic_circle_orbit(kGolden, 10000));
    check("analytic circle golden", std::fabs(r.rho - kGolden) <= 1e-10,
          "rho=" + format_g17(r.rho));
  }
  {
    std::vector<double> d(9999);
    for (std::size_t k = 1; k <= d.size(); ++k)
      d[k - 1] = std::cos(kTwoPi * frac(static_cast<double>(k) * kGolden));
    double wb = weighted_average(d);
    check("weighted average superconvergence", std::fabs(wb) < 1e-10,
          "wb=" + format_g17(wb));
  }
  {
    auto f = [](double w) { return arnold_rotation(w) - 0.5; };
    FpmResult r = fpm_solve(f, 0.4, 0.6);
    check("staircase target 1/2", std::fabs(r.froot) <= 1e-9,
          "froot=" + format_g17(r.froot));
  }
  {
    MapParams p{0.5, 0.62, -0.263};
    SplitMix64 rng(0x5eedbeefULL);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      State s{rng.next_in(-2, 2), rng.next_in(-2, 2), rng.next_in(-2, 2)};
      worst = std::max(worst, norm(apply_inverse(p, apply(p, s)) - s));
    }
    check("inverse round trip", worst < 1e-12, "worst=" + format_g17(worst));
  }
  {
    RhoField affine = [](const ParamPoint& pp) {
      RhoSample s;
      s.status = RhoSample::Status::ok;
      s.value = pp.M1;
      return s;
    };
    TraceConfig tc;
    tc.target = 0.0;
    tc.r0 = 0.01;
    tc.max_points = 20;
    tc.initial_direction = kPi / 2;
    TraceResult res = trace_contour(affine, {-0.05, 0.0}, {0.1, 0.0}, tc);
    double worst = 0.0;
    for (const ContourPoint& cp : res.points)
      worst = std::max(worst, std::fabs(cp.point.M1));
    check("affine contour trace", res.points.size() == 20 && worst <= 1e-10,
          "worst_m1=" + format_g17(worst));
  }

  std::cout << "selftest: " << passed << "/" << total << " passed\n";
  return passed == total ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attracting invariant circles: period-map scans, rotation numbers, "
               "constant-rotation-number contour traces, breakdown diagnostics"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "read options from an INI file (sections per command)");
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--b", g.B, "map coefficient B (nonzero)")->capture_default_str();
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--workers", g.workers, "worker threads (results are identical for any count)")
      ->capture_default_str();
  app.add_option("--seed", g.seed, "seed for the tangent-frame jitter")
      ->capture_default_str();

  ScanOpts so;
  CLI::App* scan = app.add_subcommand("scan", "attractor period map over a parameter rectangle");
  scan->add_option("--rect", so.rect, "m1_min m1_max m2_min m2_max")
      ->expected(4)
      ->capture_default_str();
  scan->add_option("--nx", so.nx, "grid columns (M1)")->capture_default_str();
  scan->add_option("--ny", so.ny, "grid rows (M2)")->capture_default_str();
  scan->add_option("--lattice", so.lattice, "seeds per axis (lattice of n^3 states)")
      ->capture_default_str();
  scan->add_option("--seed-lo", so.seed_lo, "seed lattice lower bound per coordinate")
      ->capture_default_str();
  scan->add_option("--seed-hi", so.seed_hi, "seed lattice upper bound per coordinate")
      ->capture_default_str();
  scan->add_option("--transient", so.transient, "settle iterations before classification")
      ->capture_default_str();
  scan->add_option("--keep", so.keep, "kept iterations for recurrence detection")
      ->capture_default_str();
  scan->add_option("--eps-per", so.eps_per, "recurrence tolerance")->capture_default_str();
  scan->add_option("--p-max", so.p_max, "largest period searched")->capture_default_str();
  scan->add_option("--window", so.window, "recurrence window length")->capture_default_str();

  RotnumOpts ro;
  CLI::App* rotnum = app.add_subcommand("rotnum", "rotation number at one parameter point");
  rotnum->add_option("--m1", ro.m1, "M1")->capture_default_str();
  rotnum->add_option("--m2", ro.m2, "M2")->capture_default_str();
  rotnum->add_option("--n", ro.n, "orbit points used for averaging")->capture_default_str();
  rotnum->add_option("--transient", ro.transient, "settle iterations")->capture_default_str();
  rotnum->add_option("--L", ro.L, "delay-embedding length")->capture_default_str();
  rotnum->add_option("--synthetic", ro.synthetic,
                     "self-test generator instead of the map: rigid | analytic")
      ->check(CLI::IsMember({"rigid", "analytic"}));
  rotnum->add_option("--target-rho", ro.rho_true, "rotation number of the synthetic generator")
      ->capture_default_str();
  rotnum->add_flag("--no-timing", ro.no_timing, "omit wall time for byte-stable output");

  TraceOpts to;
  CLI::App* trace = app.add_subcommand("trace", "trace a constant-rotation-number contour");
  trace->add_option("--segment", to.segment, "seed segment m1_a m2_a m1_b m2_b (must cross the contour)")
      ->expected(4)
      ->required();
  trace->add_option("--target-rho", to.target, "contour level")->capture_default_str();
  trace->add_option("--field", to.field, "map | affine | circular (test hooks)")
      ->check(CLI::IsMember({"map", "affine", "circular"}))
      ->capture_default_str();
  trace->add_option("--file", to.file, "output CSV (resumes if it already exists)")
      ->capture_default_str();
  trace->add_option("--r0", to.r0, "initial continuation radius")->capture_default_str();
  trace->add_option("--angular-step", to.angular_step, "circle-search step in radians")
      ->capture_default_str();
  trace->add_option("--shrink", to.shrink, "radius shrink factor on failure")
      ->capture_default_str();
  trace->add_option("--min-radius", to.min_radius, "radius declaring breakdown")
      ->capture_default_str();
  trace->add_option("--accept-tol", to.accept_tol, "|rho - target| accepted on the contour")
      ->capture_default_str();
  trace->add_option("--fpm-value-tol", to.fpm_value_tol, "root-solve value tolerance")
      ->capture_default_str();
  trace->add_option("--fpm-param-tol", to.fpm_param_tol, "root-solve interval tolerance")
      ->capture_default_str();
  trace->add_option("--fpm-max-iter", to.fpm_max_iter, "root-solve iteration cap")
      ->capture_default_str();
  trace->add_flag("--no-illinois", to.no_illinois, "plain false position without stall breaking");
  trace->add_option("--max-points", to.max_points, "stop budget")->capture_default_str();
  trace->add_option("--initial-direction", to.initial_direction,
                    "first-step march direction in radians")
      ->capture_default_str();
  trace->add_option("--transient", to.transient, "settle iterations per field evaluation")
      ->capture_default_str();
  trace->add_option("--n", to.keep, "orbit points per field evaluation")->capture_default_str();
  trace->add_option("--L", to.L, "delay-embedding length")->capture_default_str();
  trace->add_flag("--no-enrich", to.no_enrich, "skip exponent/angle diagnostics per point");

  AnalyzeOpts ao;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "attractor dump, bundle/angle series, and conjugacy at one point");
  analyze->add_option("--m1", ao.m1, "M1")->required();
  analyze->add_option("--m2", ao.m2, "M2")->required();
  analyze->add_option("--n1", ao.n1, "frame warmup window")->capture_default_str();
  analyze->add_option("--n2", ao.n2, "averaging window")->capture_default_str();
  analyze->add_option("--n3", ao.n3, "backward warmup window")->capture_default_str();
  analyze->add_option("--transient", ao.transient, "settle iterations")->capture_default_str();
  analyze->add_option("--L", ao.L, "delay-embedding length")->capture_default_str();
  analyze->add_option("--dump", ao.dump, "rows written per CSV")->capture_default_str();

  FixedOpts fo;
  CLI::App* fixed = app.add_subcommand("fixedpoints", "fixed points, multipliers, bifurcation phase");
  fixed->add_option("--m1", fo.m1, "M1")->capture_default_str();
  fixed->add_option("--m2", fo.m2, "M2")->capture_default_str();

  CLI::App* selftest =
      app.add_subcommand("selftest", "run the built-in synthetic checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int r = app.exit(e);
    return r == 0 ? 0 : 2;
  }

  try {
    if (scan->parsed()) return run_scan(g, so);
    if (rotnum->parsed()) return run_rotnum(g, ro);
    if (trace->parsed()) return run_trace(g, to);
    if (analyze->parsed()) return run_analyze(g, ao);
    if (fixed->parsed()) return run_fixedpoints(g, fo);
    if (selftest->parsed()) return run_selftest(g);
  } catch (const error& e) {
    std::cerr << "invcirc: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "invcirc: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
