#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "invcirc/errors.hpp"
#include "invcirc/map.hpp"
#include "invcirc/orbit.hpp"
#include "invcirc/parallel.hpp"
#include "invcirc/rotation.hpp"
#include "invcirc/tangent.hpp"

namespace invcirc {

// A point in the (M1, M2) parameter plane; B is fixed by the enclosing config.
struct ParamPoint {
  double M1 = 0.0;
  double M2 = 0.0;
};

inline ParamPoint lerp(const ParamPoint& a, const ParamPoint& b, double t) {
  return {a.M1 + t * (b.M1 - a.M1), a.M2 + t * (b.M2 - a.M2)};
}

inline double param_dist(const ParamPoint& a, const ParamPoint& b) {
  return std::hypot(b.M1 - a.M1, b.M2 - a.M2);
}

// Outcome of evaluating the rotation number at one parameter point. A periodic
// attractor still carries its rational rotation number when one could be
// measured: tongues are plateaus of the staircase, not holes in it, and their
// values keep the bracketing logic alive.
struct RhoSample {
  enum class Status { ok, periodic, fixed_point, escaped, degenerate };

  Status status = Status::degenerate;
  double value = std::numeric_limits<double>::quiet_NaN();
  int period = 0;  // set when status == periodic

  bool usable() const {
    return (status == Status::ok || status == Status::periodic) && std::isfinite(value);
  }
};

using RhoField = std::function<RhoSample(const ParamPoint&)>;

struct RhoEvalConfig {
  ClassifyConfig classify;
  std::size_t n_transient = 10000;
  std::size_t n_keep = 100000;
  RotationConfig rotation;
  std::vector<State> seeds;  // empty -> seed_lattice()
};

// Hunts through the seed list for an attractor and measures its rotation
// number. Seeds are classified first (cheap) and the full-budget orbit is only
// iterated for the first aperiodic one; failures to measure fall back to the
// most informative status seen across all seeds.
inline RhoSample rho_eval(double B, const ParamPoint& pp, const RhoEvalConfig& cfg = {}) {
  MapParams p{B, pp.M1, pp.M2};
  const std::vector<State>& seeds = cfg.seeds.empty() ? seed_lattice() : cfg.seeds;

  auto measure = [&](const State& seed, RhoSample& out) {
    auto orbit = iterate_orbit(p, seed, cfg.n_transient, cfg.n_keep);
    if (!orbit) return false;
    try {
      RotationResult res = rotation_number(*orbit, cfg.rotation);
      if (res.diagnostics.delta_spread >= 1.0) return false;  // winding assumption broke
      out.value = res.rho;
      return true;
    } catch (const error&) {
      return false;
    }
  };

  bool saw_fixed = false, saw_degenerate = false;
  std::optional<std::pair<State, int>> periodic_hit;
  for (const State& seed : seeds) {
    PeriodClass cls = classify_attractor(p, seed, cfg.classify);
    switch (cls.kind) {
      case PeriodClass::Kind::Escaped:
        break;
      case PeriodClass::Kind::FixedPoint:
        saw_fixed = true;
        break;
      case PeriodClass::Kind::Periodic:
        if (!periodic_hit) periodic_hit = {seed, cls.period};
        break;
      case PeriodClass::Kind::Aperiodic: {
        RhoSample s;
        s.status = RhoSample::Status::ok;
        if (measure(seed, s)) return s;
        saw_degenerate = true;
        break;
      }
    }
  }

  RhoSample s;
  if (periodic_hit) {
    s.status = RhoSample::Status::periodic;
    s.period = periodic_hit->second;
    measure(periodic_hit->first, s);  // plateau value if the projection allows it
  } else if (saw_degenerate) {
    s.status = RhoSample::Status::degenerate;
  } else if (saw_fixed) {
    s.status = RhoSample::Status::fixed_point;
  } else {
    s.status = RhoSample::Status::escaped;
  }
  return s;
}

inline RhoField map_rho_field(double B, const RhoEvalConfig& cfg = {}) {
  return [B, cfg](const ParamPoint& pp) { return rho_eval(B, pp, cfg); };
}

// Converts a failed sample into the error the CLI reports.
inline double require_value(const RhoSample& s) {
  if (s.usable()) return s.value;
  switch (s.status) {
    case RhoSample::Status::escaped:
      fail(errc::no_attractor, "every seed escaped at this parameter point");
    case RhoSample::Status::fixed_point:
      fail(errc::periodic_attractor, "attractor is a fixed point, no invariant circle");
    case RhoSample::Status::periodic:
      fail(errc::periodic_attractor, "periodic attractor with unmeasurable rotation number");
    default:
      fail(errc::degenerate_projection, "rotation number could not be measured");
  }
}

struct FpmConfig {
  double value_tol = 1e-9;
  double param_tol = 1e-12;
  int max_iter = 80;
  bool illinois = true;  // halve a twice-retained endpoint's value to stop stalls
};

struct FpmIterate {
  int iter = 0;
  double a = 0, b = 0, fa = 0, fb = 0, c = 0, fc = 0;
};

using FpmObserver = std::function<void(const FpmIterate&)>;

struct FpmResult {
  double root = 0.0;
  double froot = 0.0;
  int iterations = 0;
};

// False Position on a bracketing interval: the next iterate is the secant
// through (a, f(a)) and (b, f(b)); the sub-interval keeping the sign change
// survives. Exact on affine functions in a single iteration.
inline FpmResult fpm_solve(const std::function<double(double)>& f, double a, double b,
                           const FpmConfig& cfg = {}, const FpmObserver& obs = nullptr,
                           std::optional<double> fa_known = std::nullopt,
                           std::optional<double> fb_known = std::nullopt) {
  double fa = fa_known ? *fa_known : f(a);
  double fb = fb_known ? *fb_known : f(b);
  if (std::fabs(fa) <= cfg.value_tol) return {a, fa, 0};
  if (std::fabs(fb) <= cfg.value_tol) return {b, fb, 0};
  if (fa * fb > 0.0) fail(errc::no_bracket, "fpm_solve: endpoints do not bracket a root");

  int side = 0;  // -1: a retained last, +1: b retained last
  double best_c = a, best_f = fa;
  if (std::fabs(fb) < std::fabs(fa)) best_c = b, best_f = fb;

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    double denom = fb - fa;
    double c = denom != 0.0 ? (a * fb - b * fa) / denom : 0.5 * (a + b);
    // rounding can push the secant onto an endpoint; bisect instead of stalling
    if (!(c > std::min(a, b) && c < std::max(a, b)) || c == a || c == b)
      c = 0.5 * (a + b);
    double fc = f(c);
    if (obs) obs(FpmIterate{iter, a, b, fa, fb, c, fc});
    if (std::fabs(fc) < std::fabs(best_f)) best_c = c, best_f = fc;
    if (std::fabs(fc) <= cfg.value_tol) return {c, fc, iter};

    if (fc * fa > 0.0) {
      a = c;
      fa = fc;
      if (cfg.illinois && side == +1) fb *= 0.5;
      side = +1;  // b retained
    } else {
      b = c;
      fb = fc;
      if (cfg.illinois && side == -1) fa *= 0.5;
      side = -1;  // a retained
    }
    if (std::fabs(b - a) <= cfg.param_tol) return {c, fc, iter};
  }
  throw error(errc::non_convergence, "fpm_solve: iteration budget exhausted", best_c);
}

struct ArcBracket {
  double theta_a = 0.0, theta_b = 0.0;  // adjacent sample angles, step apart
  double value_a = 0.0, value_b = 0.0;
};

struct CircleSearchConfig {
  double angular_step = kPi / 18.0;  // 10 degrees
  unsigned workers = 1;
};

using SampleObserver = std::function<void(double theta, const RhoSample&)>;

// Walks around the circle of the given radius looking for two adjacent sample
// angles whose field values enclose the target. The first two probes sit half a
// step either side of the predicted direction; their values pick the walk
// direction. Unusable samples are skipped and break adjacency. With several
// workers the upcoming angles are evaluated ahead in deterministic blocks, but
// results are consumed in strict angular order, so the outcome (and everything
// reported through the observer) is identical to the sequential walk.
inline std::optional<ArcBracket> circle_bracket_search(
    const RhoField& field, const ParamPoint& center, double radius, double direction,
    double target, const CircleSearchConfig& cfg = {}, const SampleObserver& obs = nullptr) {
  double step = cfg.angular_step;
  auto at = [&](double theta) {
    return ParamPoint{center.M1 + radius * std::cos(theta),
                      center.M2 + radius * std::sin(theta)};
  };
  auto encloses = [&](double va, double vb) {
    return (va - target) * (vb - target) <= 0.0;
  };

  double th_m = direction - 0.5 * step;
  double th_p = direction + 0.5 * step;
  RhoSample sm = field(at(th_m));
  if (obs) obs(th_m, sm);
  RhoSample sp = field(at(th_p));
  if (obs) obs(th_p, sp);

  if (sm.usable() && sp.usable() && encloses(sm.value, sp.value))
    return ArcBracket{th_m, th_p, sm.value, sp.value};

  // which way to walk: toward the target if the local slope says so, otherwise
  // toward the side that produced a usable sample at all
  double dirsign = 1.0;
  if (sm.usable() && sp.usable()) {
    double slope = sp.value - sm.value;
    if (slope != 0.0) dirsign = ((target - sp.value) * slope > 0.0) ? 1.0 : -1.0;
  } else if (sm.usable()) {
    dirsign = -1.0;
  }

  double start = dirsign > 0.0 ? th_p : th_m;
  const RhoSample& s0 = dirsign > 0.0 ? sp : sm;
  bool have_prev = s0.usable();
  double prev_theta = start, prev_value = s0.value;

  std::size_t max_steps =
      static_cast<std::size_t>(std::ceil((kTwoPi + step) / step)) + 1;

  std::size_t block = cfg.workers > 1 ? cfg.workers : 1;
  std::vector<RhoSample> samples(block);
  for (std::size_t i0 = 1; i0 <= max_steps; i0 += block) {
    std::size_t count = std::min(block, max_steps - i0 + 1);
    if (block == 1) {
      samples[0] = field(at(start + dirsign * static_cast<double>(i0) * step));
    } else {
      parallel_for_index(count, cfg.workers, [&](std::size_t j) {
        samples[j] = field(at(start + dirsign * static_cast<double>(i0 + j) * step));
      });
    }
    for (std::size_t j = 0; j < count; ++j) {
      double theta = start + dirsign * static_cast<double>(i0 + j) * step;
      const RhoSample& s = samples[j];
      if (obs) obs(theta, s);
      if (s.usable()) {
        if (have_prev && encloses(prev_value, s.value)) {
          if (dirsign > 0.0) return ArcBracket{prev_theta, theta, prev_value, s.value};
          return ArcBracket{theta, prev_theta, s.value, prev_value};
        }
        have_prev = true;
        prev_theta = theta;
        prev_value = s.value;
      } else {
        have_prev = false;  // a skipped sample breaks adjacency
      }
    }
  }
  return std::nullopt;
}

struct ContourDiagnostics {
  double lambda[3] = {std::numeric_limits<double>::quiet_NaN(),
                      std::numeric_limits<double>::quiet_NaN(),
                      std::numeric_limits<double>::quiet_NaN()};
  double ang01 = std::numeric_limits<double>::quiet_NaN();
  double ang02 = std::numeric_limits<double>::quiet_NaN();
  double ang12 = std::numeric_limits<double>::quiet_NaN();
  bool reducible = false;
  bool enriched = false;
};

struct ContourPoint {
  std::size_t index = 0;
  ParamPoint point;
  double rho = 0.0;
  double residual = 0.0;     // |rho - target| at acceptance
  double radius_used = 0.0;  // search radius in force when the point was accepted
  ContourDiagnostics diag;
};

enum class TraceStop {
  breakdown,     // radius shrank below the minimum: continuation lost the circle
  budget,        // max_points reached
};

struct TraceResult {
  std::vector<ContourPoint> points;
  TraceStop reason = TraceStop::budget;
};

struct TraceConfig {
  double target = 0.0;
  double r0 = 1e-3;
  double angular_step = kPi / 18.0;
  double shrink = 0.5;
  double min_radius = 1e-6;
  double accept_tol = 1e-9;
  FpmConfig fpm;
  std::size_t max_points = 4000;
  double initial_direction = 0.0;  // radians, first continuation step
  unsigned workers = 1;
};

using Enricher = std::function<void(ContourPoint&)>;
using PointSink = std::function<void(const ContourPoint&)>;

namespace detail {

struct StepOutcome {
  ParamPoint point;
  double rho = 0.0;
  double residual = 0.0;
  double radius_used = 0.0;
};

// One continuation step: search the circle around `last` for a bracketing arc,
// then solve along its chord. Any failure shrinks the radius and retries; the
// radius never grows back. Candidates behind the march direction are rejected:
// they re-cross the contour toward the previous point.
inline std::optional<StepOutcome> continuation_step(const RhoField& field,
                                                    const ParamPoint& last, double dir,
                                                    double& radius,
                                                    const TraceConfig& cfg) {
  while (radius >= cfg.min_radius) {
    CircleSearchConfig scfg{cfg.angular_step, cfg.workers};
    auto br = circle_bracket_search(field, last, radius, dir, cfg.target, scfg);
    if (!br) {
      radius *= cfg.shrink;
      continue;
    }
    ParamPoint A{last.M1 + radius * std::cos(br->theta_a),
                 last.M2 + radius * std::sin(br->theta_a)};
    ParamPoint B{last.M1 + radius * std::cos(br->theta_b),
                 last.M2 + radius * std::sin(br->theta_b)};
    auto fch = [&](double t) { return require_value(field(lerp(A, B, t))) - cfg.target; };
    FpmResult res;
    try {
      res = fpm_solve(fch, 0.0, 1.0, cfg.fpm, nullptr, br->value_a - cfg.target,
                      br->value_b - cfg.target);
    } catch (const error&) {
      radius *= cfg.shrink;
      continue;
    }
    if (std::fabs(res.froot) > cfg.accept_tol) {
      radius *= cfg.shrink;
      continue;
    }
    ParamPoint c = lerp(A, B, res.root);
    double forward = (c.M1 - last.M1) * std::cos(dir) + (c.M2 - last.M2) * std::sin(dir);
    if (forward < 0.0) {
      radius *= cfg.shrink;
      continue;
    }
    return StepOutcome{c, res.froot + cfg.target, std::fabs(res.froot), radius};
  }
  return std::nullopt;
}

inline TraceResult continuation_loop(const RhoField& field, std::vector<ContourPoint> points,
                                     std::optional<ParamPoint> prev, ParamPoint last,
                                     double radius, std::size_t next_index,
                                     const TraceConfig& cfg, const Enricher& enrich,
                                     const PointSink& sink) {
  TraceResult result;
  result.points = std::move(points);
  while (next_index < cfg.max_points) {
    double dir = prev ? std::atan2(last.M2 - prev->M2, last.M1 - prev->M1)
                      : cfg.initial_direction;
    auto step = continuation_step(field, last, dir, radius, cfg);
    if (!step) {
      result.reason = TraceStop::breakdown;
      return result;
    }
    ContourPoint cp;
    cp.index = next_index++;
    cp.point = step->point;
    cp.rho = step->rho;
    cp.residual = step->residual;
    cp.radius_used = step->radius_used;
    if (enrich) {
      try {
        enrich(cp);
      } catch (const error&) {
        cp.diag = ContourDiagnostics{};  // leave the point, mark diagnostics missing
      }
    }
    if (sink) sink(cp);
    result.points.push_back(cp);
    prev = last;
    last = step->point;
  }
  result.reason = TraceStop::budget;
  return result;
}

}  // namespace detail

// Traces the contour {rho = target} starting from a segment that crosses it.
// The segment is solved by False Position for the first point; from there the
// contour is continued by circle stepping. Returns all accepted points and why
// the trace stopped. `sink` sees each point as soon as it is accepted, so
// callers can persist progress incrementally.
inline TraceResult trace_contour(const RhoField& field, const ParamPoint& seg_a,
                                 const ParamPoint& seg_b, const TraceConfig& cfg,
                                 const Enricher& enrich = nullptr,
                                 const PointSink& sink = nullptr) {
  auto fseg = [&](double t) { return require_value(field(lerp(seg_a, seg_b, t))) - cfg.target; };
  FpmResult res = fpm_solve(fseg, 0.0, 1.0, cfg.fpm);
  if (std::fabs(res.froot) > cfg.accept_tol)
    throw error(errc::non_convergence, "seed segment solve missed the accept tolerance",
                res.root);

  ContourPoint p0;
  p0.index = 0;
  p0.point = lerp(seg_a, seg_b, res.root);
  p0.rho = res.froot + cfg.target;
  p0.residual = std::fabs(res.froot);
  p0.radius_used = cfg.r0;
  if (enrich) {
    try {
      enrich(p0);
    } catch (const error&) {
      p0.diag = ContourDiagnostics{};
    }
  }
  if (sink) sink(p0);

  std::vector<ContourPoint> points{p0};
  return detail::continuation_loop(field, std::move(points), std::nullopt, p0.point,
                                   cfg.r0, 1, cfg, enrich, sink);
}

// Continues a previous trace from its final point, the one before it (for the
// march direction; absent on a one-point trace, which falls back to the
// configured initial direction) and the radius in force; used to resume from a
// persisted contour file.
inline TraceResult trace_resume(const RhoField& field, std::optional<ParamPoint> prev,
                                const ParamPoint& last, double radius,
                                std::size_t next_index, const TraceConfig& cfg,
                                const Enricher& enrich = nullptr,
                                const PointSink& sink = nullptr) {
  return detail::continuation_loop(field, {}, prev, last, radius, next_index, cfg, enrich,
                                   sink);
}

// Fills in exponents, minimal bundle angles, and the reducibility flag for each
// traced point. Failures leave the point with empty diagnostics.
inline void analyze_contour(std::vector<ContourPoint>& points, const Enricher& enrich) {
  for (ContourPoint& cp : points) {
    try {
      enrich(cp);
    } catch (const error&) {
      cp.diag = ContourDiagnostics{};
    }
  }
}

// The standard enrichment: find the attractor at the point, run the tangent
// analysis over it, report sorted exponents and per-pair minimal angles (the
// (1,2) angle reads 0 when the normal exponents are not separated).
inline Enricher map_enricher(double B, RhoEvalConfig eval_cfg = {},
                             TangentConfig tangent_cfg = {}) {
  return [B, eval_cfg, tangent_cfg](ContourPoint& cp) {
    MapParams p{B, cp.point.M1, cp.point.M2};
    const std::vector<State> seeds =
        eval_cfg.seeds.empty() ? seed_lattice() : eval_cfg.seeds;
    std::size_t need = tangent_cfg.N1 + tangent_cfg.N2 + tangent_cfg.N3;
    for (const State& seed : seeds) {
      PeriodClass cls = classify_attractor(p, seed, eval_cfg.classify);
      if (cls.kind != PeriodClass::Kind::Aperiodic) continue;
      auto orbit = iterate_orbit(p, seed, eval_cfg.n_transient, need);
      if (!orbit) continue;
      TangentAnalysis ta = tangent_analysis(*orbit, tangent_cfg);
      cp.diag.lambda[0] = ta.lyapunov.lambda[0];
      cp.diag.lambda[1] = ta.lyapunov.lambda[1];
      cp.diag.lambda[2] = ta.lyapunov.lambda[2];
      cp.diag.ang01 = ta.angles.min01;
      cp.diag.ang02 = ta.angles.min02;
      cp.diag.ang12 = ta.reported_min12;
      cp.diag.reducible = ta.lyapunov.reducible;
      cp.diag.enriched = true;
      return;
    }
    fail(errc::no_attractor, "no aperiodic attractor found for contour diagnostics");
  };
}

}  // namespace invcirc
