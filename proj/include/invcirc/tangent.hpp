#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <vector>

#include "invcirc/errors.hpp"
#include "invcirc/map.hpp"
#include "invcirc/orbit.hpp"
#include "invcirc/rng.hpp"
#include "invcirc/wba.hpp"

namespace invcirc {

// A linear cocycle over a finite orbit: apply(k, v) multiplies by the matrix at
// step k, solve(k, v) by its inverse.
template <typename C>
concept Cocycle = requires(const C c, std::size_t k, Vec3 v) {
  { c.apply(k, v) } -> std::convertible_to<Vec3>;
  { c.solve(k, v) } -> std::convertible_to<Vec3>;
  { c.size() } -> std::convertible_to<std::size_t>;
};

// The derivative cocycle of the map family along a stored orbit.
struct MapCocycle {
  const Orbit* orbit;

  Vec3 apply(std::size_t k, const Vec3& v) const {
    return jacobian(orbit->params, orbit->points[k]) * v;
  }
  Vec3 solve(std::size_t k, const Vec3& v) const {
    return solve_jacobian(orbit->params, orbit->points[k], v);
  }
  std::size_t size() const { return orbit->points.size(); }
};

// A constant linear map, for exercising the frame schemes against known spectra.
struct ConstantCocycle {
  Mat3 A;
  Mat3 Ainv;
  std::size_t n = 0;

  ConstantCocycle(const Mat3& m, std::size_t count) : A(m), n(count) {
    double det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
                 m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
                 m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    if (det == 0.0) fail(errc::singular_jacobian, "constant cocycle matrix is singular");
    Ainv(0, 0) = (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) / det;
    Ainv(0, 1) = (m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2)) / det;
    Ainv(0, 2) = (m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1)) / det;
    Ainv(1, 0) = (m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2)) / det;
    Ainv(1, 1) = (m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0)) / det;
    Ainv(1, 2) = (m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2)) / det;
    Ainv(2, 0) = (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0)) / det;
    Ainv(2, 1) = (m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1)) / det;
    Ainv(2, 2) = (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)) / det;
  }

  Vec3 apply(std::size_t, const Vec3& v) const { return A * v; }
  Vec3 solve(std::size_t, const Vec3& v) const { return Ainv * v; }
  std::size_t size() const { return n; }
};

// Orthonormal 2-frames along the orbit: (u, v) propagated forward, (ub, vb)
// propagated backward. Forward frames converge to the two fastest directions,
// backward frames to the two slowest (i.e. ub spans the fastest-contracting one).
struct FrameSeries {
  std::vector<Vec3> u, v;    // forward frame
  std::vector<Vec3> ub, vb;  // backward frame
};

namespace detail {

inline Vec3 safe_normalize(const Vec3& w, const char* what) {
  double n = norm(w);
  if (n < 1e-300) fail(errc::degenerate_cocycle, what);
  return w / n;
}

}  // namespace detail

// u_{k+1} = normalize(A_k u_k); v_{k+1} = normalize of A_k v_k minus its
// component along u_{k+1}.
template <Cocycle C>
void forward_frames(const C& cocycle, FrameSeries& frames, const Vec3& u_init,
                    const Vec3& v_init) {
  std::size_t n = cocycle.size();
  frames.u.resize(n);
  frames.v.resize(n);
  frames.u[0] = detail::safe_normalize(u_init, "forward frame: zero initial u");
  Vec3 v0 = v_init - dot(v_init, frames.u[0]) * frames.u[0];
  frames.v[0] = detail::safe_normalize(v0, "forward frame: dependent initial frame");
  for (std::size_t k = 0; k + 1 < n; ++k) {
    Vec3 iu = cocycle.apply(k, frames.u[k]);
    frames.u[k + 1] = detail::safe_normalize(iu, "forward frame: image of u vanished");
    Vec3 iv = cocycle.apply(k, frames.v[k]);
    iv -= dot(iv, frames.u[k + 1]) * frames.u[k + 1];
    frames.v[k + 1] = detail::safe_normalize(iv, "forward frame: image of v vanished");
  }
}

// Same scheme run backward with the inverse: ub_{k} = normalize(A_k^{-1} ub_{k+1}).
template <Cocycle C>
void backward_frames(const C& cocycle, FrameSeries& frames, const Vec3& u_init,
                     const Vec3& v_init) {
  std::size_t n = cocycle.size();
  frames.ub.resize(n);
  frames.vb.resize(n);
  frames.ub[n - 1] = detail::safe_normalize(u_init, "backward frame: zero initial u");
  Vec3 v0 = v_init - dot(v_init, frames.ub[n - 1]) * frames.ub[n - 1];
  frames.vb[n - 1] = detail::safe_normalize(v0, "backward frame: dependent initial frame");
  for (std::size_t k = n - 1; k > 0; --k) {
    Vec3 iu = cocycle.solve(k - 1, frames.ub[k]);
    frames.ub[k - 1] = detail::safe_normalize(iu, "backward frame: image of u vanished");
    Vec3 iv = cocycle.solve(k - 1, frames.vb[k]);
    iv -= dot(iv, frames.ub[k - 1]) * frames.ub[k - 1];
    frames.vb[k - 1] = detail::safe_normalize(iv, "backward frame: image of v vanished");
  }
}

// Line bundles along a window where both frame passes have converged:
// h0 = tangent direction (fastest forward), h2 = fastest-contracting direction
// (fastest backward), h1 = intersection of span(u,v) with span(ub,vb), computed
// as the cross product of the two plane normals. The conditioning value is that
// cross product's norm before normalization; it vanishes when the planes are
// parallel and the intersection is not a line.
struct BundleSeries {
  std::size_t start = 0;  // orbit index of entry 0
  std::vector<Vec3> h0, h1, h2;
  std::vector<double> conditioning;

  std::size_t count() const { return h0.size(); }
};

inline BundleSeries bundles(const FrameSeries& frames, std::size_t start,
                            std::size_t count) {
  if (start + count > frames.u.size() || count == 0)
    fail(errc::config, "bundles: window outside the frame series");
  BundleSeries bs;
  bs.start = start;
  bs.h0.resize(count);
  bs.h1.resize(count);
  bs.h2.resize(count);
  bs.conditioning.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t k = start + i;
    bs.h0[i] = frames.u[k];
    bs.h2[i] = frames.ub[k];
    Vec3 nf = cross(frames.u[k], frames.v[k]);    // normal of the forward plane
    Vec3 nb = cross(frames.ub[k], frames.vb[k]);  // normal of the backward plane
    Vec3 line = cross(nf, nb);
    double cnd = norm(line);
    bs.conditioning[i] = cnd;
    if (cnd < 1e-12)
      fail(errc::intersection_degenerate,
           "bundles: frame planes parallel at index " + std::to_string(k));
    bs.h1[i] = line / cnd;
    if (i > 0) {
      // keep the exported sections continuous; directions are sign-free
      if (dot(bs.h0[i], bs.h0[i - 1]) < 0.0) bs.h0[i] = -bs.h0[i];
      if (dot(bs.h1[i], bs.h1[i - 1]) < 0.0) bs.h1[i] = -bs.h1[i];
      if (dot(bs.h2[i], bs.h2[i - 1]) < 0.0) bs.h2[i] = -bs.h2[i];
    }
  }
  return bs;
}

// Weighted Birkhoff average of the per-step log growth of a bundle section.
template <Cocycle C>
double lyapunov_exponent(const C& cocycle, const std::vector<Vec3>& section,
                         std::size_t start) {
  if (section.empty()) fail(errc::config, "lyapunov_exponent: empty section");
  if (start + section.size() > cocycle.size())
    fail(errc::config, "lyapunov_exponent: section window outside the cocycle");
  return weighted_average_n(section.size() + 1, [&](std::size_t k) {
    std::size_t i = k - 1;
    return std::log(norm(cocycle.apply(start + i, section[i])));
  });
}

struct AngleSeries {
  std::vector<double> a01, a02, a12;  // radians in [0, pi/2]
  double min01 = 0.0, min02 = 0.0, min12 = 0.0;
};

inline double angle_between_lines(const Vec3& a, const Vec3& b) {
  double c = std::fabs(dot(a, b));
  if (c > 1.0) c = 1.0;
  return std::acos(c);
}

inline AngleSeries min_angles(const BundleSeries& bs) {
  AngleSeries as;
  std::size_t n = bs.count();
  as.a01.resize(n);
  as.a02.resize(n);
  as.a12.resize(n);
  as.min01 = as.min02 = as.min12 = kPi;
  for (std::size_t i = 0; i < n; ++i) {
    as.a01[i] = angle_between_lines(bs.h0[i], bs.h1[i]);
    as.a02[i] = angle_between_lines(bs.h0[i], bs.h2[i]);
    as.a12[i] = angle_between_lines(bs.h1[i], bs.h2[i]);
    as.min01 = std::min(as.min01, as.a01[i]);
    as.min02 = std::min(as.min02, as.a02[i]);
    as.min12 = std::min(as.min12, as.a12[i]);
  }
  return as;
}

// The normal behavior splits into two invariant line bundles only when the two
// normal exponents are genuinely distinct; at coincidence H1 and H2 are not
// separately meaningful. Boundary is excluded: a gap of exactly tol is not enough.
inline bool reducibility_check(double lambda1, double lambda2, double tol) {
  return lambda1 - lambda2 > tol;
}

struct LyapunovResult {
  double lambda[3] = {0, 0, 0};  // sorted descending
  bool reducible = false;
  double coincidence_tol = 0.0;
};

struct TangentConfig {
  std::size_t N1 = 1000;    // frame warmup discarded at the front
  std::size_t N2 = 100000;  // averaging window
  std::size_t N3 = 1000;    // cooldown discarded at the back (backward-frame warmup)
  std::uint64_t seed = 0x1c7b5a2d9e4f3681ull;
  double jitter = 1e-3;     // initial-frame perturbation scale
  double coincidence_tol = 1e-3;
};

struct TangentAnalysis {
  BundleSeries bundle_series;
  AngleSeries angles;
  LyapunovResult lyapunov;
  double exp_h0 = 0.0, exp_h1 = 0.0, exp_h2 = 0.0;  // per-bundle, unsorted
  // min12 with the convention that a non-reducible splitting reports 0
  double reported_min12 = 0.0;
};

// Runs both frame passes over the whole orbit, reconstructs bundles on the
// converged window [N1, N1+N2), and averages the exponents there. Canonical
// initial frames get a small seeded jitter so they never start exactly inside
// a slow invariant subspace, while staying reproducible.
inline TangentAnalysis tangent_analysis(const Orbit& orbit, const TangentConfig& cfg = {}) {
  std::size_t n = orbit.points.size();
  if (cfg.N1 == 0 || cfg.N2 == 0 || cfg.N3 == 0)
    fail(errc::config, "tangent_analysis: N1, N2, N3 must be positive");
  if (n < cfg.N1 + cfg.N2 + cfg.N3)
    fail(errc::config, "tangent_analysis: orbit shorter than N1 + N2 + N3");

  SplitMix64 rng(cfg.seed);
  auto jittered = [&](double x, double y, double z) {
    return Vec3{x + cfg.jitter * (rng.next_double() - 0.5),
                y + cfg.jitter * (rng.next_double() - 0.5),
                z + cfg.jitter * (rng.next_double() - 0.5)};
  };

  MapCocycle cocycle{&orbit};
  FrameSeries frames;
  forward_frames(cocycle, frames, jittered(1, 0, 0), jittered(0, 1, 0));
  backward_frames(cocycle, frames, jittered(0, 0, 1), jittered(0, 1, 0));

  TangentAnalysis ta;
  ta.bundle_series = bundles(frames, cfg.N1, cfg.N2);
  ta.angles = min_angles(ta.bundle_series);

  ta.exp_h0 = lyapunov_exponent(cocycle, ta.bundle_series.h0, cfg.N1);
  ta.exp_h1 = lyapunov_exponent(cocycle, ta.bundle_series.h1, cfg.N1);
  ta.exp_h2 = lyapunov_exponent(cocycle, ta.bundle_series.h2, cfg.N1);

  double l[3] = {ta.exp_h0, ta.exp_h1, ta.exp_h2};
  std::sort(l, l + 3, [](double a, double b) { return a > b; });
  ta.lyapunov.lambda[0] = l[0];
  ta.lyapunov.lambda[1] = l[1];
  ta.lyapunov.lambda[2] = l[2];
  ta.lyapunov.coincidence_tol = cfg.coincidence_tol;
  ta.lyapunov.reducible =
      reducibility_check(ta.lyapunov.lambda[1], ta.lyapunov.lambda[2], cfg.coincidence_tol);
  ta.reported_min12 = ta.lyapunov.reducible ? ta.angles.min12 : 0.0;
  return ta;
}

}  // namespace invcirc
