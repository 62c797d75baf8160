#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Eigenvalues>

#include "invcirc/errors.hpp"
#include "invcirc/geometry.hpp"

namespace invcirc {

// Parameters of the cubic-family member F(x,y,z) = (y, z, B*x + M1 + M2*y - z^2).
// B is the (constant) Jacobian determinant; |B| < 1 means the map contracts volume.
struct MapParams {
  double B = 0.5;
  double M1 = 0.0;
  double M2 = 0.0;
};

inline bool dissipative(const MapParams& p) { return std::fabs(p.B) < 1.0; }

// Orbits whose points pass this norm are treated as escaped to infinity; the
// quadratic term then grows doubly exponentially, so the cutoff is not delicate.
inline constexpr double kEscapeNorm = 1e6;

inline void require_invertible(const MapParams& p) {
  if (p.B == 0.0) fail(errc::singular_jacobian, "B = 0: map family is not invertible");
}

inline State apply(const MapParams& p, const State& s) {
  State r{s.y, s.z, p.B * s.x + p.M1 + p.M2 * s.y - s.z * s.z};
  if (!all_finite(r)) fail(errc::overflow, "map image is not finite");
  return r;
}

inline State apply_inverse(const MapParams& p, const State& s) {
  require_invertible(p);
  State r{(s.z - p.M1 - p.M2 * s.x + s.y * s.y) / p.B, s.x, s.y};
  if (!all_finite(r)) fail(errc::overflow, "inverse image is not finite");
  return r;
}

inline Mat3 jacobian(const MapParams& p, const State& s) {
  Mat3 J;
  J(0, 1) = 1.0;
  J(1, 2) = 1.0;
  J(2, 0) = p.B;
  J(2, 1) = p.M2;
  J(2, 2) = -2.0 * s.z;
  return J;
}

// Solve jacobian(p,s) * w = v. The first two rows read off w.y and w.z, the
// third gives w.x; this is exact up to the single division by B.
inline Vec3 solve_jacobian(const MapParams& p, const State& s, const Vec3& v) {
  require_invertible(p);
  double wy = v.x;
  double wz = v.y;
  double wx = (v.z - p.M2 * wy + 2.0 * s.z * wz) / p.B;
  return {wx, wy, wz};
}

// Fixed points lie on the diagonal: (t,t,t) with t^2 + (1 - B - M2) t - M1 = 0.
// Returns 0 or 2 states (a double root appears twice), sorted by t.
inline std::vector<State> fixed_points(const MapParams& p) {
  double b = 1.0 - p.B - p.M2;
  double c = -p.M1;
  double disc = b * b - 4.0 * c;
  if (disc < 0.0) return {};
  double sq = std::sqrt(disc);
  // Citardauq on the small root to dodge cancellation when |b| ~ sq.
  double q = -0.5 * (b + std::copysign(sq, b));
  double t1 = q;
  double t2 = (q != 0.0) ? c / q : 0.0;
  if (t1 > t2) std::swap(t1, t2);
  return {State{t1, t1, t1}, State{t2, t2, t2}};
}

// Multipliers at a fixed point (t,t,t): roots of lambda^3 + 2t lambda^2 - M2 lambda - B,
// computed as eigenvalues of the companion matrix [[0,0,B],[1,0,M2],[0,1,-2t]].
// Sorted by modulus descending (ties by real part, then imaginary part).
inline std::vector<std::complex<double>> fixed_point_multipliers(const MapParams& p,
                                                                 const State& s,
                                                                 double tol = 1e-8) {
  State img = apply(p, s);
  if (norm(img - s) >= tol)
    fail(errc::not_a_fixed_point, "multipliers requested at a non-fixed point");
  double t = s.z;
  Eigen::Matrix3d C;
  C << 0.0, 0.0, p.B, 1.0, 0.0, p.M2, 0.0, 1.0, -2.0 * t;
  Eigen::EigenSolver<Eigen::Matrix3d> es(C, /*computeEigenvectors=*/false);
  std::vector<std::complex<double>> mults{es.eigenvalues()(0), es.eigenvalues()(1),
                                          es.eigenvalues()(2)};
  std::sort(mults.begin(), mults.end(), [](const auto& a, const auto& b) {
    double ma = std::abs(a), mb = std::abs(b);
    if (ma != mb) return ma > mb;
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() < b.imag();
  });
  return mults;
}

// Phase of the unit-modulus complex multiplier pair when the fixed point sits on
// the bifurcation locus: 2 cos(phi) = -(M2+1)/B.
inline double neimark_sacker_phase(const MapParams& p) {
  require_invertible(p);
  double arg = -(p.M2 + 1.0) / (2.0 * p.B);
  if (!(std::fabs(arg) < 1.0))
    fail(errc::no_complex_pair, "no complex multiplier pair: |(M2+1)/(2B)| >= 1");
  return std::acos(arg);
}

}  // namespace invcirc
