#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "invcirc/geometry.hpp"
#include "invcirc/orbit.hpp"
#include "invcirc/rotation.hpp"
#include "invcirc/wba.hpp"

namespace invcirc {

// Test-signal generators with exactly known rotation numbers. They emit Orbit
// carriers (params left at defaults) so the rotation pipeline can consume them.
//
// Winding direction matches the planar orientation convention in rotation.hpp
// (kPlanarHandedness): a generator built with rotation number rho must measure
// rho, not 1-rho, through the pipeline.
inline constexpr double kSyntheticWinding = 1.0;

// Unit circle in the xy-plane sampled at theta_k = k * rho.
inline Orbit rigid_rotation_orbit(double rho, std::size_t n, double radius = 1.0) {
  Orbit orbit;
  orbit.points.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    double th = kSyntheticWinding * kTwoPi * frac(static_cast<double>(k) * rho);
    orbit.points.push_back(State{radius * std::cos(th), radius * std::sin(th), 0.0});
  }
  return orbit;
}

// An analytic closed curve, star-shaped about its center (radius stays >= 0.58),
// with genuine z variation, tilted by a fixed rotation and shifted off-origin.
// gamma(theta) with inner dynamics theta -> theta + rho, so the image orbit has
// rotation number exactly rho.
inline State analytic_circle_point(double theta) {
  double a = kTwoPi * theta;
  double r = 1.0 + 0.3 * std::cos(a) + 0.12 * std::sin(2.0 * a);
  double z = 0.4 * std::sin(a) + 0.15 * std::cos(2.0 * a + 0.7);
  Vec3 base{r * std::cos(kSyntheticWinding * a), r * std::sin(kSyntheticWinding * a), z};

  // fixed tilt: rotate 0.35 rad about x, then 0.5 rad about z
  double cb = std::cos(0.35), sb = std::sin(0.35);
  Vec3 rx{base.x, cb * base.y - sb * base.z, sb * base.y + cb * base.z};
  double ca = std::cos(0.5), sa = std::sin(0.5);
  Vec3 rz{ca * rx.x - sa * rx.y, sa * rx.x + ca * rx.y, rx.z};
  return rz + Vec3{0.3, -0.2, 0.15};
}

inline Orbit analytic_circle_orbit(double rho, std::size_t n) {
  Orbit orbit;
  orbit.points.reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    orbit.points.push_back(analytic_circle_point(frac(static_cast<double>(k) * rho)));
  return orbit;
}

// Rotation number of the standard circle map x -> x + omega - K/(2pi) sin(2pi x),
// averaged from lift increments. K in (0,1) gives an invertible map whose
// rotation number is a devil's staircase in omega.
inline double arnold_rotation(double omega, double K = 0.9, std::size_t n = 10000) {
  std::vector<double> increments;
  increments.reserve(n - 1);
  double x = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    double xn = x + omega - K / kTwoPi * std::sin(kTwoPi * x);
    increments.push_back(xn - x);
    x = xn;
  }
  return weighted_average(increments);
}

}  // namespace invcirc
