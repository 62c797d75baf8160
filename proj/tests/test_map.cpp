#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "invcirc/map.hpp"
#include "invcirc/rng.hpp"
#include "support/oracles.hpp"

using namespace invcirc;

namespace {

double det3(const Mat3& m) {
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
         m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

State random_state(SplitMix64& rng, double lo, double hi) {
  return {rng.next_in(lo, hi), rng.next_in(lo, hi), rng.next_in(lo, hi)};
}

}  // namespace

TEST_CASE("apply evaluates the defining formula", "[map]") {
  CHECK(norm(apply({0.5, 0, 0}, {0, 0, 0}) - State{0, 0, 0}) == 0.0);
  State r = apply({0.5, 1.0, 0.2}, {1, 2, 3});
  CHECK(r.x == 2.0);
  CHECK(r.y == 3.0);
  CHECK(r.z == Catch::Approx(-7.1).margin(1e-15));
  CHECK(norm(apply({0.5, 0, 0}, {1, 0, 0}) - State{0, 0, 0.5}) == 0.0);
}

TEST_CASE("apply rejects non-finite images", "[map]") {
  State huge{1e300, 1e300, 1e300};
  try {
    apply({0.5, 0, 0}, huge);
    FAIL("expected overflow error");
  } catch (const error& e) {
    CHECK(e.code() == errc::overflow);
  }
}

TEST_CASE("apply_inverse inverts apply", "[map]") {
  State s = apply_inverse({0.5, 1.0, 0.2}, {2, 3, -7.1});
  CHECK(norm(s - State{1, 2, 3}) < 1e-14);
  CHECK(norm(apply_inverse({0.5, 0, 0}, {0, 0, 0})) == 0.0);

  MapParams p{0.5, 0.31, -0.42};
  SplitMix64 rng(42);
  for (int i = 0; i < 1000; ++i) {
    State q = random_state(rng, -2.0, 2.0);
    CHECK(norm(apply_inverse(p, apply(p, q)) - q) < 1e-12 * std::max(1.0, norm(q)));
    CHECK(norm(apply(p, apply_inverse(p, q)) - q) < 1e-12 * std::max(1.0, norm(q)));
  }
}

TEST_CASE("apply_inverse needs B != 0", "[map]") {
  try {
    apply_inverse({0.0, 0, 0}, {1, 1, 1});
    FAIL("expected singularity error");
  } catch (const error& e) {
    CHECK(e.code() == errc::singular_jacobian);
  }
}

TEST_CASE("jacobian has the closed-form rows and constant determinant", "[map]") {
  MapParams p{0.5, 0.2, -0.7};
  Mat3 J = jacobian(p, {3, 1, 0});
  CHECK(J(0, 0) == 0.0);
  CHECK(J(0, 1) == 1.0);
  CHECK(J(0, 2) == 0.0);
  CHECK(J(1, 0) == 0.0);
  CHECK(J(1, 1) == 0.0);
  CHECK(J(1, 2) == 1.0);
  CHECK(J(2, 0) == p.B);
  CHECK(J(2, 1) == p.M2);
  CHECK(J(2, 2) == 0.0);

  SplitMix64 rng(7);
  for (int i = 0; i < 100; ++i) {
    State s = random_state(rng, -5.0, 5.0);
    CHECK(std::fabs(det3(jacobian(p, s)) - p.B) < 1e-13);
  }
}

TEST_CASE("jacobian matches central finite differences", "[map]") {
  MapParams p{0.5, 0.4, -0.3};
  SplitMix64 rng(11);
  for (int i = 0; i < 50; ++i) {
    State s = random_state(rng, -2.0, 2.0);
    Mat3 J = jacobian(p, s);
    Mat3 Jfd = oracles::fd_jacobian(p, s);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        double scale = std::max(1.0, std::fabs(J(r, c)));
        CHECK(std::fabs(J(r, c) - Jfd(r, c)) / scale < 1e-6);
      }
  }
}

TEST_CASE("solve_jacobian solves the explicit system", "[map]") {
  MapParams p{0.5, 0, 0};
  Vec3 w = solve_jacobian(p, {0, 0, 0}, {0, 0, 1});
  CHECK(norm(w - Vec3{2, 0, 0}) == 0.0);

  MapParams q{0.37, -0.2, 0.9};
  SplitMix64 rng(3);
  for (int i = 0; i < 200; ++i) {
    State s = random_state(rng, -3.0, 3.0);
    Vec3 u = random_state(rng, -1.0, 1.0);
    Vec3 v = jacobian(q, s) * u;
    CHECK(norm(solve_jacobian(q, s, v) - u) < 1e-12 * std::max(1.0, norm(u)));

    Vec3 rhs = random_state(rng, -1.0, 1.0);
    Vec3 sol = solve_jacobian(q, s, rhs);
    CHECK(norm(jacobian(q, s) * sol - rhs) < 1e-12 * std::max(1e-30, norm(rhs)));
  }

  try {
    solve_jacobian({0.0, 0, 0}, {0, 0, 0}, {1, 0, 0});
    FAIL("expected singularity error");
  } catch (const error& e) {
    CHECK(e.code() == errc::singular_jacobian);
  }
}

TEST_CASE("fixed_points finds the diagonal roots", "[map]") {
  auto fps = fixed_points({0.5, 0, 0});
  REQUIRE(fps.size() == 2);
  CHECK(fps[0].x == Catch::Approx(-0.5).margin(1e-15));
  CHECK(fps[1].x == Catch::Approx(0.0).margin(1e-15));

  auto dbl = fixed_points({0.5, 0, 0.5});  // 1 - B - M2 = 0 and M1 = 0: double root
  REQUIRE(dbl.size() == 2);
  CHECK(dbl[0].x == 0.0);
  CHECK(dbl[1].x == 0.0);

  MapParams p{0.5, 0.7, -0.2};
  for (const State& s : fixed_points(p)) CHECK(norm(apply(p, s) - s) < 1e-12);

  // negative discriminant: no real fixed points
  CHECK(fixed_points({0.5, -10.0, 0.5}).empty());
}

TEST_CASE("fixed_point_multipliers match an independent root finder", "[map]") {
  MapParams p{0.5, 0, 0};
  auto mults = fixed_point_multipliers(p, {0, 0, 0});
  REQUIRE(mults.size() == 3);
  for (const auto& m : mults) CHECK(std::abs(std::abs(m) - std::cbrt(0.5)) < 1e-12);

  std::complex<double> prod = mults[0] * mults[1] * mults[2];
  CHECK(std::abs(prod - std::complex<double>(p.B, 0)) < 1e-10);

  // general parameter: compare against Durand-Kerner on the cubic
  MapParams q{0.5, 0.7, -0.2};
  for (const State& s : fixed_points(q)) {
    double t = s.z;
    auto got = fixed_point_multipliers(q, s);
    auto want = oracles::polynomial_roots({-q.B, -q.M2, 2.0 * t});
    auto by_re_im = [](const std::complex<double>& a, const std::complex<double>& b) {
      if (a.real() != b.real()) return a.real() < b.real();
      return a.imag() < b.imag();
    };
    std::sort(got.begin(), got.end(), by_re_im);
    std::sort(want.begin(), want.end(), by_re_im);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(got[i] - want[i]) < 1e-10);

    std::complex<double> vieta = got[0] * got[1] * got[2];
    CHECK(std::abs(vieta - std::complex<double>(q.B, 0)) < 1e-10);
  }
}

TEST_CASE("fixed_point_multipliers reject non-fixed points", "[map]") {
  try {
    fixed_point_multipliers({0.5, 0, 0}, {1, 1, 1});
    FAIL("expected precondition error");
  } catch (const error& e) {
    CHECK(e.code() == errc::not_a_fixed_point);
  }
}

TEST_CASE("neimark_sacker_phase", "[map]") {
  CHECK(neimark_sacker_phase({0.5, 0, -1.0}) == Catch::Approx(kPi / 2).margin(1e-15));
  CHECK(neimark_sacker_phase({0.5, 0, -1.5}) == Catch::Approx(kPi / 3).margin(1e-14));
  try {
    neimark_sacker_phase({0.5, 0, 1.0});
    FAIL("expected no-complex-pair error");
  } catch (const error& e) {
    CHECK(e.code() == errc::no_complex_pair);
  }
}
