#pragma once

#include <climits>
#include <cstddef>
#include <optional>
#include <vector>

#include "invcirc/errors.hpp"
#include "invcirc/map.hpp"
#include "invcirc/parallel.hpp"

namespace invcirc {

// A stretch of trajectory after the transient has been discarded.
// points[k+1] = apply(params, points[k]) by construction.
struct Orbit {
  MapParams params;
  std::vector<State> points;
  std::size_t n_transient = 0;
  State seed;
};

// Outcome of periodicity classification. Ordering for grid aggregation:
// FixedPoint < Periodic(2) < ... < Aperiodic < Escaped.
struct PeriodClass {
  enum class Kind { FixedPoint, Periodic, Aperiodic, Escaped };

  Kind kind = Kind::Aperiodic;
  int period = 0;  // minimal recurrence period; 1 for FixedPoint, >= 2 for Periodic

  static PeriodClass fixed_point() { return {Kind::FixedPoint, 1}; }
  static PeriodClass periodic(int p) { return {Kind::Periodic, p}; }
  static PeriodClass aperiodic() { return {Kind::Aperiodic, 0}; }
  static PeriodClass escaped() { return {Kind::Escaped, 0}; }

  int rank() const {
    switch (kind) {
      case Kind::FixedPoint: return 1;
      case Kind::Periodic: return period;
      case Kind::Aperiodic: return INT_MAX - 1;
      case Kind::Escaped: return INT_MAX;
    }
    return INT_MAX;
  }

  // Period-map color code: 0 escaped, 1 fixed point, p period, -1 aperiodic.
  int csv_code() const {
    switch (kind) {
      case Kind::FixedPoint: return 1;
      case Kind::Periodic: return period;
      case Kind::Aperiodic: return -1;
      case Kind::Escaped: return 0;
    }
    return 0;
  }

  bool operator==(const PeriodClass& o) const {
    return kind == o.kind && period == o.period;
  }
};

inline bool operator<(const PeriodClass& a, const PeriodClass& b) {
  return a.rank() < b.rank();
}

inline bool escaped_state(const State& s) { return norm2(s) > kEscapeNorm * kEscapeNorm; }

// Iterates the seed, drops n_transient points, keeps the next n_keep.
// Returns nothing if any iterate (the seed included) leaves the escape ball.
inline std::optional<Orbit> iterate_orbit(const MapParams& p, const State& seed,
                                          std::size_t n_transient, std::size_t n_keep) {
  if (n_transient < 1 || n_keep < 1)
    fail(errc::config, "iterate_orbit needs n_transient >= 1 and n_keep >= 1");
  State s = seed;
  for (std::size_t i = 0; i < n_transient; ++i) {
    if (escaped_state(s)) return std::nullopt;
    s = apply(p, s);
  }
  Orbit orbit;
  orbit.params = p;
  orbit.n_transient = n_transient;
  orbit.seed = seed;
  orbit.points.reserve(n_keep);
  for (std::size_t i = 0; i < n_keep; ++i) {
    if (escaped_state(s)) return std::nullopt;
    orbit.points.push_back(s);
    s = apply(p, s);
  }
  return orbit;
}

struct ClassifyConfig {
  std::size_t n_transient = 10000;
  std::size_t n_keep = 10000;
  double eps_per = 1e-6;       // recurrence tolerance
  int p_max = 100;             // largest period searched
  std::size_t window = 200;    // every index in this window must recur
};

// Finds the minimal period p <= p_max with ||x_{k+p} - x_k|| < eps_per for every
// k in a window near the end of the kept orbit. Testing the whole window (not a
// single pair) keeps slowly drifting quasiperiodic orbits out of the periodic bins.
inline PeriodClass classify_attractor(const MapParams& p, const State& seed,
                                      const ClassifyConfig& cfg = {}) {
  if (cfg.p_max < 1 || cfg.eps_per <= 0.0 || cfg.window < 1)
    fail(errc::config, "classify_attractor: p_max >= 1, eps_per > 0, window >= 1");
  if (cfg.n_keep < cfg.window + static_cast<std::size_t>(cfg.p_max) + 1)
    fail(errc::config, "classify_attractor: n_keep too small for window + p_max");
  auto orbit = iterate_orbit(p, seed, cfg.n_transient, cfg.n_keep);
  if (!orbit) return PeriodClass::escaped();

  const auto& pts = orbit->points;
  std::size_t base = cfg.n_keep - cfg.window - static_cast<std::size_t>(cfg.p_max);
  double eps2 = cfg.eps_per * cfg.eps_per;
  for (int period = 1; period <= cfg.p_max; ++period) {
    bool recurs = true;
    for (std::size_t k = base; k < base + cfg.window; ++k) {
      if (norm2(pts[k + period] - pts[k]) >= eps2) {
        recurs = false;
        break;
      }
    }
    if (recurs) return period == 1 ? PeriodClass::fixed_point() : PeriodClass::periodic(period);
  }
  return PeriodClass::aperiodic();
}

// Axis-aligned lattice of n^3 seeds covering [lo, hi]^3.
inline std::vector<State> seed_lattice(int n = 3, double lo = -1.5, double hi = 1.5) {
  std::vector<State> seeds;
  seeds.reserve(static_cast<std::size_t>(n) * n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        auto coord = [&](int idx) {
          return n == 1 ? 0.5 * (lo + hi)
                        : lo + (hi - lo) * static_cast<double>(idx) / (n - 1);
        };
        seeds.push_back(State{coord(i), coord(j), coord(k)});
      }
  return seeds;
}

struct ScanRect {
  double m1_min = 0.0, m1_max = 1.0;
  double m2_min = 0.0, m2_max = 1.0;
};

struct GridCell {
  double m1 = 0.0, m2 = 0.0;
  PeriodClass min_class;
  PeriodClass max_class;
};

struct GridScan {
  ScanRect rect;
  std::size_t nx = 0, ny = 0;
  double B = 0.0;
  std::vector<GridCell> cells;  // row-major, M1 varying fastest
};

// Classifies every seed at every grid vertex and keeps the extremal classes per
// cell (several attractors can coexist, so min and max genuinely differ).
// Cells are farmed out to workers but written by index, so the result is
// bit-identical for any worker count.
inline GridScan scan_grid(double B, const ScanRect& rect, std::size_t nx, std::size_t ny,
                          const std::vector<State>& seeds, const ClassifyConfig& cfg = {},
                          unsigned workers = 1) {
  if (nx < 1 || ny < 1) fail(errc::config, "scan_grid: resolution must be >= 1 per axis");
  if (seeds.empty()) fail(errc::config, "scan_grid: need at least one seed");

  GridScan scan;
  scan.rect = rect;
  scan.nx = nx;
  scan.ny = ny;
  scan.B = B;
  scan.cells.resize(nx * ny);

  auto axis_value = [](double lo, double hi, std::size_t i, std::size_t n) {
    return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  };

  parallel_for_index(nx * ny, workers, [&](std::size_t idx) {
    std::size_t ix = idx % nx;
    std::size_t iy = idx / nx;
    GridCell cell;
    cell.m1 = axis_value(rect.m1_min, rect.m1_max, ix, nx);
    cell.m2 = axis_value(rect.m2_min, rect.m2_max, iy, ny);
    MapParams p{B, cell.m1, cell.m2};
    bool first = true;
    for (const State& seed : seeds) {
      PeriodClass c = classify_attractor(p, seed, cfg);
      if (first) {
        cell.min_class = cell.max_class = c;
        first = false;
      } else {
        if (c < cell.min_class) cell.min_class = c;
        if (cell.max_class < c) cell.max_class = c;
      }
    }
    scan.cells[idx] = cell;
  });
  return scan;
}

}  // namespace invcirc
