#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <vector>

#include <Eigen/Eigenvalues>

#include "invcirc/errors.hpp"
#include "invcirc/orbit.hpp"
#include "invcirc/wba.hpp"

namespace invcirc {

// Fractional part in [0,1). The guard handles values that round up to 1.0.
inline double frac(double x) {
  double f = x - std::floor(x);
  return f >= 1.0 ? 0.0 : f;
}

// Orientation of the planar coordinates produced by project_orbit. +1 makes the
// frame (e1, e2, normal) right-handed with the canonically signed normal, under
// which the map family's invariant circles near the bifurcation regime measure
// rotation numbers in (1/2, 1), matching the golden-mean targets used throughout.
inline constexpr double kPlanarHandedness = 1.0;

struct PlanarOrbit {
  std::vector<Vec2> points;   // coordinates in the (e1, e2) frame, centroid at origin
  Vec2 center{0.0, 0.0};      // the angle origin P
  Vec3 e1, e2, normal;        // orthonormal projection frame
  Vec3 origin3;               // centroid of the source orbit
  double min_dist_to_center = 0.0;
};

struct DelayEmbedding {
  int L = 0;
  std::size_t count = 0;       // number of embedded points
  std::vector<double> data;    // count rows of 2L coordinates

  std::size_t dim() const { return 2 * static_cast<std::size_t>(L); }
  const double* point(std::size_t i) const { return data.data() + i * dim(); }
};

struct UnwrappedDeltas {
  std::vector<double> raw;        // in [0,1)
  std::vector<double> unwrapped;  // raw[k] + offsets[k]
  std::vector<long> offsets;
  double max_nn_dist = 0.0;       // largest embedding-space gap the unwrap relied on
};

struct RotationDiagnostics {
  double max_nn_dist = 0.0;
  double delta_spread = 0.0;      // max - min of unwrapped deltas; >= 1 flags a bad lift
  double min_dist_to_center = 0.0;
};

struct RotationResult {
  double rho = 0.0;               // in [0,1)
  int winding_assumed = 1;
  RotationDiagnostics diagnostics;
};

// Projects the orbit onto the plane of its two leading principal directions,
// centered on the centroid. The angle origin P is the centroid itself (origin
// of the planar frame): for a closed curve it is typically enclosed, giving
// winding number 1. Eigenvector signs are fixed canonically (largest-magnitude
// component positive) and e2 completes the frame, so the planar orientation is
// reproducible and independent of the eigensolver's sign choices.
inline PlanarOrbit project_orbit(const Orbit& orbit) {
  const auto& pts = orbit.points;
  std::size_t n = pts.size();
  if (n < 10) fail(errc::config, "project_orbit needs at least 10 points");

  Vec3 mean{0, 0, 0};
  for (const State& s : pts) mean += s;
  mean *= 1.0 / static_cast<double>(n);

  double cxx = 0, cxy = 0, cxz = 0, cyy = 0, cyz = 0, czz = 0;
  for (const State& s : pts) {
    Vec3 d = s - mean;
    cxx += d.x * d.x;
    cxy += d.x * d.y;
    cxz += d.x * d.z;
    cyy += d.y * d.y;
    cyz += d.y * d.z;
    czz += d.z * d.z;
  }
  Eigen::Matrix3d cov;
  cov << cxx, cxy, cxz, cxy, cyy, cyz, cxz, cyz, czz;
  cov /= static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  auto evals = es.eigenvalues();   // ascending
  auto evecs = es.eigenvectors();
  if (evals(2) <= 1e-20 || evals(1) <= 1e-12 * evals(2))
    fail(errc::degenerate_projection, "orbit has no planar spread (point or line)");

  auto canonical = [](Eigen::Vector3d v) {
    int imax = 0;
    for (int i = 1; i < 3; ++i)
      if (std::fabs(v(i)) > std::fabs(v(imax))) imax = i;
    if (v(imax) < 0.0) v = -v;
    return Vec3{v(0), v(1), v(2)};
  };

  PlanarOrbit po;
  po.origin3 = mean;
  po.e1 = canonical(evecs.col(2));       // leading principal direction
  po.normal = canonical(evecs.col(0));   // least-variance direction
  po.e2 = kPlanarHandedness * cross(po.normal, po.e1);

  po.points.resize(n);
  double min_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 d = pts[i] - mean;
    po.points[i] = {dot(d, po.e1), dot(d, po.e2)};
    double d2 = po.points[i].x * po.points[i].x + po.points[i].y * po.points[i].y;
    min_d2 = std::min(min_d2, d2);
  }
  po.min_dist_to_center = std::sqrt(min_d2);
  return po;
}

// Per-step angle advances about P, reduced to [0,1) turns.
inline std::vector<double> raw_deltas(const PlanarOrbit& po) {
  const auto& pts = po.points;
  if (pts.size() < 2) fail(errc::sequence_too_short, "raw_deltas needs >= 2 points");
  std::vector<double> deltas(pts.size() - 1);
  auto angle = [&](const Vec2& q) {
    double dx = q.x - po.center.x, dy = q.y - po.center.y;
    if (dx == 0.0 && dy == 0.0)
      fail(errc::undefined_angle, "orbit point coincides with the angle origin P");
    return std::atan2(dy, dx);
  };
  double prev = angle(pts[0]);
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    double next = angle(pts[k + 1]);
    deltas[k] = frac((next - prev) / kTwoPi);
    prev = next;
  }
  return deltas;
}

// Delay-coordinate embedding: row n is (gamma_n, ..., gamma_{n+L-1}) flattened.
// One extra delay beyond the minimum keeps self-intersecting projections apart.
inline DelayEmbedding delay_embed(const PlanarOrbit& po, int L = 3) {
  if (L < 2) fail(errc::config, "delay_embed needs L >= 2");
  std::size_t n = po.points.size();
  if (n <= static_cast<std::size_t>(L))
    fail(errc::sequence_too_short, "delay_embed needs more points than delays");
  DelayEmbedding emb;
  emb.L = L;
  emb.count = n - static_cast<std::size_t>(L) + 1;
  emb.data.resize(emb.count * emb.dim());
  for (std::size_t i = 0; i < emb.count; ++i) {
    double* row = emb.data.data() + i * emb.dim();
    for (int j = 0; j < L; ++j) {
      row[2 * j] = po.points[i + j].x;
      row[2 * j + 1] = po.points[i + j].y;
    }
  }
  return emb;
}

namespace detail {

// Exact nearest-neighbor search among previously inserted embedded points,
// accelerated by a uniform hash grid over the first two coordinates (the
// planar point itself). Cells are swept in Chebyshev rings around the query;
// once the ring radius R satisfies best <= R*h, no unvisited point can be
// closer, because its first-two-coordinate distance alone already exceeds R*h.
// Hash aliasing between distant cells only adds candidates, never hides any,
// so the result is exact for any cell size.
//
// The cell size is tuned for the final point density, so while only a few
// points have been inserted the nearest one can be many rings away and the
// sweep would crawl; below a fixed count a direct scan is cheaper and the
// queries switch to the grid only once it has filled in.
class NearestPrior {
 public:
  explicit NearestPrior(const DelayEmbedding& emb) : emb_(emb) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (std::size_t i = 0; i < emb.count; ++i) {
      const double* p = emb.point(i);
      xmin = std::min(xmin, p[0]);
      xmax = std::max(xmax, p[0]);
      ymin = std::min(ymin, p[1]);
      ymax = std::max(ymax, p[1]);
    }
    x0_ = xmin;
    y0_ = ymin;
    double bw = xmax - xmin, bh = ymax - ymin;
    // ~4 curve-neighbor spacings per cell, with the curve length estimated by
    // the bounding-box perimeter.
    h_ = 8.0 * (bw + bh) / static_cast<double>(std::max<std::size_t>(emb.count, 1));
    if (!(h_ > 0.0) || !std::isfinite(h_)) h_ = 1.0;
    max_ring_ = static_cast<long>(std::max(bw, bh) / h_) + 2;
  }

  // Index of the nearest inserted point (ties -> smallest index).
  std::size_t query(std::size_t k, double& dist_out) const {
    const double* q = emb_.point(k);
    std::size_t best_j = std::numeric_limits<std::size_t>::max();
    double best_d2 = std::numeric_limits<double>::infinity();

    if (n_inserted_ <= kDirectScanLimit) {
      for (std::uint32_t j : inserted_) {
        double d2 = dist2(q, emb_.point(j));
        if (d2 < best_d2 || (d2 == best_d2 && j < best_j)) {
          best_d2 = d2;
          best_j = j;
        }
      }
      dist_out = std::sqrt(best_d2);
      return best_j;
    }

    long qx = cell_of(q[0], x0_);
    long qy = cell_of(q[1], y0_);

    auto scan_cell = [&](long cx, long cy) {
      auto it = grid_.find(key(cx, cy));
      if (it == grid_.end()) return;
      for (std::uint32_t j : it->second) {
        double d2 = dist2(q, emb_.point(j));
        if (d2 < best_d2 || (d2 == best_d2 && j < best_j)) {
          best_d2 = d2;
          best_j = j;
        }
      }
    };

    for (long R = 0;; ++R) {
      if (R == 0) {
        scan_cell(qx, qy);
      } else {
        for (long dx = -R; dx <= R; ++dx) {
          scan_cell(qx + dx, qy - R);
          scan_cell(qx + dx, qy + R);
        }
        for (long dy = -R + 1; dy <= R - 1; ++dy) {
          scan_cell(qx - R, qy + dy);
          scan_cell(qx + R, qy + dy);
        }
      }
      bool found = best_j != std::numeric_limits<std::size_t>::max();
      double ring_reach = static_cast<double>(R) * h_;
      if (found && best_d2 <= ring_reach * ring_reach) break;
      if (found && R > max_ring_) break;
      if (!found && R > max_ring_) break;  // cannot happen with >= 1 insertion
    }
    dist_out = std::sqrt(best_d2);
    return best_j;
  }

  void insert(std::size_t k) {
    const double* p = emb_.point(k);
    grid_[key(cell_of(p[0], x0_), cell_of(p[1], y0_))].push_back(
        static_cast<std::uint32_t>(k));
    ++n_inserted_;
    if (inserted_.size() < kDirectScanLimit)
      inserted_.push_back(static_cast<std::uint32_t>(k));
  }

 private:
  long cell_of(double v, double origin) const {
    return static_cast<long>(std::floor((v - origin) / h_));
  }
  static std::uint64_t key(long cx, long cy) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(cx)) << 32) |
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(cy));
  }
  double dist2(const double* a, const double* b) const {
    double s = 0.0;
    for (std::size_t i = 0; i < emb_.dim(); ++i) {
      double d = a[i] - b[i];
      s += d * d;
    }
    return s;
  }

  static constexpr std::size_t kDirectScanLimit = 2048;

  const DelayEmbedding& emb_;
  double x0_ = 0.0, y0_ = 0.0, h_ = 1.0;
  long max_ring_ = 0;
  std::size_t n_inserted_ = 0;
  std::vector<std::uint32_t> inserted_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> grid_;
};

}  // namespace detail

// Lifts the wrapped deltas to the real line. Index k borrows the lift of its
// nearest already-processed embedded point: on the circle, nearby points have
// nearby true deltas, so the integer offset is the one bringing raw[k] within
// 1/2 of the neighbor's lifted value. A result landing on the half-integer
// boundary is ambiguous and rejected rather than guessed.
inline UnwrappedDeltas unwrap_deltas(const std::vector<double>& raw,
                                     const DelayEmbedding& emb, long root_offset = 0) {
  if (raw.empty()) fail(errc::sequence_too_short, "unwrap_deltas: empty delta sequence");
  if (emb.count < raw.size())
    fail(errc::sequence_too_short, "unwrap_deltas: embedding does not cover all deltas");

  UnwrappedDeltas out;
  out.raw = raw;
  out.unwrapped.resize(raw.size());
  out.offsets.resize(raw.size());

  detail::NearestPrior nn(emb);
  out.offsets[0] = root_offset;
  out.unwrapped[0] = raw[0] + static_cast<double>(root_offset);
  nn.insert(0);

  for (std::size_t k = 1; k < raw.size(); ++k) {
    double dist = 0.0;
    std::size_t m = nn.query(k, dist);
    out.max_nn_dist = std::max(out.max_nn_dist, dist);
    double target = out.unwrapped[m] - raw[k];
    double n_k = std::round(target);
    if (std::fabs(target - n_k) >= 0.5 - 1e-12)
      fail(errc::ambiguous_unwrap,
           "unwrap tie at index " + std::to_string(k) + ": offset is half-integral");
    out.offsets[k] = static_cast<long>(n_k);
    out.unwrapped[k] = raw[k] + n_k;
    nn.insert(k);
  }
  return out;
}

struct RotationConfig {
  int L = 3;
};

// Full pipeline: project, form deltas, embed, unwrap, weighted-average, reduce
// mod 1. Assumes the projected curve winds once about P; the delta spread
// diagnostic flags violations (spread >= 1) for the caller to act on.
inline RotationResult rotation_number(const Orbit& orbit, const RotationConfig& cfg = {}) {
  PlanarOrbit po = project_orbit(orbit);
  std::vector<double> raw = raw_deltas(po);
  DelayEmbedding emb = delay_embed(po, cfg.L);
  raw.resize(emb.count);  // keep only deltas whose index has an embedded point
  UnwrappedDeltas uw = unwrap_deltas(raw, emb);

  double wb = weighted_average(uw.unwrapped);

  RotationResult res;
  res.rho = frac(wb);
  res.winding_assumed = 1;
  res.diagnostics.max_nn_dist = uw.max_nn_dist;
  auto [mn, mx] = std::minmax_element(uw.unwrapped.begin(), uw.unwrapped.end());
  res.diagnostics.delta_spread = *mx - *mn;
  res.diagnostics.min_dist_to_center = po.min_dist_to_center;
  return res;
}

struct ConjugacySample {
  double theta = 0.0;
  State state;
};

// Pairs (frac(k*rho), x_k) sorted by angle: the sampled conjugacy between the
// rigid rotation and the dynamics on the circle.
inline std::vector<ConjugacySample> build_conjugacy(const Orbit& orbit, double rho) {
  if (!(rho > 0.0 && rho < 1.0)) fail(errc::config, "build_conjugacy needs rho in (0,1)");
  std::vector<ConjugacySample> samples(orbit.points.size());
  for (std::size_t k = 0; k < orbit.points.size(); ++k)
    samples[k] = {frac(static_cast<double>(k) * rho), orbit.points[k]};
  std::stable_sort(samples.begin(), samples.end(),
                   [](const ConjugacySample& a, const ConjugacySample& b) {
                     return a.theta < b.theta;
                   });
  return samples;
}

}  // namespace invcirc
