#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "invcirc/errors.hpp"

namespace invcirc {

// Smooth bump with support (0,1): all derivatives vanish at the endpoints,
// which is what buys the averages their fast convergence.
inline double bump_weight(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return std::exp(-1.0 / (t * (1.0 - t)));
}

namespace detail {

// Neumaier variant of compensated addition; safe when |x| > |sum|.
inline void comp_add(double& sum, double& comp, double x) {
  double t = sum + x;
  if (std::fabs(sum) >= std::fabs(x))
    comp += (sum - t) + x;
  else
    comp += (x - t) + sum;
  sum = t;
}

}  // namespace detail

// Weighted Birkhoff average of delta(1), ..., delta(n-1) with weights w(k/n).
// Summation runs in index order with compensation so the result is reproducible
// bit-for-bit and stays accurate for n up to 1e7.
template <typename F>
double weighted_average_n(std::size_t n, F&& delta) {
  if (n < 3) fail(errc::degenerate_input, "weighted average needs n >= 3");
  double num = 0.0, num_c = 0.0;
  double den = 0.0, den_c = 0.0;
  double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 1; k < n; ++k) {
    double w = bump_weight(static_cast<double>(k) * inv_n);
    detail::comp_add(num, num_c, w * delta(k));
    detail::comp_add(den, den_c, w);
  }
  return (num + num_c) / (den + den_c);
}

// Values are indexed 1..n-1, so n = size + 1.
inline double weighted_average(const std::vector<double>& values) {
  return weighted_average_n(values.size() + 1,
                            [&](std::size_t k) { return values[k - 1]; });
}

// A series with a known limit, for empirical convergence-rate checks.
struct ProbeSeries {
  std::function<double(std::size_t)> delta;  // delta(k), k >= 1
  double limit = 0.0;
};

inline std::vector<std::pair<std::size_t, double>> convergence_probe(
    const ProbeSeries& series, const std::vector<std::size_t>& n_list) {
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(n_list.size());
  for (std::size_t n : n_list) {
    double wb = weighted_average_n(n, series.delta);
    out.emplace_back(n, std::fabs(wb - series.limit));
  }
  return out;
}

}  // namespace invcirc
