#pragma once

#include <stdexcept>
#include <string>

namespace invcirc {

// Machine-readable failure categories. The CLI maps these onto exit codes,
// so every throw site picks the code a caller would dispatch on.
enum class errc {
  config,                   // invalid configuration or precondition on counts/tolerances
  overflow,                 // map evaluation produced a non-finite state
  singular_jacobian,        // B = 0, the family is not invertible
  not_a_fixed_point,        // multiplier query at a state that does not satisfy F(s) = s
  no_complex_pair,          // Neimark-Sacker phase undefined, |(M2+1)/(2B)| >= 1
  degenerate_input,         // averaging a series with no usable weights
  degenerate_projection,    // orbit covariance has no plane (point or line)
  undefined_angle,          // projected orbit point coincides with the center P
  sequence_too_short,       // not enough points for the requested delay embedding
  ambiguous_unwrap,         // half-integer tie while unwrapping angle deltas
  degenerate_cocycle,       // tangent image collapsed below representable norm
  intersection_degenerate,  // forward/backward frame planes are parallel
  no_attractor,             // every seed escaped
  periodic_attractor,       // attractor is a fixed point or periodic orbit
  no_bracket,               // no sign change found (seed segment or search circle)
  non_convergence,          // iteration budget exhausted
  io,                       // file read/write failure
};

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  error(errc code, const std::string& what, double payload)
      : std::runtime_error(what), code_(code), payload_(payload) {}

  errc code() const noexcept { return code_; }
  // Best-so-far abscissa for non_convergence; unset otherwise.
  double payload() const noexcept { return payload_; }

 private:
  errc code_;
  double payload_ = 0.0;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw error(code, msg); }

}  // namespace invcirc
