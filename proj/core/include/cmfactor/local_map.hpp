#pragma once

// Per-asset chaotic return map.
//
// One asset's daily return r evolves by a conjugated Bernoulli shift:
//
//   u  = h(r)                    probability-integral transform
//   u' = u/delta - floor(u/delta)  Bernoulli (sawtooth) shift with slope 1/delta
//   r' = h^{-1}(u')              map back to return space
//
// where h is the CDF of a hyperbolic-secant density
//
//   rho(r) = (gamma / pi) * sech(gamma * (r - r0)),
//
// i.e. h(r) = 1/2 + (1/pi) * atan(sinh(gamma * (r - r0))).  Because the shift
// preserves the uniform distribution on (0, 1), the sech density is the
// invariant density of the composite map: iterates look like heavy-tailed
// returns (excess kurtosis 2) while being fully deterministic.

namespace cmfactor {

struct LocalMapParams {
  double gamma = 60.0;  // inverse scale of the sech density
  double r0 = 0.001;    // location (mean return)
  double delta = 0.011; // Bernoulli slope parameter, in (0, 1)

  // Throws std::invalid_argument when a field is out of range.
  void validate() const;

  double mean() const noexcept { return r0; }
  // Variance of the invariant density: pi^2 / (4 gamma^2).
  double variance() const noexcept;
  // Excess kurtosis of the invariant density is exactly 2, independent of
  // gamma and r0.
  static constexpr double k_excess_kurtosis = 2.0;
};

// Latent uniform variables are kept strictly inside (0, 1) by clamping to
// [k_uniform_floor, 1 - k_uniform_floor] before inversion.  The clamp bounds
// the reachable return range to |r - r0| <= asinh(tan(pi*(1/2 - 1e-15)))/gamma
// (about 34.1/gamma), so orbits never diverge.
inline constexpr double k_uniform_floor = 1e-15;

// Invariant density rho(r).
double sech_pdf(double r, const LocalMapParams& params) noexcept;

// CDF h(r); maps the real line onto (0, 1).  For |gamma*(r - r0)| beyond
// roughly 37 the result rounds to exactly 0.0 or 1.0 in double precision;
// clamp_uniform restores a usable interior value.
double forward_transform(double r, const LocalMapParams& params) noexcept;

// Inverse CDF h^{-1}(u).  Throws std::domain_error unless u lies strictly
// inside (0, 1).
double inverse_transform(double u, const LocalMapParams& params);

// Sawtooth shift u -> u/delta mod 1.  Expects u in [0, 1).
double bernoulli_step(double u, const LocalMapParams& params) noexcept;

// Clamps u into [k_uniform_floor, 1 - k_uniform_floor].
double clamp_uniform(double u) noexcept;

// One full iteration r -> h^{-1}(shift(h(r))), with the latent variable
// clamped on both sides of the shift so the inversion always has a valid
// argument.
double local_map_step(double r, const LocalMapParams& params);

}  // namespace cmfactor
