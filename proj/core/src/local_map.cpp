#include "cmfactor/local_map.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cmfactor {

void LocalMapParams::validate() const {
  if (!std::isfinite(gamma) || !(gamma > 0.0)) {
    throw std::invalid_argument("LocalMapParams: gamma must be positive and finite");
  }
  if (!std::isfinite(r0)) {
    throw std::invalid_argument("LocalMapParams: r0 must be finite");
  }
  if (!std::isfinite(delta) || !(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("LocalMapParams: delta must lie strictly inside (0, 1)");
  }
}

double LocalMapParams::variance() const noexcept {
  const double pi = std::numbers::pi;
  return pi * pi / (4.0 * gamma * gamma);
}

double sech_pdf(double r, const LocalMapParams& params) noexcept {
  // cosh overflows to +inf for |x| beyond ~710; the ratio then underflows to
  // zero, which is the correct tail value.
  const double x = params.gamma * (r - params.r0);
  return params.gamma / (std::numbers::pi * std::cosh(x));
}

double forward_transform(double r, const LocalMapParams& params) noexcept {
  const double x = params.gamma * (r - params.r0);
  return 0.5 + std::atan(std::sinh(x)) / std::numbers::pi;
}

double inverse_transform(double u, const LocalMapParams& params) {
  if (!(u > 0.0 && u < 1.0)) {
    throw std::domain_error("inverse_transform: u must lie strictly inside (0, 1)");
  }
  const double t = std::tan(std::numbers::pi * (u - 0.5));
  return params.r0 + std::asinh(t) / params.gamma;
}

double bernoulli_step(double u, const LocalMapParams& params) noexcept {
  const double x = u / params.delta;
  return x - std::floor(x);
}

double clamp_uniform(double u) noexcept {
  constexpr double lo = k_uniform_floor;
  constexpr double hi = 1.0 - k_uniform_floor;
  if (!(u > lo)) return lo;  // also catches NaN
  if (u > hi) return hi;
  return u;
}

double local_map_step(double r, const LocalMapParams& params) {
  const double u = clamp_uniform(forward_transform(r, params));
  const double shifted = clamp_uniform(bernoulli_step(u, params));
  return inverse_transform(shifted, params);
}

}  // namespace cmfactor
