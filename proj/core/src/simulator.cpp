#include "cmfactor/simulator.hpp"

#include "cmfactor/rng.hpp"

#include <bit>
#include <cmath>
#include <string>

namespace cmfactor {

void SimConfig::validate() const {
  map.validate();
  net.validate();
  if (!std::isfinite(epsilon) || !(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw std::invalid_argument("SimConfig: epsilon must lie in [0, 1]");
  }
  if (steps < 2) {
    throw std::invalid_argument("SimConfig: steps must be at least 2");
  }
  if (burn_in < 0) {
    throw std::invalid_argument("SimConfig: burn_in must be non-negative");
  }
  if (!std::isfinite(r_cap) || !(r_cap > 0.0)) {
    throw std::invalid_argument("SimConfig: r_cap must be positive");
  }
}

std::uint64_t SimConfig::hash() const noexcept {
  std::uint64_t h = 0x243f6a8885a308d3ULL;  // arbitrary non-zero start
  const auto fold = [&h](std::uint64_t v) { h = rng::mix64(h ^ rng::mix64(v)); };
  fold(std::bit_cast<std::uint64_t>(map.gamma));
  fold(std::bit_cast<std::uint64_t>(map.r0));
  fold(std::bit_cast<std::uint64_t>(map.delta));
  fold(static_cast<std::uint64_t>(net.m));
  fold(static_cast<std::uint64_t>(net.n));
  fold(net.seed);
  fold(std::bit_cast<std::uint64_t>(epsilon));
  fold(static_cast<std::uint64_t>(steps));
  fold(static_cast<std::uint64_t>(burn_in));
  fold(sim_seed);
  fold(std::bit_cast<std::uint64_t>(r_cap));
  return h;
}

DivergenceError::DivergenceError(int component_index)
    : std::runtime_error("state diverged at component " + std::to_string(component_index)),
      index(component_index) {}

Eigen::VectorXd step_system(const Eigen::VectorXd& r, const SimConfig& cfg,
                            const CouplingNetwork& net) {
  const auto k = r.size();
  if (k != net.coupling.rows()) {
    throw std::invalid_argument("step_system: state dimension does not match coupling matrix");
  }
  Eigen::VectorXd g(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    g[i] = local_map_step(r[i], cfg.map);
  }
  Eigen::VectorXd next;
  if (cfg.epsilon == 0.0) {
    // Identical to the general formula, but keeps the uncoupled path exact
    // and cheap: r'_k = g(r_k) componentwise.
    next = g;
  } else {
    next = (1.0 - cfg.epsilon) * g + (cfg.epsilon / cfg.net.n) * (net.coupling * g);
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!std::isfinite(next[i])) throw DivergenceError(static_cast<int>(i));
  }
  return next;
}

ReturnPanel simulate_panel(const SimConfig& cfg, const CouplingNetwork& net) {
  cfg.validate();
  const int k = cfg.net.k();
  if (net.coupling.rows() != k || net.coupling.cols() != k) {
    throw std::invalid_argument("simulate_panel: network dimensions do not match config");
  }

  rng::Engine engine(cfg.sim_seed);
  Eigen::VectorXd r(k);
  for (int i = 0; i < k; ++i) {
    r[i] = inverse_transform(rng::uniform_open(engine), cfg.map);
  }

  ReturnPanel panel;
  panel.config_hash = cfg.hash();
  panel.returns.resize(cfg.steps, k);
  int recorded = 0;
  const int total = cfg.burn_in + cfg.steps;
  for (int step = 0; step < total; ++step) {
    bool ok = true;
    try {
      r = step_system(r, cfg, net);
    } catch (const DivergenceError&) {
      ok = false;
    }
    if (ok) {
      for (int i = 0; i < k; ++i) {
        if (std::abs(r[i]) > cfg.r_cap) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) {
      panel.stable = false;
      panel.truncated_at = recorded;
      break;
    }
    if (step >= cfg.burn_in) {
      panel.returns.row(recorded++) = r.transpose();
    }
  }
  if (!panel.stable) {
    panel.returns.conservativeResize(recorded, Eigen::NoChange);
  }
  return panel;
}

Orbit simulate_orbit(const LocalMapParams& map, int steps, std::uint64_t seed,
                     int burn_in, double r_cap) {
  map.validate();
  if (steps < 1) {
    throw std::invalid_argument("simulate_orbit: steps must be at least 1");
  }
  if (burn_in < 0) {
    throw std::invalid_argument("simulate_orbit: burn_in must be non-negative");
  }
  if (!std::isfinite(r_cap) || !(r_cap > 0.0)) {
    throw std::invalid_argument("simulate_orbit: r_cap must be positive");
  }

  rng::Engine engine(seed);
  double r = inverse_transform(rng::uniform_open(engine), map);
  Orbit orbit;
  orbit.returns.reserve(static_cast<std::size_t>(steps));
  const int total = burn_in + steps;
  for (int step = 0; step < total; ++step) {
    r = local_map_step(r, map);
    if (!std::isfinite(r) || std::abs(r) > r_cap) {
      orbit.complete = false;
      break;
    }
    if (step >= burn_in) orbit.returns.push_back(r);
  }
  return orbit;
}

std::vector<double> returns_to_prices(std::span<const double> returns, double p0) {
  if (!std::isfinite(p0) || !(p0 > 0.0)) {
    throw std::domain_error("returns_to_prices: initial price must be positive");
  }
  std::vector<double> prices;
  prices.reserve(returns.size() + 1);
  prices.push_back(p0);
  for (std::size_t t = 0; t < returns.size(); ++t) {
    if (!(returns[t] > -1.0)) {
      throw std::domain_error("returns_to_prices: return at index " + std::to_string(t) +
                              " is not greater than -1");
    }
    prices.push_back(prices.back() * (1.0 + returns[t]));
  }
  return prices;
}

}  // namespace cmfactor
