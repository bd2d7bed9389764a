#pragma once

#include "cmfactor/local_map.hpp"
#include "cmfactor/network.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

// Coupled-system simulation.
//
// The K-asset state advances by
//
//   r_{t+1} = (1 - eps) g(r_t) + (eps / N) C g(r_t),
//
// where g applies the local chaotic map componentwise and C is the coupling
// matrix.  At eps = 0 the assets are independent; at eps = 1/2 the update
// matrix W = (1 - eps) I + (eps/N) C collapses onto the nullspace of C and
// the dynamics become exactly M-dimensional.

namespace cmfactor {

struct SimConfig {
  LocalMapParams map;
  NetworkParams net;
  double epsilon = 0.45;       // coupling strength, in [0, 1]
  int steps = 251;             // recorded trading days T
  int burn_in = 100;           // discarded transient steps
  std::uint64_t sim_seed = 0;  // initial-condition stream
  double r_cap = 10.0;         // stability guard on |r|

  void validate() const;
  // FNV/SplitMix-style digest of every field; identifies a run configuration
  // in file sidecars and resume checks.
  std::uint64_t hash() const noexcept;
};

struct ReturnPanel {
  Eigen::MatrixXd returns;            // T x K when stable, truncated otherwise
  bool stable = true;
  std::optional<int> truncated_at;    // recorded rows before the guard fired
  std::uint64_t config_hash = 0;
};

// Thrown by step_system when a component of the next state is non-finite.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(int component_index);
  int index;
};

// One update of the full coupled state.  Requires r.size() == net K.
Eigen::VectorXd step_system(const Eigen::VectorXd& r, const SimConfig& cfg,
                            const CouplingNetwork& net);

// Runs burn-in plus `steps` recorded iterations from initial returns drawn
// from the invariant density.  If any component goes non-finite or beyond
// r_cap, the panel is truncated at that point and marked unstable.
ReturnPanel simulate_panel(const SimConfig& cfg, const CouplingNetwork& net);

struct Orbit {
  std::vector<double> returns;
  bool complete = true;
};

// Single uncoupled orbit of the local map; used by calibration and moment
// studies where no network is involved.
Orbit simulate_orbit(const LocalMapParams& map, int steps, std::uint64_t seed,
                     int burn_in = 0, double r_cap = 10.0);

// Compounds simple returns into a price path of length T + 1 starting at p0.
// Throws std::domain_error when p0 <= 0 or any return is <= -1.
std::vector<double> returns_to_prices(std::span<const double> returns, double p0);

}  // namespace cmfactor
