#pragma once

#include "cmfactor/factor_analysis.hpp"
#include "cmfactor/stats_tests.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

// Ensemble experiment drivers built on the simulator and factor analysis:
// coupling-strength sweeps, the two-point mixture model for ensemble spread,
// parameter calibration against an empirical series, and estimator sampling
// studies.  All drivers are deterministic for a fixed base seed regardless
// of worker count: every repetition derives its own seed from the grid
// position, results are keyed by task index, and aggregation happens after
// the parallel phase.

namespace cmfactor {

struct SweepConfig {
  LocalMapParams map;
  std::vector<int> m_values = {1, 2, 3, 4, 5, 6};
  std::vector<double> epsilon_grid = default_epsilon_grid();
  int n_per_cluster = 10;
  int reps = 200;
  int steps = 251;
  int burn_in = 100;
  std::uint64_t base_seed = 0;
  int n_baseline = 1;
  double r_cap = 10.0;
  // When true, one network per (m, epsilon) cell is shared by all reps;
  // otherwise each rep draws a fresh rotation.
  bool fix_network = false;
  DetectionMode mode = DetectionMode::raw_count;

  void validate() const;
  // Digest of every field; binds persisted sweep records to the
  // configuration that produced them so resuming with an edited
  // configuration is detected.
  std::uint64_t hash() const noexcept;
  // 51 points from 0.20 to 0.70 inclusive, generated by index so the grid
  // never drifts with floating-point accumulation.
  static std::vector<double> default_epsilon_grid();
};

struct SweepRecord {
  int m = 0;
  double epsilon = 0.0;
  int rep = 0;
  bool stable = false;
  std::optional<int> m_hat;
  std::optional<double> mean_entropy;  // across assets with defined entropy
  std::optional<double> entropy_sd;    // population sd across those assets
  std::optional<double> explained_variance;
  std::uint64_t net_seed = 0;
  std::uint64_t sim_seed = 0;
};

struct EnsembleSummary {
  int m = 0;
  double epsilon = 0.0;
  int n_total = 0;
  int n_stable = 0;
  int n_entropy_defined = 0;
  std::optional<double> mu_mhat;        // mean detected count, stable reps
  std::optional<double> sigma_mhat;     // population sd of detected counts
  std::optional<double> mu_entropy;     // mean of per-rep mean entropies
  std::optional<double> sigma_entropy;  // mean of per-rep entropy sds
  std::optional<double> mean_explained_variance;
};

struct SweepResult {
  std::vector<SweepRecord> records;      // rep-major within epsilon within m
  std::vector<EnsembleSummary> summaries;  // epsilon within m
};

// Optional persistence hooks.  `lookup` is consulted before a repetition is
// computed; returning a record skips the computation (resume support).
// `on_record` fires for each freshly computed record.  Both are invoked
// under an internal lock, in completion order.
struct SweepHooks {
  std::function<std::optional<SweepRecord>(int m, double epsilon, int rep)> lookup;
  std::function<void(const SweepRecord&)> on_record;
};

// Runs the full (m, epsilon, rep) grid.  Worker threads only affect wall
// time, never results.
SweepResult run_sweep(const SweepConfig& cfg, int workers = 1,
                      const SweepHooks* hooks = nullptr);

// Standard deviation of a two-point distribution on {m, m+1} with mean mu:
//   sigma = sqrt((mu - m) * (m + 1 - mu)).
// Throws std::domain_error unless mu lies in [m, m + 1].  The maximum value
// 1/2 is attained at mu = m + 1/2.
double binary_model_sigma(double mu, int m);

struct BinaryModelCheck {
  double mu = 0.0;
  double sigma_observed = 0.0;  // population sd of the values
  double sigma_model = 0.0;
  double deviation = 0.0;       // |observed - model|
};

// Compares the observed ensemble spread of detected factor counts against
// the two-point model at the observed mean.  The model is evaluated at the
// mean clamped into [m, m + 1]; for genuinely {m, m+1}-valued data the
// deviation is zero up to round-off.  Requires at least two values.
BinaryModelCheck check_binary_model(std::span<const int> m_hat_values, int m);

struct CalibrationGrid {
  double r0_start = -0.02;
  double r0_step = 0.001;
  int r0_count = 41;
  double gamma_start = 5.0;
  double gamma_step = 1.0;
  int gamma_count = 96;
  // Keep every gamma_stride-th gamma value (coarse pre-screening).
  int gamma_stride = 1;
  std::vector<double> delta_values = default_delta_values();
  int lb_lags = 10;
  double r_cap = 10.0;

  void validate() const;
  std::vector<double> r0_values() const;     // index-generated
  std::vector<double> gamma_values() const;  // index-generated, strided
  std::size_t row_count() const;
  // Fine range 0.005..0.020 in steps of 0.001 plus the coarse tail
  // {0.03, 0.04, 0.05, 0.1, 0.25, 0.75}; 22 values, ascending.
  static std::vector<double> default_delta_values();
};

struct CalibrationRow {
  double r0 = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
  bool complete = false;            // orbit stayed within the guard
  std::optional<double> mse;        // vs the empirical series
  std::optional<double> lb_pvalue;
  std::optional<double> dw;
};

// Sweeps the (r0, gamma, delta) grid; every triple simulates one uncoupled
// orbit of the empirical series' length from the same shared seed and
// records fit diagnostics.  Rows are ordered delta-fastest, then gamma,
// then r0.  Requires an empirical series longer than lb_lags.
std::vector<CalibrationRow> run_calibration(std::span<const double> empirical,
                                            const CalibrationGrid& grid,
                                            std::uint64_t seed, int workers = 1);

// Simulates n_series independent orbits of the given length and returns the
// per-series sample moments, for studying estimator sampling spread under
// heavy tails.  Requires n_series >= 100.
std::vector<Moments> estimator_sampling_study(const LocalMapParams& map, int n_series,
                                              int steps, std::uint64_t seed,
                                              int workers = 1);

}  // namespace cmfactor
