#include "cmfactor/experiments.hpp"

#include "cmfactor/rng.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace cmfactor {

namespace {

// Stream tags keeping network draws, initial conditions and moment-study
// orbits on unrelated seed sequences.
constexpr std::uint64_t k_net_stream = 0x4e;
constexpr std::uint64_t k_sim_stream = 0x51;
constexpr std::uint64_t k_moment_stream = 0x4d;
constexpr int k_orbit_max_attempts = 16;

// Runs fn(0..n_tasks-1) on `workers` threads.  The first exception thrown
// by any task is rethrown on the calling thread after all workers join.
template <typename Fn>
void parallel_for(int n_tasks, int workers, Fn&& fn) {
  if (workers <= 1 || n_tasks <= 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto work = [&] {
    for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& thread : pool) thread.join();
  if (first_error) std::rethrow_exception(first_error);
}

double mean_of(std::span<const double> values) {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}

double population_sd(std::span<const double> values) {
  const double mu = mean_of(values);
  double acc = 0.0;
  for (double v : values) {
    const double d = v - mu;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(values.size()));
}

SweepRecord run_one_rep(const SweepConfig& cfg, int mi, int ei, int rep) {
  const int m = cfg.m_values[static_cast<std::size_t>(mi)];
  const double epsilon = cfg.epsilon_grid[static_cast<std::size_t>(ei)];

  SweepRecord rec;
  rec.m = m;
  rec.epsilon = epsilon;
  rec.rep = rep;
  rec.net_seed = rng::derive_seed(
      cfg.base_seed, {k_net_stream, static_cast<std::uint64_t>(mi),
                      static_cast<std::uint64_t>(ei),
                      cfg.fix_network ? 0 : static_cast<std::uint64_t>(rep)});
  rec.sim_seed = rng::derive_seed(
      cfg.base_seed, {k_sim_stream, static_cast<std::uint64_t>(mi),
                      static_cast<std::uint64_t>(ei), static_cast<std::uint64_t>(rep)});

  const NetworkParams net_params{m, cfg.n_per_cluster, rec.net_seed};
  const CouplingNetwork net = build_coupling(net_params);
  SimConfig sim;
  sim.map = cfg.map;
  sim.net = net_params;
  sim.epsilon = epsilon;
  sim.steps = cfg.steps;
  sim.burn_in = cfg.burn_in;
  sim.sim_seed = rec.sim_seed;
  sim.r_cap = cfg.r_cap;

  const ReturnPanel panel = simulate_panel(sim, net);
  if (!panel.stable) return rec;

  const SpectrumReport baseline = baseline_spectrum(sim, net, cfg.n_baseline);
  const FactorFit fit = analyze_panel(panel, baseline, cfg.mode);
  rec.stable = true;
  rec.m_hat = fit.m_hat;
  rec.explained_variance = fit.explained_variance;

  std::vector<double> defined;
  defined.reserve(fit.entropy.size());
  for (const auto& h : fit.entropy) {
    if (h) defined.push_back(*h);
  }
  if (!defined.empty()) {
    rec.mean_entropy = mean_of(defined);
    rec.entropy_sd = population_sd(defined);
  }
  return rec;
}

}  // namespace

void SweepConfig::validate() const {
  map.validate();
  if (m_values.empty()) {
    throw std::invalid_argument("SweepConfig: m_values is empty");
  }
  for (int m : m_values) {
    if (m < 1) throw std::invalid_argument("SweepConfig: cluster counts must be >= 1");
  }
  if (epsilon_grid.empty()) {
    throw std::invalid_argument("SweepConfig: epsilon_grid is empty");
  }
  for (double e : epsilon_grid) {
    if (!std::isfinite(e) || e < 0.0 || e > 1.0) {
      throw std::invalid_argument("SweepConfig: epsilon values must lie in [0, 1]");
    }
  }
  if (n_per_cluster < 2) {
    throw std::invalid_argument("SweepConfig: n_per_cluster must be at least 2");
  }
  if (reps < 1) {
    throw std::invalid_argument("SweepConfig: reps must be at least 1");
  }
  if (steps < 2) {
    throw std::invalid_argument("SweepConfig: steps must be at least 2");
  }
  if (burn_in < 0) {
    throw std::invalid_argument("SweepConfig: burn_in must be non-negative");
  }
  if (n_baseline < 1) {
    throw std::invalid_argument("SweepConfig: n_baseline must be at least 1");
  }
  if (!(r_cap > 0.0)) {
    throw std::invalid_argument("SweepConfig: r_cap must be positive");
  }
}

std::uint64_t SweepConfig::hash() const noexcept {
  std::uint64_t h = 0x13198a2e03707344ULL;
  const auto fold = [&h](std::uint64_t v) { h = rng::mix64(h ^ rng::mix64(v)); };
  fold(std::bit_cast<std::uint64_t>(map.gamma));
  fold(std::bit_cast<std::uint64_t>(map.r0));
  fold(std::bit_cast<std::uint64_t>(map.delta));
  for (int m : m_values) fold(static_cast<std::uint64_t>(m));
  for (double e : epsilon_grid) fold(std::bit_cast<std::uint64_t>(e));
  fold(static_cast<std::uint64_t>(n_per_cluster));
  fold(static_cast<std::uint64_t>(reps));
  fold(static_cast<std::uint64_t>(steps));
  fold(static_cast<std::uint64_t>(burn_in));
  fold(base_seed);
  fold(static_cast<std::uint64_t>(n_baseline));
  fold(std::bit_cast<std::uint64_t>(r_cap));
  fold(fix_network ? 1 : 0);
  fold(static_cast<std::uint64_t>(mode));
  return h;
}

std::vector<double> SweepConfig::default_epsilon_grid() {
  std::vector<double> grid(51);
  for (int i = 0; i < 51; ++i) grid[static_cast<std::size_t>(i)] = 0.20 + 0.01 * i;
  return grid;
}

SweepResult run_sweep(const SweepConfig& cfg, int workers, const SweepHooks* hooks) {
  cfg.validate();
  const int n_m = static_cast<int>(cfg.m_values.size());
  const int n_eps = static_cast<int>(cfg.epsilon_grid.size());
  const int total = n_m * n_eps * cfg.reps;

  SweepResult result;
  result.records.resize(static_cast<std::size_t>(total));
  std::mutex hook_mutex;

  parallel_for(total, workers, [&](int idx) {
    const int rep = idx % cfg.reps;
    const int ei = (idx / cfg.reps) % n_eps;
    const int mi = idx / (cfg.reps * n_eps);
    if (hooks && hooks->lookup) {
      std::optional<SweepRecord> prior;
      {
        const std::lock_guard<std::mutex> lock(hook_mutex);
        prior = hooks->lookup(cfg.m_values[static_cast<std::size_t>(mi)],
                              cfg.epsilon_grid[static_cast<std::size_t>(ei)], rep);
      }
      if (prior) {
        result.records[static_cast<std::size_t>(idx)] = *prior;
        return;
      }
    }
    SweepRecord rec = run_one_rep(cfg, mi, ei, rep);
    if (hooks && hooks->on_record) {
      const std::lock_guard<std::mutex> lock(hook_mutex);
      hooks->on_record(rec);
    }
    result.records[static_cast<std::size_t>(idx)] = std::move(rec);
  });

  // Ensemble summaries, epsilon within m, in grid order.
  result.summaries.reserve(static_cast<std::size_t>(n_m * n_eps));
  for (int mi = 0; mi < n_m; ++mi) {
    for (int ei = 0; ei < n_eps; ++ei) {
      EnsembleSummary summary;
      summary.m = cfg.m_values[static_cast<std::size_t>(mi)];
      summary.epsilon = cfg.epsilon_grid[static_cast<std::size_t>(ei)];
      summary.n_total = cfg.reps;

      std::vector<double> mhats, entropies, entropy_sds, variances;
      for (int rep = 0; rep < cfg.reps; ++rep) {
        const auto& rec =
            result.records[static_cast<std::size_t>((mi * n_eps + ei) * cfg.reps + rep)];
        if (!rec.stable) continue;
        ++summary.n_stable;
        if (rec.m_hat) mhats.push_back(static_cast<double>(*rec.m_hat));
        if (rec.explained_variance) variances.push_back(*rec.explained_variance);
        if (rec.mean_entropy) {
          entropies.push_back(*rec.mean_entropy);
          if (rec.entropy_sd) entropy_sds.push_back(*rec.entropy_sd);
          ++summary.n_entropy_defined;
        }
      }
      if (!mhats.empty()) {
        summary.mu_mhat = mean_of(mhats);
        summary.sigma_mhat = population_sd(mhats);
      }
      if (!variances.empty()) {
        summary.mean_explained_variance = mean_of(variances);
      }
      if (!entropies.empty()) {
        summary.mu_entropy = mean_of(entropies);
        summary.sigma_entropy = mean_of(entropy_sds);
      }
      result.summaries.push_back(std::move(summary));
    }
  }
  return result;
}

double binary_model_sigma(double mu, int m) {
  const double lo = static_cast<double>(m);
  const double hi = lo + 1.0;
  if (!std::isfinite(mu) || mu < lo || mu > hi) {
    throw std::domain_error("binary_model_sigma: mean must lie in [m, m + 1]");
  }
  const double v = (mu - lo) * (hi - mu);
  return std::sqrt(std::max(v, 0.0));
}

BinaryModelCheck check_binary_model(std::span<const int> m_hat_values, int m) {
  if (m_hat_values.size() < 2) {
    throw std::invalid_argument("check_binary_model: need at least two values");
  }
  std::vector<double> values(m_hat_values.begin(), m_hat_values.end());
  BinaryModelCheck check;
  check.mu = mean_of(values);
  check.sigma_observed = population_sd(values);
  const double clamped =
      std::clamp(check.mu, static_cast<double>(m), static_cast<double>(m) + 1.0);
  check.sigma_model = binary_model_sigma(clamped, m);
  check.deviation = std::abs(check.sigma_observed - check.sigma_model);
  return check;
}

void CalibrationGrid::validate() const {
  if (r0_count < 1 || gamma_count < 1) {
    throw std::invalid_argument("CalibrationGrid: grid counts must be at least 1");
  }
  if (gamma_stride < 1) {
    throw std::invalid_argument("CalibrationGrid: gamma_stride must be at least 1");
  }
  if (delta_values.empty()) {
    throw std::invalid_argument("CalibrationGrid: delta_values is empty");
  }
  if (lb_lags < 1) {
    throw std::invalid_argument("CalibrationGrid: lb_lags must be at least 1");
  }
  if (!(r_cap > 0.0)) {
    throw std::invalid_argument("CalibrationGrid: r_cap must be positive");
  }
  LocalMapParams probe;
  for (int i = 0; i < gamma_count; ++i) {
    probe.gamma = gamma_start + gamma_step * i;
    if (!(probe.gamma > 0.0)) {
      throw std::invalid_argument("CalibrationGrid: gamma grid reaches non-positive values");
    }
  }
  for (double d : delta_values) {
    probe.gamma = gamma_start;
    probe.delta = d;
    probe.validate();
  }
}

std::vector<double> CalibrationGrid::r0_values() const {
  std::vector<double> out(static_cast<std::size_t>(r0_count));
  for (int i = 0; i < r0_count; ++i) {
    out[static_cast<std::size_t>(i)] = r0_start + r0_step * i;
  }
  return out;
}

std::vector<double> CalibrationGrid::gamma_values() const {
  std::vector<double> out;
  for (int i = 0; i < gamma_count; i += gamma_stride) {
    out.push_back(gamma_start + gamma_step * i);
  }
  return out;
}

std::size_t CalibrationGrid::row_count() const {
  const std::size_t n_gamma = (gamma_count + gamma_stride - 1) / gamma_stride;
  return static_cast<std::size_t>(r0_count) * n_gamma * delta_values.size();
}

std::vector<double> CalibrationGrid::default_delta_values() {
  std::vector<double> out;
  for (int i = 0; i <= 15; ++i) out.push_back(0.005 + 0.001 * i);  // 0.005 .. 0.020
  for (double d : {0.03, 0.04, 0.05, 0.1, 0.25, 0.75}) out.push_back(d);
  return out;
}

std::vector<CalibrationRow> run_calibration(std::span<const double> empirical,
                                            const CalibrationGrid& grid,
                                            std::uint64_t seed, int workers) {
  grid.validate();
  const int t = static_cast<int>(empirical.size());
  if (t <= grid.lb_lags) {
    throw std::invalid_argument("run_calibration: empirical series must be longer than lb_lags");
  }

  const std::vector<double> r0s = grid.r0_values();
  const std::vector<double> gammas = grid.gamma_values();
  const std::size_t n_rows = grid.row_count();
  const int n_gamma = static_cast<int>(gammas.size());
  const int n_delta = static_cast<int>(grid.delta_values.size());

  std::vector<CalibrationRow> rows(n_rows);
  parallel_for(static_cast<int>(n_rows), workers, [&](int idx) {
    const int di = idx % n_delta;
    const int gi = (idx / n_delta) % n_gamma;
    const int ri = idx / (n_delta * n_gamma);

    CalibrationRow& row = rows[static_cast<std::size_t>(idx)];
    row.r0 = r0s[static_cast<std::size_t>(ri)];
    row.gamma = gammas[static_cast<std::size_t>(gi)];
    row.delta = grid.delta_values[static_cast<std::size_t>(di)];

    const LocalMapParams params{row.gamma, row.r0, row.delta};
    const Orbit orbit = simulate_orbit(params, t, seed, 0, grid.r_cap);
    row.complete = orbit.complete;
    if (!orbit.complete) return;

    row.mse = mse(orbit.returns, empirical);
    row.lb_pvalue = ljung_box(orbit.returns, grid.lb_lags).p_value;
    row.dw = durbin_watson(orbit.returns);
  });
  return rows;
}

std::vector<Moments> estimator_sampling_study(const LocalMapParams& map, int n_series,
                                              int steps, std::uint64_t seed,
                                              int workers) {
  map.validate();
  if (n_series < 100) {
    throw std::invalid_argument("estimator_sampling_study: need at least 100 series");
  }
  if (steps < 2) {
    throw std::invalid_argument("estimator_sampling_study: steps must be at least 2");
  }
  std::vector<Moments> samples(static_cast<std::size_t>(n_series));
  parallel_for(n_series, workers, [&](int i) {
    for (int attempt = 0; attempt < k_orbit_max_attempts; ++attempt) {
      const std::uint64_t orbit_seed = rng::derive_seed(
          seed, {k_moment_stream, static_cast<std::uint64_t>(i),
                 static_cast<std::uint64_t>(attempt)});
      const Orbit orbit = simulate_orbit(map, steps, orbit_seed);
      if (!orbit.complete) continue;
      samples[static_cast<std::size_t>(i)] = sample_moments(orbit.returns);
      return;
    }
    throw std::runtime_error("estimator_sampling_study: no complete orbit after retries");
  });
  return samples;
}

}  // namespace cmfactor
