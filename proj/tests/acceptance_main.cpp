// Long-form validation suite.  Each criterion exercises one documented
// guarantee of the library end to end and prints a single PASS/FAIL line;
// the process exits non-zero if any criterion fails.
//
// Usage: cmfactor_acceptance [--data <empirical.csv>] [--workers N]

#include "cmfactor/csv.hpp"
#include "cmfactor/experiments.hpp"
#include "cmfactor/factor_analysis.hpp"
#include "cmfactor/local_map.hpp"
#include "cmfactor/network.hpp"
#include "cmfactor/rng.hpp"
#include "cmfactor/simulator.hpp"
#include "cmfactor/stats_tests.hpp"
#include "support/oracles.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace cmfactor;

namespace {

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool condition, const std::string& message) {
  if (!condition) throw CheckFailure(message);
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(4);
  out << v;
  return out.str();
}

std::vector<std::vector<double>> to_nested(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
    }
  }
  return out;
}

// ---------------------------------------------------------------- criteria

// 1. A long uncoupled orbit reproduces the invariant density's spread and
//    tail weight, and does so quickly.
std::string check_orbit_moments() {
  const auto start = std::chrono::steady_clock::now();
  const LocalMapParams map;  // documented defaults
  const Orbit orbit = simulate_orbit(map, 100000, 12345, /*burn_in=*/100);
  expect(orbit.complete, "orbit left the stability region");

  const double mu = oracles::mean(orbit.returns);
  const double sd = oracles::sample_sd(orbit.returns);
  double m2 = 0.0, m4 = 0.0;
  for (double r : orbit.returns) {
    const double d = r - mu;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= static_cast<double>(orbit.returns.size());
  m4 /= static_cast<double>(orbit.returns.size());
  const double excess = m4 / (m2 * m2) - 3.0;
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  expect(sd >= 0.025 && sd <= 0.027,
         "stddev " + fmt(sd) + " outside [0.025, 0.027]");
  expect(excess >= 1.5 && excess <= 2.5,
         "excess kurtosis " + fmt(excess) + " outside [1.5, 2.5]");
  expect(elapsed < 1.0, "took " + fmt(elapsed) + "s, budget 1s");
  return "stddev=" + fmt(sd) + " exkurt=" + fmt(excess) + " in " + fmt(elapsed) + "s";
}

// 2. Rotated coupling matrices are exactly symmetric and keep the block
//    spectrum: M zeros and K - M eigenvalues at -N.
std::string check_coupling_spectra() {
  const auto start = std::chrono::steady_clock::now();
  double worst_asym = 0.0;
  double worst_zero = 0.0;
  double worst_negative = 0.0;
  for (auto [m, n] : std::vector<std::pair<int, int>>{{3, 10}, {6, 10}, {2, 5}}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      NetworkParams params;
      params.m = m;
      params.n = n;
      params.seed = seed;
      const CouplingNetwork net = build_coupling(params);
      const double asym =
          (net.coupling - net.coupling.transpose()).cwiseAbs().maxCoeff();
      worst_asym = std::max(worst_asym, asym);
      expect(asym <= 1e-12, "asymmetry " + fmt(asym) + " at m=" +
                                std::to_string(m) + " n=" + std::to_string(n));

      const auto jacobi = oracles::jacobi_eigen(to_nested(net.coupling));
      const int k = params.k();
      for (int i = 0; i < k - m; ++i) {
        const double err =
            std::abs(jacobi.eigenvalues[static_cast<std::size_t>(i)] + n);
        worst_negative = std::max(worst_negative, err);
        expect(err < 1e-8, "eigenvalue " +
                               fmt(jacobi.eigenvalues[static_cast<std::size_t>(i)]) +
                               " should be " + fmt(-static_cast<double>(n)));
      }
      for (int i = k - m; i < k; ++i) {
        const double err = std::abs(jacobi.eigenvalues[static_cast<std::size_t>(i)]);
        worst_zero = std::max(worst_zero, err);
        expect(err < 1e-9, "kernel eigenvalue off by " + fmt(err));
      }
    }
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  expect(elapsed < 5.0, "took " + fmt(elapsed) + "s, budget 5s");
  return "max asym=" + fmt(worst_asym) + " max eig err=" +
         fmt(std::max(worst_zero, worst_negative)) + " in " + fmt(elapsed) + "s";
}

// 3. At coupling 1/2 the update matrix annihilates everything outside the
//    coupling kernel, so every simulated state lies in that M-plane.
std::string check_critical_collapse() {
  double worst_ratio = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SimConfig cfg;
    cfg.net.m = 3;
    cfg.net.n = 10;
    cfg.net.seed = 900 + seed;
    cfg.sim_seed = 950 + seed;
    cfg.epsilon = 0.5;
    const CouplingNetwork net = build_coupling(cfg.net);
    const Eigen::MatrixXd proj = nullspace_projector(net);
    const int k = cfg.net.k();
    const Eigen::MatrixXd off_plane = Eigen::MatrixXd::Identity(k, k) - proj;
    const ReturnPanel panel = simulate_panel(cfg, net);
    expect(panel.stable, "panel unstable at seed " + std::to_string(seed));
    for (int t = 0; t < panel.returns.rows(); ++t) {
      const Eigen::VectorXd r = panel.returns.row(t).transpose();
      const double ratio = (off_plane * r).norm() / r.norm();
      worst_ratio = std::max(worst_ratio, ratio);
      expect(ratio <= 1e-8,
             "row " + std::to_string(t) + " leaves the kernel by " + fmt(ratio));
    }
  }
  return "max out-of-plane ratio " + fmt(worst_ratio) + " over 5 runs";
}

// Shared sweep for criteria 4 and 7.
const SweepResult& detection_sweep(int workers) {
  static const SweepResult result = [workers] {
    SweepConfig cfg;
    cfg.m_values = {2, 3, 4, 5, 6};
    cfg.epsilon_grid = {0.40, 0.45, 0.50, 0.55};
    cfg.reps = 50;
    cfg.base_seed = 400;
    return run_sweep(cfg, workers);
  }();
  return result;
}

// 4. Factor detection recovers the planted cluster count in at least 95% of
//    stable repetitions for every ensemble in the working coupling range.
std::string check_detection_accuracy(int workers) {
  const SweepResult& sweep = detection_sweep(workers);
  std::map<std::pair<int, double>, std::pair<int, int>> cells;  // stable, exact
  for (const SweepRecord& rec : sweep.records) {
    if (!rec.stable) continue;
    auto& [stable, exact] = cells[{rec.m, rec.epsilon}];
    ++stable;
    if (rec.m_hat && *rec.m_hat == rec.m) ++exact;
  }
  expect(cells.size() == 20, "expected 20 ensembles, saw " +
                                 std::to_string(cells.size()));
  double min_accuracy = 1.0;
  for (const auto& [key, counts] : cells) {
    expect(counts.first > 0, "no stable repetitions at m=" +
                                 std::to_string(key.first) +
                                 " eps=" + fmt(key.second));
    const double accuracy =
        static_cast<double>(counts.second) / static_cast<double>(counts.first);
    min_accuracy = std::min(min_accuracy, accuracy);
    expect(accuracy >= 0.95, "accuracy " + fmt(accuracy) + " at m=" +
                                 std::to_string(key.first) +
                                 " eps=" + fmt(key.second));
  }
  return "min per-ensemble accuracy " + fmt(min_accuracy) + " over 20 ensembles x 50 reps";
}

// 5. Variance concentration peaks at the critical coupling: the detected
//    factors explain essentially everything at 1/2 and strictly less away
//    from it.
std::string check_variance_concentration(int workers) {
  SweepConfig cfg;
  cfg.m_values = {3};
  cfg.epsilon_grid = {0.30, 0.50, 0.65};
  cfg.reps = 20;
  cfg.base_seed = 500;
  const SweepResult result = run_sweep(cfg, workers);
  std::map<double, double> mean_ev;
  for (const EnsembleSummary& s : result.summaries) {
    expect(s.mean_explained_variance.has_value(),
           "no explained variance at eps=" + fmt(s.epsilon));
    mean_ev[s.epsilon] = *s.mean_explained_variance;
  }
  expect(mean_ev.at(0.50) >= 0.999,
         "mean explained variance " + fmt(mean_ev.at(0.50)) + " at eps=0.5");
  expect(mean_ev.at(0.50) > mean_ev.at(0.30),
         "eps=0.5 does not beat eps=0.3 (" + fmt(mean_ev.at(0.30)) + ")");
  expect(mean_ev.at(0.50) > mean_ev.at(0.65),
         "eps=0.5 does not beat eps=0.65 (" + fmt(mean_ev.at(0.65)) + ")");
  return "mean ev: 0.3->" + fmt(mean_ev.at(0.30)) + " 0.5->" + fmt(mean_ev.at(0.50)) +
         " 0.65->" + fmt(mean_ev.at(0.65));
}

// 6. Loading profiles are genuinely mixed: every asset's entropy is defined
//    and positive, per-repetition means sit in (0.5, 1], and more planted
//    factors push the mean higher.
std::string check_loading_entropy(int workers) {
  double lowest_mean = 1.0;
  for (int rep = 0; rep < 20; ++rep) {
    SimConfig cfg;
    cfg.net.m = 3;
    cfg.net.n = 10;
    cfg.net.seed = rng::derive_seed(600, {1, static_cast<std::uint64_t>(rep)});
    cfg.sim_seed = rng::derive_seed(600, {2, static_cast<std::uint64_t>(rep)});
    cfg.epsilon = 0.45;
    const CouplingNetwork net = build_coupling(cfg.net);
    const ReturnPanel panel = simulate_panel(cfg, net);
    expect(panel.stable, "panel unstable at rep " + std::to_string(rep));
    const FactorFit fit = analyze_panel(panel, baseline_spectrum(cfg, net));
    expect(fit.m_hat >= 2, "m_hat=" + std::to_string(fit.m_hat) +
                               " leaves entropy undefined at rep " +
                               std::to_string(rep));
    double total = 0.0;
    for (const auto& h : fit.entropy) {
      expect(h.has_value(), "undefined entropy at rep " + std::to_string(rep));
      expect(*h > 0.0, "non-positive entropy at rep " + std::to_string(rep));
      total += *h;
    }
    const double mean_h = total / static_cast<double>(fit.entropy.size());
    lowest_mean = std::min(lowest_mean, mean_h);
    expect(mean_h > 0.5 && mean_h <= 1.0,
           "mean entropy " + fmt(mean_h) + " outside (0.5, 1] at rep " +
               std::to_string(rep));
  }

  SweepConfig cfg;
  cfg.m_values = {2, 6};
  cfg.epsilon_grid = {0.45};
  cfg.reps = 20;
  cfg.base_seed = 650;
  const SweepResult result = run_sweep(cfg, workers);
  std::map<int, double> mu_by_m;
  for (const EnsembleSummary& s : result.summaries) {
    expect(s.mu_entropy.has_value(), "no entropy summary at m=" + std::to_string(s.m));
    mu_by_m[s.m] = *s.mu_entropy;
  }
  expect(mu_by_m.at(6) > mu_by_m.at(2),
         "mean entropy at m=6 (" + fmt(mu_by_m.at(6)) + ") not above m=2 (" +
             fmt(mu_by_m.at(2)) + ")");
  return "min per-rep mean " + fmt(lowest_mean) + "; mu(m=2)=" + fmt(mu_by_m.at(2)) +
         " mu(m=6)=" + fmt(mu_by_m.at(6));
}

// 7. Ensemble spread of the detected count follows the two-point identity
//    sigma = sqrt((mu - m)(m + 1 - mu)) whenever the counts live on
//    {m, m + 1}, and that spread never exceeds 1/2.
std::string check_binary_spread(int workers) {
  const SweepResult& sweep = detection_sweep(workers);
  std::map<std::pair<int, double>, std::vector<int>> cells;
  for (const SweepRecord& rec : sweep.records) {
    if (rec.stable && rec.m_hat) cells[{rec.m, rec.epsilon}].push_back(*rec.m_hat);
  }
  int qualified = 0;
  double worst_deviation = 0.0;
  for (const auto& [key, values] : cells) {
    bool two_valued = true;
    for (int v : values) {
      if (v != key.first && v != key.first + 1) two_valued = false;
    }
    if (!two_valued || values.size() < 2) continue;
    ++qualified;
    const BinaryModelCheck check = check_binary_model(values, key.first);
    worst_deviation = std::max(worst_deviation, check.deviation);
    expect(check.deviation < 1e-12,
           "deviation " + fmt(check.deviation) + " at m=" + std::to_string(key.first) +
               " eps=" + fmt(key.second));
    expect(check.sigma_observed <= 0.5 + 1e-12,
           "spread " + fmt(check.sigma_observed) + " above the 1/2 ceiling");
  }
  expect(qualified >= 1, "no ensemble had two-valued counts");

  // Synthetic two-valued ensembles across the documented cluster range.
  rng::Engine engine(700);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 1 + static_cast<int>(engine() % 6);
    const int size = 2 + static_cast<int>(engine() % 49);
    std::vector<int> values(static_cast<std::size_t>(size));
    for (auto& v : values) v = m + static_cast<int>(engine() % 2);
    const BinaryModelCheck check = check_binary_model(values, m);
    worst_deviation = std::max(worst_deviation, check.deviation);
    expect(check.deviation < 1e-12, "synthetic deviation " + fmt(check.deviation));
    expect(check.sigma_observed <= 0.5 + 1e-12,
           "synthetic spread above the 1/2 ceiling");
  }
  return std::to_string(qualified) + " sweep ensembles + 200 synthetic, max deviation " +
         fmt(worst_deviation);
}

// 8. Whiteness regimes of the shift parameter: a resonant shift leaves
//    heavy serial correlation, non-resonant shifts look white to both the
//    serial-correlation ratio and the portmanteau test.
std::string check_whiteness_regimes() {
  const int n_seeds = 100;
  int resonant_low = 0;
  std::map<double, int> white_both;
  for (std::uint64_t seed = 0; seed < n_seeds; ++seed) {
    for (double delta : {0.5, 0.1, 0.011}) {
      LocalMapParams map;
      map.delta = delta;
      const Orbit orbit = simulate_orbit(map, 251, 800 + seed, /*burn_in=*/100);
      expect(orbit.complete, "orbit unstable at delta=" + fmt(delta));
      const double dw = durbin_watson(orbit.returns);
      if (delta == 0.5) {
        if (dw < 1.0) ++resonant_low;
      } else {
        const double p = ljung_box(orbit.returns, 10).p_value;
        if (dw > 1.75 && dw < 2.25 && p >= 0.05) ++white_both[delta];
      }
    }
  }
  const std::string tally =
      "resonant DW<1: " + std::to_string(resonant_low) + "/100; white at 0.1: " +
      std::to_string(white_both[0.1]) + "/100, at 0.011: " +
      std::to_string(white_both[0.011]) + "/100";
  expect(resonant_low >= 90, tally + " (need >=90 resonant)");
  for (double delta : {0.1, 0.011}) {
    expect(white_both[delta] >= 80,
           tally + " (need >=80 white at delta=" + fmt(delta) + ")");
  }
  return tally;
}

// 9. Calibration against the bundled empirical series: a coarse scan of the
//    parameter grid fits most of its rows below the documented error level,
//    within the runtime budget.
std::string check_calibration_fit(const std::string& data_path, int workers) {
  const auto start = std::chrono::steady_clock::now();
  const io::EmpiricalSeries empirical = io::read_empirical_csv(data_path);
  CalibrationGrid grid;
  grid.gamma_stride = 5;
  const std::vector<CalibrationRow> rows =
      run_calibration(empirical.returns, grid, 0, workers);
  std::size_t complete = 0, below = 0;
  for (const CalibrationRow& row : rows) {
    if (!row.complete) continue;
    ++complete;
    if (*row.mse <= 0.0042) ++below;
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  expect(complete > 0, "no complete rows");
  const double fraction =
      static_cast<double>(below) / static_cast<double>(complete);
  expect(fraction >= 0.60, "fraction " + fmt(fraction) + " below 0.60");
  expect(elapsed < 600.0, "took " + fmt(elapsed) + "s, budget 600s");
  return std::to_string(rows.size()) + " rows, fraction mse<=0.0042: " +
         fmt(fraction) + " in " + fmt(elapsed) + "s";
}

// 10. The analysis pipeline agrees with independent reimplementations of
//     its pieces on small instances.
std::string check_independent_agreement() {
  rng::Engine engine(1000);
  double worst = 0.0;
  for (auto [t, k] : std::vector<std::pair<int, int>>{{8, 2}, {20, 4}, {50, 6}}) {
    ReturnPanel panel;
    panel.returns.resize(t, k);
    for (int i = 0; i < t; ++i) {
      for (int j = 0; j < k; ++j) panel.returns(i, j) = rng::standard_normal(engine);
    }
    const SpectrumReport report = pca_spectrum(panel);

    // Covariance by plain loops, spectrum by the independent eigensolver.
    std::vector<double> means(static_cast<std::size_t>(k), 0.0);
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < t; ++i) means[static_cast<std::size_t>(j)] += panel.returns(i, j);
      means[static_cast<std::size_t>(j)] /= static_cast<double>(t);
    }
    std::vector<std::vector<double>> cov(static_cast<std::size_t>(k),
                                         std::vector<double>(static_cast<std::size_t>(k)));
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        double sum = 0.0;
        for (int i = 0; i < t; ++i) {
          sum += (panel.returns(i, a) - means[static_cast<std::size_t>(a)]) *
                 (panel.returns(i, b) - means[static_cast<std::size_t>(b)]);
        }
        cov[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
            sum / static_cast<double>(t - 1);
      }
    }
    const auto jacobi = oracles::jacobi_eigen(cov);
    double trace = 0.0;
    for (int a = 0; a < k; ++a) trace += cov[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)];
    for (int rank = 0; rank < k; ++rank) {
      const double reference = jacobi.eigenvalues[static_cast<std::size_t>(k - 1 - rank)];
      worst = std::max(worst, std::abs(report.eigenvalues(rank) - reference));
      expect(std::abs(report.eigenvalues(rank) - reference) < 1e-9,
             "eigenvalue mismatch at rank " + std::to_string(rank));
      worst = std::max(worst, std::abs(report.normalized(rank) - reference / trace));
      expect(std::abs(report.normalized(rank) - reference / trace) < 1e-9,
             "normalized share mismatch at rank " + std::to_string(rank));
    }

    // Detection against a shuffled copy of itself, recomputed by loop.
    SpectrumReport floor;
    floor.normalized = report.normalized.reverse();
    floor.eigenvalues = report.eigenvalues.reverse();
    const int detected = detect_factors(report, floor);
    int by_loop = 0;
    for (int rank = 0; rank < k; ++rank) {
      if (report.normalized(rank) > floor.normalized(rank)) ++by_loop;
    }
    expect(detected == by_loop, "detection count mismatch");

    // Explained variance against a partial sum.
    for (int m_hat = 0; m_hat <= k; ++m_hat) {
      double partial = 0.0;
      for (int rank = 0; rank < m_hat; ++rank) partial += report.normalized(rank);
      worst = std::max(worst, std::abs(explained_variance(report, m_hat) - partial));
      expect(std::abs(explained_variance(report, m_hat) - partial) < 1e-9,
             "explained variance mismatch at m_hat=" + std::to_string(m_hat));
    }

    // Entropy against the direct formula.
    for (int asset = 0; asset < k; ++asset) {
      Eigen::VectorXd betas(3);
      betas << rng::standard_normal(engine), rng::standard_normal(engine),
          rng::standard_normal(engine);
      double total = std::abs(betas(0)) + std::abs(betas(1)) + std::abs(betas(2));
      double h = 0.0;
      for (int f = 0; f < 3; ++f) {
        const double alpha = std::abs(betas(f)) / total;
        if (alpha > 0.0) h -= alpha * std::log(alpha);
      }
      h /= std::log(3.0);
      const auto lib = loading_entropy(betas);
      expect(lib.has_value(), "entropy unexpectedly undefined");
      worst = std::max(worst, std::abs(*lib - h));
      expect(std::abs(*lib - h) < 1e-9, "entropy mismatch");
    }
  }
  return "max discrepancy " + fmt(worst) + " across 3 panel shapes";
}

}  // namespace

int main(int argc, char** argv) {
  std::string data_path = std::string(CMFACTOR_DATA_DIR) + "/sample_returns.csv";
  int workers = 1;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--data" && i + 1 < argc) {
      data_path = argv[++i];
    } else if (arg == "--workers" && i + 1 < argc) {
      workers = std::atoi(argv[++i]);
      if (workers < 1) workers = 1;
    } else {
      std::cerr << "usage: cmfactor_acceptance [--data <empirical.csv>] [--workers N]\n";
      return 2;
    }
  }

  struct Criterion {
    int number;
    std::string name;
    std::function<std::string()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "single-orbit moments", [] { return check_orbit_moments(); }},
      {2, "coupling-matrix spectra", [] { return check_coupling_spectra(); }},
      {3, "critical-coupling collapse", [] { return check_critical_collapse(); }},
      {4, "factor-count detection accuracy",
       [workers] { return check_detection_accuracy(workers); }},
      {5, "variance concentration at critical coupling",
       [workers] { return check_variance_concentration(workers); }},
      {6, "loading-entropy range",
       [workers] { return check_loading_entropy(workers); }},
      {7, "two-point ensemble-spread identity",
       [workers] { return check_binary_spread(workers); }},
      {8, "shift-parameter whiteness regimes",
       [] { return check_whiteness_regimes(); }},
      {9, "empirical calibration fit",
       [&data_path, workers] { return check_calibration_fit(data_path, workers); }},
      {10, "independent-implementation agreement",
       [] { return check_independent_agreement(); }},
  };

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool passed = false;
    try {
      detail = criterion.run();
      passed = true;
    } catch (const std::exception& err) {
      detail = err.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::cout << (passed ? "[PASS]" : "[FAIL]") << " criterion " << criterion.number
              << ": " << criterion.name << " (" << detail << "; " << fmt(elapsed)
              << "s)\n";
    if (!passed) ++failures;
  }
  if (failures > 0) {
    std::cout << failures << " of " << criteria.size() << " criteria failed\n";
    return 1;
  }
  std::cout << "all " << criteria.size() << " criteria passed\n";
  return 0;
}
