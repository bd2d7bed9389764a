// Command-line driver: simulate panels, analyze them for emergent factors,
// run coupling sweeps, calibrate map parameters against empirical returns,
// and study estimator sampling spread.
//
// Exit codes: 0 success, 2 configuration or input errors, 3 output/IO
// failures, 1 anything else.

#include "cmfactor/config.hpp"
#include "cmfactor/csv.hpp"
#include "cmfactor/experiments.hpp"
#include "cmfactor/factor_analysis.hpp"
#include "cmfactor/report_io.hpp"
#include "cmfactor/version.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <tuple>

namespace fs = std::filesystem;
using namespace cmfactor;

namespace {

constexpr int k_exit_config = 2;
constexpr int k_exit_output = 3;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  int workers = 1;
};

fs::path prepare_output_dir(const GlobalOptions& global) {
  const fs::path out(global.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw io::IoError("cannot create output directory '" + out.string() + "'");
  }
  return out;
}

void write_manifest(const fs::path& out, const std::string& command,
                    const std::string& config_path, std::uint64_t base_seed) {
  io::RunManifest manifest;
  manifest.command = command;
  manifest.config_path = config_path;
  manifest.base_seed = base_seed;
  manifest.output_dir = out.string();
  manifest.tool_version = k_version;
  manifest.timestamp = io::current_timestamp_utc();
  io::write_manifest_json(out / "manifest.json", manifest);
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const GlobalOptions& global, const std::string& config_path,
                 bool dump_network) {
  const io::IniDoc doc = io::parse_ini_file(config_path);
  const SimConfig cfg = io::load_sim_config(doc, {global.seed});
  const fs::path out = prepare_output_dir(global);

  const CouplingNetwork net = build_coupling(cfg.net);
  const ReturnPanel panel = simulate_panel(cfg, net);

  io::write_panel_csv(out / "panel.csv", panel.returns);
  io::write_panel_meta_json(out / "panel.meta.json", cfg, panel);
  if (dump_network) {
    io::write_matrix_csv(out / "laplacian.csv", net.laplacian);
    io::write_matrix_csv(out / "rotation.csv", net.rotation);
    io::write_matrix_csv(out / "coupling.csv", net.coupling);
  }
  write_manifest(out, "simulate", config_path, cfg.sim_seed);

  std::cout << "panel: " << panel.returns.rows() << " periods x "
            << panel.returns.cols() << " assets, stable=" << (panel.stable ? 1 : 0)
            << "\n";
  if (!panel.stable) {
    std::cerr << "warning: orbit left the stability region after "
              << panel.returns.rows() << " recorded steps; panel is truncated\n";
  }
  return 0;
}

// ----------------------------------------------------------------- analyze

SpectrumReport uniform_baseline(Eigen::Index k) {
  SpectrumReport report;
  report.eigenvalues = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  report.normalized = report.eigenvalues;
  return report;
}

int cmd_analyze(const GlobalOptions& global, const std::string& panel_path,
                const std::string& meta_path, const std::string& baseline_panel,
                bool baseline_uniform, int n_baseline, const std::string& mode_name) {
  DetectionMode mode;
  if (mode_name == "raw_count") {
    mode = DetectionMode::raw_count;
  } else if (mode_name == "leading_run") {
    mode = DetectionMode::leading_run;
  } else {
    throw io::ConfigError("--mode: expected raw_count or leading_run");
  }
  if (n_baseline < 1) {
    throw io::ConfigError("--n-baseline must be at least 1");
  }
  if (baseline_uniform && !baseline_panel.empty()) {
    throw io::ConfigError("--baseline-uniform and --baseline-panel are exclusive");
  }

  ReturnPanel panel;
  panel.returns = io::read_panel_csv(panel_path);
  const auto t = panel.returns.rows();
  const auto k = panel.returns.cols();
  if (t < k) {
    std::cerr << "warning: panel has fewer periods (" << t << ") than assets (" << k
              << "); the spectrum is rank deficient\n";
  }

  SpectrumReport baseline;
  std::uint64_t base_seed = 0;
  if (baseline_uniform) {
    baseline = uniform_baseline(k);
  } else if (!baseline_panel.empty()) {
    ReturnPanel reference;
    reference.returns = io::read_panel_csv(baseline_panel);
    if (reference.returns.cols() != k) {
      throw io::ConfigError("baseline panel has " +
                            std::to_string(reference.returns.cols()) +
                            " assets, expected " + std::to_string(k));
    }
    baseline = pca_spectrum(reference);
  } else {
    // Default: regenerate the uncoupled noise floor from the panel's
    // metadata sidecar.
    fs::path sidecar(meta_path);
    if (sidecar.empty()) {
      sidecar = fs::path(panel_path);
      sidecar.replace_extension();
      sidecar += ".meta.json";
    }
    if (!fs::exists(sidecar)) {
      throw io::ConfigError(
          "no metadata sidecar at '" + sidecar.string() +
          "'; pass --meta, --baseline-panel or --baseline-uniform");
    }
    const io::PanelMeta meta = io::read_panel_meta_json(sidecar);
    if (meta.config.net.k() != k) {
      throw io::ConfigError("metadata describes " + std::to_string(meta.config.net.k()) +
                            " assets, panel has " + std::to_string(k));
    }
    panel.config_hash = meta.config_hash;
    base_seed = meta.config.sim_seed;
    const CouplingNetwork net = build_coupling(meta.config.net);
    baseline = baseline_spectrum(meta.config, net, n_baseline);
  }

  const fs::path out = prepare_output_dir(global);
  const FactorFit fit = analyze_panel(panel, baseline, mode);
  io::write_factor_fit_json(out / "factor_fit.json", fit);
  io::write_factor_scores_csv(out / "factor_scores.csv", fit.factors);
  write_manifest(out, "analyze", panel_path, global.seed.value_or(base_seed));

  std::cout << "m_hat=" << fit.m_hat
            << " explained_variance=" << io::format_double(fit.explained_variance)
            << "\n";
  return 0;
}

// ------------------------------------------------------------------- sweep

using SweepKey = std::tuple<int, std::uint64_t, int>;  // m, epsilon bits, rep

SweepKey make_key(int m, double epsilon, int rep) {
  return {m, std::bit_cast<std::uint64_t>(epsilon), rep};
}

// Reads previously persisted records, tolerating a truncated final line in
// partial files left behind by an interrupted run.
std::map<SweepKey, SweepRecord> load_prior_records(const fs::path& path,
                                                   std::uint64_t expected_hash,
                                                   bool lenient) {
  std::map<SweepKey, SweepRecord> prior;
  if (!fs::exists(path)) return prior;
  io::SweepRecordsFile file;
  try {
    file = io::read_sweep_records_csv(path);
  } catch (const io::CsvError& err) {
    if (!lenient) throw;
    // Re-read keeping everything before the malformed line.
    std::ifstream input(path);
    std::string line;
    std::string kept;
    for (int number = 1; number < err.line && std::getline(input, line); ++number) {
      kept += line;
      kept += '\n';
    }
    const fs::path trimmed = path.string() + ".recovered";
    std::ofstream rewrite(trimmed);
    rewrite << kept;
    rewrite.close();
    file = io::read_sweep_records_csv(trimmed);
    fs::remove(trimmed);
  }
  if (file.config_hash != expected_hash) {
    throw io::ConfigError("existing sweep records at '" + path.string() +
                          "' were produced by a different configuration; move them "
                          "or choose another --out");
  }
  for (const SweepRecord& record : file.records) {
    prior[make_key(record.m, record.epsilon, record.rep)] = record;
  }
  return prior;
}

void apply_subset(SweepConfig& cfg, const std::vector<std::string>& subset) {
  for (const std::string& expr : subset) {
    const auto eq = expr.find('=');
    if (eq == std::string::npos) {
      throw io::ConfigError("--subset expects m=<int> or eps=<value>, got '" + expr + "'");
    }
    const std::string key = expr.substr(0, eq);
    const std::string value = expr.substr(eq + 1);
    if (key == "m") {
      int wanted = 0;
      try {
        wanted = std::stoi(value);
      } catch (...) {
        throw io::ConfigError("--subset m: invalid integer '" + value + "'");
      }
      std::erase_if(cfg.m_values, [&](int m) { return m != wanted; });
      if (cfg.m_values.empty()) {
        throw io::ConfigError("--subset m=" + value + " matches no grid value");
      }
    } else if (key == "eps") {
      double wanted = 0.0;
      try {
        wanted = io::parse_double(value);
      } catch (...) {
        throw io::ConfigError("--subset eps: invalid value '" + value + "'");
      }
      std::erase_if(cfg.epsilon_grid,
                    [&](double e) { return std::abs(e - wanted) > 1e-12; });
      if (cfg.epsilon_grid.empty()) {
        throw io::ConfigError("--subset eps=" + value + " matches no grid value");
      }
    } else {
      throw io::ConfigError("--subset key must be m or eps, got '" + key + "'");
    }
  }
}

int cmd_sweep(const GlobalOptions& global, const std::string& config_path,
              const std::vector<std::string>& subset) {
  const io::IniDoc doc = io::parse_ini_file(config_path);
  SweepConfig cfg = io::load_sweep_config(doc, {global.seed});
  apply_subset(cfg, subset);
  const std::uint64_t cfg_hash = cfg.hash();
  const fs::path out = prepare_output_dir(global);
  const fs::path records_path = out / "sweep_records.csv";
  const fs::path partial_path = out / "sweep_records.partial.csv";

  // Resume support: any records already on disk (finished file or the
  // partial left by an interrupted run) are reused instead of recomputed.
  std::map<SweepKey, SweepRecord> prior = load_prior_records(records_path, cfg_hash, false);
  {
    auto partial = load_prior_records(partial_path, cfg_hash, true);
    prior.merge(partial);
  }

  std::ofstream partial(partial_path, std::ios::trunc);
  if (!partial) {
    throw io::IoError("cannot open '" + partial_path.string() + "' for writing");
  }
  partial << io::sweep_records_header(cfg_hash);
  for (const auto& [key, record] : prior) {
    partial << io::sweep_record_line(record);
  }
  partial.flush();

  SweepHooks hooks;
  hooks.lookup = [&prior](int m, double epsilon, int rep) -> std::optional<SweepRecord> {
    const auto it = prior.find(make_key(m, epsilon, rep));
    if (it == prior.end()) return std::nullopt;
    return it->second;
  };
  hooks.on_record = [&partial](const SweepRecord& record) {
    partial << io::sweep_record_line(record);
    partial.flush();
  };

  const SweepResult result = run_sweep(cfg, global.workers, &hooks);

  io::write_sweep_records_csv(records_path, result.records, cfg_hash);
  io::write_sweep_summary_csv(out / "sweep_summary.csv", result.summaries);
  partial.close();
  fs::remove(partial_path);
  write_manifest(out, "sweep", config_path, cfg.base_seed);

  int n_stable = 0;
  for (const auto& record : result.records) n_stable += record.stable ? 1 : 0;
  std::cout << "sweep: " << result.records.size() << " repetitions (" << n_stable
            << " stable) across " << result.summaries.size() << " ensembles\n";
  return 0;
}

// --------------------------------------------------------------- calibrate

int cmd_calibrate(const GlobalOptions& global, const std::string& config_path,
                  const std::string& empirical_path, int grid_stride,
                  double mse_threshold, bool empirical_diagnostics) {
  io::IniDoc doc;
  if (!config_path.empty()) doc = io::parse_ini_file(config_path);
  io::CalibrationSpec spec = io::load_calibration_spec(doc, {global.seed});
  if (grid_stride > 0) spec.grid.gamma_stride = grid_stride;

  const io::EmpiricalSeries empirical = io::read_empirical_csv(empirical_path);
  const fs::path out = prepare_output_dir(global);

  if (empirical_diagnostics) {
    const Moments m = sample_moments(empirical.returns);
    const LjungBoxResult lb = ljung_box(empirical.returns, spec.grid.lb_lags);
    const double dw = durbin_watson(empirical.returns);
    std::cout << "empirical: n=" << empirical.returns.size()
              << " mean=" << io::format_double(m.mean)
              << " stddev=" << io::format_double(m.stddev)
              << " excess_kurtosis=" << io::format_double(m.excess_kurtosis.value_or(0.0))
              << " lb_pvalue=" << io::format_double(lb.p_value)
              << " dw=" << io::format_double(dw) << "\n";
  }

  const std::vector<CalibrationRow> rows =
      run_calibration(empirical.returns, spec.grid, spec.seed, global.workers);
  io::write_calibration_csv(out / "calibration.csv", rows);
  write_manifest(out, "calibrate", config_path.empty() ? empirical_path : config_path,
                 spec.seed);

  std::size_t n_complete = 0, n_below = 0;
  const CalibrationRow* best = nullptr;
  for (const CalibrationRow& row : rows) {
    if (!row.complete) continue;
    ++n_complete;
    if (*row.mse <= mse_threshold) ++n_below;
    if (best == nullptr || *row.mse < *best->mse) best = &row;
  }
  std::cout << "calibration: " << rows.size() << " rows, " << n_complete
            << " complete, fraction mse<=" << io::format_double(mse_threshold) << ": "
            << io::format_double(n_complete ? static_cast<double>(n_below) /
                                                  static_cast<double>(n_complete)
                                            : 0.0)
            << "\n";
  if (best != nullptr) {
    std::cout << "best: r0=" << io::format_double(best->r0)
              << " gamma=" << io::format_double(best->gamma)
              << " delta=" << io::format_double(best->delta)
              << " mse=" << io::format_double(*best->mse) << "\n";
  }
  return 0;
}

// ----------------------------------------------------------------- moments

int cmd_moments(const GlobalOptions& global, const std::string& config_path) {
  io::IniDoc doc;
  if (!config_path.empty()) doc = io::parse_ini_file(config_path);
  const io::MomentsSpec spec = io::load_moments_spec(doc, {global.seed});
  const fs::path out = prepare_output_dir(global);

  const std::vector<Moments> samples =
      estimator_sampling_study(spec.map, spec.n_series, spec.steps, spec.seed,
                               global.workers);
  io::write_moments_csv(out / "moments_samples.csv", samples);
  write_manifest(out, "moments", config_path, spec.seed);

  std::vector<double> means, stds, skews, kurts;
  for (const Moments& m : samples) {
    means.push_back(m.mean);
    stds.push_back(m.stddev);
    if (m.skewness) skews.push_back(*m.skewness);
    if (m.excess_kurtosis) kurts.push_back(*m.excess_kurtosis);
  }
  std::cout << "moments over " << samples.size()
            << " series: median mean=" << io::format_double(median_of(means))
            << " median stddev=" << io::format_double(median_of(stds));
  if (!skews.empty()) {
    std::cout << " median skewness=" << io::format_double(median_of(skews));
  }
  if (!kurts.empty()) {
    std::cout << " median excess_kurtosis=" << io::format_double(median_of(kurts));
  }
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled chaotic-map market simulator and factor-structure analyzer"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Override the configured seed");
  app.add_option("--out", global.out, "Output directory (default: current directory)");
  app.add_option("--workers", global.workers, "Worker threads for grid commands")
      ->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "Simulate a coupled return panel");
  std::string sim_config;
  bool dump_network = false;
  simulate->add_option("--config", sim_config, "INI configuration file")->required();
  simulate->add_flag("--dump-network", dump_network,
                     "Also write laplacian.csv, rotation.csv and coupling.csv");

  auto* analyze = app.add_subcommand("analyze", "Detect factors in a return panel");
  std::string panel_path, meta_path, baseline_panel, mode_name = "raw_count";
  bool baseline_uniform = false;
  int n_baseline = 1;
  analyze->add_option("panel", panel_path, "Return panel CSV")->required();
  analyze->add_option("--meta", meta_path, "Metadata sidecar (default: <panel>.meta.json)");
  analyze->add_option("--baseline-panel", baseline_panel,
                      "Use this panel's spectrum as the noise floor");
  analyze->add_flag("--baseline-uniform", baseline_uniform,
                    "Use the flat 1/K spectrum as the noise floor");
  analyze->add_option("--n-baseline", n_baseline,
                      "Simulated baseline panels to average (default 1)");
  analyze->add_option("--mode", mode_name, "Detection mode: raw_count or leading_run");

  auto* sweep = app.add_subcommand("sweep", "Run a coupling-strength ensemble sweep");
  std::string sweep_config;
  std::vector<std::string> subset;
  sweep->add_option("--config", sweep_config, "INI configuration file")->required();
  sweep->add_option("--subset", subset,
                    "Restrict the grid, e.g. --subset m=3 --subset eps=0.45");

  auto* calibrate = app.add_subcommand("calibrate", "Grid-search map parameters");
  std::string cal_config, empirical_path;
  int grid_stride = 0;
  double mse_threshold = 0.0042;
  bool empirical_diagnostics = false;
  calibrate->add_option("--config", cal_config, "INI configuration file");
  calibrate->add_option("--empirical", empirical_path, "Empirical date,return CSV")
      ->required();
  calibrate->add_option("--grid-stride", grid_stride,
                        "Keep every k-th gamma value (overrides config)");
  calibrate->add_option("--mse-threshold", mse_threshold,
                        "Threshold for the reported pass fraction");
  calibrate->add_flag("--empirical-diagnostics", empirical_diagnostics,
                      "Print moments and whiteness tests of the empirical series");

  auto* moments = app.add_subcommand("moments", "Estimator sampling-spread study");
  std::string mom_config;
  moments->add_option("--config", mom_config, "INI configuration file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return cmd_simulate(global, sim_config, dump_network);
    if (*analyze) {
      return cmd_analyze(global, panel_path, meta_path, baseline_panel, baseline_uniform,
                         n_baseline, mode_name);
    }
    if (*sweep) return cmd_sweep(global, sweep_config, subset);
    if (*calibrate) {
      return cmd_calibrate(global, cal_config, empirical_path, grid_stride,
                           mse_threshold, empirical_diagnostics);
    }
    if (*moments) return cmd_moments(global, mom_config);
  } catch (const io::ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return k_exit_config;
  } catch (const io::CsvError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return k_exit_config;
  } catch (const io::IoError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return k_exit_output;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return k_exit_output;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << "\n";
    return k_exit_config;
  } catch (const std::domain_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return k_exit_config;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
