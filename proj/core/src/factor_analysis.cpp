#include "cmfactor/factor_analysis.hpp"

#include "cmfactor/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace cmfactor {

namespace {

// Stream tag separating baseline draws from the panel's own seed.
constexpr std::uint64_t k_baseline_stream = 0xb5;
constexpr int k_baseline_max_attempts = 16;

Eigen::MatrixXd centre_columns(const Eigen::MatrixXd& x) {
  return x.rowwise() - x.colwise().mean();
}

}  // namespace

SpectrumReport pca_spectrum(const ReturnPanel& panel) {
  if (!panel.stable) {
    throw std::invalid_argument("pca_spectrum: panel is unstable (truncated)");
  }
  const auto t = panel.returns.rows();
  const auto k = panel.returns.cols();
  if (t < 2) {
    throw std::invalid_argument("pca_spectrum: need at least two rows");
  }
  if (k < 1) {
    throw std::invalid_argument("pca_spectrum: panel has no columns");
  }
  const Eigen::MatrixXd centred = centre_columns(panel.returns);
  const Eigen::MatrixXd cov =
      (centred.transpose() * centred) / static_cast<double>(t - 1);
  if (!(cov.trace() > 0.0)) {
    throw std::invalid_argument("pca_spectrum: panel has zero variance");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("pca_spectrum: eigensolver failed to converge");
  }

  // Eigen returns ascending order; flip to descending and clamp round-off
  // negatives before normalising.
  SpectrumReport report;
  report.eigenvalues.resize(k);
  report.components.resize(k, k);
  for (Eigen::Index rank = 0; rank < k; ++rank) {
    const Eigen::Index src = k - 1 - rank;
    report.eigenvalues[rank] = solver.eigenvalues()[src];
    report.components.col(rank) = solver.eigenvectors().col(src);
  }
  Eigen::VectorXd clamped = report.eigenvalues.cwiseMax(0.0);
  report.normalized = clamped / clamped.sum();
  return report;
}

int detect_factors(const SpectrumReport& coupled, const SpectrumReport& baseline,
                   DetectionMode mode) {
  const auto k = coupled.normalized.size();
  if (baseline.normalized.size() != k) {
    throw std::invalid_argument("detect_factors: spectra have different lengths");
  }
  int count = 0;
  switch (mode) {
    case DetectionMode::raw_count:
      for (Eigen::Index rank = 0; rank < k; ++rank) {
        if (coupled.normalized[rank] > baseline.normalized[rank]) ++count;
      }
      break;
    case DetectionMode::leading_run:
      while (count < k && coupled.normalized[count] > baseline.normalized[count]) {
        ++count;
      }
      break;
  }
  return count;
}

SpectrumReport baseline_spectrum(const SimConfig& cfg, const CouplingNetwork& net,
                                 int n_baseline) {
  if (n_baseline < 1) {
    throw std::invalid_argument("baseline_spectrum: n_baseline must be at least 1");
  }
  SimConfig base = cfg;
  base.epsilon = 0.0;
  const int k = cfg.net.k();

  SpectrumReport report;
  Eigen::VectorXd eigen_sum = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd norm_sum = Eigen::VectorXd::Zero(k);
  for (int i = 0; i < n_baseline; ++i) {
    bool done = false;
    for (int attempt = 0; attempt < k_baseline_max_attempts && !done; ++attempt) {
      base.sim_seed = rng::derive_seed(
          cfg.sim_seed, {k_baseline_stream, static_cast<std::uint64_t>(i),
                         static_cast<std::uint64_t>(attempt)});
      const ReturnPanel panel = simulate_panel(base, net);
      if (!panel.stable) continue;
      const SpectrumReport spec = pca_spectrum(panel);
      eigen_sum += spec.eigenvalues;
      norm_sum += spec.normalized;
      if (n_baseline == 1) report.components = spec.components;
      done = true;
    }
    if (!done) {
      throw std::runtime_error("baseline_spectrum: no stable uncoupled panel after retries");
    }
  }
  report.eigenvalues = eigen_sum / static_cast<double>(n_baseline);
  report.normalized = norm_sum / static_cast<double>(n_baseline);
  return report;
}

LoadingsFit fit_loadings(const ReturnPanel& panel, const Eigen::MatrixXd& factors) {
  if (!panel.stable) {
    throw std::invalid_argument("fit_loadings: panel is unstable (truncated)");
  }
  if (factors.cols() < 1) {
    throw std::invalid_argument("fit_loadings: need at least one factor");
  }
  if (factors.rows() != panel.returns.rows()) {
    throw std::invalid_argument("fit_loadings: factor and panel row counts differ");
  }
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> decomp(factors);
  if (decomp.rank() < factors.cols()) {
    throw std::invalid_argument("fit_loadings: factor matrix is rank deficient");
  }
  const Eigen::MatrixXd centred = centre_columns(panel.returns);
  LoadingsFit fit;
  fit.loadings = decomp.solve(centred);
  fit.residuals = centred - factors * fit.loadings;
  return fit;
}

std::optional<double> loading_entropy(const Eigen::VectorXd& loadings) {
  const auto m = loadings.size();
  if (m < 1) {
    throw std::invalid_argument("loading_entropy: empty loading vector");
  }
  if (m == 1) return std::nullopt;  // log(1) = 0, entropy has no scale
  const Eigen::VectorXd mag = loadings.cwiseAbs();
  const double total = mag.sum();
  if (total == 0.0) return std::nullopt;
  double h = 0.0;
  for (Eigen::Index f = 0; f < m; ++f) {
    const double alpha = mag[f] / total;
    if (alpha > 0.0) h -= alpha * std::log(alpha);
  }
  h /= std::log(static_cast<double>(m));
  // Guard the upper bound against round-off; mathematically h <= 1.
  return std::min(std::max(h, 0.0), 1.0);
}

double explained_variance(const SpectrumReport& spectrum, int m_hat) {
  if (m_hat < 0 || m_hat > spectrum.normalized.size()) {
    throw std::invalid_argument("explained_variance: m_hat out of range");
  }
  return spectrum.normalized.head(m_hat).sum();
}

FactorFit analyze_panel(const ReturnPanel& panel, const SpectrumReport& baseline,
                        DetectionMode mode) {
  const SpectrumReport spectrum = pca_spectrum(panel);
  const auto t = panel.returns.rows();
  const auto k = panel.returns.cols();

  FactorFit fit;
  fit.m_hat = detect_factors(spectrum, baseline, mode);
  fit.explained_variance = explained_variance(spectrum, fit.m_hat);
  fit.entropy.assign(static_cast<std::size_t>(k), std::nullopt);

  const Eigen::MatrixXd centred = centre_columns(panel.returns);
  if (fit.m_hat == 0) {
    fit.factors.resize(t, 0);
    fit.loadings.resize(0, k);
    fit.weights.resize(0, k);
    fit.residuals = centred;
    return fit;
  }

  // Principal-component scores of the detected factors.
  fit.factors = centred * spectrum.components.leftCols(fit.m_hat);
  const LoadingsFit ols = fit_loadings(panel, fit.factors);
  fit.loadings = ols.loadings;
  fit.residuals = ols.residuals;

  fit.weights.resize(fit.m_hat, k);
  for (Eigen::Index asset = 0; asset < k; ++asset) {
    const Eigen::VectorXd mag = fit.loadings.col(asset).cwiseAbs();
    const double total = mag.sum();
    fit.weights.col(asset) = (total > 0.0) ? (mag / total).eval()
                                           : Eigen::VectorXd::Zero(fit.m_hat).eval();
    fit.entropy[static_cast<std::size_t>(asset)] = loading_entropy(fit.loadings.col(asset));
  }
  return fit;
}

}  // namespace cmfactor
