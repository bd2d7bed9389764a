#pragma once

#include "cmfactor/simulator.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

// Factor detection and loading analysis on return panels.
//
// The PCA spectrum of a coupled panel is compared rank-by-rank against the
// spectrum of an uncoupled (eps = 0) baseline panel of the same shape: the
// number of ranks where the coupled normalized eigenvalue strictly exceeds
// the baseline's is the detected factor count M_hat.  Loadings are then fit
// per asset by least squares on the leading M_hat principal-component
// scores, and each asset's loading profile is summarised by a normalized
// Shannon entropy.

namespace cmfactor {

struct SpectrumReport {
  Eigen::VectorXd eigenvalues;  // descending covariance eigenvalues
  Eigen::VectorXd normalized;   // eigenvalues / trace, sums to 1
  Eigen::MatrixXd components;   // K x K eigenvectors, column k for rank k;
                                // empty (0 x 0) for rank-averaged baselines
};

enum class DetectionMode {
  raw_count,    // count every rank where coupled > baseline
  leading_run,  // count only the initial consecutive run of such ranks
};

// PCA of the covariance matrix (1/(T-1)) Xc^T Xc of the column-centred
// panel.  Requires a stable panel with T >= 2 and non-zero total variance.
// Negative round-off eigenvalues are clamped to zero before normalising.
SpectrumReport pca_spectrum(const ReturnPanel& panel);

// Number of detected factors; strict comparison, so equal spectra give 0.
int detect_factors(const SpectrumReport& coupled, const SpectrumReport& baseline,
                   DetectionMode mode = DetectionMode::raw_count);

// Noise-floor spectrum: runs n_baseline uncoupled (eps = 0) panels with the
// same map, network shape and length, on seeds derived from cfg.sim_seed,
// and averages eigenvalues and normalized shares rank by rank.  Unstable
// draws are retried on fresh derived seeds a bounded number of times.
// Components are kept only when n_baseline == 1 (rank averages of
// eigenvectors are not meaningful).
SpectrumReport baseline_spectrum(const SimConfig& cfg, const CouplingNetwork& net,
                                 int n_baseline = 1);

struct LoadingsFit {
  Eigen::MatrixXd loadings;   // M_hat x K, column k holds asset k's betas
  Eigen::MatrixXd residuals;  // T x K, centred returns minus factor part
};

// Per-asset ordinary least squares of the centred returns on the given
// factor score matrix (T x M_hat, full column rank required).
LoadingsFit fit_loadings(const ReturnPanel& panel, const Eigen::MatrixXd& factors);

// Normalized Shannon entropy of one asset's loading profile:
//   alpha_f = |beta_f| / sum_g |beta_g|,  H = -(1/log M_hat) sum alpha log alpha.
// Undefined (nullopt) when M_hat == 1 or all loadings are zero.
std::optional<double> loading_entropy(const Eigen::VectorXd& loadings);

// Sum of the leading m_hat normalized eigenvalues; the fraction of total
// variance the detected factors explain.
double explained_variance(const SpectrumReport& spectrum, int m_hat);

struct FactorFit {
  int m_hat = 0;
  Eigen::MatrixXd factors;    // T x M_hat principal-component scores
  Eigen::MatrixXd loadings;   // M_hat x K
  Eigen::MatrixXd weights;    // M_hat x K, |loadings| normalised per asset
  std::vector<std::optional<double>> entropy;  // one entry per asset
  double explained_variance = 0.0;
  Eigen::MatrixXd residuals;  // T x K
};

// Full pipeline: spectrum, detection against the supplied baseline, scores,
// loadings, weights, entropies and explained variance.  With m_hat == 0 the
// factor block is empty and the residuals equal the centred panel.
FactorFit analyze_panel(const ReturnPanel& panel, const SpectrumReport& baseline,
                        DetectionMode mode = DetectionMode::raw_count);

}  // namespace cmfactor
