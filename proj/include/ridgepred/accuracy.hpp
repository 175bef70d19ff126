#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <vector>

#include "ridgepred/limits.hpp"
#include "ridgepred/spectral.hpp"

namespace ridgepred {

// Eigenvalues of a reference panel's sample correlation W^T W / n_w, or of its
// companion W W^T / n_w.  Zero eigenvalues may be omitted.
struct PanelSummary {
  std::size_t n_w = 0;
  std::size_t p = 0;
  std::vector<double> eigenvalues;
  std::size_t top_removed = 0;  // leading eigenvalues discarded as outliers
};

// Eigenvalues of the smaller Gram matrix of a standardized panel W (n_w x p).
PanelSummary panel_from_matrix(const Eigen::MatrixXd& w);

// Number of eigenvalues above factor * (1 + sqrt(p / n_w))^2.
std::size_t count_outliers(const PanelSummary& panel, double factor = 10.0);

// Population moments: top_removed eigenvalues dropped, b1 renormalized to 1
// (NormalizationError beyond 5%), then the sample-to-population moment map.
SpectralMoments moments_from_panel(const PanelSummary& panel);

// Estimate of the companion transform v(-lambda) at aspect ratio omega from the
// panel spectrum.  Equals n_w^{-1} sum 1/(lambda_i + lambda) when p / n_w = omega.
double companion_transform_from_panel(const PanelSummary& panel, double omega, double lambda);

enum class AccuracyMethod { Panel, Traces };

struct AccuracyReport {
  double a2_marginal = 0.0;
  std::optional<double> a2_ridge_optimal;
  std::optional<double> pre;        // A2_S(Sigma) / A2_S(I)
  std::optional<double> pre_ridge;  // A2_R(lambda*; Sigma) / A2_R(lambda*; I)
  TraitModel inputs;
  SpectralMoments moments;
  AccuracyMethod method = AccuracyMethod::Panel;
};

AccuracyReport accuracy_from_panel(const PanelSummary& panel, const TraitModel& tm);

struct TraceSummary {
  double tr_x = 0.0;    // tr(S_X)
  double tr_z = 0.0;    // tr(S_Z)
  double tr_xz = 0.0;   // tr(S_X S_Z)
  double tr_xzx = 0.0;  // tr(S_X S_Z S_X) = tr(S_X^2 S_Z)
};

// Traces of S_X = X^T X / n and S_Z = Z^T Z / n_z through the n_z x n and
// n x n Gram products; no p x p matrix is formed.  ContractError when those
// products would exceed max_bytes.
TraceSummary sample_traces(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                           std::size_t max_bytes = std::size_t{2} << 30);

AccuracyReport accuracy_from_traces(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                                    const TraitModel& tm);
AccuracyReport accuracy_from_traces(const TraceSummary& t, Eigen::Index n, const TraitModel& tm);

}  // namespace ridgepred
