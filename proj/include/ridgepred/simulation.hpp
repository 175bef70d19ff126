#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ridgepred/estimators.hpp"
#include "ridgepred/limits.hpp"
#include "ridgepred/spectral.hpp"

namespace ridgepred {

enum class Distribution { Gaussian, Rademacher };

// Equicorrelated blocks along the diagonal of Sigma: unit variances and
// correlation rho inside each block of block_size consecutive features.
struct BlockCorrelation {
  Eigen::Index block_size = 20;
  double rho = 0.8;

  // Eigenvalues 1 + (b - 1) rho (weight 1/b) and 1 - rho (weight (b - 1)/b).
  SpectralModel spectrum() const;
  // Exact spectrum in dimension p; a trailing partial block of size r adds the
  // eigenvalue 1 + (r - 1) rho.
  SpectralModel spectrum(Eigen::Index p) const;
};

enum class MetaWeighting { Optimal, Equal };

struct SimConfig {
  Eigen::Index n = 500;
  Eigen::Index n_z = 500;
  Eigen::Index p = 500;
  Eigen::Index m_beta = 400;
  Eigen::Index m_eta = 400;
  Eigen::Index m_overlap = 400;
  TraitModel tm;
  // Spectrum laid out on the diagonal of Sigma, unless blocks is set.
  SpectralModel spec = SpectralModel::identity();
  std::optional<BlockCorrelation> blocks;
  int replicates = 100;
  std::uint64_t seed = 1;
  std::vector<EstimatorKind> estimators;
  Distribution effect_dist = Distribution::Gaussian;
  Distribution design_dist = Distribution::Gaussian;

  bool in_sample = true;
  bool mse = false;
  // Study sizes for the summary-statistic meta-analysis row; empty disables it.
  std::vector<Eigen::Index> meta_split;
  MetaWeighting meta_weighting = MetaWeighting::Optimal;

  // The spectrum the limits should be evaluated with.
  SpectralModel population_spectrum() const;
  // Correlation of overlapping effect pairs: tm.rho when given, else solved
  // from phi = m_overlap rho / sqrt(m_beta m_eta).
  double effect_correlation() const;
  // Throws ConfigError.
  void validate() const;
};

// x and z are column-standardized, except for a diagonal Sigma with unequal
// eigenvalues, where they are only centered so the spectrum survives.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::MatrixXd z;
  Eigen::VectorXd y;
  Eigen::VectorXd y_z;
  Eigen::VectorXd beta_true;
  Eigen::VectorXd eta_true;
  double sigma_eps = 0.0;
  double sigma_eps_z = 0.0;
  double realized_h2_beta = 0.0;
  double realized_h2_eta = 0.0;
  double realized_phi = 0.0;
};

// Independent generator for one (seed, replicate, stream) triple.
std::mt19937_64 replicate_stream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream);

// Noise standard deviation giving heritability h2 when m effects of variance
// 1/p act on standardized features.
double noise_sd_for_heritability(double h2, Eigen::Index m, Eigen::Index p);

Dataset generate_dataset(const SimConfig& cfg, int replicate_index);

// x <- x Sigma^{1/2} for the layout of cfg.
void apply_sigma_half(const SimConfig& cfg, Eigen::MatrixXd& x);
// Sigma v for the layout of cfg.
Eigen::VectorXd apply_sigma(const SimConfig& cfg, const Eigen::VectorXd& v);

// Label used for the meta-analysis rows.
inline const std::string kMetaLabel = "meta";

struct MetricRow {
  std::string estimator;
  double lambda_or_tau = 0.0;  // NaN when the estimator has no parameter
  int replicate = 0;
  double a2 = 0.0;
  double e2 = 0.0;        // NaN unless in-sample R2 was requested
  double mse_total = 0.0; // NaN unless MSE was requested
  double bias_sq = 0.0;
  double variance = 0.0;
};

struct ReplicateFailure {
  int replicate = 0;
  std::string estimator;
  std::string message;
};

struct Dispersion {
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
  int count = 0;
};

struct MetricSummary {
  std::string estimator;
  double lambda_or_tau = 0.0;
  Dispersion a2;
  Dispersion e2;
  Dispersion mse_total;
  Dispersion bias_sq;
  Dispersion variance;
};

struct SimulationResult {
  std::vector<MetricRow> rows;  // ordered by replicate, then estimator list order
  std::vector<MetricSummary> summary;
  std::vector<ReplicateFailure> failures;
  std::vector<double> realized_h2_beta;  // per replicate
};

// Mean, sample standard deviation and standard error ignoring NaN entries.
Dispersion dispersion(const std::vector<double>& values);
std::vector<MetricSummary> summarize(const std::vector<MetricRow>& rows);

// Worker threads: RIDGEPRED_THREADS when set, else hardware concurrency.
unsigned worker_threads();

// Throws PartialFailureError when more than 10% of replicates fail.
SimulationResult run_replicates(const SimConfig& cfg);

enum class ComparisonStatus { Pass, Fail, NotApplicable };

struct ComparisonOptions {
  double r2_tolerance = 0.03;
  double mse_relative_tolerance = 0.05;
  // Signal scale m sigma_beta^2 / p for MSE limits; MSE rows are skipped when absent.
  std::optional<double> m_sigma;
  // Study sizes and p for meta rows.
  std::vector<double> meta_study_ns;
  std::vector<double> meta_weights;
  double p = 0.0;
};

struct LimitComparison {
  std::string estimator;
  double lambda_or_tau = 0.0;
  std::string metric;  // "a2", "e2" or "mse"
  double empirical_mean = 0.0;
  double empirical_se = 0.0;
  double limit = 0.0;
  double gap = 0.0;  // absolute for R2, relative for MSE
  double tolerance = 0.0;
  ComparisonStatus status = ComparisonStatus::NotApplicable;
  std::string note;
};

struct LimitComparisonReport {
  std::vector<LimitComparison> entries;
  bool all_pass() const;
};

LimitComparisonReport compare_to_limits(const std::vector<MetricRow>& rows, const TraitModel& tm,
                                        const SpectralModel& spec,
                                        const ComparisonOptions& opts = {});
// Fills m_sigma, meta sizes and p from the configuration.
ComparisonOptions comparison_options_for(const SimConfig& cfg);

std::string to_string(ComparisonStatus s);

}  // namespace ridgepred
