#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ridgepred/metrics.hpp"
#include "ridgepred/spectral.hpp"

namespace ridgepred {

struct TraitModel {
  double h2_beta = 0.5;
  double h2_eta = 0.5;
  double phi = 1.0;
  double omega = 1.0;
  double omega_z = 1.0;
  double gamma = 1.0;
  double gamma_z = 1.0;
  std::optional<double> kappa;
  std::optional<double> rho;
  double sigma_eps = 1.0;
  double sigma_eps_z = 1.0;

  // Throws DomainError when a field is out of range or phi != kappa * rho.
  void validate() const;
};

enum class FormulaTag {
  MarginalOut,
  MarginalIn,
  MetaOut,
  MetaIn,
  RidgeOut,
  RidgeOptimalOut,
  RidgelessOut,
  OlsOut,
  RidgeIn,
  RidgeOptimalIn,
  RidgelessIn,
  OlsIn,
  MseMarginal,
  MseRidge,
  MseRidgeOptimal,
  MseRidgeless,
  MseOls,
};

std::string to_string(FormulaTag tag);

struct LimitValue {
  double value = 0.0;
  FormulaTag formula = FormulaTag::MarginalOut;
  std::optional<std::pair<TransformValue, TransformValue>> transform_inputs;  // (g, v)
  // Set when the formula is evaluated outside the setting it was derived for
  // (in-sample ridge limits with a non-identity spectrum).
  bool extrapolated = false;
};

struct MarginalLimits {
  LimitValue a2;
  LimitValue e2;
};

MarginalLimits limit_marginal(const TraitModel& tm, const SpectralMoments& pop);

struct PreResult {
  double delta = 1.0;
  std::optional<double> transition_omega;  // omega_0, present when b2 > 1
};
PreResult pre_marginal(const TraitModel& tm, const SpectralMoments& pop);

struct OptimalPenalty {
  double lambda = 0.0;
  double tau = 0.0;
};
OptimalPenalty optimal_lambda(const TraitModel& tm);

LimitValue limit_ridge_out(const TraitModel& tm, const SpectralModel& spec, double lambda);
// BLUP limit under the tau parameterization; identical to limit_ridge_out(tau * omega).
LimitValue limit_blup_out(const TraitModel& tm, const SpectralModel& spec, double tau);
LimitValue limit_ridge_optimal(const TraitModel& tm, const SpectralModel& spec);
LimitValue limit_ridgeless(const TraitModel& tm, const SpectralModel& spec);
LimitValue limit_ols(const TraitModel& tm);

LimitValue limit_ridge_in(const TraitModel& tm, const SpectralModel& spec, double lambda);
LimitValue limit_ridge_in_optimal(const TraitModel& tm, const SpectralModel& spec);
LimitValue limit_ridgeless_in(const TraitModel& tm);
LimitValue limit_ols_in(const TraitModel& tm);

struct MetaLimits {
  LimitValue a2;
  std::optional<LimitValue> e2;  // available for the optimal weights d* only
};
MetaLimits limit_meta(const TraitModel& tm, const SpectralMoments& pop,
                      const std::vector<double>& study_ns, const std::vector<double>& weights,
                      double p);

double pre_ridge(const TraitModel& tm, const SpectralModel& spec);

struct EfficiencyRatios {
  double r_opt = 0.0;   // A2_R(lambda*) / A2_S
  double r_zero = 0.0;  // A2_R(0+) / A2_S
  double q_in = 0.0;    // E2_R(lambda*) / E2_S
};
EfficiencyRatios efficiency_ratios(const TraitModel& tm);

enum class MseBranch { Marginal, Ridge, RidgeOptimal, Ridgeless, Ols };

struct MseTarget {
  MseBranch branch = MseBranch::Marginal;
  double lambda = 0.0;  // Ridge only

  static MseTarget marginal() { return {MseBranch::Marginal, 0.0}; }
  static MseTarget ridge(double lambda) { return {MseBranch::Ridge, lambda}; }
  static MseTarget ridge_optimal() { return {MseBranch::RidgeOptimal, 0.0}; }
  static MseTarget ridgeless() { return {MseBranch::Ridgeless, 0.0}; }
  static MseTarget ols() { return {MseBranch::Ols, 0.0}; }
};

// Limiting MSE in the Sigma norm with signal scale m_sigma = m sigma_beta^2 / p
// and noise variance tm.sigma_eps^2.
MseDecomposition mse_limits(const TraitModel& tm, const SpectralModel& spec, double m_sigma,
                            const MseTarget& target);
// lambda absent selects the marginal estimator, present selects ridge(lambda).
MseDecomposition mse_limits(const TraitModel& tm, const SpectralModel& spec, double m_sigma,
                            std::optional<double> lambda);

// Half-width of the band around omega = 1 where ridge-less and OLS limits are refused.
inline constexpr double kOmegaGuard = 1e-6;

}  // namespace ridgepred
