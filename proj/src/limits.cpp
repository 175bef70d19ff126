#include "ridgepred/limits.hpp"

#include <cmath>
#include <string>

#include "ridgepred/errors.hpp"

namespace ridgepred {

namespace {

void check_unit_interval(double x, const char* name) {
  if (!(x > 0.0 && x <= 1.0)) throw DomainError(std::string(name) + " must lie in (0, 1]");
}

void check_population(const SpectralMoments& pop) {
  if (pop.source != MomentSource::Population)
    throw ContractError("population moments required");
  if (std::abs(pop.b1 - 1.0) > 1e-9) throw ContractError("population moments need b1 = 1");
  if (!(pop.b2 > 0.0) || !(pop.b3 > 0.0)) throw DomainError("moments must be positive");
}

double ceiling(const TraitModel& tm) { return tm.h2_eta * tm.phi * tm.phi; }

LimitValue make(double value, FormulaTag tag) {
  LimitValue v;
  v.value = value;
  v.formula = tag;
  return v;
}

std::pair<TransformValue, TransformValue> transforms(const SpectralModel& spec, double omega,
                                                     double lambda) {
  const TransformValue g = spec.is_identity() ? mp_stieltjes_closed(omega, lambda)
                                              : solve_mp_fixed_point(spec, omega, lambda);
  const CompanionState c = companion_state(spec, omega, lambda);
  TransformValue v;
  v.v = c.v;
  v.v_prime = c.v_prime;
  v.at = -lambda;
  v.aspect = Aspect::Companion;
  v.iterations = c.iterations;
  return {g, v};
}

// A2_R written in spectral integrals of H at v = v(-lambda).  Algebraically
// equal to the expression in v and v', but free of the cancellation that
// expression suffers for large lambda.  Valid at lambda = 0 (v = v(0+)).
double ridge_out_ratio(const CompanionState& c, double h2) {
  const double w = c.omega;
  const double num = c.K2 * c.K2 * h2 * c.D;
  const double den = h2 * (c.L3 + w * c.J2 * (c.I1 - c.v * c.K2)) + w * c.J2 * (1.0 - h2);
  return num / den;
}

// E2_R in spectral integrals; equals the g, g' form with the noise term
// 1 - 2 lambda g + lambda^2 g'.
double ridge_in_ratio(const CompanionState& c, double h2) {
  const double w = c.omega, v = c.v;
  const double x0 = c.K2 + w * c.I1 * c.I1;
  const double cs = v * x0;
  const double cn = w * v * c.I1;
  const double v4 = v * v * (c.J2 + w * c.I1 * (c.J1 - v * c.J2)) / c.D;
  const double bracket = c.L3 + 2.0 * w * c.I1 * c.J2 + w * c.I1 * x0 - w * v * c.J2 * x0 -
                         w * v * c.I1 * c.L3 - 2.0 * w * w * v * c.I1 * c.I1 * c.J2;
  const double v3 = v * v * bracket / c.D;
  const double top = h2 * cs + (1.0 - h2) * cn;
  return top * top / (h2 * v3 + (1.0 - h2) * w * v4);
}

void check_guard(double omega) {
  if (std::abs(omega - 1.0) < kOmegaGuard)
    throw NearSingularityError("omega within 1e-6 of 1: ridge-less and OLS limits diverge");
}

double radical(double omega, double h2) {
  const double d = omega - h2;
  return std::sqrt(d * d + 4.0 * omega * h2 * (1.0 - h2));
}

}  // namespace

void TraitModel::validate() const {
  check_unit_interval(h2_beta, "h2_beta");
  check_unit_interval(h2_eta, "h2_eta");
  if (!(phi >= -1.0 && phi <= 1.0)) throw DomainError("phi must lie in [-1, 1]");
  for (auto [x, name] : {std::pair{omega, "omega"}, std::pair{omega_z, "omega_z"},
                         std::pair{gamma, "gamma"}, std::pair{gamma_z, "gamma_z"}})
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError(std::string(name) + " must be positive");
  if (!(sigma_eps >= 0.0) || !(sigma_eps_z >= 0.0))
    throw DomainError("noise standard deviations must be nonnegative");
  if (kappa) check_unit_interval(*kappa, "kappa");
  if (rho && !(*rho >= -1.0 && *rho <= 1.0)) throw DomainError("rho must lie in [-1, 1]");
  if (kappa && rho && std::abs(phi - *kappa * *rho) > 1e-12)
    throw DomainError("phi must equal kappa * rho");
}

std::string to_string(FormulaTag tag) {
  switch (tag) {
    case FormulaTag::MarginalOut: return "marginal_out";
    case FormulaTag::MarginalIn: return "marginal_in";
    case FormulaTag::MetaOut: return "meta_out";
    case FormulaTag::MetaIn: return "meta_in";
    case FormulaTag::RidgeOut: return "ridge_out";
    case FormulaTag::RidgeOptimalOut: return "ridge_optimal_out";
    case FormulaTag::RidgelessOut: return "ridgeless_out";
    case FormulaTag::OlsOut: return "ols_out";
    case FormulaTag::RidgeIn: return "ridge_in";
    case FormulaTag::RidgeOptimalIn: return "ridge_optimal_in";
    case FormulaTag::RidgelessIn: return "ridgeless_in";
    case FormulaTag::OlsIn: return "ols_in";
    case FormulaTag::MseMarginal: return "mse_marginal";
    case FormulaTag::MseRidge: return "mse_ridge";
    case FormulaTag::MseRidgeOptimal: return "mse_ridge_optimal";
    case FormulaTag::MseRidgeless: return "mse_ridgeless";
    case FormulaTag::MseOls: return "mse_ols";
  }
  return "unknown";
}

MarginalLimits limit_marginal(const TraitModel& tm, const SpectralMoments& pop) {
  tm.validate();
  check_population(pop);
  const double h2 = tm.h2_beta, w = tm.omega, b2 = pop.b2, b3 = pop.b3;
  MarginalLimits out;
  out.a2 = make(ceiling(tm) / (b3 / (b2 * b2) + w / (b2 * h2)), FormulaTag::MarginalOut);
  const double s = b2 * h2 + w;
  out.e2 = make(s * s / (s * s + b2 * w + (b3 - b2 * b2 * h2) * h2), FormulaTag::MarginalIn);
  return out;
}

PreResult pre_marginal(const TraitModel& tm, const SpectralMoments& pop) {
  tm.validate();
  check_population(pop);
  const double h2 = tm.h2_beta, w = tm.omega, b2 = pop.b2, b3 = pop.b3;
  const bool b2_is_one = std::abs(b2 - 1.0) <= 1e-12;
  if (b2_is_one && std::abs(b3 - 1.0) > 1e-12)
    throw InfeasiblePanelError("moments with b2 = 1 and b3 != 1 violate the moment ordering");
  PreResult r;
  r.delta = (h2 + w) / (h2 * b3 / (b2 * b2) + w / b2);
  if (b2 > 1.0 && !b2_is_one) r.transition_omega = h2 * (b3 - b2 * b2) / (b2 * b2 - b2);
  return r;
}

OptimalPenalty optimal_lambda(const TraitModel& tm) {
  tm.validate();
  if (tm.h2_beta >= 1.0)
    throw BoundaryError("h2_beta = 1: the optimal penalty is 0+, use the ridge-less limit");
  OptimalPenalty o;
  o.lambda = tm.omega * (1.0 - tm.h2_beta) / tm.h2_beta;
  o.tau = o.lambda / tm.omega;
  return o;
}

LimitValue limit_ridge_out(const TraitModel& tm, const SpectralModel& spec, double lambda) {
  tm.validate();
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be positive");
  const CompanionState c = companion_state(spec, tm.omega, lambda);
  LimitValue v = make(ceiling(tm) * ridge_out_ratio(c, tm.h2_beta), FormulaTag::RidgeOut);
  v.transform_inputs = transforms(spec, tm.omega, lambda);
  return v;
}

LimitValue limit_blup_out(const TraitModel& tm, const SpectralModel& spec, double tau) {
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  return limit_ridge_out(tm, spec, tau * tm.omega);
}

LimitValue limit_ridge_optimal(const TraitModel& tm, const SpectralModel& spec) {
  const double lambda = optimal_lambda(tm).lambda;
  const double h2 = tm.h2_beta, w = tm.omega;
  LimitValue out;
  if (spec.is_identity()) {
    // (w + h2 - R) / (2 w h2) with the difference rationalized.
    out = make(ceiling(tm) * 2.0 * h2 / (w + h2 + radical(w, h2)), FormulaTag::RidgeOptimalOut);
  } else {
    const CompanionState c = companion_state(spec, w, lambda);
    out = make(ceiling(tm) * (1.0 / h2 - 1.0 / (c.v * w)), FormulaTag::RidgeOptimalOut);
  }
  out.transform_inputs = transforms(spec, w, lambda);
  return out;
}

LimitValue limit_ols(const TraitModel& tm) {
  tm.validate();
  if (tm.omega >= 1.0) throw DomainError("the OLS limit needs omega < 1");
  check_guard(tm.omega);
  const double h2 = tm.h2_beta, w = tm.omega;
  return make(ceiling(tm) / (1.0 + (1.0 - h2) / h2 * w / (1.0 - w)), FormulaTag::OlsOut);
}

LimitValue limit_ridgeless(const TraitModel& tm, const SpectralModel& spec) {
  tm.validate();
  check_guard(tm.omega);
  if (tm.omega < 1.0) {
    LimitValue v = limit_ols(tm);
    v.formula = FormulaTag::RidgelessOut;
    return v;
  }
  const double h2 = tm.h2_beta, w = tm.omega;
  if (spec.is_identity())
    return make(ceiling(tm) * h2 / (h2 * w + w * w * (1.0 - h2) / (w - 1.0)),
                FormulaTag::RidgelessOut);
  const CompanionState c = companion_state(spec, w, 0.0);
  return make(ceiling(tm) * ridge_out_ratio(c, h2), FormulaTag::RidgelessOut);
}

LimitValue limit_ridge_in(const TraitModel& tm, const SpectralModel& spec, double lambda) {
  tm.validate();
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be positive");
  const CompanionState c = companion_state(spec, tm.omega, lambda);
  LimitValue v = make(ridge_in_ratio(c, tm.h2_beta), FormulaTag::RidgeIn);
  v.transform_inputs = transforms(spec, tm.omega, lambda);
  v.extrapolated = !spec.is_identity();
  return v;
}

LimitValue limit_ridge_in_optimal(const TraitModel& tm, const SpectralModel& spec) {
  const double lambda = optimal_lambda(tm).lambda;
  LimitValue v = limit_ridge_in(tm, spec, lambda);
  v.formula = FormulaTag::RidgeOptimalIn;
  return v;
}

LimitValue limit_ols_in(const TraitModel& tm) {
  tm.validate();
  if (tm.omega >= 1.0) throw DomainError("the OLS limit needs omega < 1");
  check_guard(tm.omega);
  return make(tm.h2_beta + (1.0 - tm.h2_beta) * tm.omega, FormulaTag::OlsIn);
}

LimitValue limit_ridgeless_in(const TraitModel& tm) {
  tm.validate();
  const double w = tm.omega;
  return make(tm.h2_beta + (1.0 - tm.h2_beta) * (w + 1.0 - std::abs(w - 1.0)) / 2.0,
              FormulaTag::RidgelessIn);
}

MetaLimits limit_meta(const TraitModel& tm, const SpectralMoments& pop,
                      const std::vector<double>& study_ns, const std::vector<double>& weights,
                      double p) {
  tm.validate();
  check_population(pop);
  if (study_ns.empty()) throw ContractError("meta limit needs at least one study");
  if (weights.size() != study_ns.size())
    throw ContractError("weights and study sizes differ in length");
  if (!(p > 0.0)) throw DomainError("p must be positive");
  double sum_d = 0.0, sum_d2n = 0.0, sum_n = 0.0;
  bool any_nonzero = false;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(study_ns[i] > 0.0)) throw DomainError("study sizes must be positive");
    if (!std::isfinite(weights[i])) throw DomainError("weights must be finite");
    any_nonzero = any_nonzero || weights[i] != 0.0;
    sum_d += weights[i];
    sum_d2n += weights[i] * weights[i] / study_ns[i];
    sum_n += study_ns[i];
  }
  if (!any_nonzero) throw DomainError("all meta-analysis weights are zero");
  if (sum_d == 0.0) throw DomainError("meta-analysis weights sum to zero");

  const double h2 = tm.h2_beta, b2 = pop.b2, b3 = pop.b3;
  const double eff = sum_d2n / (sum_d * sum_d) * p;  // plays the role of omega
  MetaLimits out;
  out.a2 = make(ceiling(tm) / (b3 / (b2 * b2) + eff / (b2 * h2)), FormulaTag::MetaOut);

  // d proportional to n (d*) gives eff = p / sum(n) and the in-sample limit.
  bool optimal = true;
  const double ratio = weights[0] / study_ns[0];
  for (std::size_t i = 1; i < weights.size(); ++i)
    optimal = optimal && std::abs(weights[i] / study_ns[i] - ratio) <= 1e-12 * std::abs(ratio);
  if (optimal) {
    const double wt = p / sum_n;
    const double s = b2 * h2 + wt;
    out.a2.value = ceiling(tm) / (b3 / (b2 * b2) + wt / (b2 * h2));
    out.e2 = make(s * s / (s * s + b2 * wt + (b3 - b2 * b2 * h2) * h2), FormulaTag::MetaIn);
  }
  return out;
}

double pre_ridge(const TraitModel& tm, const SpectralModel& spec) {
  const double lambda = optimal_lambda(tm).lambda;
  const double h2 = tm.h2_beta, w = tm.omega;
  const double v = companion_state(spec, w, lambda).v;
  // A2_R(lambda*, Sigma) / A2_R(lambda*, I).
  return (2.0 * w - 2.0 * h2 / v) / (w + h2 - radical(w, h2));
}

EfficiencyRatios efficiency_ratios(const TraitModel& tm) {
  tm.validate();
  const double h2 = tm.h2_beta, w = tm.omega;
  EfficiencyRatios r;
  const double s = w + h2;
  r.r_opt = 2.0 * s / (s + std::sqrt(s * s - 4.0 * w * h2 * h2));
  check_guard(w);
  r.r_zero = w < 1.0 ? s / (h2 + w * (1.0 - h2) / (1.0 - w))
                     : s / (h2 * w + (1.0 - h2) * w * w / (w - 1.0));
  const double e2s = s * s / (s * s + w + h2 * (1.0 - h2));
  double e2r;
  if (h2 >= 1.0) {
    e2r = 1.0;
  } else {
    e2r = 2.0 * h2 * h2 * h2 / ((1.0 - h2) * (radical(w, h2) - w) + h2 * (3.0 * h2 - 1.0));
  }
  r.q_in = e2r / e2s;
  return r;
}

MseDecomposition mse_limits(const TraitModel& tm, const SpectralModel& spec, double m_sigma,
                            const MseTarget& target) {
  tm.validate();
  if (!(m_sigma > 0.0)) throw DomainError("m_sigma must be positive");
  const double w = tm.omega, s2 = tm.sigma_eps * tm.sigma_eps;
  MseDecomposition m;
  auto from_state = [&](const CompanionState& c) {
    m.bias_sq = m_sigma * c.J1 / c.D;
    m.variance = s2 * w * c.v * c.v * c.J2 / c.D;
  };
  switch (target.branch) {
    case MseBranch::Marginal: {
      const auto b = spec.moments();
      m.bias_sq = m_sigma * (w * b.b2 + b.b3 - 2.0 * b.b2 + 1.0);
      m.variance = s2 * w * b.b2;
      break;
    }
    case MseBranch::Ridge:
      if (!(target.lambda > 0.0)) throw DomainError("lambda must be positive");
      from_state(companion_state(spec, w, target.lambda));
      break;
    case MseBranch::RidgeOptimal:
      from_state(companion_state(spec, w, optimal_lambda(tm).lambda));
      break;
    case MseBranch::Ridgeless:
      check_guard(w);
      if (w < 1.0) {
        m.bias_sq = 0.0;
        m.variance = s2 * w / (1.0 - w);
      } else {
        from_state(companion_state(spec, w, 0.0));
      }
      break;
    case MseBranch::Ols:
      if (w >= 1.0) throw DomainError("the OLS limit needs omega < 1");
      check_guard(w);
      m.bias_sq = 0.0;
      m.variance = s2 * w / (1.0 - w);
      break;
  }
  m.total = m.bias_sq + m.variance;
  return m;
}

MseDecomposition mse_limits(const TraitModel& tm, const SpectralModel& spec, double m_sigma,
                            std::optional<double> lambda) {
  return mse_limits(tm, spec, m_sigma, lambda ? MseTarget::ridge(*lambda) : MseTarget::marginal());
}

}  // namespace ridgepred
