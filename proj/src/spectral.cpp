#include "ridgepred/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ridgepred/errors.hpp"

namespace ridgepred {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_positive(double x, const char* name) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw DomainError(std::string(name) + " must be a positive finite number");
}

void check_normalized(const std::vector<PointMass>& atoms) {
  double b1 = 0.0;
  for (const auto& a : atoms) b1 += a.weight * a.eigenvalue;
  if (std::abs(b1 - 1.0) > 1e-9)
    throw DomainError("spectral law must have first moment 1 (got " + std::to_string(b1) + ")");
}

}  // namespace

bool SpectralMoments::satisfies_ordering(double rel_tol) const {
  const double slack = 1.0 + rel_tol;
  return b1 <= std::sqrt(b2) * slack && std::sqrt(b2) <= std::cbrt(b3) * slack &&
         b2 * b2 <= b1 * b3 * slack;
}

SpectralModel::SpectralModel(SpectralKind kind, std::vector<PointMass> atoms,
                             std::optional<std::size_t> dimension_hint)
    : kind_(kind), atoms_(std::move(atoms)), dimension_hint_(dimension_hint) {}

SpectralModel SpectralModel::identity() {
  return SpectralModel(SpectralKind::Identity, {{1.0, 1.0}}, std::nullopt);
}

SpectralModel SpectralModel::point_masses(std::vector<PointMass> atoms) {
  if (atoms.empty()) throw DomainError("point-mass spectrum needs at least one atom");
  double total = 0.0;
  for (const auto& a : atoms) {
    require_positive(a.eigenvalue, "eigenvalue");
    if (!(a.weight >= 0.0 && a.weight <= 1.0))
      throw DomainError("point-mass weights must lie in [0, 1]");
    total += a.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("point-mass weights must sum to 1");
  check_normalized(atoms);
  return SpectralModel(SpectralKind::PointMasses, std::move(atoms), std::nullopt);
}

SpectralModel SpectralModel::explicit_eigenvalues(std::vector<double> eigenvalues) {
  if (eigenvalues.empty()) throw DomainError("explicit spectrum is empty");
  const double w = 1.0 / static_cast<double>(eigenvalues.size());
  std::vector<PointMass> atoms;
  atoms.reserve(eigenvalues.size());
  for (double e : eigenvalues) {
    require_positive(e, "eigenvalue");
    atoms.push_back({e, w});
  }
  check_normalized(atoms);
  return SpectralModel(SpectralKind::Explicit, std::move(atoms), eigenvalues.size());
}

bool SpectralModel::is_identity() const noexcept {
  if (kind_ == SpectralKind::Identity) return true;
  return std::all_of(atoms_.begin(), atoms_.end(),
                     [](const PointMass& a) { return a.weight == 0.0 || a.eigenvalue == 1.0; });
}

SpectralMoments SpectralModel::moments() const {
  SpectralMoments m;
  m.b1 = integrate([](double t) { return t; });
  m.b2 = integrate([](double t) { return t * t; });
  m.b3 = integrate([](double t) { return t * t * t; });
  m.source = MomentSource::Population;
  return m;
}

std::vector<double> SpectralModel::expand(std::size_t p) const {
  if (p == 0) throw DomainError("dimension must be positive");
  if (kind_ == SpectralKind::Explicit) {
    if (p != atoms_.size())
      throw UnsupportedSigmaError("explicit spectrum of size " + std::to_string(atoms_.size()) +
                                  " cannot be laid out in dimension " + std::to_string(p));
    std::vector<double> out;
    for (const auto& a : atoms_) out.push_back(a.eigenvalue);
    return out;
  }
  std::vector<double> out;
  out.reserve(p);
  double cum = 0.0;
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    cum += atoms_[k].weight;
    const std::size_t upto =
        k + 1 == atoms_.size() ? p : std::min(p, static_cast<std::size_t>(std::llround(cum * p)));
    while (out.size() < upto) out.push_back(atoms_[k].eigenvalue);
  }
  return out;
}

TransformValue mp_stieltjes_closed(double omega, double lambda) {
  require_positive(omega, "omega");
  require_positive(lambda, "lambda");
  const double a = 1.0 - omega + lambda;
  const double d = std::sqrt(a * a + 4.0 * omega * lambda);
  TransformValue t;
  t.v = a > 0.0 ? 2.0 / (d + a) : (d - a) / (2.0 * omega * lambda);
  // Equal to {(omega-1) + ((omega+1)lambda + (omega-1)^2)/d} / (2 omega lambda^2), written
  // without the cancellation that form suffers as omega -> 0 or lambda -> 0.
  const double g = t.v;
  t.v_prime = g * g * (1.0 + omega * g) / (1.0 + omega * lambda * g * g);
  t.at = -lambda;
  t.aspect = Aspect::Primal;
  return t;
}

TransformValue companion_from_primal(double omega, const TransformValue& t) {
  if (t.aspect != Aspect::Primal) throw ContractError("companion_from_primal needs a primal value");
  if (!(t.at < 0.0)) throw ContractError("companion_from_primal needs z = -lambda < 0");
  require_positive(omega, "omega");
  const double z = t.at;
  TransformValue c = t;
  c.v = omega * (t.v + 1.0 / z) - 1.0 / z;
  c.v_prime = omega * (t.v_prime - 1.0 / (z * z)) + 1.0 / (z * z);
  c.aspect = Aspect::Companion;
  return c;
}

namespace {

void fill_integrals(const SpectralModel& h, CompanionState& s) {
  const double v = s.v;
  double i1 = 0, k2 = 0, j1 = 0, j2 = 0, l3 = 0;
  for (const auto& a : h.atoms()) {
    const double t = a.eigenvalue, w = a.weight;
    const double q = 1.0 / (1.0 + t * v);
    i1 += w * t * q;
    k2 += w * t * t * q;
    j1 += w * t * q * q;
    j2 += w * t * t * q * q;
    l3 += w * t * t * t * q * q;
  }
  s.I1 = i1;
  s.K2 = k2;
  s.J1 = j1;
  s.J2 = j2;
  s.L3 = l3;
  s.D = 1.0 - s.omega * v * v * j2;
  s.v_prime = v * v / s.D;
}

}  // namespace

CompanionState companion_state(const SpectralModel& h, double omega, double lambda,
                               int max_iter) {
  require_positive(omega, "omega");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw DomainError("lambda must be nonnegative and finite");
  if (lambda == 0.0 && !(omega > 1.0))
    throw DomainError("v(0+) is finite only for omega > 1");
  CompanionState s;
  s.omega = omega;
  s.lambda = lambda;

  if (h.is_identity()) {
    // Positive root of lambda v^2 + (lambda + omega - 1) v - 1 = 0.
    const double c = lambda + omega - 1.0;
    const double disc = std::sqrt(c * c + 4.0 * lambda);
    s.v = c > 0.0 ? 2.0 / (disc + c) : (disc - c) / (2.0 * lambda);
  } else {
    // F(v) = 1 - lambda v - omega Int tv/(1+tv) is convex and decreasing with
    // F(0) = 1, so Newton from v = 0 increases monotonically to the root.
    double v = 0.0;
    int it = 0;
    for (;; ++it) {
      if (it >= max_iter)
        throw ConvergenceError("companion transform did not converge", std::abs(v), it);
      double f = 1.0 - lambda * v, fp = -lambda;
      for (const auto& a : h.atoms()) {
        const double q = 1.0 / (1.0 + a.eigenvalue * v);
        f -= omega * a.weight * a.eigenvalue * v * q;
        fp -= omega * a.weight * a.eigenvalue * q * q;
      }
      if (f <= 0.0 && it > 0) break;
      const double step = -f / fp;
      v += step;
      if (!std::isfinite(v))
        throw ConvergenceError("companion transform diverged", std::abs(f), it);
      if (step <= 4.0 * kEps * v) {
        ++it;
        break;
      }
    }
    s.v = v;
    s.iterations = it;
  }
  fill_integrals(h, s);
  if (!(s.D > 0.0) || !std::isfinite(s.v_prime))
    throw NumericalError("companion transform derivative is not finite");
  return s;
}

namespace {

double primal_from_v(const SpectralModel& h, double lambda, double v) {
  return h.integrate([&](double t) { return 1.0 / (1.0 + t * v); }) / lambda;
}

}  // namespace

TransformValue solve_mp_fixed_point(const SpectralModel& h, double omega, double lambda,
                                    const FixedPointOptions& opts) {
  require_positive(omega, "omega");
  require_positive(lambda, "lambda");
  require_positive(opts.tol, "tol");
  if (opts.max_iter <= 0) throw DomainError("max_iter must be positive");

  const CompanionState c = companion_state(h, omega, lambda, opts.max_iter);
  const double s = primal_from_v(h, lambda, c.v);

  // Residual of s = Int dH / (t(1 - omega + omega lambda s) + lambda), measured
  // relative to s.  Forming 1 - omega + omega lambda s = lambda v cancels when
  // lambda v is small, so the acceptance threshold is scaled by that factor.
  const double shift = 1.0 - omega + omega * lambda * s;
  const double rhs = h.integrate([&](double t) { return 1.0 / (t * shift + lambda); });
  const double residual = std::abs(s - rhs) / s;
  const double conditioning = std::max(1.0, (std::abs(1.0 - omega) + omega * lambda * s) /
                                                (lambda * c.v));
  if (!(residual <= opts.tol * conditioning))
    throw ConvergenceError("Marchenko-Pastur equation not satisfied", residual, c.iterations);

  TransformValue t;
  t.v = s;
  t.at = -lambda;
  t.aspect = Aspect::Primal;
  t.residual = residual;
  t.iterations = c.iterations;

  // Differentiated fixed point: s' (1 + omega lambda Int t/Dt^2) = Int (1 + t omega s)/Dt^2
  // with Dt = lambda (1 + t v).
  const double num = h.integrate([&](double x) {
    const double q = 1.0 / (lambda * (1.0 + x * c.v));
    return (1.0 + x * omega * s) * q * q;
  });
  const double den = 1.0 + omega / lambda * c.J1;
  t.v_prime = num / den;
  if (!std::isfinite(t.v_prime) || !(t.v_prime > 0.0)) {
    const double step = 1e-6 * lambda;
    const double lo = primal_from_v(h, lambda - step,
                                    companion_state(h, omega, lambda - step, opts.max_iter).v);
    const double hi = primal_from_v(h, lambda + step,
                                    companion_state(h, omega, lambda + step, opts.max_iter).v);
    t.v_prime = (lo - hi) / (2.0 * step);
    t.derivative_by_finite_difference = true;
  }
  return t;
}

std::pair<double, double> mp_support(double omega) {
  require_positive(omega, "omega");
  const double r = std::sqrt(omega);
  return {(1.0 - r) * (1.0 - r), (1.0 + r) * (1.0 + r)};
}

double mp_point_mass(double omega) {
  require_positive(omega, "omega");
  return std::max(0.0, 1.0 - 1.0 / omega);
}

double mp_density(double omega, double x) {
  require_positive(omega, "omega");
  if (!(x >= 0.0)) throw DomainError("mp_density needs x >= 0");
  const auto [lo, hi] = mp_support(omega);
  if (x <= lo || x >= hi || x == 0.0) return 0.0;
  return std::sqrt((hi - x) * (x - lo)) / (2.0 * std::numbers::pi * omega * x);
}

SpectralMoments moment_map_forward(const SpectralMoments& pop, double omega) {
  if (pop.source != MomentSource::Population)
    throw ContractError("moment_map_forward needs population moments");
  if (!(omega >= 0.0)) throw DomainError("omega must be nonnegative");
  SpectralMoments s;
  s.b1 = pop.b1;
  s.b2 = pop.b2 + omega * pop.b1 * pop.b1;
  s.b3 = pop.b3 + 3.0 * omega * pop.b1 * pop.b2 + omega * omega * pop.b1 * pop.b1 * pop.b1;
  s.source = MomentSource::Sample;
  return s;
}

SpectralMoments moment_map_inverse(const SpectralMoments& sample, double omega) {
  if (sample.source != MomentSource::Sample)
    throw ContractError("moment_map_inverse needs sample moments");
  if (!(omega >= 0.0)) throw DomainError("omega must be nonnegative");
  SpectralMoments p;
  p.b1 = sample.b1;
  p.b2 = sample.b2 - omega * p.b1 * p.b1;
  p.b3 = sample.b3 - 3.0 * omega * p.b1 * p.b2 - omega * omega * p.b1 * p.b1 * p.b1;
  p.source = MomentSource::Population;
  if (!(p.b1 > 0.0) || !(p.b2 > 0.0) || !(p.b3 > 0.0))
    throw InfeasiblePanelError("moment inversion gives nonpositive population moments "
                               "(omega mismatch or degenerate panel)");
  return p;
}

SpectralMoments esd_moments_from_eigenvalues(const std::vector<double>& eigs) {
  if (eigs.empty()) throw DomainError("eigenvalue list is empty");
  long double s1 = 0, s2 = 0, s3 = 0;
  for (double e : eigs) {
    if (!(e >= 0.0) || !std::isfinite(e)) throw DomainError("eigenvalues must be nonnegative");
    const long double x = e;
    s1 += x;
    s2 += x * x;
    s3 += x * x * x;
  }
  const long double n = static_cast<long double>(eigs.size());
  SpectralMoments m;
  m.b1 = static_cast<double>(s1 / n);
  m.b2 = static_cast<double>(s2 / n);
  m.b3 = static_cast<double>(s3 / n);
  m.source = MomentSource::Sample;
  return m;
}

}  // namespace ridgepred
