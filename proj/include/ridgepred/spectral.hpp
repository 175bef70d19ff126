#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

namespace ridgepred {

enum class SpectralKind { Identity, PointMasses, Explicit };

struct PointMass {
  double eigenvalue;
  double weight;
};

enum class MomentSource { Population, Sample };

// First three spectral moments b_k = Int t^k dH(t).
struct SpectralMoments {
  double b1 = 1.0;
  double b2 = 1.0;
  double b3 = 1.0;
  MomentSource source = MomentSource::Population;

  // b1 <= sqrt(b2) <= cbrt(b3) and b1*b3 >= b2^2, up to a relative slack.
  bool satisfies_ordering(double rel_tol = 1e-12) const;
};

// Population spectral law H of the feature covariance.  Every kind is stored
// as a list of atoms so integrals against H are finite sums.
class SpectralModel {
 public:
  static SpectralModel identity();
  static SpectralModel point_masses(std::vector<PointMass> atoms);
  static SpectralModel explicit_eigenvalues(std::vector<double> eigenvalues);

  SpectralKind kind() const noexcept { return kind_; }
  const std::vector<PointMass>& atoms() const noexcept { return atoms_; }
  std::optional<std::size_t> dimension_hint() const noexcept { return dimension_hint_; }
  // True when H is the point mass at 1, whatever kind was used to state it.
  bool is_identity() const noexcept;

  SpectralMoments moments() const;

  // Diagonal of a p x p covariance with this spectrum, eigenvalues repeated by
  // weight in index order.  Explicit spectra only expand to their own size.
  std::vector<double> expand(std::size_t p) const;

  template <class F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (const auto& a : atoms_) acc += a.weight * f(a.eigenvalue);
    return acc;
  }

 private:
  SpectralModel(SpectralKind kind, std::vector<PointMass> atoms,
                std::optional<std::size_t> dimension_hint);
  SpectralKind kind_;
  std::vector<PointMass> atoms_;
  std::optional<std::size_t> dimension_hint_;
};

enum class Aspect { Primal, Companion };

// Stieltjes transform value and first derivative at z = at (= -lambda).
struct TransformValue {
  double v = 0.0;
  double v_prime = 0.0;
  double at = 0.0;
  Aspect aspect = Aspect::Primal;
  double residual = 0.0;
  int iterations = 0;
  bool derivative_by_finite_difference = false;
};

struct FixedPointOptions {
  double tol = 1e-10;
  int max_iter = 10000;
};

// Companion transform v(-lambda) together with the integrals of H that the
// limit formulas need:
//   I1 = Int t/(1+tv), K2 = Int t^2/(1+tv), J1 = Int t/(1+tv)^2,
//   J2 = Int t^2/(1+tv)^2, L3 = Int t^3/(1+tv)^2, D = 1 - omega v^2 J2.
// lambda = 0 is allowed for omega > 1 and gives v(0+), v'(0+).
struct CompanionState {
  double omega = 0.0;
  double lambda = 0.0;
  double v = 0.0;
  double v_prime = 0.0;
  double I1 = 0.0;
  double K2 = 0.0;
  double J1 = 0.0;
  double J2 = 0.0;
  double L3 = 0.0;
  double D = 0.0;
  int iterations = 0;
};

// g(-lambda), g'(-lambda) of the Marchenko-Pastur law (H = point mass at 1).
TransformValue mp_stieltjes_closed(double omega, double lambda);

// v = omega*(g - 1/lambda) + 1/lambda, v' = omega*(g' - 1/lambda^2) + 1/lambda^2.
TransformValue companion_from_primal(double omega, const TransformValue& t);

// g(-lambda), g'(-lambda) for a general H.
TransformValue solve_mp_fixed_point(const SpectralModel& h, double omega, double lambda,
                                    const FixedPointOptions& opts = {});

CompanionState companion_state(const SpectralModel& h, double omega, double lambda,
                               int max_iter = 10000);

double mp_density(double omega, double x);
std::pair<double, double> mp_support(double omega);
double mp_point_mass(double omega);

SpectralMoments moment_map_forward(const SpectralMoments& pop, double omega);
SpectralMoments moment_map_inverse(const SpectralMoments& sample, double omega);
SpectralMoments esd_moments_from_eigenvalues(const std::vector<double>& eigs);

}  // namespace ridgepred
