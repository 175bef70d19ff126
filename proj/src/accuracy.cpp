#include "ridgepred/accuracy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "ridgepred/errors.hpp"

namespace ridgepred {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

// Panel spectrum after outlier removal and b1 renormalization.
struct CleanPanel {
  std::vector<double> nonzero;  // scaled eigenvalues, zeros dropped
  double n_eff = 0.0;           // companion dimension n_w - top_removed
  double p_eff = 0.0;           // p - top_removed
  SpectralMoments sample;       // b1 = 1
};

CleanPanel clean(const PanelSummary& panel) {
  if (panel.eigenvalues.empty()) throw ContractError("panel has no eigenvalues");
  if (panel.n_w == 0 || panel.p == 0) throw ContractError("panel needs n_w and p");
  if (panel.eigenvalues.size() > std::max(panel.n_w, panel.p))
    throw ContractError("panel lists more eigenvalues than max(n_w, p)");
  if (panel.top_removed >= std::min(panel.n_w, panel.p))
    throw ContractError("cannot remove every panel eigenvalue");
  std::vector<double> eig = panel.eigenvalues;
  for (double e : eig)
    if (!(e >= 0.0) || !std::isfinite(e)) throw DomainError("panel eigenvalues must be >= 0");
  std::sort(eig.begin(), eig.end(), std::greater<>());
  eig.erase(eig.begin(), eig.begin() + std::min(panel.top_removed, eig.size()));

  CleanPanel c;
  c.n_eff = double(panel.n_w - panel.top_removed);
  c.p_eff = double(panel.p - panel.top_removed);
  const double cutoff = eig.empty() ? 0.0 : 1e-10 * eig.front();
  long double s1 = 0, s2 = 0, s3 = 0;
  for (double e : eig) {
    if (e <= cutoff) continue;
    c.nonzero.push_back(e);
    const long double x = e;
    s1 += x;
    s2 += x * x;
    s3 += x * x * x;
  }
  if (c.nonzero.empty()) throw InfeasiblePanelError("panel spectrum is zero");
  const double b1 = double(s1 / c.p_eff);
  if (std::abs(b1 - 1.0) > 0.05)
    throw NormalizationError("panel b1 = " + std::to_string(b1) +
                             " is more than 5% away from 1; the panel is not standardized");
  c.sample.b1 = 1.0;
  c.sample.b2 = double(s2 / c.p_eff) / (b1 * b1);
  c.sample.b3 = double(s3 / c.p_eff) / (b1 * b1 * b1);
  c.sample.source = MomentSource::Sample;
  for (double& e : c.nonzero) e /= b1;
  return c;
}

// n_eff^{-1} tr{(Phi_W + lambda)^{-1}}, zero companion eigenvalues included.
double panel_companion(const CleanPanel& c, double lambda) {
  double s = 0.0;
  for (double e : c.nonzero) s += 1.0 / (e + lambda);
  const double zeros = std::max(0.0, c.n_eff - double(c.nonzero.size()));
  if (zeros > 0.0) s += zeros / lambda;
  return s / c.n_eff;
}

double transfer(const CleanPanel& c, double omega, double lambda) {
  const double omega_w = c.p_eff / c.n_eff;
  if (std::abs(omega - omega_w) <= 1e-12 * omega_w) return panel_companion(c, lambda);
  // Panel companion at penalty mu gives u with Psi(u) = (1/u - mu)/omega_w, where
  // Psi(u) = Int t/(1+tu) dH.  Find mu whose u also solves 1/u = lambda + omega Psi(u).
  const double r = omega / omega_w;
  const bool has_zeros = c.n_eff > double(c.nonzero.size());
  const double smallest = *std::min_element(c.nonzero.begin(), c.nonzero.end());
  const double lo_bound = has_zeros ? 0.0 : -smallest;
  auto f = [&](double mu) {
    const double u = panel_companion(c, mu);
    return (1.0 - r) / u + r * mu - lambda;
  };
  double hi = std::max(1.0, lambda);
  for (int k = 0; f(hi) <= 0.0; ++k) {
    if (k > 200) throw InfeasiblePanelError("panel transform transfer found no bracket");
    hi *= 2.0;
  }
  double lo = lo_bound, step = hi - lo_bound;
  // Walk toward the singular end until f < 0.
  for (int k = 0;; ++k) {
    step *= 0.5;
    const double trial = lo_bound + step;
    if (f(trial) < 0.0) {
      lo = trial;
      break;
    }
    if (k > 200) throw InfeasiblePanelError("panel transform transfer found no bracket");
  }
  for (int k = 0; k < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++k) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  const double u = panel_companion(c, 0.5 * (lo + hi));
  if (!(u > 0.0) || !std::isfinite(u))
    throw InfeasiblePanelError("panel transform transfer produced an invalid value");
  return u;
}

}  // namespace

PanelSummary panel_from_matrix(const MatrixXd& w) {
  if (w.rows() < 2 || w.cols() < 1) throw ContractError("panel matrix is too small");
  PanelSummary out;
  out.n_w = std::size_t(w.rows());
  out.p = std::size_t(w.cols());
  MatrixXd g;
  if (w.rows() <= w.cols()) {
    g = MatrixXd::Zero(w.rows(), w.rows());
    g.selfadjointView<Eigen::Lower>().rankUpdate(w, 1.0 / double(w.rows()));
  } else {
    g = MatrixXd::Zero(w.cols(), w.cols());
    g.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose(), 1.0 / double(w.rows()));
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(g, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("panel eigen-decomposition failed");
  for (Index k = es.eigenvalues().size() - 1; k >= 0; --k)
    out.eigenvalues.push_back(std::max(0.0, es.eigenvalues()(k)));
  return out;
}

std::size_t count_outliers(const PanelSummary& panel, double factor) {
  if (panel.n_w == 0) throw ContractError("panel needs n_w");
  const double edge = std::pow(1.0 + std::sqrt(double(panel.p) / double(panel.n_w)), 2);
  return std::size_t(std::count_if(panel.eigenvalues.begin(), panel.eigenvalues.end(),
                                   [&](double e) { return e > factor * edge; }));
}

SpectralMoments moments_from_panel(const PanelSummary& panel) {
  const auto c = clean(panel);
  return moment_map_inverse(c.sample, c.p_eff / c.n_eff);
}

double companion_transform_from_panel(const PanelSummary& panel, double omega, double lambda) {
  if (!(omega > 0.0) || !(lambda > 0.0)) throw DomainError("omega and lambda must be > 0");
  return transfer(clean(panel), omega, lambda);
}

AccuracyReport accuracy_from_panel(const PanelSummary& panel, const TraitModel& tm) {
  tm.validate();
  const auto c = clean(panel);
  AccuracyReport rep;
  rep.method = AccuracyMethod::Panel;
  rep.inputs = tm;
  rep.moments = moment_map_inverse(c.sample, c.p_eff / c.n_eff);
  rep.a2_marginal = limit_marginal(tm, rep.moments).a2.value;
  rep.pre = pre_marginal(tm, rep.moments).delta;
  if (tm.h2_beta < 1.0) {
    const double lambda = optimal_lambda(tm).lambda;
    const double v = transfer(c, tm.omega, lambda);
    const double ceiling = tm.h2_eta * tm.phi * tm.phi;
    const double a2 = ceiling * (1.0 / tm.h2_beta - 1.0 / (v * tm.omega));
    rep.a2_ridge_optimal = std::clamp(a2, 0.0, ceiling);
    const double id = limit_ridge_optimal(tm, SpectralModel::identity()).value;
    if (id > 0.0) rep.pre_ridge = *rep.a2_ridge_optimal / id;
  }
  return rep;
}

TraceSummary sample_traces(const MatrixXd& x, const MatrixXd& z, std::size_t max_bytes) {
  if (x.cols() != z.cols()) throw ContractError("X and Z must have the same number of features");
  if (x.rows() < 1 || z.rows() < 1) throw ContractError("empty design matrix");
  const double n = double(x.rows()), nz = double(z.rows());
  const double entries = n * nz + n * n + n * nz;
  if (entries * sizeof(double) > double(max_bytes))
    throw ContractError("trace products need " + std::to_string(entries * 8.0 / 1e9) +
                        " GB, above the configured memory guard");
  TraceSummary t;
  t.tr_x = x.squaredNorm() / n;
  t.tr_z = z.squaredNorm() / nz;
  const MatrixXd m = z * x.transpose();  // n_z x n
  MatrixXd g = MatrixXd::Zero(x.rows(), x.rows());
  g.selfadjointView<Eigen::Lower>().rankUpdate(x);
  const MatrixXd mg = m * g.selfadjointView<Eigen::Lower>();
  t.tr_xz = m.squaredNorm() / (n * nz);
  t.tr_xzx = mg.cwiseProduct(m).sum() / (n * n * nz);
  return t;
}

AccuracyReport accuracy_from_traces(const TraceSummary& t, Index n, const TraitModel& tm) {
  tm.validate();
  if (n < 1) throw ContractError("sample size must be positive");
  const double h2 = tm.h2_beta, nn = double(n);
  const double num = nn * t.tr_xz * t.tr_xz * h2;
  const double den = nn * t.tr_z * t.tr_xzx * h2 + t.tr_z * t.tr_x * t.tr_xz * (1.0 - h2);
  if (!(den > 0.0)) throw NumericalError("trace estimator has a nonpositive denominator");
  AccuracyReport rep;
  rep.method = AccuracyMethod::Traces;
  rep.inputs = tm;
  rep.a2_marginal = tm.h2_eta * tm.phi * tm.phi * num / den;
  // Moments implied by the traces, with p = tr(S_X) for standardized designs.
  const double p = t.tr_x;
  rep.moments.b1 = 1.0;
  rep.moments.b2 = t.tr_xz / p;
  rep.moments.b3 = (t.tr_xzx - t.tr_x * t.tr_xz / nn) / p;
  rep.moments.source = MomentSource::Population;
  const double id = limit_marginal(tm, SpectralMoments{}).a2.value;
  if (id > 0.0) rep.pre = rep.a2_marginal / id;
  return rep;
}

AccuracyReport accuracy_from_traces(const MatrixXd& x, const MatrixXd& z, const TraitModel& tm) {
  return accuracy_from_traces(sample_traces(x, z), x.rows(), tm);
}

}  // namespace ridgepred
