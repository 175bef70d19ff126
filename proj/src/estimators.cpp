#include "ridgepred/estimators.hpp"

#include <cmath>
#include <limits>

#include "ridgepred/errors.hpp"

namespace ridgepred {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_dims(const MatrixXd& x, const VectorXd& y) {
  if (x.rows() != y.size())
    throw ContractError("design has " + std::to_string(x.rows()) + " rows but response has " +
                        std::to_string(y.size()) + " entries");
  if (x.rows() == 0 || x.cols() == 0) throw ContractError("empty design matrix");
}

EstimatorFit make_fit(VectorXd beta, EstimatorKind kind, const MatrixXd& x) {
  if (!beta.allFinite()) throw NumericalError(kind.label() + " fit produced non-finite coefficients");
  return EstimatorFit{std::move(beta), kind, x.rows(), x.cols()};
}

// Solves (G + shift I) a = b by Cholesky, G symmetric positive semidefinite.
VectorXd spd_solve(const MatrixXd& g, double shift, const VectorXd& b) {
  MatrixXd a = g;
  a.diagonal().array() += shift;
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw NumericalError("Cholesky factorization failed");
  return llt.solve(b);
}

}  // namespace

EstimatorKind EstimatorKind::ridge(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("ridge lambda must be > 0");
  return {EstimatorTag::Ridge, lambda};
}

EstimatorKind EstimatorKind::blup(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("BLUP tau must be > 0");
  return {EstimatorTag::Blup, tau};
}

std::string EstimatorKind::label() const {
  switch (tag) {
    case EstimatorTag::Marginal: return "marginal";
    case EstimatorTag::Ridge: return "ridge";
    case EstimatorTag::RidgeLess: return "ridgeless";
    case EstimatorTag::Ols: return "ols";
    case EstimatorTag::Blup: return "blup";
    case EstimatorTag::BlupLess: return "blupless";
  }
  return "unknown";
}

double EstimatorKind::ridge_lambda(Index n, Index p) const {
  switch (tag) {
    case EstimatorTag::Ridge: return parameter;
    case EstimatorTag::Blup: return parameter * static_cast<double>(p) / static_cast<double>(n);
    default: throw ContractError(label() + " has no ridge penalty");
  }
}

void standardize_columns_inplace(MatrixXd& x) {
  if (x.rows() < 2) throw ContractError("standardization needs at least two rows");
  const double n = static_cast<double>(x.rows());
  for (Index j = 0; j < x.cols(); ++j) {
    auto c = x.col(j);
    c.array() -= c.mean();
    const double var = c.squaredNorm() / n;
    if (!(var >= 1e-12)) throw DegenerateFeatureError(static_cast<std::size_t>(j));
    c /= std::sqrt(var);
  }
}

MatrixXd standardize_columns(const MatrixXd& x) {
  MatrixXd out = x;
  standardize_columns_inplace(out);
  return out;
}

EstimatorFit fit_marginal(const MatrixXd& x, const VectorXd& y, MarginalForm form) {
  check_dims(x, y);
  VectorXd xty = x.transpose() * y;
  if (form == MarginalForm::Shortcut) return make_fit(xty / static_cast<double>(x.rows()),
                                                      EstimatorKind::marginal(), x);
  const VectorXd diag = x.colwise().squaredNorm().transpose();
  for (Index j = 0; j < diag.size(); ++j)
    if (!(diag(j) > 0.0)) throw DegenerateFeatureError(static_cast<std::size_t>(j));
  return make_fit(xty.cwiseQuotient(diag), EstimatorKind::marginal(), x);
}

EstimatorFit fit_ridge(const MatrixXd& x, const VectorXd& y, double lambda, RidgePath path) {
  check_dims(x, y);
  const auto kind = EstimatorKind::ridge(lambda);
  const double shift = lambda * static_cast<double>(x.rows());
  const bool dual = path == RidgePath::Dual || (path == RidgePath::Auto && x.cols() > x.rows());
  if (dual) {
    MatrixXd k = MatrixXd::Zero(x.rows(), x.rows());
    k.selfadjointView<Eigen::Lower>().rankUpdate(x);
    k = k.selfadjointView<Eigen::Lower>();
    return make_fit(x.transpose() * spd_solve(k, shift, y), kind, x);
  }
  MatrixXd g = MatrixXd::Zero(x.cols(), x.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
  g = g.selfadjointView<Eigen::Lower>();
  return make_fit(spd_solve(g, shift, x.transpose() * y), kind, x);
}

EstimatorFit fit_ridge(const MatrixXd& x, const VectorXd& y, double lambda) {
  return fit_ridge(x, y, lambda, RidgePath::Auto);
}

EstimatorFit fit_blup(const MatrixXd& x, const VectorXd& y, double tau) {
  check_dims(x, y);
  const auto kind = EstimatorKind::blup(tau);
  MatrixXd k = MatrixXd::Zero(x.rows(), x.rows());
  k.selfadjointView<Eigen::Lower>().rankUpdate(x);
  k = k.selfadjointView<Eigen::Lower>();
  return make_fit(x.transpose() * spd_solve(k, tau * static_cast<double>(x.cols()), y), kind, x);
}

EstimatorFit fit_ridgeless(const MatrixXd& x, const VectorXd& y) {
  check_dims(x, y);
  Eigen::BDCSVD<MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  const double rtol = static_cast<double>(std::max(x.rows(), x.cols())) *
                      std::numeric_limits<double>::epsilon() * 8.0;
  const double cutoff = s.size() > 0 ? rtol * s(0) : 0.0;
  VectorXd uty = svd.matrixU().transpose() * y;
  for (Index i = 0; i < s.size(); ++i) uty(i) = s(i) > cutoff ? uty(i) / s(i) : 0.0;
  return make_fit(svd.matrixV() * uty, EstimatorKind::ridgeless(), x);
}

EstimatorFit fit_blupless(const MatrixXd& x, const VectorXd& y) {
  auto f = fit_ridgeless(x, y);
  f.kind = EstimatorKind::blupless();
  return f;
}

EstimatorFit fit_ols(const MatrixXd& x, const VectorXd& y) {
  check_dims(x, y);
  if (x.rows() <= x.cols())
    throw RankError("OLS needs n > p (n=" + std::to_string(x.rows()) +
                    ", p=" + std::to_string(x.cols()) + ")");
  MatrixXd g = x.transpose() * x;
  Eigen::LLT<MatrixXd> llt(g);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-12))
    throw RankError("X^T X is numerically singular (condition estimate above 1e12)");
  return make_fit(llt.solve(x.transpose() * y), EstimatorKind::ols(), x);
}

EstimatorFit fit(const EstimatorKind& kind, const MatrixXd& x, const VectorXd& y) {
  switch (kind.tag) {
    case EstimatorTag::Marginal: return fit_marginal(x, y);
    case EstimatorTag::Ridge: return fit_ridge(x, y, kind.parameter);
    case EstimatorTag::RidgeLess: return fit_ridgeless(x, y);
    case EstimatorTag::Ols: return fit_ols(x, y);
    case EstimatorTag::Blup: return fit_blup(x, y, kind.parameter);
    case EstimatorTag::BlupLess: return fit_blupless(x, y);
  }
  throw ContractError("unknown estimator kind");
}

RidgeSolver::RidgeSolver(const MatrixXd& x, const VectorXd& y)
    : x_(x), y_(y), dual_(x.cols() > x.rows()) {
  check_dims(x, y);
  if (dual_) {
    gram_ = MatrixXd::Zero(x.rows(), x.rows());
    gram_.selfadjointView<Eigen::Lower>().rankUpdate(x);
  } else {
    gram_ = MatrixXd::Zero(x.cols(), x.cols());
    gram_.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    rhs_ = x.transpose() * y;
  }
  gram_ = gram_.selfadjointView<Eigen::Lower>();
}

EstimatorFit RidgeSolver::solve(double lambda) const {
  const auto kind = EstimatorKind::ridge(lambda);
  const double shift = lambda * static_cast<double>(x_.rows());
  if (dual_) return make_fit(x_.transpose() * spd_solve(gram_, shift, y_), kind, x_);
  return make_fit(spd_solve(gram_, shift, rhs_), kind, x_);
}

EstimatorFit RidgeSolver::solve(const EstimatorKind& kind) const {
  auto f = solve(kind.ridge_lambda(x_.rows(), x_.cols()));
  f.kind = kind;
  return f;
}

Eigen::VectorXd SummaryPanel::effective_weights() const {
  if (use_optimal_weights) {
    VectorXd d(static_cast<Index>(studies.size()));
    for (std::size_t i = 0; i < studies.size(); ++i) d(static_cast<Index>(i)) = static_cast<double>(studies[i].n);
    return d;
  }
  if (weights.size() != static_cast<Index>(studies.size()))
    throw ContractError("panel has " + std::to_string(studies.size()) + " studies but " +
                        std::to_string(weights.size()) + " weights");
  if (!weights.allFinite()) throw ContractError("panel weights must be finite");
  return weights;
}

EstimatorFit meta_aggregate(const SummaryPanel& panel) {
  if (panel.studies.empty()) throw ContractError("summary panel has no studies");
  const Index p = panel.studies.front().beta_hat.size();
  Index total_n = 0;
  for (const auto& s : panel.studies) {
    if (s.beta_hat.size() != p) throw ContractError("studies disagree on the number of features");
    if (s.n <= 0) throw ContractError("study sample sizes must be positive");
    total_n += s.n;
  }
  const VectorXd d = panel.effective_weights();
  VectorXd agg = VectorXd::Zero(p);
  for (std::size_t i = 0; i < panel.studies.size(); ++i)
    agg += d(static_cast<Index>(i)) * panel.studies[i].beta_hat;
  if (!agg.allFinite()) throw NumericalError("meta aggregation produced non-finite coefficients");
  return EstimatorFit{std::move(agg), EstimatorKind::marginal(), total_n, p};
}

}  // namespace ridgepred
