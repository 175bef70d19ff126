#include "ridgepred/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ridgepred/errors.hpp"

namespace ridgepred {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

R2Result r2_from_prediction(const VectorXd& prediction, const VectorXd& observed, R2Kind kind) {
  if (prediction.size() != observed.size())
    throw ContractError("prediction and outcome lengths differ");
  if (observed.size() == 0) throw ContractError("empty outcome vector");
  const VectorXd a = prediction.array() - prediction.mean();
  const VectorXd b = observed.array() - observed.mean();
  R2Result r;
  r.kind = kind;
  const double na = a.norm(), nb = b.norm();
  if (!(na >= 1e-14 * nb) || nb == 0.0) {
    r.zero_predictor = true;
    return r;
  }
  r.cosine = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  r.r2 = r.cosine * r.cosine;
  return r;
}

R2Result r2_out_of_sample(const EstimatorFit& fit, const MatrixXd& z, const VectorXd& y_z) {
  if (z.cols() != fit.coefficients.size())
    throw ContractError("test design has " + std::to_string(z.cols()) + " columns, fit has " +
                        std::to_string(fit.coefficients.size()));
  if (z.rows() != y_z.size()) throw ContractError("test design and outcome lengths differ");
  return r2_from_prediction(z * fit.coefficients, y_z, R2Kind::OutOfSample);
}

R2Result r2_in_sample(const EstimatorFit& fit, const MatrixXd& x, const VectorXd& y) {
  if (x.cols() != fit.coefficients.size())
    throw ContractError("design has " + std::to_string(x.cols()) + " columns, fit has " +
                        std::to_string(fit.coefficients.size()));
  if (x.rows() != y.size()) throw ContractError("design and outcome lengths differ");
  return r2_from_prediction(x * fit.coefficients, y, R2Kind::InSample);
}

namespace {

// The p x n matrix L with beta_hat = L y.
MatrixXd linear_operator(const EstimatorKind& kind, const MatrixXd& x, MarginalForm form) {
  const Index n = x.rows(), p = x.cols();
  switch (kind.tag) {
    case EstimatorTag::Marginal: {
      if (form == MarginalForm::Shortcut) return x.transpose() / static_cast<double>(n);
      const VectorXd d = x.colwise().squaredNorm().transpose();
      for (Index j = 0; j < p; ++j)
        if (!(d(j) > 0.0)) throw DegenerateFeatureError(static_cast<std::size_t>(j));
      return d.cwiseInverse().asDiagonal() * x.transpose();
    }
    case EstimatorTag::Ridge:
    case EstimatorTag::Blup: {
      const double shift = kind.ridge_lambda(n, p) * static_cast<double>(n);
      if (p > n) {
        MatrixXd k = x * x.transpose();
        k.diagonal().array() += shift;
        Eigen::LLT<MatrixXd> llt(k);
        if (llt.info() != Eigen::Success) throw NumericalError("Cholesky factorization failed");
        return llt.solve(x).transpose();  // (K^{-1} X)^T = X^T K^{-1}
      }
      MatrixXd g = x.transpose() * x;
      g.diagonal().array() += shift;
      Eigen::LLT<MatrixXd> llt(g);
      if (llt.info() != Eigen::Success) throw NumericalError("Cholesky factorization failed");
      return llt.solve(x.transpose());
    }
    case EstimatorTag::RidgeLess:
    case EstimatorTag::BlupLess: {
      Eigen::BDCSVD<MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const VectorXd& s = svd.singularValues();
      const double cutoff = static_cast<double>(std::max(n, p)) *
                            std::numeric_limits<double>::epsilon() * 8.0 * (s.size() ? s(0) : 0.0);
      VectorXd inv(s.size());
      for (Index i = 0; i < s.size(); ++i) inv(i) = s(i) > cutoff ? 1.0 / s(i) : 0.0;
      return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
    }
    case EstimatorTag::Ols: {
      if (n <= p) throw RankError("OLS needs n > p");
      const MatrixXd g = x.transpose() * x;
      Eigen::LLT<MatrixXd> llt(g);
      if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-12))
        throw RankError("X^T X is numerically singular (condition estimate above 1e12)");
      return llt.solve(x.transpose());
    }
  }
  throw ContractError("unknown estimator kind");
}

}  // namespace

MseDecomposition mse_decomposition(const EstimatorKind& kind, const MatrixXd& x,
                                   const VectorXd& beta_true, double sigma_eps,
                                   const SpectralModel& sigma_pop, MarginalForm form) {
  if (beta_true.size() != x.cols()) throw ContractError("beta_true length differs from p");
  if (!(sigma_eps >= 0.0)) throw DomainError("sigma_eps must be nonnegative");
  if (sigma_pop.kind() == SpectralKind::Explicit)
    throw UnsupportedSigmaError("explicit spectra carry no eigenvector convention");
  const std::vector<double> dvec = sigma_pop.expand(static_cast<std::size_t>(x.cols()));
  const Eigen::Map<const VectorXd> d(dvec.data(), static_cast<Index>(dvec.size()));

  const MatrixXd l = linear_operator(kind, x, form);
  MseDecomposition m;
  if (kind.tag != EstimatorTag::Ols) {
    const VectorXd bias = l * (x * beta_true) - beta_true;
    m.bias_sq = bias.cwiseAbs2().dot(d);
  }
  m.variance = sigma_eps * sigma_eps * l.rowwise().squaredNorm().dot(d);
  m.total = m.bias_sq + m.variance;
  return m;
}

}  // namespace ridgepred
