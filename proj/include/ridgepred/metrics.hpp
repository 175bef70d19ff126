#pragma once

#include <Eigen/Dense>

#include "ridgepred/estimators.hpp"
#include "ridgepred/spectral.hpp"

namespace ridgepred {

enum class R2Kind { OutOfSample, InSample };

struct R2Result {
  double r2 = 0.0;
  double cosine = 0.0;
  R2Kind kind = R2Kind::OutOfSample;
  bool zero_predictor = false;
};

struct MseDecomposition {
  double total = 0.0;
  double bias_sq = 0.0;
  double variance = 0.0;
};

// Squared cosine between the centered prediction and the centered outcome.
R2Result r2_from_prediction(const Eigen::VectorXd& prediction, const Eigen::VectorXd& observed,
                            R2Kind kind);
R2Result r2_out_of_sample(const EstimatorFit& fit, const Eigen::MatrixXd& z,
                          const Eigen::VectorXd& y_z);
R2Result r2_in_sample(const EstimatorFit& fit, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// Conditional-on-X bias/variance of the estimator measured in the Sigma norm,
// for y = X beta_true + eps with eps ~ (0, sigma_eps^2 I).  Sigma is the
// diagonal matrix with the spectrum of sigma_pop laid out in index order.
// form selects the marginal variant and is ignored for other kinds.
MseDecomposition mse_decomposition(const EstimatorKind& kind, const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& beta_true, double sigma_eps,
                                   const SpectralModel& sigma_pop,
                                   MarginalForm form = MarginalForm::ExactDiagonal);

}  // namespace ridgepred
