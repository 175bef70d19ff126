#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace ridgepred {

enum class EstimatorTag { Marginal, Ridge, RidgeLess, Ols, Blup, BlupLess };

struct EstimatorKind {
  EstimatorTag tag = EstimatorTag::Marginal;
  double parameter = 0.0;  // lambda for Ridge, tau for Blup, unused otherwise

  static EstimatorKind marginal() { return {EstimatorTag::Marginal, 0.0}; }
  static EstimatorKind ridge(double lambda);
  static EstimatorKind ridgeless() { return {EstimatorTag::RidgeLess, 0.0}; }
  static EstimatorKind ols() { return {EstimatorTag::Ols, 0.0}; }
  static EstimatorKind blup(double tau);
  static EstimatorKind blupless() { return {EstimatorTag::BlupLess, 0.0}; }

  std::string label() const;
  // Ridge penalty equivalent to this kind for an n x p design (Blup: tau p / n).
  double ridge_lambda(Eigen::Index n, Eigen::Index p) const;
  bool operator==(const EstimatorKind&) const = default;
};

struct EstimatorFit {
  Eigen::VectorXd coefficients;
  EstimatorKind kind;
  Eigen::Index n = 0;
  Eigen::Index p = 0;
};

enum class MarginalForm { ExactDiagonal, Shortcut };

// Centers each column and scales it to unit variance (divisor n).
Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& x);
void standardize_columns_inplace(Eigen::MatrixXd& x);

EstimatorFit fit_marginal(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          MarginalForm form = MarginalForm::ExactDiagonal);
EstimatorFit fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda);
EstimatorFit fit_blup(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double tau);
EstimatorFit fit_ridgeless(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
EstimatorFit fit_blupless(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
EstimatorFit fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
EstimatorFit fit(const EstimatorKind& kind, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// Which linear system fit_ridge solves.  Auto picks the p x p system when
// p <= n and the n x n dual otherwise.
enum class RidgePath { Auto, Primal, Dual };
EstimatorFit fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                       RidgePath path);

// Ridge fits for many penalties on one design.  The smaller Gram matrix is
// formed once; each penalty costs one Cholesky factorization.
class RidgeSolver {
 public:
  RidgeSolver(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
  EstimatorFit solve(double lambda) const;
  EstimatorFit solve(const EstimatorKind& kind) const;

 private:
  const Eigen::MatrixXd& x_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd rhs_;  // X^T y on the primal path
  bool dual_;
};

struct StudySummary {
  Eigen::VectorXd beta_hat;
  Eigen::Index n = 0;
};

struct SummaryPanel {
  std::vector<StudySummary> studies;
  Eigen::VectorXd weights;
  bool use_optimal_weights = false;  // d* = (n_1, ..., n_k), ignores weights

  Eigen::VectorXd effective_weights() const;
};

// B d: the weighted sum of per-study marginal estimators.
EstimatorFit meta_aggregate(const SummaryPanel& panel);

}  // namespace ridgepred
