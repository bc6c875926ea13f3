#pragma once

#include <optional>
#include <span>

#include <Eigen/Dense>

namespace tlpo {

/// Logistic function, stable for |x| up to ~700. Throws std::domain_error on non-finite x.
double expit(double x);
double logit(double p);

/// Cutpoints alpha (length c-1) and log odds ratios beta (length K-1) of
/// logit pr(Cat <= j | A = a) = alpha_j + beta_a, beta_0 = 0.
struct ModelParams {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;

  int categories() const { return static_cast<int>(alpha.size()) + 1; }
  int arms() const { return static_cast<int>(beta.size()) + 1; }
  /// beta_a with the control arm pinned at 0.
  double arm_effect(int arm) const { return arm == 0 ? 0.0 : beta(arm - 1); }
  /// Throws DataError unless alpha is strictly increasing and everything is finite.
  void check() const;
};

/// Arm-specific cumulative probabilities p(j, a) = expit(alpha_j + beta_a),
/// pbar_j = sum_a pi_a p(j,a)(1 - p(j,a)), and the arm probabilities used.
struct CumulativeProbs {
  Eigen::MatrixXd p;  // (c-1) x K
  Eigen::VectorXd pbar;
  Eigen::VectorXd pi;

  int categories() const { return static_cast<int>(p.rows()) + 1; }
  int arms() const { return static_cast<int>(p.cols()); }
};

CumulativeProbs cumulative_probs(const ModelParams& params, const Eigen::VectorXd& pi);

/// Blocks of minus the expected Jacobian of the stacked working-independence
/// estimating function: [[B11, B12], [B12', B22]].
struct ScoreBlocks {
  Eigen::VectorXd b11;  // diagonal, length c-1
  Eigen::MatrixXd b12;  // (c-1) x (K-1)
  Eigen::VectorXd b22;  // diagonal, length K-1
};

ScoreBlocks score_blocks(const CumulativeProbs& probs);

/// Working-independence estimating function M(F; alpha, beta) for one (arm, cat),
/// length (c-1) + (K-1).
Eigen::VectorXd estfun_M(int arm, int cat, const ModelParams& params);

/// Efficient score for beta with alpha profiled out: the scalar closed form for
/// K = 2, the block form (-B12' B11^-1, I) M for K > 2.
Eigen::VectorXd efficient_score(int arm, int cat, const CumulativeProbs& probs);
double efficient_score_two_arm(int arm, int cat, const CumulativeProbs& probs);
Eigen::VectorXd efficient_score_blocks(int arm, int cat, const CumulativeProbs& probs);

/// m(arm, cat) for every cell; row index arm * c + (cat - 1), K-1 columns.
class ScoreTable {
 public:
  explicit ScoreTable(const CumulativeProbs& probs);
  auto operator()(int arm, int cat) const { return table_.row(arm * categories_ + cat - 1); }
  int categories() const { return categories_; }

 private:
  int categories_;
  Eigen::MatrixXd table_;
};

/// Normalizer V = B22 - B12' B11^-1 B12 (scalar closed form when K = 2).
/// Throws DegenerateModelError unless it is numerically positive definite.
Eigen::MatrixXd v_matrix(const CumulativeProbs& probs);
double v_two_arm(const CumulativeProbs& probs);
Eigen::MatrixXd v_schur(const CumulativeProbs& probs);

/// Weighted counts of (arm, cat) cells: K x c, column cat - 1.
using CellTable = Eigen::MatrixXd;
CellTable tabulate(std::span<const int> arms, std::span<const int> cats,
                   std::span<const double> weights, int n_arms, int n_categories);

struct NewtonOptions {
  double tol = 1e-10;        // max |estimating equation component|
  double step_tol = 1e-12;   // max |step component|
  int max_iter = 50;
  int max_halvings = 10;
  double separation = 30.0;  // abort when any |alpha_j + beta_a| exceeds this
  // converged fits with every pooled category observed must stay inside this
  double fitted_limit = 20.0;
  double boundary_start = 15.0;
  std::optional<ModelParams> start;
};

struct OrdinalFit {
  ModelParams params;
  Eigen::VectorXd gamma;  // covariate coefficients (adjusted fit only)
  Eigen::MatrixXd cov;    // covariance of (alpha, beta, gamma); empty for working independence
  int iterations = 0;
  bool converged = false;
  bool boundary_start = false;

  /// Covariance block of beta.
  Eigen::MatrixXd beta_cov() const;
};

/// Multinomial proportional-odds MLE by Newton iteration with observed-information covariance.
OrdinalFit fit_mle(const CellTable& cells, const NewtonOptions& opts = {});

/// MLE of logit pr(Cat <= j | X, A) = alpha_j + beta_A + gamma' X.
OrdinalFit fit_mle_adjusted(std::span<const int> arms, std::span<const int> cats,
                            const Eigen::MatrixXd& x, int n_arms, int n_categories,
                            const NewtonOptions& opts = {});

/// Newton solve of sum_i w_i M(F_i; alpha, beta) = 0 over weighted cells.
OrdinalFit solve_working_independence(const CellTable& cells, const NewtonOptions& opts = {});

/// Empirical arm frequencies.
Eigen::VectorXd arm_frequencies(std::span<const int> arms, int n_arms);

}  // namespace tlpo
