#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tlpo/basis.hpp"
#include "tlpo/censoring.hpp"
#include "tlpo/data.hpp"
#include "tlpo/propodds.hpp"

namespace tlpo {

enum class Method {
  Ideal,     // full-data MLE
  IdealAdj,  // full-data covariate-conditional MLE
  FullAdj,   // full-data one-step covariate-adjusted estimator
  Naive,     // MLE on delta = 1 records
  Ninety,    // MLE on records with C >= horizon
  Ipw,       // inverse-probability-weighted complete case
  Aipw1,     // augmented with baseline covariates
  Aipw2,     // augmented with baseline and time-dependent covariates
};

std::string_view method_name(Method m);
/// Accepts the names above case-insensitively plus IDEAL_ADJ / FULL_ADJ / AIPW1_FULL spellings.
Method parse_method(std::string_view name);
/// True for estimators computed from the full (uncensored) data.
bool uses_full_data(Method m);

struct EstimateOptions {
  std::optional<Eigen::VectorXd> pi;  // known randomization probabilities
  double positivity_floor = kPositivityFloor;
  bool truncate_weights = false;  // clamp K at the floor instead of failing
  HazardForm hazard = HazardForm::NelsonAalen;
  double rank_tol = 1e-10;
  bool general_k_path = false;  // use the block (K >= 2) formulas even when K = 2
  NewtonOptions newton;
};

struct Diagnostics {
  int iterations = 0;
  std::size_t n = 0;
  double censored_fraction = 0.0;
  double min_censoring_survival = 1.0;  // smallest K(U-) among weighted records
  double max_weight = 1.0;
  int truncated = 0;
  int dropped_columns = 0;
  bool boundary_start = false;
};

struct EstimateResult {
  Method method = Method::Aipw2;
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;
  Eigen::VectorXd se;
  Eigen::VectorXd odds_ratio;
  Eigen::VectorXd ci_lower;  // odds-ratio scale
  Eigen::VectorXd ci_upper;
  Eigen::VectorXd wald_z;
  Eigen::VectorXd p_value;
  Diagnostics diagnostics;
};

/// Fills se, odds ratio, Wald interval/test from beta and cov.
EstimateResult make_result(Method method, Eigen::VectorXd beta, Eigen::MatrixXd cov,
                           Diagnostics diag);

/// One Kaplan-Meier censoring curve per arm.
std::vector<KaplanMeierCurve> fit_censoring_curves(const ObservedData& data, HazardForm form);

/// Delta_i / K(U_i-, A_i) with positivity enforcement.
struct IpwWeights {
  std::vector<double> w;
  double min_survival = 1.0;
  double max_weight = 0.0;
  int truncated = 0;
};
IpwWeights ipw_weights(const ObservedData& data, const std::vector<KaplanMeierCurve>& curves,
                       double floor, bool truncate);

struct IpwFit {
  ModelParams params;
  CumulativeProbs probs;  // at (alpha_hat, beta_init, pi_hat)
  Eigen::MatrixXd v;      // V(alpha_hat, beta_init)
  Eigen::MatrixXd y;      // dependent variable, n x (K-1)
  IpwWeights weights;
  EstimateResult result;
};

/// Step (1): IPWCC solve plus the influence-function standard error.
IpwFit fit_ipwcc(const ObservedData& data, const std::vector<KaplanMeierCurve>& curves,
                 const EstimateOptions& opts = {});

/// Y_i = w_i m_i + integral dM_c mu(m,u,A)/K(u,A), rows ordered as data.records.
Eigen::MatrixXd dependent_variable(const ObservedData& data,
                                   const std::vector<KaplanMeierCurve>& curves,
                                   std::span<const double> weights, const Eigen::MatrixXd& m);

/// Augmentation design. Baseline block: {I(A=a) - pi_a} f_m(X), a = 1..K-1, m = 0..M
/// (column a-major). Martingale block: I(A=a) int dM_c [h_l - mu(h_l,u,a)], a = 0..K-1, l = 1..L.
struct Design {
  Eigen::MatrixXd z;
  int arms = 2;
  int baseline_terms = 1;  // M + 1
  int timedep_terms = 0;   // L
  int baseline_cols() const { return (arms - 1) * baseline_terms; }
  int martingale_cols() const { return static_cast<int>(z.cols()) - baseline_cols(); }
};

Design build_design(const ObservedData& data, const std::vector<KaplanMeierCurve>& curves,
                    const AugmentationBasis& basis, const Eigen::VectorXd& pi_hat,
                    bool with_martingale = true);
Design build_baseline_design(const FullData& data, const AugmentationBasis& basis,
                             const Eigen::VectorXd& pi_hat);

/// Least-squares fit of each response column on the design plus an intercept.
struct RegressionFit {
  Eigen::MatrixXd coef;        // cols(z) x responses
  Eigen::RowVectorXd intercept;
  int rank = 0;
  int dropped = 0;  // columns lost to the singular-value tolerance

  /// Predictions without the intercept.
  Eigen::MatrixXd predict(const Eigen::MatrixXd& z) const { return z * coef; }
};

RegressionFit project(const Eigen::MatrixXd& y, const Eigen::MatrixXd& z, double rank_tol = 1e-10);

/// psi(a, r, m) and phi(a, r, l) views of the stacked coefficients.
double psi(const RegressionFit& fit, const Design& d, int arm, int response, int term);
double phi(const RegressionFit& fit, const Design& d, int arm, int response, int term);

/// beta_init - V^-1 mean(Pred).
Eigen::VectorXd one_step(const Eigen::VectorXd& beta_init, const Eigen::MatrixXd& v,
                         const Eigen::MatrixXd& preds);

/// V^-1 [sum (Y_i - Pred_i)(Y_i - Pred_i)'] V^-1 / n^2.
Eigen::MatrixXd variance(const Eigen::MatrixXd& v, const Eigen::MatrixXd& y,
                         const Eigen::MatrixXd& preds);

/// Full-data one-step covariate-adjusted estimator (no censoring, no martingale terms).
EstimateResult covariate_adjusted_full(const FullData& data, const AugmentationBasis& basis,
                                       const EstimateOptions& opts = {},
                                       std::optional<Eigen::MatrixXd> force_coef = std::nullopt);

/// Runs one estimator on interim data. Full-data methods require an uncensored dataset.
EstimateResult estimate(const ObservedData& data, Method method, const AugmentationBasis& basis,
                        const EstimateOptions& opts = {});

/// Runs a full-data benchmark (Ideal, IdealAdj, FullAdj).
EstimateResult estimate_full(const FullData& data, Method method, const AugmentationBasis& basis,
                             const EstimateOptions& opts = {});

}  // namespace tlpo
