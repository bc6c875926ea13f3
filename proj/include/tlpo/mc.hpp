#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tlpo/aipw.hpp"
#include "tlpo/simgen.hpp"

namespace tlpo {

struct McConfig {
  ScenarioConfig scenario;
  int reps = 5000;
  std::vector<Method> estimators{Method::Ideal,  Method::IdealAdj, Method::FullAdj, Method::Naive,
                                 Method::Ninety, Method::Ipw,      Method::Aipw1,   Method::Aipw2};
  std::string basis = "default";
  int workers = 1;
  Method reference = Method::Aipw2;  // denominator of the MSE ratio
  double max_failure_rate = 0.05;
  EstimateOptions options;
};

/// One estimator's row for one beta component.
struct EstimatorSummary {
  std::string estimator;
  int component = 1;  // r in beta_r
  double truth = 1.0;  // odds ratio used for coverage and MSE
  std::optional<double> mc_mean;
  std::optional<double> mc_median;
  std::optional<double> mc_sd;
  std::optional<double> ave_se;
  std::optional<double> coverage;
  std::optional<double> mse_ratio;
  std::optional<double> reject_rate;
  int replicates = 0;
  int failures = 0;

  bool operator==(const EstimatorSummary&) const = default;
};

struct McSummary {
  std::vector<std::pair<std::string, std::string>> config;  // effective settings, in order
  std::vector<EstimatorSummary> rows;

  bool operator==(const McSummary&) const = default;
};

/// Per-replicate estimates (beta and se per component); empty when the fit failed.
struct ReplicateEstimate {
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  std::string error;
  bool ok() const { return error.empty(); }
};

struct McRun {
  McSummary summary;
  /// estimates[e][rep] for estimator e of McConfig::estimators.
  std::vector<std::vector<ReplicateEstimate>> estimates;
};

/// Effective configuration as ordered key/value pairs.
std::vector<std::pair<std::string, std::string>> describe(const McConfig& cfg);

/// Estimates for one replicate, in estimator order.
std::vector<ReplicateEstimate> run_replicate(const McConfig& cfg, const AugmentationBasis& basis,
                                             std::uint64_t replicate);

/// Aggregates replicate estimates into the summary table.
McSummary summarize(const McConfig& cfg, const std::vector<std::vector<ReplicateEstimate>>& estimates);

/// Runs cfg.reps replicates over cfg.workers threads. Throws EstimationError when an
/// estimator fails in more than cfg.max_failure_rate of replicates.
McRun run_mc(const McConfig& cfg, const std::function<void(int done)>& progress = {});

}  // namespace tlpo
