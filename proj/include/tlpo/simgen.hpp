#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tlpo/data.hpp"

namespace tlpo {

enum class ScenarioId { S1, S2, S3, S4, S5, S6, K3 };

std::string_view scenario_name(ScenarioId id);
/// "1".."6", "s1".."s6", "k3" (case-insensitive).
ScenarioId parse_scenario(std::string_view name);

struct Scenario6Params {
  double lambda_h0 = 0.0149;
  double lambda_d0 = 0.0139;
  double c1 = 9.16;
  double c2 = 39.19;
  double death_window = 40.0;  // deaths counted only before this day
  double p40 = 2.0 / 3.0;
  double xi = 0.25489224962879004;  // log(1 / 0.775)
};

struct ScenarioConfig {
  ScenarioId id = ScenarioId::S1;
  int n = 602;
  std::vector<double> odds_ratios{1.5};  // one per non-control arm
  std::vector<double> cutpoints;         // on the latent scale, 0 ... 1
  double hospital_cut = 0.52;            // Gamma below this leaves hospital before the horizon
  double gamma = 1.5;                    // covariate strength
  double zeta = 135.0;                   // censoring C ~ U(0, zeta)
  double horizon = 90.0;
  std::vector<std::pair<double, double>> death_windows{{0, 30}, {20, 50}};
  double ph_exp_xi = 1.315;  // Scenario 5
  Scenario6Params s6;
  std::uint64_t seed = 20240101;

  int arms() const { return id == ScenarioId::K3 ? 3 : 2; }
  int categories() const { return static_cast<int>(cutpoints.size()) - 1; }
  /// Odds ratios the estimators target; calibrated limits for the non-PO scenarios.
  std::vector<double> target_odds_ratios() const;
  /// Throws ConfigError when an invariant fails.
  void check() const;
};

ScenarioConfig scenario_defaults(ScenarioId id);

/// Full data and the matching interim data built from the same draws.
struct ScenarioData {
  FullData full;
  ObservedData observed;
};

ScenarioData gen_po_scenario(const ScenarioConfig& cfg, std::uint64_t replicate = 0);
ScenarioData gen_ph_scenario(const ScenarioConfig& cfg, std::uint64_t replicate = 0);
ScenarioData gen_scenario6(const ScenarioConfig& cfg, std::uint64_t replicate = 0);
ScenarioData gen_k3_scenario(const ScenarioConfig& cfg, std::uint64_t replicate = 0);
/// Dispatches on cfg.id.
ScenarioData generate(const ScenarioConfig& cfg, std::uint64_t replicate = 0);

/// Latent draw for the PO / PH / K = 3 scenarios; exposed for tests.
double po_gamma(double upsilon, int arm, const std::vector<double>& odds_ratios);
double ph_gamma(double upsilon, int arm, double exp_xi);
/// Category index (1-based) of a latent value against the cutpoints.
int category_of(double g, const std::vector<double>& cutpoints);

/// Scenario 6 outcome under one arm given the shared uniforms.
struct S6Outcome {
  int cat = 0;
  double time = 0.0;  // death time, time leaving hospital, or 90
};
S6Outcome s6_outcome(const Scenario6Params& p, int arm, double uh, double ud, double u4,
                     double horizon = 90.0);

}  // namespace tlpo
