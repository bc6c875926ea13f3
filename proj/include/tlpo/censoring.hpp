#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "tlpo/data.hpp"

namespace tlpo {

inline constexpr double kPositivityFloor = 1e-3;

enum class HazardForm {
  NelsonAalen,  // dLambda(u_k) = dN / Y, as in the plug-in estimating equation
  NegLogKM,     // dLambda(u_k) = -log(1 - dN / Y), i.e. Lambda = -log K
};

/// Arm-specific product-limit estimate of the censoring survival K(u, a) = pr(C >= u | A = a),
/// treating delta = 0 as the event.
struct KaplanMeierCurve {
  int arm = 0;
  std::size_t subjects = 0;
  std::vector<double> event_times;        // distinct censoring times, ascending
  std::vector<double> atrisk;             // Y(u_k) = #{U >= u_k}
  std::vector<double> censored;           // dN_c(u_k)
  std::vector<double> survival;           // K just after u_k
  std::vector<double> hazard_increments;  // dLambda(u_k)

  std::size_t size() const noexcept { return event_times.size(); }

  /// K(u-): product over event times strictly below u. Equals 1 for u <= first event.
  double survival_before(double u) const;

  /// Number of event times <= u.
  std::size_t events_through(double u) const {
    return static_cast<std::size_t>(
        std::upper_bound(event_times.begin(), event_times.end(), u) - event_times.begin());
  }
};

KaplanMeierCurve fit_censoring_km(std::span<const double> u, std::span<const char> delta, int arm = 0,
                                  HazardForm form = HazardForm::NelsonAalen);
KaplanMeierCurve fit_censoring_km(const ObservedData& data, int arm,
                                  HazardForm form = HazardForm::NelsonAalen);

/// Left-continuous K(u-, arm). Throws PositivityError when the value is below floor.
double survival_at(const KaplanMeierCurve& curve, double u, double floor = kPositivityFloor);

/// Integral of g against the subject's censoring martingale
///   (1 - delta) g(U) - sum_{u_k <= U} dLambda(u_k) g(u_k).
/// g is called with the index k of the curve event time and that time.
template <class Integrand>
double martingale_integral(double u, bool delta, const KaplanMeierCurve& curve, Integrand&& g) {
  const std::size_t m = curve.events_through(u);
  double out = 0.0;
  for (std::size_t k = 0; k < m; ++k) out -= curve.hazard_increments[k] * g(k, curve.event_times[k]);
  if (!delta) {
    // a censored subject's U is one of the curve's event times
    out += g(m - 1, curve.event_times[m - 1]);
  }
  return out;
}

}  // namespace tlpo
