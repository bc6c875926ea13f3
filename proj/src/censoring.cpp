#include "tlpo/censoring.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "tlpo/error.hpp"

namespace tlpo {

double KaplanMeierCurve::survival_before(double u) const {
  auto it = std::lower_bound(event_times.begin(), event_times.end(), u);
  if (it == event_times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - event_times.begin()) - 1];
}

KaplanMeierCurve fit_censoring_km(std::span<const double> u, std::span<const char> delta, int arm,
                                  HazardForm form) {
  if (u.size() != delta.size()) throw DataError("fit_censoring_km: input lengths differ");
  if (u.empty()) throw DataError("fit_censoring_km: arm " + std::to_string(arm) + " is empty");
  std::vector<std::size_t> order(u.size());
  std::iota(order.begin(), order.end(), 0);
  // ties: outcomes before censorings; the counts below are invariant to input order
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (u[a] != u[b]) return u[a] < u[b];
    return delta[a] > delta[b];
  });

  KaplanMeierCurve curve;
  curve.arm = arm;
  curve.subjects = u.size();
  double surv = 1.0;
  std::size_t i = 0;
  const std::size_t n = u.size();
  while (i < n) {
    const double t = u[order[i]];
    const double at_risk = static_cast<double>(n - i);
    double d = 0.0;
    std::size_t j = i;
    for (; j < n && u[order[j]] == t; ++j) {
      if (!delta[order[j]]) d += 1.0;
    }
    if (d > 0.0) {
      const double frac = d / at_risk;
      surv *= 1.0 - frac;
      double dl = frac;
      if (form == HazardForm::NegLogKM) {
        if (frac >= 1.0) {
          throw DegenerateModelError("-log K hazard is infinite: every at-risk subject censored at " +
                                     std::to_string(t));
        }
        dl = -std::log1p(-frac);
      }
      curve.event_times.push_back(t);
      curve.atrisk.push_back(at_risk);
      curve.censored.push_back(d);
      curve.survival.push_back(surv);
      curve.hazard_increments.push_back(dl);
    }
    i = j;
  }
  return curve;
}

KaplanMeierCurve fit_censoring_km(const ObservedData& data, int arm, HazardForm form) {
  std::vector<double> u;
  std::vector<char> delta;
  for (const auto& r : data.records) {
    if (r.arm != arm) continue;
    u.push_back(r.u);
    delta.push_back(r.delta ? 1 : 0);
  }
  return fit_censoring_km(u, delta, arm, form);
}

double survival_at(const KaplanMeierCurve& curve, double u, double floor) {
  const double k = curve.survival_before(u);
  if (k < floor) {
    throw PositivityError("censoring survival " + std::to_string(k) + " below floor at u = " +
                          std::to_string(u) + " in arm " + std::to_string(curve.arm));
  }
  return k;
}

}  // namespace tlpo
