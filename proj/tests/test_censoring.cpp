#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "tlpo/censoring.hpp"
#include "tlpo/error.hpp"

using namespace tlpo;

namespace {
// censored at 2 (tied with an outcome), 3, 4; outcomes at 1, 2, 5
const std::vector<double> kU{1, 2, 2, 3, 4, 5};
const std::vector<char> kDelta{1, 0, 1, 0, 0, 1};
}  // namespace

TEST_CASE("hand-computed Kaplan-Meier censoring curve") {
  const auto km = fit_censoring_km(kU, kDelta);
  REQUIRE(km.size() == 3);
  CHECK(km.event_times == std::vector<double>{2, 3, 4});
  CHECK(km.atrisk == std::vector<double>{5, 3, 2});
  CHECK(std::abs(km.survival[0] - 0.8) < 1e-15);
  CHECK(std::abs(km.survival[1] - 0.8 * 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(km.survival[2] - 0.8 * 2.0 / 3.0 * 0.5) < 1e-15);
  CHECK(std::abs(km.hazard_increments[1] - 1.0 / 3.0) < 1e-15);

  // left limits
  CHECK(km.survival_before(2.0) == 1.0);
  CHECK(std::abs(km.survival_before(2.5) - 0.8) < 1e-15);
  CHECK(std::abs(km.survival_before(3.0) - 0.8) < 1e-15);
  CHECK(std::abs(km.survival_before(5.0) - 0.8 / 3.0) < 1e-15);
  CHECK(km.events_through(2.0) == 1);
  CHECK(km.events_through(1.9) == 0);
}

TEST_CASE("negative-log hazard form") {
  const auto km = fit_censoring_km(kU, kDelta, 0, HazardForm::NegLogKM);
  CHECK(std::abs(km.hazard_increments[0] + std::log(0.8)) < 1e-15);
  CHECK(std::abs(km.hazard_increments[2] - std::log(2.0)) < 1e-15);
  // last subject censored alone: infinite hazard
  const std::vector<double> u{1, 2};
  const std::vector<char> d{1, 0};
  CHECK_THROWS_AS(fit_censoring_km(u, d, 0, HazardForm::NegLogKM), DegenerateModelError);
  CHECK_NOTHROW(fit_censoring_km(u, d, 0, HazardForm::NelsonAalen));
}

TEST_CASE("hand-computed martingale integrals") {
  const auto km = fit_censoring_km(kU, kDelta);
  auto one = [](std::size_t, double) { return 1.0; };
  // censored at 3: 1 - (1/5 + 1/3)
  CHECK(std::abs(martingale_integral(3.0, false, km, one) - (1.0 - 0.2 - 1.0 / 3.0)) < 1e-15);
  // outcome at 5: -(1/5 + 1/3 + 1/2)
  CHECK(std::abs(martingale_integral(5.0, true, km, one) + (0.2 + 1.0 / 3.0 + 0.5)) < 1e-15);
  // outcome at 1 precedes every censoring
  CHECK(martingale_integral(1.0, true, km, one) == 0.0);
  // outcome tied with the censoring at 2 is still at risk there
  CHECK(std::abs(martingale_integral(2.0, true, km, one) + 0.2) < 1e-15);
  auto time = [](std::size_t, double t) { return t; };
  CHECK(std::abs(martingale_integral(4.0, false, km, time) - (4.0 - (0.2 * 2 + 3.0 / 3 + 0.5 * 4))) < 1e-15);
}

TEST_CASE("martingale residuals sum to zero for integrands depending on time only") {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(0, 100);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 50 + rep * 7;
    std::vector<double> t(n);
    std::vector<char> d(n);
    for (int i = 0; i < n; ++i) {
      t[i] = std::round(u(gen));  // induce ties
      d[i] = u(gen) < 50 ? 1 : 0;
    }
    const auto km = fit_censoring_km(t, d);
    double s1 = 0.0, s2 = 0.0;
    auto g = [](std::size_t k, double tt) { return std::sin(tt) + static_cast<double>(k); };
    for (int i = 0; i < n; ++i) {
      s1 += martingale_integral(t[i], d[i], km, [](std::size_t, double) { return 1.0; });
      s2 += martingale_integral(t[i], d[i], km, g);
    }
    CHECK(std::abs(s1) < 1e-10);
    CHECK(std::abs(s2) < 1e-10);
  }
}

TEST_CASE("curve does not depend on input order") {
  std::vector<std::size_t> perm(kU.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::vector<double> u;
  std::vector<char> d;
  for (auto i : perm) {
    u.push_back(kU[i]);
    d.push_back(kDelta[i]);
  }
  const auto a = fit_censoring_km(kU, kDelta);
  const auto b = fit_censoring_km(u, d);
  CHECK(a.survival == b.survival);
  CHECK(a.hazard_increments == b.hazard_increments);
}

TEST_CASE("no censoring gives K = 1 everywhere") {
  const std::vector<double> u{1, 2, 3};
  const std::vector<char> d{1, 1, 1};
  const auto km = fit_censoring_km(u, d);
  CHECK(km.size() == 0);
  CHECK(km.survival_before(10.0) == 1.0);
}

TEST_CASE("positivity floor") {
  const std::vector<double> u{1, 2, 3};
  const std::vector<char> d{0, 0, 1};
  const auto km = fit_censoring_km(u, d);
  CHECK(std::abs(km.survival_before(3.0) - 1.0 / 3.0) < 1e-15);
  CHECK_THROWS_AS(survival_at(km, 3.0, 0.5), PositivityError);
  CHECK(survival_at(km, 3.0, 0.3) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(fit_censoring_km(std::vector<double>{}, std::vector<char>{}), DataError);
}
