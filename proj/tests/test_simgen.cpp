#include <cmath>
#include <set>

#include "doctest.h"
#include "tlpo/error.hpp"
#include "tlpo/rng.hpp"
#include "tlpo/simgen.hpp"

using namespace tlpo;

TEST_CASE("latent map examples") {
  const std::vector<double> cuts{0, .12, .35, .52, .62, .67, 1};
  CHECK(po_gamma(0.30, 0, {1.5}) == 0.30);
  CHECK(category_of(0.30, cuts) == 2);
  CHECK(90 * 0.30 / 0.52 == doctest::Approx(51.923).epsilon(1e-4));
  const double g = po_gamma(0.80, 1, {1.5});
  CHECK(g == doctest::Approx((0.8 / 1.5) / (0.2 + 0.8 / 1.5)).epsilon(1e-15));
  CHECK(g == doctest::Approx(0.7273).epsilon(1e-4));
  CHECK(category_of(g, cuts) == 6);
  CHECK(category_of(0.12, cuts) == 2);  // intervals closed on the left
  CHECK(category_of(0.0, cuts) == 1);
  CHECK(ph_gamma(0.4, 0, 1.315) == 0.4);
  // pr(Cat <= 3 | A = 1) under the hazards map
  CHECK(1 - std::pow(0.48, 1.315) == doctest::Approx(0.619).epsilon(1e-3));
}

TEST_CASE("scenario 6 outcome rules") {
  Scenario6Params p;
  CHECK(p.xi == doctest::Approx(std::log(1 / 0.775)).epsilon(1e-15));
  // invert the exponentials: chi = -log(u) / lambda
  auto u_for = [](double chi, double rate) { return std::exp(-chi * rate); };
  auto o = s6_outcome(p, 0, u_for(50, p.lambda_h0), u_for(10, p.lambda_d0), 0.5);
  CHECK(o.cat == 6);
  CHECK(o.time == doctest::Approx(10).epsilon(1e-12));
  o = s6_outcome(p, 0, u_for(20, p.lambda_h0), u_for(60, p.lambda_d0), 0.5);
  CHECK(o.cat == 2);
  CHECK(o.time == doctest::Approx(20).epsilon(1e-12));
  o = s6_outcome(p, 0, u_for(95, p.lambda_h0), u_for(60, p.lambda_d0), 0.5);
  CHECK(o.cat == 4);
  o = s6_outcome(p, 0, u_for(95, p.lambda_h0), u_for(60, p.lambda_d0), 0.9);
  CHECK(o.cat == 5);
  // deaths after day 40 do not count
  o = s6_outcome(p, 0, u_for(95, p.lambda_h0), u_for(45, p.lambda_d0), 0.1);
  CHECK(o.cat == 4);
}

TEST_CASE("subject streams") {
  SubjectStream a(1, 2, 3), b(1, 2, 3), c(1, 2, 4);
  const double ua = a.uniform();
  CHECK(ua == b.uniform());
  CHECK(ua != c.uniform());
  CHECK(ua > 0.0);
  CHECK(ua < 1.0);
  a.normal();
  CHECK(a.draws() == 3);
}

TEST_CASE("every generator yields valid, coupled data") {
  for (ScenarioId id : {ScenarioId::S1, ScenarioId::S2, ScenarioId::S3, ScenarioId::S4, ScenarioId::S5,
                        ScenarioId::S6, ScenarioId::K3}) {
    auto cfg = scenario_defaults(id);
    cfg.n = 2000;
    const auto d = generate(cfg, 4);
    CAPTURE(scenario_name(id));
    CHECK(validate(d.full).empty());
    CHECK(validate(d.observed).empty());
    REQUIRE(d.full.size() == d.observed.size());
    for (std::size_t i = 0; i < d.full.size(); ++i) {
      const auto& f = d.full.records[i];
      const auto& o = d.observed.records[i];
      CHECK(f.arm == o.arm);
      CHECK(f.x == o.x);
      if (o.delta) {
        CHECK(*o.cat == f.cat);
        CHECK(o.u == f.t);
      } else {
        CHECK(o.u < f.t);
      }
    }
    const double cf = censored_fraction(d.observed);
    CHECK(cf > 0.40);
    CHECK(cf < 0.60);
  }
}

TEST_CASE("censoring fraction near one half at n = 1e5") {
  for (ScenarioId id : {ScenarioId::S1, ScenarioId::S3, ScenarioId::S5, ScenarioId::S6}) {
    auto cfg = scenario_defaults(id);
    cfg.n = 100000;
    const double cf = censored_fraction(generate(cfg).observed);
    CAPTURE(scenario_name(id));
    CHECK(cf >= 0.45);
    CHECK(cf <= 0.55);
  }
}

TEST_CASE("generation is reproducible and replicate-specific") {
  auto cfg = scenario_defaults(ScenarioId::S1);
  cfg.n = 300;
  const auto a = generate(cfg, 9), b = generate(cfg, 9), c = generate(cfg, 10);
  for (std::size_t i = 0; i < a.full.size(); ++i) {
    CHECK(a.full.records[i].x == b.full.records[i].x);
    CHECK(a.observed.records[i].u == b.observed.records[i].u);
    CHECK(a.observed.records[i].path == b.observed.records[i].path);
  }
  CHECK(a.full.records[0].x != c.full.records[0].x);
  // a subject's draws do not depend on n
  auto big = cfg;
  big.n = 600;
  CHECK(generate(big, 9).observed.records[123].u == a.observed.records[123].u);
}

TEST_CASE("scenario 5 control arm matches scenario 1") {
  auto c1 = scenario_defaults(ScenarioId::S1);
  auto c5 = scenario_defaults(ScenarioId::S5);
  c1.n = c5.n = 500;
  const auto a = generate(c1), b = generate(c5);
  for (std::size_t i = 0; i < a.full.size(); ++i) {
    if (a.full.records[i].arm != 0) continue;
    CHECK(a.full.records[i].cat == b.full.records[i].cat);
    CHECK(a.observed.records[i].u == b.observed.records[i].u);
  }
}

TEST_CASE("time-dependent covariates") {
  auto cfg = scenario_defaults(ScenarioId::S1);
  cfg.n = 400;
  const auto d = generate(cfg);
  int switched = 0;
  for (const auto& r : d.observed.records) {
    CHECK(r.path.dim() == 2);
    CHECK(r.path.values(0)[0] == 0.0);
    if (r.path.size() == 2) {
      ++switched;
      const double t = r.path.time(1);
      CHECK(t <= r.u);
      CHECK(r.path.values(1)[0] == 1.0);
      CHECK(r.path.values(1)[1] == doctest::Approx(90 - t));
    }
  }
  CHECK(switched > 0);
}

TEST_CASE("config validation") {
  auto cfg = scenario_defaults(ScenarioId::S1);
  cfg.zeta = 80;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg = scenario_defaults(ScenarioId::K3);
  cfg.odds_ratios = {1.5};
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg = scenario_defaults(ScenarioId::S1);
  cfg.cutpoints = {0, .5, .4, 1};
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  CHECK(parse_scenario("k3") == ScenarioId::K3);
  CHECK(parse_scenario("S4") == ScenarioId::S4);
  CHECK_THROWS_AS(parse_scenario("7"), ConfigError);
}

TEST_CASE("arm-0 category frequencies follow the cutpoints at n = 1e6") {
  auto cfg = scenario_defaults(ScenarioId::S1);
  cfg.n = 1000000;
  const auto d = generate(cfg);
  std::vector<double> count(7, 0.0);
  double n0 = 0;
  for (const auto& r : d.full.records) {
    if (r.arm != 0) continue;
    count[r.cat] += 1;
    n0 += 1;
  }
  const double expect[] = {0, .12, .23, .17, .10, .05, .33};
  for (int c = 1; c <= 6; ++c) {
    const double se = std::sqrt(expect[c] * (1 - expect[c]) / n0);
    CHECK(std::abs(count[c] / n0 - expect[c]) < 3 * se);
  }
}
