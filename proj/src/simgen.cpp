#include "tlpo/simgen.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "tlpo/error.hpp"
#include "tlpo/rng.hpp"

namespace tlpo {

std::string_view scenario_name(ScenarioId id) {
  switch (id) {
    case ScenarioId::S1: return "1";
    case ScenarioId::S2: return "2";
    case ScenarioId::S3: return "3";
    case ScenarioId::S4: return "4";
    case ScenarioId::S5: return "5";
    case ScenarioId::S6: return "6";
    case ScenarioId::K3: return "K3";
  }
  return "?";
}

ScenarioId parse_scenario(std::string_view name) {
  std::string s(name);
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (!s.empty() && s[0] == 's' && s.size() == 2) s.erase(0, 1);
  if (s == "1") return ScenarioId::S1;
  if (s == "2") return ScenarioId::S2;
  if (s == "3") return ScenarioId::S3;
  if (s == "4") return ScenarioId::S4;
  if (s == "5") return ScenarioId::S5;
  if (s == "6") return ScenarioId::S6;
  if (s == "k3") return ScenarioId::K3;
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

namespace {
const std::vector<double> kCuts6{0.0, 0.12, 0.35, 0.52, 0.62, 0.67, 1.0};
const std::vector<double> kCuts10{0.0, 0.06, 0.12, 0.22, 0.31, 0.39, 0.46, 0.52, 0.62, 0.67, 1.0};
}  // namespace

ScenarioConfig scenario_defaults(ScenarioId id) {
  ScenarioConfig c;
  c.id = id;
  c.cutpoints = kCuts6;
  switch (id) {
    case ScenarioId::S1: break;
    case ScenarioId::S2: c.odds_ratios = {1.0}; break;
    case ScenarioId::S3: c.cutpoints = kCuts10; break;
    case ScenarioId::S4:
      c.cutpoints = kCuts10;
      c.odds_ratios = {1.0};
      break;
    case ScenarioId::S5: break;
    case ScenarioId::S6: c.gamma = 0.25; break;
    case ScenarioId::K3:
      c.n = 903;
      c.odds_ratios = {1.5, 1.2};
      c.death_windows = {{0, 30}, {20, 50}, {25, 60}};
      break;
  }
  return c;
}

std::vector<double> ScenarioConfig::target_odds_ratios() const {
  if (id == ScenarioId::S5) return {1.48};
  if (id == ScenarioId::S6) return {1.49};
  return odds_ratios;
}

void ScenarioConfig::check() const {
  if (n < 1) throw ConfigError("n must be positive");
  if (static_cast<int>(odds_ratios.size()) != arms() - 1) {
    throw ConfigError("scenario " + std::string(scenario_name(id)) + " needs " +
                      std::to_string(arms() - 1) + " odds ratio(s)");
  }
  for (double v : odds_ratios) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("odds ratios must be positive");
  }
  if (cutpoints.size() < 3 || cutpoints.front() != 0.0 || cutpoints.back() != 1.0 ||
      !std::is_sorted(cutpoints.begin(), cutpoints.end(), std::less_equal<>())) {
    throw ConfigError("cutpoints must ascend strictly from 0 to 1");
  }
  if (!(zeta > horizon)) throw ConfigError("censoring horizon zeta must exceed the follow-up horizon");
  if (static_cast<int>(death_windows.size()) < arms()) throw ConfigError("missing death window");
  for (auto [a, b] : death_windows) {
    if (!(a < b) || a < 0.0 || b > zeta) throw ConfigError("death windows need 0 <= a < b <= zeta");
  }
  if (!(hospital_cut > 0.0 && hospital_cut < 1.0)) throw ConfigError("hospital cut must lie in (0,1)");
  if (!(ph_exp_xi > 0.0)) throw ConfigError("exp(xi) must be positive");
  if (!(s6.p40 > 0.0 && s6.p40 < 1.0)) throw ConfigError("p40 must lie in (0,1)");
  if (!(s6.lambda_h0 > 0.0 && s6.lambda_d0 > 0.0)) throw ConfigError("hazard rates must be positive");
  if (!(0.0 < s6.c1 && s6.c1 < s6.c2 && s6.c2 < horizon)) throw ConfigError("need 0 < c1 < c2 < horizon");
}

double po_gamma(double upsilon, int arm, const std::vector<double>& odds_ratios) {
  if (arm == 0) return upsilon;
  const double r = 1.0 / odds_ratios[static_cast<std::size_t>(arm - 1)];
  return upsilon * r / (1.0 - upsilon + upsilon * r);
}

double ph_gamma(double upsilon, int arm, double exp_xi) {
  if (arm == 0) return upsilon;
  return 1.0 - std::pow(upsilon, 1.0 / exp_xi);
}

int category_of(double g, const std::vector<double>& cutpoints) {
  const auto it = std::upper_bound(cutpoints.begin() + 1, cutpoints.end() - 1, g);
  return static_cast<int>(it - cutpoints.begin());
}

S6Outcome s6_outcome(const Scenario6Params& p, int arm, double uh, double ud, double u4,
                     double horizon) {
  const double shift = arm == 1 ? p.xi : 0.0;
  const double chi_h = -std::log(uh) / (p.lambda_h0 * std::exp(shift));
  const double chi_d = -std::log(ud) / (p.lambda_d0 * std::exp(-shift));
  if (chi_d < std::min(chi_h, p.death_window)) return {6, chi_d};
  if (chi_h < p.c1) return {1, chi_h};
  if (chi_h < p.c2) return {2, chi_h};
  if (chi_h < horizon) return {3, chi_h};
  const double lp40 = std::log(p.p40 / (1.0 - p.p40));
  const double p4 = 1.0 / (1.0 + std::exp(-(lp40 + shift)));
  return {u4 <= p4 ? 4 : 5, horizon};
}

namespace {

/// Everything needed to build a subject's full and interim records.
struct Draw {
  int arm = 0;
  int cat = 1;
  double t = 0.0;          // full-data outcome time
  double discharge = 0.0;  // time leaving hospital, horizon if not before it
  double x = 0.0;
  double c = 0.0;
};

void append(ScenarioData& out, std::size_t index, const Draw& d, double horizon) {
  const std::string id = std::to_string(index + 1);
  out.full.records.push_back({id, {d.x}, d.arm, d.cat, d.t});

  ObservedRecord r;
  r.id = id;
  r.x = {d.x};
  r.arm = d.arm;
  r.delta = d.t <= d.c;
  r.u = r.delta ? d.t : d.c;
  if (r.delta) r.cat = d.cat;
  r.ctime = d.c;
  // L1(u) = I(discharge < u), L2(u) = (horizon - discharge) L1(u)
  r.path = CovariatePath(2);
  const std::array<double, 2> zero{0.0, 0.0};
  r.path.add(0.0, zero);
  if (d.discharge < horizon && d.discharge <= r.u) {
    const std::array<double, 2> out_of_hospital{1.0, horizon - d.discharge};
    r.path.add(d.discharge, out_of_hospital);
  }
  out.observed.records.push_back(std::move(r));
}

ScenarioData begin(const ScenarioConfig& cfg) {
  cfg.check();
  ScenarioData out;
  out.full.shape = {cfg.categories(), cfg.arms(), cfg.horizon};
  out.observed.shape = out.full.shape;
  out.full.records.reserve(static_cast<std::size_t>(cfg.n));
  out.observed.records.reserve(static_cast<std::size_t>(cfg.n));
  return out;
}

/// Latent-variable scenarios: six uniforms per subject in a fixed order.
template <class GammaMap>
ScenarioData latent_scenario(const ScenarioConfig& cfg, std::uint64_t replicate, GammaMap gamma_of) {
  ScenarioData out = begin(cfg);
  const int c = cfg.categories();
  const double death_cut = cfg.cutpoints[static_cast<std::size_t>(c - 1)];
  for (int i = 0; i < cfg.n; ++i) {
    SubjectStream rng(cfg.seed, replicate, static_cast<std::uint64_t>(i));
    const double ua = rng.uniform();
    const double upsilon = rng.uniform();
    const double ut = rng.uniform();
    const double z = rng.normal();
    const double uc = rng.uniform();

    Draw d;
    d.arm = std::min(static_cast<int>(ua * cfg.arms()), cfg.arms() - 1);
    const double g = gamma_of(upsilon, d.arm);
    d.cat = category_of(g, cfg.cutpoints);
    const auto [a, b] = cfg.death_windows[static_cast<std::size_t>(d.arm)];
    d.t = g >= death_cut ? a + (b - a) * ut : cfg.horizon;
    d.discharge = g < cfg.hospital_cut ? cfg.horizon * g / cfg.hospital_cut : cfg.horizon;
    d.x = cfg.gamma * (upsilon - 0.5) + z;
    d.c = cfg.zeta * uc;
    append(out, static_cast<std::size_t>(i), d, cfg.horizon);
  }
  return out;
}

}  // namespace

ScenarioData gen_po_scenario(const ScenarioConfig& cfg, std::uint64_t replicate) {
  return latent_scenario(cfg, replicate,
                         [&](double u, int arm) { return po_gamma(u, arm, cfg.odds_ratios); });
}

ScenarioData gen_ph_scenario(const ScenarioConfig& cfg, std::uint64_t replicate) {
  return latent_scenario(cfg, replicate,
                         [&](double u, int arm) { return ph_gamma(u, arm, cfg.ph_exp_xi); });
}

ScenarioData gen_k3_scenario(const ScenarioConfig& cfg, std::uint64_t replicate) {
  if (cfg.arms() != 3) throw ConfigError("K = 3 generator needs a three-arm config");
  return gen_po_scenario(cfg, replicate);
}

ScenarioData gen_scenario6(const ScenarioConfig& cfg, std::uint64_t replicate) {
  ScenarioData out = begin(cfg);
  if (cfg.categories() != 6) throw ConfigError("scenario 6 has six categories");
  for (int i = 0; i < cfg.n; ++i) {
    SubjectStream rng(cfg.seed, replicate, static_cast<std::uint64_t>(i));
    const double ua = rng.uniform();
    const double uh = rng.uniform();
    const double ud = rng.uniform();
    const double u4 = rng.uniform();
    const double z = rng.normal();
    const double uc = rng.uniform();

    Draw d;
    d.arm = ua < 0.5 ? 0 : 1;
    const S6Outcome own = s6_outcome(cfg.s6, d.arm, uh, ud, u4, cfg.horizon);
    const S6Outcome control = d.arm == 0 ? own : s6_outcome(cfg.s6, 0, uh, ud, u4, cfg.horizon);
    d.cat = own.cat;
    d.t = own.cat == 6 ? own.time : cfg.horizon;
    d.discharge = own.cat <= 3 ? own.time : cfg.horizon;
    d.x = cfg.gamma * (control.cat - 3.5) + z;
    d.c = cfg.zeta * uc;
    append(out, static_cast<std::size_t>(i), d, cfg.horizon);
  }
  return out;
}

ScenarioData generate(const ScenarioConfig& cfg, std::uint64_t replicate) {
  switch (cfg.id) {
    case ScenarioId::S1:
    case ScenarioId::S2:
    case ScenarioId::S3:
    case ScenarioId::S4: return gen_po_scenario(cfg, replicate);
    case ScenarioId::S5: return gen_ph_scenario(cfg, replicate);
    case ScenarioId::S6: return gen_scenario6(cfg, replicate);
    case ScenarioId::K3: return gen_k3_scenario(cfg, replicate);
  }
  throw ConfigError("unknown scenario");
}

}  // namespace tlpo
