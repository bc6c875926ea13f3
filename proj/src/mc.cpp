#include "tlpo/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "tlpo/error.hpp"

namespace tlpo {

namespace {

constexpr double kZ975 = 1.959963984540054;

std::string join_doubles(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double sd_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

std::vector<std::pair<std::string, std::string>> describe(const McConfig& cfg) {
  const auto& s = cfg.scenario;
  std::string est;
  for (Method m : cfg.estimators) est += (est.empty() ? "" : ",") + std::string(method_name(m));
  return {
      {"scenario", std::string(scenario_name(s.id))},
      {"n", std::to_string(s.n)},
      {"odds_ratios", join_doubles(s.odds_ratios)},
      {"target_odds_ratios", join_doubles(s.target_odds_ratios())},
      {"categories", std::to_string(s.categories())},
      {"arms", std::to_string(s.arms())},
      {"gamma", join_doubles({s.gamma})},
      {"zeta", join_doubles({s.zeta})},
      {"seed", std::to_string(s.seed)},
      {"reps", std::to_string(cfg.reps)},
      {"estimators", est},
      {"basis", cfg.basis},
      {"workers", std::to_string(cfg.workers)},
      {"reference", std::string(method_name(cfg.reference))},
      {"hazard", cfg.options.hazard == HazardForm::NelsonAalen ? "nelson-aalen" : "neglog-km"},
      {"positivity_floor", join_doubles({cfg.options.positivity_floor})},
      {"failure_policy", "failed fits drop only that estimator's replicate"},
  };
}

std::vector<ReplicateEstimate> run_replicate(const McConfig& cfg, const AugmentationBasis& basis,
                                             std::uint64_t replicate) {
  const ScenarioData data = generate(cfg.scenario, replicate);
  std::vector<ReplicateEstimate> out;
  out.reserve(cfg.estimators.size());
  for (Method m : cfg.estimators) {
    ReplicateEstimate e;
    try {
      const EstimateResult r = uses_full_data(m) ? estimate_full(data.full, m, basis, cfg.options)
                                                 : estimate(data.observed, m, basis, cfg.options);
      if (!r.beta.allFinite() || !r.se.allFinite()) throw DegenerateModelError("non-finite estimate");
      e.beta = r.beta;
      e.se = r.se;
    } catch (const Error& err) {
      e.error = err.what();
    } catch (const std::domain_error& err) {
      e.error = err.what();
    }
    out.push_back(std::move(e));
  }
  return out;
}

McSummary summarize(const McConfig& cfg,
                    const std::vector<std::vector<ReplicateEstimate>>& estimates) {
  McSummary s;
  s.config = describe(cfg);
  const auto truth = cfg.scenario.target_odds_ratios();
  const int comps = cfg.scenario.arms() - 1;
  const auto ref_it = std::find(cfg.estimators.begin(), cfg.estimators.end(), cfg.reference);

  auto mse = [&](std::size_t e, int r) -> std::optional<double> {
    double sum = 0.0;
    int count = 0;
    for (const auto& rep : estimates[e]) {
      if (!rep.ok()) continue;
      const double d = std::exp(rep.beta(r)) - truth[static_cast<std::size_t>(r)];
      sum += d * d;
      ++count;
    }
    if (count == 0) return std::nullopt;
    return sum / count;
  };

  for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
    for (int r = 0; r < comps; ++r) {
      EstimatorSummary row;
      row.estimator = std::string(method_name(cfg.estimators[e]));
      row.component = r + 1;
      row.truth = truth[static_cast<std::size_t>(r)];
      std::vector<double> ors, ses;
      int covered = 0, rejected = 0;
      for (const auto& rep : estimates[e]) {
        if (!rep.ok()) {
          ++row.failures;
          continue;
        }
        const double b = rep.beta(r);
        const double se = rep.se(r);
        ors.push_back(std::exp(b));
        ses.push_back(std::exp(b) * se);
        if (std::abs(b - std::log(row.truth)) <= kZ975 * se) ++covered;
        if (std::abs(b) > kZ975 * se) ++rejected;
      }
      row.replicates = static_cast<int>(ors.size());
      if (!ors.empty()) {
        const double k = static_cast<double>(ors.size());
        row.mc_mean = mean_of(ors);
        row.mc_median = median_of(ors);
        row.ave_se = mean_of(ses);
        row.reject_rate = rejected / k;
        if (ors.size() >= 2) {
          row.mc_sd = sd_of(ors);
          row.coverage = covered / k;
        }
        if (ref_it != cfg.estimators.end()) {
          const auto own = mse(e, r);
          const auto ref = mse(static_cast<std::size_t>(ref_it - cfg.estimators.begin()), r);
          if (own && ref && *ref > 0.0) row.mse_ratio = *own / *ref;
        }
      }
      s.rows.push_back(std::move(row));
    }
  }
  return s;
}

McRun run_mc(const McConfig& cfg, const std::function<void(int)>& progress) {
  cfg.scenario.check();
  if (cfg.reps < 1) throw ConfigError("reps must be positive");
  if (cfg.workers < 1) throw ConfigError("workers must be positive");
  const AugmentationBasis basis = parse_basis(cfg.basis, 1, 2);

  McRun run;
  run.estimates.assign(cfg.estimators.size(),
                       std::vector<ReplicateEstimate>(static_cast<std::size_t>(cfg.reps)));
  std::atomic<int> next{0};
  std::atomic<int> done{0};
  std::mutex progress_mutex;
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto worker = [&] {
    while (true) {
      const int rep = next.fetch_add(1);
      if (rep >= cfg.reps) return;
      try {
        auto res = run_replicate(cfg, basis, static_cast<std::uint64_t>(rep));
        for (std::size_t e = 0; e < res.size(); ++e) {
          run.estimates[e][static_cast<std::size_t>(rep)] = std::move(res[e]);
        }
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        next.store(cfg.reps);
        return;
      }
      const int d = done.fetch_add(1) + 1;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(d);
      }
    }
  };

  const int nthreads = std::min(cfg.workers, cfg.reps);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  run.summary = summarize(cfg, run.estimates);
  std::string over;
  for (const auto& row : run.summary.rows) {
    if (row.component != 1) continue;
    if (row.failures > cfg.max_failure_rate * cfg.reps) {
      over += (over.empty() ? "" : ", ") + row.estimator + " (" + std::to_string(row.failures) +
              "/" + std::to_string(cfg.reps) + ")";
    }
  }
  if (!over.empty()) throw EstimationError("failure rate above threshold: " + over);
  return run;
}

}  // namespace tlpo
