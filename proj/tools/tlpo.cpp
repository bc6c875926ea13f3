// tlpo: Monte Carlo driver, single-dataset fitting, and scenario export.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tlpo/aipw.hpp"
#include "tlpo/basis.hpp"
#include "tlpo/csv_io.hpp"
#include "tlpo/error.hpp"
#include "tlpo/mc.hpp"
#include "tlpo/report.hpp"
#include "tlpo/simgen.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kData = 3, kEstimation = 4 };

struct ScenarioFlags {
  std::string scenario = "1";
  std::optional<int> n;
  std::optional<double> odds_ratio, or1, or2, gamma, zeta, exp_xi;
  std::uint64_t seed = 20240101;

  void add_to(CLI::App* app) {
    app->add_option("--scenario", scenario, "1-6 or K3")->capture_default_str();
    app->add_option("--n", n, "subjects per replicate");
    app->add_option("--or", odds_ratio, "odds ratio (two-arm scenarios)");
    app->add_option("--or1", or1, "arm-1 odds ratio (K3)");
    app->add_option("--or2", or2, "arm-2 odds ratio (K3)");
    app->add_option("--gamma", gamma, "covariate strength");
    app->add_option("--zeta", zeta, "censoring times ~ U(0, zeta)");
    app->add_option("--exp-xi", exp_xi, "hazard ratio for scenario 5");
    app->add_option("--seed", seed)->capture_default_str();
  }

  tlpo::ScenarioConfig build() const {
    auto cfg = tlpo::scenario_defaults(tlpo::parse_scenario(scenario));
    if (n) cfg.n = *n;
    if (cfg.arms() == 2) {
      if (or1 || or2) throw tlpo::ConfigError("--or1/--or2 apply to the K3 scenario; use --or");
      if (odds_ratio) cfg.odds_ratios = {*odds_ratio};
    } else {
      if (odds_ratio) cfg.odds_ratios = {*odds_ratio, *odds_ratio};
      if (or1) cfg.odds_ratios[0] = *or1;
      if (or2) cfg.odds_ratios[1] = *or2;
    }
    if (gamma) cfg.gamma = *gamma;
    if (zeta) cfg.zeta = *zeta;
    if (exp_xi) cfg.ph_exp_xi = *exp_xi;
    cfg.seed = seed;
    cfg.check();
    return cfg;
  }
};

struct EstimatorFlags {
  std::string hazard = "nelson-aalen";
  bool truncate = false;
  double floor = tlpo::kPositivityFloor;
  bool general_k = false;

  void add_to(CLI::App* app) {
    app->add_option("--hazard", hazard, "nelson-aalen or neglog-km")->capture_default_str();
    app->add_flag("--truncate-weights", truncate, "clamp K(U-) at the floor instead of failing");
    app->add_option("--positivity-floor", floor)->capture_default_str();
    app->add_flag("--general-k", general_k, "use the K-arm block formulas for two arms");
  }

  tlpo::EstimateOptions build() const {
    tlpo::EstimateOptions o;
    if (hazard == "nelson-aalen") o.hazard = tlpo::HazardForm::NelsonAalen;
    else if (hazard == "neglog-km") o.hazard = tlpo::HazardForm::NegLogKM;
    else throw tlpo::ConfigError("unknown hazard form '" + hazard + "'");
    o.truncate_weights = truncate;
    o.positivity_floor = floor;
    o.general_k_path = general_k;
    return o;
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_output(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw tlpo::ConfigError("cannot open output file " + path);
  os << text;
}

// Flat key=value config files belong to the simulate subcommand.
class SimulateConfig : public CLI::ConfigINI {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    for (auto& item : items) {
      if (item.parents.empty()) item.parents = {"simulate"};
      // the INI reader splits on commas; every simulate option takes one string
      if (item.inputs.size() > 1) item.inputs = {CLI::detail::join(item.inputs, ",")};
    }
    return items;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interim analysis of censored ordinal outcomes under proportional odds"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "run a Monte Carlo experiment");
  ScenarioFlags sim_scen;
  EstimatorFlags sim_est;
  int reps = 5000;
  int workers = 1;
  std::string estimators = "IDEAL,IDEAL_ADJ,FULL_ADJ,NAIVE,NINETY,IPW,AIPW1,AIPW2";
  std::string basis = "default";
  std::string format = "text";
  std::string out;
  std::string reference = "AIPW2";
  bool quiet = false;
  sim_scen.add_to(sim);
  sim_est.add_to(sim);
  sim->add_option("--reps", reps)->capture_default_str();
  sim->add_option("--estimators", estimators, "comma-separated")->capture_default_str();
  sim->add_option("--basis", basis, "default, none, or f=x1;h=x1,l1,l2")->capture_default_str();
  sim->add_option("--workers", workers)->capture_default_str();
  sim->add_option("--reference", reference, "MSE ratio denominator")->capture_default_str();
  sim->add_option("--format", format, "text, csv, json")->capture_default_str();
  sim->add_option("--out", out, "output file (stdout when empty)");
  sim->add_flag("--quiet", quiet, "no progress on stderr");
  // CLI11 reads config files on the root app only
  sim->fallthrough();
  app.config_formatter(std::make_shared<SimulateConfig>());
  app.set_config("--config", "", "simulate: key=value file; flags override it");

  auto* fit = app.add_subcommand("fit", "fit one estimator to CSV data");
  std::string subjects, tdc, method = "AIPW2", fit_basis = "default", pi, fit_format = "text";
  std::optional<int> categories, arms;
  double horizon = 90.0;
  EstimatorFlags fit_est;
  fit->add_option("--subjects", subjects, "subjects.csv")->required();
  fit->add_option("--tdc", tdc, "tdc.csv with time-dependent covariates");
  fit->add_option("--method", method)->capture_default_str();
  fit->add_option("--basis", fit_basis)->capture_default_str();
  fit->add_option("--pi", pi, "known randomization probabilities, comma-separated");
  fit->add_option("--format", fit_format)->capture_default_str();
  fit->add_option("--categories", categories, "number of outcome categories (default: largest seen)");
  fit->add_option("--arms", arms, "number of arms (default: largest seen + 1)");
  fit->add_option("--horizon", horizon)->capture_default_str();
  fit_est.add_to(fit);

  auto* exp = app.add_subcommand("export-scenario", "write one simulated dataset as CSV");
  ScenarioFlags exp_scen;
  std::string prefix = "scenario";
  std::uint64_t replicate = 0;
  exp_scen.add_to(exp);
  exp->add_option("--replicate", replicate)->capture_default_str();
  exp->add_option("--out-prefix", prefix, "writes PREFIX_subjects.csv and PREFIX_tdc.csv")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*sim) {
      tlpo::McConfig cfg;
      cfg.scenario = sim_scen.build();
      cfg.reps = reps;
      cfg.workers = workers;
      cfg.basis = basis;
      cfg.options = sim_est.build();
      cfg.reference = tlpo::parse_method(reference);
      cfg.estimators.clear();
      for (const auto& name : split_list(estimators)) cfg.estimators.push_back(tlpo::parse_method(name));
      const auto fmt = tlpo::parse_format(format);
      auto progress = [&](int done) {
        if (!quiet && (done % 100 == 0 || done == reps)) std::cerr << "\r" << done << "/" << reps << std::flush;
      };
      const auto run = tlpo::run_mc(cfg, progress);
      if (!quiet) std::cerr << '\n';
      write_output(tlpo::render(run.summary, fmt), out);
    } else if (*fit) {
      tlpo::IngestOptions ingest;
      ingest.categories = categories;
      ingest.arms = arms;
      ingest.horizon = horizon;
      std::optional<std::filesystem::path> tdc_path;
      if (!tdc.empty()) tdc_path = tdc;
      const auto data = tlpo::read_observed_csv(subjects, tdc_path, ingest);
      if (const auto bad = tlpo::validate(data); !bad.empty()) {
        std::string msg = subjects + ": " + std::to_string(bad.size()) + " validation finding(s)";
        for (std::size_t k = 0; k < std::min<std::size_t>(bad.size(), 5); ++k) {
          const auto& v = bad[k];
          msg += v.record == tlpo::kDatasetLevel
                     ? "\n  dataset: " + v.rule
                     : "\n  line " + std::to_string(v.record + 2) + " (id " + data.records[v.record].id +
                           "): " + v.rule;
        }
        throw tlpo::DataError(msg);
      }
      auto opts = fit_est.build();
      if (!pi.empty()) {
        const auto parts = split_list(pi);
        Eigen::VectorXd p(static_cast<Eigen::Index>(parts.size()));
        for (std::size_t k = 0; k < parts.size(); ++k) {
          try {
            p(static_cast<Eigen::Index>(k)) = std::stod(parts[k]);
          } catch (const std::exception&) {
            throw tlpo::ConfigError("--pi: '" + parts[k] + "' is not a number");
          }
        }
        if (p.size() != data.shape.arms || (p.array() <= 0.0).any() || std::abs(p.sum() - 1.0) > 1e-9) {
          throw tlpo::ConfigError("--pi needs one positive probability per arm summing to 1");
        }
        opts.pi = p;
      }
      const std::size_t x_dim = data.records.empty() ? 0 : data.records[0].x.size();
      const std::size_t l_dim = data.records.empty() ? 0 : data.records[0].path.dim();
      const auto b = tlpo::parse_basis(fit_basis, x_dim, l_dim);
      const auto m = tlpo::parse_method(method);
      const auto fmt = tlpo::parse_format(fit_format);
      std::cout << tlpo::render(tlpo::estimate(data, m, b, opts), fmt);
    } else if (*exp) {
      const auto cfg = exp_scen.build();
      const auto data = tlpo::generate(cfg, replicate);
      std::ostringstream s, t;
      tlpo::write_subjects_csv(s, data.observed);
      tlpo::write_tdc_csv(t, data.observed);
      write_output(s.str(), prefix + "_subjects.csv");
      write_output(t.str(), prefix + "_tdc.csv");
    }
  } catch (const tlpo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const tlpo::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const tlpo::PositivityError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const tlpo::Error& e) {
    std::cerr << "estimation error: " << e.what() << '\n';
    return kEstimation;
  } catch (const std::domain_error& e) {
    std::cerr << "estimation error: " << e.what() << '\n';
    return kEstimation;
  }
  return kOk;
}
