#include "tlpo/report.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "tlpo/error.hpp"

namespace tlpo {

using json = nlohmann::ordered_json;

Format parse_format(std::string_view name) {
  std::string s(name);
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (s == "text" || s == "table" || s == "text-table") return Format::Text;
  if (s == "csv") return Format::Csv;
  if (s == "json") return Format::Json;
  throw ConfigError("unknown format '" + std::string(name) + "'");
}

namespace {

constexpr const char* kMetricKeys[] = {"mc_mean",  "mc_median", "mc_sd",      "ave_se",
                                       "coverage", "mse_ratio", "reject_rate"};

std::array<std::optional<double>, 7> metrics(const EstimatorSummary& r) {
  return {r.mc_mean, r.mc_median, r.mc_sd, r.ave_se, r.coverage, r.mse_ratio, r.reject_rate};
}

std::string full(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string text_table(const McSummary& s) {
  std::ostringstream os;
  for (const auto& [k, v] : s.config) os << "# " << k << ": " << v << '\n';
  const bool multi = std::any_of(s.rows.begin(), s.rows.end(),
                                 [](const EstimatorSummary& r) { return r.component > 1; });
  std::vector<std::string> heads;
  std::size_t width = 9;
  for (const auto& r : s.rows) {
    heads.push_back(multi ? r.estimator + "[" + std::to_string(r.component) + "]" : r.estimator);
    width = std::max(width, heads.back().size() + 2);
  }
  constexpr std::size_t label_w = 18;
  os << pad_right("", label_w);
  for (const auto& h : heads) os << pad_left(h, width);
  os << '\n';
  if (s.rows.empty()) return os.str();
  for (std::size_t m = 0; m < std::size(kMetricLabels); ++m) {
    os << pad_right(std::string(kMetricLabels[m]), label_w);
    for (const auto& r : s.rows) {
      const auto v = metrics(r)[m];
      os << pad_left(v ? fixed3(*v) : "-", width);
    }
    os << '\n';
  }
  os << pad_right("replicates", label_w);
  for (const auto& r : s.rows) os << pad_left(std::to_string(r.replicates), width);
  os << '\n' << pad_right("failures", label_w);
  for (const auto& r : s.rows) os << pad_left(std::to_string(r.failures), width);
  os << '\n';
  return os.str();
}

std::string csv_table(const McSummary& s) {
  std::ostringstream os;
  for (const auto& [k, v] : s.config) os << "# " << k << "=" << v << '\n';
  os << "estimator,component,truth";
  for (const char* k : kMetricKeys) os << ',' << k;
  os << ",replicates,failures\n";
  for (const auto& r : s.rows) {
    os << r.estimator << ',' << r.component << ',' << full(r.truth);
    for (const auto& v : metrics(r)) os << ',' << (v ? full(*v) : "");
    os << ',' << r.replicates << ',' << r.failures << '\n';
  }
  return os.str();
}

}  // namespace

json to_json(const McSummary& s) {
  json j;
  j["config"] = json::object();
  for (const auto& [k, v] : s.config) j["config"][k] = v;
  j["rows"] = json::array();
  for (const auto& r : s.rows) {
    json row;
    row["estimator"] = r.estimator;
    row["component"] = r.component;
    row["truth"] = r.truth;
    const auto m = metrics(r);
    for (std::size_t k = 0; k < m.size(); ++k) row[kMetricKeys[k]] = opt(m[k]);
    row["replicates"] = r.replicates;
    row["failures"] = r.failures;
    j["rows"].push_back(std::move(row));
  }
  return j;
}

McSummary summary_from_json(const json& j) {
  McSummary s;
  try {
    for (const auto& [k, v] : j.at("config").items()) s.config.emplace_back(k, v.get<std::string>());
    for (const auto& row : j.at("rows")) {
      EstimatorSummary r;
      r.estimator = row.at("estimator").get<std::string>();
      r.component = row.at("component").get<int>();
      r.truth = row.at("truth").get<double>();
      r.mc_mean = opt_from(row.at("mc_mean"));
      r.mc_median = opt_from(row.at("mc_median"));
      r.mc_sd = opt_from(row.at("mc_sd"));
      r.ave_se = opt_from(row.at("ave_se"));
      r.coverage = opt_from(row.at("coverage"));
      r.mse_ratio = opt_from(row.at("mse_ratio"));
      r.reject_rate = opt_from(row.at("reject_rate"));
      r.replicates = row.at("replicates").get<int>();
      r.failures = row.at("failures").get<int>();
      s.rows.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed summary json: ") + e.what());
  }
  return s;
}

std::string render(const McSummary& s, Format f) {
  switch (f) {
    case Format::Text: return text_table(s);
    case Format::Csv: return csv_table(s);
    case Format::Json: return to_json(s).dump(2) + "\n";
  }
  return {};
}

json to_json(const EstimateResult& r) {
  json j;
  j["method"] = std::string(method_name(r.method));
  j["components"] = json::array();
  for (Eigen::Index k = 0; k < r.beta.size(); ++k) {
    json c;
    c["component"] = k + 1;
    c["beta"] = r.beta(k);
    c["se"] = r.se(k);
    c["odds_ratio"] = r.odds_ratio(k);
    c["ci_lower"] = r.ci_lower(k);
    c["ci_upper"] = r.ci_upper(k);
    c["wald_z"] = r.wald_z(k);
    c["p_value"] = r.p_value(k);
    j["components"].push_back(std::move(c));
  }
  const auto& d = r.diagnostics;
  j["diagnostics"] = {{"n", d.n},
                      {"iterations", d.iterations},
                      {"censored_fraction", d.censored_fraction},
                      {"min_censoring_survival", d.min_censoring_survival},
                      {"max_weight", d.max_weight},
                      {"truncated_weights", d.truncated},
                      {"dropped_columns", d.dropped_columns},
                      {"boundary_start", d.boundary_start}};
  return j;
}

std::string render(const EstimateResult& r, Format f) {
  std::ostringstream os;
  const auto& d = r.diagnostics;
  switch (f) {
    case Format::Json: return to_json(r).dump(2) + "\n";
    case Format::Csv:
      os << "method,component,beta,se,odds_ratio,ci_lower,ci_upper,wald_z,p_value,n,"
            "censored_fraction,min_censoring_survival,dropped_columns\n";
      for (Eigen::Index k = 0; k < r.beta.size(); ++k) {
        os << method_name(r.method) << ',' << k + 1 << ',' << full(r.beta(k)) << ',' << full(r.se(k))
           << ',' << full(r.odds_ratio(k)) << ',' << full(r.ci_lower(k)) << ','
           << full(r.ci_upper(k)) << ',' << full(r.wald_z(k)) << ',' << full(r.p_value(k)) << ','
           << d.n << ',' << full(d.censored_fraction) << ',' << full(d.min_censoring_survival)
           << ',' << d.dropped_columns << '\n';
      }
      return os.str();
    case Format::Text:
      os << "estimator " << method_name(r.method) << "  (n = " << d.n << ")\n";
      os << pad_right("", 6);
      for (const char* h : {"beta", "se", "OR", "95% lower", "95% upper", "z", "p"}) os << pad_left(h, 11);
      os << '\n';
      for (Eigen::Index k = 0; k < r.beta.size(); ++k) {
        os << pad_right("b" + std::to_string(k + 1), 6);
        for (double v : {r.beta(k), r.se(k), r.odds_ratio(k), r.ci_lower(k), r.ci_upper(k),
                         r.wald_z(k), r.p_value(k)}) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.4f", v);
          os << pad_left(buf, 11);
        }
        os << '\n';
      }
      os << "censored fraction " << fixed3(d.censored_fraction) << ", min K(U-) "
         << full(d.min_censoring_survival) << ", max weight " << fixed3(d.max_weight)
         << ", dropped design columns " << d.dropped_columns << ", newton iterations "
         << d.iterations << '\n';
      if (d.truncated > 0) os << "weights truncated at the positivity floor: " << d.truncated << '\n';
      if (d.boundary_start) os << "note: an empty cumulative category forced a boundary start\n";
      return os.str();
  }
  return {};
}

}  // namespace tlpo
