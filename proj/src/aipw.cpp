#include "tlpo/aipw.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "tlpo/error.hpp"

namespace tlpo {

namespace {
constexpr double kZ975 = 1.959963984540054;
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Ideal: return "IDEAL";
    case Method::IdealAdj: return "IDEAL_ADJ";
    case Method::FullAdj: return "FULL_ADJ";
    case Method::Naive: return "NAIVE";
    case Method::Ninety: return "NINETY";
    case Method::Ipw: return "IPW";
    case Method::Aipw1: return "AIPW1";
    case Method::Aipw2: return "AIPW2";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  std::string s(name);
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  std::replace(s.begin(), s.end(), '-', '_');
  if (s == "IDEAL") return Method::Ideal;
  if (s == "IDEAL_ADJ" || s == "IDEALADJ") return Method::IdealAdj;
  if (s == "FULL_ADJ" || s == "FULLADJ" || s == "AIPW1_FULL") return Method::FullAdj;
  if (s == "NAIVE") return Method::Naive;
  if (s == "NINETY" || s == "90") return Method::Ninety;
  if (s == "IPW") return Method::Ipw;
  if (s == "AIPW1") return Method::Aipw1;
  if (s == "AIPW2") return Method::Aipw2;
  throw ConfigError("unknown estimator '" + std::string(name) + "'");
}

bool uses_full_data(Method m) {
  return m == Method::Ideal || m == Method::IdealAdj || m == Method::FullAdj;
}

EstimateResult make_result(Method method, Eigen::VectorXd beta, Eigen::MatrixXd cov,
                           Diagnostics diag) {
  EstimateResult r;
  r.method = method;
  r.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  r.odds_ratio = beta.array().exp();
  r.ci_lower = (beta.array() - kZ975 * r.se.array()).exp();
  r.ci_upper = (beta.array() + kZ975 * r.se.array()).exp();
  r.wald_z = beta.cwiseQuotient(r.se);
  r.p_value = r.wald_z.unaryExpr([](double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); });
  r.beta = std::move(beta);
  r.cov = std::move(cov);
  r.diagnostics = diag;
  return r;
}

std::vector<KaplanMeierCurve> fit_censoring_curves(const ObservedData& data, HazardForm form) {
  std::vector<KaplanMeierCurve> curves;
  for (int a = 0; a < data.shape.arms; ++a) curves.push_back(fit_censoring_km(data, a, form));
  return curves;
}

IpwWeights ipw_weights(const ObservedData& data, const std::vector<KaplanMeierCurve>& curves,
                       double floor, bool truncate) {
  IpwWeights out;
  out.w.assign(data.size(), 0.0);
  std::vector<std::string> offenders;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    if (!r.delta) continue;
    double k = curves[r.arm].survival_before(r.u);
    if (k < floor) {
      if (!truncate) {
        if (offenders.size() < 10) offenders.push_back(r.id.empty() ? "#" + std::to_string(i) : r.id);
        continue;
      }
      k = floor;
      ++out.truncated;
    }
    out.min_survival = std::min(out.min_survival, k);
    out.w[i] = 1.0 / k;
    out.max_weight = std::max(out.max_weight, out.w[i]);
  }
  if (!offenders.empty()) {
    std::string list;
    for (const auto& id : offenders) list += (list.empty() ? "" : ", ") + id;
    throw PositivityError("censoring survival below positivity floor for subjects: " + list);
  }
  return out;
}

namespace {

Eigen::VectorXd pi_for(const ObservedData& data, const EstimateOptions& opts) {
  if (opts.pi) return *opts.pi;
  std::vector<int> arms;
  arms.reserve(data.size());
  for (const auto& r : data.records) arms.push_back(r.arm);
  return arm_frequencies(arms, data.shape.arms);
}

Eigen::VectorXd pi_for(const FullData& data, const EstimateOptions& opts) {
  if (opts.pi) return *opts.pi;
  std::vector<int> arms;
  arms.reserve(data.size());
  for (const auto& r : data.records) arms.push_back(r.arm);
  return arm_frequencies(arms, data.shape.arms);
}

Eigen::MatrixXd normalizer(const CumulativeProbs& probs, bool general) {
  if (!general) return v_matrix(probs);
  Eigen::MatrixXd v = v_schur(probs);
  Eigen::LLT<Eigen::MatrixXd> llt(v);
  if (llt.info() != Eigen::Success) throw DegenerateModelError("degenerate design: V is not positive definite");
  return v;
}

Eigen::RowVectorXd score_row(int arm, int cat, const CumulativeProbs& probs, bool general) {
  return (general ? efficient_score_blocks(arm, cat, probs) : efficient_score(arm, cat, probs))
      .transpose();
}

/// m(F_i) for every record with a known category; zero rows elsewhere.
template <class Records, class CatOf>
Eigen::MatrixXd score_matrix(const Records& records, const CumulativeProbs& probs, bool general,
                             CatOf cat_of) {
  const int k = probs.arms();
  const int c = probs.categories();
  Eigen::MatrixXd table(k * c, k - 1);
  for (int a = 0; a < k; ++a) {
    for (int cat = 1; cat <= c; ++cat) table.row(a * c + cat - 1) = score_row(a, cat, probs, general);
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(records.size()), k - 1);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const int cat = cat_of(records[i]);
    if (cat > 0) m.row(static_cast<Eigen::Index>(i)) = table.row(records[i].arm * c + cat - 1);
  }
  return m;
}

}  // namespace

Eigen::MatrixXd dependent_variable(const ObservedData& data,
                                   const std::vector<KaplanMeierCurve>& curves,
                                   std::span<const double> weights, const Eigen::MatrixXd& m) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index nr = m.cols();
  Eigen::MatrixXd y(n, nr);
  for (Eigen::Index i = 0; i < n; ++i) y.row(i) = weights[i] * m.row(i);

  for (int a = 0; a < data.shape.arms; ++a) {
    const auto& curve = curves[a];
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.records[i].arm == a) idx.push_back(i);
    }
    if (curve.size() == 0) continue;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t p, std::size_t q) { return data.records[p].u < data.records[q].u; });
    std::vector<double> us(idx.size());
    for (std::size_t t = 0; t < idx.size(); ++t) us[t] = data.records[idx[t]].u;
    // suffix sums of w m over subjects sorted by U
    Eigen::MatrixXd suffix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(idx.size()) + 1, nr);
    for (std::size_t t = idx.size(); t-- > 0;) {
      suffix.row(t) = suffix.row(t + 1) + y.row(static_cast<Eigen::Index>(idx[t]));
    }
    // g(u_k) = at-risk average of w m; prefix(k) = sum_{k' < k} dLambda g(u_k')
    const auto mk = static_cast<Eigen::Index>(curve.size());
    Eigen::MatrixXd g(mk, nr);
    Eigen::MatrixXd prefix = Eigen::MatrixXd::Zero(mk + 1, nr);
    for (Eigen::Index k = 0; k < mk; ++k) {
      const auto pos = std::lower_bound(us.begin(), us.end(), curve.event_times[k]) - us.begin();
      g.row(k) = suffix.row(pos) / curve.atrisk[k];
      prefix.row(k + 1) = prefix.row(k) + curve.hazard_increments[k] * g.row(k);
    }
    for (std::size_t i : idx) {
      const auto& r = data.records[i];
      const auto through = static_cast<Eigen::Index>(curve.events_through(r.u));
      y.row(static_cast<Eigen::Index>(i)) -= prefix.row(through);
      if (!r.delta) y.row(static_cast<Eigen::Index>(i)) += g.row(through - 1);
    }
  }
  return y;
}

namespace {

template <class Records>
void fill_baseline(Eigen::MatrixXd& z, const Records& records, int arms,
                   const AugmentationBasis& basis, const Eigen::VectorXd& pi_hat) {
  const int terms = static_cast<int>(basis.baseline.size()) + 1;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    for (int a = 1; a < arms; ++a) {
      const double centred = (r.arm == a ? 1.0 : 0.0) - pi_hat(a);
      const Eigen::Index col0 = static_cast<Eigen::Index>((a - 1) * terms);
      z(static_cast<Eigen::Index>(i), col0) = centred;
      for (int t = 1; t < terms; ++t) {
        const double f = basis.baseline[t - 1](r.x);
        if (!std::isfinite(f)) {
          throw DataError("non-finite baseline basis '" + basis.baseline_names[t - 1] +
                          "' at record " + std::to_string(i));
        }
        z(static_cast<Eigen::Index>(i), col0 + t) = centred * f;
      }
    }
  }
}

}  // namespace

Design build_design(const ObservedData& data, const std::vector<KaplanMeierCurve>& curves,
                    const AugmentationBasis& basis, const Eigen::VectorXd& pi_hat,
                    bool with_martingale) {
  Design d;
  d.arms = data.shape.arms;
  d.baseline_terms = static_cast<int>(basis.baseline.size()) + 1;
  d.timedep_terms = with_martingale ? static_cast<int>(basis.timedep.size()) : 0;
  const int nl = d.timedep_terms;
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  d.z = Eigen::MatrixXd::Zero(n, d.baseline_cols() + d.arms * nl);
  fill_baseline(d.z, data.records, d.arms, basis, pi_hat);
  if (nl == 0) return d;

  for (int a = 0; a < d.arms; ++a) {
    const auto& curve = curves[a];
    const auto mk = static_cast<Eigen::Index>(curve.size());
    if (mk == 0) continue;  // no censoring events: the columns stay zero
    const Eigen::Index col0 = d.baseline_cols() + a * nl;
    Eigen::MatrixXd sum_h = Eigen::MatrixXd::Zero(mk, nl);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.records[i].arm == a) idx.push_back(i);
    }
    // per subject: sum_k dLambda_k h(u_k) and h at its own censoring time
    Eigen::MatrixXd subj_sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(idx.size()), nl);
    Eigen::MatrixXd h_at_u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(idx.size()), nl);
    for (std::size_t t = 0; t < idx.size(); ++t) {
      const auto& r = data.records[idx[t]];
      const std::size_t through = curve.events_through(r.u);
      for (std::size_t k = 0; k < through; ++k) {
        const double uk = curve.event_times[k];
        const auto lval = r.path.at(uk);
        for (int l = 0; l < nl; ++l) {
          const double h = basis.timedep[l](uk, r.x, lval);
          if (!std::isfinite(h)) {
            throw DataError("non-finite time-dependent basis '" + basis.timedep_names[l] +
                            "' at record " + std::to_string(idx[t]));
          }
          sum_h(static_cast<Eigen::Index>(k), l) += h;
          subj_sum(static_cast<Eigen::Index>(t), l) += curve.hazard_increments[k] * h;
          if (k + 1 == through) h_at_u(static_cast<Eigen::Index>(t), l) = h;
        }
      }
    }
    Eigen::MatrixXd mu(mk, nl);
    Eigen::MatrixXd prefix = Eigen::MatrixXd::Zero(mk + 1, nl);
    for (Eigen::Index k = 0; k < mk; ++k) {
      mu.row(k) = sum_h.row(k) / curve.atrisk[k];
      prefix.row(k + 1) = prefix.row(k) + curve.hazard_increments[k] * mu.row(k);
    }
    for (std::size_t t = 0; t < idx.size(); ++t) {
      const auto& r = data.records[idx[t]];
      const auto through = static_cast<Eigen::Index>(curve.events_through(r.u));
      Eigen::RowVectorXd v = prefix.row(through) - subj_sum.row(static_cast<Eigen::Index>(t));
      if (!r.delta) v += h_at_u.row(static_cast<Eigen::Index>(t)) - mu.row(through - 1);
      d.z.block(static_cast<Eigen::Index>(idx[t]), col0, 1, nl) = v;
    }
  }
  return d;
}

Design build_baseline_design(const FullData& data, const AugmentationBasis& basis,
                             const Eigen::VectorXd& pi_hat) {
  Design d;
  d.arms = data.shape.arms;
  d.baseline_terms = static_cast<int>(basis.baseline.size()) + 1;
  d.timedep_terms = 0;
  d.z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.size()), d.baseline_cols());
  fill_baseline(d.z, data.records, d.arms, basis, pi_hat);
  return d;
}

RegressionFit project(const Eigen::MatrixXd& y, const Eigen::MatrixXd& z, double rank_tol) {
  if (y.rows() != z.rows()) throw DataError("project: response and design row counts differ");
  RegressionFit fit;
  const Eigen::Index n = y.rows();
  const Eigen::RowVectorXd ybar = y.colwise().mean();
  fit.coef = Eigen::MatrixXd::Zero(z.cols(), y.cols());
  if (z.cols() == 0 || n == 0) {
    fit.intercept = ybar;
    return fit;
  }
  const Eigen::RowVectorXd zbar = z.colwise().mean();
  const Eigen::MatrixXd zc = z.rowwise() - zbar;
  const Eigen::MatrixXd yc = y.rowwise() - ybar;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(zc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? rank_tol * s(0) : 0.0;
  int rank = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) > cutoff && s(k) > 0.0) ++rank;
  }
  fit.rank = rank;
  fit.dropped = static_cast<int>(z.cols()) - rank;
  if (rank > 0) {
    const auto u = svd.matrixU().leftCols(rank);
    const auto v = svd.matrixV().leftCols(rank);
    const Eigen::VectorXd inv = s.head(rank).cwiseInverse();
    fit.coef = v * inv.asDiagonal() * (u.transpose() * yc);
  }
  fit.intercept = ybar - zbar * fit.coef;
  return fit;
}

double psi(const RegressionFit& fit, const Design& d, int arm, int response, int term) {
  return fit.coef((arm - 1) * d.baseline_terms + term, response);
}

double phi(const RegressionFit& fit, const Design& d, int arm, int response, int term) {
  return fit.coef(d.baseline_cols() + arm * d.timedep_terms + term, response);
}

Eigen::VectorXd one_step(const Eigen::VectorXd& beta_init, const Eigen::MatrixXd& v,
                         const Eigen::MatrixXd& preds) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(v);
  if (!lu.isInvertible()) throw DegenerateModelError("one-step update: V is singular");
  const Eigen::VectorXd mean = preds.colwise().mean().transpose();
  return beta_init - lu.solve(mean);
}

Eigen::MatrixXd variance(const Eigen::MatrixXd& v, const Eigen::MatrixXd& y,
                         const Eigen::MatrixXd& preds) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(v);
  if (!lu.isInvertible()) throw DegenerateModelError("variance: V is singular");
  const double n = static_cast<double>(y.rows());
  const Eigen::MatrixXd resid = y - preds;
  const Eigen::MatrixXd meat = resid.transpose() * resid;
  const Eigen::MatrixXd vinv = lu.inverse();
  Eigen::MatrixXd cov = vinv * meat * vinv.transpose() / (n * n);
  return 0.5 * (cov + cov.transpose());
}

IpwFit fit_ipwcc(const ObservedData& data, const std::vector<KaplanMeierCurve>& curves,
                 const EstimateOptions& opts) {
  IpwFit out;
  out.weights = ipw_weights(data, curves, opts.positivity_floor, opts.truncate_weights);
  const Eigen::VectorXd pi_hat = pi_for(data, opts);

  std::vector<int> arms, cats;
  std::vector<double> w;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    if (!r.delta) continue;
    arms.push_back(r.arm);
    cats.push_back(*r.cat);
    w.push_back(out.weights.w[i]);
  }
  const CellTable cells = tabulate(arms, cats, w, data.shape.arms, data.shape.categories);
  OrdinalFit wi = solve_working_independence(cells, opts.newton);
  out.params = wi.params;
  out.probs = cumulative_probs(wi.params, pi_hat);
  out.v = normalizer(out.probs, opts.general_k_path);
  const Eigen::MatrixXd m = score_matrix(data.records, out.probs, opts.general_k_path,
                                         [](const ObservedRecord& r) { return r.cat.value_or(0); });
  out.y = dependent_variable(data, curves, out.weights.w, m);

  Diagnostics diag;
  diag.iterations = wi.iterations;
  diag.n = data.size();
  diag.censored_fraction = censored_fraction(data);
  diag.min_censoring_survival = out.weights.min_survival;
  diag.max_weight = out.weights.max_weight;
  diag.truncated = out.weights.truncated;
  diag.boundary_start = wi.boundary_start;
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(out.y.rows(), out.y.cols());
  out.result = make_result(Method::Ipw, wi.params.beta, variance(out.v, out.y, zero), diag);
  return out;
}

EstimateResult covariate_adjusted_full(const FullData& data, const AugmentationBasis& basis,
                                       const EstimateOptions& opts,
                                       std::optional<Eigen::MatrixXd> force_coef) {
  const Eigen::VectorXd pi_hat = pi_for(data, opts);
  std::vector<int> arms, cats;
  for (const auto& r : data.records) {
    arms.push_back(r.arm);
    cats.push_back(r.cat);
  }
  const CellTable cells = tabulate(arms, cats, {}, data.shape.arms, data.shape.categories);
  OrdinalFit wi = solve_working_independence(cells, opts.newton);
  const CumulativeProbs probs = cumulative_probs(wi.params, pi_hat);
  const Eigen::MatrixXd v = normalizer(probs, opts.general_k_path);
  const Eigen::MatrixXd m =
      score_matrix(data.records, probs, opts.general_k_path, [](const FullRecord& r) { return r.cat; });
  const Design design = build_baseline_design(data, basis, pi_hat);
  RegressionFit reg;
  if (force_coef) {
    reg.coef = *force_coef;
    reg.rank = static_cast<int>(design.z.cols());
  } else {
    reg = project(m, design.z, opts.rank_tol);
  }
  const Eigen::MatrixXd preds = reg.predict(design.z);
  Diagnostics diag;
  diag.iterations = wi.iterations;
  diag.n = data.size();
  diag.dropped_columns = reg.dropped;
  diag.boundary_start = wi.boundary_start;
  return make_result(Method::FullAdj, one_step(wi.params.beta, v, preds), variance(v, m, preds),
                     diag);
}

namespace {

EstimateResult mle_result(Method method, const CellTable& cells, const EstimateOptions& opts,
                          std::size_t n) {
  OrdinalFit fit = fit_mle(cells, opts.newton);
  Diagnostics diag;
  diag.iterations = fit.iterations;
  diag.n = n;
  diag.boundary_start = fit.boundary_start;
  return make_result(method, fit.params.beta, fit.beta_cov(), diag);
}

CellTable cells_of(const ObservedData& data) {
  std::vector<int> arms, cats;
  for (const auto& r : data.records) {
    if (!r.delta) continue;
    arms.push_back(r.arm);
    cats.push_back(*r.cat);
  }
  return tabulate(arms, cats, {}, data.shape.arms, data.shape.categories);
}

}  // namespace

EstimateResult estimate_full(const FullData& data, Method method, const AugmentationBasis& basis,
                             const EstimateOptions& opts) {
  std::vector<int> arms, cats;
  for (const auto& r : data.records) {
    arms.push_back(r.arm);
    cats.push_back(r.cat);
  }
  switch (method) {
    case Method::Ideal:
      return mle_result(method, tabulate(arms, cats, {}, data.shape.arms, data.shape.categories),
                        opts, data.size());
    case Method::IdealAdj: {
      const Eigen::Index p = data.records.empty() ? 0 : static_cast<Eigen::Index>(data.records[0].x.size());
      Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), p);
      for (std::size_t i = 0; i < data.size(); ++i) {
        for (Eigen::Index k = 0; k < p; ++k) x(static_cast<Eigen::Index>(i), k) = data.records[i].x[k];
      }
      OrdinalFit fit =
          fit_mle_adjusted(arms, cats, x, data.shape.arms, data.shape.categories, opts.newton);
      Diagnostics diag;
      diag.iterations = fit.iterations;
      diag.n = data.size();
      diag.boundary_start = fit.boundary_start;
      return make_result(method, fit.params.beta, fit.beta_cov(), diag);
    }
    case Method::FullAdj:
      return covariate_adjusted_full(data, basis, opts);
    default:
      throw ConfigError(std::string(method_name(method)) + " is not a full-data estimator");
  }
}

EstimateResult estimate(const ObservedData& data, Method method, const AugmentationBasis& basis,
                        const EstimateOptions& opts) {
  switch (method) {
    case Method::Ideal:
    case Method::IdealAdj:
    case Method::FullAdj:
      return estimate_full(as_full(data), method, basis, opts);
    case Method::Naive: {
      const ObservedData sub = subset_complete(data);
      return mle_result(method, cells_of(sub), opts, sub.size());
    }
    case Method::Ninety: {
      const ObservedData sub = subset_horizon(data);
      return mle_result(method, cells_of(sub), opts, sub.size());
    }
    case Method::Ipw: {
      const auto curves = fit_censoring_curves(data, opts.hazard);
      return fit_ipwcc(data, curves, opts).result;
    }
    case Method::Aipw1:
    case Method::Aipw2: {
      const auto curves = fit_censoring_curves(data, opts.hazard);
      IpwFit ipw = fit_ipwcc(data, curves, opts);
      const Design design =
          build_design(data, curves, basis, ipw.probs.pi, method == Method::Aipw2);
      const RegressionFit reg = project(ipw.y, design.z, opts.rank_tol);
      const Eigen::MatrixXd preds = reg.predict(design.z);
      Diagnostics diag = ipw.result.diagnostics;
      diag.dropped_columns = reg.dropped;
      return make_result(method, one_step(ipw.params.beta, ipw.v, preds),
                         variance(ipw.v, ipw.y, preds), diag);
    }
  }
  throw ConfigError("unknown estimator");
}

}  // namespace tlpo
