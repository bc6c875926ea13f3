#include "tlpo/propodds.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tlpo/error.hpp"

namespace tlpo {

namespace {
constexpr double kPbarFloor = 1e-12;
}

double expit(double x) {
  if (!std::isfinite(x)) throw std::domain_error("expit: non-finite argument");
  // saturate so the result never underflows to exactly 0
  if (x < -700.0) x = -700.0;
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

void ModelParams::check() const {
  if (alpha.size() < 1) throw DataError("model needs at least one cutpoint");
  if (!alpha.allFinite() || !beta.allFinite()) throw DataError("non-finite model parameter");
  for (Eigen::Index j = 1; j < alpha.size(); ++j) {
    if (!(alpha(j) > alpha(j - 1))) throw DataError("cutpoints must be strictly increasing");
  }
}

CumulativeProbs cumulative_probs(const ModelParams& params, const Eigen::VectorXd& pi) {
  params.check();
  const int c1 = params.categories() - 1;
  const int k = params.arms();
  if (pi.size() != k) throw DataError("arm probability vector has wrong length");
  if ((pi.array() <= 0.0).any() || std::abs(pi.sum() - 1.0) > 1e-12) {
    throw DataError("arm probabilities must be positive and sum to 1");
  }
  CumulativeProbs out;
  out.pi = pi;
  out.p.resize(c1, k);
  out.pbar = Eigen::VectorXd::Zero(c1);
  for (int a = 0; a < k; ++a) {
    for (int j = 0; j < c1; ++j) {
      const double p = expit(params.alpha(j) + params.arm_effect(a));
      out.p(j, a) = p;
      out.pbar(j) += pi(a) * p * (1.0 - p);
    }
  }
  return out;
}

ScoreBlocks score_blocks(const CumulativeProbs& probs) {
  const int c1 = probs.categories() - 1;
  const int k = probs.arms();
  ScoreBlocks b;
  b.b11 = probs.pbar;
  b.b12.resize(c1, k - 1);
  b.b22 = Eigen::VectorXd::Zero(k - 1);
  for (int a = 1; a < k; ++a) {
    for (int j = 0; j < c1; ++j) {
      const double v = probs.p(j, a) * (1.0 - probs.p(j, a));
      b.b12(j, a - 1) = probs.pi(a) * v;
      b.b22(a - 1) += probs.pi(a) * v;
    }
  }
  return b;
}

Eigen::VectorXd estfun_M(int arm, int cat, const ModelParams& params) {
  const int c1 = params.categories() - 1;
  const int k = params.arms();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(c1 + k - 1);
  for (int j = 0; j < c1; ++j) {
    const double r = cat <= j + 1 ? 1.0 : 0.0;
    const double res = r - expit(params.alpha(j) + params.arm_effect(arm));
    out(j) = res;
    if (arm > 0) out(c1 + arm - 1) += res;
  }
  return out;
}

namespace {

void check_pbar(const CumulativeProbs& probs) {
  if ((probs.pbar.array() < kPbarFloor).any()) {
    throw DegenerateModelError("degenerate model: pbar below 1e-12");
  }
}

}  // namespace

double efficient_score_two_arm(int arm, int cat, const CumulativeProbs& probs) {
  check_pbar(probs);
  const double pi = probs.pi(1);
  const int c1 = probs.categories() - 1;
  double m = 0.0;
  for (int j = 0; j < c1; ++j) {
    const double r = cat <= j + 1 ? 1.0 : 0.0;
    const double p0 = probs.p(j, 0);
    const double p1 = probs.p(j, 1);
    const double term = arm == 1 ? (r - p1) * (1.0 - pi) * p0 * (1.0 - p0)
                                 : -(r - p0) * pi * p1 * (1.0 - p1);
    m += term / probs.pbar(j);
  }
  return m;
}

Eigen::VectorXd efficient_score_blocks(int arm, int cat, const CumulativeProbs& probs) {
  check_pbar(probs);
  const int c1 = probs.categories() - 1;
  const int k = probs.arms();
  const ScoreBlocks b = score_blocks(probs);
  Eigen::VectorXd first(c1);
  Eigen::VectorXd second = Eigen::VectorXd::Zero(k - 1);
  for (int j = 0; j < c1; ++j) {
    const double r = cat <= j + 1 ? 1.0 : 0.0;
    first(j) = r - probs.p(j, arm);
    if (arm > 0) second(arm - 1) += first(j);
  }
  return second - b.b12.transpose() * first.cwiseQuotient(b.b11);
}

Eigen::VectorXd efficient_score(int arm, int cat, const CumulativeProbs& probs) {
  if (probs.arms() == 2) {
    return Eigen::VectorXd::Constant(1, efficient_score_two_arm(arm, cat, probs));
  }
  return efficient_score_blocks(arm, cat, probs);
}

ScoreTable::ScoreTable(const CumulativeProbs& probs) : categories_(probs.categories()) {
  const int k = probs.arms();
  table_.resize(k * categories_, k - 1);
  for (int a = 0; a < k; ++a) {
    for (int cat = 1; cat <= categories_; ++cat) {
      table_.row(a * categories_ + cat - 1) = efficient_score(a, cat, probs).transpose();
    }
  }
}

double v_two_arm(const CumulativeProbs& probs) {
  check_pbar(probs);
  const double pi = probs.pi(1);
  double v = 0.0;
  for (int j = 0; j < probs.categories() - 1; ++j) {
    const double p0 = probs.p(j, 0);
    const double p1 = probs.p(j, 1);
    v += pi * (1.0 - pi) * p1 * (1.0 - p1) * p0 * (1.0 - p0) / probs.pbar(j);
  }
  return v;
}

Eigen::MatrixXd v_schur(const CumulativeProbs& probs) {
  check_pbar(probs);
  const ScoreBlocks b = score_blocks(probs);
  Eigen::MatrixXd v = Eigen::MatrixXd(b.b22.asDiagonal()) -
                      b.b12.transpose() * b.b11.cwiseInverse().asDiagonal() * b.b12;
  return 0.5 * (v + v.transpose());
}

Eigen::MatrixXd v_matrix(const CumulativeProbs& probs) {
  Eigen::MatrixXd v = probs.arms() == 2 ? Eigen::MatrixXd::Constant(1, 1, v_two_arm(probs))
                                        : v_schur(probs);
  Eigen::LLT<Eigen::MatrixXd> llt(v);
  if (llt.info() != Eigen::Success || !(v.diagonal().array() > 0.0).all()) {
    throw DegenerateModelError("degenerate design: V is not positive definite");
  }
  return v;
}

CellTable tabulate(std::span<const int> arms, std::span<const int> cats,
                   std::span<const double> weights, int n_arms, int n_categories) {
  if (arms.size() != cats.size() || (!weights.empty() && weights.size() != arms.size())) {
    throw DataError("tabulate: input lengths differ");
  }
  CellTable t = CellTable::Zero(n_arms, n_categories);
  for (std::size_t i = 0; i < arms.size(); ++i) {
    t(arms[i], cats[i] - 1) += weights.empty() ? 1.0 : weights[i];
  }
  return t;
}

Eigen::VectorXd arm_frequencies(std::span<const int> arms, int n_arms) {
  Eigen::VectorXd pi = Eigen::VectorXd::Zero(n_arms);
  for (int a : arms) pi(a) += 1.0;
  return pi / static_cast<double>(arms.size());
}

Eigen::MatrixXd OrdinalFit::beta_cov() const {
  const auto c1 = params.alpha.size();
  const auto kb = params.beta.size();
  if (cov.size() == 0) return {};
  return cov.block(c1, c1, kb, kb);
}

namespace {

// theta layout: alpha (c-1), beta (K-1), gamma (p)
struct Layout {
  int c1;
  int kb;
  int p;
  int size() const { return c1 + kb + p; }
};

ModelParams unpack(const Eigen::VectorXd& theta, const Layout& l) {
  return {theta.head(l.c1), theta.segment(l.c1, l.kb)};
}

Eigen::VectorXd start_vector(const CellTable& cells, const Layout& l, const NewtonOptions& opts,
                             bool& boundary) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(l.size());
  boundary = false;
  if (opts.start) {
    theta.head(l.c1) = opts.start->alpha;
    theta.segment(l.c1, l.kb) = opts.start->beta;
    return theta;
  }
  const Eigen::VectorXd by_cat = cells.colwise().sum().transpose();
  const double total = by_cat.sum();
  double cum = 0.0;
  for (int j = 0; j < l.c1; ++j) {
    cum += by_cat(j);
    const double prop = cum / total;
    if (prop <= 0.0) {
      theta(j) = -opts.boundary_start;
      boundary = true;
    } else if (prop >= 1.0) {
      theta(j) = opts.boundary_start;
      boundary = true;
    } else {
      theta(j) = logit(prop);
    }
  }
  return theta;
}

void check_separation(const Eigen::VectorXd& theta, const Layout& l, double limit) {
  for (int j = 0; j < l.c1; ++j) {
    for (int a = 0; a <= l.kb; ++a) {
      const double eta = theta(j) + (a == 0 ? 0.0 : theta(l.c1 + a - 1));
      if (!(std::abs(eta) <= limit)) {
        throw FitError("separation: |alpha_j + beta_a| exceeded " + std::to_string(limit), theta);
      }
    }
  }
}

// A flat likelihood far out along a separating direction can pass the gradient test.
void check_fitted(const OrdinalFit& fit, const Layout& l, double limit) {
  Eigen::VectorXd theta(l.c1 + l.kb);
  theta << fit.params.alpha, fit.params.beta;
  check_separation(theta, l, limit);
}

/// Newton-Raphson on r(theta) = 0. eval fills r (and J = dr/dtheta when non-null) and
/// returns false when theta is outside the domain.
template <class Eval>
OrdinalFit newton(Eigen::VectorXd theta, const Layout& l, const NewtonOptions& opts, Eval&& eval) {
  OrdinalFit fit;
  Eigen::VectorXd r(l.size());
  Eigen::MatrixXd jac(l.size(), l.size());
  if (!eval(theta, r, &jac)) throw FitError("invalid starting values", theta);
  Eigen::VectorXd cand(l.size());
  Eigen::VectorXd rc(l.size());
  for (int iter = 0;; ++iter) {
    if (r.cwiseAbs().maxCoeff() < opts.tol) {
      fit.converged = true;
      fit.iterations = iter;
      break;
    }
    if (iter >= opts.max_iter) {
      throw FitError("Newton iteration did not converge in " + std::to_string(opts.max_iter) +
                         " iterations",
                     theta);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) throw FitError("singular Jacobian", theta);
    const Eigen::VectorXd step = -lu.solve(r);
    if (!step.allFinite()) throw FitError("non-finite Newton step", theta);

    const double rnorm = r.norm();
    double t = 1.0;
    bool have_valid = false;
    Eigen::VectorXd best;
    for (int h = 0; h <= opts.max_halvings; ++h, t *= 0.5) {
      cand = theta + t * step;
      if (!eval(cand, rc, nullptr)) continue;
      have_valid = true;
      best = cand;
      if (rc.norm() < rnorm) break;
    }
    if (!have_valid) throw FitError("Newton step left the parameter domain", theta);
    const double moved = (best - theta).cwiseAbs().maxCoeff();
    theta = best;
    check_separation(theta, l, opts.separation);
    eval(theta, r, &jac);
    if (moved < opts.step_tol) {
      fit.converged = true;
      fit.iterations = iter + 1;
      break;
    }
  }
  fit.params = unpack(theta, l);
  fit.gamma = theta.tail(l.p);
  return fit;
}

/// One ordinal observation's contribution to the log-likelihood score/Hessian.
/// Returns false if its category probability is not positive.
bool add_loglik_term(int arm, int cat, double w, std::span<const double> x,
                     const Eigen::VectorXd& theta, const Layout& l, Eigen::VectorXd& g,
                     Eigen::MatrixXd* h) {
  double lin = arm > 0 ? theta(l.c1 + arm - 1) : 0.0;
  for (int k = 0; k < l.p; ++k) lin += theta(l.c1 + l.kb + k) * x[k];
  const int c = l.c1 + 1;
  const bool has_upper = cat < c;
  const bool has_lower = cat > 1;
  double fu = 1.0, du = 0.0, ddu = 0.0;
  double fl = 0.0, dl = 0.0, ddl = 0.0;
  if (has_upper) {
    fu = expit(theta(cat - 1) + lin);
    du = fu * (1.0 - fu);
    ddu = du * (1.0 - 2.0 * fu);
  }
  if (has_lower) {
    fl = expit(theta(cat - 2) + lin);
    dl = fl * (1.0 - fl);
    ddl = dl * (1.0 - 2.0 * fl);
  }
  const double prob = fu - fl;
  if (!(prob > 0.0)) return false;
  const double su = du / prob;
  const double sl = -dl / prob;

  // gradient w.r.t. the upper / lower linear predictors, mapped to theta
  auto accumulate = [&](int alpha_index, double coef) {
    g(alpha_index) += w * coef;
    if (arm > 0) g(l.c1 + arm - 1) += w * coef;
    for (int k = 0; k < l.p; ++k) g(l.c1 + l.kb + k) += w * coef * x[k];
  };
  if (has_upper) accumulate(cat - 1, su);
  if (has_lower) accumulate(cat - 2, sl);
  if (!h) return true;

  const double huu = ddu / prob - su * su;
  const double hll = -ddl / prob - sl * sl;
  const double hul = du * dl / (prob * prob);
  // design vectors of the two linear predictors share the beta/gamma part
  Eigen::VectorXd eu = Eigen::VectorXd::Zero(l.size());
  Eigen::VectorXd el = Eigen::VectorXd::Zero(l.size());
  if (arm > 0) {
    eu(l.c1 + arm - 1) = 1.0;
    el(l.c1 + arm - 1) = 1.0;
  }
  for (int k = 0; k < l.p; ++k) {
    eu(l.c1 + l.kb + k) = x[k];
    el(l.c1 + l.kb + k) = x[k];
  }
  if (has_upper) eu(cat - 1) = 1.0;
  if (has_lower) el(cat - 2) = 1.0;
  if (has_upper) h->noalias() += (w * huu) * eu * eu.transpose();
  if (has_lower) h->noalias() += (w * hll) * el * el.transpose();
  if (has_upper && has_lower) {
    h->noalias() += (w * hul) * (eu * el.transpose() + el * eu.transpose());
  }
  return true;
}

OrdinalFit finish_mle(OrdinalFit fit, const Eigen::MatrixXd& hessian) {
  Eigen::MatrixXd info = -hessian;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw FitError("observed information is not positive definite", Eigen::VectorXd());
  }
  fit.cov = ldlt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  return fit;
}

}  // namespace

OrdinalFit fit_mle(const CellTable& cells, const NewtonOptions& opts) {
  const Layout l{static_cast<int>(cells.cols()) - 1, static_cast<int>(cells.rows()) - 1, 0};
  if (l.c1 < 1 || l.kb < 1) throw DataError("fit_mle needs c >= 2 and K >= 2");
  for (int a = 0; a <= l.kb; ++a) {
    if (!(cells.row(a).sum() > 0.0)) throw DataError("fit_mle: arm " + std::to_string(a) + " is empty");
  }
  bool boundary = false;
  Eigen::VectorXd theta = start_vector(cells, l, opts, boundary);
  auto eval = [&](const Eigen::VectorXd& th, Eigen::VectorXd& g, Eigen::MatrixXd* h) {
    g.setZero();
    if (h) h->setZero();
    for (int a = 0; a <= l.kb; ++a) {
      for (int cat = 1; cat <= l.c1 + 1; ++cat) {
        const double w = cells(a, cat - 1);
        if (w == 0.0) continue;
        if (!add_loglik_term(a, cat, w, {}, th, l, g, h)) return false;
      }
    }
    return true;
  };
  OrdinalFit fit = newton(theta, l, opts, eval);
  fit.boundary_start = boundary;
  if (!boundary) check_fitted(fit, l, opts.fitted_limit);
  Eigen::VectorXd g(l.size());
  Eigen::MatrixXd h(l.size(), l.size());
  Eigen::VectorXd th(l.size());
  th << fit.params.alpha, fit.params.beta;
  eval(th, g, &h);
  return finish_mle(std::move(fit), h);
}

OrdinalFit fit_mle_adjusted(std::span<const int> arms, std::span<const int> cats,
                            const Eigen::MatrixXd& x, int n_arms, int n_categories,
                            const NewtonOptions& opts) {
  const Layout l{n_categories - 1, n_arms - 1, static_cast<int>(x.cols())};
  if (arms.size() != cats.size() || static_cast<Eigen::Index>(arms.size()) != x.rows()) {
    throw DataError("fit_mle_adjusted: input lengths differ");
  }
  const CellTable cells = tabulate(arms, cats, {}, n_arms, n_categories);
  for (int a = 0; a < n_arms; ++a) {
    if (!(cells.row(a).sum() > 0.0)) throw DataError("fit_mle_adjusted: arm " + std::to_string(a) + " is empty");
  }
  bool boundary = false;
  NewtonOptions o = opts;
  Eigen::VectorXd theta = start_vector(cells, l, o, boundary);
  // row-major copy so each subject's covariates are contiguous
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = x;
  auto eval = [&](const Eigen::VectorXd& th, Eigen::VectorXd& g, Eigen::MatrixXd* h) {
    g.setZero();
    if (h) h->setZero();
    for (std::size_t i = 0; i < arms.size(); ++i) {
      std::span<const double> xi(xr.data() + i * l.p, static_cast<std::size_t>(l.p));
      if (!add_loglik_term(arms[i], cats[i], 1.0, xi, th, l, g, h)) return false;
    }
    return true;
  };
  OrdinalFit fit = newton(theta, l, o, eval);
  fit.boundary_start = boundary;
  if (!boundary) check_fitted(fit, l, o.fitted_limit);
  Eigen::VectorXd g(l.size());
  Eigen::MatrixXd h(l.size(), l.size());
  Eigen::VectorXd th(l.size());
  th << fit.params.alpha, fit.params.beta, fit.gamma;
  eval(th, g, &h);
  return finish_mle(std::move(fit), h);
}

OrdinalFit solve_working_independence(const CellTable& cells, const NewtonOptions& opts) {
  const Layout l{static_cast<int>(cells.cols()) - 1, static_cast<int>(cells.rows()) - 1, 0};
  if (l.c1 < 1 || l.kb < 1) throw DataError("working-independence solve needs c >= 2 and K >= 2");
  for (int a = 0; a <= l.kb; ++a) {
    if (!(cells.row(a).sum() > 0.0)) throw DataError("arm " + std::to_string(a) + " has no weight");
  }
  bool boundary = false;
  Eigen::VectorXd theta = start_vector(cells, l, opts, boundary);
  auto eval = [&](const Eigen::VectorXd& th, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    r.setZero();
    if (jac) jac->setZero();
    for (int a = 0; a <= l.kb; ++a) {
      const double shift = a == 0 ? 0.0 : th(l.c1 + a - 1);
      const double wa = cells.row(a).sum();
      // cumulative weight of cats <= j within the arm
      double cum = 0.0;
      for (int j = 0; j < l.c1; ++j) {
        cum += cells(a, j);
        const double p = expit(th(j) + shift);
        const double res = cum - wa * p;
        const double d = wa * p * (1.0 - p);
        r(j) += res;
        if (a > 0) r(l.c1 + a - 1) += res;
        if (jac) {
          (*jac)(j, j) -= d;
          if (a > 0) {
            (*jac)(j, l.c1 + a - 1) -= d;
            (*jac)(l.c1 + a - 1, j) -= d;
            (*jac)(l.c1 + a - 1, l.c1 + a - 1) -= d;
          }
        }
      }
    }
    return true;
  };
  OrdinalFit fit = newton(theta, l, opts, eval);
  fit.boundary_start = boundary;
  if (!boundary) check_fitted(fit, l, opts.fitted_limit);
  return fit;
}

}  // namespace tlpo
