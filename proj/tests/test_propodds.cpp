#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "tlpo/error.hpp"
#include "tlpo/propodds.hpp"

using namespace tlpo;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// pr(Cat = cat | A = arm) by differencing the cumulative model
double cell_prob(const ModelParams& p, int arm, int cat) {
  const int c = p.categories();
  auto cum = [&](int j) {
    if (j <= 0) return 0.0;
    if (j >= c) return 1.0;
    return sigmoid(p.alpha(j - 1) + p.arm_effect(arm));
  };
  return cum(cat) - cum(cat - 1);
}

ModelParams random_params(std::mt19937_64& gen, int c, int k) {
  std::uniform_real_distribution<double> step(0.2, 1.2), b(-0.8, 0.8);
  ModelParams p;
  p.alpha.resize(c - 1);
  double a = -1.5;
  for (int j = 0; j < c - 1; ++j) p.alpha(j) = (a += step(gen)) - 0.5;
  p.beta.resize(k - 1);
  for (int j = 0; j < k - 1; ++j) p.beta(j) = b(gen);
  return p;
}

Eigen::VectorXd random_pi(std::mt19937_64& gen, int k) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  Eigen::VectorXd pi(k);
  for (int a = 0; a < k; ++a) pi(a) = u(gen);
  return pi / pi.sum();
}

// M for one cell written straight from the stacked estimating equations
Eigen::VectorXd oracle_M(const ModelParams& p, int arm, int cat) {
  const int c = p.categories(), k = p.arms();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(c - 1 + k - 1);
  double total = 0.0;
  for (int j = 1; j < c; ++j) {
    const double r = (cat <= j ? 1.0 : 0.0) - sigmoid(p.alpha(j - 1) + p.arm_effect(arm));
    out(j - 1) = r;
    total += r;
  }
  if (arm > 0) out(c - 1 + arm - 1) = total;
  return out;
}

struct OracleBlocks {
  Eigen::MatrixXd b11, b12, b22;
};

OracleBlocks oracle_blocks(const ModelParams& p, const Eigen::VectorXd& pi) {
  const int c = p.categories(), k = p.arms();
  OracleBlocks b{Eigen::MatrixXd::Zero(c - 1, c - 1), Eigen::MatrixXd::Zero(c - 1, k - 1),
                 Eigen::MatrixXd::Zero(k - 1, k - 1)};
  for (int a = 0; a < k; ++a) {
    for (int j = 1; j < c; ++j) {
      const double f = sigmoid(p.alpha(j - 1) + p.arm_effect(a));
      const double v = pi(a) * f * (1 - f);
      b.b11(j - 1, j - 1) += v;
      if (a > 0) {
        b.b12(j - 1, a - 1) += v;
        b.b22(a - 1, a - 1) += v;
      }
    }
  }
  return b;
}

Eigen::VectorXd oracle_m(const ModelParams& p, const Eigen::VectorXd& pi, int arm, int cat) {
  const auto b = oracle_blocks(p, pi);
  const int c = p.categories();
  const Eigen::VectorXd M = oracle_M(p, arm, cat);
  const Eigen::MatrixXd proj = -b.b12.transpose() * b.b11.inverse();
  return proj * M.head(c - 1) + M.tail(M.size() - (c - 1));
}

// closed form for two arms, written from the displayed scalar expression
double oracle_m2(const ModelParams& p, double pi, int arm, int cat) {
  double out = 0.0;
  for (int j = 1; j < p.categories(); ++j) {
    const double p0 = sigmoid(p.alpha(j - 1)), p1 = sigmoid(p.alpha(j - 1) + p.beta(0));
    const double r = cat <= j ? 1.0 : 0.0;
    const double pbar = (1 - pi) * p0 * (1 - p0) + pi * p1 * (1 - p1);
    out += (arm * (r - p1) * (1 - pi) * p0 * (1 - p0) - (1 - arm) * (r - p0) * pi * p1 * (1 - p1)) / pbar;
  }
  return out;
}

double oracle_v2(const ModelParams& p, double pi) {
  double v = 0.0;
  for (int j = 1; j < p.categories(); ++j) {
    const double p0 = sigmoid(p.alpha(j - 1)), p1 = sigmoid(p.alpha(j - 1) + p.beta(0));
    const double pbar = (1 - pi) * p0 * (1 - p0) + pi * p1 * (1 - p1);
    v += pi * (1 - pi) * p1 * (1 - p1) * p0 * (1 - p0) / pbar;
  }
  return v;
}

Eigen::VectorXd table1_pi() { return Eigen::Vector2d(0.5, 0.5); }

ModelParams table1_params() {
  ModelParams p;
  p.alpha.resize(5);
  const double cum[] = {0.12, 0.35, 0.52, 0.62, 0.67};
  for (int j = 0; j < 5; ++j) p.alpha(j) = std::log(cum[j] / (1 - cum[j]));
  p.beta = Eigen::VectorXd::Constant(1, std::log(1.5));
  return p;
}

}  // namespace

TEST_CASE("expit and logit") {
  CHECK(expit(0.0) == 0.5);
  CHECK(logit(expit(2.5)) == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(expit(-1000.0) > 0.0);
  CHECK(expit(1000.0) == 1.0);
  CHECK_THROWS_AS(expit(std::nan("")), std::domain_error);
  CHECK_THROWS_AS(expit(INFINITY), std::domain_error);
}

TEST_CASE("estimating functions have mean zero over the enumeration grid") {
  std::mt19937_64 gen(11);
  for (int c : {2, 3, 6, 10}) {
    for (int k : {2, 3, 4}) {
      for (int rep = 0; rep < 4; ++rep) {
        const ModelParams p = random_params(gen, c, k);
        const Eigen::VectorXd pi = random_pi(gen, k);
        const CumulativeProbs probs = cumulative_probs(p, pi);
        Eigen::VectorXd em = Eigen::VectorXd::Zero(c - 1 + k - 1);
        Eigen::VectorXd es = Eigen::VectorXd::Zero(k - 1);
        for (int a = 0; a < k; ++a) {
          for (int cat = 1; cat <= c; ++cat) {
            const double w = pi(a) * cell_prob(p, a, cat);
            em += w * estfun_M(a, cat, p);
            es += w * efficient_score(a, cat, probs);
          }
        }
        CHECK(em.cwiseAbs().maxCoeff() < 1e-12);
        CHECK(es.cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("M and m match the direct constructions") {
  std::mt19937_64 gen(5);
  for (int c : {2, 4, 7}) {
    for (int k : {2, 3}) {
      const ModelParams p = random_params(gen, c, k);
      const Eigen::VectorXd pi = random_pi(gen, k);
      const CumulativeProbs probs = cumulative_probs(p, pi);
      for (int a = 0; a < k; ++a) {
        for (int cat = 1; cat <= c; ++cat) {
          CHECK((estfun_M(a, cat, p) - oracle_M(p, a, cat)).cwiseAbs().maxCoeff() < 1e-14);
          CHECK((efficient_score_blocks(a, cat, probs) - oracle_m(p, pi, a, cat)).cwiseAbs().maxCoeff() <
                1e-12);
          if (k == 2) {
            CHECK(efficient_score_two_arm(a, cat, probs) ==
                  doctest::Approx(oracle_m2(p, pi(1), a, cat)).epsilon(1e-12));
          }
        }
      }
    }
  }
}

TEST_CASE("K-arm block path reduces to the two-arm closed form") {
  std::mt19937_64 gen(17);
  for (int c : {2, 6, 10}) {
    const ModelParams p = random_params(gen, c, 2);
    const CumulativeProbs probs = cumulative_probs(p, random_pi(gen, 2));
    CHECK(std::abs(v_schur(probs)(0, 0) - v_two_arm(probs)) < 1e-10);
    CHECK(std::abs(v_two_arm(probs) - oracle_v2(p, probs.pi(1))) < 1e-14);
    for (int a = 0; a < 2; ++a) {
      for (int cat = 1; cat <= c; ++cat) {
        CHECK(std::abs(efficient_score_blocks(a, cat, probs)(0) - efficient_score_two_arm(a, cat, probs)) <
              1e-10);
      }
    }
  }
}

TEST_CASE("V is minus the expected derivative of m, not its variance") {
  const ModelParams p = table1_params();
  const Eigen::VectorXd pi = table1_pi();
  const CumulativeProbs probs = cumulative_probs(p, pi);
  const double v = v_two_arm(probs);
  // expectation under the true law of m evaluated at perturbed beta / alpha
  auto expected_m = [&](const ModelParams& at) {
    const CumulativeProbs q = cumulative_probs(at, pi);
    double s = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int cat = 1; cat <= 6; ++cat) s += pi(a) * cell_prob(p, a, cat) * efficient_score_two_arm(a, cat, q);
    return s;
  };
  const double h = 1e-5;
  ModelParams up = p, dn = p;
  up.beta(0) += h;
  dn.beta(0) -= h;
  CHECK(-(expected_m(up) - expected_m(dn)) / (2 * h) == doctest::Approx(v).epsilon(1e-7));
  for (int j = 0; j < 5; ++j) {
    ModelParams au = p, ad = p;
    au.alpha(j) += h;
    ad.alpha(j) -= h;
    CHECK(std::abs((expected_m(au) - expected_m(ad)) / (2 * h)) < 1e-8);
  }
  double em2 = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int cat = 1; cat <= 6; ++cat) em2 += pi(a) * cell_prob(p, a, cat) * std::pow(efficient_score_two_arm(a, cat, probs), 2);
  CHECK(v == doctest::Approx(0.2555).epsilon(1e-3));
  CHECK(em2 == doctest::Approx(0.8472).epsilon(1e-3));
}

TEST_CASE("score blocks agree with the analytic expectation") {
  std::mt19937_64 gen(23);
  const ModelParams p = random_params(gen, 5, 3);
  const Eigen::VectorXd pi = random_pi(gen, 3);
  const ScoreBlocks b = score_blocks(cumulative_probs(p, pi));
  const OracleBlocks o = oracle_blocks(p, pi);
  CHECK((Eigen::MatrixXd(b.b11.asDiagonal()) - o.b11).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((b.b12 - o.b12).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((Eigen::MatrixXd(b.b22.asDiagonal()) - o.b22).cwiseAbs().maxCoeff() < 1e-15);
  const Eigen::MatrixXd schur = o.b22 - o.b12.transpose() * o.b11.inverse() * o.b12;
  CHECK((v_matrix(cumulative_probs(p, pi)) - schur).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ScoreTable rows equal efficient_score") {
  std::mt19937_64 gen(3);
  const ModelParams p = random_params(gen, 4, 3);
  const CumulativeProbs probs = cumulative_probs(p, random_pi(gen, 3));
  const ScoreTable t(probs);
  for (int a = 0; a < 3; ++a)
    for (int cat = 1; cat <= 4; ++cat)
      CHECK((t(a, cat).transpose() - efficient_score(a, cat, probs)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("degenerate inputs are rejected") {
  ModelParams p;
  p.alpha = Eigen::Vector2d(0.5, 0.1);
  p.beta = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(p.check(), DataError);
  ModelParams far;
  far.alpha = Eigen::Vector2d(-60, 60);
  far.beta = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(efficient_score(0, 1, cumulative_probs(far, table1_pi())), DegenerateModelError);
}

TEST_CASE("tabulate and arm frequencies") {
  const std::vector<int> arms{0, 1, 1, 0, 1};
  const std::vector<int> cats{1, 2, 2, 3, 1};
  const std::vector<double> w{1.0, 2.0, 0.5, 1.0, 3.0};
  const CellTable t = tabulate(arms, cats, w, 2, 3);
  CHECK(t(0, 0) == 1.0);
  CHECK(t(1, 1) == 2.5);
  CHECK(t(1, 0) == 3.0);
  CHECK(t(0, 2) == 1.0);
  CHECK(tabulate(arms, cats, {}, 2, 3).sum() == 5.0);
  const Eigen::VectorXd f = arm_frequencies(arms, 2);
  CHECK(f(0) == doctest::Approx(0.4));
  CHECK(f(1) == doctest::Approx(0.6));
}

TEST_CASE("two-category MLE is the logistic log odds ratio") {
  CellTable cells(2, 2);
  cells << 30, 70, 45, 55;
  const OrdinalFit fit = fit_mle(cells);
  REQUIRE(fit.converged);
  const double lor = std::log((45.0 / 55.0) / (30.0 / 70.0));
  CHECK(fit.params.beta(0) == doctest::Approx(lor).epsilon(1e-10));
  CHECK(fit.beta_cov()(0, 0) == doctest::Approx(1 / 30. + 1 / 70. + 1 / 45. + 1 / 55.).epsilon(1e-8));
  // working independence coincides with the MLE for c = 2
  CHECK(solve_working_independence(cells).params.beta(0) == doctest::Approx(lor).epsilon(1e-10));
}

TEST_CASE("expected-count tables recover the generating parameters") {
  std::mt19937_64 gen(41);
  for (int k : {2, 3}) {
    const ModelParams p = random_params(gen, 6, k);
    const Eigen::VectorXd pi = random_pi(gen, k);
    CellTable cells(k, 6);
    for (int a = 0; a < k; ++a)
      for (int cat = 1; cat <= 6; ++cat) cells(a, cat - 1) = 1000.0 * pi(a) * cell_prob(p, a, cat);
    const OrdinalFit mle = fit_mle(cells);
    const OrdinalFit wi = solve_working_independence(cells);
    CHECK((mle.params.beta - p.beta).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((mle.params.alpha - p.alpha).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((wi.params.beta - p.beta).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(mle.iterations > 0);
  }
}

TEST_CASE("covariate-adjusted MLE sets the likelihood gradient to zero") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  const int n = 400;
  std::vector<int> arms(n), cats(n);
  Eigen::MatrixXd x(n, 1);
  for (int i = 0; i < n; ++i) {
    arms[i] = u(gen) < 0.5 ? 0 : 1;
    x(i, 0) = z(gen);
    const double lat = x(i, 0) * 0.8 - 0.4 * arms[i] + std::log(u(gen) / (1 - u(gen)));
    cats[i] = lat < -1 ? 1 : lat < 0.2 ? 2 : lat < 1.3 ? 3 : 4;
  }
  const OrdinalFit fit = fit_mle_adjusted(arms, cats, x, 2, 4);
  REQUIRE(fit.converged);
  auto loglik = [&](const Eigen::VectorXd& th) {
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      const double eta = th(4) * arms[i] + th(3) * x(i, 0);
      auto cum = [&](int j) { return j <= 0 ? 0.0 : j >= 4 ? 1.0 : sigmoid(th(j - 1) + eta); };
      ll += std::log(cum(cats[i]) - cum(cats[i] - 1));
    }
    return ll;
  };
  Eigen::VectorXd th(5);
  th << fit.params.alpha, fit.gamma(0), fit.params.beta(0);
  for (int k = 0; k < 5; ++k) {
    Eigen::VectorXd up = th, dn = th;
    up(k) += 1e-6;
    dn(k) -= 1e-6;
    CHECK(std::abs((loglik(up) - loglik(dn)) / 2e-6) < 1e-4);
  }
  CHECK(fit.params.beta(0) > 0.0);  // treatment lowered the latent, raising pr(Cat <= j)
}

TEST_CASE("separation is reported as a fit error") {
  CellTable cells(2, 3);
  cells << 10, 10, 10, 30, 0, 0;
  CHECK_THROWS_AS(fit_mle(cells), FitError);
}
