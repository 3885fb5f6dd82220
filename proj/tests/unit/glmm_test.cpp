#include "doctest.h"
#include "helpers.hpp"

#include "smld/distributions.hpp"
#include "smld/errors.hpp"
#include "smld/glmm.hpp"
#include "smld/oracles.hpp"
#include "smld/polya_gamma.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace smld;

namespace {

Priors default_priors(std::size_t q) {
  Priors pr;
  pr.omega_scale = Mat::Identity(q, q);
  pr.omega_df = static_cast<double>(q);
  return pr;
}

Group one_group(Rng& rng, Eigen::Index ni, Eigen::Index p, Eigen::Index q, const Family& fam) {
  Group g;
  g.x.resize(ni, p);
  g.z.resize(ni, q);
  g.y.resize(ni);
  for (Eigen::Index j = 0; j < ni; ++j) {
    for (Eigen::Index c = 0; c < p; ++c) g.x(j, c) = c == 0 ? 1.0 : rng.normal();
    for (Eigen::Index c = 0; c < q; ++c) g.z(j, c) = c == 0 ? 1.0 : rng.normal();
    switch (fam.kind) {
      case FamilyKind::GaussianLinear: g.y(j) = rng.normal(); break;
      case FamilyKind::BinomialLogit: g.y(j) = static_cast<double>(rng.below(fam.trials + 1)); break;
      case FamilyKind::BernoulliProbit: g.y(j) = static_cast<double>(rng.below(2)); break;
      case FamilyKind::Poisson: g.y(j) = static_cast<double>(rng.below(4)); break;
    }
  }
  return g;
}

}  // namespace

TEST_CASE("family mean relation") {
  Rng rng(1);
  for (const auto& fam : {Family::gaussian(), Family::binomial_logit(1), Family::binomial_logit(10),
                          Family::bernoulli_probit(), Family::poisson()}) {
    for (int k = 0; k < 100; ++k) {
      const double eta = 3.0 * rng.normal();
      const double ratio = fam.cumulant_deriv(eta) / fam.natural_deriv(eta);
      CHECK(ratio == doctest::Approx(fam.mean(eta)).epsilon(1e-8));
      // score = y h' - b'
      const double y = fam.kind == FamilyKind::GaussianLinear ? 0.3 : 1.0;
      const double score = y * fam.natural_deriv(eta) - fam.cumulant_deriv(eta);
      CHECK(fam.score(y, eta) == doctest::Approx(score).epsilon(1e-8));
      const double h = 1e-6 * (1 + std::abs(eta));
      const double fd = (fam.log_lik(y, eta + h) - fam.log_lik(y, eta - h)) / (2 * h);
      CHECK(fam.score(y, eta) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
  CHECK(Family::binomial_logit(10).mean(0.4) == doctest::Approx(10.0 * std::exp(0.4) / (1 + std::exp(0.4))));
  CHECK(Family::bernoulli_probit().mean(0.4) == doctest::Approx(normal_cdf(0.4)));
  CHECK(Family::poisson().mean(0.4) == doctest::Approx(std::exp(0.4)));
  CHECK_THROWS_AS(Family::parse("weibull"), ConfigError);
  CHECK(Family::parse("binomial_logit", 10).trials == 10);
}

TEST_CASE("joint gradient examples") {
  Group g;
  g.y = Vec::Zero(1);
  g.x = Mat::Ones(1, 1);
  g.z = Mat::Ones(1, 2);
  Vec theta(4);
  theta << 0.0, vech(Mat::Identity(2, 2));
  // eta = 0 + z'gamma with gamma = 0 -> score 0 - 1/2.
  const Vec grad = joint_log_grad(Family::binomial_logit(1), g, Vec::Zero(2), theta);
  CHECK(grad(0) == doctest::Approx(-0.5));
  CHECK((grad.tail(3) - 0.5 * vech(Mat::Identity(2, 2))).norm() < 1e-15);
}

TEST_CASE("joint gradient matches finite differences") {
  Rng rng(2);
  for (const auto& fam : {Family::gaussian(), Family::binomial_logit(3), Family::bernoulli_probit(),
                          Family::poisson()}) {
    const Group g = one_group(rng, 8, 2, 2, fam);
    const Vec gamma = 0.5 * test::normals(2, rng);
    Vec theta(5);
    theta << 0.3 * test::normals(2, rng), vech(test::random_spd(2, rng, 0.5));
    const auto logp = [&](const Vec& t) {
      const Vec beta = t.head(2);
      const Mat omega = unvech(t.tail(3), 2);
      const Vec eta = g.x * beta + g.z * gamma;
      double ll = 0.0;
      for (Eigen::Index j = 0; j < eta.size(); ++j) ll += fam.log_lik(g.y(j), eta(j));
      return ll + 0.5 * std::log(omega.determinant()) - 0.5 * gamma.dot(omega * gamma);
    };
    const Vec fd = finite_diff_grad(logp, theta);
    Vec analytic = joint_log_grad(fam, g, gamma, theta);
    analytic.tail(3) = analytic.tail(3).cwiseProduct(vech_weights(2));
    CHECK((fd - analytic).norm() <= 1e-6 * (1.0 + analytic.norm()));
  }
}

TEST_CASE("Gaussian conditional draws") {
  Rng rng(3);
  const auto fam = Family::gaussian();
  const Priors pr = default_priors(2);
  GroupedData data;
  data.p = 1;
  data.q = 2;
  data.groups.push_back(one_group(rng, 6, 1, 2, fam));
  // A second group with Z = 0 rows has the prior as its conditional.
  Group zero = one_group(rng, 4, 1, 2, fam);
  zero.z.setZero();
  data.groups.push_back(zero);
  data.ids = {1, 2};
  GlmmModel model(fam, data, pr);
  Mat omega(2, 2);
  omega << 2.0, 0.5, 0.5, 1.0;
  const Vec theta = model.pack(Vec::Constant(1, 0.2), omega);

  for (std::size_t i = 0; i < 2; ++i) {
    const auto& g = model.data().groups[i];
    const Mat prec = omega + g.z.transpose() * g.z;
    const Mat cov = prec.inverse();
    const Vec mean = cov * g.z.transpose() * (g.y - g.x * Vec::Constant(1, 0.2));
    InnerState st;
    const auto d = sample_random_effects(model, i, theta, 200000, rng, st);
    const Vec m = d.gamma.colwise().mean().transpose();
    const Mat c = sample_covariance(d.gamma);
    CHECK(test::rel_err(c, cov) < 0.02);
    CHECK((m - mean).norm() < 0.01 * std::max(1.0, mean.norm()));
  }
}

TEST_CASE("Polya-Gamma moments") {
  Rng rng(4);
  for (const int b : {1, 3}) {
    for (const double c : {0.0, 0.1, 1.0, 2.0, 4.0}) {
      const int draws = 400000;
      double acc = 0.0;
      for (int k = 0; k < draws; ++k) acc += polya_gamma_draw(b, c, rng);
      CHECK(acc / draws == doctest::Approx(polya_gamma_mean(b, c)).epsilon(0.005));
    }
  }
  CHECK(polya_gamma_mean(1, 0.0) == doctest::Approx(0.25));
  CHECK(polya_gamma_mean(1, 2.0) == doctest::Approx(0.25 * std::tanh(1.0)));
}

TEST_CASE("Polya-Gamma Gibbs agrees with a random-walk reference") {
  Rng rng(5);
  const auto fam = Family::binomial_logit(10);
  GroupedData data;
  data.p = 1;
  data.q = 1;
  data.groups.push_back(one_group(rng, 10, 1, 1, fam));
  data.ids = {1};
  GlmmModel model(fam, data, default_priors(1));
  Vec theta(2);
  theta << -0.3, 1.5;
  InnerState st;
  InnerConfig cfg;
  cfg.burn_in = 500;
  const auto pg = sample_random_effects(model, 0, theta, 40000, rng, st, cfg);

  // Reference: plain random-walk MH on the same log density.
  const auto& g = model.data().groups[0];
  const auto logp = [&](double gam) {
    double ll = -0.5 * 1.5 * gam * gam;
    for (Eigen::Index j = 0; j < g.y.size(); ++j) ll += fam.log_lik(g.y(j), -0.3 * g.x(j, 0) + gam * g.z(j, 0));
    return ll;
  };
  double cur = 0.0, lp = logp(cur), sum = 0.0, sum2 = 0.0;
  const int steps = 400000;
  for (int k = 0; k < steps; ++k) {
    const double prop = cur + 0.4 * rng.normal();
    const double lq = logp(prop);
    if (std::log(rng.uniform()) < lq - lp) {
      cur = prop;
      lp = lq;
    }
    sum += cur;
    sum2 += cur * cur;
  }
  const double ref_mean = sum / steps;
  const double ref_sd = std::sqrt(sum2 / steps - ref_mean * ref_mean);
  const double pg_mean = pg.gamma.mean();
  // Generous SE allowing for autocorrelation in both chains.
  const double se = ref_sd * std::sqrt(10.0 / 40000.0 + 20.0 / steps);
  CHECK(std::abs(pg_mean - ref_mean) < 3.0 * se);
}

TEST_CASE("MH inner sampler for probit and Poisson reports acceptance") {
  Rng rng(6);
  for (const auto& fam : {Family::bernoulli_probit(), Family::poisson()}) {
    GroupedData data;
    data.p = 1;
    data.q = 2;
    data.groups.push_back(one_group(rng, 10, 1, 2, fam));
    data.ids = {1};
    GlmmModel model(fam, data, default_priors(2));
    Vec theta(4);
    theta << 0.1, vech(Mat::Identity(2, 2));
    InnerState st;
    const auto d = sample_random_effects(model, 0, theta, 2000, rng, st);
    CHECK(d.acceptance > 0.1);
    CHECK(d.acceptance < 0.7);
    CHECK_FALSE(d.warning);
    CHECK(st.started);
  }
}

TEST_CASE("stochastic gradient pieces") {
  Rng rng(7);
  const auto fam = Family::gaussian();
  GroupedData data;
  data.p = 2;
  data.q = 1;
  data.groups.push_back(one_group(rng, 5, 2, 1, fam));
  data.ids = {1};
  GlmmModel model(fam, data, default_priors(1));
  Vec theta(3);
  theta << 0.1, -0.2, 1.3;
  const Mat same = Mat::Constant(6, 1, 0.4);
  const auto t = stochastic_grad_from_draws(model, 0, theta, same);
  CHECK(t.cov.norm() < 1e-25);

  // Fisher identity at a fixed theta.
  InnerState st;
  const int reps = 10000;
  Vec acc = Vec::Zero(3);
  for (int k = 0; k < reps; ++k) acc += stochastic_grad(model, 0, theta, 10, rng, st).grad;
  const Vec exact = gaussian_marginal_grad(model.data().groups[0], theta, 2, 1);
  CHECK(test::rel_err(acc / reps, exact) < 0.01);

  // Mean of Psi_i hat against the exact conditional covariance / R.
  Mat psi = Mat::Zero(3, 3);
  for (int k = 0; k < reps; ++k) psi += stochastic_grad(model, 0, theta, 10, rng, st).cov;
  const Mat want = gaussian_score_covariance(model.data().groups[0], theta, 2, 1) / 10.0;
  CHECK(test::rel_err(psi / reps, want) < 0.05);
}

TEST_CASE("marginal gradient oracle matches finite differences") {
  Rng rng(8);
  const Group g = one_group(rng, 7, 2, 2, Family::gaussian());
  Vec theta(5);
  theta << 0.2, -0.4, vech(test::random_spd(2, rng, 0.5));
  const auto negll = [&](const Vec& t) { return -gaussian_marginal_log_lik(g, t, 2, 2); };
  Vec fd = finite_diff_grad(negll, theta);
  Vec an = gaussian_marginal_grad(g, theta, 2, 2);
  an.tail(3) = an.tail(3).cwiseProduct(vech_weights(2));
  CHECK((fd - an).norm() <= 1e-6 * (1 + an.norm()));
}

TEST_CASE("full-scan covariance with identical groups") {
  Rng rng(9);
  const auto fam = Family::gaussian();
  GroupedData data;
  data.p = 1;
  data.q = 1;
  const Group g = one_group(rng, 4, 1, 1, fam);
  for (int i = 0; i < 4; ++i) data.groups.push_back(g);
  data.ids = {1, 2, 3, 4};
  GlmmModel model(fam, data, default_priors(1));
  Vec theta(2);
  theta << 0.0, 1.0;
  const Mat psi = gaussian_total_covariance(model, theta, 5);
  const Mat per = gaussian_score_covariance(g, theta, 1, 1) / 5.0;
  // Zero between-group spread: (1/n) sum_i Psi_i = Psi_i.
  CHECK(test::rel_err(psi, per) < 1e-12);
}

TEST_CASE("grouped CSV round trip and validation") {
  const auto data = simulate_glmm(Family::binomial_logit(1), 10, 10, Vec::Constant(2, 0.5),
                                  Mat::Identity(2, 2), 42);
  CHECK(data.n() == 10);
  CHECK(data.n_obs() == 100);
  const auto path = (std::filesystem::temp_directory_path() / "smld_groups.csv").string();
  write_grouped_csv(path, data);
  const auto back = read_grouped_csv(path);
  CHECK(back.n() == 10);
  CHECK(back.p == 2);
  CHECK(back.q == 2);
  CHECK(back.ids.front() == 1);
  CHECK(back.ids.back() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(back.groups[i].y == data.groups[i].y);
    CHECK(back.groups[i].x == data.groups[i].x);
  }
  std::ostringstream a, b;
  write_grouped_csv(a, data);
  write_grouped_csv(b, simulate_glmm(Family::binomial_logit(1), 10, 10, Vec::Constant(2, 0.5),
                                     Mat::Identity(2, 2), 42));
  CHECK(a.str() == b.str());
  std::filesystem::remove(path);

  GroupedData bad = data;
  bad.groups[0].y(0) = 2.0;
  CHECK_THROWS_AS(bad.validate(Family::binomial_logit(1)), ConfigError);
}

TEST_CASE("simulated random effects have the target covariance") {
  Mat sigma(2, 2);
  sigma << 1.0, 0.3, 0.3, 0.5;
  Mat gamma;
  const auto data = simulate_glmm(Family::bernoulli_probit(), 100000, 1, Vec::Zero(1), sigma, 3, &gamma);
  CHECK(test::rel_err(sample_covariance(gamma), sigma) < 0.02);
  for (const auto& g : data.groups) CHECK((g.y(0) == 0.0 || g.y(0) == 1.0));
}

TEST_CASE("pooled least squares recovers beta when random effects vanish") {
  Vec beta(3);
  beta << 0.5, -1.0, 2.0;
  const auto data = simulate_glmm(Family::gaussian(), 400, 10, beta, 1e-10 * Mat::Identity(1, 1), 9);
  Mat xtx = Mat::Zero(3, 3);
  Vec xty = Vec::Zero(3);
  for (const auto& g : data.groups) {
    xtx += g.x.transpose() * g.x;
    xty += g.x.transpose() * g.y;
  }
  const Vec est = xtx.ldlt().solve(xty);
  const Vec se = xtx.inverse().diagonal().cwiseSqrt();
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs(est(j) - beta(j)) < 3.0 * se(j));
}
