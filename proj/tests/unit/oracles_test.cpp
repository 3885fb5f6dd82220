#include "doctest.h"
#include "helpers.hpp"

#include "smld/distributions.hpp"
#include "smld/errors.hpp"
#include "smld/oracles.hpp"

#include <cmath>

using namespace smld;

TEST_CASE("finite differences of a quadratic") {
  Vec theta(2);
  theta << 1.0, 2.0;
  const Vec g = finite_diff_grad([](const Vec& t) { return 0.5 * t.squaredNorm(); }, theta, 1e-5);
  CHECK((g - theta).norm() < 1e-8);
}

TEST_CASE("inverse-Wishart moments against Monte Carlo") {
  Rng rng(1);
  Mat scale(2, 2);
  scale << 0.4, 0.1, 0.1, 0.3;
  const double df = 12.0;
  // Omega ~ W(df, scale) -> Sigma ~ IW(df, scale^{-1}).
  const auto m = inverse_wishart_moments(df, scale.inverse());
  const int draws = 400000;
  Mat s1 = Mat::Zero(2, 2), s2 = Mat::Zero(2, 2);
  for (int k = 0; k < draws; ++k) {
    const Mat sig = sample_wishart(df, scale, rng).inverse();
    s1 += sig;
    s2 += sig.cwiseProduct(sig);
  }
  const Mat mean = s1 / draws;
  const Mat var = s2 / draws - mean.cwiseProduct(mean);
  CHECK(test::rel_err(mean, m.mean) < 0.005);
  CHECK(test::rel_err(var, m.var) < 0.03);

  // q = 1: inverse-gamma with shape df/2 and rate psi/2.
  const auto one = inverse_wishart_moments(10.0, Mat::Constant(1, 1, 3.0));
  CHECK(one.mean(0, 0) == doctest::Approx(1.5 / 4.0));
  CHECK(one.var(0, 0) == doctest::Approx(1.5 * 1.5 / (16.0 * 3.0)));
  CHECK_THROWS_AS(inverse_wishart_moments(4.0, Mat::Identity(1, 1)), DegenerateError);
}

TEST_CASE("conjugate posterior concentrates") {
  Rng rng(2);
  Mat sigma(2, 2);
  sigma << 1.5, 0.25, 0.25, 1.5;
  const auto t = GaussianWishartTarget::simulate(200000, sigma, 2.0, Mat::Identity(2, 2), rng);
  const auto m = wishart_posterior_moments(t);
  CHECK(test::rel_err(m.mean, sigma) < 0.01);
  CHECK(m.var.maxCoeff() < 1e-4);
}

TEST_CASE("Wishart full conditional in the Gibbs sweep") {
  // With gamma fixed the Omega update is Wishart(nu + n, (V^{-1} + sum gamma gamma')^{-1}).
  Rng rng(3);
  Mat scatter(2, 2);
  scatter << 5.0, 1.0, 1.0, 4.0;
  const double df = 2.0 + 10.0;
  const Mat scale = (Mat::Identity(2, 2) + scatter).inverse();
  Mat acc = Mat::Zero(2, 2);
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) acc += sample_wishart(df, scale, rng);
  CHECK(test::rel_err(acc / draws, df * scale) < 0.01);
}

TEST_CASE("quadrature posterior for the log-variance toy") {
  Rng rng(4);
  const auto t = LogVarianceTarget::simulate(1000, 2.0, rng);
  const auto q = quadrature_posterior_1d(t);
  CHECK(std::abs(q.mean_theta - std::log(2.0)) < 3.0 * std::sqrt(q.var_theta) + 0.05);
  CHECK(std::abs(q.mean_theta - q.mode) < 0.1 * std::sqrt(q.var_theta));
  const auto coarse = quadrature_posterior_1d(t, 1e-6);
  CHECK(std::abs(coarse.mean_s - q.mean_s) < 1e-6 * q.mean_s);
  // Near-Gaussian posterior: E[e^{2 theta}] is close to the log-normal moment.
  CHECK(q.mean_s == doctest::Approx(std::exp(2 * q.mean_theta + 2 * q.var_theta)).epsilon(1e-2));

  // Mode at zero when sum y^2 = n + ... : f'(0) = (n - 1) - S + 1 = 0 -> S = n.
  LogVarianceTarget sym{std::vector<double>(5000, 1.0)};
  const auto qs = quadrature_posterior_1d(sym);
  CHECK(std::abs(qs.mode) < 1e-12);
  CHECK(std::abs(qs.mean_theta) < 0.05 * std::sqrt(qs.var_theta));
}

TEST_CASE("Gibbs baseline on conjugate regression") {
  // Omega held at a huge precision switches the random effects off.
  const auto data = simulate_glmm(Family::gaussian(), 100, 5, Vec::Constant(2, 0.7),
                                  1e-6 * Mat::Identity(1, 1), 11);
  Priors pr;
  pr.omega_scale = Mat::Identity(1, 1);
  pr.omega_df = 1.0;
  pr.beta_var = 4.0;
  GlmmModel model(Family::gaussian(), data, pr);
  GibbsOptions opt;
  opt.fixed_omega = Mat::Constant(1, 1, 1e10);
  const auto tr = gibbs_baseline(model, 20000, 5, opt);
  Mat prec = Mat::Identity(2, 2) / pr.beta_var;
  Vec rhs = Vec::Zero(2);
  for (const auto& g : data.groups) {
    prec += g.x.transpose() * g.x;
    rhs += g.x.transpose() * g.y;
  }
  const Mat cov = prec.inverse();
  const Vec mean = cov * rhs;
  const Mat beta = tr.rows.leftCols(2).bottomRows(18000);
  const Vec m = beta.colwise().mean().transpose();
  for (Eigen::Index j = 0; j < 2; ++j) {
    const double se = std::sqrt(cov(j, j) / 18000.0);
    CHECK(std::abs(m(j) - mean(j)) < 3.0 * se);
  }
  CHECK(test::rel_err(sample_covariance(beta), cov) < 0.05);
}

TEST_CASE("Gibbs baseline recovers the simulating beta on a small logit GLMM") {
  Vec beta(2);
  beta << 1.0, -1.0;
  const auto data = simulate_glmm(Family::binomial_logit(1), 200, 10, beta, Mat::Identity(2, 2), 12);
  Priors pr;
  pr.omega_scale = Mat::Identity(2, 2);
  pr.omega_df = 2.0;
  GlmmModel model(Family::binomial_logit(1), data, pr);
  const auto tr = gibbs_baseline(model, 4000, 6);
  const Mat b = tr.rows.leftCols(2).bottomRows(3000);
  const Vec m = b.colwise().mean().transpose();
  const Vec sd = (b.rowwise() - m.transpose()).colwise().squaredNorm().transpose().cwiseSqrt() / std::sqrt(3000.0);
  // Posterior SD (not MC SE) bounds the distance to the truth.
  for (Eigen::Index j = 0; j < 2; ++j) CHECK(std::abs(m(j) - beta(j)) < 3.0 * sd(j));
}
