#include "doctest.h"
#include "helpers.hpp"

#include "smld/errors.hpp"
#include "smld/oracles.hpp"
#include "smld/toy_targets.hpp"

#include <cmath>

using namespace smld;

TEST_CASE("log-variance terms") {
  LogVarianceTarget t{{1.0, 4.0, 0.25}};
  CHECK(logvar_grad_term(t, 0, 0.0) == doctest::Approx(0.0));
  CHECK(logvar_grad_term(t, 1, 0.0) == doctest::Approx(0.0));

  Rng rng(3);
  const auto big = LogVarianceTarget::simulate(1000, 2.0, rng);
  for (double theta : {-1.0, 0.0, 0.4, std::log(2.0), 2.0}) {
    double sum = 0.0;
    for (std::size_t i = 0; i <= big.n(); ++i) sum += logvar_grad_term(big, i, theta);
    const double closed = (big.n() - 1.0) - std::exp(-2 * theta) * big.sum_y_sq() + std::exp(2 * theta);
    CHECK(sum == doctest::Approx(closed).epsilon(1e-12));
    CHECK(logvar_grad(big, theta) == doctest::Approx(closed).epsilon(1e-12));
    const auto f = [&](const Vec& x) { return logvar_potential(big, x(0)); };
    const Vec fd = finite_diff_grad(f, Vec::Constant(1, theta));
    CHECK(fd(0) == doctest::Approx(closed).epsilon(1e-6));
  }
  // Stationary point from the quadratic in e^{2 theta}.
  const double nm1 = big.n() - 1.0;
  const double root = (-nm1 + std::sqrt(nm1 * nm1 + 4 * big.sum_y_sq())) / 2;
  CHECK(std::abs(logvar_grad(big, 0.5 * std::log(root))) < 1e-8 * big.sum_y_sq());
}

TEST_CASE("variance parametrisation agrees with log-variance") {
  Rng rng(4);
  const auto t = LogVarianceTarget::simulate(50, 1.3, rng);
  for (double s : {0.5, 1.0, 2.5}) {
    double sum = 0.0;
    for (std::size_t i = 0; i <= t.n(); ++i) sum += variance_grad_term(t, i, s);
    const auto f = [&](const Vec& x) { return variance_potential(t, x(0)); };
    CHECK(sum == doctest::Approx(finite_diff_grad(f, Vec::Constant(1, s))(0)).epsilon(1e-6));
    // Same density up to the Jacobian ds = 2 s dtheta.
    const double lhs = variance_potential(t, s) - std::log(2 * s);
    const double rhs = logvar_potential(t, 0.5 * std::log(s));
    const double lhs1 = variance_potential(t, 1.0) - std::log(2.0);
    const double rhs1 = logvar_potential(t, 0.0);
    CHECK(lhs - lhs1 == doctest::Approx(rhs - rhs1).epsilon(1e-10));
  }
}

TEST_CASE("Wishart terms") {
  Mat data = Mat::Zero(1, 2);
  GaussianWishartTarget t(data, 2.0, Mat::Identity(2, 2));
  const Mat g1 = wishart_grad_term(t, 1, Mat::Identity(2, 2));
  CHECK(test::rel_err(g1, -0.5 * Mat::Identity(2, 2)) < 1e-14);
  // nu0 - q - 1 = -1: +1/2 I from the log det and +1/2 I from the scale.
  const Mat g0 = wishart_grad_term(t, 0, Mat::Identity(2, 2));
  CHECK(test::rel_err(g0, Mat::Identity(2, 2)) < 1e-14);
  CHECK_THROWS_AS(wishart_grad_term(t, 0, -Mat::Identity(2, 2)), DomainError);
  CHECK_THROWS(GaussianWishartTarget(data, 1.0, Mat::Identity(2, 2)));
}

TEST_CASE("Wishart gradients match finite differences and vanish at the mode") {
  Rng rng(8);
  Mat sigma(2, 2);
  sigma << 1.5, 0.25, 0.25, 1.5;
  const auto t = GaussianWishartTarget::simulate(200, sigma, 3.0, Mat::Identity(2, 2), rng);
  GaussianWishartOracle oracle(t);
  const Vec w = coordinate_weights(MirrorMap::log_det_pd(2));
  for (int k = 0; k < 50; ++k) {
    const Mat omega = test::random_spd(2, rng, 0.3);
    const auto f = [&](const Vec& x) {
      double s = 0.0;
      for (std::size_t i = 0; i <= t.n(); ++i) s += wishart_potential_term(t, i, unvech(x, 2));
      return s;
    };
    Rng unused(0);
    const Vec g = oracle.full_grad(vech(omega), unused).cwiseProduct(w);
    const Vec fd = finite_diff_grad(f, vech(omega));
    CHECK((g - fd).norm() <= 1e-6 * (1.0 + g.norm()));
  }
  const Mat mode = (t.prior_df + t.n() - 3.0) *
                   (Mat::Identity(2, 2) + t.scatter()).inverse();
  Rng unused(0);
  CHECK(oracle.full_grad(vech(mode), unused).norm() < 1e-9 * t.scatter().norm());
}
