#include "doctest.h"
#include "helpers.hpp"

#include "smld/correction.hpp"
#include "smld/errors.hpp"
#include "smld/glmm.hpp"
#include "smld/mirror_maps.hpp"
#include "smld/oracles.hpp"
#include "smld/pipeline.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

using namespace smld;

namespace {

// Probabilists' Gauss-Hermite rule via Golub-Welsch; weights sum to one.
void gauss_hermite(int m, Vec& nodes, Vec& weights) {
  Mat jac = Mat::Zero(m, m);
  for (int k = 1; k < m; ++k) jac(k, k - 1) = jac(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Mat> es(jac);
  nodes = es.eigenvalues();
  weights = es.eigenvectors().row(0).transpose().array().square();
}

}  // namespace

TEST_CASE("step-size rule matches the direct formula") {
  const double dmin = std::log(5.0) / std::log(1e4);
  const double delta = (dmin + 1.0) / 2.0;
  CHECK(delta == doctest::Approx(0.587371).epsilon(1e-5));
  CHECK(auto_step_size(5, 10000) == doctest::Approx(5.0 / std::pow(1e4, 1.0 + delta)).epsilon(1e-14));
  // S = 1 gives delta = 1/2.
  CHECK(auto_step_size(1, 100) == doctest::Approx(std::pow(100.0, -1.5)).epsilon(1e-14));
  CHECK_THROWS_AS(auto_step_size(0, 100), ConfigError);
}

TEST_CASE("scalar summaries") {
  Vec x(5);
  x << 3, 1, 4, 1, 5;
  const auto s = summarize(x);
  CHECK(s.mean == doctest::Approx(2.8));
  CHECK(s.var == doctest::Approx(3.2));
  // type-7 quantiles: h = 4p on sorted (1,1,3,4,5)
  CHECK(s.lo == doctest::Approx(1.0));
  CHECK(s.hi == doctest::Approx(4.0 + 0.9 * 1.0));
  CHECK(s.lo <= s.hi);
  CHECK(parameter_names("glmm", 2, 2) ==
        std::vector<std::string>{"beta_0", "beta_1", "omega_0_0", "omega_1_0", "omega_1_1"});
}

TEST_CASE("simulated logit pooled rate matches Gauss-Hermite integral") {
  const std::size_t n = 10000;
  Vec beta(2);
  beta << 1.0, -1.0;
  const auto data = simulate_glmm(Family::binomial_logit(1), n, 10, beta, Mat::Identity(2, 2), 2024);
  // eta = 1 - x + g0 + g1 z with x, z, g0, g1 iid N(0,1): given z, eta ~ N(1, 2 + z^2).
  Vec t, w;
  gauss_hermite(60, t, w);
  double rate = 0.0;
  for (Eigen::Index a = 0; a < t.size(); ++a)
    for (Eigen::Index b = 0; b < t.size(); ++b)
      rate += w(a) * w(b) * 1.0 / (1.0 + std::exp(-1.0 - std::sqrt(2.0 + t(a) * t(a)) * t(b)));
  Vec group_rate(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) group_rate(static_cast<Eigen::Index>(i)) = data.groups[i].y.mean();
  const double mean = group_rate.mean();
  const double se = std::sqrt((group_rate.array() - mean).square().sum() / (n - 1.0) / n);
  CHECK(std::abs(mean - rate) < 3.0 * se);
}

TEST_CASE("continuous Lyapunov inversion recovers the drift as n grows") {
  // Linearised SMLD on a Gaussian GLMM: u' = u - eps M u + noise with
  // Cov = eps^2 (n^2/S) Psi + 2 eps A. Its exact stationary covariance fed to
  // the continuous-time equation should return X = M A up to O(eps |M|).
  const std::size_t S = 5, R = 100;
  Vec beta(2);
  beta << 0.5, -0.3;
  Priors pr;
  pr.omega_df = 2.0;
  pr.omega_scale = Mat::Identity(2, 2);
  std::vector<double> errors;
  for (std::size_t n : {500, 2000, 8000}) {
    const auto data = simulate_glmm(Family::gaussian(), n, 10, beta, Mat::Identity(2, 2), 31);
    const GlmmModel model(Family::gaussian(), data, pr);
    const MirrorMap map = model.mirror_map();
    const Vec theta = model.pack(beta, Mat::Identity(2, 2));
    const Vec u0 = grad_phi(map, theta);
    const auto grad = [&](const Vec& u) {
      const Vec th = grad_phi_star(map, u);
      Vec g = model.prior_grad(th);
      for (const auto& grp : data.groups) g += gaussian_marginal_grad(grp, th, 2, 2);
      return g;
    };
    const auto d = u0.size();
    Mat M(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(u0(j)));
      Vec up = u0, um = u0;
      up(j) += h;
      um(j) -= h;
      M.col(j) = (grad(up) - grad(um)) / (2.0 * h);
    }
    const Mat A = metric_matrix(map, u0);
    const Mat psi = gaussian_total_covariance(model, theta, R);
    const double eps = auto_step_size(S, n);
    const double nn = static_cast<double>(n);
    const Mat Q = eps * eps * nn * nn / S * psi + 2.0 * eps * A;
    const Mat F = Mat::Identity(d, d) - eps * M;
    // vec(V) = (I - F (x) F)^{-1} vec(Q)
    Mat K(d * d, d * d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) K.block(i * d, j * d, d, d) = F(i, j) * F;
    const Vec vq = Eigen::Map<const Vec>(Q.data(), d * d);
    const Vec vv = (Mat::Identity(d * d, d * d) - K).partialPivLu().solve(vq);
    const Mat V = symmetrize(Eigen::Map<const Mat>(vv.data(), d, d));
    const Mat X = lyapunov_solve(A, V, gamma_hat(psi, A, eps, S, n)).x;
    const Mat target = M * A;
    CHECK(test::rel_err(target, target.transpose()) < 1e-5);
    errors.push_back(test::rel_err(X, symmetrize(target)));
  }
  MESSAGE("relative errors: " << errors[0] << ", " << errors[1] << ", " << errors[2]);
  CHECK(errors[0] > errors[1]);
  CHECK(errors[1] > errors[2]);
}
