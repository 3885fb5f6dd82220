#pragma once

#include "smld/glmm.hpp"
#include "smld/linalg.hpp"
#include "smld/samplers.hpp"
#include "smld/toy_targets.hpp"

#include <cstdint>
#include <functional>
#include <optional>

namespace smld {

/// Exact posterior of the precision: Omega | y ~ Wishart(df, scale).
struct ConjugatePosterior {
  double df = 0.0;
  Mat scale;
};

ConjugatePosterior wishart_posterior(const GaussianWishartTarget& target);

/// Entrywise moments of a random symmetric matrix.
struct EntryMoments {
  Mat mean;
  Mat var;
};

/// Moments of Sigma ~ InverseWishart(df, psi) (density prop. to
/// |Sigma|^{-(df+q+1)/2} exp(-tr(psi Sigma^{-1})/2)). Requires df > q + 3.
EntryMoments inverse_wishart_moments(double df, const Mat& psi);

/// Moments of Sigma = Omega^{-1} under the exact posterior. DegenerateError if df <= q + 3.
EntryMoments wishart_posterior_moments(const GaussianWishartTarget& target);

/// Posterior moments of theta = log sigma and s = sigma^2 for LogVarianceTarget.
struct QuadratureMoments {
  double log_norm = 0.0;  ///< log of integral exp(-(f - f(mode)))
  double mode = 0.0;
  double mean_theta = 0.0;
  double var_theta = 0.0;
  double mean_s = 0.0;
  double var_s = 0.0;
  int levels = 0;  ///< grid halvings until convergence
};

/// Trapezoid rule on a window of +-40 Laplace SDs around the mode, halving the
/// spacing until every moment changes by less than `tol` relative.
QuadratureMoments quadrature_posterior_1d(const LogVarianceTarget& target, double tol = 1e-10);

/// Central differences with per-coordinate step h (1 + |theta_j|).
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& theta, double h = 1e-6);

struct GibbsOptions {
  /// Hold Omega fixed instead of sampling it (conjugate sub-case checks).
  std::optional<Mat> fixed_omega;
  Vec init_beta;  ///< defaults to zero
  Mat init_omega; ///< defaults to identity
};

/// Full-batch Gibbs sampler over (beta, gamma_1..n, Omega) with Polya-Gamma
/// augmentation for logit families (plain Gaussian conditionals for GaussianLinear).
/// Returns primal (beta, vech Omega) after every sweep. Sweep t uses
/// Rng::stream(seed, t, .) so results do not depend on the worker count.
Trace gibbs_baseline(const GlmmModel& model, std::uint64_t n_sweeps, std::uint64_t seed,
                     const GibbsOptions& options = {}, double max_seconds = 0.0);

/// log p(y_i | theta) for a GaussianLinear group (unit noise variance), up to
/// the 2 pi constant.
double gaussian_marginal_log_lik(const Group& group, const Vec& theta, std::size_t p, std::size_t q);

/// Exact gradient of f_i = -log p(y_i | theta) in the library's symmetric convention.
Vec gaussian_marginal_grad(const Group& group, const Vec& theta, std::size_t p, std::size_t q);

/// Exact covariance of grad log p(y_i, gamma | theta) under gamma ~ p(gamma | y_i, theta)
/// for a GaussianLinear group (Gaussian fourth moments).
Mat gaussian_score_covariance(const Group& group, const Vec& theta, std::size_t p, std::size_t q);

/// Total covariance (1/n) sum_i [(g_i - g/n)^{(x)2} + C_i / R] with
/// exact GaussianLinear gradients g_i and score covariances C_i.
Mat gaussian_total_covariance(const GlmmModel& model, const Vec& theta, std::size_t R);

}  // namespace smld
