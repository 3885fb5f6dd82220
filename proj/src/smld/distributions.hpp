#pragma once

#include "smld/linalg.hpp"
#include "smld/rng.hpp"

namespace smld {

/// Gamma(shape, scale = 1) by Marsaglia-Tsang.
double sample_gamma(double shape, Rng& rng);

/// Wishart(df, scale) via the Bartlett decomposition; df > q - 1.
Mat sample_wishart(double df, const Mat& scale, Rng& rng);

/// Normal(mean, P^{-1}) given the Cholesky factor L of the precision P = L L'.
Vec sample_normal_precision(const Vec& mean, const Eigen::LLT<Mat>& precision_chol, Rng& rng);

/// Standard normal cdf and its log, accurate in the far left tail.
double normal_cdf(double x);
double log_normal_cdf(double x);

}  // namespace smld
