#include "smld/distributions.hpp"

#include "smld/errors.hpp"

#include <cmath>

namespace smld {

double sample_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0)) throw DomainError("sample_gamma: shape must be positive");
  if (shape < 1.0) {
    const double u = rng.uniform();
    return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

Mat sample_wishart(double df, const Mat& scale, Rng& rng) {
  const auto q = scale.rows();
  if (df <= static_cast<double>(q) - 1.0) throw DomainError("sample_wishart: df must exceed q - 1");
  Eigen::LLT<Mat> llt(scale);
  if (llt.info() != Eigen::Success) throw DomainError("sample_wishart: scale must be SPD");
  Mat a = Mat::Zero(q, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    a(i, i) = std::sqrt(2.0 * sample_gamma(0.5 * (df - static_cast<double>(i)), rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Mat la = llt.matrixL() * a;
  return symmetrize(la * la.transpose());
}

Vec sample_normal_precision(const Vec& mean, const Eigen::LLT<Mat>& precision_chol, Rng& rng) {
  Vec z(mean.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = rng.normal();
  // P = L L'  =>  L'^{-1} z ~ Normal(0, P^{-1})
  return mean + precision_chol.matrixU().solve(z);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double log_normal_cdf(double x) {
  if (x > -20.0) return std::log(normal_cdf(x));
  // Asymptotic series of the Mills ratio.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * M_PI) +
         std::log(1.0 - 1.0 / x2 + 3.0 / (x2 * x2));
}

}  // namespace smld
