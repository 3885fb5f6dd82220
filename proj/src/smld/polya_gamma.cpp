#include "smld/polya_gamma.hpp"

#include "smld/distributions.hpp"
#include "smld/errors.hpp"

#include <cmath>

namespace smld {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTrunc = 0.64;

// n-th coefficient of the alternating series for the J*(1, z) density.
double series_coef(int n, double x) {
  const double k = (n + 0.5) * kPi;
  if (x > kTrunc) return k * std::exp(-0.5 * k * k * x);
  if (x <= 0.0) return 0.0;
  const double e = -1.5 * (std::log(0.5 * kPi) + std::log(x)) + std::log(k) -
                   2.0 * (n + 0.5) * (n + 0.5) / x;
  return std::exp(e);
}

// Probability of the exponential-tail piece of the proposal.
double texpon_mass(double z) {
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  const double rt = std::sqrt(1.0 / kTrunc);
  const double b = rt * (kTrunc * z - 1.0);
  const double a = -rt * (kTrunc * z + 1.0);
  const double x0 = std::log(fz) + fz * kTrunc;
  const double xb = x0 - z + log_normal_cdf(b);
  const double xa = x0 + z + log_normal_cdf(a);
  const double qdivp = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + qdivp);
}

// Inverse Gaussian(1/z, 1) truncated to (0, kTrunc).
double truncated_inverse_gaussian(double z, Rng& rng) {
  double x = kTrunc + 1.0;
  if (1.0 / kTrunc > z) {
    double alpha = 0.0;
    while (rng.uniform() > alpha) {
      double e1 = rng.exponential();
      double e2 = rng.exponential();
      while (e1 * e1 > 2.0 * e2 / kTrunc) {
        e1 = rng.exponential();
        e2 = rng.exponential();
      }
      x = 1.0 + e1 * kTrunc;
      x = kTrunc / (x * x);
      alpha = std::exp(-0.5 * z * z * x);
    }
  } else {
    const double mu = 1.0 / z;
    while (x > kTrunc) {
      double y = rng.normal();
      y *= y;
      const double half_mu = 0.5 * mu;
      const double mu_y = mu * y;
      x = mu + half_mu * mu_y - half_mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
      if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    }
  }
  return x;
}

}  // namespace

double polya_gamma_draw(double c, Rng& rng) {
  const double z = 0.5 * std::fabs(c);
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  const double mass = texpon_mass(z);
  for (;;) {
    const double x = rng.uniform() < mass ? kTrunc + rng.exponential() / fz
                                          : truncated_inverse_gaussian(z, rng);
    double s = series_coef(0, x);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= series_coef(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += series_coef(n, x);
        if (y > s) break;
      }
    }
  }
}

double polya_gamma_draw(int b, double c, Rng& rng) {
  if (b < 1) throw DomainError("polya_gamma_draw: b must be a positive integer");
  double sum = 0.0;
  for (int k = 0; k < b; ++k) sum += polya_gamma_draw(c, rng);
  return sum;
}

double polya_gamma_mean(double b, double c) {
  if (std::fabs(c) < 1e-8) return 0.25 * b;
  return b / (2.0 * c) * std::tanh(0.5 * c);
}

}  // namespace smld
