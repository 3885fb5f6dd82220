#pragma once

#include "smld/grad_oracle.hpp"
#include "smld/linalg.hpp"
#include "smld/rng.hpp"

#include <cstddef>
#include <vector>

namespace smld {

/// Zero-mean normal observations with unknown scale sigma and a half-normal
/// prior on sigma. Stores y_i^2 only.
struct LogVarianceTarget {
  std::vector<double> y_sq;

  std::size_t n() const { return y_sq.size(); }
  double sum_y_sq() const;

  /// n draws from Normal(0, sigma^2).
  static LogVarianceTarget simulate(std::size_t n, double sigma, Rng& rng);
};

/// f_i'(theta) for theta = log sigma. i = 0 is the prior term, i in [1, n] a data term.
double logvar_grad_term(const LogVarianceTarget& target, std::size_t i, double theta);

/// f'(theta) = (n - 1) - e^{-2 theta} sum y^2 + e^{2 theta}.
double logvar_grad(const LogVarianceTarget& target, double theta);

/// f(theta) up to an additive constant.
double logvar_potential(const LogVarianceTarget& target, double theta);

/// The same posterior in s = sigma^2: f(s) = (n+1)/2 log s + sum y^2 / (2 s) + s / 2.
/// i = 0 prior, i in [1, n] data.
double variance_grad_term(const LogVarianceTarget& target, std::size_t i, double s);
double variance_potential(const LogVarianceTarget& target, double s);

/// Mean-zero Gaussian observations in R^q with Wishart(prior_df, prior_scale)
/// prior on the precision Omega.
struct GaussianWishartTarget {
  Mat data;  ///< n x q, one observation per row
  double prior_df = 0.0;
  Mat prior_scale;

  GaussianWishartTarget(Mat data, double prior_df, Mat prior_scale);

  std::size_t n() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t q() const { return static_cast<std::size_t>(data.cols()); }
  /// sum_i y_i y_i'
  Mat scatter() const;

  static GaussianWishartTarget simulate(std::size_t n, const Mat& sigma, double prior_df,
                                        const Mat& prior_scale, Rng& rng);
};

/// Symmetric-convention gradient of f_i w.r.t. Omega. i = 0 prior, i in [1, n] data.
Mat wishart_grad_term(const GaussianWishartTarget& target, std::size_t i, const Mat& omega);

/// f_i(Omega) up to constants (i = 0 prior, i in [1, n] data).
double wishart_potential_term(const GaussianWishartTarget& target, std::size_t i, const Mat& omega);

/// GradOracle over theta = log sigma (dim 1).
class LogVarianceOracle final : public GradOracle {
 public:
  explicit LogVarianceOracle(const LogVarianceTarget& target) : target_(target) {}
  std::size_t n_terms() const override { return target_.n(); }
  std::size_t dim() const override { return 1; }
  TermGradient grad_term(std::size_t i, const Vec& theta, Rng&) override;
  Vec grad_prior(const Vec& theta) const override;

 private:
  const LogVarianceTarget& target_;
};

/// GradOracle over s = sigma^2 (dim 1).
class VarianceOracle final : public GradOracle {
 public:
  explicit VarianceOracle(const LogVarianceTarget& target) : target_(target) {}
  std::size_t n_terms() const override { return target_.n(); }
  std::size_t dim() const override { return 1; }
  TermGradient grad_term(std::size_t i, const Vec& theta, Rng&) override;
  Vec grad_prior(const Vec& theta) const override;

 private:
  const LogVarianceTarget& target_;
};

/// GradOracle over theta = vech(Omega).
class GaussianWishartOracle final : public GradOracle {
 public:
  explicit GaussianWishartOracle(const GaussianWishartTarget& target);
  std::size_t n_terms() const override { return target_.n(); }
  std::size_t dim() const override { return vech_size(target_.q()); }
  TermGradient grad_term(std::size_t i, const Vec& theta, Rng&) override;
  Vec grad_prior(const Vec& theta) const override;

 private:
  const GaussianWishartTarget& target_;
  Mat scale_inv_;
};

}  // namespace smld
