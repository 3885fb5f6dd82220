#include "smld/toy_targets.hpp"

#include "smld/errors.hpp"

#include <cmath>
#include <numeric>
#include <utility>

namespace smld {

double LogVarianceTarget::sum_y_sq() const {
  return std::accumulate(y_sq.begin(), y_sq.end(), 0.0);
}

LogVarianceTarget LogVarianceTarget::simulate(std::size_t n, double sigma, Rng& rng) {
  LogVarianceTarget t;
  t.y_sq.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = sigma * rng.normal();
    t.y_sq.push_back(y * y);
  }
  return t;
}

double logvar_grad_term(const LogVarianceTarget& target, std::size_t i, double theta) {
  if (i == 0) return -1.0 + std::exp(2.0 * theta);
  return 1.0 - std::exp(-2.0 * theta) * target.y_sq.at(i - 1);
}

double logvar_grad(const LogVarianceTarget& target, double theta) {
  const double n = static_cast<double>(target.n());
  return (n - 1.0) - std::exp(-2.0 * theta) * target.sum_y_sq() + std::exp(2.0 * theta);
}

double logvar_potential(const LogVarianceTarget& target, double theta) {
  const double n = static_cast<double>(target.n());
  return (n - 1.0) * theta + 0.5 * std::exp(-2.0 * theta) * target.sum_y_sq() +
         0.5 * std::exp(2.0 * theta);
}

double variance_grad_term(const LogVarianceTarget& target, std::size_t i, double s) {
  if (i == 0) return 0.5 + 0.5 / s;
  return 0.5 / s - 0.5 * target.y_sq.at(i - 1) / (s * s);
}

double variance_potential(const LogVarianceTarget& target, double s) {
  const double n = static_cast<double>(target.n());
  return 0.5 * (n + 1.0) * std::log(s) + 0.5 * target.sum_y_sq() / s + 0.5 * s;
}

GaussianWishartTarget::GaussianWishartTarget(Mat data_in, double df, Mat scale)
    : data(std::move(data_in)), prior_df(df), prior_scale(std::move(scale)) {
  const auto q = static_cast<double>(data.cols());
  if (prior_scale.rows() != data.cols() || prior_scale.cols() != data.cols())
    throw ShapeError("GaussianWishartTarget: prior scale must be q x q");
  if (prior_df < q) throw DomainError("GaussianWishartTarget: prior df must be >= q");
  if (!is_pd(prior_scale)) throw DomainError("GaussianWishartTarget: prior scale must be SPD");
}

Mat GaussianWishartTarget::scatter() const { return data.transpose() * data; }

GaussianWishartTarget GaussianWishartTarget::simulate(std::size_t n, const Mat& sigma,
                                                      double prior_df, const Mat& prior_scale,
                                                      Rng& rng) {
  if (!is_pd(sigma)) throw DomainError("simulate: sigma must be SPD");
  const Mat l = sigma.llt().matrixL();
  const auto q = sigma.rows();
  Mat y(static_cast<Eigen::Index>(n), q);
  Vec z(q);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index j = 0; j < q; ++j) z(j) = rng.normal();
    y.row(i) = (l * z).transpose();
  }
  return GaussianWishartTarget(std::move(y), prior_df, prior_scale);
}

Mat wishart_grad_term(const GaussianWishartTarget& target, std::size_t i, const Mat& omega) {
  if (!is_pd(omega)) throw DomainError("wishart_grad_term: omega must be SPD");
  const Mat sigma = symmetrize(omega.llt().solve(Mat::Identity(omega.rows(), omega.cols())));
  if (i == 0) {
    const double c = 0.5 * (target.prior_df - static_cast<double>(target.q()) - 1.0);
    const Mat scale_inv = target.prior_scale.llt().solve(Mat::Identity(omega.rows(), omega.cols()));
    return -c * sigma + 0.5 * symmetrize(scale_inv);
  }
  const Vec y = target.data.row(static_cast<Eigen::Index>(i - 1)).transpose();
  return -0.5 * sigma + 0.5 * y * y.transpose();
}

double wishart_potential_term(const GaussianWishartTarget& target, std::size_t i, const Mat& omega) {
  if (!is_pd(omega)) throw DomainError("wishart_potential_term: omega must be SPD");
  const double logdet = 2.0 * std::log(omega.llt().matrixL().determinant());
  if (i == 0) {
    const double c = 0.5 * (target.prior_df - static_cast<double>(target.q()) - 1.0);
    const Mat scale_inv = target.prior_scale.llt().solve(Mat::Identity(omega.rows(), omega.cols()));
    return -c * logdet + 0.5 * (scale_inv * omega).trace();
  }
  const Vec y = target.data.row(static_cast<Eigen::Index>(i - 1)).transpose();
  return -0.5 * logdet + 0.5 * y.dot(omega * y);
}

TermGradient LogVarianceOracle::grad_term(std::size_t i, const Vec& theta, Rng&) {
  return {Vec::Constant(1, logvar_grad_term(target_, i + 1, theta(0))), {}};
}

Vec LogVarianceOracle::grad_prior(const Vec& theta) const {
  return Vec::Constant(1, logvar_grad_term(target_, 0, theta(0)));
}

TermGradient VarianceOracle::grad_term(std::size_t i, const Vec& theta, Rng&) {
  return {Vec::Constant(1, variance_grad_term(target_, i + 1, theta(0))), {}};
}

Vec VarianceOracle::grad_prior(const Vec& theta) const {
  return Vec::Constant(1, variance_grad_term(target_, 0, theta(0)));
}

GaussianWishartOracle::GaussianWishartOracle(const GaussianWishartTarget& target)
    : target_(target),
      scale_inv_(symmetrize(target.prior_scale.llt().solve(
          Mat::Identity(target.prior_scale.rows(), target.prior_scale.cols())))) {}

TermGradient GaussianWishartOracle::grad_term(std::size_t i, const Vec& theta, Rng&) {
  const Mat omega = unvech(theta, target_.q());
  Eigen::LLT<Mat> llt(omega);
  if (llt.info() != Eigen::Success) throw DomainError("GaussianWishartOracle: omega not SPD");
  const Mat sigma = llt.solve(Mat::Identity(omega.rows(), omega.cols()));
  const auto y = target_.data.row(static_cast<Eigen::Index>(i));
  return {vech(-0.5 * symmetrize(sigma) + 0.5 * y.transpose() * y), {}};
}

Vec GaussianWishartOracle::grad_prior(const Vec& theta) const {
  const Mat omega = unvech(theta, target_.q());
  Eigen::LLT<Mat> llt(omega);
  if (llt.info() != Eigen::Success) throw DomainError("GaussianWishartOracle: omega not SPD");
  const Mat sigma = symmetrize(llt.solve(Mat::Identity(omega.rows(), omega.cols())));
  const double c = 0.5 * (target_.prior_df - static_cast<double>(target_.q()) - 1.0);
  return vech(-c * sigma + 0.5 * scale_inv_);
}

}  // namespace smld
