#include "smld/oracles.hpp"

#include "smld/distributions.hpp"
#include "smld/errors.hpp"
#include "smld/parallel.hpp"
#include "smld/polya_gamma.hpp"

#include <chrono>
#include <cmath>
#include <utility>
#include <vector>

namespace smld {

namespace {

std::vector<std::pair<Eigen::Index, Eigen::Index>> vech_pairs(std::size_t q) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  const auto qq = static_cast<Eigen::Index>(q);
  for (Eigen::Index c = 0; c < qq; ++c)
    for (Eigen::Index r = c; r < qq; ++r) out.emplace_back(r, c);
  return out;
}

struct GaussianPieces {
  Vec beta;
  Mat omega;
  Mat sigma;
  Vec resid;  ///< y - X beta
};

GaussianPieces split_theta(const Group& g, const Vec& theta, std::size_t p, std::size_t q) {
  if (static_cast<std::size_t>(theta.size()) != p + vech_size(q)) throw ShapeError("theta length mismatch");
  GaussianPieces out;
  out.beta = theta.head(static_cast<Eigen::Index>(p));
  out.omega = unvech(theta.tail(static_cast<Eigen::Index>(vech_size(q))), q);
  Eigen::LLT<Mat> llt(out.omega);
  if (llt.info() != Eigen::Success) throw DomainError("Omega is not positive definite");
  out.sigma = symmetrize(llt.solve(Mat::Identity(out.omega.rows(), out.omega.cols())));
  out.resid = g.y - g.x * out.beta;
  return out;
}

}  // namespace

ConjugatePosterior wishart_posterior(const GaussianWishartTarget& target) {
  const Mat prior_inv = target.prior_scale.llt().solve(Mat::Identity(target.q(), target.q()));
  const Mat post_inv = symmetrize(prior_inv + target.scatter());
  return {target.prior_df + static_cast<double>(target.n()),
          symmetrize(post_inv.llt().solve(Mat::Identity(target.q(), target.q())))};
}

EntryMoments inverse_wishart_moments(double df, const Mat& psi) {
  const double q = static_cast<double>(psi.rows());
  if (!(df > q + 3.0)) throw DegenerateError("inverse-Wishart variances need df > q + 3");
  const double a = df - q;
  EntryMoments m;
  m.mean = psi / (a - 1.0);
  m.var.resize(psi.rows(), psi.cols());
  for (Eigen::Index i = 0; i < psi.rows(); ++i)
    for (Eigen::Index j = 0; j < psi.cols(); ++j)
      m.var(i, j) = ((a + 1.0) * psi(i, j) * psi(i, j) + (a - 1.0) * psi(i, i) * psi(j, j)) /
                    (a * (a - 1.0) * (a - 1.0) * (a - 3.0));
  return m;
}

EntryMoments wishart_posterior_moments(const GaussianWishartTarget& target) {
  const auto post = wishart_posterior(target);
  const auto q = static_cast<Eigen::Index>(target.q());
  return inverse_wishart_moments(post.df, symmetrize(post.scale.llt().solve(Mat::Identity(q, q))));
}

QuadratureMoments quadrature_posterior_1d(const LogVarianceTarget& target, double tol) {
  const double sy = target.sum_y_sq();
  const auto curvature = [&](double t) { return 2.0 * std::exp(-2.0 * t) * sy + 2.0 * std::exp(2.0 * t); };
  // f is strictly convex, so Newton from a moment estimate converges.
  double mode = target.n() > 0 && sy > 0.0 ? 0.5 * std::log(sy / static_cast<double>(target.n())) : 0.0;
  for (int it = 0; it < 200; ++it) {
    const double step = logvar_grad(target, mode) / curvature(mode);
    mode -= step;
    if (std::abs(step) < 1e-14 * (1.0 + std::abs(mode))) break;
  }
  const double sd = 1.0 / std::sqrt(curvature(mode));
  const double lo = mode - 40.0 * sd;
  const double hi = mode + 40.0 * sd;
  const double f_mode = logvar_potential(target, mode);

  QuadratureMoments out;
  out.mode = mode;
  const auto integrate = [&](std::size_t cells, double m[5]) {
    const double h = (hi - lo) / static_cast<double>(cells);
    for (int k = 0; k < 5; ++k) m[k] = 0.0;
    for (std::size_t j = 0; j <= cells; ++j) {
      const double t = lo + h * static_cast<double>(j);
      const double w = (j == 0 || j == cells ? 0.5 : 1.0) * std::exp(-(logvar_potential(target, t) - f_mode));
      const double s = std::exp(2.0 * t);
      m[0] += w;
      m[1] += w * t;
      m[2] += w * t * t;
      m[3] += w * s;
      m[4] += w * s * s;
    }
    for (int k = 0; k < 5; ++k) m[k] *= h;
  };
  double prev[5];
  double cur[5];
  std::size_t cells = 64;
  integrate(cells, prev);
  for (int level = 1; level <= 20; ++level) {
    cells *= 2;
    integrate(cells, cur);
    bool done = true;
    for (int k = 0; k < 5; ++k)
      if (std::abs(cur[k] - prev[k]) > tol * std::abs(cur[k])) done = false;
    for (int k = 0; k < 5; ++k) prev[k] = cur[k];
    out.levels = level;
    if (done) break;
  }
  out.log_norm = std::log(prev[0]);
  out.mean_theta = prev[1] / prev[0];
  out.var_theta = prev[2] / prev[0] - out.mean_theta * out.mean_theta;
  out.mean_s = prev[3] / prev[0];
  out.var_s = prev[4] / prev[0] - out.mean_s * out.mean_s;
  return out;
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& theta, double h) {
  Vec g(theta.size());
  Vec x = theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double step = h * (1.0 + std::abs(theta(j)));
    x(j) = theta(j) + step;
    const double up = f(x);
    x(j) = theta(j) - step;
    const double down = f(x);
    x(j) = theta(j);
    g(j) = (up - down) / (2.0 * step);
  }
  return g;
}

Trace gibbs_baseline(const GlmmModel& model, std::uint64_t n_sweeps, std::uint64_t seed,
                     const GibbsOptions& options, double max_seconds) {
  const auto& family = model.family();
  if (family.kind != FamilyKind::GaussianLinear && family.kind != FamilyKind::BinomialLogit)
    throw ConfigError("Gibbs baseline supports gaussian and logit families only");
  const bool logit = family.is_logit();
  const auto& data = model.data();
  const std::size_t n = data.n();
  const auto p = static_cast<Eigen::Index>(model.p());
  const auto q = static_cast<Eigen::Index>(model.q());
  const auto& priors = model.priors();
  const Mat scale_inv = priors.omega_scale.llt().solve(Mat::Identity(q, q));

  Vec beta = options.init_beta.size() == p ? options.init_beta : Vec::Zero(p);
  Mat omega = options.fixed_omega ? *options.fixed_omega
                                  : (options.init_omega.rows() == q ? options.init_omega : Mat::Identity(q, q));
  std::vector<Vec> gamma(n, Vec::Zero(q));
  std::vector<Mat> xtwx(n);
  std::vector<Vec> xtr(n);

  Trace trace;
  trace.rows.resize(static_cast<Eigen::Index>(n_sweeps), p + static_cast<Eigen::Index>(vech_size(model.q())));
  const auto start = std::chrono::steady_clock::now();
  std::uint64_t t = 0;
  for (; t < n_sweeps; ++t) {
    if (max_seconds > 0.0 && (t & 15) == 0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() > max_seconds) {
      trace.time_truncated = true;
      break;
    }
    parallel_for(n, [&](std::size_t i) {
      Rng rng = Rng::stream(seed, t, i);
      const auto& g = data.groups[i];
      const Vec offset = g.x * beta;
      const auto ni = g.y.size();
      Vec w = Vec::Ones(ni);
      Vec kappa = g.y;
      if (logit) {
        kappa.array() -= 0.5 * family.trials;
        const Vec eta = offset + g.z * gamma[i];
        for (Eigen::Index j = 0; j < ni; ++j) w(j) = polya_gamma_draw(family.trials, eta(j), rng);
      }
      const Mat prec = omega + g.z.transpose() * w.asDiagonal() * g.z;
      Eigen::LLT<Mat> llt(prec);
      gamma[i] = sample_normal_precision(llt.solve(g.z.transpose() * (kappa - w.cwiseProduct(offset))), llt, rng);
      xtwx[i] = g.x.transpose() * w.asDiagonal() * g.x;
      xtr[i] = g.x.transpose() * (kappa - w.cwiseProduct(g.z * gamma[i]));
    });
    Mat prec = Mat::Identity(p, p) / priors.beta_var;
    Vec rhs = Vec::Zero(p);
    for (std::size_t i = 0; i < n; ++i) {
      prec += xtwx[i];
      rhs += xtr[i];
    }
    Rng beta_rng = Rng::stream(seed, t, n);
    Eigen::LLT<Mat> llt(prec);
    beta = sample_normal_precision(llt.solve(rhs), llt, beta_rng);
    if (!options.fixed_omega) {
      Mat scatter = scale_inv;
      for (const auto& gi : gamma) scatter.noalias() += gi * gi.transpose();
      Rng omega_rng = Rng::stream(seed, t, n + 1);
      omega = sample_wishart(priors.omega_df + static_cast<double>(n),
                             symmetrize(scatter.llt().solve(Mat::Identity(q, q))), omega_rng);
    }
    trace.rows.row(static_cast<Eigen::Index>(t)) << beta.transpose(), vech(omega).transpose();
    trace.iters.push_back(t + 1);
  }
  trace.rows.conservativeResize(static_cast<Eigen::Index>(t), trace.rows.cols());
  trace.steps_run = t;
  trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (t > 0) trace.last = trace.rows.row(static_cast<Eigen::Index>(t) - 1).transpose();
  return trace;
}

double gaussian_marginal_log_lik(const Group& group, const Vec& theta, std::size_t p, std::size_t q) {
  const auto s = split_theta(group, theta, p, q);
  const auto ni = group.y.size();
  const Mat c = Mat::Identity(ni, ni) + group.z * s.sigma * group.z.transpose();
  Eigen::LLT<Mat> llt(c);
  const Mat l = llt.matrixL();
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  return -0.5 * logdet - 0.5 * s.resid.dot(llt.solve(s.resid));
}

Vec gaussian_marginal_grad(const Group& group, const Vec& theta, std::size_t p, std::size_t q) {
  const auto s = split_theta(group, theta, p, q);
  const auto ni = group.y.size();
  const Mat c = Mat::Identity(ni, ni) + group.z * s.sigma * group.z.transpose();
  Eigen::LLT<Mat> llt(c);
  const Mat c_inv = llt.solve(Mat::Identity(ni, ni));
  const Vec a = c_inv * s.resid;
  const Mat g_sigma = 0.5 * group.z.transpose() * (a * a.transpose() - c_inv) * group.z;
  Vec out(theta.size());
  out << -(group.x.transpose() * a), vech(symmetrize(s.sigma * g_sigma * s.sigma));
  return out;
}

Mat gaussian_score_covariance(const Group& group, const Vec& theta, std::size_t p, std::size_t q) {
  const auto s = split_theta(group, theta, p, q);
  const Mat prec = s.omega + group.z.transpose() * group.z;
  const Mat k = symmetrize(prec.llt().solve(Mat::Identity(prec.rows(), prec.cols())));
  const Vec m = k * (group.z.transpose() * s.resid);
  const Mat b = group.x.transpose() * group.z;  // beta block is -B gamma + const
  const auto pairs = vech_pairs(q);
  const auto pp = static_cast<Eigen::Index>(p);
  const auto d = pp + static_cast<Eigen::Index>(pairs.size());
  Mat cov = Mat::Zero(d, d);
  cov.topLeftCorner(pp, pp) = b * k * b.transpose();
  for (std::size_t u = 0; u < pairs.size(); ++u) {
    const auto [c1, d1] = pairs[u];
    const auto col = pp + static_cast<Eigen::Index>(u);
    // Cov(gamma_e, gamma_c gamma_d) = m_c K_ed + m_d K_ec
    const Vec cross = m(c1) * k.col(d1) + m(d1) * k.col(c1);
    cov.block(0, col, pp, 1) = 0.5 * b * cross;
    cov.block(col, 0, 1, pp) = cov.block(0, col, pp, 1).transpose();
    for (std::size_t v = 0; v < pairs.size(); ++v) {
      const auto [a1, b1] = pairs[v];
      const double quad = k(a1, c1) * k(b1, d1) + k(a1, d1) * k(b1, c1) + m(a1) * m(c1) * k(b1, d1) +
                          m(a1) * m(d1) * k(b1, c1) + m(b1) * m(c1) * k(a1, d1) + m(b1) * m(d1) * k(a1, c1);
      cov(pp + static_cast<Eigen::Index>(v), col) = 0.25 * quad;
    }
  }
  return cov;
}

Mat gaussian_total_covariance(const GlmmModel& model, const Vec& theta, std::size_t R) {
  if (model.family().kind != FamilyKind::GaussianLinear) throw ConfigError("GaussianLinear family required");
  if (R < 1) throw ConfigError("R must be >= 1");
  const auto& groups = model.data().groups;
  const std::size_t n = groups.size();
  const auto d = static_cast<Eigen::Index>(model.dim());
  std::vector<Vec> g(n);
  Vec total = Vec::Zero(d);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = gaussian_marginal_grad(groups[i], theta, model.p(), model.q());
    total += g[i];
  }
  const double nn = static_cast<double>(n);
  Mat psi = Mat::Zero(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec dev = g[i] - total / nn;
    psi += dev * dev.transpose() +
           gaussian_score_covariance(groups[i], theta, model.p(), model.q()) / static_cast<double>(R);
  }
  return symmetrize(psi / nn);
}

}  // namespace smld
