#include "smld/glmm.hpp"

#include "smld/distributions.hpp"
#include "smld/errors.hpp"
#include "smld/parallel.hpp"
#include "smld/polya_gamma.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace smld {

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
double log_normal_pdf(double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * M_PI); }
// phi(x) / Phi(x)
double mills(double x) { return std::exp(log_normal_pdf(x) - log_normal_cdf(x)); }

bool is_integer(double y) { return std::isfinite(y) && std::floor(y) == y; }

Mat spd_inverse(const Mat& m, const char* what) {
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) throw DomainError(std::string(what) + ": matrix is not SPD");
  return symmetrize(llt.solve(Mat::Identity(m.rows(), m.cols())));
}

struct Unpacked {
  Vec beta;
  Mat omega;
  Mat sigma;
};

Unpacked unpack_checked(const Vec& theta, std::size_t p, std::size_t q) {
  if (static_cast<std::size_t>(theta.size()) != p + vech_size(q))
    throw ShapeError("theta has the wrong length for (beta, vech Omega)");
  Unpacked u;
  u.beta = theta.head(static_cast<Eigen::Index>(p));
  u.omega = unvech(theta.tail(static_cast<Eigen::Index>(vech_size(q))), q);
  if (!is_pd(u.omega)) throw DomainError("Omega is not positive definite");
  u.sigma = spd_inverse(u.omega, "Omega");
  return u;
}

// Per-draw gradient with precomputed pieces; writes into out.
void joint_grad_into(const Family& family, const Group& g, const Vec& offset, const Mat& sigma,
                     const Vec& gamma, Vec& score, Eigen::Ref<Vec> out) {
  const auto p = g.x.cols();
  const Vec eta = offset + g.z * gamma;
  for (Eigen::Index j = 0; j < eta.size(); ++j) score(j) = family.score(g.y(j), eta(j));
  out.head(p) = g.x.transpose() * score;
  out.tail(out.size() - p) = vech(0.5 * sigma - 0.5 * gamma * gamma.transpose());
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  return cells;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(where + ": cannot parse number '" + s + "'");
  }
}

void append_number(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, end);
}

}  // namespace

// ---------------------------------------------------------------------------
// Family

Family Family::binomial_logit(int trials) {
  if (trials < 1) throw ConfigError("binomial_logit: trials must be >= 1");
  return {FamilyKind::BinomialLogit, trials};
}

Family Family::parse(const std::string& name, int trials) {
  if (name == "gaussian" || name == "gaussian_linear") return gaussian();
  if (name == "binomial_logit" || name == "logit") return binomial_logit(trials);
  if (name == "bernoulli_logit") return binomial_logit(1);
  if (name == "bernoulli_probit" || name == "probit") return bernoulli_probit();
  if (name == "poisson") return poisson();
  throw ConfigError("unknown family '" + name + "'");
}

std::string Family::name() const {
  switch (kind) {
    case FamilyKind::GaussianLinear: return "gaussian";
    case FamilyKind::BinomialLogit: return "binomial_logit";
    case FamilyKind::BernoulliProbit: return "bernoulli_probit";
    case FamilyKind::Poisson: return "poisson";
  }
  return "unknown";
}

double Family::cumulant(double eta) const {
  switch (kind) {
    case FamilyKind::GaussianLinear: return 0.5 * eta * eta;
    case FamilyKind::BinomialLogit: return trials * softplus(eta);
    case FamilyKind::BernoulliProbit: return -log_normal_cdf(-eta);
    case FamilyKind::Poisson: return std::exp(eta);
  }
  return 0.0;
}

double Family::cumulant_deriv(double eta) const {
  switch (kind) {
    case FamilyKind::GaussianLinear: return eta;
    case FamilyKind::BinomialLogit: return trials * logistic(eta);
    case FamilyKind::BernoulliProbit: return mills(-eta);
    case FamilyKind::Poisson: return std::exp(eta);
  }
  return 0.0;
}

double Family::natural(double eta) const {
  if (kind == FamilyKind::BernoulliProbit) return log_normal_cdf(eta) - log_normal_cdf(-eta);
  return eta;
}

double Family::natural_deriv(double eta) const {
  if (kind == FamilyKind::BernoulliProbit) return mills(eta) + mills(-eta);
  return 1.0;
}

double Family::mean(double eta) const {
  switch (kind) {
    case FamilyKind::GaussianLinear: return eta;
    case FamilyKind::BinomialLogit: return trials * logistic(eta);
    case FamilyKind::BernoulliProbit: return normal_cdf(eta);
    case FamilyKind::Poisson: return std::exp(eta);
  }
  return 0.0;
}

double Family::log_lik(double y, double eta) const {
  switch (kind) {
    case FamilyKind::GaussianLinear: return y * eta - 0.5 * eta * eta;
    case FamilyKind::BinomialLogit: return y * eta - trials * softplus(eta);
    case FamilyKind::BernoulliProbit:
      return y > 0.5 ? log_normal_cdf(eta) : log_normal_cdf(-eta);
    case FamilyKind::Poisson: return y * eta - std::exp(eta);
  }
  return 0.0;
}

double Family::score(double y, double eta) const {
  switch (kind) {
    case FamilyKind::GaussianLinear: return y - eta;
    case FamilyKind::BinomialLogit: return y - trials * logistic(eta);
    case FamilyKind::BernoulliProbit: return y > 0.5 ? mills(eta) : -mills(-eta);
    case FamilyKind::Poisson: return y - std::exp(eta);
  }
  return 0.0;
}

bool Family::valid_response(double y) const {
  switch (kind) {
    case FamilyKind::GaussianLinear: return std::isfinite(y);
    case FamilyKind::BinomialLogit: return is_integer(y) && y >= 0.0 && y <= trials;
    case FamilyKind::BernoulliProbit: return y == 0.0 || y == 1.0;
    case FamilyKind::Poisson: return is_integer(y) && y >= 0.0;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Data

std::size_t GroupedData::n_obs() const {
  std::size_t total = 0;
  for (const auto& g : groups) total += static_cast<std::size_t>(g.y.size());
  return total;
}

void GroupedData::validate(const Family& family) const {
  if (groups.empty()) throw ConfigError("data has no groups");
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    const auto where = "group " + std::to_string(ids.empty() ? static_cast<long long>(i) : ids[i]);
    if (g.y.size() < 1) throw ConfigError(where + " has no observations");
    if (g.x.rows() != g.y.size() || g.z.rows() != g.y.size() ||
        static_cast<std::size_t>(g.x.cols()) != p || static_cast<std::size_t>(g.z.cols()) != q)
      throw ConfigError(where + " has inconsistent design dimensions");
    for (Eigen::Index j = 0; j < g.y.size(); ++j)
      if (!family.valid_response(g.y(j)))
        throw ConfigError(where + ": response out of range for family " + family.name());
    if (!g.x.allFinite() || !g.z.allFinite()) throw ConfigError(where + " has non-finite covariates");
  }
}

GroupedData read_grouped_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open data file " + path);
  std::string line;
  if (!std::getline(is, line)) throw IoError(path + ": empty file");
  const auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "group_id" || header[1] != "y")
    throw IoError(path + ": header must start with group_id,y");
  GroupedData data;
  for (std::size_t c = 2; c < header.size(); ++c) {
    const std::string want_x = "x_" + std::to_string(data.p);
    const std::string want_z = "z_" + std::to_string(data.q);
    if (data.q == 0 && header[c] == want_x) ++data.p;
    else if (header[c] == want_z) ++data.q;
    else throw IoError(path + ": unexpected column '" + header[c] + "'");
  }
  if (data.p == 0 || data.q == 0) throw IoError(path + ": need at least one x_ and one z_ column");

  std::unordered_map<long long, std::size_t> index;
  std::vector<std::vector<std::vector<double>>> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    const auto where = path + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) throw IoError(where + ": wrong number of columns");
    const double gid = parse_double(cells[0], where);
    if (!is_integer(gid)) throw IoError(where + ": group_id must be an integer");
    const auto id = static_cast<long long>(gid);
    auto [it, inserted] = index.emplace(id, rows.size());
    if (inserted) {
      rows.emplace_back();
      data.ids.push_back(id);
    }
    std::vector<double> values;
    values.reserve(cells.size() - 1);
    for (std::size_t c = 1; c < cells.size(); ++c) values.push_back(parse_double(cells[c], where));
    rows[it->second].push_back(std::move(values));
  }
  const auto p = static_cast<Eigen::Index>(data.p);
  const auto q = static_cast<Eigen::Index>(data.q);
  for (const auto& group_rows : rows) {
    Group g;
    const auto ni = static_cast<Eigen::Index>(group_rows.size());
    g.y.resize(ni);
    g.x.resize(ni, p);
    g.z.resize(ni, q);
    for (Eigen::Index j = 0; j < ni; ++j) {
      const auto& v = group_rows[static_cast<std::size_t>(j)];
      g.y(j) = v[0];
      for (Eigen::Index c = 0; c < p; ++c) g.x(j, c) = v[static_cast<std::size_t>(1 + c)];
      for (Eigen::Index c = 0; c < q; ++c) g.z(j, c) = v[static_cast<std::size_t>(1 + p + c)];
    }
    data.groups.push_back(std::move(g));
  }
  return data;
}

void write_grouped_csv(std::ostream& os, const GroupedData& data) {
  std::string line = "group_id,y";
  for (std::size_t c = 0; c < data.p; ++c) line += ",x_" + std::to_string(c);
  for (std::size_t c = 0; c < data.q; ++c) line += ",z_" + std::to_string(c);
  os << line << '\n';
  for (std::size_t i = 0; i < data.groups.size(); ++i) {
    const auto& g = data.groups[i];
    const long long id = data.ids.empty() ? static_cast<long long>(i + 1) : data.ids[i];
    for (Eigen::Index j = 0; j < g.y.size(); ++j) {
      line = std::to_string(id);
      line += ',';
      append_number(line, g.y(j));
      for (Eigen::Index c = 0; c < g.x.cols(); ++c) {
        line += ',';
        append_number(line, g.x(j, c));
      }
      for (Eigen::Index c = 0; c < g.z.cols(); ++c) {
        line += ',';
        append_number(line, g.z(j, c));
      }
      os << line << '\n';
    }
  }
}

void write_grouped_csv(const std::string& path, const GroupedData& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_grouped_csv(os, data);
  if (!os) throw IoError("failed writing " + path);
}

// ---------------------------------------------------------------------------
// Model

void Priors::validate(std::size_t q) const {
  if (!(beta_var > 0.0)) throw ConfigError("priors: beta variance must be positive");
  if (static_cast<std::size_t>(omega_scale.rows()) != q || omega_scale.cols() != omega_scale.rows())
    throw ConfigError("priors: Wishart scale must be q x q");
  if (omega_df < static_cast<double>(q)) throw ConfigError("priors: Wishart df must be >= q");
  if (!is_pd(omega_scale)) throw ConfigError("priors: Wishart scale must be SPD");
}

GlmmModel::GlmmModel(Family family, GroupedData data, Priors priors)
    : family_(family), data_(std::move(data)), priors_(std::move(priors)) {
  data_.validate(family_);
  priors_.validate(data_.q);
  scale_inv_ = spd_inverse(priors_.omega_scale, "Wishart scale");
}

MirrorMap GlmmModel::mirror_map() const {
  return MirrorMap::product({MirrorMap::euclidean(data_.p), MirrorMap::log_det_pd(data_.q)});
}

GlmmParams GlmmModel::unpack(const Vec& theta) const {
  if (static_cast<std::size_t>(theta.size()) != dim()) throw ShapeError("unpack: wrong theta length");
  return {theta.head(static_cast<Eigen::Index>(p())),
          unvech(theta.tail(static_cast<Eigen::Index>(vech_size(q()))), q())};
}

Vec GlmmModel::pack(const Vec& beta, const Mat& omega) const {
  Vec theta(static_cast<Eigen::Index>(dim()));
  theta << beta, vech(omega);
  return theta;
}

Vec GlmmModel::prior_grad(const Vec& theta) const {
  const auto u = unpack_checked(theta, p(), q());
  const double c = 0.5 * (priors_.omega_df - static_cast<double>(q()) - 1.0);
  Vec g(theta.size());
  g << u.beta / priors_.beta_var, vech(-c * u.sigma + 0.5 * scale_inv_);
  return g;
}

Vec joint_log_grad(const Family& family, const Group& group, const Vec& gamma, const Vec& theta) {
  const auto p = static_cast<std::size_t>(group.x.cols());
  const auto q = static_cast<std::size_t>(group.z.cols());
  const auto u = unpack_checked(theta, p, q);
  const Vec offset = group.x * u.beta;
  Vec score(group.y.size());
  Vec out(theta.size());
  joint_grad_into(family, group, offset, u.sigma, gamma, score, out);
  return out;
}

// ---------------------------------------------------------------------------
// Inner samplers

namespace {

double log_conditional(const Family& family, const Group& g, const Vec& offset, const Mat& omega,
                       const Vec& gamma) {
  const Vec eta = offset + g.z * gamma;
  double ll = 0.0;
  for (Eigen::Index j = 0; j < eta.size(); ++j) ll += family.log_lik(g.y(j), eta(j));
  return ll - 0.5 * gamma.dot(omega * gamma);
}

void exact_gaussian(const Group& g, const Vec& offset, const Mat& omega, std::size_t draws, Rng& rng,
                    InnerDraws& out) {
  const Mat prec = omega + g.z.transpose() * g.z;
  Eigen::LLT<Mat> llt(prec);
  const Vec mean = llt.solve(g.z.transpose() * (g.y - offset));
  for (std::size_t r = 0; r < draws; ++r)
    out.gamma.row(static_cast<Eigen::Index>(r)) = sample_normal_precision(mean, llt, rng).transpose();
}

void polya_gamma_gibbs(const Family& family, const Group& g, const Vec& offset, const Mat& omega,
                       std::size_t draws, std::size_t burn_in, Rng& rng, Vec& gamma,
                       InnerDraws& out) {
  const Eigen::Index ni = g.y.size();
  const double m = family.trials;
  Vec kappa = g.y.array() - 0.5 * m;
  Vec w(ni);
  for (std::size_t sweep = 0; sweep < burn_in + draws; ++sweep) {
    const Vec eta = offset + g.z * gamma;
    for (Eigen::Index j = 0; j < ni; ++j) w(j) = polya_gamma_draw(family.trials, eta(j), rng);
    const Mat prec = omega + g.z.transpose() * w.asDiagonal() * g.z;
    Eigen::LLT<Mat> llt(prec);
    const Vec rhs = g.z.transpose() * (kappa - w.cwiseProduct(offset));
    gamma = sample_normal_precision(llt.solve(rhs), llt, rng);
    if (sweep >= burn_in) out.gamma.row(static_cast<Eigen::Index>(sweep - burn_in)) = gamma.transpose();
  }
}

void random_walk_mh(const Family& family, const Group& g, const Vec& offset, const Mat& omega,
                    std::size_t draws, std::size_t burn_in, Rng& rng, InnerState& state,
                    InnerDraws& out) {
  const auto q = omega.rows();
  const double curvature = family.kind == FamilyKind::BernoulliProbit ? 0.6 : 1.0;
  const Mat prop_prec = omega + curvature * g.z.transpose() * g.z;
  Eigen::LLT<Mat> llt(prop_prec);
  Vec& gamma = state.gamma;
  double current = log_conditional(family, g, offset, omega, gamma);
  std::size_t accepted = 0;
  Vec zeros = Vec::Zero(q);
  for (std::size_t t = 0; t < burn_in + draws; ++t) {
    const Vec proposal = gamma + std::exp(state.log_step) * (sample_normal_precision(zeros, llt, rng));
    const double cand = log_conditional(family, g, offset, omega, proposal);
    const bool accept = std::log(rng.uniform()) < cand - current;
    if (accept) {
      gamma = proposal;
      current = cand;
    }
    if (t < burn_in) {
      state.log_step += ((accept ? 1.0 : 0.0) - 0.4) / std::sqrt(static_cast<double>(t) + 1.0);
    } else {
      accepted += accept;
      out.gamma.row(static_cast<Eigen::Index>(t - burn_in)) = gamma.transpose();
    }
  }
  out.acceptance = draws ? static_cast<double>(accepted) / static_cast<double>(draws) : 1.0;
  out.warning = out.acceptance < 0.1 || out.acceptance > 0.7;
}

}  // namespace

InnerDraws sample_random_effects(const GlmmModel& model, std::size_t i, const Vec& theta,
                                 std::size_t draws, Rng& rng, InnerState& state,
                                 const InnerConfig& config) {
  if (draws < 1) throw ConfigError("sample_random_effects: need at least one draw");
  const auto& g = model.data().groups.at(i);
  const auto u = unpack_checked(theta, model.p(), model.q());
  const Vec offset = g.x * u.beta;
  const auto q = static_cast<Eigen::Index>(model.q());
  if (!state.started || state.gamma.size() != q) {
    state.gamma = Vec::Zero(q);
    state.log_step = std::log(2.38 / std::sqrt(static_cast<double>(q)));
    state.started = true;
  }
  InnerDraws out;
  out.gamma.resize(static_cast<Eigen::Index>(draws), q);
  switch (model.family().kind) {
    case FamilyKind::GaussianLinear:
      exact_gaussian(g, offset, u.omega, draws, rng, out);
      state.gamma = out.gamma.bottomRows(1).transpose();
      break;
    case FamilyKind::BinomialLogit:
      polya_gamma_gibbs(model.family(), g, offset, u.omega, draws, config.burn_in, rng, state.gamma, out);
      break;
    case FamilyKind::BernoulliProbit:
    case FamilyKind::Poisson:
      random_walk_mh(model.family(), g, offset, u.omega, draws, config.burn_in, rng, state, out);
      break;
  }
  return out;
}

TermGradient stochastic_grad_from_draws(const GlmmModel& model, std::size_t i, const Vec& theta,
                                        const Mat& gamma) {
  const auto& g = model.data().groups.at(i);
  const auto u = unpack_checked(theta, model.p(), model.q());
  const Vec offset = g.x * u.beta;
  const auto r_count = gamma.rows();
  const auto d = static_cast<Eigen::Index>(model.dim());
  Mat grads(d, r_count);
  Vec score(g.y.size());
  for (Eigen::Index r = 0; r < r_count; ++r)
    joint_grad_into(model.family(), g, offset, u.sigma, gamma.row(r).transpose(), score, grads.col(r));
  const Vec mean = grads.rowwise().mean();
  TermGradient out;
  out.grad = -mean;
  if (r_count >= 2) {
    const Mat centered = grads.colwise() - mean;
    out.cov = (centered * centered.transpose()) /
              (static_cast<double>(r_count) * static_cast<double>(r_count - 1));
  } else {
    out.cov = Mat::Zero(d, d);
  }
  return out;
}

TermGradient stochastic_grad(const GlmmModel& model, std::size_t i, const Vec& theta,
                             std::size_t draws, Rng& rng, InnerState& state,
                             const InnerConfig& config, bool* warning) {
  const InnerDraws d = sample_random_effects(model, i, theta, draws, rng, state, config);
  if (warning) *warning = d.warning;
  return stochastic_grad_from_draws(model, i, theta, d.gamma);
}

GlmmOracle::GlmmOracle(const GlmmModel& model, std::size_t inner_samples, InnerConfig config)
    : model_(model), inner_samples_(inner_samples), config_(config), states_(model.data().n()) {
  if (inner_samples_ < 1) throw ConfigError("GlmmOracle: inner samples must be >= 1");
}

void GlmmOracle::set_inner_samples(std::size_t r) {
  if (r < 1) throw ConfigError("GlmmOracle: inner samples must be >= 1");
  inner_samples_ = r;
}

TermGradient GlmmOracle::grad_term(std::size_t i, const Vec& theta, Rng& rng) {
  bool warned = false;
  auto t = stochastic_grad(model_, i, theta, inner_samples_, rng, states_.at(i), config_, &warned);
  if (warned) ++warnings_;
  return t;
}

Mat full_psi_hat(GradOracle& oracle, const Vec& theta, Rng& rng) {
  const std::size_t n = oracle.n_terms();
  const auto d = static_cast<Eigen::Index>(oracle.dim());
  std::vector<TermGradient> terms(n);
  const std::uint64_t base = rng();
  parallel_for(n, [&](std::size_t i) {
    Rng r = Rng::stream(base, i);
    terms[i] = oracle.grad_term(i, theta, r);
  });
  Vec total = Vec::Zero(d);
  for (const auto& t : terms) total += t.grad;
  const double nn = static_cast<double>(n);
  const Vec center = total / nn;
  Mat psi = Mat::Zero(d, d);
  for (const auto& t : terms) {
    const Vec dev = t.grad - center;
    psi.noalias() += dev * dev.transpose();
    if (t.cov.size() > 0) psi += t.cov / nn;
  }
  return symmetrize(psi / nn);
}

GroupedData simulate_glmm(const Family& family, std::size_t n, std::size_t n_per_group,
                          const Vec& beta_true, const Mat& sigma_true, std::uint64_t seed,
                          Mat* gamma_out) {
  if (!is_pd(sigma_true)) throw DomainError("simulate_glmm: sigma_true must be SPD");
  if (beta_true.size() < 1 || n < 1 || n_per_group < 1)
    throw ConfigError("simulate_glmm: need p >= 1, n >= 1 and n_per_group >= 1");
  Rng rng(seed);
  GroupedData data;
  data.p = static_cast<std::size_t>(beta_true.size());
  data.q = static_cast<std::size_t>(sigma_true.rows());
  const Mat l = sigma_true.llt().matrixL();
  const auto p = beta_true.size();
  const auto q = sigma_true.rows();
  const auto ni = static_cast<Eigen::Index>(n_per_group);
  data.groups.reserve(n);
  if (gamma_out) gamma_out->resize(static_cast<Eigen::Index>(n), q);
  for (std::size_t i = 0; i < n; ++i) {
    Group g;
    g.x.resize(ni, p);
    g.z.resize(ni, q);
    g.y.resize(ni);
    for (Eigen::Index j = 0; j < ni; ++j) {
      g.x(j, 0) = 1.0;
      for (Eigen::Index c = 1; c < p; ++c) g.x(j, c) = rng.normal();
      g.z(j, 0) = 1.0;
      for (Eigen::Index c = 1; c < q; ++c) g.z(j, c) = rng.normal();
    }
    Vec zq(q);
    for (Eigen::Index c = 0; c < q; ++c) zq(c) = rng.normal();
    const Vec gamma = l * zq;
    if (gamma_out) gamma_out->row(static_cast<Eigen::Index>(i)) = gamma.transpose();
    const Vec eta = g.x * beta_true + g.z * gamma;
    for (Eigen::Index j = 0; j < ni; ++j) {
      switch (family.kind) {
        case FamilyKind::GaussianLinear: g.y(j) = eta(j) + rng.normal(); break;
        case FamilyKind::BinomialLogit: {
          const double prob = logistic(eta(j));
          int count = 0;
          for (int t = 0; t < family.trials; ++t) count += rng.uniform() < prob;
          g.y(j) = count;
          break;
        }
        case FamilyKind::BernoulliProbit: g.y(j) = rng.uniform() < normal_cdf(eta(j)) ? 1.0 : 0.0; break;
        case FamilyKind::Poisson: {
          // Count unit-rate arrivals before time `rate`; rates here are moderate.
          const double rate = std::exp(eta(j));
          double acc = 0.0;
          int k = 0;
          for (;;) {
            acc += rng.exponential();
            if (acc > rate) break;
            ++k;
          }
          g.y(j) = k;
          break;
        }
      }
    }
    data.groups.push_back(std::move(g));
    data.ids.push_back(static_cast<long long>(i + 1));
  }
  return data;
}

}  // namespace smld
