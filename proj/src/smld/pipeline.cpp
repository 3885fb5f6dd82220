#include "smld/pipeline.hpp"

#include "smld/correction.hpp"
#include "smld/errors.hpp"
#include "smld/glmm.hpp"
#include "smld/mirror_maps.hpp"
#include "smld/oracles.hpp"
#include "smld/parallel.hpp"
#include "smld/samplers.hpp"
#include "smld/toy_targets.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

namespace smld {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Config access

void allow_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items())
    if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

const Json& block(const Json& cfg, const char* key) {
  static const Json empty = Json::object();
  if (!cfg.contains(key)) return empty;
  if (!cfg.at(key).is_object()) throw ConfigError(std::string(key) + " must be an object");
  return cfg.at(key);
}

double get_number(const Json& obj, const std::string& where, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(where + "." + key + " must be finite");
  return x;
}

std::uint64_t get_count(const Json& obj, const std::string& where, const char* key, std::uint64_t fallback,
                        std::uint64_t min_value = 0) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    throw ConfigError(where + "." + key + " must be a non-negative integer");
  const auto x = v.get<std::uint64_t>();
  if (x < min_value) throw ConfigError(where + "." + key + " must be >= " + std::to_string(min_value));
  return x;
}

Vec get_vector(const Json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw ConfigError(where + " must be a non-empty array of numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(where + " must contain numbers");
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return out;
}

Mat get_matrix(const Json& v, const std::string& where) {
  if (v.is_number()) return Mat::Constant(1, 1, v.get<double>());
  if (!v.is_array() || v.empty()) throw ConfigError(where + " must be a square matrix (array of rows)");
  const auto q = static_cast<Eigen::Index>(v.size());
  Mat m(q, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    const Vec row = get_vector(v[static_cast<std::size_t>(i)], where);
    if (row.size() != q) throw ConfigError(where + " must be square");
    m.row(i) = row.transpose();
  }
  if ((m - m.transpose()).norm() > 1e-12 * (1.0 + m.norm())) throw ConfigError(where + " must be symmetric");
  return m;
}

Json matrix_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Json vector_json(const Vec& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

// ---------------------------------------------------------------------------
// Sampler settings

struct SamplerSettings {
  Json step = "auto";
  std::optional<double> step_exponent;
  std::size_t minibatch = 5;
  std::uint64_t iterations = 1000;
  std::size_t inner_samples = 100;
  std::size_t inner_burnin = 50;
  std::uint64_t seed = 1;
  double burnin_fraction = 0.1;
  double divergence_threshold = 1e8;
  std::uint64_t thin = 1;
  Json init;
};

SamplerSettings parse_sampler(const Json& cfg) {
  const Json& s = block(cfg, "sampler");
  allow_keys(s, "sampler",
             {"step_size", "step_exponent", "minibatch", "iterations", "inner_samples", "inner_burnin", "seed",
              "burnin_fraction", "divergence_threshold", "thin", "init"});
  SamplerSettings out;
  if (s.contains("step_size")) {
    out.step = s.at("step_size");
    if (out.step.is_number()) {
      const double e = out.step.get<double>();
      if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("sampler.step_size must be positive and finite");
    } else if (out.step != "auto") {
      throw ConfigError("sampler.step_size must be a positive number or \"auto\"");
    }
  }
  if (s.contains("step_exponent")) {
    if (s.contains("step_size")) throw ConfigError("give either sampler.step_size or sampler.step_exponent");
    out.step_exponent = get_number(s, "sampler", "step_exponent", 1.5);
    if (!(*out.step_exponent > 0.0)) throw ConfigError("sampler.step_exponent must be positive");
  }
  out.minibatch = get_count(s, "sampler", "minibatch", out.minibatch, 1);
  out.iterations = get_count(s, "sampler", "iterations", out.iterations);
  out.inner_samples = get_count(s, "sampler", "inner_samples", out.inner_samples, 1);
  out.inner_burnin = get_count(s, "sampler", "inner_burnin", out.inner_burnin);
  out.seed = get_count(s, "sampler", "seed", out.seed);
  out.burnin_fraction = get_number(s, "sampler", "burnin_fraction", out.burnin_fraction);
  if (out.burnin_fraction < 0.0 || out.burnin_fraction >= 1.0)
    throw ConfigError("sampler.burnin_fraction must be in [0, 1)");
  out.divergence_threshold = get_number(s, "sampler", "divergence_threshold", out.divergence_threshold);
  if (!(out.divergence_threshold > 0.0)) throw ConfigError("sampler.divergence_threshold must be positive");
  out.thin = get_count(s, "sampler", "thin", out.thin, 1);
  if (s.contains("init")) out.init = s.at("init");
  return out;
}

double resolve_step(const SamplerSettings& s, std::size_t n) {
  if (s.step_exponent) return static_cast<double>(s.minibatch) / std::pow(static_cast<double>(n), *s.step_exponent);
  if (s.step.is_number()) return s.step.get<double>();
  return auto_step_size(s.minibatch, n);
}

// ---------------------------------------------------------------------------
// Problems

struct Problem {
  std::string model;
  MirrorMap map;
  std::unique_ptr<LogVarianceTarget> logvar;
  std::unique_ptr<GaussianWishartTarget> wishart;
  std::unique_ptr<GlmmModel> glmm;
  std::unique_ptr<GradOracle> oracle;
  GlmmOracle* glmm_oracle = nullptr;
  Vec init;  ///< primal
  std::vector<std::string> names;
  std::size_t p = 0;
  std::size_t q = 0;
};

std::string model_kind(const Json& cfg) {
  if (!cfg.contains("model")) return "glmm";
  if (!cfg.at("model").is_string()) throw ConfigError("model must be a string");
  const auto m = cfg.at("model").get<std::string>();
  if (m != "glmm" && m != "wishart" && m != "logvar" && m != "variance")
    throw ConfigError("model must be one of glmm, wishart, logvar, variance");
  return m;
}

Family parse_family(const Json& cfg) {
  const Json& f = block(cfg, "family");
  allow_keys(f, "family", {"kind", "trials"});
  if (!f.contains("kind") || !f.at("kind").is_string()) throw ConfigError("family.kind is required");
  const int trials = static_cast<int>(get_count(f, "family", "trials", 1, 1));
  return Family::parse(f.at("kind").get<std::string>(), trials);
}

Priors parse_glmm_priors(const Json& cfg, std::size_t q) {
  const Json& pr = block(cfg, "priors");
  allow_keys(pr, "priors", {"beta_var", "omega_df", "omega_scale"});
  Priors out;
  out.beta_var = get_number(pr, "priors", "beta_var", 100.0);
  out.omega_df = get_number(pr, "priors", "omega_df", static_cast<double>(std::max<std::size_t>(q, 2)));
  out.omega_scale = pr.contains("omega_scale") ? get_matrix(pr.at("omega_scale"), "priors.omega_scale")
                                               : Mat::Identity(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
  try {
    out.validate(q);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return out;
}

Mat read_matrix_csv(const std::string& path, const std::string& prefix) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open data file " + path);
  std::string line;
  if (!std::getline(is, line)) throw IoError(path + ": empty file");
  std::size_t cols = 0;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      if (cell != prefix + std::to_string(cols)) throw IoError(path + ": expected column " + prefix + std::to_string(cols));
      ++cols;
    }
  }
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ls, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError(path + ": bad number '" + cell + "'");
      }
      ++c;
    }
    if (c != cols) throw IoError(path + ": ragged row " + std::to_string(rows + 2));
    ++rows;
  }
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void write_matrix_csv(const std::string& path, const Mat& m, const std::string& prefix) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << prefix << j;
  os << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), m(i, j));
      if (j) os << ',';
      os.write(buf, end - buf);
    }
    os << '\n';
  }
  if (!os) throw IoError("failed writing " + path);
}

struct GlmmSimSpec {
  std::size_t n = 100;
  std::size_t n_per_group = 10;
  Vec beta;
  Mat sigma;
  std::uint64_t seed = 1;
};

GlmmSimSpec parse_glmm_simulate(const Json& cfg, std::optional<std::uint64_t> seed_override) {
  const Json& s = block(cfg, "simulate");
  allow_keys(s, "simulate", {"n", "n_per_group", "beta_true", "sigma_true", "seed"});
  GlmmSimSpec out;
  out.n = get_count(s, "simulate", "n", out.n, 1);
  out.n_per_group = get_count(s, "simulate", "n_per_group", out.n_per_group, 1);
  out.beta = s.contains("beta_true") ? get_vector(s.at("beta_true"), "simulate.beta_true") : Vec::Zero(2);
  out.sigma = s.contains("sigma_true") ? get_matrix(s.at("sigma_true"), "simulate.sigma_true") : Mat::Identity(2, 2);
  if (!is_pd(out.sigma)) throw ConfigError("simulate.sigma_true must be SPD");
  out.seed = seed_override ? *seed_override : get_count(s, "simulate", "seed", out.seed);
  return out;
}

GroupedData load_glmm_data(const Json& cfg, const Family& family) {
  if (cfg.contains("data")) {
    const Json& d = block(cfg, "data");
    allow_keys(d, "data", {"path"});
    if (!d.contains("path") || !d.at("path").is_string()) throw ConfigError("data.path must be a string");
    auto data = read_grouped_csv(d.at("path").get<std::string>());
    try {
      data.validate(family);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("data: ") + e.what());
    }
    return data;
  }
  if (cfg.contains("simulate")) {
    const auto spec = parse_glmm_simulate(cfg, std::nullopt);
    return simulate_glmm(family, spec.n, spec.n_per_group, spec.beta, spec.sigma, spec.seed);
  }
  throw ConfigError("a data or simulate block is required");
}

struct ToySimSpec {
  std::size_t n = 1000;
  double sigma = 2.0;
  Mat sigma_true;
  std::uint64_t seed = 1;
};

ToySimSpec parse_toy_simulate(const Json& cfg, const std::string& model, std::optional<std::uint64_t> seed_override) {
  const Json& s = block(cfg, "simulate");
  ToySimSpec out;
  if (model == "wishart") {
    allow_keys(s, "simulate", {"n", "sigma_true", "seed"});
    out.sigma_true = s.contains("sigma_true") ? get_matrix(s.at("sigma_true"), "simulate.sigma_true")
                                              : Mat::Identity(2, 2);
    if (!is_pd(out.sigma_true)) throw ConfigError("simulate.sigma_true must be SPD");
  } else {
    allow_keys(s, "simulate", {"n", "sigma", "seed"});
    out.sigma = get_number(s, "simulate", "sigma", out.sigma);
    if (!(out.sigma > 0.0)) throw ConfigError("simulate.sigma must be positive");
  }
  out.n = get_count(s, "simulate", "n", out.n, 1);
  out.seed = seed_override ? *seed_override : get_count(s, "simulate", "seed", out.seed);
  return out;
}

Mat load_toy_data(const Json& cfg, const std::string& model, Mat* sigma_true = nullptr) {
  if (cfg.contains("data")) {
    const Json& d = block(cfg, "data");
    allow_keys(d, "data", {"path"});
    if (!d.contains("path") || !d.at("path").is_string()) throw ConfigError("data.path must be a string");
    Mat m = read_matrix_csv(d.at("path").get<std::string>(), "y_");
    if (m.rows() < 1) throw ConfigError("data file has no rows");
    if (model != "wishart" && m.cols() != 1) throw ConfigError("scalar models need exactly one column y_0");
    return m;
  }
  if (!cfg.contains("simulate")) throw ConfigError("a data or simulate block is required");
  const auto spec = parse_toy_simulate(cfg, model, std::nullopt);
  Rng rng(spec.seed);
  if (model == "wishart") {
    if (sigma_true) *sigma_true = spec.sigma_true;
    const Mat l = spec.sigma_true.llt().matrixL();
    Mat y(static_cast<Eigen::Index>(spec.n), spec.sigma_true.rows());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      Vec z(y.cols());
      for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = rng.normal();
      y.row(i) = (l * z).transpose();
    }
    return y;
  }
  Mat y(static_cast<Eigen::Index>(spec.n), 1);
  for (Eigen::Index i = 0; i < y.rows(); ++i) y(i, 0) = spec.sigma * rng.normal();
  return y;
}

double scalar_init(const SamplerSettings& s, double fallback) {
  if (s.init.is_null()) return fallback;
  if (!s.init.is_number()) throw ConfigError("sampler.init must be a number for scalar models");
  return s.init.get<double>();
}

Problem build_problem(const Json& cfg, const SamplerSettings& s) {
  Problem pb;
  pb.model = model_kind(cfg);
  if (pb.model == "glmm") {
    const Family family = parse_family(cfg);
    GroupedData data = load_glmm_data(cfg, family);
    pb.p = data.p;
    pb.q = data.q;
    const Priors priors = parse_glmm_priors(cfg, data.q);
    pb.glmm = std::make_unique<GlmmModel>(family, std::move(data), priors);
    InnerConfig inner;
    inner.burn_in = s.inner_burnin;
    auto oracle = std::make_unique<GlmmOracle>(*pb.glmm, s.inner_samples, inner);
    pb.glmm_oracle = oracle.get();
    pb.oracle = std::move(oracle);
    pb.map = pb.glmm->mirror_map();
    Vec beta = Vec::Zero(static_cast<Eigen::Index>(pb.p));
    Mat omega = Mat::Identity(static_cast<Eigen::Index>(pb.q), static_cast<Eigen::Index>(pb.q));
    if (!s.init.is_null()) {
      allow_keys(s.init, "sampler.init", {"beta", "omega"});
      if (s.init.contains("beta")) beta = get_vector(s.init.at("beta"), "sampler.init.beta");
      if (s.init.contains("omega")) omega = get_matrix(s.init.at("omega"), "sampler.init.omega");
      if (beta.size() != static_cast<Eigen::Index>(pb.p) || omega.rows() != static_cast<Eigen::Index>(pb.q))
        throw ConfigError("sampler.init does not match the data dimensions");
    }
    pb.init = pb.glmm->pack(beta, omega);
  } else if (pb.model == "wishart") {
    Mat y = load_toy_data(cfg, pb.model);
    const Json& pr = block(cfg, "priors");
    allow_keys(pr, "priors", {"omega_df", "omega_scale"});
    const auto q = y.cols();
    const double df = get_number(pr, "priors", "omega_df", 2.0);
    const Mat scale = pr.contains("omega_scale") ? get_matrix(pr.at("omega_scale"), "priors.omega_scale")
                                                 : Mat::Identity(q, q);
    try {
      pb.wishart = std::make_unique<GaussianWishartTarget>(std::move(y), df, scale);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    pb.q = pb.wishart->q();
    pb.oracle = std::make_unique<GaussianWishartOracle>(*pb.wishart);
    pb.map = MirrorMap::log_det_pd(pb.q);
    if (!s.init.is_null()) {
      pb.init = vech(get_matrix(s.init, "sampler.init"));
    } else {
      const auto post = wishart_posterior(*pb.wishart);
      pb.init = vech(post.df * post.scale);  // posterior mean of Omega
    }
  } else {
    const Mat y = load_toy_data(cfg, pb.model);
    pb.logvar = std::make_unique<LogVarianceTarget>();
    for (Eigen::Index i = 0; i < y.rows(); ++i) pb.logvar->y_sq.push_back(y(i, 0) * y(i, 0));
    const double mle = std::max(pb.logvar->sum_y_sq() / static_cast<double>(pb.logvar->n()), 1e-8);
    if (pb.model == "logvar") {
      pb.oracle = std::make_unique<LogVarianceOracle>(*pb.logvar);
      pb.map = MirrorMap::euclidean(1);
      pb.init = Vec::Constant(1, scalar_init(s, 0.5 * std::log(mle)));
    } else {
      pb.oracle = std::make_unique<VarianceOracle>(*pb.logvar);
      pb.map = MirrorMap::log_barrier_positive(1);
      pb.init = Vec::Constant(1, scalar_init(s, mle));
    }
  }
  if (!in_domain(pb.map, pb.init)) throw ConfigError("sampler.init is outside the parameter domain");
  if (s.minibatch > pb.oracle->n_terms())
    throw ConfigError("sampler.minibatch exceeds the number of data terms");
  pb.names = parameter_names(pb.model, pb.p, pb.q);
  return pb;
}

// ---------------------------------------------------------------------------
// Summaries

// Columns holding non-finite values (overflowed transforms of a diverging
// chain) are listed under "non_finite" instead of being summarized.
void put_summary(Json& out, const std::string& name, const Vec& x) {
  if (x.allFinite()) {
    out[name] = to_json(summarize(x));
  } else {
    out["non_finite"].push_back(name);
  }
}

Json summarize_columns(const Mat& rows, const std::vector<std::string>& names) {
  Json out = Json::object();
  for (Eigen::Index j = 0; j < rows.cols(); ++j) put_summary(out, names[static_cast<std::size_t>(j)], rows.col(j));
  return out;
}

Json derived_summaries(const Problem& pb, const Mat& primal) {
  Json out = Json::object();
  const auto n = primal.rows();
  if (n == 0) return out;
  if (pb.model == "glmm" || pb.model == "wishart") {
    const auto q = static_cast<Eigen::Index>(pb.q);
    const auto off = static_cast<Eigen::Index>(pb.p);
    const auto m = static_cast<Eigen::Index>(vech_size(pb.q));
    Mat sig(n, m), sd(n, q), corr(n, std::max<Eigen::Index>(m - q, 0));
    for (Eigen::Index k = 0; k < n; ++k) {
      const Mat omega = unvech(primal.row(k).segment(off, m).transpose(), pb.q);
      const Mat s = omega.llt().solve(Mat::Identity(q, q));
      sig.row(k) = vech(symmetrize(s)).transpose();
      Eigen::Index c = 0;
      for (Eigen::Index j = 0; j < q; ++j) {
        sd(k, j) = std::sqrt(s(j, j));
        for (Eigen::Index i = j + 1; i < q; ++i) corr(k, c++) = s(i, j) / std::sqrt(s(i, i) * s(j, j));
      }
    }
    Eigen::Index v = 0, c = 0;
    for (Eigen::Index j = 0; j < q; ++j)
      for (Eigen::Index i = j; i < q; ++i)
        put_summary(out, "sigma_" + std::to_string(i) + "_" + std::to_string(j), sig.col(v++));
    for (Eigen::Index j = 0; j < q; ++j) put_summary(out, "sd_" + std::to_string(j), sd.col(j));
    for (Eigen::Index j = 0; j < q; ++j)
      for (Eigen::Index i = j + 1; i < q; ++i)
        put_summary(out, "corr_" + std::to_string(i) + "_" + std::to_string(j), corr.col(c++));
    if (pb.glmm && pb.glmm->family().is_logit())
      for (Eigen::Index j = 0; j < off; ++j)
        put_summary(out, "odds_ratio_" + std::to_string(j), primal.col(j).array().exp().matrix());
  } else if (pb.model == "logvar") {
    put_summary(out, "sigma_sq", (2.0 * primal.col(0).array()).exp().matrix());
    put_summary(out, "sigma", primal.col(0).array().exp().matrix());
  } else {
    put_summary(out, "sigma", primal.col(0).array().sqrt().matrix());
  }
  return out;
}

Json block_summary(const Problem& pb, const Mat& primal) {
  Json out;
  out["n_samples"] = primal.rows();
  out["parameters"] = summarize_columns(primal, pb.names);
  out["derived"] = derived_summaries(pb, primal);
  return out;
}

// ---------------------------------------------------------------------------
// Output

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
  const auto probe = fs::path(dir) / ".smld_write_probe";
  {
    std::ofstream os(probe);
    if (!os) throw IoError("output directory is not writable: " + dir);
  }
  fs::remove(probe, ec);
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

Json manifest_base(const std::string& command, const Json& cfg, std::uint64_t seed) {
  Json m;
  m["tool"] = "smld";
  m["version"] = kVersion;
  m["command"] = command;
  m["seed"] = seed;
  m["config"] = cfg;
  return m;
}

void write_trace(const fs::path& dir, const std::string& stem, const Mat& rows,
                 const std::vector<std::uint64_t>& iters, const std::string& coordinates,
                 const std::vector<std::string>& names, Json manifest) {
  write_trace_csv((dir / (stem + ".csv")).string(), rows, iters);
  manifest["file"] = stem + ".csv";
  manifest["coordinates"] = coordinates;
  manifest["parameters"] = names;
  manifest["rows"] = rows.rows();
  write_json(dir / (stem + ".json"), manifest);
}

std::vector<std::uint64_t> tail_iters(const std::vector<std::uint64_t>& iters, Eigen::Index keep) {
  return {iters.end() - keep, iters.end()};
}

// ---------------------------------------------------------------------------
// Commands

RunOutcome cmd_simulate(const Json& cfg, const fs::path& dir, const RunOptions& opt) {
  const auto model = model_kind(cfg);
  if (!cfg.contains("simulate")) throw ConfigError("simulate needs a simulate block");
  RunOutcome out;
  Json report;
  report["command"] = "simulate";
  report["model"] = model;
  if (model == "glmm") {
    const Family family = parse_family(cfg);
    const auto spec = parse_glmm_simulate(cfg, opt.seed);
    const auto data = simulate_glmm(family, spec.n, spec.n_per_group, spec.beta, spec.sigma, spec.seed);
    write_grouped_csv((dir / "data.csv").string(), data);
    report["seed"] = spec.seed;
    report["family"] = family.name();
    report["n_groups"] = data.n();
    report["n_obs"] = data.n_obs();
    report["p"] = data.p;
    report["q"] = data.q;
    report["beta_true"] = vector_json(spec.beta);
    report["sigma_true"] = matrix_json(spec.sigma);
  } else {
    Json c = cfg;
    const auto spec = parse_toy_simulate(cfg, model, opt.seed);
    c["simulate"]["seed"] = spec.seed;
    const Mat y = load_toy_data(c, model);
    write_matrix_csv((dir / "data.csv").string(), y, "y_");
    report["seed"] = spec.seed;
    report["n"] = y.rows();
    report["dim"] = y.cols();
  }
  report["file"] = "data.csv";
  report["config"] = cfg;
  write_json(dir / "data.json", report);
  out.status = "completed";
  out.report = report;
  return out;
}

RunOutcome cmd_fit(const Json& cfg, const fs::path& dir, const RunOptions& opt) {
  SamplerSettings s = parse_sampler(cfg);
  if (opt.seed) s.seed = *opt.seed;
  Problem pb = build_problem(cfg, s);
  const std::size_t n = pb.oracle->n_terms();
  const double eps = resolve_step(s, n);

  ChainConfig cc;
  cc.n_iters = s.iterations;
  cc.seed = s.seed;
  cc.divergence_threshold = s.divergence_threshold;
  cc.thin = s.thin;
  cc.max_seconds = opt.max_seconds;
  const MirrorMap& map = pb.map;
  GradOracle& oracle = *pb.oracle;
  const std::size_t S = s.minibatch;
  const Vec init = grad_phi(map, pb.init);
  const Trace tr = run_chain([&](const Vec& v, Rng& rng) { return smld_step(map, oracle, v, eps, S, rng).next; },
                             init, cc, [&](const Vec& v) { return in_dual_domain(map, v); });

  Json manifest = manifest_base("fit", cfg, s.seed);
  manifest["status"] = to_string(tr.status);
  manifest["steps_run"] = tr.steps_run;
  manifest["diverged_at"] = tr.diverged_at;
  manifest["time_truncated"] = tr.time_truncated;
  manifest["wall_seconds"] = tr.wall_seconds;
  manifest["step_size"] = eps;
  manifest["mirror_map"] = map.describe();
  const Mat raw_primal = tr.primal(map);
  write_trace(dir, "trace_raw", raw_primal, tr.iters, "primal", pb.names, manifest);
  write_trace(dir, "trace_raw_dual", tr.rows, tr.iters, "dual", pb.names, manifest);

  Json summary;
  summary["command"] = "fit";
  summary["model"] = pb.model;
  summary["status"] = to_string(tr.status);
  summary["seed"] = s.seed;
  summary["step_size"] = eps;
  summary["minibatch"] = S;
  summary["n"] = n;
  summary["iterations"] = s.iterations;
  summary["steps_run"] = tr.steps_run;
  summary["diverged_at"] = tr.diverged_at;
  summary["time_truncated"] = tr.time_truncated;
  summary["burnin_fraction"] = s.burnin_fraction;
  summary["wall_seconds"] = tr.wall_seconds;
  if (pb.glmm) {
    summary["family"] = pb.glmm->family().name();
    summary["inner_samples"] = s.inner_samples;
  }
  Json warnings = Json::array();

  const Mat post = tr.post_burnin(s.burnin_fraction);
  const Eigen::Index keep = post.rows();
  const auto post_iters = tail_iters(tr.iters, keep);
  summary["raw"] = block_summary(pb, raw_primal.bottomRows(keep));

  RunOutcome out;
  if (tr.status == ChainStatus::Diverged) {
    summary["corrected"] = nullptr;
    warnings.push_back("chain diverged at iteration " + std::to_string(tr.diverged_at) + "; correction skipped");
    summary["warnings"] = warnings;
    write_json(dir / "summary.json", summary);
    out.exit_code = kExitDiverged;
    out.status = "diverged";
    out.report = summary;
    return out;
  }

  Json corr;
  corr["status"] = "failed";
  corr["step_size"] = eps;
  corr["minibatch"] = S;
  corr["n"] = n;
  corr["inner_samples"] = pb.glmm ? Json(s.inner_samples) : Json(nullptr);
  corr["n_samples"] = keep;
  try {
    Rng crng = Rng::stream(s.seed, 0, 1);
    const auto inputs = correction_inputs(map, oracle, post, eps, S, pb.glmm ? s.inner_samples : 0, crng);
    corr["vartheta_hat"] = vector_json(inputs.vartheta_hat);
    corr["theta_hat"] = vector_json(grad_phi_star(map, inputs.vartheta_hat));
    const Mat noise = inputs.Gamma_hat - inputs.J_hat;
    corr["noise_to_metric_trace_ratio"] = noise.trace() / inputs.J_hat.trace();
    const auto result = compute_correction(inputs);
    corr["residual"] = result.residual;
    corr["V_eigenvalues"] = vector_json(result.V_eigenvalues);
    corr["H_eigenvalues"] = vector_json(result.H_eigenvalues);
    corr["H_hat"] = matrix_json(result.H_hat);
    corr["V_hat"] = matrix_json(inputs.V_hat);
    corr["J_hat"] = matrix_json(inputs.J_hat);
    corr["Gamma_hat"] = matrix_json(inputs.Gamma_hat);
    corr["transform"] = matrix_json(result.transform);
    const auto corrected = rescale_trace(post, post_iters, result, map);
    corr["dropped_samples"] = corrected.dropped;
    corr["drop_warning"] = corrected.drop_warning;
    corr["status"] = "completed";
    if (corrected.drop_warning)
      warnings.push_back(std::to_string(corrected.dropped) + " corrected samples left the domain and were dropped");
    write_trace(dir, "trace_corrected", corrected.primal, corrected.iters, "primal", pb.names, manifest);
    write_trace(dir, "trace_corrected_dual", corrected.dual, corrected.iters, "dual", pb.names, manifest);
    summary["corrected"] = block_summary(pb, corrected.primal);
  } catch (const Error& e) {
    if (dynamic_cast<const IoError*>(&e)) throw;
    corr["error"] = e.what();
    summary["corrected"] = nullptr;
    warnings.push_back(std::string("correction failed: ") + e.what());
    out.exit_code = kExitCorrectionFailed;
    out.status = "correction_failed";
  }
  if (pb.glmm_oracle && pb.glmm_oracle->warnings() > 0)
    warnings.push_back(std::to_string(pb.glmm_oracle->warnings()) +
                       " inner MH runs had acceptance outside [0.1, 0.7]");
  summary["correction_status"] = corr["status"];
  summary["warnings"] = warnings;
  write_json(dir / "correction.json", corr);
  write_json(dir / "summary.json", summary);
  if (out.status.empty()) out.status = "completed";
  out.report = summary;
  return out;
}

RunOutcome cmd_gibbs(const Json& cfg, const fs::path& dir, const RunOptions& opt) {
  if (model_kind(cfg) != "glmm") throw ConfigError("gibbs requires model glmm");
  const Json& g = block(cfg, "gibbs");
  allow_keys(g, "gibbs", {"sweeps", "seed", "burnin_fraction"});
  const Family family = parse_family(cfg);
  if (family.kind != FamilyKind::GaussianLinear && !family.is_logit())
    throw ConfigError("gibbs supports gaussian and logit families only");
  const SamplerSettings s = parse_sampler(cfg);
  const std::uint64_t sweeps = get_count(g, "gibbs", "sweeps", 1000, 1);
  const std::uint64_t seed = opt.seed ? *opt.seed : get_count(g, "gibbs", "seed", s.seed);
  const double burn = get_number(g, "gibbs", "burnin_fraction", s.burnin_fraction);
  if (burn < 0.0 || burn >= 1.0) throw ConfigError("gibbs.burnin_fraction must be in [0, 1)");

  GroupedData data = load_glmm_data(cfg, family);
  Problem pb;
  pb.model = "glmm";
  pb.p = data.p;
  pb.q = data.q;
  const Priors priors = parse_glmm_priors(cfg, data.q);
  pb.glmm = std::make_unique<GlmmModel>(family, std::move(data), priors);
  pb.names = parameter_names("glmm", pb.p, pb.q);
  const Trace tr = gibbs_baseline(*pb.glmm, sweeps, seed, {}, opt.max_seconds);

  Json manifest = manifest_base("gibbs", cfg, seed);
  manifest["status"] = "completed";
  manifest["steps_run"] = tr.steps_run;
  manifest["time_truncated"] = tr.time_truncated;
  manifest["wall_seconds"] = tr.wall_seconds;
  write_trace(dir, "trace", tr.rows, tr.iters, "primal", pb.names, manifest);

  const Mat post = tr.post_burnin(burn);
  Json summary;
  summary["command"] = "gibbs";
  summary["model"] = "glmm";
  summary["family"] = family.name();
  summary["status"] = "completed";
  summary["seed"] = seed;
  summary["sweeps"] = sweeps;
  summary["steps_run"] = tr.steps_run;
  summary["time_truncated"] = tr.time_truncated;
  summary["burnin_fraction"] = burn;
  summary["wall_seconds"] = tr.wall_seconds;
  summary["raw"] = block_summary(pb, post);
  summary["corrected"] = nullptr;
  summary["warnings"] = Json::array();
  write_json(dir / "summary.json", summary);
  RunOutcome out;
  out.status = "completed";
  out.report = summary;
  return out;
}

RunOutcome cmd_oracle(const Json& cfg, const fs::path& dir, const RunOptions&) {
  const auto model = model_kind(cfg);
  Json report;
  report["command"] = "oracle";
  report["model"] = model;
  if (model == "wishart") {
    SamplerSettings s;
    Problem pb = build_problem(cfg, s);
    const auto post = wishart_posterior(*pb.wishart);
    const auto m = wishart_posterior_moments(*pb.wishart);
    report["posterior_df"] = post.df;
    report["posterior_scale"] = matrix_json(post.scale);
    report["sigma_mean"] = matrix_json(m.mean);
    report["sigma_var"] = matrix_json(m.var);
    report["omega_mean"] = matrix_json(post.df * post.scale);
  } else if (model == "logvar" || model == "variance") {
    SamplerSettings s;
    s.minibatch = 1;
    Problem pb = build_problem(cfg, s);
    const auto q = quadrature_posterior_1d(*pb.logvar);
    report["log_sigma_mean"] = q.mean_theta;
    report["log_sigma_var"] = q.var_theta;
    report["sigma_sq_mean"] = q.mean_s;
    report["sigma_sq_var"] = q.var_s;
    report["log_sigma_mode"] = q.mode;
    report["refinements"] = q.levels;
  } else {
    throw ConfigError("no exact oracle for the glmm model; use the gibbs command");
  }
  write_json(dir / "oracle.json", report);
  RunOutcome out;
  out.status = "completed";
  out.report = report;
  return out;
}

// Chain with running moments and head/tail capture, used by the divergence demo.
struct DemoRun {
  ChainStatus status = ChainStatus::Completed;
  std::uint64_t diverged_at = 0;
  std::uint64_t steps = 0;
  double mean = 0.0;
  double var = 0.0;
  std::vector<std::pair<std::uint64_t, double>> head;
  std::vector<std::pair<std::uint64_t, double>> tail;
};

DemoRun demo_chain(const MirrorMap& map, GradOracle& oracle, double init_dual, double eps, std::size_t S,
                   std::uint64_t iters, std::uint64_t seed, double threshold, double burnin, bool primal_square,
                   std::size_t keep_head, std::size_t keep_tail, double max_seconds) {
  DemoRun r;
  Vec state = Vec::Constant(1, init_dual);
  const auto burn_steps = static_cast<std::uint64_t>(burnin * static_cast<double>(iters));
  double m = 0.0, m2 = 0.0;
  std::uint64_t cnt = 0;
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t k = 1; k <= iters; ++k) {
    Rng rng = Rng::stream(seed, k);
    Vec next;
    bool ok = true;
    try {
      next = smld_step(map, oracle, state, eps, S, rng).next;
    } catch (const DomainError&) {
      ok = false;
    }
    if (ok) ok = std::isfinite(next(0)) && std::abs(next(0)) <= threshold && in_dual_domain(map, next);
    if (!ok) {
      r.status = ChainStatus::Diverged;
      r.diverged_at = k;
      break;
    }
    state = std::move(next);
    r.steps = k;
    const double primal = grad_phi_star(map, state)(0);
    if (r.head.size() < keep_head) r.head.emplace_back(k, primal);
    if (keep_tail) {
      r.tail.emplace_back(k, primal);
      if (r.tail.size() > 2 * keep_tail) r.tail.erase(r.tail.begin(), r.tail.end() - static_cast<long>(keep_tail));
    }
    if (k > burn_steps) {
      const double x = primal_square ? std::exp(2.0 * primal) : primal;
      ++cnt;
      const double d = x - m;
      m += d / static_cast<double>(cnt);
      m2 += d * (x - m);
    }
    if (max_seconds > 0.0 && (k & 4095u) == 0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() > max_seconds)
      break;
  }
  if (r.tail.size() > keep_tail) r.tail.erase(r.tail.begin(), r.tail.end() - static_cast<long>(keep_tail));
  r.mean = m;
  r.var = cnt > 1 ? m2 / static_cast<double>(cnt - 1) : 0.0;
  return r;
}

void write_pairs_csv(const fs::path& path, const std::vector<std::pair<std::uint64_t, double>>& a,
                     const std::vector<std::pair<std::uint64_t, double>>& b) {
  Mat rows(static_cast<Eigen::Index>(a.size() + b.size()), 1);
  std::vector<std::uint64_t> iters;
  Eigen::Index k = 0;
  for (const auto* v : {&a, &b})
    for (const auto& [it, x] : *v) {
      if (!iters.empty() && it <= iters.back()) continue;
      iters.push_back(it);
      rows(k++, 0) = x;
    }
  rows.conservativeResize(k, 1);
  write_trace_csv(path.string(), rows, iters);
}

RunOutcome cmd_demo_divergence(const Json& cfg, const fs::path& dir, const RunOptions& opt) {
  Json c = cfg;
  if (model_kind(cfg) != "logvar") throw ConfigError("demo-divergence uses model logvar");
  const Json demo = block(cfg, "demo");
  allow_keys(demo, "demo", {"seeds", "base_seed"});
  c.erase("demo");
  SamplerSettings s = parse_sampler(c);
  const std::uint64_t seeds = get_count(demo, "demo", "seeds", 20, 1);
  const std::uint64_t base = opt.seed ? *opt.seed : get_count(demo, "demo", "base_seed", s.seed);
  Problem pb = build_problem(c, s);
  const std::size_t n = pb.oracle->n_terms();
  const double eps = resolve_step(s, n);
  const double theta0 = pb.init(0);
  const auto log_map = MirrorMap::euclidean(1);
  const auto var_map = MirrorMap::log_barrier_positive(1);
  const double s0 = std::exp(2.0 * theta0);
  const auto quad = quadrature_posterior_1d(*pb.logvar);

  std::vector<DemoRun> sgld(seeds), smld(seeds);
  parallel_for(2 * seeds, [&](std::size_t job) {
    const std::size_t j = job / 2;
    const std::uint64_t seed = base + j;
    if (job % 2 == 0) {
      LogVarianceOracle o(*pb.logvar);
      sgld[j] = demo_chain(log_map, o, theta0, eps, s.minibatch, s.iterations, seed, s.divergence_threshold,
                           s.burnin_fraction, true, 5000, 50, opt.max_seconds);
    } else {
      VarianceOracle o(*pb.logvar);
      smld[j] = demo_chain(var_map, o, -1.0 / s0, eps, s.minibatch, s.iterations, seed, s.divergence_threshold,
                           s.burnin_fraction, false, 0, 0, opt.max_seconds);
    }
  });

  Json report;
  report["command"] = "demo-divergence";
  report["n"] = n;
  report["minibatch"] = s.minibatch;
  report["step_size"] = eps;
  report["iterations"] = s.iterations;
  report["init_log_sigma"] = theta0;
  report["divergence_threshold"] = s.divergence_threshold;
  report["quadrature"] = {{"sigma_sq_mean", quad.mean_s}, {"sigma_sq_sd", std::sqrt(quad.var_s)},
                          {"log_sigma_mean", quad.mean_theta}, {"log_sigma_sd", std::sqrt(quad.var_theta)}};
  Json runs = Json::array();
  std::size_t sgld_div = 0, smld_div = 0, smld_ok = 0;
  for (std::size_t j = 0; j < seeds; ++j) {
    Json e;
    e["seed"] = base + j;
    e["sgld_log_sigma"] = {{"status", to_string(sgld[j].status)},
                           {"diverged_at", sgld[j].diverged_at},
                           {"steps_run", sgld[j].steps},
                           {"sigma_sq_mean", sgld[j].mean}};
    const bool within = smld[j].status == ChainStatus::Completed &&
                        std::abs(smld[j].mean - quad.mean_s) <= 3.0 * std::sqrt(quad.var_s);
    e["smld_sigma_sq"] = {{"status", to_string(smld[j].status)},
                          {"diverged_at", smld[j].diverged_at},
                          {"steps_run", smld[j].steps},
                          {"sigma_sq_mean", smld[j].mean},
                          {"sigma_sq_var", smld[j].var},
                          {"within_3_sd_of_quadrature", within}};
    sgld_div += sgld[j].status == ChainStatus::Diverged;
    smld_div += smld[j].status == ChainStatus::Diverged;
    smld_ok += within;
    if (sgld[j].status == ChainStatus::Diverged) {
      const auto name = "sgld_divergence_seed" + std::to_string(base + j) + ".csv";
      write_pairs_csv(dir / name, sgld[j].head, sgld[j].tail);
      e["sgld_log_sigma"]["iterates_file"] = name;
    }
    runs.push_back(e);
  }
  report["runs"] = runs;
  report["sgld_diverged"] = sgld_div;
  report["smld_diverged"] = smld_div;
  report["smld_within_3_sd"] = smld_ok;
  report["config"] = cfg;
  write_json(dir / "demo_divergence.json", report);
  RunOutcome out;
  out.status = "completed";
  out.report = report;
  return out;
}

}  // namespace

double auto_step_size(std::size_t S, std::size_t n) {
  if (S < 1 || n < 2) throw ConfigError("step-size rule needs S >= 1 and n >= 2");
  const double delta_min = std::log(static_cast<double>(S)) / std::log(static_cast<double>(n));
  const double delta = 0.5 * (delta_min + 1.0);
  return static_cast<double>(S) / std::pow(static_cast<double>(n), 1.0 + delta);
}

ScalarSummary summarize(const Eigen::Ref<const Vec>& x) {
  ScalarSummary s;
  const auto n = x.size();
  if (n == 0) return s;
  s.mean = x.mean();
  s.var = n > 1 ? (x.array() - s.mean).square().sum() / static_cast<double>(n - 1) : 0.0;
  std::vector<double> v(x.data(), x.data() + n);
  std::sort(v.begin(), v.end());
  const auto quantile = [&](double p) {
    const double h = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  s.lo = quantile(0.025);
  s.hi = quantile(0.975);
  const auto batches = static_cast<Eigen::Index>(std::floor(std::sqrt(static_cast<double>(n))));
  if (batches >= 2) {
    const Eigen::Index size = n / batches;
    Vec means(batches);
    for (Eigen::Index b = 0; b < batches; ++b) means(b) = x.segment(b * size, size).mean();
    const double mm = means.mean();
    s.mcse = std::sqrt((means.array() - mm).square().sum() / static_cast<double>(batches - 1) /
                       static_cast<double>(batches));
  } else {
    s.mcse = std::sqrt(s.var / static_cast<double>(n));
  }
  return s;
}

Json to_json(const ScalarSummary& s) {
  return {{"mean", s.mean}, {"var", s.var}, {"ci95", {s.lo, s.hi}}, {"mcse", s.mcse}};
}

std::vector<std::string> parameter_names(const std::string& model, std::size_t p, std::size_t q) {
  std::vector<std::string> out;
  if (model == "logvar") return {"log_sigma"};
  if (model == "variance") return {"sigma_sq"};
  for (std::size_t j = 0; j < p; ++j) out.push_back("beta_" + std::to_string(j));
  for (std::size_t c = 0; c < q; ++c)
    for (std::size_t r = c; r < q; ++r) out.push_back("omega_" + std::to_string(r) + "_" + std::to_string(c));
  return out;
}

RunOutcome run_command(const std::string& command, const Json& config, const std::string& out_dir,
                       const RunOptions& options) {
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  allow_keys(config, "config",
             {"model", "family", "priors", "data", "simulate", "sampler", "gibbs", "demo", "description"});
  if (config.contains("data") && config.contains("simulate") && command != "simulate")
    throw ConfigError("give either a data or a simulate block, not both");
  if (options.max_seconds < 0.0 || !std::isfinite(options.max_seconds))
    throw ConfigError("max-seconds must be a non-negative number");
  using Fn = RunOutcome (*)(const Json&, const fs::path&, const RunOptions&);
  Fn fn = nullptr;
  if (command == "simulate") fn = cmd_simulate;
  else if (command == "fit") fn = cmd_fit;
  else if (command == "gibbs") fn = cmd_gibbs;
  else if (command == "oracle") fn = cmd_oracle;
  else if (command == "demo-divergence") fn = cmd_demo_divergence;
  else throw ConfigError("unknown command '" + command + "'");
  // Validate everything that does not need data before touching the filesystem.
  if (command == "fit") (void)parse_sampler(config);
  ensure_dir(out_dir);
  return fn(config, fs::path(out_dir), options);
}

}  // namespace smld
