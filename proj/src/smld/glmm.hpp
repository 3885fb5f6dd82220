#pragma once

#include "smld/grad_oracle.hpp"
#include "smld/linalg.hpp"
#include "smld/mirror_maps.hpp"
#include "smld/rng.hpp"

#include <atomic>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace smld {

enum class FamilyKind { GaussianLinear, BinomialLogit, BernoulliProbit, Poisson };

/// Exponential-family response p(y | eta) = exp{y h(eta) - b(eta) + c(y)} with a = 1.
struct Family {
  FamilyKind kind = FamilyKind::GaussianLinear;
  int trials = 1;  ///< M, BinomialLogit only

  static Family gaussian() { return {FamilyKind::GaussianLinear, 1}; }
  static Family binomial_logit(int trials = 1);
  static Family bernoulli_probit() { return {FamilyKind::BernoulliProbit, 1}; }
  static Family poisson() { return {FamilyKind::Poisson, 1}; }

  /// Accepts "gaussian", "binomial_logit", "bernoulli_logit", "bernoulli_probit", "poisson".
  static Family parse(const std::string& name, int trials = 1);
  std::string name() const;

  double cumulant(double eta) const;        ///< b
  double cumulant_deriv(double eta) const;  ///< b'
  double natural(double eta) const;         ///< h
  double natural_deriv(double eta) const;   ///< h'
  /// E[y | eta] in closed form.
  double mean(double eta) const;
  /// y h(eta) - b(eta); c(y) is omitted.
  double log_lik(double y, double eta) const;
  /// d/d eta of log_lik: y h'(eta) - b'(eta).
  double score(double y, double eta) const;
  bool valid_response(double y) const;
  bool is_logit() const { return kind == FamilyKind::BinomialLogit; }
};

struct Group {
  Vec y;  ///< n_i responses
  Mat x;  ///< n_i x p fixed-effect design
  Mat z;  ///< n_i x q random-effect design
};

struct GroupedData {
  std::vector<Group> groups;
  std::vector<long long> ids;  ///< external group id of each group
  std::size_t p = 0;
  std::size_t q = 0;

  std::size_t n() const { return groups.size(); }
  std::size_t n_obs() const;
  /// Throws ConfigError on empty groups, shape mismatch or out-of-range responses.
  void validate(const Family& family) const;
};

/// Columns `group_id,y,x_0..x_{p-1},z_0..z_{q-1}`. Rows of one group need not be adjacent;
/// groups are ordered by first appearance.
GroupedData read_grouped_csv(const std::string& path);
void write_grouped_csv(std::ostream& os, const GroupedData& data);
void write_grouped_csv(const std::string& path, const GroupedData& data);

/// beta ~ Normal(0, beta_var I_p), Omega ~ Wishart(omega_df, omega_scale).
struct Priors {
  double beta_var = 100.0;
  double omega_df = 2.0;
  Mat omega_scale;

  void validate(std::size_t q) const;
};

struct GlmmParams {
  Vec beta;
  Mat omega;
};

/// theta = (beta, vech Omega).
class GlmmModel {
 public:
  GlmmModel(Family family, GroupedData data, Priors priors);

  const Family& family() const { return family_; }
  const GroupedData& data() const { return data_; }
  const Priors& priors() const { return priors_; }
  std::size_t p() const { return data_.p; }
  std::size_t q() const { return data_.q; }
  std::size_t dim() const { return data_.p + vech_size(data_.q); }

  /// Euclidean(p) x LogDetPD(q).
  MirrorMap mirror_map() const;

  GlmmParams unpack(const Vec& theta) const;
  Vec pack(const Vec& beta, const Mat& omega) const;

  /// Gradient of f_0 = -log prior density.
  Vec prior_grad(const Vec& theta) const;

 private:
  Family family_;
  GroupedData data_;
  Priors priors_;
  Mat scale_inv_;
};

/// Gradient of log p(y_i, gamma | theta) w.r.t. (beta, vech Omega):
/// beta block sum_j score(y_ij, eta_ij) x_ij, Omega block vech(Omega^{-1}/2 - gamma gamma'/2).
Vec joint_log_grad(const Family& family, const Group& group, const Vec& gamma, const Vec& theta);

/// Inner-chain state carried between outer iterations (warm start).
struct InnerState {
  Vec gamma;
  double log_step = 0.0;  ///< random-walk MH scale, probit/Poisson only
  bool started = false;
};

struct InnerConfig {
  std::size_t burn_in = 50;  ///< sweeps discarded before the R retained draws
};

struct InnerDraws {
  Mat gamma;  ///< R x q
  /// MH acceptance rate over retained draws; 1 for exact or Gibbs samplers.
  double acceptance = 1.0;
  bool warning = false;  ///< acceptance left [0.1, 0.7]
};

/// Draws from p(gamma_i | y_i, theta): exact Gaussian for GaussianLinear,
/// Polya-Gamma Gibbs for logit families, adaptive random-walk MH otherwise.
InnerDraws sample_random_effects(const GlmmModel& model, std::size_t i, const Vec& theta,
                                 std::size_t draws, Rng& rng, InnerState& state,
                                 const InnerConfig& config = {});

/// Fisher-identity estimate -mean_r grad log p(y_i, gamma_r | theta) and its
/// covariance estimate 1/(R(R-1)) sum_r (g_r - mean)^{(x)2} (zero when R = 1).
TermGradient stochastic_grad(const GlmmModel& model, std::size_t i, const Vec& theta,
                             std::size_t draws, Rng& rng, InnerState& state,
                             const InnerConfig& config = {}, bool* warning = nullptr);

/// Same, from an explicit set of random-effect draws (R x q).
TermGradient stochastic_grad_from_draws(const GlmmModel& model, std::size_t i, const Vec& theta,
                                        const Mat& gamma);

/// Minibatch oracle over GLMM groups with warm-started inner chains.
class GlmmOracle final : public GradOracle {
 public:
  GlmmOracle(const GlmmModel& model, std::size_t inner_samples, InnerConfig config = {});

  std::size_t n_terms() const override { return model_.data().n(); }
  std::size_t dim() const override { return model_.dim(); }
  bool exact() const override { return false; }
  TermGradient grad_term(std::size_t i, const Vec& theta, Rng& rng) override;
  Vec grad_prior(const Vec& theta) const override { return model_.prior_grad(theta); }

  std::size_t inner_samples() const { return inner_samples_; }
  void set_inner_samples(std::size_t r);
  std::size_t warnings() const { return warnings_.load(); }
  const GlmmModel& model() const { return model_; }

 private:
  const GlmmModel& model_;
  std::size_t inner_samples_;
  InnerConfig config_;
  std::vector<InnerState> states_;
  std::atomic<std::size_t> warnings_{0};
};

/// Full-scan estimate of the total stochastic-gradient covariance
///   (1/n) sum_i [ (g_i - g/n)^{(x)2} + Psi_i / n ],  g = sum_i g_i.
/// Exact oracles contribute Psi_i = 0.
Mat full_psi_hat(GradOracle& oracle, const Vec& theta, Rng& rng);

/// Synthetic grouped data: intercept + standard-normal columns for X and Z,
/// gamma_i ~ Normal(0, sigma_true), responses drawn from `family`. The drawn
/// random effects are written to `gamma_out` (n x q) when given.
GroupedData simulate_glmm(const Family& family, std::size_t n, std::size_t n_per_group,
                          const Vec& beta_true, const Mat& sigma_true, std::uint64_t seed,
                          Mat* gamma_out = nullptr);

}  // namespace smld
