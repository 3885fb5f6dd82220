#pragma once

#include "smld/grad_oracle.hpp"
#include "smld/linalg.hpp"
#include "smld/mirror_maps.hpp"
#include "smld/rng.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace smld {

/// Minibatch drift estimate: (n/S) sum_{i in batch} grad f_i + grad f_0.
struct GradEstimate {
  Vec grad;
  std::vector<std::size_t> group_ids;
  /// Psi_i hat for each entry of group_ids; empty when the oracle is exact.
  std::vector<Mat> per_group_cov;
};

/// Draws S indices from [n] with replacement (or scans all n terms when
/// `full_scan`) and returns the unbiased drift estimate. Repeated indices get
/// independent evaluations. Per-slot rng streams are derived from one draw of
/// `rng`, so the result does not depend on the worker count.
GradEstimate minibatch_gradient(GradOracle& oracle, const Vec& theta, std::size_t batch,
                                bool full_scan, Rng& rng);

/// theta - eps f'(theta) + sqrt(2 eps) Z with the full gradient.
Vec ula_step(GradOracle& oracle, const Vec& theta, double eps, Rng& rng);

/// Minibatch Langevin step; the prior term enters unscaled.
Vec sgld_step(GradOracle& oracle, const Vec& theta, double eps, std::size_t batch, Rng& rng,
              bool full_scan = false);

/// Full-batch mirror Langevin step in dual coordinates.
Vec mla_step(const MirrorMap& map, GradOracle& oracle, const Vec& vartheta, double eps, Rng& rng);

struct SmldStep {
  Vec next;
  GradEstimate estimate;
};

/// Stochastic mirror Langevin step:
///   vartheta - eps {(n/S) sum V_i + V_0} + sqrt(2 eps A(vartheta)) Z.
/// With an exact oracle this is the plain minibatch scheme; with a Monte Carlo
/// oracle each V_i is the inner-sample estimate.
SmldStep smld_step(const MirrorMap& map, GradOracle& oracle, const Vec& vartheta, double eps,
                   std::size_t batch, Rng& rng, bool full_scan = false);

enum class ChainStatus { Completed, Diverged };

std::string to_string(ChainStatus s);

struct ChainConfig {
  std::uint64_t n_iters = 0;
  std::uint64_t seed = 0;
  /// Sup-norm bound on the state before the run is declared diverged.
  double divergence_threshold = 1e8;
  /// Keep every `thin`-th iterate.
  std::uint64_t thin = 1;
  /// Wall-clock cap in seconds; <= 0 disables it.
  double max_seconds = 0.0;
  bool store = true;
};

struct Trace {
  Mat rows;                          ///< stored states, one per row
  std::vector<std::uint64_t> iters;  ///< iteration index (1-based) of each row
  ChainStatus status = ChainStatus::Completed;
  std::uint64_t diverged_at = 0;  ///< iteration at which divergence was detected
  std::uint64_t steps_run = 0;
  bool time_truncated = false;
  double wall_seconds = 0.0;
  Vec last;  ///< last valid state

  std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(rows.cols()); }

  /// Rows mapped through grad_phi_star.
  Mat primal(const MirrorMap& map) const;

  /// Rows after dropping the leading `fraction` of stored samples.
  Mat post_burnin(double fraction) const;
};

/// One transition of the chain; may throw DomainError, which ends the run as diverged.
using Kernel = std::function<Vec(const Vec& state, Rng& rng)>;
using StateCheck = std::function<bool(const Vec& state)>;

/// Runs `config.n_iters` transitions from `init`. Step k uses
/// Rng::stream(seed, k), so the trace is a pure function of (kernel, init, config).
/// Stops with status Diverged when a state is non-finite, exceeds the threshold,
/// fails `valid`, or the kernel throws DomainError; stored rows end before that state.
Trace run_chain(const Kernel& kernel, const Vec& init, const ChainConfig& config,
                const StateCheck& valid = {});

/// CSV with header `iter,coord_0,...,coord_{d-1}`; values use the shortest round-trip form.
void write_trace_csv(std::ostream& os, const Mat& rows, const std::vector<std::uint64_t>& iters);
void write_trace_csv(const std::string& path, const Mat& rows,
                     const std::vector<std::uint64_t>& iters);

struct TraceTable {
  Mat rows;
  std::vector<std::uint64_t> iters;
};
TraceTable read_trace_csv(const std::string& path);

}  // namespace smld
