#pragma once

#include "smld/linalg.hpp"
#include "smld/rng.hpp"

#include <cstddef>

namespace smld {

/// Gradient of one data term f_i, possibly a Monte Carlo estimate.
struct TermGradient {
  Vec grad;
  /// Covariance estimate of `grad` (Psi_i hat). Empty for exact gradients.
  Mat cov;
};

/// Potential f(theta) = f_0(theta) + sum_{i<n} f_i(theta) over primal coordinates.
///
/// Implementations whose `grad_term` keeps per-term state (warm-started inner
/// chains) must tolerate concurrent calls for distinct `i`.
class GradOracle {
 public:
  virtual ~GradOracle() = default;

  virtual std::size_t n_terms() const = 0;
  virtual std::size_t dim() const = 0;

  /// True when grad_term is the exact gradient and ignores `rng`.
  virtual bool exact() const { return true; }

  virtual TermGradient grad_term(std::size_t i, const Vec& theta, Rng& rng) = 0;
  virtual Vec grad_prior(const Vec& theta) const = 0;

  /// Sum of all term gradients plus the prior gradient.
  Vec full_grad(const Vec& theta, Rng& rng) {
    Vec sum = Vec::Zero(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < n_terms(); ++i) sum += grad_term(i, theta, rng).grad;
    return grad_prior(theta) + sum;
  }
};

}  // namespace smld
