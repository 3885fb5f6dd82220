#pragma once

#include "smld/grad_oracle.hpp"
#include "smld/linalg.hpp"
#include "smld/mirror_maps.hpp"
#include "smld/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace smld {

/// Total noise covariance eps n^2 / (2 S) * psi + J.
Mat gamma_hat(const Mat& psi, const Mat& J, double eps, std::size_t S, std::size_t n);

struct LyapunovSolution {
  Mat x;
  double residual = 0.0;  ///< |X J^{-1} V + V J^{-1} X - 2 Gamma|_F / |Gamma|_F
};

/// Solves X J^{-1} V + V J^{-1} X = 2 Gamma for symmetric X by congruence with
/// J^{-1/2} and the eigenbasis of J^{-1/2} V J^{-1/2}.
LyapunovSolution lyapunov_solve(const Mat& J, const Mat& V, const Mat& Gamma);

/// Relative Frobenius residual of a candidate X (absolute when Gamma = 0).
double lyapunov_residual(const Mat& J, const Mat& V, const Mat& Gamma, const Mat& X);

/// Symmetric M^{1/2} and M^{-1/2}. SingularityError when M is not SPD.
Mat matrix_sqrt(const Mat& m);
Mat matrix_inv_sqrt(const Mat& m);

struct CorrectionInputs {
  Vec vartheta_hat;  ///< dual sample mean
  Mat V_hat;         ///< dual sample covariance
  Mat J_hat;         ///< metric at vartheta_hat
  Mat Gamma_hat;
  Mat psi_hat;  ///< may be empty when Gamma_hat is supplied directly
  double eps = 0.0;
  std::size_t S = 0;
  std::size_t n = 0;
  std::size_t R = 0;
};

struct CorrectionResult {
  Vec center;      ///< vartheta_hat
  Mat H_hat;       ///< curvature estimate
  Mat transform;   ///< J H^{-1/2} V^{-1/2}
  double residual = 0.0;
  Vec V_eigenvalues;
  Vec H_eigenvalues;
};

/// Relative Lyapunov residual above which a correction is rejected.
inline constexpr double kLyapunovTolerance = 1e-8;

/// Estimates (vartheta_hat, V_hat, J_hat, Psi_hat, Gamma_hat) from a
/// post-burn-in dual trace. Psi_hat is one full-scan pass at grad_phi_star(vartheta_hat).
CorrectionInputs correction_inputs(const MirrorMap& map, GradOracle& oracle, const Mat& dual_rows,
                                   double eps, std::size_t S, std::size_t R, Rng& rng);

/// Solves for H_hat and builds the affine map. Throws SingularityError when V_hat
/// is singular, the residual exceeds kLyapunovTolerance, or H_hat is not SPD.
CorrectionResult compute_correction(const CorrectionInputs& inputs);

struct CorrectedTrace {
  Mat dual;
  Mat primal;
  std::vector<std::uint64_t> iters;  ///< iterations of the kept rows
  std::size_t dropped = 0;           ///< rows whose image left the domain
  bool drop_warning = false;         ///< more than 1% dropped
};

/// vartheta -> center + transform (vartheta - center), then grad_phi_star.
CorrectedTrace rescale_trace(const Mat& dual_rows, const std::vector<std::uint64_t>& iters,
                             const CorrectionResult& result, const MirrorMap& map);

}  // namespace smld
