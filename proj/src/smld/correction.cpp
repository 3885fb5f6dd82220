#include "smld/correction.hpp"

#include "smld/errors.hpp"
#include "smld/glmm.hpp"

#include <cmath>
#include <string>

namespace smld {

namespace {

void require_square(const Mat& m, Eigen::Index d, const char* what) {
  if (m.rows() != d || m.cols() != d)
    throw ShapeError(std::string(what) + " must be " + std::to_string(d) + " x " + std::to_string(d));
}

Eigen::SelfAdjointEigenSolver<Mat> spd_eigen(const Mat& m, const char* what) {
  if (m.rows() != m.cols()) throw ShapeError(std::string(what) + " must be square");
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
  if (es.info() != Eigen::Success || m.size() == 0) throw SingularityError(std::string(what) + ": eigensolver failed");
  const Vec& l = es.eigenvalues();
  if (!l.allFinite() || !(l(0) > 0.0) || l(0) <= 1e-12 * l(l.size() - 1))
    throw SingularityError(std::string(what) + " is not positive definite");
  return es;
}

}  // namespace

Mat gamma_hat(const Mat& psi, const Mat& J, double eps, std::size_t S, std::size_t n) {
  require_square(J, J.rows(), "J");
  require_square(psi, J.rows(), "psi");
  if (S == 0) throw ShapeError("gamma_hat: S must be positive");
  const double nn = static_cast<double>(n);
  return symmetrize(eps * nn * nn / (2.0 * static_cast<double>(S)) * psi + J);
}

Mat matrix_sqrt(const Mat& m) {
  const auto es = spd_eigen(m, "matrix_sqrt argument");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

Mat matrix_inv_sqrt(const Mat& m) {
  const auto es = spd_eigen(m, "matrix_inv_sqrt argument");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

double lyapunov_residual(const Mat& J, const Mat& V, const Mat& Gamma, const Mat& X) {
  const Eigen::LLT<Mat> llt(J);
  const Mat jv = llt.solve(V);  // J^{-1} V
  const Mat lhs = X * jv + jv.transpose() * X;
  const double err = (lhs - 2.0 * Gamma).norm();
  const double scale = Gamma.norm();
  return scale > 0.0 ? err / scale : err;
}

LyapunovSolution lyapunov_solve(const Mat& J, const Mat& V, const Mat& Gamma) {
  const auto d = J.rows();
  require_square(J, d, "J");
  require_square(V, d, "V");
  require_square(Gamma, d, "Gamma");
  const auto j_es = spd_eigen(J, "J");
  const Mat& u = j_es.eigenvectors();
  const Vec jl = j_es.eigenvalues().cwiseSqrt();
  const Mat j_half = u * jl.asDiagonal() * u.transpose();
  const Mat j_inv_half = u * jl.cwiseInverse().asDiagonal() * u.transpose();

  const Mat v_tilde = symmetrize(j_inv_half * V * j_inv_half);
  const Mat g_tilde = symmetrize(j_inv_half * Gamma * j_inv_half);
  Eigen::SelfAdjointEigenSolver<Mat> es(v_tilde);
  if (es.info() != Eigen::Success) throw SingularityError("lyapunov_solve: eigensolver failed");
  const Vec& lambda = es.eigenvalues();
  const Mat& q = es.eigenvectors();
  const double floor = 1e-12 * lambda.cwiseAbs().maxCoeff();
  Mat y = q.transpose() * g_tilde * q;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index k = 0; k < d; ++k) {
      const double s = lambda(i) + lambda(k);
      if (!(s >= floor) || s <= 0.0) throw SingularityError("lyapunov_solve: V is singular relative to J");
      y(i, k) = 2.0 * y(i, k) / s;
    }
  LyapunovSolution out;
  out.x = symmetrize(j_half * (q * y * q.transpose()) * j_half);
  out.residual = lyapunov_residual(J, V, Gamma, out.x);
  return out;
}

CorrectionInputs correction_inputs(const MirrorMap& map, GradOracle& oracle, const Mat& dual_rows,
                                   double eps, std::size_t S, std::size_t R, Rng& rng) {
  if (static_cast<std::size_t>(dual_rows.cols()) != map.dim())
    throw ShapeError("correction_inputs: trace width does not match the mirror map");
  if (dual_rows.rows() < 2) throw DegenerateError("correction_inputs: need at least two samples");
  CorrectionInputs in;
  in.vartheta_hat = dual_rows.colwise().mean().transpose();
  in.V_hat = sample_covariance(dual_rows);
  in.J_hat = metric_matrix(map, in.vartheta_hat);
  const Vec theta_hat = grad_phi_star(map, in.vartheta_hat);
  in.psi_hat = full_psi_hat(oracle, theta_hat, rng);
  in.eps = eps;
  in.S = S;
  in.n = oracle.n_terms();
  in.R = R;
  in.Gamma_hat = gamma_hat(in.psi_hat, in.J_hat, eps, S, in.n);
  return in;
}

CorrectionResult compute_correction(const CorrectionInputs& in) {
  const auto d = in.vartheta_hat.size();
  require_square(in.V_hat, d, "V_hat");
  require_square(in.J_hat, d, "J_hat");
  require_square(in.Gamma_hat, d, "Gamma_hat");
  CorrectionResult r;
  r.center = in.vartheta_hat;
  const auto sol = lyapunov_solve(in.J_hat, in.V_hat, in.Gamma_hat);
  r.residual = sol.residual;
  if (!(sol.residual <= kLyapunovTolerance))
    throw SingularityError("Lyapunov residual " + std::to_string(sol.residual) + " exceeds tolerance");
  r.H_hat = sol.x;
  r.V_eigenvalues = Eigen::SelfAdjointEigenSolver<Mat>(in.V_hat, Eigen::EigenvaluesOnly).eigenvalues();
  r.H_eigenvalues = Eigen::SelfAdjointEigenSolver<Mat>(r.H_hat, Eigen::EigenvaluesOnly).eigenvalues();
  r.transform = in.J_hat * matrix_inv_sqrt(r.H_hat) * matrix_inv_sqrt(in.V_hat);
  return r;
}

CorrectedTrace rescale_trace(const Mat& dual_rows, const std::vector<std::uint64_t>& iters,
                             const CorrectionResult& result, const MirrorMap& map) {
  const auto d = static_cast<Eigen::Index>(map.dim());
  if (dual_rows.cols() != d || result.center.size() != d)
    throw ShapeError("rescale_trace: dimension mismatch");
  if (!iters.empty() && iters.size() != static_cast<std::size_t>(dual_rows.rows()))
    throw ShapeError("rescale_trace: iteration labels do not match rows");
  const Mat shifted = dual_rows.rowwise() - result.center.transpose();
  const Mat mapped = (shifted * result.transform.transpose()).rowwise() + result.center.transpose();

  CorrectedTrace out;
  out.dual.resize(mapped.rows(), d);
  out.primal.resize(mapped.rows(), d);
  Eigen::Index kept = 0;
  for (Eigen::Index k = 0; k < mapped.rows(); ++k) {
    const Vec row = mapped.row(k).transpose();
    if (!in_dual_domain(map, row)) {
      ++out.dropped;
      continue;
    }
    out.dual.row(kept) = row.transpose();
    out.primal.row(kept) = grad_phi_star(map, row).transpose();
    out.iters.push_back(iters.empty() ? static_cast<std::uint64_t>(k) : iters[static_cast<std::size_t>(k)]);
    ++kept;
  }
  out.dual.conservativeResize(kept, d);
  out.primal.conservativeResize(kept, d);
  out.drop_warning = mapped.rows() > 0 && static_cast<double>(out.dropped) > 0.01 * static_cast<double>(mapped.rows());
  return out;
}

}  // namespace smld
