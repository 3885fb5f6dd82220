#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace smld {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Length of vech(M) for a q x q symmetric matrix.
constexpr std::size_t vech_size(std::size_t q) { return q * (q + 1) / 2; }

/// Half-vectorization: lower triangle, column-major, unit weights.
Vec vech(const Mat& m);

/// Inverse of vech for a q x q symmetric matrix.
Mat unvech(const Eigen::Ref<const Vec>& v, std::size_t q);

/// Frobenius weights of vech coordinates: <A, B>_F = vech(A)' diag(w) vech(B),
/// i.e. 1 on diagonal entries and 2 on off-diagonal entries.
Vec vech_weights(std::size_t q);

/// Side of `q` given a vech length, or throws ShapeError.
std::size_t vech_order(std::size_t len);

/// Applies `fn` to the eigenvalues of symmetric `m`: V diag(fn(l)) V'.
template <typename Fn>
Mat sym_apply(const Mat& m, Fn fn) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  Vec l = es.eigenvalues();
  for (Eigen::Index i = 0; i < l.size(); ++i) l(i) = fn(l(i));
  return es.eigenvectors() * l.asDiagonal() * es.eigenvectors().transpose();
}

/// Symmetric square root. Negative eigenvalues (round-off) are clamped to 0.
Mat sym_sqrt(const Mat& m);

/// True when m is symmetric positive definite in the library's sense:
/// smallest eigenvalue > 1e-12 * trace.
bool is_pd(const Mat& m);

/// (m + m') / 2
inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

/// Unbiased (n - 1 denominator) sample covariance of the rows of `rows`.
Mat sample_covariance(const Mat& rows);

}  // namespace smld
