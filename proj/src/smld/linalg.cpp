#include "smld/linalg.hpp"

#include "smld/errors.hpp"

#include <cmath>
#include <string>

namespace smld {

Vec vech(const Mat& m) {
  const auto q = static_cast<std::size_t>(m.rows());
  if (m.cols() != m.rows()) throw ShapeError("vech: matrix is not square");
  Vec v(vech_size(q));
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = j; i < m.rows(); ++i) v(k++) = m(i, j);
  return v;
}

Mat unvech(const Eigen::Ref<const Vec>& v, std::size_t q) {
  if (static_cast<std::size_t>(v.size()) != vech_size(q))
    throw ShapeError("unvech: length " + std::to_string(v.size()) + " does not match q=" +
                     std::to_string(q));
  const auto n = static_cast<Eigen::Index>(q);
  Mat m(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) {
      m(i, j) = v(k);
      m(j, i) = v(k);
      ++k;
    }
  return m;
}

Vec vech_weights(std::size_t q) {
  Mat w = Mat::Constant(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q), 2.0);
  w.diagonal().setOnes();
  return vech(w);
}

std::size_t vech_order(std::size_t len) {
  std::size_t q = 0;
  while (vech_size(q) < len) ++q;
  if (vech_size(q) != len) throw ShapeError("length " + std::to_string(len) + " is not a vech size");
  return q;
}

Mat sym_sqrt(const Mat& m) {
  return sym_apply(m, [](double l) { return l > 0.0 ? std::sqrt(l) : 0.0; });
}

bool is_pd(const Mat& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if (!m.allFinite()) return false;
  if (m.rows() == 1) return m(0, 0) > 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  const double tr = m.trace();
  return tr > 0.0 && es.eigenvalues()(0) > 1e-12 * tr;
}

Mat sample_covariance(const Mat& rows) {
  const Eigen::Index k = rows.rows();
  if (k < 2) throw DegenerateError("sample covariance needs at least two rows");
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const Mat centered = rows.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(k - 1);
}

}  // namespace smld
