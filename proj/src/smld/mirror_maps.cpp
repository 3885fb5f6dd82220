#include "smld/mirror_maps.hpp"

#include "smld/errors.hpp"

#include <cmath>
#include <sstream>

namespace smld {

namespace {

void check_dim(const MirrorMap& map, const Vec& v, const char* what) {
  if (static_cast<std::size_t>(v.size()) != map.dim()) {
    std::ostringstream os;
    os << what << ": expected length " << map.dim() << ", got " << v.size();
    throw ShapeError(os.str());
  }
}

auto block(const Vec& v, const Segment& s) {
  return v.segment(static_cast<Eigen::Index>(s.offset), static_cast<Eigen::Index>(s.size));
}

auto block(Vec& v, const Segment& s) {
  return v.segment(static_cast<Eigen::Index>(s.offset), static_cast<Eigen::Index>(s.size));
}

Mat checked_pd(const Vec& v, const Segment& s, const char* what) {
  Mat m = unvech(block(v, s), s.order);
  if (!is_pd(m)) throw DomainError(std::string(what) + ": matrix block is not positive definite");
  return m;
}

// Covariance block of the dual matrix -W^{-1}: S = -unvech(vartheta).
Mat dual_covariance(const Vec& vartheta, const Segment& s) {
  Mat sigma = -unvech(block(vartheta, s), s.order);
  if (!is_pd(sigma))
    throw DomainError("dual matrix block is not negative definite");
  return sigma;
}

void check_positive(const Vec& v, const Segment& s, const char* what) {
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(s.size); ++j) {
    const double x = v(static_cast<Eigen::Index>(s.offset) + j);
    if (!(x > 0.0)) throw DomainError(std::string(what) + ": non-positive scalar");
  }
}

}  // namespace

void MirrorMap::push(SegmentKind kind, std::size_t size, std::size_t order) {
  segments_.push_back(Segment{kind, dim_, size, order});
  dim_ += size;
}

MirrorMap MirrorMap::euclidean(std::size_t dim) {
  MirrorMap m;
  m.push(SegmentKind::Euclidean, dim, dim);
  return m;
}

MirrorMap MirrorMap::log_barrier_positive(std::size_t dim) {
  MirrorMap m;
  m.push(SegmentKind::LogBarrierPositive, dim, dim);
  return m;
}

MirrorMap MirrorMap::log_det_pd(std::size_t q) {
  if (q == 0) throw ShapeError("log_det_pd: q must be positive");
  MirrorMap m;
  m.push(SegmentKind::LogDetPD, vech_size(q), q);
  return m;
}

MirrorMap MirrorMap::product(const std::vector<MirrorMap>& parts) {
  MirrorMap m;
  for (const auto& p : parts)
    for (const auto& s : p.segments_) m.push(s.kind, s.size, s.order);
  return m;
}

bool MirrorMap::is_euclidean() const {
  for (const auto& s : segments_)
    if (s.kind != SegmentKind::Euclidean) return false;
  return true;
}

std::string MirrorMap::describe() const {
  std::ostringstream os;
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    const auto& s = segments_[k];
    if (k) os << " x ";
    switch (s.kind) {
      case SegmentKind::Euclidean: os << "Euclidean(" << s.size << ")"; break;
      case SegmentKind::LogBarrierPositive: os << "LogBarrierPositive(" << s.size << ")"; break;
      case SegmentKind::LogDetPD: os << "LogDetPD(" << s.order << ")"; break;
    }
  }
  return os.str();
}

double phi(const MirrorMap& map, const Vec& theta) {
  check_dim(map, theta, "phi");
  double value = 0.0;
  for (const auto& s : map.segments()) {
    switch (s.kind) {
      case SegmentKind::Euclidean: value += 0.5 * block(theta, s).squaredNorm(); break;
      case SegmentKind::LogBarrierPositive:
        check_positive(theta, s, "phi");
        value -= block(theta, s).array().log().sum();
        break;
      case SegmentKind::LogDetPD: {
        const Mat w = checked_pd(theta, s, "phi");
        value -= std::log(w.llt().matrixL().determinant()) * 2.0;
        break;
      }
    }
  }
  return value;
}

Vec grad_phi(const MirrorMap& map, const Vec& theta) {
  check_dim(map, theta, "grad_phi");
  Vec out(theta.size());
  for (const auto& s : map.segments()) {
    switch (s.kind) {
      case SegmentKind::Euclidean: block(out, s) = block(theta, s); break;
      case SegmentKind::LogBarrierPositive:
        check_positive(theta, s, "grad_phi");
        block(out, s) = -block(theta, s).cwiseInverse();
        break;
      case SegmentKind::LogDetPD: {
        const Mat w = checked_pd(theta, s, "grad_phi");
        block(out, s) = -vech(symmetrize(w.llt().solve(Mat::Identity(w.rows(), w.cols()))));
        break;
      }
    }
  }
  return out;
}

Vec grad_phi_star(const MirrorMap& map, const Vec& vartheta) {
  check_dim(map, vartheta, "grad_phi_star");
  Vec out(vartheta.size());
  for (const auto& s : map.segments()) {
    switch (s.kind) {
      case SegmentKind::Euclidean: block(out, s) = block(vartheta, s); break;
      case SegmentKind::LogBarrierPositive: {
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(s.size); ++j) {
          const double v = vartheta(static_cast<Eigen::Index>(s.offset) + j);
          if (!(v < 0.0)) throw DomainError("grad_phi_star: dual scalar must be negative");
        }
        block(out, s) = -block(vartheta, s).cwiseInverse();
        break;
      }
      case SegmentKind::LogDetPD: {
        const Mat sigma = dual_covariance(vartheta, s);
        block(out, s) = vech(symmetrize(sigma.llt().solve(Mat::Identity(sigma.rows(), sigma.cols()))));
        break;
      }
    }
  }
  return out;
}

Vec metric_noise(const MirrorMap& map, const Vec& vartheta, const Vec& z) {
  check_dim(map, vartheta, "metric_noise");
  check_dim(map, z, "metric_noise");
  Vec out(z.size());
  for (const auto& s : map.segments()) {
    switch (s.kind) {
      case SegmentKind::Euclidean: block(out, s) = block(z, s); break;
      case SegmentKind::LogBarrierPositive: {
        // sqrt(phi'') = 1/s = |vartheta|
        if ((block(vartheta, s).array() >= 0.0).any())
          throw DomainError("metric_noise: dual scalar must be negative");
        block(out, s) = block(vartheta, s).cwiseAbs().cwiseProduct(block(z, s));
        break;
      }
      case SegmentKind::LogDetPD: {
        const Mat root = sym_sqrt(dual_covariance(vartheta, s));
        Mat w = unvech(block(z, s), s.order);
        w.triangularView<Eigen::StrictlyLower>() *= M_SQRT1_2;
        w.triangularView<Eigen::StrictlyUpper>() *= M_SQRT1_2;
        block(out, s) = vech(root * w * root);
        break;
      }
    }
  }
  return out;
}

Mat metric_matrix(const MirrorMap& map, const Vec& vartheta) {
  check_dim(map, vartheta, "metric_matrix");
  const auto d = static_cast<Eigen::Index>(map.dim());
  Mat a = Mat::Zero(d, d);
  for (const auto& s : map.segments()) {
    const auto off = static_cast<Eigen::Index>(s.offset);
    const auto len = static_cast<Eigen::Index>(s.size);
    switch (s.kind) {
      case SegmentKind::Euclidean: a.block(off, off, len, len).setIdentity(); break;
      case SegmentKind::LogBarrierPositive: {
        if ((block(vartheta, s).array() >= 0.0).any())
          throw DomainError("metric_matrix: dual scalar must be negative");
        a.block(off, off, len, len) = block(vartheta, s).array().square().matrix().asDiagonal();
        break;
      }
      case SegmentKind::LogDetPD: {
        // Gram form of H -> S H S:  A[(i,k),(a,b)] = (S_ia S_kb + S_ib S_ka) / 2
        const Mat sg = dual_covariance(vartheta, s);
        const auto q = static_cast<Eigen::Index>(s.order);
        Eigen::Index r = 0;
        for (Eigen::Index k = 0; k < q; ++k)
          for (Eigen::Index i = k; i < q; ++i, ++r) {
            Eigen::Index c = 0;
            for (Eigen::Index b = 0; b < q; ++b)
              for (Eigen::Index aa = b; aa < q; ++aa, ++c)
                a(off + r, off + c) = 0.5 * (sg(i, aa) * sg(k, b) + sg(i, b) * sg(k, aa));
          }
        break;
      }
    }
  }
  return a;
}

Vec coordinate_weights(const MirrorMap& map) {
  Vec w = Vec::Ones(static_cast<Eigen::Index>(map.dim()));
  for (const auto& s : map.segments())
    if (s.kind == SegmentKind::LogDetPD) block(w, s) = vech_weights(s.order);
  return w;
}

bool in_domain(const MirrorMap& map, const Vec& theta) {
  if (static_cast<std::size_t>(theta.size()) != map.dim() || !theta.allFinite()) return false;
  for (const auto& s : map.segments()) {
    if (s.kind == SegmentKind::LogBarrierPositive && (block(theta, s).array() <= 0.0).any()) return false;
    if (s.kind == SegmentKind::LogDetPD && !is_pd(unvech(block(theta, s), s.order))) return false;
  }
  return true;
}

bool in_dual_domain(const MirrorMap& map, const Vec& vartheta) {
  if (static_cast<std::size_t>(vartheta.size()) != map.dim() || !vartheta.allFinite()) return false;
  for (const auto& s : map.segments()) {
    if (s.kind == SegmentKind::LogBarrierPositive && (block(vartheta, s).array() >= 0.0).any())
      return false;
    if (s.kind == SegmentKind::LogDetPD && !is_pd(-unvech(block(vartheta, s), s.order))) return false;
  }
  return true;
}

}  // namespace smld
