#pragma once

#include "smld/linalg.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace smld {

enum class SegmentKind { Euclidean, LogBarrierPositive, LogDetPD };

/// One block of a flat parameter vector.
struct Segment {
  SegmentKind kind;
  std::size_t offset;  ///< first flat coordinate
  std::size_t size;    ///< number of flat coordinates
  std::size_t order;   ///< q for LogDetPD (size == q(q+1)/2), otherwise == size
};

/// Barrier bundle (phi, grad phi, grad phi*, metric) over a product of
/// unconstrained, positive-scalar and positive-definite blocks.
///
/// Barriers per block:
///   Euclidean           phi(b) = |b|^2 / 2        grad: b -> b
///   LogBarrierPositive  phi(s) = -sum log s_j     grad: s -> -1/s
///   LogDetPD(q)         phi(W) = -log det W       grad: W -> -W^{-1}
///
/// Matrix blocks are stored as vech (lower triangle, column-major, unit weights)
/// and differentiated in the symmetric-gradient convention, so the dual block of
/// W is vech(-W^{-1}) and metric blocks are Gram matrices under the Frobenius
/// inner product (see `coordinate_weights`).
class MirrorMap {
 public:
  static MirrorMap euclidean(std::size_t dim);
  static MirrorMap log_barrier_positive(std::size_t dim = 1);
  static MirrorMap log_det_pd(std::size_t q);
  static MirrorMap product(const std::vector<MirrorMap>& parts);

  std::size_t dim() const { return dim_; }
  std::span<const Segment> segments() const { return segments_; }
  bool is_euclidean() const;
  std::string describe() const;

 private:
  void push(SegmentKind kind, std::size_t size, std::size_t order);

  std::vector<Segment> segments_;
  std::size_t dim_ = 0;
};

/// Barrier value phi(theta). Throws DomainError outside the domain.
double phi(const MirrorMap& map, const Vec& theta);

/// Mirror map theta -> vartheta. Throws DomainError outside the domain.
Vec grad_phi(const MirrorMap& map, const Vec& theta);

/// Inverse mirror map vartheta -> theta. Throws DomainError outside the dual domain.
Vec grad_phi_star(const MirrorMap& map, const Vec& vartheta);

/// sqrt(A(vartheta)) z for a standard normal vector z of length dim.
///
/// LogDetPD blocks read their z entries as a symmetric Gaussian W (diagonal
/// from z, off-diagonal z / sqrt(2)) and return vech(S^{1/2} W S^{1/2}) with
/// S = W_theta^{-1} = -unvech(vartheta). The covariance of the result equals
/// metric_matrix(vartheta).
Vec metric_noise(const MirrorMap& map, const Vec& vartheta, const Vec& z);

/// Dense metric A(vartheta) = Hess phi at grad_phi_star(vartheta), block diagonal.
Mat metric_matrix(const MirrorMap& map, const Vec& vartheta);

/// Frobenius weights per flat coordinate (1, or 2 on off-diagonal vech entries).
/// metric_matrix * diag(weights) * Jacobian(grad_phi_star) = I.
Vec coordinate_weights(const MirrorMap& map);

bool in_domain(const MirrorMap& map, const Vec& theta);
bool in_dual_domain(const MirrorMap& map, const Vec& vartheta);

}  // namespace smld
