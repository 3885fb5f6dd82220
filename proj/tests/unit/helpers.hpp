#pragma once

#include "smld/linalg.hpp"
#include "smld/rng.hpp"

namespace test {

inline smld::Mat random_spd(Eigen::Index d, smld::Rng& rng, double ridge = 0.1) {
  smld::Mat b(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) b(i, j) = rng.normal();
  return b * b.transpose() + ridge * smld::Mat::Identity(d, d);
}

inline smld::Vec normals(Eigen::Index d, smld::Rng& rng) {
  smld::Vec z(d);
  for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal();
  return z;
}

inline double rel_err(const smld::Mat& a, const smld::Mat& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

}  // namespace test
