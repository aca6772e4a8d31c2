#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>

#include "biohand/error.hpp"

namespace biohand {

using Vec = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat = Eigen::MatrixXd;
// Parameter matrices are read row-wise (one row per DOF).
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;

inline void require_size(const Vec& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    throw InvalidArgument(std::string(what) + ": expected length " + std::to_string(n) +
                          ", got " + std::to_string(v.size()));
  }
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace biohand
