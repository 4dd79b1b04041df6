#pragma once

#include <Eigen/Dense>
#include <vector>

namespace hebr {

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Mat = MatX<double>;
using Vec = VecX<double>;

/// Time-major sequence of row blocks: seq[t] is (batch x dim).
using MatSeq = std::vector<Mat>;

}  // namespace hebr
