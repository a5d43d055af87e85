#pragma once

#include <Eigen/Dense>

namespace nlssvm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// Highest derivative order supported by the kernel and feature map.
inline constexpr int kMaxDerivOrder = 4;

}  // namespace nlssvm
