#pragma once

#include <Eigen/Dense>

#include <vector>

namespace afd {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// An outcome y_(k) in block-digit form: (y0, y1) for the two-block model,
/// (y_1, ..., y_T) for binary sequences.
using Outcome = std::vector<int>;

inline Vector scalar_theta(double theta) { return Vector::Constant(1, theta); }

}  // namespace afd
