#pragma once

#include <Eigen/Dense>

namespace crustplan {

/// Lawson-Hanson nonnegative least squares: minimize ||A x - b|| over x >= 0.
/// Returns false if the iteration budget is exhausted before convergence.
bool nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, Eigen::VectorXd& x,
          int max_iterations = 0, double tol = 1e-9);

}  // namespace crustplan
