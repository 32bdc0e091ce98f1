#include "crustplan/nnls.hpp"

#include <vector>

namespace crustplan {

namespace {

// Unconstrained least squares restricted to the passive column set.
Eigen::VectorXd solve_passive(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                              const std::vector<int>& passive) {
  Eigen::MatrixXd ap(a.rows(), passive.size());
  for (size_t i = 0; i < passive.size(); ++i) ap.col(i) = a.col(passive[i]);
  return ap.colPivHouseholderQr().solve(b);
}

}  // namespace

bool nnls(const Eigen::MatrixXd& a_in, const Eigen::VectorXd& b, Eigen::VectorXd& x,
          int max_iterations, double tol) {
  const int n = static_cast<int>(a_in.cols());
  if (max_iterations <= 0) max_iterations = 3 * n + 30;
  x = Eigen::VectorXd::Zero(n);
  if (n == 0) return true;

  // Column normalization so the dual test treats all variables on one scale.
  Eigen::MatrixXd a = a_in;
  Eigen::VectorXd col_scale(n);
  for (int j = 0; j < n; ++j) {
    double s = a.col(j).norm();
    col_scale[j] = s > 0 ? s : 1.0;
    a.col(j) /= col_scale[j];
  }

  std::vector<bool> in_passive(n, false);
  std::vector<int> passive;
  Eigen::VectorXd w(n);

  double bnorm = std::max(1.0, b.norm());
  bool converged = false;
  for (int outer = 0; outer < max_iterations; ++outer) {
    Eigen::VectorXd resid = b - a * x;
    w = a.transpose() * resid;
    // pick the most negative-gradient zero variable
    int best = -1;
    double best_w = tol * bnorm;
    for (int j = 0; j < n; ++j) {
      if (!in_passive[j] && w[j] > best_w) {
        best_w = w[j];
        best = j;
      }
    }
    if (best < 0) {
      converged = true;
      break;  // KKT satisfied
    }
    in_passive[best] = true;
    passive.push_back(best);

    for (int inner = 0; inner < max_iterations; ++inner) {
      Eigen::VectorXd z = solve_passive(a, b, passive);
      bool all_positive = true;
      for (size_t i = 0; i < passive.size(); ++i) {
        if (z[i] <= 0) all_positive = false;
      }
      if (all_positive) {
        for (size_t i = 0; i < passive.size(); ++i) x[passive[i]] = z[i];
        break;
      }
      // step toward z until the first passive variable hits zero
      double alpha = 1.0;
      for (size_t i = 0; i < passive.size(); ++i) {
        if (z[i] <= 0) {
          double xi = x[passive[i]];
          if (xi - z[i] > 0) alpha = std::min(alpha, xi / (xi - z[i]));
        }
      }
      for (size_t i = 0; i < passive.size(); ++i) {
        x[passive[i]] += alpha * (z[i] - x[passive[i]]);
      }
      // drop variables that reached zero
      std::vector<int> kept;
      for (int j : passive) {
        if (x[j] > tol) {
          kept.push_back(j);
        } else {
          x[j] = 0;
          in_passive[j] = false;
        }
      }
      passive = std::move(kept);
      if (passive.empty()) break;
    }
  }
  x.array() /= col_scale.array();
  return converged;
}

}  // namespace crustplan
