#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

namespace pisim::cost {

struct NnlsResult {
  Eigen::VectorXd x;
  double residual_norm = 0;
};

// Non-negative least squares for the handful of rate columns the cost fits use. Every support
// subset of size <= rows is solved exactly and the best feasible one kept, so small systems
// get the true optimum and underdetermined ones a sparse solution. Columns are rescaled to unit
// max-norm first; the rates span ten orders of magnitude.
inline NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const auto n = a.cols();
  const auto m = a.rows();
  Eigen::VectorXd scale(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double mx = a.col(j).cwiseAbs().maxCoeff();
    scale(j) = mx > 0 ? mx : 1.0;
  }
  const Eigen::MatrixXd as = a * scale.cwiseInverse().asDiagonal();

  NnlsResult best;
  best.x = Eigen::VectorXd::Zero(n);
  best.residual_norm = b.norm();
  int best_size = 0;
  const double eps = 1e-12 * (b.norm() + 1);

  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j)
      if (mask & (1u << j)) cols.push_back(j);
    const auto k = static_cast<Eigen::Index>(cols.size());
    if (k > m) continue;
    Eigen::MatrixXd sub(m, k);
    bool degenerate = false;
    for (Eigen::Index c = 0; c < k; ++c) {
      sub.col(c) = as.col(cols[static_cast<std::size_t>(c)]);
      if (sub.col(c).isZero(0)) degenerate = true;
    }
    if (degenerate) continue;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
    if (qr.rank() < k) continue;
    const Eigen::VectorXd z = qr.solve(b);
    if ((z.array() < 0).any()) continue;
    const double r = (sub * z - b).norm();
    if (r < best.residual_norm - eps || (std::abs(r - best.residual_norm) <= eps && k < best_size)) {
      best.residual_norm = r;
      best_size = static_cast<int>(k);
      best.x.setZero();
      for (Eigen::Index c = 0; c < k; ++c) best.x(cols[static_cast<std::size_t>(c)]) = z(c) / scale(cols[static_cast<std::size_t>(c)]);
    }
  }
  return best;
}

}  // namespace pisim::cost
