#pragma once

#include <vector>

#include "horolab/types.hpp"

namespace horolab {

// Limit of a sequence s_k = s(x_0 2^k) as x -> infinity, where s(x) = L + c1/x + c2/x^2 +
// ... (plus terms decaying faster than any power). Feed iterates in order with add(); the
// extrapolator keeps a Romberg table in 1/x, level j removing the c_j/x^j term, and
// reports convergence when
//   - successive level-1 extrapolants 2 s_{k+1} - s_k differ by <= tol, or
//   - those differences shrink geometrically (ratio q < 1/2) and the tail estimate
//     d q / (1 - q) of the remaining error is <= tol, or
//   - successive extrapolants of some level 2..max_level differ by <= tol.
// Norms are operator norms (absolute values for 1x1 matrices).
class DoublingExtrapolator {
 public:
  explicit DoublingExtrapolator(double tol, int max_level = 2);

  // Returns true once converged; later calls are ignored.
  bool add(const Mat& iterate);

  bool converged() const { return converged_; }
  // Accepted limit (valid once converged); otherwise the best current estimate.
  const Mat& value() const { return value_; }
  // Error estimate of value().
  double residual() const { return residual_; }
  std::size_t size() const { return table_.empty() ? 0 : table_[0].size(); }
  // Newest entry of the deepest level filled so far; a fixed stencil of the raw iterates.
  const Mat& deepest() const;

 private:
  double tol_;
  int max_level_;
  bool converged_ = false;
  Mat value_;
  double residual_ = 0.0;
  double prev_d1_ = 0.0;
  std::vector<std::vector<Mat>> table_;  // table_[j] = level-j extrapolants
};

}  // namespace horolab
