#include "horolab/extrapolation.hpp"

#include <algorithm>
#include <limits>

#include "horolab/error.hpp"

namespace horolab {

namespace {

double op_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  if (m.size() == 1) return std::abs(m(0, 0));
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()[0];
}

}  // namespace

DoublingExtrapolator::DoublingExtrapolator(double tol, int max_level)
    : tol_(tol), max_level_(max_level), table_(1) {
  if (!(tol > 0.0) || max_level < 1)
    throw Error(ErrorKind::InvalidParams, "extrapolator requires tol > 0 and max_level >= 1");
}

const Mat& DoublingExtrapolator::deepest() const {
  for (auto it = table_.rbegin(); it != table_.rend(); ++it)
    if (!it->empty()) return it->back();
  throw Error(ErrorKind::InvalidParams, "extrapolator is empty");
}

bool DoublingExtrapolator::add(const Mat& s) {
  if (converged_) return true;
  table_[0].push_back(s);
  value_ = s;
  residual_ = std::numeric_limits<double>::infinity();

  // Extend every level by one entry: L_j = (2^j L_{j-1,new} - L_{j-1,old}) / (2^j - 1).
  for (int j = 1; j <= max_level_; ++j) {
    if (table_[j - 1].size() < 2) break;
    if (static_cast<int>(table_.size()) <= j) table_.emplace_back();
    const std::vector<Mat>& below = table_[j - 1];
    const double w = static_cast<double>(1 << j);
    table_[j].push_back((w * below[below.size() - 1] - below[below.size() - 2]) / (w - 1.0));
  }
  if (table_.size() < 2 || table_[1].empty()) return false;
  value_ = table_[1].back();

  const std::vector<Mat>& l1 = table_[1];
  if (l1.size() < 2) return false;
  const double d1 = op_norm(l1[l1.size() - 1] - l1[l1.size() - 2]);
  // Differences of successive extrapolants lag one doubling behind the error of the
  // newest one; when they shrink geometrically with ratio q, the remaining error of the
  // newest extrapolant is estimated by the tail sum d q / (1 - q).
  double tail = d1;
  if (l1.size() >= 3 && prev_d1_ > 0.0) {
    const double q = d1 / prev_d1_;
    if (q < 0.5) tail = d1 * q / (1.0 - q);
  }
  prev_d1_ = d1;
  residual_ = std::min(d1, tail);
  if (residual_ <= tol_) return converged_ = true;

  for (std::size_t j = 2; j < table_.size(); ++j) {
    const std::vector<Mat>& lj = table_[j];
    if (lj.size() < 2) break;
    const double dj = op_norm(lj[lj.size() - 1] - lj[lj.size() - 2]);
    if (dj < residual_) {
      residual_ = dj;
      value_ = lj.back();
    }
    if (dj <= tol_) return converged_ = true;
  }
  return false;
}

}  // namespace horolab
