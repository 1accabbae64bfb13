#pragma once

#include <Eigen/Dense>

namespace horolab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Chart coordinates of a point.
using ChartPoint = Vec;

// A tangent vector given by its chart components at `base`.
struct TangentVector {
  ChartPoint base;
  Vec components;

  TangentVector reversed() const { return {base, -components}; }
};

inline Mat symmetric_part(const Mat& m) { return 0.5 * (m + m.transpose()); }

// Largest absolute entry of the antisymmetric part.
inline double asymmetry(const Mat& m) {
  return m.size() == 0 ? 0.0 : (0.5 * (m - m.transpose())).cwiseAbs().maxCoeff();
}

}  // namespace horolab
