#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "horolab/types.hpp"

namespace horolab {

enum class DerivativeMode { Analytic, FiniteDifference };

enum class ModelKind { Euclidean, Hyperbolic, Product, Sl2r, Heisenberg, Custom };

const char* to_string(ModelKind kind);

// Upper bounds ||R|| <= r0 and ||∇R|| <= r0_prime. Flat models carry r0 = 0.
struct CurvatureBounds {
  double r0 = 0.0;
  double r0_prime = 0.0;
};

// Metric together with its first and second chart derivatives at one point.
struct MetricJet {
  Mat g;
  std::vector<Mat> dg;                // dg[k] = ∂_k g
  std::vector<std::vector<Mat>> d2g;  // d2g[k][l] = ∂_k ∂_l g
};

using MetricFunction = std::function<Mat(const ChartPoint&)>;
using JetFunction = std::function<MetricJet(const ChartPoint&)>;
using DomainPredicate = std::function<bool(const ChartPoint&)>;

// A Riemannian metric on a single global chart. Immutable and cheap to copy;
// copies share the underlying model.
class ManifoldSpec {
 public:
  int dimension() const;
  ModelKind kind() const;
  // Human-readable identifier, e.g. "hyperbolic(n=3,k=1)".
  std::string tag() const;

  DerivativeMode derivative_mode() const;
  double fd_step() const;
  double fd_step_second() const;
  bool has_analytic_derivatives() const;
  const std::optional<CurvatureBounds>& curvature_bounds() const;

  // Model parameter by name (k, n, a, b, ...); throws when absent.
  double param(const std::string& name) const;

  bool in_domain(const ChartPoint& p) const;
  // Symmetric positive-definite metric matrix; throws Domain outside the chart.
  Mat metric(const ChartPoint& p) const;
  // Metric jet using the configured derivative mode.
  MetricJet jet(const ChartPoint& p) const;
  MetricJet jet(const ChartPoint& p, DerivativeMode mode) const;

  // Same metric, different derivative mode (propagates into product factors).
  ManifoldSpec with_derivative_mode(DerivativeMode mode, double step = 1e-5,
                                    double second_step = 1e-4) const;

  bool is_product() const;
  const ManifoldSpec& left() const;
  const ManifoldSpec& right() const;

  struct Data;
  explicit ManifoldSpec(std::shared_ptr<const Data> data);

 private:
  std::shared_ptr<const Data> d_;
};

ManifoldSpec make_euclidean(int n);
// Upper half-space model with metric |dx|^2 / (k y)^2, sectional curvature -k^2.
// The last coordinate is the height y > 0.
ManifoldSpec make_hyperbolic(int n, double k);
ManifoldSpec make_product(const ManifoldSpec& left, const ManifoldSpec& right);
// Left-invariant metric on the universal cover of SL(2,R) in coordinates (t, x, y):
//   |a+b|^{-1} dt^2 + |a+b| e^{-2t} dx^2 + (dy + sqrt(2b) e^{-t} dx)^2.
ManifoldSpec make_sl2r(double a, double b);
// Heisenberg group in coordinates (x, y, z): b^{-1} dx^2 + dz^2 + (dy - x dz)^2.
ManifoldSpec make_heisenberg(double b);
// User-supplied metric; derivatives always by finite differences.
ManifoldSpec make_custom(int n, MetricFunction metric, DomainPredicate domain = {},
                         std::optional<CurvatureBounds> bounds = std::nullopt);
// Euclidean metric multiplied by 1 + amplitude * exp(-|p - c|^2 / width^2), with
// the bump centre c drawn from `seed` in [-1, 1]^n.
ManifoldSpec make_bump_metric(int n, double amplitude, double width, std::uint64_t seed);

// Declarative model description, as it arrives from an experiment config.
struct ModelDescriptor {
  std::string tag;  // euclidean | hyperbolic | product | sl2r | heisenberg | bump
  std::map<std::string, double> params;
  std::vector<ModelDescriptor> factors;  // product only
};

ManifoldSpec make_model(const ModelDescriptor& descriptor);

// Christoffel symbols and Riemann tensor in chart coordinates at one point.
// Index conventions: christoffel(k,i,j) = Γ^k_{ij}; riemann(l,i,j,k) = R^l_{ijk} with
// R(∂_i,∂_j)∂_k = R^l_{ijk} ∂_l and R(X,Y)Z = ∇_X∇_Y Z - ∇_Y∇_X Z - ∇_{[X,Y]} Z.
class CurvatureData {
 public:
  CurvatureData(int n, ChartPoint at, Mat metric);

  int dimension() const { return n_; }
  const ChartPoint& at() const { return at_; }
  const Mat& metric() const { return g_; }

  double christoffel(int k, int i, int j) const { return gamma_[(k * n_ + i) * n_ + j]; }
  double& christoffel(int k, int i, int j) { return gamma_[(k * n_ + i) * n_ + j]; }
  double riemann(int l, int i, int j, int k) const {
    return riemann_[((l * n_ + i) * n_ + j) * n_ + k];
  }
  double& riemann(int l, int i, int j, int k) {
    return riemann_[((l * n_ + i) * n_ + j) * n_ + k];
  }

  // R(x, y) z in chart components.
  Vec apply(const Vec& x, const Vec& y, const Vec& z) const;

 private:
  int n_;
  ChartPoint at_;
  Mat g_;
  std::vector<double> gamma_;
  std::vector<double> riemann_;
};

// Christoffel symbols only (first derivatives of the metric); used by the geodesic
// right-hand side. Layout as in CurvatureData::christoffel.
std::vector<double> christoffel_at(const ManifoldSpec& spec, const ChartPoint& p);

CurvatureData curvature_at(const ManifoldSpec& spec, const ChartPoint& p);
CurvatureData curvature_at(const ManifoldSpec& spec, const ChartPoint& p, DerivativeMode mode);

// Matrix <R(e_i, v) v, e_j> for the columns e_i of `frame` (an orthonormal basis of v^⊥).
// The result is symmetrized; `raw_asymmetry` receives the discarded antisymmetric part.
Mat jacobi_operator(const ManifoldSpec& spec, const TangentVector& v, const Mat& frame,
                    double* raw_asymmetry = nullptr);
Mat jacobi_operator(const CurvatureData& curvature, const Vec& v, const Mat& frame,
                    double* raw_asymmetry = nullptr);

double sectional_curvature(const ManifoldSpec& spec, const ChartPoint& p, const Vec& u,
                           const Vec& w);

inline double inner(const Mat& g, const Vec& a, const Vec& b) { return a.dot(g * b); }
inline double norm(const Mat& g, const Vec& a) { return std::sqrt(inner(g, a, a)); }

// Rescale chart components to unit length at `p`.
TangentVector unit_vector(const ManifoldSpec& spec, const ChartPoint& p, const Vec& components);

// Orthonormal basis (columns) of v^⊥ at v.base. The construction depends on v only
// through the line it spans, so v and -v receive the same frame.
Mat orthonormal_frame(const ManifoldSpec& spec, const TangentVector& v);

}  // namespace horolab
