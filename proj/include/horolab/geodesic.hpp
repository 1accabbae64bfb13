#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "horolab/manifold.hpp"
#include "horolab/ode.hpp"

namespace horolab {

// One accepted node of a trajectory.
struct TrajectorySample {
  double t;
  ChartPoint point;
  Vec velocity;
  Mat frame;  // n x (n-1), columns parallel along the curve
};

// Unit-speed geodesic c_v on [t_min, t_max] (t_min <= 0 <= t_max) together with a
// parallel orthonormal frame of ċ^⊥. Evaluation between nodes uses the integrator's
// dense output.
class GeodesicTrajectory {
 public:
  const ManifoldSpec& spec() const { return spec_; }
  const TangentVector& initial() const { return initial_; }
  const Mat& initial_frame() const { return frame0_; }
  int dimension() const { return spec_.dimension(); }

  double t_min() const { return t_min_; }
  double t_max() const { return t_max_; }
  bool covers(double t) const;
  // True when the requested span could not be reached because the curve left the chart.
  bool truncated() const { return truncated_; }
  // Unique per integration; used to match Jacobi states to their trajectory.
  std::uint64_t id() const { return id_; }

  ChartPoint point(double t) const;
  Vec velocity(double t) const;
  Mat frame(double t) const;
  // φ^t(v) as a tangent vector.
  TangentVector flow(double t) const;
  std::vector<TrajectorySample> samples() const;

 private:
  friend GeodesicTrajectory integrate_geodesic(const ManifoldSpec&, const TangentVector&, double,
                                               double, double, const std::optional<Mat>&);
  explicit GeodesicTrajectory(ManifoldSpec spec) : spec_(std::move(spec)) {}
  Vec state(double t) const;

  ManifoldSpec spec_;
  TangentVector initial_;
  Mat frame0_;
  ode::DenseSolution forward_, backward_;
  double t_min_ = 0.0, t_max_ = 0.0;
  bool truncated_ = false;
  std::uint64_t id_ = 0;
};

// Integrates the geodesic equation jointly with parallel transport of a frame of v^⊥
// (default: orthonormal_frame(spec, v)). `tol` bounds the local error per step in the
// metric norm and must lie in [1e-12, 1e-4].
GeodesicTrajectory integrate_geodesic(const ManifoldSpec& spec, const TangentVector& v,
                                      double t_min, double t_max, double tol = 1e-11,
                                      const std::optional<Mat>& frame0 = std::nullopt);

// Parallel transport of w (a tangent vector at traj(t_from)) to traj(t_to).
Vec parallel_transport(const GeodesicTrajectory& traj, const Vec& w, double t_from, double t_to);

// Geodesic c_w(t) with arbitrary initial velocity, endpoint at t = 1. Returns nullopt
// when the curve leaves the chart.
std::optional<ChartPoint> exp_map(const ManifoldSpec& spec, const ChartPoint& p, const Vec& w,
                                  double tol = 1e-12);

// True when `spec` has a closed-form distance (Euclidean, hyperbolic, products thereof).
bool has_closed_form_distance(const ManifoldSpec& spec);

double distance(const ManifoldSpec& spec, const ChartPoint& p, const ChartPoint& q);

struct ShootingResult {
  TangentVector initial;  // unit initial velocity at p
  double length = 0.0;    // d(p, q) along the found geodesic
  double residual = 0.0;  // chart norm |c_v(length) - q|
  int iterations = 0;
};

// Connecting geodesic by damped Newton on the shooting residual x(1; w) - q, starting
// from the chart chord w = q - p.
ShootingResult geodesic_between(const ManifoldSpec& spec, const ChartPoint& p,
                                const ChartPoint& q, double tol = 1e-10, int max_iterations = 50);

}  // namespace horolab
