#include "horolab/geodesic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include "horolab/error.hpp"

namespace horolab {

namespace {

std::atomic<std::uint64_t> next_trajectory_id{1};

// Geodesic + parallel-frame right-hand side. State layout: [x (n), v (n), E (n x m, col-major)].
struct GeodesicSystem {
  ManifoldSpec spec;
  int n;
  int m;
  bool* domain_hit;

  bool operator()(double, const Vec& y, Vec& dy) const {
    const ChartPoint x = y.head(n);
    if (!x.allFinite() || !spec.in_domain(x)) {
      *domain_hit = true;
      return false;
    }
    std::vector<double> gamma;
    try {
      gamma = christoffel_at(spec, x);
    } catch (const Error&) {
      *domain_hit = true;
      return false;
    }
    dy.resize(y.size());
    dy.head(n) = y.segment(n, n);
    for (int k = 0; k < n; ++k) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) acc += gamma[(k * n + i) * n + j] * y[n + i] * y[n + j];
      dy[n + k] = -acc;
    }
    for (int c = 0; c < m; ++c) {
      const int off = 2 * n + c * n;
      for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) acc += gamma[(k * n + i) * n + j] * y[n + i] * y[off + j];
        dy[off + k] = -acc;
      }
    }
    return true;
  }
};

// Local error measured in the metric at the new point: the largest g-norm among the
// position, velocity and frame-column error blocks, relative to `tol`.
ode::ErrorNorm metric_error_norm(const ManifoldSpec& spec, int n, int m, double tol) {
  return [spec, n, m, tol](const Vec&, const Vec& y1, const Vec& err) {
    Mat g;
    try {
      g = spec.metric(y1.head(n));
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
    double worst = std::max(norm(g, err.head(n)), norm(g, err.segment(n, n)));
    for (int c = 0; c < m; ++c) worst = std::max(worst, norm(g, err.segment(2 * n + c * n, n)));
    return worst / tol;
  };
}

}  // namespace

bool GeodesicTrajectory::covers(double t) const {
  const double slack = 1e-12 * std::max({1.0, std::abs(t_min_), std::abs(t_max_)});
  return t >= t_min_ - slack && t <= t_max_ + slack;
}

Vec GeodesicTrajectory::state(double t) const {
  if (!covers(t))
    throw Error(ErrorKind::Domain, "time " + std::to_string(t) + " outside trajectory span [" +
                                       std::to_string(t_min_) + ", " + std::to_string(t_max_) + "]",
                t);
  return t >= 0.0 ? forward_(t) : backward_(t);
}

ChartPoint GeodesicTrajectory::point(double t) const { return state(t).head(dimension()); }

Vec GeodesicTrajectory::velocity(double t) const {
  const int n = dimension();
  return state(t).segment(n, n);
}

Mat GeodesicTrajectory::frame(double t) const {
  const int n = dimension();
  const Vec s = state(t);
  return Eigen::Map<const Mat>(s.data() + 2 * n, n, n - 1);
}

TangentVector GeodesicTrajectory::flow(double t) const {
  const int n = dimension();
  const Vec s = state(t);
  return TangentVector{s.head(n), s.segment(n, n)};
}

std::vector<TrajectorySample> GeodesicTrajectory::samples() const {
  std::vector<double> times;
  for (double t : backward_.nodes())
    if (t < 0.0) times.push_back(t);
  for (double t : forward_.nodes()) times.push_back(t);
  std::sort(times.begin(), times.end());
  std::vector<TrajectorySample> out;
  out.reserve(times.size());
  const int n = dimension();
  for (double t : times) {
    const Vec s = state(t);
    out.push_back({t, s.head(n), s.segment(n, n), Eigen::Map<const Mat>(s.data() + 2 * n, n, n - 1)});
  }
  return out;
}

GeodesicTrajectory integrate_geodesic(const ManifoldSpec& spec, const TangentVector& v,
                                      double t_min, double t_max, double tol,
                                      const std::optional<Mat>& frame0) {
  const int n = spec.dimension();
  if (!(tol >= 1e-12 && tol <= 1e-4))
    throw Error(ErrorKind::InvalidParams, "geodesic tolerance must lie in [1e-12, 1e-4]", tol);
  if (!(t_min <= 0.0 && t_max >= 0.0))
    throw Error(ErrorKind::InvalidParams, "trajectory span must contain t = 0");
  const Mat g = spec.metric(v.base);
  const double speed2 = inner(g, v.components, v.components);
  if (std::abs(speed2 - 1.0) > 1e-10)
    throw Error(ErrorKind::InvalidParams, "initial vector is not unit (|g(v,v) - 1| = " +
                                              std::to_string(std::abs(speed2 - 1.0)) + ")");

  GeodesicTrajectory traj(spec);
  traj.initial_ = v;
  traj.frame0_ = frame0 ? *frame0 : orthonormal_frame(spec, v);
  if (traj.frame0_.rows() != n || traj.frame0_.cols() != n - 1)
    throw Error(ErrorKind::InvalidParams, "frame must be n x (n-1)");
  traj.id_ = next_trajectory_id.fetch_add(1);

  const int m = n - 1;
  Vec y0(2 * n + n * m);
  y0.head(n) = v.base;
  y0.segment(n, n) = v.components;
  y0.tail(n * m) = Eigen::Map<const Vec>(traj.frame0_.data(), n * m);

  bool domain_hit = false;
  const GeodesicSystem sys{spec, n, m, &domain_hit};
  ode::Options opt;
  opt.max_step = 1.0;
  const ode::ErrorNorm enorm = metric_error_norm(spec, n, m, tol);

  auto run = [&](double t_end, ode::DenseSolution& dest, double& reached) {
    domain_hit = false;
    ode::Result res = ode::integrate(sys, 0.0, y0, t_end, opt, enorm);
    dest = std::move(res.solution);
    reached = res.t_stop;
    if (res.stop == ode::Stop::Completed) return;
    if (domain_hit) {
      traj.truncated_ = true;
      return;
    }
    if (res.stop == ode::Stop::MaxSteps)
      throw Error(ErrorKind::NonConvergence,
                  "geodesic integration exceeded the step budget at t = " + std::to_string(res.t_stop),
                  res.t_stop);
    throw Error(ErrorKind::StepUnderflow,
                "geodesic step size underflow at t = " + std::to_string(res.t_stop), res.t_stop);
  };

  traj.forward_ = ode::DenseSolution(0.0, y0);
  traj.backward_ = ode::DenseSolution(0.0, y0);
  if (t_max > 0.0) run(t_max, traj.forward_, traj.t_max_);
  if (t_min < 0.0) run(t_min, traj.backward_, traj.t_min_);
  return traj;
}

Vec parallel_transport(const GeodesicTrajectory& traj, const Vec& w, double t_from, double t_to) {
  if (!traj.covers(t_from) || !traj.covers(t_to))
    throw Error(ErrorKind::Domain, "parallel transport times outside trajectory span");
  const ManifoldSpec& spec = traj.spec();
  const Mat g = spec.metric(traj.point(t_from));
  const Vec c0 = traj.velocity(t_from);
  const Mat e0 = traj.frame(t_from);
  const Vec c1 = traj.velocity(t_to);
  const Mat e1 = traj.frame(t_to);
  // {ċ, E} is a parallel orthonormal basis, so transport preserves its coefficients.
  Vec out = inner(g, w, c0) * c1;
  for (int i = 0; i < e0.cols(); ++i) out += inner(g, w, e0.col(i)) * e1.col(i);
  return out;
}

std::optional<ChartPoint> exp_map(const ManifoldSpec& spec, const ChartPoint& p, const Vec& w,
                                  double tol) {
  const int n = spec.dimension();
  bool domain_hit = false;
  const GeodesicSystem sys{spec, n, 0, &domain_hit};
  Vec y0(2 * n);
  y0.head(n) = p;
  y0.tail(n) = w;
  const double speed = norm(spec.metric(p), w);
  ode::Options opt;
  opt.max_step = speed > 1.0 ? 1.0 / speed : 1.0;
  const ode::ErrorNorm enorm = metric_error_norm(spec, n, 0, tol * std::max(1.0, speed));
  const ode::Result res = ode::integrate(sys, 0.0, y0, 1.0, opt, enorm);
  if (res.stop != ode::Stop::Completed) return std::nullopt;
  return ChartPoint(res.y_stop.head(n));
}

bool has_closed_form_distance(const ManifoldSpec& spec) {
  switch (spec.kind()) {
    case ModelKind::Euclidean:
    case ModelKind::Hyperbolic:
      return true;
    case ModelKind::Product:
      return has_closed_form_distance(spec.left()) && has_closed_form_distance(spec.right());
    default:
      return false;
  }
}

namespace {

double closed_form_distance(const ManifoldSpec& spec, const ChartPoint& p, const ChartPoint& q) {
  switch (spec.kind()) {
    case ModelKind::Euclidean:
      return (p - q).norm();
    case ModelKind::Hyperbolic: {
      const int n = spec.dimension();
      const double k = spec.param("k");
      const double chord = (p - q).norm();
      return (2.0 / k) * std::asinh(chord / (2.0 * std::sqrt(p[n - 1] * q[n - 1])));
    }
    case ModelKind::Product: {
      const int na = spec.left().dimension(), nb = spec.right().dimension();
      const double d1 = closed_form_distance(spec.left(), p.head(na), q.head(na));
      const double d2 = closed_form_distance(spec.right(), p.tail(nb), q.tail(nb));
      return std::hypot(d1, d2);
    }
    default:
      throw Error(ErrorKind::InvalidParams, "no closed-form distance for " + spec.tag());
  }
}

bool lexicographically_less(const ChartPoint& a, const ChartPoint& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

}  // namespace

double distance(const ManifoldSpec& spec, const ChartPoint& p, const ChartPoint& q) {
  if (!spec.in_domain(p) || !spec.in_domain(q))
    throw Error(ErrorKind::Domain, "distance: point outside the chart of " + spec.tag());
  // Evaluate with a canonical argument order so that d(p,q) == d(q,p) bit-for-bit.
  const bool swap = lexicographically_less(q, p);
  const ChartPoint& a = swap ? q : p;
  const ChartPoint& b = swap ? p : q;
  if (a == b) return 0.0;
  if (has_closed_form_distance(spec)) return closed_form_distance(spec, a, b);
  return geodesic_between(spec, a, b).length;
}

ShootingResult geodesic_between(const ManifoldSpec& spec, const ChartPoint& p,
                                const ChartPoint& q, double tol, int max_iterations) {
  const int n = spec.dimension();
  if (!spec.in_domain(p) || !spec.in_domain(q))
    throw Error(ErrorKind::Domain, "geodesic_between: point outside the chart of " + spec.tag());
  if ((p - q).norm() == 0.0)
    throw Error(ErrorKind::InvalidParams, "geodesic_between requires p != q");

  const double ode_tol = std::max(1e-13, 1e-3 * tol);
  auto residual = [&](const Vec& w) -> std::optional<Vec> {
    const auto end = exp_map(spec, p, w, ode_tol);
    if (!end) return std::nullopt;
    return Vec(*end - q);
  };

  Vec w = q - p;
  std::optional<Vec> f = residual(w);
  if (!f) throw Error(ErrorKind::NonConvergence, "initial chord geodesic leaves the chart");
  double best = f->norm();
  int it = 0;
  for (; it < max_iterations && best > tol; ++it) {
    Mat jac(n, n);
    const double scale = std::max(1.0, w.norm());
    for (int j = 0; j < n; ++j) {
      const double h = 1e-6 * scale;
      Vec wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      const auto fp = residual(wp);
      const auto fm = residual(wm);
      if (!fp || !fm) throw Error(ErrorKind::NonConvergence, "shooting stencil leaves the chart", best);
      jac.col(j) = (*fp - *fm) / (2.0 * h);
    }
    Eigen::JacobiSVD<Mat> svd(jac, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv[n - 1] <= 1e-12 * sv[0])
      throw Error(ErrorKind::Singular,
                  "shooting Jacobian nearly singular (possible conjugate point), residual " +
                      std::to_string(best),
                  best);
    const Vec step = svd.solve(-*f);
    double lambda = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
      const Vec trial = w + lambda * step;
      const auto ft = residual(trial);
      if (ft && ft->norm() < best) {
        w = trial;
        f = ft;
        best = ft->norm();
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  if (best > tol)
    throw Error(ErrorKind::NonConvergence,
                "shooting did not converge; best residual " + std::to_string(best), best);

  const double length = norm(spec.metric(p), w);
  return ShootingResult{TangentVector{p, w / length}, length, best, it};
}

}  // namespace horolab
