#include "horolab/datri.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "horolab/error.hpp"
#include "horolab/parallel.hpp"
#include "horolab/sampling.hpp"

namespace horolab {

namespace {

// A refined zero is accepted when |det A| falls to this level.
constexpr double kRootDet = 1e-8;

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

// det A_v(t) on [0, horizon] from one dense Jacobi solution, A(0) = 0, A'(0) = Id.
class DetProbe {
 public:
  DetProbe(const GeodesicTrajectory& traj, double horizon, double tol)
      : m_(traj.dimension() - 1),
        solution_(traj, Mat::Zero(m_, m_), Mat::Identity(m_, m_), horizon, tol) {}

  double operator()(double t) const { return solution_.state(t).J.determinant(); }

 private:
  int m_;
  JacobiSolution solution_;
};

void require_sl2_params(double a, double b) {
  if (!(b > 0.0)) throw Error(ErrorKind::InvalidParams, "sl2r: requires b > 0");
  if (!(a + b < 0.0)) throw Error(ErrorKind::InvalidParams, "sl2r: requires a + b < 0");
}

}  // namespace

double det_a(const ManifoldSpec& spec, const TangentVector& v, double t, double tol) {
  if (!(t > 0.0)) throw Error(ErrorKind::InvalidParams, "det_a: requires t > 0");
  const GeodesicTrajectory traj = integrate_geodesic(spec, v, 0.0, t, tol);
  if (!traj.covers(t))
    throw Error(ErrorKind::Domain, "det_a: geodesic leaves the chart at t = " + fmt(traj.t_max()),
                traj.t_max());
  return a_tensor(traj, t, tol).J.determinant();
}

ConjugateScanResult conjugate_scan(const ManifoldSpec& spec, const TangentVector& v, double T,
                                   double dt, double tol) {
  if (!(T > 0.0) || !(dt > 0.0) || dt > T / 10.0 * (1.0 + 1e-12))
    throw Error(ErrorKind::InvalidParams, "conjugate_scan: requires T > 0 and 0 < dt <= T/10");
  const GeodesicTrajectory traj = integrate_geodesic(spec, v, 0.0, T, tol);
  ConjugateScanResult res;
  res.v = v;
  const double horizon = std::min(T, traj.t_max());
  res.truncated = horizon < T;
  if (horizon < dt) return res;
  const DetProbe det(traj, horizon, tol);

  const int steps = static_cast<int>(std::floor(horizon / dt + 1e-9));
  for (int i = 1; i <= steps; ++i) {
    const double t = std::min(i * dt, horizon);
    res.t_grid.push_back(t);
    res.det_values.push_back(det(t));
  }

  const auto& d = res.det_values;
  const auto& g = res.t_grid;
  const std::size_t count = d.size();
  auto narrow = [](double lo, double hi) { return hi - lo <= 1e-12 * std::max(1.0, std::abs(lo)); };
  for (std::size_t i = 0; i < count; ++i) {
    if (d[i] == 0.0) {
      res.zero_crossings.push_back({g[i], g[i], g[i], 0.0, false});
      continue;
    }
    if (i + 1 < count && d[i + 1] != 0.0 && (d[i] < 0.0) != (d[i + 1] < 0.0)) {
      const auto [lo, hi] = boost::math::tools::bisect(det, g[i], g[i + 1], narrow);
      const double t = 0.5 * (lo + hi);
      res.zero_crossings.push_back({lo, hi, t, det(t), false});
      continue;
    }
    // Even-multiplicity zeros: interior local minima of |det| between same-sign neighbours.
    if (i == 0 || i + 1 >= count) continue;
    const bool same_sign = (d[i - 1] < 0.0) == (d[i] < 0.0) && (d[i] < 0.0) == (d[i + 1] < 0.0);
    if (!same_sign || std::abs(d[i]) > std::abs(d[i - 1]) || std::abs(d[i]) > std::abs(d[i + 1]))
      continue;
    auto abs_det = [&det](double t) { return std::abs(det(t)); };
    const auto [t, value] = boost::math::tools::brent_find_minima(abs_det, g[i - 1], g[i + 1], 40);
    if (value <= kRootDet) res.zero_crossings.push_back({g[i - 1], g[i + 1], t, det(t), true});
  }
  std::sort(res.zero_crossings.begin(), res.zero_crossings.end(),
            [](const ConjugateRoot& a, const ConjugateRoot& b) { return a.t < b.t; });
  if (!res.zero_crossings.empty()) res.first_conjugate_time = res.zero_crossings.front().t;
  return res;
}

std::vector<ConjugateScanResult> conjugate_scans(const ManifoldSpec& spec,
                                                 const std::vector<TangentVector>& vectors,
                                                 double T, double dt, int jobs) {
  return parallel_map(vectors.size(), jobs,
                      [&](std::size_t i) { return conjugate_scan(spec, vectors[i], T, dt); });
}

std::vector<TangentVector> direction_grid(const ManifoldSpec& spec, const ChartPoint& anchor,
                                          int count, std::uint64_t seed, int axis,
                                          double min_axis) {
  if (axis < 0 || axis >= spec.dimension())
    throw Error(ErrorKind::InvalidParams, "direction_grid: axis out of range");
  const Mat g = spec.metric(anchor);
  // Component along the unit axis vector e_axis / |e_axis|_g, measured with g.
  const Vec e = Vec::Unit(spec.dimension(), axis) / std::sqrt(g(axis, axis));
  return sample_unit_vectors_if(spec, anchor, count, seed, [&](const TangentVector& v) {
    return std::abs(inner(g, v.components, e)) >= min_axis;
  });
}

DAtriReport datri_check(const ManifoldSpec& spec, const std::vector<TangentVector>& vectors,
                        const std::vector<double>& t_grid, int jobs, double tol) {
  if (t_grid.empty()) throw Error(ErrorKind::InvalidParams, "datri_check: empty time grid");
  for (double t : t_grid)
    if (!(t > 0.0) || !std::isfinite(t))
      throw Error(ErrorKind::InvalidParams, "datri_check: times must be positive");
  const double t_max = *std::max_element(t_grid.begin(), t_grid.end());
  const double dt = std::min(0.05, t_max / 10.0);

  struct Row {
    std::vector<double> fwd, rev;
    std::string problem;  // non-empty: excluded
  };
  const std::vector<Row> rows = parallel_map(vectors.size(), jobs, [&](std::size_t i) {
    Row row;
    for (int side = 0; side < 2; ++side) {
      const TangentVector v = side == 0 ? vectors[i] : vectors[i].reversed();
      const ConjugateScanResult scan = conjugate_scan(spec, v, t_max, dt, tol);
      if (scan.truncated) {
        row.problem = "geodesic leaves the chart before t = " + fmt(t_max);
        return row;
      }
      if (scan.first_conjugate_time) {
        row.problem = "conjugate point at t = " + fmt(*scan.first_conjugate_time) +
                      (side == 0 ? " along v" : " along -v");
        return row;
      }
      const GeodesicTrajectory traj = integrate_geodesic(spec, v, 0.0, t_max, tol);
      const DetProbe det(traj, t_max, tol);
      auto& out = side == 0 ? row.fwd : row.rev;
      for (double t : t_grid) out.push_back(det(t));
    }
    return row;
  });

  DAtriReport rep;
  rep.t_grid = t_grid;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].problem.empty()) {
      rep.excluded.push_back(static_cast<int>(i));
      rep.warnings.push_back("vector " + std::to_string(i) + " excluded: " + rows[i].problem);
      continue;
    }
    rep.det_forward.push_back(rows[i].fwd);
    rep.det_reverse.push_back(rows[i].rev);
  }
  rep.samples = static_cast<int>(rep.det_forward.size());
  if (rep.samples == 0) return rep;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    double mean = 0.0;
    for (int i = 0; i < rep.samples; ++i) {
      mean += rep.det_forward[i][k];
      rep.max_asymmetry =
          std::max(rep.max_asymmetry, std::abs(rep.det_forward[i][k] - rep.det_reverse[i][k]));
    }
    mean /= rep.samples;
    rep.mean_det.push_back(mean);
    for (int i = 0; i < rep.samples; ++i)
      rep.harmonic_spread = std::max(rep.harmonic_spread, std::abs(rep.det_forward[i][k] - mean));
  }
  return rep;
}

double u_from_a_identity_check(const ManifoldSpec& spec, const TangentVector& v, double t,
                               double tol) {
  if (!(t > 0.0)) throw Error(ErrorKind::InvalidParams, "u_from_a_identity_check: requires t > 0");
  const Mat frame = orthonormal_frame(spec, v);
  const GeodesicTrajectory traj = integrate_geodesic(spec, v, -t, 0.0, tol, frame);
  const GeodesicTrajectory reverse = integrate_geodesic(spec, v.reversed(), 0.0, t, tol, frame);
  if (!traj.covers(-t) || !reverse.covers(t))
    throw Error(ErrorKind::Domain, "u_from_a_identity_check: geodesic leaves the chart", t);
  const Mat lhs = bvp_unstable_approx(reverse, t);

  TangentVector w = traj.flow(-t);
  w.components /= norm(spec.metric(w.base), w.components);
  const GeodesicTrajectory traj_w = integrate_geodesic(spec, w, 0.0, t, tol, traj.frame(-t));
  const JacobiTensorState a = a_tensor(traj_w, t, tol);
  const Mat rhs = a.J_prime * a.J.inverse();
  return operator_norm(lhs - rhs);
}

Sl2Pair sl2_analytic_jacobi(double a, double b, double t_coord, double s) {
  require_sl2_params(a, b);
  const double c = std::sqrt(2.0) * std::abs(a + b) * std::exp(-t_coord);
  const double rb = std::sqrt(b);
  Sl2Pair p;
  p.u1 = c * (std::cos(rb * s) - 1.0);
  p.u2 = std::sin(rb * s);
  p.u1_prime = -c * rb * std::sin(rb * s);
  p.u2_prime = rb * std::cos(rb * s);
  return p;
}

Sl2SystemCheck sl2_system_check(double a, double b, double t_coord, double s_max, int samples,
                                double tol) {
  require_sl2_params(a, b);
  if (!(s_max > 0.0) || samples < 2)
    throw Error(ErrorKind::InvalidParams, "sl2_system_check: requires s_max > 0, samples >= 2");
  const double ab = std::abs(a + b);
  const double c1 = std::sqrt(2.0 * b) * ab * std::exp(-t_coord);
  const double c2 = std::sqrt(2.0 * b) / ab * std::exp(t_coord);
  auto rhs = [&](double, const Vec& y, Vec& dy) {
    dy.resize(4);
    dy << y[2], y[3], -c1 * y[3], c2 * y[2] + b * y[1];
    return true;
  };
  const Sl2Pair p0 = sl2_analytic_jacobi(a, b, t_coord, 0.0);
  Vec y0(4);
  y0 << p0.u1, p0.u2, p0.u1_prime, p0.u2_prime;
  ode::Options opt;
  opt.rtol = tol;
  opt.atol = tol;
  opt.max_step = 0.05;
  const ode::Result r = ode::integrate(rhs, 0.0, y0, s_max, opt);
  if (r.stop != ode::Stop::Completed)
    throw Error(ErrorKind::NonConvergence, "sl2_system_check: integration failed", r.t_stop);

  Sl2SystemCheck out;
  for (int i = 0; i < samples; ++i) {
    const double s = s_max * i / (samples - 1);
    const Sl2Pair p = sl2_analytic_jacobi(a, b, t_coord, s);
    const Vec y = r.solution(s);
    out.s.push_back(s);
    out.u1.push_back(p.u1);
    out.u2.push_back(p.u2);
    out.u1_num.push_back(y[0]);
    out.u2_num.push_back(y[1]);
    out.sup_error = std::max({out.sup_error, std::abs(p.u1 - y[0]), std::abs(p.u2 - y[1])});
  }
  return out;
}

double sl2_geometric_conjugate_time(double b) {
  if (!(b > 0.0)) throw Error(ErrorKind::InvalidParams, "sl2r: requires b > 0");
  return M_PI * std::sqrt(2.0 / b);
}

}  // namespace horolab
