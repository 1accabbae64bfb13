#include "horolab/horospherical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "horolab/error.hpp"
#include "horolab/extrapolation.hpp"
#include "horolab/parallel.hpp"
#include "horolab/sampling.hpp"

namespace horolab {

namespace {

constexpr double kNormSlack = 1e-6;
constexpr double kDetSlack = 1e-6;
constexpr double kEqualitySlack = 1e-5;
constexpr double kNonnegSlack = 1e-7;
// Romberg depth for Busemann sequences, whose 1/T expansion is analytic.
constexpr int kBusemannLevels = 6;

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

// Keeps the `limit` worst witnesses, largest deviation first; ties keep the earlier index.
void keep_worst(std::vector<Witness>& w, std::size_t limit = 5) {
  std::stable_sort(w.begin(), w.end(),
                   [](const Witness& a, const Witness& b) { return a.deviation > b.deviation; });
  if (w.size() > limit) w.resize(limit);
}

Eigen::SelfAdjointEigenSolver<Mat> eigen_of(const Mat& symmetric) {
  return Eigen::SelfAdjointEigenSolver<Mat>(symmetric, Eigen::EigenvaluesOnly);
}

double rigidity_residual(const GeodesicTrajectory& traj, double h, int m) {
  const double kappa = (h / m) * (h / m);
  double worst = 0.0;
  for (double t : {0.0, 1.0, 2.0, 4.0}) {
    if (!traj.covers(t)) continue;
    const Mat R = jacobi_operator_along(traj, t);
    worst = std::max(worst, operator_norm(R + kappa * Mat::Identity(m, m)));
  }
  return worst;
}

bool is_hyperbolic(const ManifoldSpec& spec) { return spec.kind() == ModelKind::Hyperbolic; }

// Footpoint split of a product chart point into its factors.
std::pair<ChartPoint, ChartPoint> split(const ManifoldSpec& spec, const Vec& x) {
  const int nl = spec.left().dimension();
  return {x.head(nl), x.tail(spec.dimension() - nl)};
}

}  // namespace

int rank_from_D(const Mat& D, double eps_rank) {
  if (D.size() == 0) return 1;
  const Vec ev = eigen_of(symmetric_part(D)).eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  int kernel = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] < eps_rank * scale) ++kernel;
  return 1 + kernel;
}

HorosphericalProfile profile(const ManifoldSpec& spec, const TangentVector& v,
                             const ProfileOptions& options, const std::optional<Mat>& frame) {
  const int n = spec.dimension();
  const int m = n - 1;
  if (m < 1) throw Error(ErrorKind::InvalidParams, "profile: dimension must be at least 2");
  const double span = options.limit.r_max;
  const GeodesicTrajectory traj =
      integrate_geodesic(spec, v, -span, span, options.geodesic_tol, frame);

  const StableTensorResult s = stable_tensor(traj, options.limit);
  const StableTensorResult u = unstable_tensor(traj, options.limit);

  HorosphericalProfile p;
  p.v = v;
  p.frame = traj.initial_frame();
  p.S = s.S;
  p.U = u.S;
  p.D = symmetric_part(p.U - p.S);
  p.h = p.U.trace();
  p.r_used = std::max(s.r_used, u.r_used);
  p.limit_residual = std::max(s.residual, u.residual);
  p.asymmetry = std::max(s.asymmetry, u.asymmetry);

  if (options.independent_reverse) {
    // U(-v) along a separate trajectory of -v carrying the same frame.
    const GeodesicTrajectory rev =
        integrate_geodesic(spec, v.reversed(), -span, 0.0, options.geodesic_tol, p.frame);
    const StableTensorResult ur = unstable_tensor(rev, options.limit);
    p.h_reverse = ur.S.trace();
    p.limit_residual = std::max(p.limit_residual, ur.residual);
    p.asymmetry = std::max(p.asymmetry, ur.asymmetry);
  } else {
    p.h_reverse = -p.S.trace();
  }

  const Vec ev = eigen_of(p.D).eigenvalues();
  p.det_D = ev.prod();
  p.trace_D = ev.sum();
  p.norm_D = ev.cwiseAbs().maxCoeff();
  p.min_eig_D = ev.minCoeff();
  p.rank = rank_from_D(p.D, options.eps_rank);

  BoundChecks& c = p.checks;
  if (const auto& bounds = spec.curvature_bounds()) {
    // D inherits the error of both limits.
    const double slack = kNormSlack + 2.0 * p.limit_residual;
    c.norm_D_le_2sqrtR0 = p.norm_D <= 2.0 * std::sqrt(bounds->r0) + slack;
  }
  const double det_bound = std::pow(2.0 * p.h / m, m);
  c.det_trace_inequality = p.det_D <= det_bound + kDetSlack;
  c.det_trace_equality = std::abs(p.det_D - det_bound) <= kEqualitySlack;
  c.h_plus_h_reverse_eq_trace_D = std::abs(p.h + p.h_reverse - p.trace_D);
  c.D_nonnegative = p.min_eig_D >= -kNonnegSlack;
  if (c.det_trace_equality) c.rigidity_residual = rigidity_residual(traj, p.h, m);
  return p;
}

std::vector<HorosphericalProfile> profiles(const ManifoldSpec& spec,
                                           const std::vector<TangentVector>& vectors,
                                           const ProfileOptions& options, int jobs) {
  return parallel_map(vectors.size(), jobs,
                      [&](std::size_t i) { return profile(spec, vectors[i], options); });
}

int rank_of(const ManifoldSpec& spec, const TangentVector& v, double eps_rank) {
  ProfileOptions opt;
  opt.eps_rank = eps_rank;
  opt.independent_reverse = false;
  return profile(spec, v, opt).rank;
}

ScanReport flow_invariance_scan(const ManifoldSpec& spec, const TangentVector& v,
                                const std::vector<double>& times, const ProfileOptions& options,
                                int jobs) {
  for (double t : times)
    if (!(t >= 0.0) || !std::isfinite(t))
      throw Error(ErrorKind::InvalidParams, "flow_invariance_scan: times must be finite and >= 0");
  const double t_max = times.empty() ? 0.0 : *std::max_element(times.begin(), times.end());
  const GeodesicTrajectory traj = integrate_geodesic(spec, v, 0.0, t_max, options.geodesic_tol);

  ScanReport rep;
  rep.kind = "flow_invariance";
  for (double t : times) {
    if (traj.covers(t))
      rep.times.push_back(t);
    else
      rep.truncated = true;
  }
  ProfileOptions opt = options;
  opt.independent_reverse = false;
  const HorosphericalProfile base = profile(spec, v, opt, traj.initial_frame());
  rep.profiles = parallel_map(rep.times.size(), jobs, [&](std::size_t i) {
    const double t = rep.times[i];
    TangentVector w = traj.flow(t);
    w.components /= norm(spec.metric(w.base), w.components);
    return profile(spec, w, opt, traj.frame(t));
  });

  rep.samples = static_cast<int>(rep.times.size());
  for (std::size_t i = 0; i < rep.profiles.size(); ++i) {
    const HorosphericalProfile& p = rep.profiles[i];
    const double dev = std::abs(p.h - base.h);
    rep.h_values.push_back(p.h);
    rep.ranks.push_back(p.rank);
    rep.max_deviation = std::max(rep.max_deviation, dev);
    rep.max_det_deviation = std::max(rep.max_det_deviation, std::abs(p.det_D - base.det_D));
    rep.max_trace_deviation = std::max(rep.max_trace_deviation, std::abs(p.trace_D - base.trace_D));
    if (p.rank != base.rank) rep.rank_invariant = false;
    rep.witnesses.push_back({static_cast<int>(i), rep.times[i], dev});
  }
  keep_worst(rep.witnesses);
  return rep;
}

ScanReport reversibility_scan(const ManifoldSpec& spec, const std::vector<TangentVector>& vectors,
                              const ProfileOptions& options, int jobs) {
  ProfileOptions opt = options;
  opt.independent_reverse = false;
  struct Pair {
    HorosphericalProfile fwd, rev;
  };
  const std::vector<Pair> pairs = parallel_map(vectors.size(), jobs, [&](std::size_t i) {
    Pair pr;
    pr.fwd = profile(spec, vectors[i], opt);
    pr.rev = profile(spec, vectors[i].reversed(), opt, pr.fwd.frame);
    return pr;
  });

  ScanReport rep;
  rep.kind = "reversibility";
  rep.samples = static_cast<int>(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    HorosphericalProfile p = pairs[i].fwd;
    const HorosphericalProfile& q = pairs[i].rev;
    // The independently computed h(-v) replaces the same-trajectory value.
    p.h_reverse = q.h;
    p.checks.h_plus_h_reverse_eq_trace_D = std::abs(p.h + q.h - p.trace_D);
    const double dev = std::abs(p.h - q.h);
    rep.max_deviation = std::max(rep.max_deviation, dev);
    rep.max_identity_residual =
        std::max(rep.max_identity_residual, p.checks.h_plus_h_reverse_eq_trace_D);
    rep.max_D_mismatch = std::max(rep.max_D_mismatch, (q.D - p.D).cwiseAbs().maxCoeff());
    rep.witnesses.push_back({static_cast<int>(i), 0.0, dev});
    rep.profiles.push_back(std::move(p));
  }
  keep_worst(rep.witnesses);
  return rep;
}

BusemannResult busemann(const ManifoldSpec& spec, const TangentVector& v, const ChartPoint& x,
                        const BusemannOptions& opt) {
  if (!(opt.T0 > 0.0) || !(opt.T_max >= 2.0 * opt.T0) || !(opt.tol > 0.0))
    throw Error(ErrorKind::InvalidParams, "busemann: requires T0 > 0, T_max >= 2 T0, tol > 0");
  if (!spec.in_domain(x)) throw Error(ErrorKind::Domain, "busemann: point outside the chart");

  BusemannResult res;
  // The full table never stops early, so its deepest entry is one fixed stencil in x.
  DoublingExtrapolator table(opt.full_table ? std::numeric_limits<double>::min() : opt.tol,
                             kBusemannLevels);
  bool left_chart = false;
  for (double T = opt.T0; T <= opt.T_max * (1.0 + 1e-12); T *= 2.0) {
    // One ray per T: hyperbolic rays overflow the chart long before T_max, and the
    // early-stopping path rarely needs the far end.
    const GeodesicTrajectory ray = integrate_geodesic(spec, v, 0.0, T, opt.geodesic_tol);
    if (!ray.covers(T)) {
      left_chart = true;
      break;
    }
    const double b = distance(spec, ray.point(T), x) - T;
    res.T.push_back(T);
    res.raw.push_back(b);
    res.T_used = T;
    if (table.add(Mat::Constant(1, 1, b))) break;
  }
  const std::size_t k = res.raw.size();
  if (k >= 3) {
    res.value = opt.full_table ? table.deepest()(0, 0) : table.value()(0, 0);
    res.residual = table.residual();
    if (res.residual <= opt.tol) return res;
  }
  std::ostringstream os;
  os.precision(12);
  os << "Busemann function did not converge by T = " << res.T_used;
  if (k >= 2) os << " (last iterates " << res.raw[k - 2] << ", " << res.raw[k - 1] << ")";
  if (left_chart) os << "; geodesic leaves the chart";
  throw Error(ErrorKind::NonConvergence, os.str(), k >= 1 ? res.raw.back() : 0.0);
}

ProductBusemannCheck product_busemann_check(const ManifoldSpec& spec, const TangentVector& v,
                                            const ChartPoint& x, const BusemannOptions& options) {
  if (!spec.is_product())
    throw Error(ErrorKind::InvalidParams, "product_busemann_check: requires a product model");
  auto [bl, br] = split(spec, v.base);
  auto [xl, xr] = split(spec, x);
  const int nl = spec.left().dimension();
  const Vec cl = v.components.head(nl);
  const Vec cr = v.components.tail(spec.dimension() - nl);

  ProductBusemannCheck out;
  out.alpha = norm(spec.left().metric(bl), cl);
  out.beta = norm(spec.right().metric(br), cr);
  auto term = [&](const ManifoldSpec& f, const ChartPoint& base, const Vec& comps, double share,
                  const ChartPoint& xf) {
    if (share < 1e-12) return 0.0;
    return share * busemann(f, {base, comps / share}, xf, options).value;
  };
  out.formula = term(spec.left(), bl, cl, out.alpha, xl) + term(spec.right(), br, cr, out.beta, xr);
  out.estimate = busemann(spec, v, x, options).value;
  out.deviation = std::abs(out.estimate - out.formula);
  return out;
}

Vec busemann_gradient(const ManifoldSpec& spec, const TangentVector& v, const ChartPoint& x,
                      double h, const BusemannOptions& options) {
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidParams, "busemann_gradient: h must be positive");
  BusemannOptions opt = options;
  opt.full_table = true;
  const int n = spec.dimension();
  Vec db(n);
  for (int i = 0; i < n; ++i) {
    ChartPoint xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    db[i] = (busemann(spec, v, xp, opt).value - busemann(spec, v, xm, opt).value) / (2.0 * h);
  }
  return spec.metric(x).ldlt().solve(db);
}

TangentVector stable_leaf_partner(const ManifoldSpec& spec, const TangentVector& v,
                                  double horo_offset, double flat_offset) {
  const int n = spec.dimension();
  const Mat g = spec.metric(v.base);
  const double len = norm(g, v.components);
  if (std::abs(len - 1.0) > 1e-8)
    throw Error(ErrorKind::InvalidParams, "stable_leaf_partner: v must be a unit vector");

  switch (spec.kind()) {
    case ModelKind::Euclidean: {
      // Horospheres are hyperplanes orthogonal to v; the leaf is the parallel field.
      const Mat frame = orthonormal_frame(spec, v);
      if ((horo_offset != 0.0 && frame.cols() < 1) || (flat_offset != 0.0 && frame.cols() < 2))
        throw Error(ErrorKind::InvalidParams,
                    "stable_leaf_partner: no direction orthogonal to v for the requested offset");
      TangentVector w = v;
      if (horo_offset != 0.0) w.base += horo_offset * frame.col(0);
      if (flat_offset != 0.0) w.base += flat_offset * frame.col(1);
      return w;
    }
    case ModelKind::Hyperbolic: {
      const double k = spec.param("k");
      const double y = v.base[n - 1];
      if (v.components.head(n - 1).norm() > 1e-9 * v.components.norm() ||
          !(v.components[n - 1] > 0.0))
        throw Error(ErrorKind::InvalidParams,
                    "stable_leaf_partner: hyperbolic v must point vertically upwards");
      if (flat_offset != 0.0)
        throw Error(ErrorKind::InvalidParams,
                    "stable_leaf_partner: flat offset needs a Euclidean factor");
      // The horosphere {height = y} is flat with metric |dx|^2 / (k y)^2.
      TangentVector w = v;
      w.base[0] += horo_offset * k * y;
      return w;
    }
    case ModelKind::Product: {
      const ManifoldSpec& L = spec.left();
      const ManifoldSpec& R = spec.right();
      const int nl = L.dimension();
      auto [bl, br] = split(spec, v.base);
      const Vec cl = v.components.head(nl);
      const Vec cr = v.components.tail(n - nl);
      // Offsets are routed by factor type: horospherical to curved factors, flat to
      // Euclidean ones.
      auto factor_partner = [&](const ManifoldSpec& f, const ChartPoint& base, const Vec& comps)
          -> TangentVector {
        const bool flat = f.kind() == ModelKind::Euclidean;
        const double off1 = flat ? flat_offset : horo_offset;
        const double off2 = f.is_product() ? flat_offset : 0.0;
        const double share = norm(f.metric(base), comps);
        if (share < 1e-12) {
          // v has no component here: b_v is constant along this factor.
          TangentVector w{base, Vec::Zero(comps.size())};
          const double scale = is_hyperbolic(f) ? f.param("k") * base[f.dimension() - 1] : 1.0;
          w.base[0] += off1 * scale;
          return w;
        }
        TangentVector w = stable_leaf_partner(f, {base, comps / share}, off1, off2);
        w.components *= share;
        return w;
      };
      const TangentVector wl = factor_partner(L, bl, cl);
      const TangentVector wr = factor_partner(R, br, cr);
      TangentVector w;
      w.base.resize(n);
      w.components.resize(n);
      w.base << wl.base, wr.base;
      w.components << wl.components, wr.components;
      return w;
    }
    default:
      throw Error(ErrorKind::InvalidParams,
                  std::string("stable_leaf_partner: unsupported model ") + spec.tag());
  }
}

LeafProbe stable_leaf_probe(const ManifoldSpec& spec, const TangentVector& v,
                            const TangentVector& w, const std::vector<double>& times,
                            double geodesic_tol) {
  if (times.empty()) throw Error(ErrorKind::InvalidParams, "stable_leaf_probe: no times");
  const double t_max = std::max(0.0, *std::max_element(times.begin(), times.end()));
  const GeodesicTrajectory cv = integrate_geodesic(spec, v, 0.0, t_max, geodesic_tol);
  const GeodesicTrajectory cw = integrate_geodesic(spec, w, 0.0, t_max, geodesic_tol);

  LeafProbe probe;
  for (double t : times) {
    if (!cv.covers(t) || !cw.covers(t))
      throw Error(ErrorKind::Domain, "stable_leaf_probe: geodesic leaves the chart before t = " +
                                         fmt(t), t);
    const ChartPoint p = cv.point(t), q = cw.point(t);
    probe.times.push_back(t);
    probe.distances.push_back(distance(spec, p, q));
    if (spec.is_product()) {
      auto [pl, pr] = split(spec, p);
      auto [ql, qr] = split(spec, q);
      probe.left_distances.push_back(distance(spec.left(), pl, ql));
      probe.right_distances.push_back(distance(spec.right(), pr, qr));
    }
  }
  probe.limit_distance = probe.distances.back();

  // The decaying series: on products, the factor whose distance shrinks the most.
  const std::vector<double>* series = &probe.distances;
  if (spec.is_product()) {
    auto shrink = [](const std::vector<double>& d) {
      return d.front() > 0.0 ? d.back() / d.front() : std::numeric_limits<double>::infinity();
    };
    series = shrink(probe.left_distances) <= shrink(probe.right_distances)
                 ? &probe.left_distances
                 : &probe.right_distances;
  }
  // Least-squares slope of log d over the second half of the samples.
  std::vector<double> ts, ls;
  for (std::size_t i = times.size() / 2; i < times.size(); ++i) {
    if ((*series)[i] > 0.0) {
      ts.push_back(probe.times[i]);
      ls.push_back(std::log((*series)[i]));
    }
  }
  if (ts.size() >= 2) {
    const double tm = std::accumulate(ts.begin(), ts.end(), 0.0) / ts.size();
    const double lm = std::accumulate(ls.begin(), ls.end(), 0.0) / ls.size();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      num += (ts[i] - tm) * (ls[i] - lm);
      den += (ts[i] - tm) * (ts[i] - tm);
    }
    if (den > 0.0) probe.decay_rate = num / den;
  }
  return probe;
}

DivergenceProbe divergence_probe(const ManifoldSpec& spec, const TangentVector& v,
                                 const TangentVector& w, const std::vector<double>& times) {
  if (times.empty()) throw Error(ErrorKind::InvalidParams, "divergence_probe: no times");
  const double t_max = std::max(0.0, *std::max_element(times.begin(), times.end()));
  const GeodesicTrajectory cv = integrate_geodesic(spec, v, 0.0, t_max);
  const GeodesicTrajectory cw = integrate_geodesic(spec, w, 0.0, t_max);
  DivergenceProbe probe;
  probe.strictly_increasing = true;
  for (double t : times) {
    if (!cv.covers(t) || !cw.covers(t))
      throw Error(ErrorKind::Domain, "divergence_probe: geodesic leaves the chart before t = " +
                                         fmt(t), t);
    const double d = distance(spec, cv.point(t), cw.point(t));
    if (!probe.distances.empty() && !(d > probe.distances.back())) probe.strictly_increasing = false;
    probe.times.push_back(t);
    probe.distances.push_back(d);
  }
  return probe;
}

std::vector<HorosphereCheck> horosphere_distance_check(const ManifoldSpec& spec,
                                                       const std::vector<HorospherePair>& pairs) {
  if (!is_hyperbolic(spec))
    throw Error(ErrorKind::InvalidParams, "horosphere_distance_check: requires a hyperbolic model");
  const int n = spec.dimension();
  const double k = spec.param("k");
  const double sqrt_r0 = std::sqrt(spec.curvature_bounds()->r0);
  std::vector<HorosphereCheck> out;
  out.reserve(pairs.size());
  for (const auto& [p, q] : pairs) {
    const double c = p[n - 1];
    if (std::abs(q[n - 1] - c) > 1e-12 * c)
      throw Error(ErrorKind::InvalidParams,
                  "horosphere_distance_check: points are not on a common horosphere");
    HorosphereCheck r;
    r.ambient = distance(spec, p, q);
    r.horo = (p.head(n - 1) - q.head(n - 1)).norm() / (k * c);
    r.bound = std::exp(r.ambient * sqrt_r0 / 2.0) * r.ambient;
    r.ratio = r.bound > 0.0 ? r.horo / r.bound : 0.0;
    r.holds = r.horo <= r.bound * (1.0 + 1e-12) + 1e-15;
    out.push_back(r);
  }
  return out;
}

std::vector<HorospherePair> sample_horosphere_pairs(const ManifoldSpec& spec, int count,
                                                    std::uint64_t seed) {
  if (!is_hyperbolic(spec))
    throw Error(ErrorKind::InvalidParams, "sample_horosphere_pairs: requires a hyperbolic model");
  if (count < 0) throw Error(ErrorKind::InvalidParams, "sample_horosphere_pairs: count < 0");
  const int n = spec.dimension();
  const double k = spec.param("k");
  CounterRng rng(seed);
  std::vector<HorospherePair> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double c = rng.uniform(0.5, 2.0);
    ChartPoint p(n);
    for (int j = 0; j < n - 1; ++j) p[j] = rng.uniform(-1.0, 1.0);
    p[n - 1] = c;
    Vec dir(n - 1);
    for (int j = 0; j < n - 1; ++j) dir[j] = rng.normal();
    // Ambient separation d uniform in (0, 6), since d = (2/k) asinh(|Δx| / (2c)).
    const double d = rng.uniform(0.0, 6.0);
    const double s = 2.0 * c * std::sinh(k * d / 2.0);
    ChartPoint q = p;
    q.head(n - 1) += s * dir.normalized();
    out.push_back({p, q});
  }
  return out;
}

}  // namespace horolab
