#include "horolab/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "horolab/datri.hpp"
#include "horolab/error.hpp"
#include "horolab/horospherical.hpp"
#include "horolab/parallel.hpp"
#include "horolab/sampling.hpp"

#ifndef HOROLAB_VERSION
#define HOROLAB_VERSION "0.0.0"
#endif

namespace horolab {

using ojson = nlohmann::ordered_json;

const char* version() { return HOROLAB_VERSION; }

namespace {

// ---------------------------------------------------------------------------------------
// Experiment catalogue

const std::vector<ExperimentInfo>& catalogue() {
  static const std::vector<ExperimentInfo> list = {
      {"curvature-check",
       "manifold-core: jacobi_operator + sectional_curvature per sampled v; analytic vs "
       "finite-difference curvature; ||R_v|| <= R0",
       {{"symmetry", 1e-8}, {"fd_agreement", 1e-5}, {"bound_slack", 1e-8}},
       {}},
      {"jacobi",
       "jacobi-riccati: A_v(t) and J1 along each v; Wronskian Ω(A, J1)(t) = Id",
       {{"wronskian", 1e-7}},
       {}},
      {"stable-tensor",
       "jacobi-riccati: stable_tensor S(v) by r-doubling per sampled v",
       {{"limit", 1e-6}},
       {"r0", "r_max"}},
      {"profile",
       "horospherical: profile (S, U, D, h, rank, bound checks) per sampled v",
       {{"limit", 1e-6}, {"identity", 1e-6}, {"expected_h", 1e-5}},
       {"expected_h", "r_max", "eps_rank"}},
      {"flow-scan",
       "horospherical: flow_invariance_scan of h, det D, tr D, rank along each v",
       {{"h", 1e-5}, {"limit", 1e-6}},
       {"r_max", "eps_rank"}},
      {"reversibility-scan",
       "horospherical: reversibility_scan, h(v) vs h(-v) and h(v) + h(-v) = tr D(v)",
       {{"h", 1e-5}, {"identity", 1e-6}, {"limit", 1e-6}},
       {"r_max", "eps_rank"}},
      {"busemann",
       "horospherical: busemann at seeded points; product models compare with the "
       "factor formula",
       {{"busemann", 1e-7}, {"formula", 1e-4}},
       {"T0", "T_max", "spread"}},
      {"leaf-probe",
       "horospherical: stable_leaf_partner + stable_leaf_probe, fitted decay rate",
       {{"rate", 0.05}},
       {"horo_offset", "flat_offset", "expected_rate"}},
      {"conjugate-scan",
       "datri-harmonic: conjugate_scan of det A_v on a grid with root refinement",
       {{"first_time", 1e-3}},
       {"T", "dt", "expected_first_time"}},
      {"datri-check",
       "datri-harmonic: datri_check, det A_v(t) vs det A_{-v}(t) and spread over v",
       {{"asymmetry", 1e-6}, {"spread", 1e-6}},
       {"require_harmonic"}},
      {"sl2-verify",
       "datri-harmonic: SL(2,R)~ closed-form Jacobi pair vs its ODE system, conjugate "
       "time along the vertical geodesic, frame curvature table",
       {{"u_system", 1e-5}, {"conjugate_time", 1e-3}, {"curvature", 1e-7}},
       {"t_coord"}},
  };
  return list;
}

const ExperimentInfo* find_experiment(const std::string& name) {
  for (const auto& e : catalogue())
    if (e.name == name) return &e;
  return nullptr;
}

// ---------------------------------------------------------------------------------------
// Config parsing

class ConfigReader {
 public:
  explicit ConfigReader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& field,
                         const std::string& problem) const {
    std::ostringstream os;
    os << source_;
    if (node.IsDefined() && node.Mark().line >= 0) os << ":" << node.Mark().line + 1;
    os << ": " << field << ": " << problem;
    throw Error(ErrorKind::Config, os.str());
  }

  void only_keys(const YAML::Node& map, const std::string& field,
                 const std::set<std::string>& allowed) const {
    if (!map.IsMap()) fail(map, field, "expected a mapping");
    for (const auto& kv : map) {
      const std::string key = kv.first.as<std::string>();
      if (!allowed.count(key))
        fail(kv.first, field.empty() ? key : field + "." + key, "unknown field");
    }
  }

  double real(const YAML::Node& node, const std::string& field) const {
    if (!node.IsScalar()) fail(node, field, "expected a number");
    try {
      const double x = node.as<double>();
      if (!std::isfinite(x)) fail(node, field, "must be finite");
      return x;
    } catch (const YAML::BadConversion&) {
      fail(node, field, "expected a number, got '" + node.Scalar() + "'");
    }
  }

  long long integer(const YAML::Node& node, const std::string& field) const {
    if (!node.IsScalar()) fail(node, field, "expected an integer");
    try {
      return node.as<long long>();
    } catch (const YAML::BadConversion&) {
      fail(node, field, "expected an integer, got '" + node.Scalar() + "'");
    }
  }

  std::string text(const YAML::Node& node, const std::string& field) const {
    if (!node.IsScalar()) fail(node, field, "expected a string");
    return node.Scalar();
  }

  std::vector<double> reals(const YAML::Node& node, const std::string& field) const {
    if (!node.IsSequence()) fail(node, field, "expected a list of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < node.size(); ++i)
      out.push_back(real(node[i], field + "[" + std::to_string(i) + "]"));
    return out;
  }

  ModelDescriptor model(const YAML::Node& node, const std::string& field) const {
    only_keys(node, field, {"model", "params", "factors"});
    if (!node["model"]) fail(node, field + ".model", "required field missing");
    ModelDescriptor d;
    d.tag = text(node["model"], field + ".model");
    if (const YAML::Node p = node["params"]) {
      if (!p.IsMap()) fail(p, field + ".params", "expected a mapping");
      for (const auto& kv : p) {
        const std::string key = kv.first.as<std::string>();
        d.params[key] = real(kv.second, field + ".params." + key);
      }
    }
    if (const YAML::Node f = node["factors"]) {
      if (!f.IsSequence()) fail(f, field + ".factors", "expected a list of models");
      for (std::size_t i = 0; i < f.size(); ++i)
        d.factors.push_back(model(f[i], field + ".factors[" + std::to_string(i) + "]"));
    }
    return d;
  }

 private:
  std::string source_;
};

ojson model_json(const ModelDescriptor& d) {
  ojson j;
  j["model"] = d.tag;
  ojson params = ojson::object();
  for (const auto& [k, v] : d.params) params[k] = v;
  j["params"] = params;
  if (!d.factors.empty()) {
    j["factors"] = ojson::array();
    for (const auto& f : d.factors) j["factors"].push_back(model_json(f));
  }
  return j;
}

std::string canonical_json(const ExperimentConfig& c) {
  ojson j;
  j["manifold"] = model_json(c.manifold);
  j["experiment"] = c.experiment;
  ojson s;
  s["seed"] = c.seed;
  s["count"] = c.count;
  s["time_grid"] = c.time_grid;
  ojson tol = ojson::object();
  for (const auto& [k, v] : c.tolerances) tol[k] = v;
  s["tolerances"] = tol;
  if (c.anchor) s["anchor"] = *c.anchor;
  if (c.vector) s["vector"] = *c.vector;
  if (c.axis) {
    s["axis"] = *c.axis;
    s["min_axis"] = c.min_axis;
  }
  if (c.min_curved_share) s["min_curved_share"] = *c.min_curved_share;
  j["sampling"] = s;
  ojson p = ojson::object();
  for (const auto& [k, v] : c.parameters) p[k] = v;
  j["parameters"] = p;
  j["output"] = {{"path", c.output_path}, {"format", c.format}};
  return j.dump();
}

// ---------------------------------------------------------------------------------------
// Shared experiment helpers

struct Context {
  const ExperimentConfig& config;
  const ExperimentInfo& info;
  ManifoldSpec spec;
  int jobs;

  double tol(const std::string& name) const {
    if (auto it = config.tolerances.find(name); it != config.tolerances.end()) return it->second;
    for (const auto& [n, v] : info.tolerances)
      if (n == name) return v;
    throw Error(ErrorKind::Config, "internal: no tolerance '" + name + "'");
  }
  std::optional<double> param(const std::string& name) const {
    if (auto it = config.parameters.find(name); it != config.parameters.end()) return it->second;
    return std::nullopt;
  }
  double param(const std::string& name, double fallback) const {
    return param(name).value_or(fallback);
  }
  std::vector<double> times(std::vector<double> fallback) const {
    return config.time_grid.empty() ? fallback : config.time_grid;
  }

  ChartPoint anchor() const {
    if (!config.anchor) return default_anchor(spec);
    return Eigen::Map<const Vec>(config.anchor->data(), static_cast<Eigen::Index>(config.anchor->size()));
  }

  // The explicit vector when configured, otherwise `count` seeded unit vectors (filtered by
  // the axis and curved-share options).
  std::vector<TangentVector> vectors() const {
    const ChartPoint p = anchor();
    if (config.vector) {
      const Vec c = Eigen::Map<const Vec>(config.vector->data(),
                                          static_cast<Eigen::Index>(config.vector->size()));
      return {unit_vector(spec, p, c)};
    }
    const Mat g = spec.metric(p);
    const std::optional<int> axis = config.axis;
    const double min_axis = config.min_axis;
    std::optional<double> share = config.min_curved_share;
    if (!share && spec.is_product() && curved_factor() >= 0) share = 0.3;
    if (!axis && !share) return sample_unit_vectors(spec, p, config.count, config.seed);
    const int curved = curved_factor();
    return sample_unit_vectors_if(spec, p, config.count, config.seed, [&](const TangentVector& v) {
      if (axis) {
        const Vec e = Vec::Unit(spec.dimension(), *axis) / std::sqrt(g(*axis, *axis));
        if (std::abs(inner(g, v.components, e)) < min_axis) return false;
      }
      if (share && curved >= 0) {
        const int nl = spec.left().dimension();
        const bool left = curved == 0;
        const ManifoldSpec& f = left ? spec.left() : spec.right();
        const Vec part = left ? Vec(v.components.head(nl)) : Vec(v.components.tail(spec.dimension() - nl));
        const ChartPoint base = left ? ChartPoint(p.head(nl)) : ChartPoint(p.tail(spec.dimension() - nl));
        if (norm(f.metric(base), part) < *share) return false;
      }
      return true;
    });
  }

  // Index (0 left, 1 right) of the first curved factor of a product, -1 otherwise.
  int curved_factor() const {
    if (!spec.is_product()) return -1;
    if (spec.left().kind() != ModelKind::Euclidean) return 0;
    if (spec.right().kind() != ModelKind::Euclidean) return 1;
    return -1;
  }

  ProfileOptions profile_options() const {
    ProfileOptions o;
    o.limit.tol = tol("limit");
    o.limit.r_max = param("r_max", o.limit.r_max);
    o.eps_rank = param("eps_rank", o.eps_rank);
    return o;
  }
};

Cell cell(double x) { return std::isfinite(x) ? Cell{x} : Cell{}; }
Cell cell(int x) { return Cell{static_cast<std::int64_t>(x)}; }
Cell cell(std::size_t x) { return Cell{static_cast<std::int64_t>(x)}; }
Cell cell(bool x) { return Cell{x}; }
Cell cell(const std::optional<double>& x) { return x ? cell(*x) : Cell{}; }
Cell cell(const std::optional<bool>& x) { return x ? Cell{*x} : Cell{}; }

void require(ExperimentReport& rep, bool ok, const std::string& what) {
  if (!ok) rep.failures.push_back(what);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// ---------------------------------------------------------------------------------------
// Experiments

void curvature_check(const Context& cx, ExperimentReport& rep) {
  rep.columns = {"v_index", "sectional_curvature", "jacobi_norm", "jacobi_asymmetry",
                 "fd_deviation", "bound_ok"};
  const auto vs = cx.vectors();
  const ManifoldSpec fd = cx.spec.with_derivative_mode(DerivativeMode::FiniteDifference);
  const bool analytic = cx.spec.has_analytic_derivatives();
  const auto& bounds = cx.spec.curvature_bounds();
  struct Row {
    double k, norm, asym;
    std::optional<double> fd_dev;
    std::optional<bool> bound_ok;
  };
  const auto rows = parallel_map(vs.size(), cx.jobs, [&](std::size_t i) {
    const TangentVector& v = vs[i];
    const Mat frame = orthonormal_frame(cx.spec, v);
    Row r{};
    const Mat R = jacobi_operator(cx.spec, v, frame, &r.asym);
    r.k = sectional_curvature(cx.spec, v.base, v.components, frame.col(0));
    r.norm = R.size() ? Eigen::SelfAdjointEigenSolver<Mat>(R).eigenvalues().cwiseAbs().maxCoeff() : 0.0;
    if (analytic) r.fd_dev = (jacobi_operator(fd, v, frame) - R).cwiseAbs().maxCoeff();
    if (bounds) r.bound_ok = r.norm <= bounds->r0 + cx.tol("bound_slack");
    return r;
  });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    rep.rows.push_back({cell(i), cell(r.k), cell(r.norm), cell(r.asym), cell(r.fd_dev), cell(r.bound_ok)});
    rep.max_deviation = std::max(rep.max_deviation, r.asym);
    require(rep, r.asym <= cx.tol("symmetry"), "v " + std::to_string(i) + ": Jacobi operator asymmetry " + fmt(r.asym));
    if (r.fd_dev) {
      rep.max_deviation = std::max(rep.max_deviation, *r.fd_dev);
      require(rep, *r.fd_dev <= cx.tol("fd_agreement"),
              "v " + std::to_string(i) + ": finite-difference curvature deviates by " + fmt(*r.fd_dev));
    }
    if (r.bound_ok) require(rep, *r.bound_ok, "v " + std::to_string(i) + ": ||R_v|| exceeds R0");
  }
}

void jacobi_experiment(const Context& cx, ExperimentReport& rep) {
  rep.columns = {"v_index", "t", "det_A", "trace_A", "wronskian_drift"};
  const auto vs = cx.vectors();
  const std::vector<double> times = cx.times({1, 2, 3, 4, 5});
  const double t_max = *std::max_element(times.begin(), times.end());
  if (!(t_max > 0.0)) throw Error(ErrorKind::Config, "sampling.time_grid: needs a positive time");
  struct Sample {
    double t, det, trace, drift;
  };
  struct Row {
    std::vector<Sample> samples;
    bool truncated = false;
  };
  const auto rows = parallel_map(vs.size(), cx.jobs, [&](std::size_t i) {
    const GeodesicTrajectory traj = integrate_geodesic(cx.spec, vs[i], 0.0, t_max);
    Row row;
    const double reach = std::min(t_max, traj.t_max());
    row.truncated = reach < t_max;
    const FundamentalSolution fs(traj, reach);
    const int m = traj.dimension() - 1;
    for (double t : times) {
      if (t < 0.0 || t > reach) continue;
      const JacobiTensorState a = fs.a(t), j1 = fs.j1(t);
      // Ω(A, J1) = J1^T A' - J1'^T A equals Id at t = 0.
      const double drift = (wronskian(a, j1).omega - Mat::Identity(m, m)).cwiseAbs().maxCoeff();
      row.samples.push_back({t, a.J.determinant(), a.J.trace(), drift});
    }
    return row;
  });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].truncated) rep.warnings.push_back("v " + std::to_string(i) + ": geodesic leaves the chart; later times dropped");
    for (const Sample& s : rows[i].samples) {
      rep.rows.push_back({cell(i), cell(s.t), cell(s.det), cell(s.trace), cell(s.drift)});
      rep.max_deviation = std::max(rep.max_deviation, s.drift);
      require(rep, s.drift <= cx.tol("wronskian"),
              "v " + std::to_string(i) + ", t = " + fmt(s.t) + ": Wronskian drift " + fmt(s.drift));
    }
  }
}

void stable_tensor_experiment(const Context& cx, ExperimentReport& rep) {
  rep.columns = {"v_index", "trace_S", "min_eig_S", "max_eig_S", "r_used", "residual", "asymmetry"};
  const auto vs = cx.vectors();
  LimitOptions opt;
  opt.tol = cx.tol("limit");
  opt.r0 = cx.param("r0", opt.r0);
  opt.r_max = cx.param("r_max", opt.r_max);
  const auto results = parallel_map(vs.size(), cx.jobs, [&](std::size_t i) {
    const GeodesicTrajectory traj = integrate_geodesic(cx.spec, vs[i], 0.0, opt.r_max);
    return stable_tensor(traj, opt);
  });
  for (std::size_t i = 0; i < results.size(); ++i) {
    const StableTensorResult& r = results[i];
    const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(r.S).eigenvalues();
    rep.rows.push_back({cell(i), cell(r.S.trace()), cell(ev.minCoeff()), cell(ev.maxCoeff()),
                        cell(r.r_used), cell(r.residual), cell(r.asymmetry)});
    rep.max_deviation = std::max(rep.max_deviation, r.residual);
  }
}

void profile_experiment(const Context& cx, ExperimentReport& rep) {
  rep.columns = {"v_index", "h", "det_D", "trace_D", "rank", "norm_bound_ok", "det_trace_ok"};
  const auto vs = cx.vectors();
  const auto ps = profiles(cx.spec, vs, cx.profile_options(), cx.jobs);
  const std::optional<double> expected = cx.param("expected_h");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const HorosphericalProfile& p = ps[i];
    rep.rows.push_back({cell(i), cell(p.h), cell(p.det_D), cell(p.trace_D), cell(p.rank),
                        cell(p.checks.norm_D_le_2sqrtR0), cell(p.checks.det_trace_inequality)});
    const std::string id = "v " + std::to_string(i) + ": ";
    const double identity = p.checks.h_plus_h_reverse_eq_trace_D;
    rep.max_deviation = std::max(rep.max_deviation, identity);
    require(rep, identity <= cx.tol("identity"), id + "h(v) + h(-v) - tr D = " + fmt(identity));
    if (p.checks.norm_D_le_2sqrtR0) require(rep, *p.checks.norm_D_le_2sqrtR0, id + "||D|| exceeds 2 sqrt(R0)");
    require(rep, p.checks.det_trace_inequality, id + "det-trace inequality fails");
    require(rep, p.checks.D_nonnegative, id + "D has a negative eigenvalue");
    if (expected) {
      const double dev = std::abs(p.h - *expected);
      rep.max_deviation = std::max(rep.max_deviation, dev);
      require(rep, dev <= cx.tol("expected_h"), id + "h = " + fmt(p.h) + ", expected " + fmt(*expected));
    }
  }
}

void flow_scan_experiment(const Context& cx, ExperimentReport& rep) {
  rep.columns = {"v_index", "t", "h", "det_D", "trace_D", "rank"};
  const auto vs = cx.vectors();
  const std::vector<double> times = cx.times({0.5, 1, 2, 4});
  const ProfileOptions opt = cx.profile_options();
  // Parallel over vectors; each scan runs serially so row order never depends on timing.
  const auto scans = parallel_map(vs.size(), cx.jobs, [&](std::size_t i) {
    return flow_invariance_scan(cx.spec, vs[i], times, opt, 1);
  });
  bool ranks_ok = true;
  for (std::size_t i = 0; i < scans.size(); ++i) {
    const ScanReport& s = scans[i];
    if (s.truncated) rep.warnings.push_back("v " + std::to_string(i) + ": flow times beyond the chart dropped");
    for (std::size_t k = 0; k < s.times.size(); ++k) {
      const HorosphericalProfile& p = s.profiles[k];
      rep.rows.push_back({cell(i), cell(s.times[k]), cell(p.h), cell(p.det_D), cell(p.trace_D), cell(p.rank)});
    }
    rep.max_deviation = std::max(rep.max_deviation, s.max_deviation);
    require(rep, s.max_deviation <= cx.tol("h"),
            "v " + std::to_string(i) + ": h varies along the flow by " + fmt(s.max_deviation));
    if (!s.rank_invariant) {
      ranks_ok = false;
      rep.failures.push_back("v " + std::to_string(i) + ": rank changes along the flow");
    }
  }
  rep.summary_extras.push_back({"rank_invariant", Cell{ranks_ok}});
}

void reversibility_experiment(const Context& cx, ExperimentReport& rep) {
  rep.columns = {"v_index", "h", "h_reverse", "identity_residual", "rank"};
  const auto vs = cx.vectors();
  const ScanReport s = reversibility_scan(cx.spec, vs, cx.profile_options(), cx.jobs);
  for (std::size_t i = 0; i < s.profiles.size(); ++i) {
    const HorosphericalProfile& p = s.profiles[i];
    rep.rows.push_back({cell(i), cell(p.h), cell(p.h_reverse), cell(p.checks.h_plus_h_reverse_eq_trace_D),
                        cell(p.rank)});
  }
  rep.max_deviation = s.max_deviation;
  rep.summary_extras.push_back({"max_identity_residual", cell(s.max_identity_residual)});
  rep.summary_extras.push_back({"max_D_mismatch", cell(s.max_D_mismatch)});
  require(rep, s.max_deviation <= cx.tol("h"), "max |h(v) - h(-v)| = " + fmt(s.max_deviation));
  require(rep, s.max_identity_residual <= cx.tol("identity"),
          "max |h(v) + h(-v) - tr D(v)| = " + fmt(s.max_identity_residual));
}

void busemann_experiment(const Context& cx, ExperimentReport& rep) {
  rep.columns = {"point_index", "b", "residual", "T_used", "formula", "deviation"};
  const TangentVector v = cx.vectors().front();
  BusemannOptions opt;
  opt.tol = cx.tol("busemann");
  opt.T0 = cx.param("T0", opt.T0);
  opt.T_max = cx.param("T_max", opt.T_max);
  const double spread = cx.param("spread", 0.5);

  // Seeded points around the anchor, redrawn until inside the chart.
  CounterRng rng(cx.config.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<ChartPoint> points;
  const ChartPoint p0 = cx.anchor();
  for (int i = 0, draws = 0; i < cx.config.count; ++draws) {
    if (draws > 1000 * cx.config.count)
      throw Error(ErrorKind::Config, "busemann: could not draw points inside the chart");
    ChartPoint x = p0;
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] += rng.uniform(-spread, spread);
    if (!cx.spec.in_domain(x)) continue;
    points.push_back(x);
    ++i;
  }
  const bool product = cx.spec.is_product();
  struct Row {
    BusemannResult b;
    std::optional<ProductBusemannCheck> check;
  };
  const auto rows = parallel_map(points.size(), cx.jobs, [&](std::size_t i) {
    Row r;
    r.b = busemann(cx.spec, v, points[i], opt);
    if (product) r.check = product_busemann_check(cx.spec, v, points[i], opt);
    return r;
  });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    rep.rows.push_back({cell(i), cell(r.b.value), cell(r.b.residual), cell(r.b.T_used),
                        r.check ? cell(r.check->formula) : Cell{},
                        r.check ? cell(r.check->deviation) : Cell{}});
    if (r.check) {
      rep.max_deviation = std::max(rep.max_deviation, r.check->deviation);
      require(rep, r.check->deviation <= cx.tol("formula"),
              "point " + std::to_string(i) + ": product formula deviates by " + fmt(r.check->deviation));
    } else {
      rep.max_deviation = std::max(rep.max_deviation, r.b.residual);
    }
  }
}

void leaf_probe_experiment(const Context& cx, ExperimentReport& rep) {
  rep.columns = {"t", "distance", "left_distance", "right_distance"};
  TangentVector v;
  if (cx.config.vector) {
    v = cx.vectors().front();
  } else if (cx.spec.kind() == ModelKind::Hyperbolic || cx.spec.kind() == ModelKind::Euclidean) {
    const ChartPoint p = cx.anchor();
    v = unit_vector(cx.spec, p, Vec::Unit(cx.spec.dimension(), cx.spec.dimension() - 1));
  } else {
    throw Error(ErrorKind::Config, "leaf-probe: sampling.vector is required for this model");
  }
  const TangentVector w =
      stable_leaf_partner(cx.spec, v, cx.param("horo_offset", 1.0), cx.param("flat_offset", 0.0));
  const LeafProbe probe = stable_leaf_probe(cx.spec, v, w, cx.times({0, 1, 2, 3, 4, 5, 6, 7, 8}));
  for (std::size_t k = 0; k < probe.times.size(); ++k) {
    const bool prod = !probe.left_distances.empty();
    rep.rows.push_back({cell(probe.times[k]), cell(probe.distances[k]),
                        prod ? cell(probe.left_distances[k]) : Cell{},
                        prod ? cell(probe.right_distances[k]) : Cell{}});
  }
  rep.summary_extras.push_back({"decay_rate", cell(probe.decay_rate)});
  rep.summary_extras.push_back({"limit_distance", cell(probe.limit_distance)});
  if (const auto expected = cx.param("expected_rate")) {
    rep.max_deviation = std::abs(probe.decay_rate - *expected);
    require(rep, rep.max_deviation <= cx.tol("rate"),
            "decay rate " + fmt(probe.decay_rate) + ", expected " + fmt(*expected));
  } else {
    for (std::size_t k = 1; k < probe.distances.size(); ++k) {
      const double rise = probe.distances[k] - probe.distances[k - 1];
      rep.max_deviation = std::max(rep.max_deviation, rise);
      require(rep, rise <= 1e-9, "distance increases at t = " + fmt(probe.times[k]));
    }
  }
}

void conjugate_scan_experiment(const Context& cx, ExperimentReport& rep) {
  rep.columns = {"v_index", "first_conjugate_time", "zero_count", "tangential_first", "truncated"};
  const auto vs = cx.vectors();
  const double T = cx.param("T", 10.0);
  const double dt = cx.param("dt", 0.05);
  const auto scans = conjugate_scans(cx.spec, vs, T, dt, cx.jobs);
  std::optional<double> first;
  std::vector<Cell> roots;
  for (std::size_t i = 0; i < scans.size(); ++i) {
    const ConjugateScanResult& s = scans[i];
    const bool tangential = !s.zero_crossings.empty() && s.zero_crossings.front().tangential;
    rep.rows.push_back({cell(i), cell(s.first_conjugate_time), cell(s.zero_crossings.size()),
                        s.first_conjugate_time ? Cell{tangential} : Cell{}, cell(s.truncated)});
    if (s.truncated) rep.warnings.push_back("v " + std::to_string(i) + ": chart ends before T; partial scan");
    if (s.first_conjugate_time && (!first || *s.first_conjugate_time < *first)) first = s.first_conjugate_time;
    for (const ConjugateRoot& z : s.zero_crossings) {
      rep.max_deviation = std::max(rep.max_deviation, std::abs(z.det));
      require(rep, std::abs(z.det) <= 1e-8, "v " + std::to_string(i) + ": refined root has |det A| = " + fmt(std::abs(z.det)));
    }
  }
  rep.summary_extras.push_back({"first_conjugate_time", cell(first)});
  if (const auto expected = cx.param("expected_first_time")) {
    const double dev = first ? std::abs(*first - *expected) : std::numeric_limits<double>::infinity();
    rep.max_deviation = std::max(rep.max_deviation, dev);
    require(rep, dev <= cx.tol("first_time"),
            "first conjugate time " + (first ? fmt(*first) : std::string("none")) + ", expected " + fmt(*expected));
  }
}

void datri_experiment(const Context& cx, ExperimentReport& rep) {
  rep.columns = {"v_index", "t", "det_A_v", "det_A_minus_v", "asymmetry"};
  const auto vs = cx.vectors();
  const std::vector<double> times = cx.times({0.5, 1, 2});
  const DAtriReport d = datri_check(cx.spec, vs, times, cx.jobs);
  std::size_t used = 0;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (std::find(d.excluded.begin(), d.excluded.end(), static_cast<int>(i)) != d.excluded.end()) continue;
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double a = d.det_forward[used][k], b = d.det_reverse[used][k];
      rep.rows.push_back({cell(i), cell(times[k]), cell(a), cell(b), cell(std::abs(a - b))});
    }
    ++used;
  }
  rep.warnings.insert(rep.warnings.end(), d.warnings.begin(), d.warnings.end());
  const bool harmonic = d.harmonic_spread <= cx.tol("spread");
  rep.max_deviation = d.max_asymmetry;
  rep.summary_extras.push_back({"max_asymmetry", cell(d.max_asymmetry)});
  rep.summary_extras.push_back({"harmonic_spread", cell(d.harmonic_spread)});
  rep.summary_extras.push_back({"harmonic", Cell{harmonic}});
  rep.summary_extras.push_back({"samples", cell(d.samples)});
  rep.summary_extras.push_back({"excluded", cell(d.excluded.size())});
  require(rep, d.samples > 0, "every vector was excluded");
  require(rep, d.max_asymmetry <= cx.tol("asymmetry"),
          "det A_v(t) != det A_{-v}(t): max deviation " + fmt(d.max_asymmetry));
  if (cx.param("require_harmonic", 0.0) != 0.0)
    require(rep, harmonic, "det A_v(t) depends on v: spread " + fmt(d.harmonic_spread));
}

void sl2_verify_experiment(const Context& cx, ExperimentReport& rep) {
  if (cx.spec.kind() != ModelKind::Sl2r)
    throw Error(ErrorKind::Config, "sl2-verify: requires manifold model 'sl2r'");
  rep.columns = {"check", "expected", "computed", "deviation", "ok"};
  const double a = cx.spec.param("a"), b = cx.spec.param("b");
  const double t_coord = cx.param("t_coord", 0.0);
  auto add = [&](const std::string& name, double expected, double computed, double tol) {
    const double dev = std::abs(expected - computed);
    const bool ok = dev <= tol;
    rep.rows.push_back({Cell{name}, cell(expected), cell(computed), cell(dev), Cell{ok}});
    rep.max_deviation = std::max(rep.max_deviation, dev);
    require(rep, ok, name + ": expected " + fmt(expected) + ", computed " + fmt(computed));
  };

  const double period = 2.0 * M_PI / std::sqrt(b);
  add("u_system_sup_error", 0.0, sl2_system_check(a, b, t_coord, period).sup_error, cx.tol("u_system"));

  ChartPoint origin = Vec::Zero(3);
  origin[0] = t_coord;
  const TangentVector up = unit_vector(cx.spec, origin, Vec::Unit(3, 2));
  const ConjugateScanResult scan = conjugate_scan(cx.spec, up, period + 2.0, 0.05);
  add("first_conjugate_time", period, scan.first_conjugate_time.value_or(NAN), cx.tol("conjugate_time"));
  rep.summary_extras.push_back({"geometric_conjugate_time", cell(sl2_geometric_conjugate_time(b))});

  // Frame V1 = ∂_t, V2 = ∂_x - sqrt(2b) e^{-t} ∂_y, V3 = ∂_y.
  const CurvatureData c = curvature_at(cx.spec, origin);
  const Mat g = c.metric();
  const Vec v1 = Vec::Unit(3, 0), v3 = Vec::Unit(3, 2);
  const Vec v2 = Vec::Unit(3, 1) - std::sqrt(2.0 * b) * std::exp(-t_coord) * Vec::Unit(3, 2);
  auto coefficient = [&](const Vec& x) { return inner(g, c.apply(x, v3, v3), x) / inner(g, x, x); };
  add("R(V1,V3)V3/V1", b / 2.0, coefficient(v1), cx.tol("curvature"));
  add("R(V2,V3)V3/V2", -b / 2.0, coefficient(v2), cx.tol("curvature"));
}

using Runner = void (*)(const Context&, ExperimentReport&);

Runner runner_for(const std::string& name) {
  static const std::map<std::string, Runner> table = {
      {"curvature-check", curvature_check},
      {"jacobi", jacobi_experiment},
      {"stable-tensor", stable_tensor_experiment},
      {"profile", profile_experiment},
      {"flow-scan", flow_scan_experiment},
      {"reversibility-scan", reversibility_experiment},
      {"busemann", busemann_experiment},
      {"leaf-probe", leaf_probe_experiment},
      {"conjugate-scan", conjugate_scan_experiment},
      {"datri-check", datri_experiment},
      {"sl2-verify", sl2_verify_experiment},
  };
  return table.at(name);
}

// ---------------------------------------------------------------------------------------
// Serialization

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_field(const Cell& c) {
  struct Visitor {
    std::string operator()(std::monostate) const { return ""; }
    std::string operator()(std::int64_t x) const { return std::to_string(x); }
    std::string operator()(double x) const { return format_real(x); }
    std::string operator()(bool x) const { return x ? "true" : "false"; }
    std::string operator()(const std::string& s) const {
      if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
      std::string out = "\"";
      for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
      }
      return out + "\"";
    }
  };
  return std::visit(Visitor{}, c);
}

ojson json_value(const Cell& c) {
  struct Visitor {
    ojson operator()(std::monostate) const { return nullptr; }
    ojson operator()(std::int64_t x) const { return x; }
    ojson operator()(double x) const { return x; }
    ojson operator()(bool x) const { return x; }
    ojson operator()(const std::string& s) const { return s; }
  };
  return std::visit(Visitor{}, c);
}

}  // namespace

const std::vector<ExperimentInfo>& experiments() { return catalogue(); }

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  const ConfigReader rd(source);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorKind::Config, source + ":" + std::to_string(e.mark.line + 1) + ": syntax: " + e.msg);
  }
  if (!root.IsMap()) rd.fail(root, "<document>", "expected a mapping at the top level");
  rd.only_keys(root, "", {"manifold", "experiment", "sampling", "parameters", "output"});

  ExperimentConfig c;
  c.source = source;
  if (!root["manifold"]) rd.fail(root, "manifold", "required field missing");
  if (!root["experiment"]) rd.fail(root, "experiment", "required field missing");
  c.manifold = rd.model(root["manifold"], "manifold");
  c.experiment = rd.text(root["experiment"], "experiment");
  const ExperimentInfo* info = find_experiment(c.experiment);
  if (!info) rd.fail(root["experiment"], "experiment", "unknown experiment '" + c.experiment + "'");

  std::optional<ManifoldSpec> spec;
  try {
    spec = make_model(c.manifold);
  } catch (const Error& e) {
    rd.fail(root["manifold"], "manifold", e.what());
  }
  const int n = spec->dimension();

  if (const YAML::Node s = root["sampling"]) {
    rd.only_keys(s, "sampling", {"seed", "count", "time_grid", "tolerances", "anchor", "vector",
                                 "axis", "min_axis", "min_curved_share"});
    if (s["seed"]) {
      const long long seed = rd.integer(s["seed"], "sampling.seed");
      if (seed < 0) rd.fail(s["seed"], "sampling.seed", "must be >= 0");
      c.seed = static_cast<std::uint64_t>(seed);
    }
    if (s["count"]) {
      const long long count = rd.integer(s["count"], "sampling.count");
      if (count < 1 || count > 100000) rd.fail(s["count"], "sampling.count", "must be in [1, 100000]");
      c.count = static_cast<int>(count);
    }
    if (s["time_grid"]) {
      c.time_grid = rd.reals(s["time_grid"], "sampling.time_grid");
      for (std::size_t i = 0; i < c.time_grid.size(); ++i)
        if (c.time_grid[i] < 0.0)
          rd.fail(s["time_grid"][i], "sampling.time_grid[" + std::to_string(i) + "]", "times must be >= 0");
    }
    if (const YAML::Node t = s["tolerances"]) {
      if (!t.IsMap()) rd.fail(t, "sampling.tolerances", "expected a mapping");
      for (const auto& kv : t) {
        const std::string key = kv.first.as<std::string>();
        const std::string field = "sampling.tolerances." + key;
        const bool known = std::any_of(info->tolerances.begin(), info->tolerances.end(),
                                       [&](const auto& p) { return p.first == key; });
        if (!known) rd.fail(kv.first, field, "unknown tolerance for experiment '" + c.experiment + "'");
        const double v = rd.real(kv.second, field);
        if (!(v > 0.0)) rd.fail(kv.second, field, "tolerance must be positive");
        c.tolerances[key] = v;
      }
    }
    for (const char* key : {"anchor", "vector"}) {
      if (!s[key]) continue;
      const std::string field = std::string("sampling.") + key;
      std::vector<double> xs = rd.reals(s[key], field);
      if (static_cast<int>(xs.size()) != n)
        rd.fail(s[key], field, "expected " + std::to_string(n) + " components");
      (std::string(key) == "anchor" ? c.anchor : c.vector) = std::move(xs);
    }
    if (c.anchor && !spec->in_domain(Eigen::Map<const Vec>(c.anchor->data(), n)))
      rd.fail(s["anchor"], "sampling.anchor", "point outside the chart");
    if (c.vector && Eigen::Map<const Vec>(c.vector->data(), n).norm() == 0.0)
      rd.fail(s["vector"], "sampling.vector", "must be non-zero");
    if (s["axis"]) {
      const long long axis = rd.integer(s["axis"], "sampling.axis");
      if (axis < 0 || axis >= n) rd.fail(s["axis"], "sampling.axis", "must be a coordinate index below " + std::to_string(n));
      c.axis = static_cast<int>(axis);
    }
    if (s["min_axis"]) {
      c.min_axis = rd.real(s["min_axis"], "sampling.min_axis");
      if (c.min_axis < 0.0 || c.min_axis >= 1.0) rd.fail(s["min_axis"], "sampling.min_axis", "must be in [0, 1)");
    }
    if (s["min_curved_share"]) {
      c.min_curved_share = rd.real(s["min_curved_share"], "sampling.min_curved_share");
      if (*c.min_curved_share < 0.0 || *c.min_curved_share >= 1.0)
        rd.fail(s["min_curved_share"], "sampling.min_curved_share", "must be in [0, 1)");
    }
  }

  if (const YAML::Node p = root["parameters"]) {
    if (!p.IsMap()) rd.fail(p, "parameters", "expected a mapping");
    for (const auto& kv : p) {
      const std::string key = kv.first.as<std::string>();
      const std::string field = "parameters." + key;
      if (std::find(info->parameters.begin(), info->parameters.end(), key) == info->parameters.end())
        rd.fail(kv.first, field, "not a parameter of experiment '" + c.experiment + "'");
      c.parameters[key] = rd.real(kv.second, field);
    }
    for (const char* positive : {"T", "dt", "T0", "T_max", "r0", "r_max", "spread", "eps_rank"})
      if (auto it = c.parameters.find(positive); it != c.parameters.end() && !(it->second > 0.0))
        rd.fail(p[positive], std::string("parameters.") + positive, "must be positive");
  }

  if (const YAML::Node o = root["output"]) {
    rd.only_keys(o, "output", {"path", "format"});
    if (o["path"]) c.output_path = rd.text(o["path"], "output.path");
    if (o["format"]) {
      c.format = rd.text(o["format"], "output.format");
      if (c.format != "csv" && c.format != "json") rd.fail(o["format"], "output.format", "must be 'csv' or 'json'");
    }
  }
  if (c.output_path.empty()) c.output_path = c.experiment + "." + c.format;
  c.canonical = canonical_json(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

ExperimentReport run_experiment(const ExperimentConfig& config, int jobs) {
  const ExperimentInfo* info = find_experiment(config.experiment);
  if (!info) throw Error(ErrorKind::Config, "unknown experiment '" + config.experiment + "'");
  const Context cx{config, *info, make_model(config.manifold), std::max(1, jobs)};
  ExperimentReport rep;
  rep.experiment = config.experiment;
  rep.config_canonical = config.canonical.empty() ? canonical_json(config) : config.canonical;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016" PRIx64, fnv1a64(rep.config_canonical));
  rep.config_hash = hash;
  runner_for(config.experiment)(cx, rep);
  rep.pass = rep.failures.empty();
  return rep;
}

std::string report_csv(const ExperimentReport& report) {
  std::string out;
  for (std::size_t i = 0; i < report.columns.size(); ++i) {
    if (i) out += ',';
    out += report.columns[i];
  }
  out += '\n';
  for (const auto& row : report.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv_field(row[i]);
    }
    out += '\n';
  }
  return out;
}

std::string report_json(const ExperimentReport& report) {
  ojson j;
  j["schema_version"] = kReportSchemaVersion;
  j["experiment"] = report.experiment;
  j["config_echo"] = ojson::parse(report.config_canonical);
  j["columns"] = report.columns;
  ojson rows = ojson::array();
  for (const auto& row : report.rows) {
    ojson r = ojson::object();
    for (std::size_t i = 0; i < row.size() && i < report.columns.size(); ++i)
      r[report.columns[i]] = json_value(row[i]);
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  ojson summary;
  summary["pass"] = report.pass;
  summary["max_deviation"] = report.max_deviation;
  for (const auto& [k, v] : report.summary_extras) summary[k] = json_value(v);
  summary["failures"] = report.failures;
  summary["warnings"] = report.warnings;
  j["summary"] = std::move(summary);
  j["provenance"] = {{"tool", "horolab"}, {"version", version()}, {"config_hash", report.config_hash}};
  return j.dump(2) + "\n";
}

std::string write_report(const ExperimentReport& report, const ExperimentConfig& config,
                         const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::path target = config.output_path;
  if (!out_dir.empty()) target = fs::path(out_dir) / target.filename();
  std::error_code ec;
  if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create directory '" + target.parent_path().string() + "': " + ec.message());
  std::ofstream out(target, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + target.string() + "'");
  out << (config.format == "csv" ? report_csv(report) : report_json(report));
  out.close();
  if (!out) throw Error(ErrorKind::Io, "write failed for '" + target.string() + "'");
  return target.string();
}

}  // namespace horolab
