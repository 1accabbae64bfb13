#include "horolab/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "horolab/error.hpp"
#include "horolab/sampling.hpp"

namespace horolab {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParams: return "invalid-params";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Singular: return "singular";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::StepUnderflow: return "step-underflow";
    case ErrorKind::BlowUp: return "blow-up";
    case ErrorKind::ModelViolation: return "model-violation";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Euclidean: return "euclidean";
    case ModelKind::Hyperbolic: return "hyperbolic";
    case ModelKind::Product: return "product";
    case ModelKind::Sl2r: return "sl2r";
    case ModelKind::Heisenberg: return "heisenberg";
    case ModelKind::Custom: return "custom";
  }
  return "unknown";
}

struct ManifoldSpec::Data {
  int n = 0;
  ModelKind kind = ModelKind::Custom;
  std::string tag;
  std::map<std::string, double> params;
  MetricFunction metric;
  JetFunction jet;  // empty when no analytic derivatives exist
  DomainPredicate domain;
  DerivativeMode mode = DerivativeMode::FiniteDifference;
  double step = 1e-5;
  double second_step = 1e-4;
  std::optional<CurvatureBounds> bounds;
  std::optional<ManifoldSpec> left, right;
};

ManifoldSpec::ManifoldSpec(std::shared_ptr<const Data> data) : d_(std::move(data)) {}

int ManifoldSpec::dimension() const { return d_->n; }
ModelKind ManifoldSpec::kind() const { return d_->kind; }
std::string ManifoldSpec::tag() const { return d_->tag; }
DerivativeMode ManifoldSpec::derivative_mode() const { return d_->mode; }
double ManifoldSpec::fd_step() const { return d_->step; }
double ManifoldSpec::fd_step_second() const { return d_->second_step; }
const std::optional<CurvatureBounds>& ManifoldSpec::curvature_bounds() const {
  return d_->bounds;
}
bool ManifoldSpec::is_product() const { return d_->kind == ModelKind::Product; }

bool ManifoldSpec::has_analytic_derivatives() const {
  if (is_product()) return left().has_analytic_derivatives() && right().has_analytic_derivatives();
  return static_cast<bool>(d_->jet);
}

const ManifoldSpec& ManifoldSpec::left() const {
  if (!d_->left) throw Error(ErrorKind::InvalidParams, "left(): not a product manifold");
  return *d_->left;
}

const ManifoldSpec& ManifoldSpec::right() const {
  if (!d_->right) throw Error(ErrorKind::InvalidParams, "right(): not a product manifold");
  return *d_->right;
}

double ManifoldSpec::param(const std::string& name) const {
  auto it = d_->params.find(name);
  if (it == d_->params.end())
    throw Error(ErrorKind::InvalidParams, "model " + d_->tag + " has no parameter '" + name + "'");
  return it->second;
}

bool ManifoldSpec::in_domain(const ChartPoint& p) const {
  if (p.size() != d_->n || !p.allFinite()) return false;
  return !d_->domain || d_->domain(p);
}

Mat ManifoldSpec::metric(const ChartPoint& p) const {
  if (!in_domain(p)) {
    std::ostringstream os;
    os << "point (" << p.transpose() << ") outside the chart of " << d_->tag;
    throw Error(ErrorKind::Domain, os.str());
  }
  return d_->metric(p);
}

namespace {

MetricJet finite_difference_jet(const ManifoldSpec& spec, const ChartPoint& p) {
  const int n = spec.dimension();
  const double h = spec.fd_step();
  const double h2 = spec.fd_step_second();
  MetricJet jet;
  jet.g = spec.metric(p);
  jet.dg.assign(n, Mat::Zero(n, n));
  jet.d2g.assign(n, std::vector<Mat>(n, Mat::Zero(n, n)));

  auto eval = [&](const ChartPoint& q) {
    if (!spec.in_domain(q))
      throw Error(ErrorKind::Domain, "finite-difference stencil leaves the chart of " + spec.tag());
    return spec.metric(q);
  };

  for (int k = 0; k < n; ++k) {
    ChartPoint plus = p, minus = p;
    plus[k] += h;
    minus[k] -= h;
    jet.dg[k] = (eval(plus) - eval(minus)) / (2.0 * h);
  }
  // Nested central differences: D_k D_l with step h2 in each direction.
  for (int k = 0; k < n; ++k) {
    for (int l = k; l < n; ++l) {
      ChartPoint pp = p, pm = p, mp = p, mm = p;
      pp[k] += h2; pp[l] += h2;
      pm[k] += h2; pm[l] -= h2;
      mp[k] -= h2; mp[l] += h2;
      mm[k] -= h2; mm[l] -= h2;
      Mat d = (eval(pp) - eval(pm) - eval(mp) + eval(mm)) / (4.0 * h2 * h2);
      jet.d2g[k][l] = d;
      jet.d2g[l][k] = d;
    }
  }
  return jet;
}

MetricJet block_jet(const ManifoldSpec& spec, const ChartPoint& p, DerivativeMode mode) {
  const ManifoldSpec& a = spec.left();
  const ManifoldSpec& b = spec.right();
  const int na = a.dimension(), nb = b.dimension(), n = na + nb;
  MetricJet ja = a.jet(p.head(na), mode);
  MetricJet jb = b.jet(p.tail(nb), mode);
  MetricJet jet;
  jet.g = Mat::Zero(n, n);
  jet.g.topLeftCorner(na, na) = ja.g;
  jet.g.bottomRightCorner(nb, nb) = jb.g;
  jet.dg.assign(n, Mat::Zero(n, n));
  jet.d2g.assign(n, std::vector<Mat>(n, Mat::Zero(n, n)));
  for (int k = 0; k < na; ++k) {
    jet.dg[k].topLeftCorner(na, na) = ja.dg[k];
    for (int l = 0; l < na; ++l) jet.d2g[k][l].topLeftCorner(na, na) = ja.d2g[k][l];
  }
  for (int k = 0; k < nb; ++k) {
    jet.dg[na + k].bottomRightCorner(nb, nb) = jb.dg[k];
    for (int l = 0; l < nb; ++l) jet.d2g[na + k][na + l].bottomRightCorner(nb, nb) = jb.d2g[k][l];
  }
  return jet;
}

}  // namespace

MetricJet ManifoldSpec::jet(const ChartPoint& p) const { return jet(p, d_->mode); }

MetricJet ManifoldSpec::jet(const ChartPoint& p, DerivativeMode mode) const {
  if (is_product()) return block_jet(*this, p, mode);
  if (mode == DerivativeMode::Analytic && d_->jet) {
    if (!in_domain(p)) metric(p);  // throws with the standard message
    return d_->jet(p);
  }
  return finite_difference_jet(*this, p);
}

ManifoldSpec ManifoldSpec::with_derivative_mode(DerivativeMode mode, double step,
                                                double second_step) const {
  if (step <= 0.0 || second_step <= 0.0)
    throw Error(ErrorKind::InvalidParams, "finite-difference steps must be positive");
  auto copy = std::make_shared<Data>(*d_);
  copy->mode = (mode == DerivativeMode::Analytic && !d_->jet && !is_product())
                   ? DerivativeMode::FiniteDifference
                   : mode;
  copy->step = step;
  copy->second_step = second_step;
  if (is_product()) {
    copy->left = left().with_derivative_mode(mode, step, second_step);
    copy->right = right().with_derivative_mode(mode, step, second_step);
  }
  return ManifoldSpec(std::move(copy));
}

namespace {

std::string format_tag(const std::string& name, const std::map<std::string, double>& params) {
  std::ostringstream os;
  os << name << "(";
  bool first = true;
  for (const auto& [key, value] : params) {
    if (!first) os << ",";
    os << key << "=" << value;
    first = false;
  }
  os << ")";
  return os.str();
}

MetricJet zero_jet(int n) {
  MetricJet jet;
  jet.g = Mat::Identity(n, n);
  jet.dg.assign(n, Mat::Zero(n, n));
  jet.d2g.assign(n, std::vector<Mat>(n, Mat::Zero(n, n)));
  return jet;
}

}  // namespace

ManifoldSpec make_euclidean(int n) {
  if (n < 1) throw Error(ErrorKind::InvalidParams, "euclidean: dimension n must be >= 1");
  auto d = std::make_shared<ManifoldSpec::Data>();
  d->n = n;
  d->kind = ModelKind::Euclidean;
  d->params = {{"n", static_cast<double>(n)}};
  d->tag = format_tag("euclidean", d->params);
  d->metric = [n](const ChartPoint&) { return Mat::Identity(n, n); };
  d->jet = [n](const ChartPoint&) { return zero_jet(n); };
  d->mode = DerivativeMode::Analytic;
  d->bounds = CurvatureBounds{0.0, 0.0};
  return ManifoldSpec(std::move(d));
}

ManifoldSpec make_hyperbolic(int n, double k) {
  if (n < 2) throw Error(ErrorKind::InvalidParams, "hyperbolic: dimension n must be >= 2");
  if (!(k > 0.0) || !std::isfinite(k))
    throw Error(ErrorKind::InvalidParams, "hyperbolic: curvature scale k must satisfy k > 0");
  auto d = std::make_shared<ManifoldSpec::Data>();
  d->n = n;
  d->kind = ModelKind::Hyperbolic;
  d->params = {{"k", k}, {"n", static_cast<double>(n)}};
  d->tag = format_tag("hyperbolic", d->params);
  const double k2 = k * k;
  d->metric = [n, k2](const ChartPoint& p) {
    const double y = p[n - 1];
    return Mat(Mat::Identity(n, n) / (k2 * y * y));
  };
  d->jet = [n, k2](const ChartPoint& p) {
    const double y = p[n - 1];
    MetricJet jet;
    jet.g = Mat::Identity(n, n) / (k2 * y * y);
    jet.dg.assign(n, Mat::Zero(n, n));
    jet.d2g.assign(n, std::vector<Mat>(n, Mat::Zero(n, n)));
    jet.dg[n - 1] = -2.0 * Mat::Identity(n, n) / (k2 * y * y * y);
    jet.d2g[n - 1][n - 1] = 6.0 * Mat::Identity(n, n) / (k2 * y * y * y * y);
    return jet;
  };
  // Verified range of the half-space chart; beyond it trajectories are truncated.
  d->domain = [n](const ChartPoint& p) {
    const double y = p[n - 1];
    return y >= 1e-100 && y <= 1e100 && p.head(n - 1).cwiseAbs().maxCoeff() <= 1e100;
  };
  d->mode = DerivativeMode::Analytic;
  d->bounds = CurvatureBounds{k2, 0.0};
  return ManifoldSpec(std::move(d));
}

ManifoldSpec make_product(const ManifoldSpec& left, const ManifoldSpec& right) {
  auto d = std::make_shared<ManifoldSpec::Data>();
  const int na = left.dimension(), nb = right.dimension();
  d->n = na + nb;
  d->kind = ModelKind::Product;
  d->tag = "product(" + left.tag() + "," + right.tag() + ")";
  d->left = left;
  d->right = right;
  d->metric = [left, right, na, nb](const ChartPoint& p) {
    Mat g = Mat::Zero(na + nb, na + nb);
    g.topLeftCorner(na, na) = left.metric(p.head(na));
    g.bottomRightCorner(nb, nb) = right.metric(p.tail(nb));
    return g;
  };
  d->domain = [left, right, na, nb](const ChartPoint& p) {
    return left.in_domain(p.head(na)) && right.in_domain(p.tail(nb));
  };
  d->mode = (left.derivative_mode() == DerivativeMode::Analytic &&
             right.derivative_mode() == DerivativeMode::Analytic)
                ? DerivativeMode::Analytic
                : DerivativeMode::FiniteDifference;
  if (left.curvature_bounds() && right.curvature_bounds()) {
    d->bounds = CurvatureBounds{
        std::max(left.curvature_bounds()->r0, right.curvature_bounds()->r0),
        std::max(left.curvature_bounds()->r0_prime, right.curvature_bounds()->r0_prime)};
  }
  return ManifoldSpec(std::move(d));
}

ManifoldSpec make_sl2r(double a, double b) {
  if (!(b > 0.0)) throw Error(ErrorKind::InvalidParams, "sl2r: requires b > 0");
  if (!(a + b < 0.0)) throw Error(ErrorKind::InvalidParams, "sl2r: requires a + b < 0");
  auto d = std::make_shared<ManifoldSpec::Data>();
  d->n = 3;
  d->kind = ModelKind::Sl2r;
  d->params = {{"a", a}, {"b", b}};
  d->tag = format_tag("sl2r", d->params);
  const double c = std::abs(a + b);
  const double s = std::sqrt(2.0 * b);
  // Coordinates (t, x, y).
  d->metric = [c, s, b](const ChartPoint& p) {
    const double e1 = std::exp(-p[0]);
    Mat g = Mat::Zero(3, 3);
    g(0, 0) = 1.0 / c;
    g(1, 1) = (c + 2.0 * b) * e1 * e1;
    g(1, 2) = g(2, 1) = s * e1;
    g(2, 2) = 1.0;
    return g;
  };
  d->jet = [c, s, b](const ChartPoint& p) {
    const double e1 = std::exp(-p[0]);
    MetricJet jet;
    jet.g = Mat::Zero(3, 3);
    jet.g(0, 0) = 1.0 / c;
    jet.g(1, 1) = (c + 2.0 * b) * e1 * e1;
    jet.g(1, 2) = jet.g(2, 1) = s * e1;
    jet.g(2, 2) = 1.0;
    jet.dg.assign(3, Mat::Zero(3, 3));
    jet.d2g.assign(3, std::vector<Mat>(3, Mat::Zero(3, 3)));
    jet.dg[0](1, 1) = -2.0 * (c + 2.0 * b) * e1 * e1;
    jet.dg[0](1, 2) = jet.dg[0](2, 1) = -s * e1;
    jet.d2g[0][0](1, 1) = 4.0 * (c + 2.0 * b) * e1 * e1;
    jet.d2g[0][0](1, 2) = jet.d2g[0][0](2, 1) = s * e1;
    return jet;
  };
  d->domain = [](const ChartPoint& p) {
    return std::abs(p[0]) <= 300.0 && std::abs(p[1]) <= 1e100 && std::abs(p[2]) <= 1e100;
  };
  d->mode = DerivativeMode::Analytic;
  return ManifoldSpec(std::move(d));
}

ManifoldSpec make_heisenberg(double b) {
  if (!(b > 0.0)) throw Error(ErrorKind::InvalidParams, "heisenberg: requires b > 0");
  auto d = std::make_shared<ManifoldSpec::Data>();
  d->n = 3;
  d->kind = ModelKind::Heisenberg;
  d->params = {{"b", b}};
  d->tag = format_tag("heisenberg", d->params);
  // Coordinates (x, y, z); y is the central direction.
  d->metric = [b](const ChartPoint& p) {
    const double x = p[0];
    Mat g = Mat::Zero(3, 3);
    g(0, 0) = 1.0 / b;
    g(1, 1) = 1.0;
    g(1, 2) = g(2, 1) = -x;
    g(2, 2) = 1.0 + x * x;
    return g;
  };
  d->jet = [b](const ChartPoint& p) {
    const double x = p[0];
    MetricJet jet;
    jet.g = Mat::Zero(3, 3);
    jet.g(0, 0) = 1.0 / b;
    jet.g(1, 1) = 1.0;
    jet.g(1, 2) = jet.g(2, 1) = -x;
    jet.g(2, 2) = 1.0 + x * x;
    jet.dg.assign(3, Mat::Zero(3, 3));
    jet.d2g.assign(3, std::vector<Mat>(3, Mat::Zero(3, 3)));
    jet.dg[0](1, 2) = jet.dg[0](2, 1) = -1.0;
    jet.dg[0](2, 2) = 2.0 * x;
    jet.d2g[0][0](2, 2) = 2.0;
    return jet;
  };
  d->domain = [](const ChartPoint& p) { return p.cwiseAbs().maxCoeff() <= 1e100; };
  d->mode = DerivativeMode::Analytic;
  return ManifoldSpec(std::move(d));
}

ManifoldSpec make_custom(int n, MetricFunction metric, DomainPredicate domain,
                         std::optional<CurvatureBounds> bounds) {
  if (n < 1) throw Error(ErrorKind::InvalidParams, "custom: dimension n must be >= 1");
  if (!metric) throw Error(ErrorKind::InvalidParams, "custom: metric function is empty");
  auto d = std::make_shared<ManifoldSpec::Data>();
  d->n = n;
  d->kind = ModelKind::Custom;
  d->params = {{"n", static_cast<double>(n)}};
  d->tag = format_tag("custom", d->params);
  d->metric = std::move(metric);
  d->domain = std::move(domain);
  d->mode = DerivativeMode::FiniteDifference;
  d->bounds = bounds;
  return ManifoldSpec(std::move(d));
}

ManifoldSpec make_bump_metric(int n, double amplitude, double width, std::uint64_t seed) {
  if (!(width > 0.0)) throw Error(ErrorKind::InvalidParams, "bump: width must be > 0");
  if (!(amplitude > -1.0)) throw Error(ErrorKind::InvalidParams, "bump: amplitude must be > -1");
  CounterRng rng(seed);
  Vec centre(n);
  for (int i = 0; i < n; ++i) centre[i] = rng.uniform(-1.0, 1.0);
  auto metric = [n, amplitude, width, centre](const ChartPoint& p) {
    const double r2 = (p - centre).squaredNorm() / (width * width);
    return Mat((1.0 + amplitude * std::exp(-r2)) * Mat::Identity(n, n));
  };
  auto domain = [](const ChartPoint& p) { return p.cwiseAbs().maxCoeff() <= 1e6; };
  auto d = std::make_shared<ManifoldSpec::Data>();
  d->n = n;
  d->kind = ModelKind::Custom;
  d->params = {{"amplitude", amplitude},
               {"n", static_cast<double>(n)},
               {"seed", static_cast<double>(seed)},
               {"width", width}};
  d->tag = format_tag("bump", d->params);
  d->metric = metric;
  d->domain = domain;
  d->mode = DerivativeMode::FiniteDifference;
  return ManifoldSpec(std::move(d));
}

ManifoldSpec make_model(const ModelDescriptor& desc) {
  auto get = [&](const std::string& key, std::optional<double> fallback = std::nullopt) {
    auto it = desc.params.find(key);
    if (it != desc.params.end()) return it->second;
    if (fallback) return *fallback;
    throw Error(ErrorKind::InvalidParams, "model '" + desc.tag + "' requires parameter '" + key + "'");
  };
  auto as_int = [](double x, const std::string& what) {
    if (x != std::floor(x)) throw Error(ErrorKind::InvalidParams, what + " must be an integer");
    return static_cast<int>(x);
  };
  if (desc.tag == "euclidean") return make_euclidean(as_int(get("n", 3.0), "euclidean: n"));
  if (desc.tag == "hyperbolic")
    return make_hyperbolic(as_int(get("n", 3.0), "hyperbolic: n"), get("k", 1.0));
  if (desc.tag == "sl2r") return make_sl2r(get("a"), get("b"));
  if (desc.tag == "heisenberg") return make_heisenberg(get("b", 1.0));
  if (desc.tag == "bump")
    return make_bump_metric(as_int(get("n", 3.0), "bump: n"), get("amplitude", 0.1),
                            get("width", 0.5),
                            static_cast<std::uint64_t>(get("seed", 0.0)));
  if (desc.tag == "product") {
    if (desc.factors.size() != 2)
      throw Error(ErrorKind::InvalidParams, "product: requires exactly two factors");
    return make_product(make_model(desc.factors[0]), make_model(desc.factors[1]));
  }
  throw Error(ErrorKind::InvalidParams, "unknown model tag '" + desc.tag + "'");
}

// ---------------------------------------------------------------------------------

CurvatureData::CurvatureData(int n, ChartPoint at, Mat metric)
    : n_(n), at_(std::move(at)), g_(std::move(metric)),
      gamma_(static_cast<std::size_t>(n * n * n), 0.0),
      riemann_(static_cast<std::size_t>(n * n * n * n), 0.0) {}

Vec CurvatureData::apply(const Vec& x, const Vec& y, const Vec& z) const {
  Vec out = Vec::Zero(n_);
  for (int l = 0; l < n_; ++l) {
    double acc = 0.0;
    for (int i = 0; i < n_; ++i) {
      if (x[i] == 0.0) continue;
      for (int j = 0; j < n_; ++j) {
        if (y[j] == 0.0) continue;
        for (int k = 0; k < n_; ++k) acc += riemann(l, i, j, k) * x[i] * y[j] * z[k];
      }
    }
    out[l] = acc;
  }
  return out;
}

namespace {

Mat checked_inverse(const Mat& g, const ChartPoint& p) {
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().minCoeff() > 0.0)) {
    std::ostringstream os;
    os << "metric is not positive definite at (" << p.transpose() << ")";
    throw Error(ErrorKind::Singular, os.str());
  }
  return llt.solve(Mat::Identity(g.rows(), g.cols()));
}

// Christoffel symbols of the first kind: Γ_{l,ij} = ½(∂_i g_lj + ∂_j g_li - ∂_l g_ij).
inline double first_kind(const MetricJet& jet, int l, int i, int j) {
  return 0.5 * (jet.dg[i](l, j) + jet.dg[j](l, i) - jet.dg[l](i, j));
}

CurvatureData curvature_from_jet(const MetricJet& jet, const ChartPoint& p) {
  const int n = static_cast<int>(jet.g.rows());
  const Mat ginv = checked_inverse(jet.g, p);
  CurvatureData cd(n, p, jet.g);

  std::vector<double> first(static_cast<std::size_t>(n * n * n));
  auto F = [&](int l, int i, int j) -> double& { return first[(l * n + i) * n + j]; };
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) F(l, i, j) = first_kind(jet, l, i, j);

  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int l = 0; l < n; ++l) acc += ginv(k, l) * F(l, i, j);
        cd.christoffel(k, i, j) = acc;
      }

  // dgamma[m][k,i,j] = ∂_m Γ^k_ij = ∂_m g^{kl} Γ_{l,ij} + g^{kl} ∂_m Γ_{l,ij},
  // with ∂_m g^{-1} = -g^{-1} (∂_m g) g^{-1}.
  std::vector<double> dgamma(static_cast<std::size_t>(n * n * n * n), 0.0);
  auto DG = [&](int m, int k, int i, int j) -> double& {
    return dgamma[((m * n + k) * n + i) * n + j];
  };
  for (int m = 0; m < n; ++m) {
    const Mat dginv = -ginv * jet.dg[m] * ginv;
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          double acc = 0.0;
          for (int l = 0; l < n; ++l) {
            const double dfirst =
                0.5 * (jet.d2g[m][i](l, j) + jet.d2g[m][j](l, i) - jet.d2g[m][l](i, j));
            acc += dginv(k, l) * F(l, i, j) + ginv(k, l) * dfirst;
          }
          DG(m, k, i, j) = acc;
          DG(m, k, j, i) = acc;
        }
  }

  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double acc = DG(i, l, j, k) - DG(j, l, i, k);
          for (int m = 0; m < n; ++m)
            acc += cd.christoffel(l, i, m) * cd.christoffel(m, j, k) -
                   cd.christoffel(l, j, m) * cd.christoffel(m, i, k);
          cd.riemann(l, i, j, k) = acc;
        }
  return cd;
}

CurvatureData block_curvature(const ManifoldSpec& spec, const ChartPoint& p, DerivativeMode mode) {
  const int na = spec.left().dimension(), nb = spec.right().dimension(), n = na + nb;
  CurvatureData a = curvature_at(spec.left(), p.head(na), mode);
  CurvatureData b = curvature_at(spec.right(), p.tail(nb), mode);
  Mat g = Mat::Zero(n, n);
  g.topLeftCorner(na, na) = a.metric();
  g.bottomRightCorner(nb, nb) = b.metric();
  CurvatureData cd(n, p, g);
  for (int k = 0; k < na; ++k)
    for (int i = 0; i < na; ++i)
      for (int j = 0; j < na; ++j) {
        cd.christoffel(k, i, j) = a.christoffel(k, i, j);
        for (int l = 0; l < na; ++l) cd.riemann(k, i, j, l) = a.riemann(k, i, j, l);
      }
  for (int k = 0; k < nb; ++k)
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j) {
        cd.christoffel(na + k, na + i, na + j) = b.christoffel(k, i, j);
        for (int l = 0; l < nb; ++l)
          cd.riemann(na + k, na + i, na + j, na + l) = b.riemann(k, i, j, l);
      }
  return cd;
}

}  // namespace

std::vector<double> christoffel_at(const ManifoldSpec& spec, const ChartPoint& p) {
  const int n = spec.dimension();
  std::vector<double> gamma(static_cast<std::size_t>(n * n * n), 0.0);
  if (spec.is_product()) {
    const int na = spec.left().dimension(), nb = spec.right().dimension();
    const auto a = christoffel_at(spec.left(), p.head(na));
    const auto b = christoffel_at(spec.right(), p.tail(nb));
    for (int k = 0; k < na; ++k)
      for (int i = 0; i < na; ++i)
        for (int j = 0; j < na; ++j) gamma[(k * n + i) * n + j] = a[(k * na + i) * na + j];
    for (int k = 0; k < nb; ++k)
      for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j)
          gamma[((na + k) * n + na + i) * n + na + j] = b[(k * nb + i) * nb + j];
    return gamma;
  }
  if (spec.kind() == ModelKind::Euclidean) {
    if (!spec.in_domain(p)) spec.metric(p);
    return gamma;
  }

  MetricJet jet;
  if (spec.derivative_mode() == DerivativeMode::Analytic && spec.has_analytic_derivatives()) {
    jet = spec.jet(p, DerivativeMode::Analytic);
  } else {
    // First derivatives only.
    jet.g = spec.metric(p);
    jet.dg.assign(n, Mat::Zero(n, n));
    const double h = spec.fd_step();
    for (int k = 0; k < n; ++k) {
      ChartPoint plus = p, minus = p;
      plus[k] += h;
      minus[k] -= h;
      if (!spec.in_domain(plus) || !spec.in_domain(minus))
        throw Error(ErrorKind::Domain, "finite-difference stencil leaves the chart of " + spec.tag());
      jet.dg[k] = (spec.metric(plus) - spec.metric(minus)) / (2.0 * h);
    }
  }
  const Mat ginv = checked_inverse(jet.g, p);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double acc = 0.0;
        for (int l = 0; l < n; ++l) acc += ginv(k, l) * first_kind(jet, l, i, j);
        gamma[(k * n + i) * n + j] = acc;
        gamma[(k * n + j) * n + i] = acc;
      }
  return gamma;
}

CurvatureData curvature_at(const ManifoldSpec& spec, const ChartPoint& p) {
  return curvature_at(spec, p, spec.derivative_mode());
}

CurvatureData curvature_at(const ManifoldSpec& spec, const ChartPoint& p, DerivativeMode mode) {
  if (spec.is_product()) return block_curvature(spec, p, mode);
  return curvature_from_jet(spec.jet(p, mode), p);
}

Mat jacobi_operator(const CurvatureData& cd, const Vec& v, const Mat& frame,
                    double* raw_asymmetry) {
  const Mat& g = cd.metric();
  const double vv = inner(g, v, v);
  if (std::abs(vv - 1.0) > 1e-6) {
    std::ostringstream os;
    os << "jacobi_operator: v is not a unit vector (g(v,v) = " << vv << ")";
    throw Error(ErrorKind::InvalidParams, os.str());
  }
  const int m = static_cast<int>(frame.cols());
  Mat rv_images(frame.rows(), m);
  for (int a = 0; a < m; ++a) rv_images.col(a) = cd.apply(frame.col(a), v, v);
  Mat out = frame.transpose() * g * rv_images;  // out(b, a) = <R(e_a,v)v, e_b>
  out.transposeInPlace();
  if (raw_asymmetry) *raw_asymmetry = asymmetry(out);
  return symmetric_part(out);
}

Mat jacobi_operator(const ManifoldSpec& spec, const TangentVector& v, const Mat& frame,
                    double* raw_asymmetry) {
  return jacobi_operator(curvature_at(spec, v.base), v.components, frame, raw_asymmetry);
}

double sectional_curvature(const ManifoldSpec& spec, const ChartPoint& p, const Vec& u,
                           const Vec& w) {
  const CurvatureData cd = curvature_at(spec, p);
  const Mat& g = cd.metric();
  const double denom = inner(g, u, u) * inner(g, w, w) - std::pow(inner(g, u, w), 2);
  if (denom < 1e-14) throw Error(ErrorKind::Singular, "sectional_curvature: degenerate plane");
  return inner(g, cd.apply(u, w, w), u) / denom;
}

TangentVector unit_vector(const ManifoldSpec& spec, const ChartPoint& p, const Vec& components) {
  const Mat g = spec.metric(p);
  const double len = norm(g, components);
  if (!(len > 0.0) || !std::isfinite(len))
    throw Error(ErrorKind::InvalidParams, "unit_vector: zero or non-finite vector");
  TangentVector v{p, components / len};
  // One refinement pass so that |g(v,v) - 1| sits at roundoff level.
  v.components /= norm(g, v.components);
  return v;
}

Mat orthonormal_frame(const ManifoldSpec& spec, const TangentVector& v) {
  const int n = spec.dimension();
  const Mat g = spec.metric(v.base);
  const Vec& u = v.components;
  const double uu = norm(g, u);
  // Coordinate directions ordered by |cos angle| with v, most transverse first.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> cosine(n);
  for (int i = 0; i < n; ++i) cosine[i] = std::abs(g.row(i).dot(u)) / (std::sqrt(g(i, i)) * uu);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return cosine[a] < cosine[b]; });

  const Vec vhat = u / uu;
  Mat frame(n, n - 1);
  int filled = 0;
  for (int idx : order) {
    if (filled == n - 1) break;
    Vec e = Vec::Unit(n, idx);
    for (int pass = 0; pass < 2; ++pass) {
      e -= inner(g, e, vhat) * vhat;
      for (int a = 0; a < filled; ++a) e -= inner(g, e, frame.col(a)) * frame.col(a);
    }
    const double len = norm(g, e);
    if (len < 1e-8 * std::sqrt(g(idx, idx))) continue;
    frame.col(filled++) = e / len;
  }
  if (filled != n - 1) throw Error(ErrorKind::Singular, "orthonormal_frame: degenerate tangent space");
  return frame;
}

}  // namespace horolab
