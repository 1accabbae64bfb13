#include "horolab/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace horolab::ode {

namespace {

// Dormand-Prince RK5(4)7M tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Dense output (Shampine), as in Hairer's DOPRI5.
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

}  // namespace

bool DenseSolution::covers(double t) const {
  const double lo = std::min(t_begin(), t_end());
  const double hi = std::max(t_begin(), t_end());
  const double slack = 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
  return t >= lo - slack && t <= hi + slack;
}

Vec DenseSolution::operator()(double t) const {
  if (steps_.empty()) return y0_;
  const bool forward = steps_.front().h > 0.0;
  // First step whose end lies beyond t in the direction of integration.
  auto it = std::lower_bound(steps_.begin(), steps_.end(), t, [forward](const Step& s, double x) {
    const double end = s.t + s.h;
    return forward ? end < x : end > x;
  });
  if (it == steps_.end()) it = std::prev(steps_.end());
  const double theta = (t - it->t) / it->h;
  const double theta1 = 1.0 - theta;
  const Mat& r = it->coeff;
  return r.col(0) + theta * (r.col(1) + theta1 * (r.col(2) + theta * (r.col(3) + theta1 * r.col(4))));
}

std::vector<double> DenseSolution::nodes() const {
  std::vector<double> out;
  out.reserve(steps_.size() + 1);
  out.push_back(t0_);
  for (const Step& s : steps_) out.push_back(s.t + s.h);
  return out;
}

ErrorNorm rms_norm(double rtol, double atol) {
  return [rtol, atol](const Vec& y0, const Vec& y1, const Vec& err) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
      const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
      const double r = err[i] / sc;
      acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(err.size(), 1)));
  };
}

Result integrate(const Rhs& f, double t0, const Vec& y0, double t_end, const Options& opt,
                 const ErrorNorm& norm_in, const StepFilter& filter) {
  const ErrorNorm norm = norm_in ? norm_in : rms_norm(opt.rtol, opt.atol);
  const Eigen::Index dim = y0.size();
  Result res;
  res.solution = DenseSolution(t0, y0);
  res.t_stop = t0;
  res.y_stop = y0;
  if (t_end == t0) return res;

  const double dir = t_end > t0 ? 1.0 : -1.0;
  const double span = std::abs(t_end - t0);
  const double max_step = opt.max_step > 0.0 ? opt.max_step : span;

  Vec k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim), ytmp(dim), y1(dim), err(dim);
  if (!f(t0, y0, k1)) {
    res.stop = Stop::Rejected;
    return res;
  }

  double h = opt.initial_step;
  if (h <= 0.0) {
    // Hairer's starting-step heuristic, first-order part.
    const ErrorNorm unit = rms_norm(opt.rtol, opt.atol);
    const double dnf = unit(y0, y0, k1);
    const double dny = unit(y0, y0, y0);
    h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
    h = std::min(h, max_step);
  }
  h = dir * std::min(std::abs(h), max_step);

  double t = t0;
  Vec y = y0;
  double facold = 1e-4;
  bool last_rejected = false;
  constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;
  constexpr double facc1 = 1.0 / 0.2, facc2 = 1.0 / 10.0;

  while (dir * (t_end - t) > 0.0) {
    if (res.steps + res.rejected >= opt.max_steps) {
      res.stop = Stop::MaxSteps;
      break;
    }
    const double eps_t = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (std::abs(h) < eps_t) {
      res.stop = Stop::StepUnderflow;
      break;
    }
    if (dir * (t + 1.01 * h - t_end) > 0.0) h = t_end - t;

    bool ok = true;
    ytmp = y + h * a21 * k1;
    ok = ok && f(t + c2 * h, ytmp, k2);
    if (ok) { ytmp = y + h * (a31 * k1 + a32 * k2); ok = f(t + c3 * h, ytmp, k3); }
    if (ok) { ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3); ok = f(t + c4 * h, ytmp, k4); }
    if (ok) {
      ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      ok = f(t + c5 * h, ytmp, k5);
    }
    if (ok) {
      ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      ok = f(t + h, ytmp, k6);
    }
    if (ok) {
      y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
      ok = y1.allFinite() && f(t + h, y1, k7);
    }
    double e = std::numeric_limits<double>::infinity();
    if (ok) {
      err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      e = norm(y, y1, err);
      if (!std::isfinite(e)) e = std::numeric_limits<double>::infinity();
    }

    if (!ok || e > 1.0) {
      ++res.rejected;
      const double fac11 = std::isfinite(e) ? std::pow(e, expo1) : facc1;
      h /= ok ? std::min(facc1, fac11 / safe) : 4.0;
      last_rejected = true;
      continue;
    }

    // Accepted step.
    DenseSolution::Step step{t, h, Mat(dim, 5)};
    const Vec ydiff = y1 - y;
    const Vec bspl = h * k1 - ydiff;
    step.coeff.col(0) = y;
    step.coeff.col(1) = ydiff;
    step.coeff.col(2) = bspl;
    step.coeff.col(3) = ydiff - h * k7 - bspl;
    step.coeff.col(4) = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);

    const double t_new = (dir * (t + h - t_end) >= 0.0) ? t_end : t + h;
    if (filter && !filter(t_new, y1)) {
      res.stop = Stop::Rejected;
      break;
    }
    res.solution.push(std::move(step));
    ++res.steps;
    t = t_new;
    y = y1;
    k1 = k7;  // FSAL

    const double fac11 = std::pow(std::max(e, 1e-300), expo1);
    double fac = fac11 / std::pow(facold, beta);
    fac = std::max(facc2, std::min(facc1, fac / safe));
    double h_new = h / fac;
    if (last_rejected) h_new = dir * std::min(std::abs(h_new), std::abs(h));
    facold = std::max(e, 1e-4);
    last_rejected = false;
    h = dir * std::min(std::abs(h_new), max_step);
  }

  res.t_stop = t;
  res.y_stop = y;
  return res;
}

}  // namespace horolab::ode
