#include "horolab/jacobi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "horolab/error.hpp"
#include "horolab/extrapolation.hpp"

namespace horolab {

namespace {

// Per-column relative error: each column of [J; J'] is an independent Jacobi field whose
// size can grow exponentially, so every column is measured against its own magnitude.
ode::ErrorNorm column_relative_norm(int rows, int cols, double tol) {
  return [rows, cols, tol](const Vec& y0, const Vec& y1, const Vec& err) {
    const Eigen::Index half = static_cast<Eigen::Index>(rows) * cols;
    double worst = 0.0;
    for (int c = 0; c < cols; ++c) {
      double scale = 0.0, e = 0.0;
      for (const Eigen::Index base : {Eigen::Index{0}, half}) {
        const Eigen::Index off = base + static_cast<Eigen::Index>(c) * rows;
        scale = std::max({scale, y0.segment(off, rows).cwiseAbs().maxCoeff(),
                          y1.segment(off, rows).cwiseAbs().maxCoeff()});
        e = std::max(e, err.segment(off, rows).cwiseAbs().maxCoeff());
      }
      worst = std::max(worst, e / (tol * scale + 1e-300));
    }
    return worst;
  };
}

std::string fmt_double(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

// Condition number of A after scaling its columns to unit length. Column scaling removes
// the harmless disparity between exponentially and linearly growing Jacobi fields; what
// remains measures near-linear dependence, i.e. proximity to a conjugate point.
double equilibrated_condition(const Mat& a) {
  Mat scaled = a;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double len = a.col(c).norm();
    if (len > 0.0) scaled.col(c) /= len;
  }
  Eigen::JacobiSVD<Mat> svd(scaled);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 1.0;
  const double smin = sv[sv.size() - 1];
  return smin > 0.0 ? sv[0] / smin : std::numeric_limits<double>::infinity();
}

}  // namespace

double operator_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()[0];
}

double min_eigenvalue(const Mat& s) {
  if (s.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetric_part(s), Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

Mat jacobi_operator_along(const GeodesicTrajectory& traj, double t) {
  const TangentVector c = traj.flow(t);
  return jacobi_operator(curvature_at(traj.spec(), c.base), c.components, traj.frame(t));
}

JacobiSolution::JacobiSolution(const GeodesicTrajectory& traj, const Mat& J0, const Mat& J0_prime,
                               double t_end, double tol)
    : rows_(static_cast<int>(J0.rows())),
      cols_(static_cast<int>(J0.cols())),
      t_end_(t_end),
      trajectory_id_(traj.id()) {
  const int m = traj.dimension() - 1;
  if (J0.rows() != m || J0_prime.rows() != m || J0.cols() != J0_prime.cols())
    throw Error(ErrorKind::InvalidParams, "Jacobi initial data must be (n-1) x k matrices");
  if (!traj.covers(t_end))
    throw Error(ErrorKind::Domain, "trajectory too short: covers [" + fmt_double(traj.t_min()) +
                                       ", " + fmt_double(traj.t_max()) + "], requested t = " +
                                       fmt_double(t_end),
                t_end);
  const Eigen::Index half = static_cast<Eigen::Index>(rows_) * cols_;
  Vec y0(2 * half);
  y0.head(half) = Eigen::Map<const Vec>(Mat(J0).data(), half);
  y0.tail(half) = Eigen::Map<const Vec>(Mat(J0_prime).data(), half);

  const int rows = rows_, cols = cols_;
  auto rhs = [&traj, rows, cols, half](double t, const Vec& y, Vec& dy) {
    const Mat r = jacobi_operator_along(traj, t);
    Eigen::Map<const Mat> J(y.data(), rows, cols);
    dy.resize(y.size());
    dy.head(half) = y.tail(half);
    Eigen::Map<Mat>(dy.data() + half, rows, cols) = -r * J;
    return true;
  };
  ode::Options opt;
  opt.max_step = 0.5;
  const ode::Result res =
      ode::integrate(rhs, 0.0, y0, t_end, opt, column_relative_norm(rows_, cols_, tol));
  if (res.stop != ode::Stop::Completed)
    throw Error(ErrorKind::NonConvergence,
                "Jacobi integration failed at t = " + fmt_double(res.t_stop), res.t_stop);
  solution_ = res.solution;
}

JacobiTensorState JacobiSolution::state(double t) const {
  if (!solution_.covers(t))
    throw Error(ErrorKind::Domain, "Jacobi solution does not cover t = " + fmt_double(t), t);
  const Vec y = solution_(t);
  const Eigen::Index half = static_cast<Eigen::Index>(rows_) * cols_;
  return {Eigen::Map<const Mat>(y.data(), rows_, cols_),
          Eigen::Map<const Mat>(y.data() + half, rows_, cols_), t, trajectory_id_};
}

JacobiTensorState integrate_jacobi(const GeodesicTrajectory& traj, const Mat& J0,
                                   const Mat& J0_prime, double t_target, double tol) {
  return JacobiSolution(traj, J0, J0_prime, t_target, tol).state(t_target);
}

JacobiTensorState a_tensor(const GeodesicTrajectory& traj, double t, double tol) {
  const int m = traj.dimension() - 1;
  return integrate_jacobi(traj, Mat::Zero(m, m), Mat::Identity(m, m), t, tol);
}

namespace {

Mat fundamental_j0(int m) {
  Mat j0 = Mat::Zero(m, 2 * m);
  j0.leftCols(m) = Mat::Identity(m, m);
  return j0;
}

Mat fundamental_j0p(int m) {
  Mat j0p = Mat::Zero(m, 2 * m);
  j0p.rightCols(m) = Mat::Identity(m, m);
  return j0p;
}

}  // namespace

FundamentalSolution::FundamentalSolution(const GeodesicTrajectory& traj, double t_end, double tol)
    : solution_(traj, fundamental_j0(traj.dimension() - 1), fundamental_j0p(traj.dimension() - 1),
                t_end, tol),
      m_(traj.dimension() - 1) {}

JacobiTensorState FundamentalSolution::j1(double t) const {
  JacobiTensorState s = solution_.state(t);
  return {s.J.leftCols(m_), s.J_prime.leftCols(m_), s.t, s.trajectory_id};
}

JacobiTensorState FundamentalSolution::a(double t) const {
  JacobiTensorState s = solution_.state(t);
  return {s.J.rightCols(m_), s.J_prime.rightCols(m_), s.t, s.trajectory_id};
}

FundamentalSolution::Bvp FundamentalSolution::boundary_derivative(double t) const {
  if (t == 0.0) throw Error(ErrorKind::InvalidParams, "boundary time must be nonzero");
  const JacobiTensorState s = solution_.state(t);
  const Mat J1 = s.J.leftCols(m_);
  const Mat A = s.J.rightCols(m_);
  Bvp out{};
  out.det_a = A.determinant();
  out.condition = equilibrated_condition(A);
  // Along c_v, det A(t) has the sign of t^{n-1} until the first conjugate point.
  const double oriented = (t < 0.0 && m_ % 2 == 1) ? -out.det_a : out.det_a;
  if (!(oriented > 0.0) || !(out.condition <= 1e12))
    throw Error(ErrorKind::Singular,
                "conjugate-point obstruction at r = " + fmt_double(std::abs(t)) + ": det A = " +
                    fmt_double(out.det_a) + ", cond A = " + fmt_double(out.condition),
                std::abs(t));
  const Mat w = -A.fullPivLu().solve(J1);
  out.asymmetry = asymmetry(w);
  out.derivative = symmetric_part(w);
  return out;
}

Mat bvp_stable_approx(const GeodesicTrajectory& traj, double r, double* asym) {
  if (!(r > 0.0)) throw Error(ErrorKind::InvalidParams, "bvp_stable_approx requires r > 0", r);
  const auto b = FundamentalSolution(traj, r).boundary_derivative(r);
  if (asym) *asym = b.asymmetry;
  return b.derivative;
}

Mat bvp_unstable_approx(const GeodesicTrajectory& traj_reverse, double r, double* asym) {
  return -bvp_stable_approx(traj_reverse, r, asym);
}

Mat bvp_unstable_direct(const GeodesicTrajectory& traj, double r, double* asym) {
  if (!(r > 0.0)) throw Error(ErrorKind::InvalidParams, "bvp_unstable_direct requires r > 0", r);
  const auto b = FundamentalSolution(traj, -r).boundary_derivative(-r);
  if (asym) *asym = b.asymmetry;
  return b.derivative;
}

namespace {

// Y'_{v,r}(0) for the two-point problem Y(0) = Id, Y(t_end) = 0, via the bounded variable
// Z = Y (Y')^{-1}, which satisfies Z' = Id + Z R_v Z with Z(t_end) = 0 and Y'(0) = Z(0)^{-1}.
// Unlike -A^{-1} J1, no exponentially growing columns are formed, so the accuracy does not
// degrade with r. Returns nullopt when Z leaves every bounded set (then S' is singular
// somewhere on the interval and the closed form must be used).
std::optional<FundamentalSolution::Bvp> riccati_boundary_derivative(const GeodesicTrajectory& traj,
                                                                    double t_end, double tol) {
  const int m = traj.dimension() - 1;
  const Eigen::Index mm = static_cast<Eigen::Index>(m) * m;
  auto rhs = [&traj, m](double t, const Vec& y, Vec& dy) {
    Eigen::Map<const Mat> Z(y.data(), m, m);
    dy.resize(y.size());
    Eigen::Map<Mat>(dy.data(), m, m) = Mat::Identity(m, m) + Z * jacobi_operator_along(traj, t) * Z;
    return true;
  };
  auto bounded = [m](double, const Vec& y) {
    return y.allFinite() && operator_norm(Eigen::Map<const Mat>(y.data(), m, m)) <= 1e8;
  };
  ode::Options opt;
  opt.rtol = tol;
  opt.atol = tol;
  opt.max_step = 0.5;
  const ode::Result res = ode::integrate(rhs, t_end, Vec::Zero(mm), 0.0, opt, {}, bounded);
  if (res.stop != ode::Stop::Completed) return std::nullopt;
  const Mat Z = Eigen::Map<const Mat>(res.y_stop.data(), m, m);
  Eigen::FullPivLU<Mat> lu(Z);
  if (!lu.isInvertible()) return std::nullopt;
  const Mat w = lu.inverse();
  FundamentalSolution::Bvp out{};
  out.asymmetry = asymmetry(w);
  out.derivative = symmetric_part(w);
  return out;
}

StableTensorResult extract_limit(const GeodesicTrajectory& traj, const LimitOptions& opt,
                                 bool forward) {
  if (!(opt.r0 > 0.0) || !(opt.tol > 0.0) || !(opt.r_max >= opt.r0))
    throw Error(ErrorKind::InvalidParams, "limit options require r0 > 0, tol > 0, r_max >= r0");
  const double sign = forward ? 1.0 : -1.0;
  const double reach = forward ? traj.t_max() : -traj.t_min();
  const double horizon = std::min(opt.r_max, reach);
  if (horizon < opt.r0)
    throw Error(ErrorKind::NonConvergence, "trajectory shorter than r0 = " + fmt_double(opt.r0));

  // A_v over the whole horizon, for the conjugate-point guard and as fallback.
  const FundamentalSolution fs(traj, sign * horizon, opt.jacobi_tol);
  const int m = traj.dimension() - 1;
  StableTensorResult res;
  // Romberg table in 1/r: level 1 removes the c/r term, level 2 the c/r^2 term.
  DoublingExtrapolator table(opt.tol);
  const char* what = forward ? "stable" : "unstable";
  for (double r = opt.r0; r <= horizon * (1.0 + 1e-12); r *= 2.0) {
    const Mat A = fs.a(sign * r).J;
    const double det = A.determinant();
    const double oriented = (!forward && m % 2 == 1) ? -det : det;
    // The sign of det A is only trustworthy while A is well conditioned.
    if (equilibrated_condition(A) <= 1e8 && !(oriented > 0.0))
      throw Error(ErrorKind::Singular,
                  std::string("conjugate point before r = ") + fmt_double(r) + " (det A = " +
                      fmt_double(det) + "); " + what + " tensor undefined",
                  r);
    FundamentalSolution::Bvp b;
    if (auto rb = riccati_boundary_derivative(traj, sign * r, opt.jacobi_tol)) {
      b = *rb;
    } else {
      try {
        b = fs.boundary_derivative(sign * r);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Singular || res.sequence.empty()) throw;
        break;  // conditioning horizon reached; judge convergence on what we have
      }
    }
    res.asymmetry = std::max(res.asymmetry, b.asymmetry);
    if (!res.sequence.empty()) {
      // S'_{v,r}(0) increases with r; U'_{v,r}(0) decreases.
      const Mat step = sign * (b.derivative - res.sequence.back());
      if (min_eigenvalue(step) < -opt.monotonicity_slack)
        throw Error(ErrorKind::ModelViolation,
                    std::string("non-monotone ") + what + " sequence at r = " + fmt_double(r) +
                        " (possible conjugate points)",
                    r);
    }
    res.radii.push_back(r);
    res.sequence.push_back(b.derivative);
    res.r_used = r;
    if (table.add(b.derivative)) break;
  }
  if (table.size() >= 3) {
    res.residual = table.residual();
    res.converged = table.converged();
    if (res.converged) res.S = symmetric_part(table.value());
  }
  if (res.asymmetry > opt.max_asymmetry)
    throw Error(ErrorKind::NonConvergence,
                std::string(what) + " tensor asymmetry " + fmt_double(res.asymmetry) +
                    " exceeds " + fmt_double(opt.max_asymmetry),
                res.asymmetry);
  if (!res.converged) {
    std::ostringstream os;
    os.precision(10);
    os << what << " tensor did not converge by r = " << res.r_used << " (residual " << res.residual
       << ", last iterate norm " << operator_norm(res.sequence.back()) << ")";
    if (reach < opt.r_max) os << "; trajectory leaves the chart at |t| = " << reach;
    throw Error(ErrorKind::NonConvergence, os.str(), res.residual);
  }
  return res;
}

}  // namespace

StableTensorResult stable_tensor(const GeodesicTrajectory& traj, const LimitOptions& options) {
  return extract_limit(traj, options, true);
}

StableTensorResult unstable_tensor(const GeodesicTrajectory& traj, const LimitOptions& options) {
  return extract_limit(traj, options, false);
}

Mat riccati_propagate(const GeodesicTrajectory& traj, const Mat& S0, double t_target, double tol) {
  const int m = traj.dimension() - 1;
  if (S0.rows() != m || S0.cols() != m)
    throw Error(ErrorKind::InvalidParams, "riccati_propagate: S0 must be (n-1) x (n-1)");
  if (asymmetry(S0) > 1e-10)
    throw Error(ErrorKind::InvalidParams, "riccati_propagate: S0 must be symmetric");
  if (!traj.covers(t_target))
    throw Error(ErrorKind::Domain, "riccati_propagate: target outside trajectory span", t_target);
  const Eigen::Index mm = static_cast<Eigen::Index>(m) * m;
  Vec y0 = Eigen::Map<const Vec>(Mat(S0).data(), mm);
  auto rhs = [&traj, m](double t, const Vec& y, Vec& dy) {
    Eigen::Map<const Mat> S(y.data(), m, m);
    dy.resize(y.size());
    Eigen::Map<Mat>(dy.data(), m, m) = -(S * S) - jacobi_operator_along(traj, t);
    return true;
  };
  constexpr double blow_up = 1e8;
  auto bounded = [m](double, const Vec& y) {
    return operator_norm(Eigen::Map<const Mat>(y.data(), m, m)) <= blow_up;
  };
  ode::Options opt;
  opt.rtol = tol;
  opt.atol = tol;
  opt.max_step = 0.5;
  const ode::Result res = ode::integrate(rhs, 0.0, y0, t_target, opt, {}, bounded);
  if (res.stop == ode::Stop::Rejected || res.stop == ode::Stop::StepUnderflow) {
    std::ostringstream os;
    os.precision(10);
    os << "Riccati solution blows up near t = " << res.t_stop;
    throw Error(ErrorKind::BlowUp, os.str(), res.t_stop);
  }
  if (res.stop != ode::Stop::Completed)
    throw Error(ErrorKind::NonConvergence, "Riccati integration failed", res.t_stop);
  return symmetric_part(Eigen::Map<const Mat>(res.y_stop.data(), m, m));
}

WronskianSample wronskian(const JacobiTensorState& a, const JacobiTensorState& b) {
  if (a.trajectory_id != b.trajectory_id)
    throw Error(ErrorKind::InvalidParams, "wronskian: states belong to different trajectories");
  if (std::abs(a.t - b.t) > 1e-12 * std::max(1.0, std::abs(a.t)))
    throw Error(ErrorKind::InvalidParams, "wronskian: states are at different times");
  if (a.J.rows() != b.J.rows())
    throw Error(ErrorKind::InvalidParams, "wronskian: dimension mismatch");
  return {b.J.transpose() * a.J_prime - b.J_prime.transpose() * a.J, a.t};
}

GeodesicTrajectory shifted_trajectory(const GeodesicTrajectory& traj, double t, double t_min,
                                      double t_max, double tol) {
  TangentVector v = traj.flow(t);
  v.components /= norm(traj.spec().metric(v.base), v.components);
  return integrate_geodesic(traj.spec(), v, t_min, t_max, tol, traj.frame(t));
}

}  // namespace horolab
