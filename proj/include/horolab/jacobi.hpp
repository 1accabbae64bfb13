#pragma once

#include <cstdint>
#include <vector>

#include "horolab/geodesic.hpp"
#include "horolab/ode.hpp"

namespace horolab {

// Jacobi tensor (J, J') at time t, in the parallel frame of the trajectory `trajectory_id`.
struct JacobiTensorState {
  Mat J;
  Mat J_prime;
  double t = 0.0;
  std::uint64_t trajectory_id = 0;
};

// R_v(t) = <R(e_i, ċ)ċ, e_j> in the parallel frame of `traj`.
Mat jacobi_operator_along(const GeodesicTrajectory& traj, double t);

// Dense solution of J'' + R_v(t) J = 0 along a trajectory, from t = 0 towards t_end
// (either direction). Columns are independent Jacobi fields.
class JacobiSolution {
 public:
  JacobiSolution(const GeodesicTrajectory& traj, const Mat& J0, const Mat& J0_prime, double t_end,
                 double tol = 1e-11);

  double t_end() const { return t_end_; }
  bool covers(double t) const { return solution_.covers(t); }
  JacobiTensorState state(double t) const;

 private:
  int rows_, cols_;
  double t_end_;
  std::uint64_t trajectory_id_;
  ode::DenseSolution solution_;
};

JacobiTensorState integrate_jacobi(const GeodesicTrajectory& traj, const Mat& J0,
                                   const Mat& J0_prime, double t_target, double tol = 1e-11);

// A_v(t): A(0) = 0, A'(0) = Id.
JacobiTensorState a_tensor(const GeodesicTrajectory& traj, double t, double tol = 1e-11);

// Both fundamental solutions J1 (J1(0) = Id, J1'(0) = 0) and A_v, integrated together,
// from which every two-point boundary problem Y(0) = Id, Y(t) = 0 is solved in closed form.
class FundamentalSolution {
 public:
  FundamentalSolution(const GeodesicTrajectory& traj, double t_end, double tol = 1e-11);

  double t_end() const { return solution_.t_end(); }
  JacobiTensorState j1(double t) const;
  JacobiTensorState a(double t) const;

  struct Bvp {
    Mat derivative;     // Y'(0), symmetrized
    double asymmetry;   // discarded antisymmetric part
    double condition;   // condition number of A(t)
    double det_a;
  };
  // Y'(0) = -A(t)^{-1} J1(t). For t > 0 this is S'_{v,t}(0); for t < 0 it is U'_{v,|t|}(0).
  // Throws Singular (conjugate-point obstruction) if det A(t) <= 0 in the direction of
  // integration or cond A(t) > 1e12.
  Bvp boundary_derivative(double t) const;

 private:
  JacobiSolution solution_;
  int m_;
};

// S'_{v,r}(0) along c_v.
Mat bvp_stable_approx(const GeodesicTrajectory& traj, double r, double* asymmetry = nullptr);
// U'_{v,r}(0) = -S'_{-v,r}(0), computed along the trajectory of -v (which must carry the
// same frame at t = 0 as the trajectory of v).
Mat bvp_unstable_approx(const GeodesicTrajectory& traj_reverse, double r,
                        double* asymmetry = nullptr);
// U'_{v,r}(0) solved directly along c_v with U(0) = Id, U(-r) = 0; independent of the
// identity used by bvp_unstable_approx.
Mat bvp_unstable_direct(const GeodesicTrajectory& traj, double r, double* asymmetry = nullptr);

struct LimitOptions {
  double r0 = 2.0;
  double tol = 1e-6;
  double r_max = 64.0;
  double jacobi_tol = 1e-11;
  double max_asymmetry = 1e-6;
  double monotonicity_slack = 1e-8;
};

struct StableTensorResult {
  Mat S;              // symmetric limit
  double r_used = 0;  // largest r evaluated
  double residual = 0;
  bool converged = false;
  double asymmetry = 0;               // largest discarded asymmetry over the sequence
  std::vector<double> radii;          // r_k
  std::vector<Mat> sequence;          // S'_{v,r_k}(0) (or U'_{v,r_k}(0))
};

// Limit S(v) = lim S'_{v,r}(0) by r-doubling. The sequence converges like O(1/r) in flat
// directions, so acceptance uses the Richardson-extrapolated iterates 2 s_{k+1} - s_k:
// they are accepted once two successive extrapolants differ by <= tol in operator norm,
// or once the geometric tail estimate of the remaining error is <= tol. Each S'_{v,r}(0)
// is evaluated through the bounded Riccati variable S (S')^{-1}, which stays accurate at
// large r. Uses the forward half of `traj`.
StableTensorResult stable_tensor(const GeodesicTrajectory& traj, const LimitOptions& options = {});
// U(v) = -S(-v), evaluated on the backward half of `traj` (c_{-v}(t) = c_v(-t), same frame).
StableTensorResult unstable_tensor(const GeodesicTrajectory& traj, const LimitOptions& options = {});

// Integrates S' = -S^2 - R_v(t) from S(0) = S0. Throws BlowUp (value = blow-up time) when
// ||S|| exceeds 1e8.
Mat riccati_propagate(const GeodesicTrajectory& traj, const Mat& S0, double t_target,
                      double tol = 1e-12);

struct WronskianSample {
  Mat omega;
  double t;
};

// Ω(A, B)(t) = B^T A' - B'^T A.
WronskianSample wronskian(const JacobiTensorState& a, const JacobiTensorState& b);

// Trajectory starting at φ^t(v), carrying the transported frame, spanning [t_min, t_max]
// relative to its new origin.
GeodesicTrajectory shifted_trajectory(const GeodesicTrajectory& traj, double t, double t_min,
                                      double t_max, double tol = 1e-11);

// Operator (spectral) norm of a symmetric or general matrix.
double operator_norm(const Mat& m);
double min_eigenvalue(const Mat& symmetric);

}  // namespace horolab
