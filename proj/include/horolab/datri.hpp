#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "horolab/jacobi.hpp"

namespace horolab {

// det A_v(t) along the geodesic of v (t > 0).
double det_a(const ManifoldSpec& spec, const TangentVector& v, double t, double tol = 1e-11);

struct ConjugateRoot {
  double t_lo = 0.0, t_hi = 0.0;  // refined bracket
  double t = 0.0;                 // refined root
  double det = 0.0;               // det A_v(t) at the refined root
  // True for a zero where det A touches 0 without changing sign (even multiplicity),
  // located by minimizing |det A| between grid points.
  bool tangential = false;
};

struct ConjugateScanResult {
  TangentVector v;
  std::vector<double> t_grid;
  std::vector<double> det_values;
  std::vector<ConjugateRoot> zero_crossings;  // ascending in t
  std::optional<double> first_conjugate_time;
  bool truncated = false;  // the geodesic left the chart before T; scan is partial
};

// Samples det A_v on the grid dt, 2dt, ..., T; brackets sign changes and refines them by
// bisection; interior local minima of |det A| that refine to |det A| <= 1e-8 are reported
// as tangential zeros.
ConjugateScanResult conjugate_scan(const ManifoldSpec& spec, const TangentVector& v, double T,
                                   double dt, double tol = 1e-11);

std::vector<ConjugateScanResult> conjugate_scans(const ManifoldSpec& spec,
                                                 const std::vector<TangentVector>& vectors,
                                                 double T, double dt, int jobs = 1);

// Seeded unit directions at `anchor` whose g-orthonormal component along `axis` (a chart
// coordinate index) is at least `min_axis` in absolute value. Directions almost orthogonal
// to the axis have distant conjugate points on nilpotent models.
std::vector<TangentVector> direction_grid(const ManifoldSpec& spec, const ChartPoint& anchor,
                                          int count, std::uint64_t seed, int axis,
                                          double min_axis = 0.05);

struct DAtriReport {
  double max_asymmetry = 0.0;    // max |det A_v(t) - det A_{-v}(t)|
  double harmonic_spread = 0.0;  // max over t of max_v |det A_v(t) - mean_v det A_v(t)|
  int samples = 0;               // vectors used
  std::vector<int> excluded;     // indices dropped for conjugate points inside the grid
  std::vector<std::string> warnings;
  std::vector<double> t_grid;
  std::vector<double> mean_det;  // mean_v det A_v(t) per t
  std::vector<std::vector<double>> det_forward, det_reverse;  // per used vector, per t
};

DAtriReport datri_check(const ManifoldSpec& spec, const std::vector<TangentVector>& vectors,
                        const std::vector<double>& t_grid, int jobs = 1, double tol = 1e-11);

// || U'_{v,t}(0) - A'_w(t) A_w(t)^{-1} ||, w = φ^{-t} v, with U' from the boundary problem
// along -v and A_w along the geodesic of w carrying the transported frame (so both sides
// are expressed in the same frame at π(v)).
double u_from_a_identity_check(const ManifoldSpec& spec, const TangentVector& v, double t,
                               double tol = 1e-11);

// Closed-form pair along γ(s) = φ(0, 0, s) on the SL(2,R)~ model:
//   u1(s) = sqrt(2) |a+b| e^{-t} (cos(sqrt(b) s) - 1),  u2(s) = sin(sqrt(b) s).
struct Sl2Pair {
  double u1 = 0.0, u2 = 0.0;
  double u1_prime = 0.0, u2_prime = 0.0;
};
Sl2Pair sl2_analytic_jacobi(double a, double b, double t_coord, double s);

struct Sl2SystemCheck {
  double sup_error = 0.0;  // sup over samples of max(|u1 - u1_num|, |u2 - u2_num|)
  std::vector<double> s;
  std::vector<double> u1, u2;          // closed form
  std::vector<double> u1_num, u2_num;  // integrated
};

// Integrates u1'' + sqrt(2b)|a+b| e^{-t} u2' = 0, u2'' - (sqrt(2b)/|a+b|) e^{t} u1' - b u2 = 0
// from the closed form's initial data and compares on `samples` points of [0, s_max].
Sl2SystemCheck sl2_system_check(double a, double b, double t_coord, double s_max,
                                int samples = 201, double tol = 1e-12);

// First conjugate time of the Jacobi equation of the SL(2,R)~ metric itself along
// γ(s) = φ(0, 0, s): π sqrt(2/b). det A has a double zero there.
double sl2_geometric_conjugate_time(double b);

}  // namespace horolab
