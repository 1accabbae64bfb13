#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "horolab/jacobi.hpp"

namespace horolab {

struct ProfileOptions {
  LimitOptions limit;          // r-doubling limit extraction (tol, r0, r_max)
  double geodesic_tol = 1e-11;
  double eps_rank = 1e-4;      // relative kernel threshold for rank
  bool independent_reverse = true;  // recompute h(-v) along a separate trajectory of -v
};

struct BoundChecks {
  // ||D|| <= 2 sqrt(R0) + 1e-6; absent when the model has no curvature bound.
  std::optional<bool> norm_D_le_2sqrtR0;
  // det D <= (2h/(n-1))^{n-1} + 1e-6.
  bool det_trace_inequality = false;
  // True when the inequality holds with equality within 1e-5.
  bool det_trace_equality = false;
  // |h(v) + h(-v) - tr D(v)|.
  double h_plus_h_reverse_eq_trace_D = 0.0;
  // All eigenvalues of D >= -1e-7.
  bool D_nonnegative = false;
  // On equality: max over sampled t of ||R_v(t) + (h/(n-1))^2 Id||; absent otherwise.
  std::optional<double> rigidity_residual;
};

struct HorosphericalProfile {
  TangentVector v;
  Mat frame;  // basis of v^⊥ in which S, U, D are expressed
  Mat S, U, D;
  double h = 0.0;          // tr U(v)
  double h_reverse = 0.0;  // h(-v) = tr U(-v)
  double det_D = 0.0;
  double trace_D = 0.0;
  double norm_D = 0.0;
  double min_eig_D = 0.0;
  int rank = 0;
  double r_used = 0.0;     // largest r used by either limit
  double limit_residual = 0.0;
  double asymmetry = 0.0;  // largest discarded asymmetry
  BoundChecks checks;
};

// S(v), U(v), D(v) = U - S, h(v) = tr U(v), rank and bound checks. `frame` defaults to
// orthonormal_frame(spec, v).
HorosphericalProfile profile(const ManifoldSpec& spec, const TangentVector& v,
                             const ProfileOptions& options = {},
                             const std::optional<Mat>& frame = std::nullopt);

std::vector<HorosphericalProfile> profiles(const ManifoldSpec& spec,
                                           const std::vector<TangentVector>& vectors,
                                           const ProfileOptions& options = {}, int jobs = 1);

// 1 + #{eigenvalues of D below eps_rank * max(1, ||D||)}.
int rank_from_D(const Mat& D, double eps_rank);
int rank_of(const ManifoldSpec& spec, const TangentVector& v, double eps_rank = 1e-4);

struct Witness {
  int index = 0;      // sample index
  double t = 0.0;     // flow time (0 for reversibility)
  double deviation = 0.0;
};

struct ScanReport {
  std::string kind;  // flow_invariance | reversibility | stable_leaf_constancy
  int samples = 0;
  double max_deviation = 0.0;  // max |h(φ^t v) - h(v)| or max |h(v) - h(-v)|
  std::vector<Witness> witnesses;  // worst cases, largest first (at most 5)
  bool truncated = false;          // flow times dropped because the chart ended

  // Flow invariance extras.
  std::vector<double> times;        // times actually evaluated
  std::vector<double> h_values;     // h(φ^t v) per time
  std::vector<int> ranks;
  double max_det_deviation = 0.0;
  double max_trace_deviation = 0.0;
  bool rank_invariant = true;

  // Reversibility extras.
  double max_identity_residual = 0.0;  // |h(v) + h(-v) - tr D(v)|
  double max_D_mismatch = 0.0;         // max |D(-v) - D(v)| entrywise
  std::vector<HorosphericalProfile> profiles;  // per sample (reversibility: profile of v)
};

ScanReport flow_invariance_scan(const ManifoldSpec& spec, const TangentVector& v,
                                const std::vector<double>& times,
                                const ProfileOptions& options = {}, int jobs = 1);

ScanReport reversibility_scan(const ManifoldSpec& spec, const std::vector<TangentVector>& vectors,
                              const ProfileOptions& options = {}, int jobs = 1);

struct BusemannOptions {
  double T0 = 4.0;
  double T_max = 1024.0;
  double tol = 1e-7;
  double geodesic_tol = 1e-11;
  // Evaluate every T up to T_max (no early stop); keeps b_v smooth in x for differencing.
  bool full_table = false;
};

struct BusemannResult {
  double value = 0.0;
  double residual = 0.0;
  double T_used = 0.0;
  std::vector<double> T;          // evaluated times
  std::vector<double> raw;        // d(c_v(T), x) - T
};

// b_v(x) = lim d(c_v(T), x) - T over T = T0 2^k, with Romberg extrapolation in 1/T
// (flat directions converge like 1/T). Stops early once converged unless full_table. Throws NonConvergence with the last two iterates when T_max is reached.
BusemannResult busemann(const ManifoldSpec& spec, const TangentVector& v, const ChartPoint& x,
                        const BusemannOptions& options = {});

struct ProductBusemannCheck {
  double estimate = 0.0;   // busemann(spec, v, x)
  double formula = 0.0;    // α b_{v1}(x1) + β b_{v2}(x2), factor estimates
  double deviation = 0.0;  // |estimate - formula|
  double alpha = 0.0, beta = 0.0;  // factor shares of v
};

// Compares b_v on a product with the combination of factor Busemann functions, where
// v = (α v1, β v2) with unit v1, v2. Factors with zero share contribute nothing.
ProductBusemannCheck product_busemann_check(const ManifoldSpec& spec, const TangentVector& v,
                                            const ChartPoint& x,
                                            const BusemannOptions& options = {});

// Chart gradient of b_v at x by central differences of busemann (full table), raised with
// g^{-1}; on models -grad b_v(π(v)) = v.
Vec busemann_gradient(const ManifoldSpec& spec, const TangentVector& v, const ChartPoint& x,
                      double h = 1e-4, const BusemannOptions& options = {});

// A vector w on the stable leaf of v (same horosphere, w = -grad b_v at its footpoint),
// displaced by `horo_offset` along the horosphere and, for products with a Euclidean
// factor, by `flat_offset` in that factor. Supported: Euclidean; hyperbolic with v
// vertical (pointing to the point at infinity); products of these. Throws otherwise.
TangentVector stable_leaf_partner(const ManifoldSpec& spec, const TangentVector& v,
                                  double horo_offset, double flat_offset = 0.0);

struct LeafProbe {
  std::vector<double> times;
  std::vector<double> distances;  // d(c_v(t), c_w(t))
  // Product models: per-factor distances (left, right); empty otherwise.
  std::vector<double> left_distances, right_distances;
  double decay_rate = 0.0;  // least-squares slope of log(decaying distance) over the tail
  double limit_distance = 0.0;  // distance at the last sample
};

LeafProbe stable_leaf_probe(const ManifoldSpec& spec, const TangentVector& v,
                            const TangentVector& w, const std::vector<double>& times,
                            double geodesic_tol = 1e-11);

struct DivergenceProbe {
  std::vector<double> times;
  std::vector<double> distances;
  bool strictly_increasing = false;
};

DivergenceProbe divergence_probe(const ManifoldSpec& spec, const TangentVector& v,
                                 const TangentVector& w, const std::vector<double>& times);

struct HorospherePair {
  ChartPoint p, q;  // on a common horosphere {height = const}
};

struct HorosphereCheck {
  double ambient;     // d(x, y)
  double horo;        // intrinsic horosphere distance d_H(x, y)
  double bound;       // e^{d sqrt(R0)/2} d
  double ratio;       // horo / bound (0 for coincident points)
  bool holds;
};

// Verifies d_H(x,y) <= e^{d(x,y) sqrt(R0)/2} d(x,y) on horospheres {height = const} of a
// hyperbolic model, where d_H is the flat intrinsic distance |Δx| / (k height).
std::vector<HorosphereCheck> horosphere_distance_check(const ManifoldSpec& spec,
                                                       const std::vector<HorospherePair>& pairs);

// Seeded pairs on random horospheres of a hyperbolic model.
std::vector<HorospherePair> sample_horosphere_pairs(const ManifoldSpec& spec, int count,
                                                    std::uint64_t seed);

}  // namespace horolab
