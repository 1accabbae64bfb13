#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "horolab/error.hpp"
#include "horolab/horospherical.hpp"
#include "horolab/sampling.hpp"

using namespace horolab;

namespace {

ChartPoint pt(std::initializer_list<double> xs) {
  ChartPoint p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p[i++] = x;
  return p;
}

Mat I(int m) { return Mat::Identity(m, m); }

const ManifoldSpec& h3() {
  static const ManifoldSpec s = make_hyperbolic(3, 1.0);
  return s;
}

const ManifoldSpec& h2r() {
  static const ManifoldSpec s = make_product(make_hyperbolic(2, 1.0), make_euclidean(1));
  return s;
}

// Keeps product samples whose curved-factor share is at least 0.3, away from the
// slowly converging nearly-flat directions.
bool well_tilted(const TangentVector& v) {
  return std::hypot(v.components[0], v.components[1]) / v.base[1] >= 0.3;
}

}  // namespace

TEST(Profile, HyperbolicSpace) {
  const TangentVector v = sample_unit_vectors(h3(), default_anchor(h3()), 1, 7)[0];
  const HorosphericalProfile p = profile(h3(), v);
  EXPECT_NEAR(p.h, 2.0, 1e-6);
  EXPECT_NEAR(p.h_reverse, 2.0, 1e-6);
  EXPECT_LT((p.D - 2.0 * I(2)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(p.det_D, 4.0, 1e-5);
  EXPECT_EQ(p.rank, 1);
  EXPECT_TRUE(p.checks.norm_D_le_2sqrtR0.value());
  EXPECT_TRUE(p.checks.det_trace_inequality);
  EXPECT_TRUE(p.checks.det_trace_equality);
  EXPECT_TRUE(p.checks.D_nonnegative);
  EXPECT_LT(p.checks.h_plus_h_reverse_eq_trace_D, 1e-5);
  ASSERT_TRUE(p.checks.rigidity_residual.has_value());
  EXPECT_LT(*p.checks.rigidity_residual, 1e-4);
}

TEST(Profile, EuclideanSpace) {
  const ManifoldSpec e = make_euclidean(3);
  const HorosphericalProfile p = profile(e, {Vec::Zero(3), Vec::Unit(3, 1)});
  EXPECT_NEAR(p.h, 0.0, 1e-6);
  EXPECT_LT(p.D.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ(p.rank, 3);
  EXPECT_TRUE(p.checks.norm_D_le_2sqrtR0.value());
}

TEST(Profile, HyperbolicPlaneTimesLine) {
  const HorosphericalProfile p = profile(h2r(), {pt({0, 1, 0}), pt({1, 0, 0})});
  EXPECT_NEAR(p.h, 1.0, 1e-6);
  EXPECT_EQ(p.rank, 2);
  const Eigen::SelfAdjointEigenSolver<Mat> es(p.D);
  EXPECT_NEAR(es.eigenvalues()[0], 0.0, 1e-6);
  EXPECT_NEAR(es.eigenvalues()[1], 2.0, 1e-6);
  EXPECT_TRUE(p.checks.det_trace_inequality);
  EXPECT_FALSE(p.checks.det_trace_equality);
}

TEST(Profile, ProductOfHyperbolicPlanes) {
  const ManifoldSpec hh = make_product(make_hyperbolic(2, 1.0), make_hyperbolic(2, 1.0));
  const double s = 1.0 / std::sqrt(2.0);
  const HorosphericalProfile p = profile(hh, {pt({0, 1, 0, 1}), pt({s, 0, s, 0})});
  EXPECT_EQ(p.rank, 2);
  EXPECT_NEAR(p.h, 2.0 * s, 1e-5);
  EXPECT_TRUE(p.checks.D_nonnegative);
}

TEST(Profile, ScaledHyperbolicPlane) {
  const ManifoldSpec h2 = make_hyperbolic(2, 1.5);
  const HorosphericalProfile p = profile(h2, sample_unit_vectors(h2, pt({0, 1}), 1, 5)[0]);
  EXPECT_NEAR(p.h, 1.5, 1e-6);
  EXPECT_NEAR(p.D(0, 0), 3.0, 1e-6);
  EXPECT_TRUE(p.checks.norm_D_le_2sqrtR0.value());
}

TEST(Profile, RankHelpers) {
  EXPECT_EQ(rank_from_D(Mat::Zero(2, 2), 1e-4), 3);
  EXPECT_EQ(rank_from_D(2.0 * I(2), 1e-4), 1);
  Mat d = Mat::Zero(2, 2);
  d(1, 1) = 2.0;
  EXPECT_EQ(rank_from_D(d, 1e-4), 2);
  EXPECT_EQ(rank_of(make_euclidean(2), {Vec::Zero(2), Vec::Unit(2, 0)}), 2);
}

TEST(FlowInvariance, HyperbolicSpace) {
  const TangentVector v = sample_unit_vectors(h3(), default_anchor(h3()), 1, 11)[0];
  const ScanReport rep = flow_invariance_scan(h3(), v, {0.5, 1.0, 2.0, 4.0}, {}, 2);
  EXPECT_EQ(rep.samples, 4);
  EXPECT_LE(rep.max_deviation, 1e-5);
  EXPECT_LE(rep.max_det_deviation, 1e-5);
  EXPECT_TRUE(rep.rank_invariant);
  EXPECT_FALSE(rep.truncated);
  EXPECT_LE(rep.witnesses.size(), 5u);
}

TEST(FlowInvariance, TiltedProductDirection) {
  const ScanReport rep =
      flow_invariance_scan(h2r(), {pt({0, 1, 0}), pt({0.6, 0, 0.8})}, {0.5, 1.0, 2.0});
  for (double h : rep.h_values) EXPECT_NEAR(h, 0.6, 1e-5);
  EXPECT_TRUE(rep.rank_invariant);
}

TEST(FlowInvariance, DeterministicAcrossJobCounts) {
  const TangentVector v = sample_unit_vectors(h3(), default_anchor(h3()), 1, 13)[0];
  const ScanReport a = flow_invariance_scan(h3(), v, {0.5, 1.0, 1.5}, {}, 1);
  const ScanReport b = flow_invariance_scan(h3(), v, {0.5, 1.0, 1.5}, {}, 3);
  ASSERT_EQ(a.h_values.size(), b.h_values.size());
  for (std::size_t i = 0; i < a.h_values.size(); ++i) EXPECT_EQ(a.h_values[i], b.h_values[i]);
}

TEST(FlowInvariance, RejectsNegativeTimes) {
  EXPECT_THROW(flow_invariance_scan(h3(), {pt({0, 0, 1}), pt({0, 0, 1})}, {-1.0}), Error);
}

TEST(Reversibility, HyperbolicSpaceAndProduct) {
  const auto vs = sample_unit_vectors(h3(), default_anchor(h3()), 20, 17);
  const ScanReport rep = reversibility_scan(h3(), vs, {}, 4);
  EXPECT_EQ(rep.samples, 20);
  EXPECT_LE(rep.max_deviation, 1e-5);
  EXPECT_LE(rep.max_identity_residual, 1e-5);
  EXPECT_LE(rep.max_D_mismatch, 1e-5);

  const auto ws = sample_unit_vectors_if(h2r(), default_anchor(h2r()), 20, 19, well_tilted);
  const ScanReport prod = reversibility_scan(h2r(), ws, {}, 4);
  EXPECT_LE(prod.max_deviation, 1e-5);
  EXPECT_LE(prod.max_identity_residual, 1e-5);
}

TEST(Busemann, HyperbolicPlaneVertical) {
  const ManifoldSpec h2 = make_hyperbolic(2, 1.0);
  const TangentVector up{pt({0, 1}), pt({0, 1})};
  EXPECT_NEAR(busemann(h2, up, pt({0, std::exp(1.0)})).value, -1.0, 1e-8);
  // Horospheres of the vertical direction are the horizontal lines.
  EXPECT_NEAR(busemann(h2, up, pt({0.7, 1.0})).value, 0.0, 1e-8);
}

TEST(Busemann, EuclideanLinear) {
  const ManifoldSpec e = make_euclidean(2);
  const TangentVector v{pt({0, 0}), pt({1, 0})};
  const BusemannResult r = busemann(e, v, pt({0.75, 2.0}));
  EXPECT_NEAR(r.value, -0.75, 1e-7);
  EXPECT_TRUE(r.T.size() >= 3);
}

TEST(Busemann, ProductFormula) {
  // b_v = α b_1 + β b_2 for v = (α v1, β v2).
  const TangentVector v{pt({0, 1, 0}), pt({0, 0.6, 0.8})};
  const BusemannResult r = busemann(h2r(), v, pt({0.3, std::exp(0.5), 1.25}));
  EXPECT_NEAR(r.value, 0.6 * -0.5 + 0.8 * -1.25, 1e-5);
}

TEST(Busemann, ProductCheckHelper) {
  const TangentVector v{pt({0, 1, 0}), pt({0, 0.6, 0.8})};
  const ProductBusemannCheck c = product_busemann_check(h2r(), v, pt({-0.4, 0.7, 2.0}));
  EXPECT_NEAR(c.alpha, 0.6, 1e-12);
  EXPECT_NEAR(c.beta, 0.8, 1e-12);
  EXPECT_NEAR(c.formula, 0.6 * -std::log(0.7) + 0.8 * -2.0, 1e-6);
  EXPECT_LE(c.deviation, 1e-5);
  EXPECT_THROW(product_busemann_check(h3(), {pt({0, 0, 1}), pt({0, 0, 1})}, pt({0, 0, 2})), Error);
}

TEST(Busemann, GradientIsMinusV) {
  const ManifoldSpec h2 = make_hyperbolic(2, 1.0);
  const TangentVector up{pt({0, 1}), pt({0, 1})};
  const Vec grad = busemann_gradient(h2, up, up.base);
  EXPECT_LT((grad + up.components).norm(), 1e-6);

  const ManifoldSpec e = make_euclidean(2);
  const TangentVector v{pt({0, 0}), pt({0.6, 0.8})};
  EXPECT_LT((busemann_gradient(e, v, v.base) + v.components).norm(), 1e-6);
}

TEST(Busemann, RejectsBadOptions) {
  const ManifoldSpec e = make_euclidean(2);
  BusemannOptions opt;
  opt.T_max = opt.T0;
  EXPECT_THROW(busemann(e, {pt({0, 0}), pt({1, 0})}, pt({1, 1}), opt), Error);
}

TEST(StableLeaf, HyperbolicDecayRate) {
  const TangentVector v{pt({0, 0, 1}), pt({0, 0, 1})};
  const TangentVector w = stable_leaf_partner(h3(), v, 1.0);
  EXPECT_NEAR(busemann(h3(), v, w.base).value, busemann(h3(), v, v.base).value, 1e-8);
  const LeafProbe probe = stable_leaf_probe(h3(), v, w, {0, 1, 2, 3, 4, 5, 6, 7, 8});
  EXPECT_NEAR(probe.decay_rate, -1.0, 0.05);
  EXPECT_LT(probe.limit_distance, 1e-3);
}

TEST(StableLeaf, ProductDecaysOnlyInCurvedFactor) {
  const TangentVector v{pt({0, 1, 0}), pt({0, 1, 0})};
  const TangentVector w = stable_leaf_partner(h2r(), v, 1.0, 0.5);
  const LeafProbe probe = stable_leaf_probe(h2r(), v, w, {0, 2, 4, 6, 8, 10});
  EXPECT_NEAR(probe.decay_rate, -1.0, 0.05);
  EXPECT_NEAR(probe.limit_distance, 0.5, 1e-3);
  for (double d : probe.right_distances) EXPECT_NEAR(d, 0.5, 1e-9);
}

TEST(StableLeaf, EuclideanParallel) {
  const ManifoldSpec e = make_euclidean(3);
  const TangentVector v{Vec::Zero(3), Vec::Unit(3, 0)};
  const TangentVector w = stable_leaf_partner(e, v, 0.4);
  const LeafProbe probe = stable_leaf_probe(e, v, w, {0, 1, 2, 4});
  for (double d : probe.distances) EXPECT_NEAR(d, 0.4, 1e-9);
  EXPECT_NEAR(probe.decay_rate, 0.0, 1e-8);
}

TEST(StableLeaf, UnsupportedInputs) {
  EXPECT_THROW(stable_leaf_partner(h3(), {pt({0, 0, 1}), pt({1, 0, 0})}, 1.0), Error);
  EXPECT_THROW(stable_leaf_partner(make_heisenberg(1.0), {pt({0, 0, 0}), pt({0, 1, 0})}, 1.0),
               Error);
}

TEST(Divergence, HyperbolicGeodesicsSeparate) {
  const TangentVector v{pt({0, 0, 1}), pt({0, 0, 1})};
  const TangentVector w{pt({0, 0, 1}), pt({std::sin(0.3), 0, std::cos(0.3)})};
  const DivergenceProbe probe = divergence_probe(h3(), v, w, {0.5, 1, 2, 3, 4});
  EXPECT_TRUE(probe.strictly_increasing);
}

TEST(Horosphere, DistanceExamples) {
  const ManifoldSpec h2 = make_hyperbolic(2, 1.0);
  const double s1 = 2.0 * std::sinh(0.5);
  const double s4 = 2.0 * std::sinh(2.0);
  const auto checks =
      horosphere_distance_check(h2, {{pt({0, 1}), pt({s1, 1})}, {pt({0, 1}), pt({s4, 1})},
                                     {pt({0.2, 2}), pt({0.2, 2})}});
  EXPECT_NEAR(checks[0].ambient, 1.0, 1e-12);
  EXPECT_NEAR(checks[0].horo, 1.0421906, 1e-7);
  EXPECT_NEAR(checks[1].ambient, 4.0, 1e-12);
  EXPECT_NEAR(checks[1].horo, 7.2537208, 1e-7);
  EXPECT_NEAR(checks[1].bound, 29.556224, 1e-6);
  EXPECT_EQ(checks[2].ratio, 0.0);
  for (const auto& c : checks) EXPECT_TRUE(c.holds);
}

TEST(Horosphere, SampledPairsSatisfyBound) {
  const ManifoldSpec h3s = make_hyperbolic(3, 1.5);
  const auto pairs = sample_horosphere_pairs(h3s, 200, 23);
  ASSERT_EQ(pairs.size(), 200u);
  for (const auto& c : horosphere_distance_check(h3s, pairs)) {
    EXPECT_TRUE(c.holds);
    EXPECT_LE(c.ratio, 1.0);
  }
  const auto again = sample_horosphere_pairs(h3s, 200, 23);
  EXPECT_EQ(pairs[17].q, again[17].q);
  EXPECT_THROW(sample_horosphere_pairs(make_euclidean(2), 1, 1), Error);
}
