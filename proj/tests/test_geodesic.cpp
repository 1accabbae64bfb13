#include <gtest/gtest.h>

#include <cmath>

#include "horolab/error.hpp"
#include "horolab/geodesic.hpp"
#include "horolab/sampling.hpp"

using namespace horolab;

namespace {

ChartPoint pt(std::initializer_list<double> xs) {
  ChartPoint p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p[i++] = x;
  return p;
}

double speed_defect(const GeodesicTrajectory& traj, double t) {
  const Mat g = traj.spec().metric(traj.point(t));
  const Vec c = traj.velocity(t);
  return std::abs(inner(g, c, c) - 1.0);
}

}  // namespace

TEST(IntegrateGeodesic, EuclideanStraightLine) {
  const ManifoldSpec e = make_euclidean(3);
  const auto traj = integrate_geodesic(e, {Vec::Zero(3), Vec::Unit(3, 0)}, 0.0, 5.0, 1e-10);
  EXPECT_LT((traj.point(5.0) - pt({5, 0, 0})).norm(), 1e-9);
  EXPECT_FALSE(traj.truncated());
}

TEST(IntegrateGeodesic, HyperbolicVerticalLine) {
  const ManifoldSpec h2 = make_hyperbolic(2, 1.0);
  const auto traj = integrate_geodesic(h2, {pt({0, 1}), Vec::Unit(2, 1)}, 0.0, 1.0, 1e-12);
  EXPECT_LT((traj.point(1.0) - pt({0, std::exp(1.0)})).norm(), 1e-8);
}

TEST(IntegrateGeodesic, Sl2rVerticalGeodesic) {
  const ManifoldSpec s = make_sl2r(-2.0, 1.0);
  const auto traj = integrate_geodesic(s, {Vec::Zero(3), Vec::Unit(3, 2)}, 0.0, 1.0, 1e-12);
  for (double t : {0.25, 0.5, 1.0}) EXPECT_LT((traj.point(t) - pt({0, 0, t})).norm(), 1e-10);
}

TEST(IntegrateGeodesic, RejectsBadInput) {
  const ManifoldSpec e = make_euclidean(2);
  EXPECT_THROW(integrate_geodesic(e, {Vec::Zero(2), 2.0 * Vec::Unit(2, 0)}, 0, 1), Error);
  EXPECT_THROW(integrate_geodesic(e, {Vec::Zero(2), Vec::Unit(2, 0)}, 0, 1, 1e-3), Error);
  EXPECT_THROW(integrate_geodesic(e, {Vec::Zero(2), Vec::Unit(2, 0)}, 1, 2), Error);
}

TEST(IntegrateGeodesic, ChartExitTruncates) {
  // SL(2,R)~ chart is cut at |t| <= 300; a ∂_t geodesic reaches it at time 300.
  const ManifoldSpec s = make_sl2r(-2.0, 1.0);
  const auto traj = integrate_geodesic(s, {Vec::Zero(3), Vec::Unit(3, 0)}, 0.0, 400.0, 1e-8);
  EXPECT_TRUE(traj.truncated());
  EXPECT_LT(traj.t_max(), 300.0 + 1e-6);
  EXPECT_GT(traj.t_max(), 299.0);
  EXPECT_THROW(traj.point(350.0), Error);
}

TEST(GeodesicInvariants, UnitSpeedFrameAndParallelism) {
  const std::vector<ManifoldSpec> models = {
      make_hyperbolic(3, 1.0), make_product(make_hyperbolic(2, 1.0), make_euclidean(1)),
      make_sl2r(-2.0, 1.0), make_heisenberg(1.0), make_bump_metric(3, 0.1, 0.5, 2)};
  for (const ManifoldSpec& spec : models) {
    for (const TangentVector& v : sample_unit_vectors(spec, default_anchor(spec), 3, 21)) {
      const auto traj = integrate_geodesic(spec, v, -10.0, 50.0, 1e-11);
      ASSERT_FALSE(traj.truncated()) << spec.tag();
      const int m = spec.dimension() - 1;
      for (double t = -10.0; t <= 50.0; t += 2.5) {
        EXPECT_LE(speed_defect(traj, t), 1e-7) << spec.tag() << " t=" << t;
        const Mat g = spec.metric(traj.point(t));
        const Mat e = traj.frame(t);
        EXPECT_LE((e.transpose() * g * e - Mat::Identity(m, m)).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LE((e.transpose() * g * traj.velocity(t)).cwiseAbs().maxCoeff(), 1e-8);
      }
      // Covariant derivative of the frame, by central differences in time.
      const double h = 1e-4;
      for (double t : {0.5, 3.0, 7.0}) {
        const std::vector<double> gamma = christoffel_at(spec, traj.point(t));
        const Vec c = traj.velocity(t);
        const Mat de = (traj.frame(t + h) - traj.frame(t - h)) / (2 * h);
        const int n = spec.dimension();
        for (int col = 0; col < m; ++col) {
          Vec cov = de.col(col);
          for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
              for (int j = 0; j < n; ++j)
                cov[k] += gamma[(k * n + i) * n + j] * c[i] * traj.frame(t)(j, col);
          EXPECT_LE(norm(spec.metric(traj.point(t)), cov), 1e-7) << spec.tag();
        }
      }
    }
  }
}

TEST(GeodesicInvariants, FlowPropertyAndReversal) {
  const std::vector<ManifoldSpec> models = {make_hyperbolic(3, 1.0), make_sl2r(-2.0, 1.0),
                                            make_heisenberg(1.0), make_euclidean(3)};
  for (const ManifoldSpec& spec : models) {
    for (const TangentVector& v : sample_unit_vectors(spec, default_anchor(spec), 3, 5)) {
      const auto full = integrate_geodesic(spec, v, -8.0, 20.0, 1e-12);
      const double t1 = 7.0, t2 = 13.0;
      const TangentVector mid = full.flow(t1);
      const auto second = integrate_geodesic(spec, mid, 0.0, t2, 1e-12);
      EXPECT_LE((second.point(t2) - full.point(t1 + t2)).norm(), 1e-6) << spec.tag();
      const auto rev = integrate_geodesic(spec, v.reversed(), 0.0, 8.0, 1e-12);
      for (double t : {1.0, 4.0, 8.0})
        EXPECT_LE((rev.point(t) - full.point(-t)).norm(), 1e-7) << spec.tag();
    }
  }
}

TEST(ParallelTransport, IsometryAndRoundTrip) {
  const ManifoldSpec e = make_euclidean(3);
  const auto line = integrate_geodesic(e, {Vec::Zero(3), Vec::Unit(3, 1)}, 0.0, 4.0);
  const Vec w = pt({0.3, -1.0, 2.0});
  EXPECT_LT((parallel_transport(line, w, 0.0, 4.0) - w).norm(), 1e-12);

  const ManifoldSpec h2 = make_hyperbolic(2, 1.0);
  const auto up = integrate_geodesic(h2, {pt({0, 1}), Vec::Unit(2, 1)}, 0.0, 1.0, 1e-12);
  const Vec e1 = up.frame(0.0).col(0);
  const Vec moved = parallel_transport(up, e1, 0.0, 1.0);
  const Mat g1 = h2.metric(up.point(1.0));
  EXPECT_NEAR(norm(g1, moved), 1.0, 1e-8);
  EXPECT_NEAR(inner(g1, moved, up.velocity(1.0)), 0.0, 1e-8);

  const ManifoldSpec heis = make_heisenberg(1.0);
  const TangentVector v = sample_unit_vectors(heis, default_anchor(heis), 1, 3)[0];
  const auto traj = integrate_geodesic(heis, v, -2.0, 3.0);
  const Vec w0 = pt({0.2, 0.5, -0.7});
  const Vec there = parallel_transport(traj, w0, 0.0, 2.5);
  EXPECT_NEAR(norm(heis.metric(traj.point(2.5)), there), norm(heis.metric(v.base), w0), 1e-8);
  EXPECT_LT((parallel_transport(traj, there, 2.5, 0.0) - w0).norm(), 1e-7);
  EXPECT_THROW(parallel_transport(traj, w0, 0.0, 5.0), Error);
}

TEST(Distance, ClosedForms) {
  const ManifoldSpec h2 = make_hyperbolic(2, 1.0);
  EXPECT_NEAR(distance(h2, pt({0, 1}), pt({0, std::exp(1.0)})), 1.0, 1e-10);
  EXPECT_DOUBLE_EQ(distance(make_euclidean(3), Vec::Zero(3), pt({3, 4, 0})), 5.0);
  const ManifoldSpec prod = make_product(h2, make_euclidean(1));
  EXPECT_NEAR(distance(prod, pt({0, 1, 0}), pt({0, std::exp(1.0), 1})), std::sqrt(2.0), 1e-8);
}

TEST(Distance, ExactSymmetry) {
  const ManifoldSpec heis = make_heisenberg(1.0);
  const ChartPoint p = pt({0.1, 0.2, -0.3}), q = pt({0.5, -0.4, 0.6});
  EXPECT_EQ(distance(heis, p, q), distance(heis, q, p));
  const ManifoldSpec h3 = make_hyperbolic(3, 2.0);
  const ChartPoint a = pt({0.1, 0.2, 0.3}), b = pt({-1, 0.4, 2});
  EXPECT_EQ(distance(h3, a, b), distance(h3, b, a));
}

TEST(GeodesicBetween, EuclideanChordAndHyperbolicVertical) {
  const auto e = geodesic_between(make_euclidean(3), Vec::Zero(3), pt({1, 2, 2}));
  EXPECT_LT((e.initial.components - pt({1, 2, 2}) / 3.0).norm(), 1e-10);
  EXPECT_NEAR(e.length, 3.0, 1e-10);

  const auto h = geodesic_between(make_hyperbolic(2, 1.0), pt({0, 1}), pt({0, std::exp(1.0)}));
  EXPECT_LT((h.initial.components - Vec::Unit(2, 1)).norm(), 1e-8);
  EXPECT_NEAR(h.length, 1.0, 1e-8);
}

TEST(GeodesicBetween, HyperbolicRoundTripAndClosedFormAgreement) {
  const ManifoldSpec h3 = make_hyperbolic(3, 1.0);
  CounterRng rng(17);
  for (int s = 0; s < 5; ++s) {
    ChartPoint p = pt({rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(0.8, 1.5)});
    ChartPoint q = pt({rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(0.8, 1.5)});
    const auto r = geodesic_between(h3, p, q, 1e-10);
    const auto traj = integrate_geodesic(h3, r.initial, 0.0, r.length, 1e-12);
    EXPECT_LE((traj.point(r.length) - q).norm(), 1e-6);
    EXPECT_NEAR(r.length, distance(h3, p, q), 1e-7);
  }
}

TEST(GeodesicBetween, RejectsCoincidentPoints) {
  EXPECT_THROW(geodesic_between(make_euclidean(2), Vec::Zero(2), Vec::Zero(2)), Error);
}

// Divergence of distinct rays from a common footpoint in H^3.
TEST(GeodesicInvariants, DivergenceProbe) {
  const ManifoldSpec h3 = make_hyperbolic(3, 1.0);
  const auto vs = sample_unit_vectors(h3, default_anchor(h3), 6, 8);
  for (std::size_t i = 0; i + 1 < vs.size(); ++i) {
    const auto a = integrate_geodesic(h3, vs[i], 0.0, 10.0);
    const auto b = integrate_geodesic(h3, vs[i + 1], 0.0, 10.0);
    double prev = -1.0;
    for (double t = 1.0; t <= 10.0 + 1e-12; t += 0.5) {
      const double d = distance(h3, a.point(t), b.point(t));
      EXPECT_GT(d, prev) << t;
      prev = d;
    }
  }
}
