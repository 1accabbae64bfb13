#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "horolab/error.hpp"
#include "horolab/jacobi.hpp"
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

TangentVector h3_vector(int index = 0) {
  return sample_unit_vectors(h3(), default_anchor(h3()), index + 1, 101)[index];
}

// Unit vector tangent to the H^2 factor of H^2 x R at ((0,1),0).
TangentVector h2r_factor_vector() { return {pt({0, 1, 0}), pt({1, 0, 0})}; }

}  // namespace

TEST(IntegrateJacobi, EuclideanLinear) {
  const ManifoldSpec e = make_euclidean(3);
  const auto traj = integrate_geodesic(e, {Vec::Zero(3), Vec::Unit(3, 0)}, 0.0, 3.0);
  const auto s = integrate_jacobi(traj, Mat::Zero(2, 2), I(2), 3.0);
  EXPECT_LT((s.J - 3.0 * I(2)).norm(), 1e-12);
  EXPECT_LT((s.J_prime - I(2)).norm(), 1e-12);
}

TEST(IntegrateJacobi, HyperbolicSinh) {
  const auto traj = integrate_geodesic(h3(), h3_vector(), 0.0, 1.0);
  const auto s = integrate_jacobi(traj, Mat::Zero(2, 2), I(2), 1.0);
  EXPECT_LT((s.J - std::sinh(1.0) * I(2)).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_LT((s.J_prime - std::cosh(1.0) * I(2)).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(IntegrateJacobi, NegativeTargetsAndShortTrajectory) {
  const auto traj = integrate_geodesic(h3(), h3_vector(), -2.0, 1.0);
  const auto s = integrate_jacobi(traj, Mat::Zero(2, 2), I(2), -2.0);
  EXPECT_LT((s.J + std::sinh(2.0) * I(2)).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_THROW(integrate_jacobi(traj, Mat::Zero(2, 2), I(2), 3.0), Error);
  EXPECT_THROW(integrate_jacobi(traj, Mat::Zero(3, 3), I(3), 0.5), Error);
}

TEST(ATensor, Examples) {
  const auto traj = integrate_geodesic(h3(), h3_vector(), 0.0, 2.0);
  EXPECT_LT((a_tensor(traj, 1.0).J - std::sinh(1.0) * I(2)).cwiseAbs().maxCoeff(), 1e-7);

  const ManifoldSpec e = make_euclidean(3);
  const auto line = integrate_geodesic(e, {Vec::Zero(3), Vec::Unit(3, 2)}, 0.0, 2.0);
  EXPECT_LT((a_tensor(line, 2.0).J - 2.0 * I(2)).norm(), 1e-12);

  const ManifoldSpec h2 = make_hyperbolic(2, 1.5);
  const auto arc = integrate_geodesic(h2, sample_unit_vectors(h2, pt({0, 1}), 1, 3)[0], 0.0, 1.0);
  EXPECT_NEAR(a_tensor(arc, 1.0).J(0, 0), std::sinh(1.5) / 1.5, 1e-7);
}

TEST(BvpStable, HyperbolicAndEuclidean) {
  const auto traj = integrate_geodesic(h3(), h3_vector(), 0.0, 8.0);
  double asym = -1.0;
  EXPECT_LT((bvp_stable_approx(traj, 2.0, &asym) + (1.0 / std::tanh(2.0)) * I(2)).cwiseAbs().maxCoeff(),
            1e-7);
  EXPECT_LE(asym, 1e-9);
  const Mat s1 = bvp_stable_approx(traj, 1.0);
  const Mat s2 = bvp_stable_approx(traj, 2.0);
  EXPECT_GT(min_eigenvalue(s2 - s1), 0.0);

  const ManifoldSpec e = make_euclidean(3);
  const auto line = integrate_geodesic(e, {Vec::Zero(3), Vec::Unit(3, 0)}, 0.0, 5.0);
  EXPECT_LT((bvp_stable_approx(line, 5.0) + 0.2 * I(2)).norm(), 1e-12);
  EXPECT_THROW(bvp_stable_approx(line, 0.0), Error);
}

TEST(BvpUnstable, ReverseTrajectoryMatchesDirectBackwardSolve) {
  const TangentVector v = h3_vector();
  const auto fwd = integrate_geodesic(h3(), v, -4.0, 4.0);
  const auto rev = integrate_geodesic(h3(), v.reversed(), 0.0, 4.0, 1e-11, fwd.initial_frame());
  const Mat u = bvp_unstable_approx(rev, 2.0);
  EXPECT_LT((u - (1.0 / std::tanh(2.0)) * I(2)).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_LT((u - bvp_unstable_direct(fwd, 2.0)).cwiseAbs().maxCoeff(), 1e-8);

  const ManifoldSpec e = make_euclidean(3);
  const TangentVector w{Vec::Zero(3), Vec::Unit(3, 1)};
  const auto line = integrate_geodesic(e, w, -5.0, 5.0);
  const auto back = integrate_geodesic(e, w.reversed(), 0.0, 5.0, 1e-11, line.initial_frame());
  EXPECT_LT((bvp_unstable_approx(back, 5.0) - 0.2 * I(2)).norm(), 1e-12);

  for (const ManifoldSpec& spec : {make_sl2r(-2.0, 1.0), make_heisenberg(1.0)}) {
    const TangentVector x = sample_unit_vectors(spec, default_anchor(spec), 1, 4)[0];
    const auto f = integrate_geodesic(spec, x, -1.0, 1.0);
    const auto b = integrate_geodesic(spec, x.reversed(), 0.0, 1.0, 1e-11, f.initial_frame());
    EXPECT_LT((bvp_unstable_approx(b, 1.0) - bvp_unstable_direct(f, 1.0)).cwiseAbs().maxCoeff(),
              1e-8)
        << spec.tag();
  }
}

TEST(StableTensor, HyperbolicLimits) {
  const auto traj = integrate_geodesic(h3(), h3_vector(), -64.0, 64.0);
  const auto s = stable_tensor(traj);
  const auto u = unstable_tensor(traj);
  EXPECT_TRUE(s.converged);
  EXPECT_LT((s.S + I(2)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((u.S - I(2)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(s.residual, 1e-6);
}

TEST(StableTensor, EuclideanAndProduct) {
  const ManifoldSpec e = make_euclidean(3);
  const auto line = integrate_geodesic(e, {Vec::Zero(3), Vec::Unit(3, 0)}, -64.0, 64.0);
  EXPECT_LT(stable_tensor(line).S.norm(), 1e-9);
  EXPECT_LT(unstable_tensor(line).S.norm(), 1e-9);

  const auto traj = integrate_geodesic(h2r(), h2r_factor_vector(), -64.0, 64.0);
  Mat expected_s = Mat::Zero(2, 2), expected_u = Mat::Zero(2, 2);
  // The frame puts the H^2 normal direction first and ∂_R second.
  const Mat frame = traj.initial_frame();
  const int h2_col = std::abs(frame(2, 0)) < 0.5 ? 0 : 1;
  expected_s(h2_col, h2_col) = -1.0;
  expected_u(h2_col, h2_col) = 1.0;
  EXPECT_LT((stable_tensor(traj).S - expected_s).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((unstable_tensor(traj).S - expected_u).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(StableTensor, ShortTrajectoryFails) {
  const auto traj = integrate_geodesic(h3(), h3_vector(), 0.0, 3.0);
  EXPECT_THROW(stable_tensor(traj), Error);
}

TEST(Riccati, FixedPointTanhAndBlowUp) {
  const auto traj = integrate_geodesic(h3(), h3_vector(), 0.0, 10.0);
  EXPECT_LT((riccati_propagate(traj, -I(2), 3.0) + I(2)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((riccati_propagate(traj, Mat::Zero(2, 2), 10.0) - I(2)).norm(), 1e-4);
  EXPECT_NEAR(riccati_propagate(traj, Mat::Zero(2, 2), 1.0)(0, 0), std::tanh(1.0), 1e-9);
  try {
    riccati_propagate(traj, -2.0 * I(2), 5.0);
    FAIL() << "expected blow-up";
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::BlowUp);
    ASSERT_TRUE(err.value().has_value());
    EXPECT_NEAR(*err.value(), std::atanh(0.5), 1e-6);
  }
  Mat asym = I(2);
  asym(0, 1) = 0.5;
  EXPECT_THROW(riccati_propagate(traj, asym, 1.0), Error);
}

TEST(Wronskian, SelfStableAndConstancy) {
  const std::vector<std::pair<ManifoldSpec, TangentVector>> cases = {
      {h3(), h3_vector()}, {h2r(), h2r_factor_vector()}};
  for (const auto& [spec, v] : cases) {
    const auto traj = integrate_geodesic(spec, v, -64.0, 64.0);
    const Mat S = stable_tensor(traj).S;
    const Mat U = unstable_tensor(traj).S;
    const int m = spec.dimension() - 1;
    const JacobiSolution sv(traj, I(m), S, 5.0);
    const JacobiSolution uv(traj, I(m), U, 5.0);
    const Mat omega0 = wronskian(uv.state(0.0), sv.state(0.0)).omega;
    EXPECT_LT((omega0 - (U - S)).norm(), 1e-12);
    for (double t = 0.0; t <= 5.0; t += 0.5) {
      EXPECT_LT(wronskian(sv.state(t), sv.state(t)).omega.norm(), 1e-7) << spec.tag();
      EXPECT_LT((wronskian(uv.state(t), sv.state(t)).omega - omega0).norm(), 1e-7) << spec.tag();
    }
  }
  const auto traj = integrate_geodesic(h3(), h3_vector(), -64.0, 64.0);
  const Mat d = unstable_tensor(traj).S - stable_tensor(traj).S;
  EXPECT_LT((d - 2.0 * I(2)).cwiseAbs().maxCoeff(), 2e-6);
}

TEST(Wronskian, RejectsMismatchedStates) {
  const auto a = integrate_geodesic(h3(), h3_vector(0), 0.0, 2.0);
  const auto b = integrate_geodesic(h3(), h3_vector(0), 0.0, 2.0);
  const auto sa = a_tensor(a, 1.0);
  EXPECT_THROW(wronskian(sa, a_tensor(b, 1.0)), Error);
  EXPECT_THROW(wronskian(sa, a_tensor(a, 1.5)), Error);
}

// Invariants over sampled vectors on H^3 and H^2 x R.
TEST(JacobiInvariants, MonotonicityAndUpperBound) {
  for (const ManifoldSpec& spec : {h3(), h2r()}) {
    for (const TangentVector& v : sample_unit_vectors(spec, default_anchor(spec), 4, 31)) {
      const auto traj = integrate_geodesic(spec, v, -1.0, 16.0);
      const FundamentalSolution fwd(traj, 16.0);
      const Mat u1 = FundamentalSolution(traj, -1.0).boundary_derivative(-1.0).derivative;
      Mat prev;
      for (double r : {0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 16.0}) {
        const Mat s = fwd.boundary_derivative(r).derivative;
        if (prev.size()) EXPECT_GE(min_eigenvalue(s - prev), -1e-8);
        EXPECT_GE(min_eigenvalue(u1 - s), -1e-8);
        prev = s;
      }
    }
  }
}

TEST(JacobiInvariants, CocycleRelation) {
  for (const ManifoldSpec& spec : {h3(), h2r()}) {
    const TangentVector v = sample_unit_vectors(spec, default_anchor(spec), 1, 41)[0];
    const auto traj = integrate_geodesic(spec, v, -64.0, 70.0);
    const int m = spec.dimension() - 1;
    const Mat S = stable_tensor(traj).S;
    const JacobiSolution sv(traj, I(m), S, 6.0);
    for (double t0 : {0.5, 1.5, 3.0}) {
      const auto shifted = shifted_trajectory(traj, t0, -64.0, 64.0);
      const Mat S_shift = stable_tensor(shifted).S;
      const JacobiSolution s_shift(shifted, I(m), S_shift, 3.0);
      const Mat inv = sv.state(t0).J.inverse();
      for (double t : {0.0, 1.0, 3.0})
        EXPECT_LT((s_shift.state(t).J - sv.state(t + t0).J * inv).cwiseAbs().maxCoeff(), 1e-6)
            << spec.tag() << " t0=" << t0 << " t=" << t;
    }
  }
}

TEST(JacobiInvariants, RiccatiMatchesBvpAlongFlow) {
  for (const ManifoldSpec& spec : {h3(), h2r()}) {
    const TangentVector v = sample_unit_vectors(spec, default_anchor(spec), 1, 43)[0];
    const auto traj = integrate_geodesic(spec, v, -64.0, 70.0);
    const Mat S = stable_tensor(traj).S;
    for (double t : {1.0, 2.5, 5.0}) {
      const Mat propagated = riccati_propagate(traj, S, t);
      const auto shifted = shifted_trajectory(traj, t, 0.0, 64.0);
      EXPECT_LT((propagated - stable_tensor(shifted).S).cwiseAbs().maxCoeff(), 1e-5)
          << spec.tag() << " t=" << t;
    }
  }
}

// Directions of H^2 x R with H^2 share below 0.3 converge too slowly for r <= 64.
std::vector<TangentVector> well_tilted(const ManifoldSpec& spec, int count, std::uint64_t seed) {
  return sample_unit_vectors_if(spec, default_anchor(spec), count, seed, [&](const TangentVector& v) {
    if (!spec.is_product()) return true;
    const Mat g = spec.metric(v.base);
    return std::sqrt(v.components.head(2).dot(g.topLeftCorner(2, 2) * v.components.head(2))) >= 0.3;
  });
}

TEST(JacobiInvariants, LowerJacobiBound) {
  for (const ManifoldSpec& spec : {h3(), h2r()}) {
    const double r0 = spec.curvature_bounds()->r0;
    for (const TangentVector& v : well_tilted(spec, 3, 47)) {
      const auto traj = integrate_geodesic(spec, v, -1.0, 64.0);
      const int m = spec.dimension() - 1;
      const JacobiSolution sv(traj, I(m), stable_tensor(traj).S, 5.0);
      CounterRng rng(5);
      for (double r = 0.0; r <= 5.0; r += 0.5) {
        Vec w(m);
        for (int i = 0; i < m; ++i) w[i] = rng.normal();
        EXPECT_GE((sv.state(r).J * w).norm(), std::exp(-r * std::sqrt(r0)) * w.norm() * (1 - 1e-7));
      }
    }
  }
}

TEST(JacobiInvariants, ConvergenceEnvelopeOnH3) {
  const auto traj = integrate_geodesic(h3(), h3_vector(), 0.0, 32.0);
  const Mat S = -I(2);
  const FundamentalSolution fs(traj, 32.0);
  for (double r = 1.0; r <= 32.0; r *= 2.0) {
    const double gap = operator_norm(fs.boundary_derivative(r).derivative - S);
    EXPECT_NEAR(gap, 1.0 / std::tanh(r) - 1.0, 1e-8);
    EXPECT_LE(gap, 1.0 / r);
  }
}

// The limit extraction evaluates S'_{v,r}(0) through a bounded Riccati variable; at
// moderate r it must agree with the closed form -A(r)^{-1} J1(r).
TEST(StableTensor, SequenceMatchesClosedForm) {
  const ManifoldSpec spec = make_product(make_hyperbolic(2, 1.0), make_euclidean(1));
  ChartPoint x(3);
  x << 0.0, 1.0, 0.0;
  const TangentVector v = unit_vector(spec, x, pt({0.6, 0.0, 0.8}));
  const auto traj = integrate_geodesic(spec, v, -64.0, 64.0);
  const auto s = stable_tensor(traj);
  const FundamentalSolution fs(traj, 8.0);
  for (std::size_t k = 0; k < s.radii.size() && s.radii[k] <= 8.0; ++k)
    EXPECT_LT((s.sequence[k] - fs.boundary_derivative(s.radii[k]).derivative).cwiseAbs().maxCoeff(),
              1e-8);
  EXPECT_NEAR(s.S.trace(), -0.6, 1e-6);
  EXPECT_NEAR(unstable_tensor(traj).S.trace(), 0.6, 1e-6);
}
