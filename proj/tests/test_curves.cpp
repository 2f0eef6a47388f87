#include "flowinv/curves.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace flowinv;
using namespace flowinv::curves;

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

// Arclength of the trefoil (sin t + 2 sin 2t, cos t - 2 cos 2t, -sin 3t),
// frozen from a 2e6-point quadrature.
constexpr double kTrefoilLength = 28.826290198885662;

TEST(Resample, CircleLengthPreserved) {
  PolyCurve c = make_circle(1.0, {}, 100);
  PolyCurve r = resample(c, 200);
  EXPECT_EQ(r.size(), 200);
  EXPECT_NEAR(r.length(), kTwoPi, 1e-3 * kTwoPi);
}

TEST(Resample, IdempotentOnUniformCurve) {
  PolyCurve c = make_circle(1.0, {}, 128);
  PolyCurve r = resample(c, 128);
  for (int i = 0; i < 128; ++i)
    EXPECT_LT((r.points[i] - c.points[i]).norm(), 1e-12);
}

TEST(Resample, TrefoilLengthMatchesDenseQuadrature) {
  PolyCurve c = make_trefoil(512);
  PolyCurve r = resample(c, 512);
  EXPECT_NEAR(r.length(), kTrefoilLength, 0.005 * kTrefoilLength);
}

TEST(Resample, RejectsDegenerate) {
  EXPECT_THROW(resample(make_circle(), 2), std::invalid_argument);
  EXPECT_THROW(make_curve({{0, 0, 0}, {0, 0, 0}, {1, 0, 0}}), std::invalid_argument);
}

TEST(Tangent, CircleAtAngleZero) {
  int m = 512;
  PolyCurve c = make_circle(1.0, {}, m);
  Vec3 t0 = tangent(c, 0);
  EXPECT_NEAR(t0.x, 0.0, 4.0 / m);
  EXPECT_NEAR(t0.y, 1.0, 4.0 / m);
  EXPECT_NEAR(t0.z, 0.0, 1e-15);
  Vec3 tc = tangent_central(c, 0);
  EXPECT_NEAR(tc.x, 0.0, 4.0 / m);
  EXPECT_NEAR(tc.y, 1.0, 4.0 / m);
}

TEST(Tangent, StraightSegmentExact) {
  PolyCurve c = make_curve({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}}, true);
  Vec3 t0 = tangent(c, 0);
  EXPECT_DOUBLE_EQ(t0.x, 1.0);
  EXPECT_DOUBLE_EQ(t0.y, 0.0);
}

TEST(Tangent, UnitNorm) {
  PolyCurve c = make_trefoil(257);
  for (int i = 0; i < c.segment_count(); ++i)
    EXPECT_NEAR(tangent(c, i).norm(), 1.0, 1e-12);
}

TEST(CloseOrbit, NearPeriodicOrbitHasTinyClosure) {
  // open polyline that returns almost exactly to its start
  std::vector<Vec3> pts;
  int n = 200;
  for (int i = 0; i < n; ++i) {
    double t = kTwoPi * i / (n - 1) * (1 - 1e-9);
    pts.push_back({std::cos(t), std::sin(t), 0});
  }
  PolyCurve orbit = make_curve(std::move(pts), false);
  OrbitKnot k = close_orbit(orbit, ShortPathSystem::straight());
  EXPECT_LT(k.closure_length, 1e-6);
  EXPECT_TRUE(k.closed_curve.closed);
}

TEST(CloseOrbit, StraightClosureLength) {
  // endpoints 0.3 apart
  PolyCurve orbit = make_curve({{0, 0, 0}, {0.15, 0, 0}, {0.3, 0.0, 0.0}, {0.3, 0.3, 0}}, false);
  OrbitKnot k = close_orbit(orbit, ShortPathSystem::straight());
  double gap = (orbit.points.back() - orbit.points.front()).norm();
  EXPECT_GE(k.closure_length, gap - 1e-12);
  EXPECT_LE(k.closure_length, gap * 1.01);
}

TEST(CloseOrbit, RulesDifferOnlyInClosureArc) {
  std::vector<Vec3> pts;
  for (int i = 0; i <= 64; ++i) {
    double t = 4.5 * i / 64;
    pts.push_back({std::cos(t), std::sin(t), 0.1 * t});
  }
  PolyCurve orbit = make_curve(std::move(pts), false);
  OrbitKnot a = close_orbit(orbit, ShortPathSystem::straight());
  OrbitKnot b = close_orbit(orbit, ShortPathSystem::dogleg(0.3));
  ASSERT_EQ(a.orbit_points.size(), b.orbit_points.size());
  for (int i = 0; i < a.orbit_points.size(); ++i)
    EXPECT_EQ(a.orbit_points.points[static_cast<size_t>(i)],
              b.orbit_points.points[static_cast<size_t>(i)]);
  EXPECT_GT(b.closure_length, a.closure_length);  // dogleg is strictly longer
}

TEST(Link, RejectsTouchingComponents) {
  PolyCurve a = make_circle(1.0, {}, 64);
  PolyCurve b = make_circle(1.0, {}, 64);  // identical -> distance 0
  EXPECT_THROW(make_link({a, b}), std::invalid_argument);
  PolyCurve c = make_circle(1.0, {0, 0, 10}, 64);
  EXPECT_NO_THROW(make_link({a, c}));
}

TEST(KnotFile, RoundTripIsExact) {
  Link l;
  l.components.push_back(make_trefoil(64));
  l.components.push_back(make_circle(0.7, {3, 1, -2}, 32));
  std::ostringstream os;
  write_knot_file(os, l);
  std::istringstream is(os.str());
  Link back = read_knot_file(is);
  ASSERT_EQ(back.components.size(), 2u);
  for (size_t ci = 0; ci < 2; ++ci) {
    ASSERT_EQ(back.components[ci].size(), l.components[ci].size());
    for (int i = 0; i < l.components[ci].size(); ++i)
      EXPECT_EQ(back.components[ci].points[static_cast<size_t>(i)],
                l.components[ci].points[static_cast<size_t>(i)]);
  }
}

TEST(KnotFile, MalformedLineReported) {
  std::istringstream is("0 0 0\n1 nope 0\n");
  EXPECT_THROW(read_knot_file(is), std::runtime_error);
}

}  // namespace
