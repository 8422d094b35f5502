#include <stdexcept>
#include <cmath>
#include <vector>

#include "delusive/numerics.hpp"
#include "delusive/threat_model.hpp"
#include "doctest.h"

using namespace delusive;

namespace {
const std::vector<double> kCenter{1.0, -2.0, 0.5};
}

TEST_CASE("contains accepts the center and interior points") {
  ThreatBall linf{NormKind::Linf, 0.3, {}, {}};
  CHECK(contains(linf, kCenter, kCenter));
  std::vector<double> p{1.2, -2.3, 0.5};
  CHECK(contains(linf, kCenter, p));
  p[0] = 1.31;
  CHECK_FALSE(contains(linf, kCenter, p));
  // boundary plus the membership tolerance still counts
  p = {1.3 + 0.5e-9, -2.0, 0.5};
  CHECK(contains(linf, kCenter, p));

  ThreatBall l2{NormKind::L2, 0.5, {}, {}};
  std::vector<double> q{1.3, -2.4, 0.5};  // displacement (0.3, -0.4, 0): l2 = 0.5
  CHECK(contains(l2, kCenter, q));
  q[2] = 0.52;
  CHECK_FALSE(contains(l2, kCenter, q));
}

TEST_CASE("project clips Linf coordinatewise and is idempotent") {
  ThreatBall ball{NormKind::Linf, 0.25, {}, {}};
  const std::vector<double> far{9.0, -2.1, -4.0};
  const std::vector<double> p = project(ball, kCenter, far);
  CHECK(p[0] == doctest::Approx(1.25));
  CHECK(p[1] == doctest::Approx(-2.1));
  CHECK(p[2] == doctest::Approx(0.25));
  CHECK(contains(ball, kCenter, p));
  CHECK(project(ball, kCenter, p) == p);
  // already-inside points come back unchanged
  const std::vector<double> inside{1.1, -2.0, 0.4};
  CHECK(project(ball, kCenter, inside) == inside);
}

TEST_CASE("project scales L2 radially") {
  ThreatBall ball{NormKind::L2, 1.0, {}, {}};
  const std::vector<double> far{4.0, -2.0, 0.5};  // displacement (3, 0, 0)
  const std::vector<double> p = project(ball, kCenter, far);
  CHECK(p[0] == doctest::Approx(2.0));
  CHECK(p[1] == doctest::Approx(-2.0));
  CHECK(p[2] == doctest::Approx(0.5));
  CHECK(contains(ball, kCenter, p));
  const std::vector<double> pp = project(ball, kCenter, p);
  for (std::size_t i = 0; i < 3; ++i) CHECK(pp[i] == doctest::Approx(p[i]).epsilon(1e-12));
}

TEST_CASE("mask freezes zero coordinates and scales the rest") {
  ThreatBall ball{NormKind::Linf, 0.1, std::vector<double>{1.0, 0.0, 2.0}, {}};
  const std::vector<double> far{2.0, 3.0, 2.0};
  const std::vector<double> p = project(ball, kCenter, far);
  CHECK(p[0] == doctest::Approx(1.1));   // budget 0.1
  CHECK(p[1] == doctest::Approx(-2.0));  // frozen
  CHECK(p[2] == doctest::Approx(0.7));   // budget 0.1 * 2
  CHECK(contains(ball, kCenter, p));
  // a frozen coordinate off-center is outside no matter how close
  std::vector<double> off = kCenter;
  off[1] += 1e-6;
  CHECK_FALSE(contains(ball, kCenter, off));
}

TEST_CASE("clamp restricts the perturbed point box-wise") {
  ThreatBall ball{NormKind::Linf, 5.0, {}, std::pair<double, double>{0.0, 1.0}};
  const std::vector<double> center{0.5, 0.5, 0.5};
  const std::vector<double> far{9.0, -9.0, 0.75};
  const std::vector<double> p = project(ball, center, far);
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == doctest::Approx(0.0));
  CHECK(p[2] == doctest::Approx(0.75));
  CHECK(contains(ball, center, p));
  CHECK_FALSE(contains(ball, center, far));
}

TEST_CASE("random_point stays inside the ball") {
  Rng rng(5);
  ThreatBall linf{NormKind::Linf, 0.2, {}, {}};
  ThreatBall l2{NormKind::L2, 0.7, {}, {}};
  ThreatBall masked{NormKind::Linf, 0.2, std::vector<double>{1.0, 0.0, 3.0}, {}};
  for (int i = 0; i < 500; ++i) {
    CHECK(contains(linf, kCenter, random_point(linf, kCenter, rng)));
    CHECK(contains(l2, kCenter, random_point(l2, kCenter, rng)));
    const std::vector<double> p = random_point(masked, kCenter, rng);
    CHECK(contains(masked, kCenter, p));
    CHECK(p[1] == kCenter[1]);  // frozen coordinate untouched
  }
}

TEST_CASE("random_point with radius zero returns the center and draws nothing") {
  Rng rng(9);
  const Rng before = rng;
  ThreatBall ball{NormKind::Linf, 0.0, {}, {}};
  const std::vector<double> p = random_point(ball, kCenter, rng);
  CHECK(p == kCenter);
  CHECK(rng == before);
}

TEST_CASE("linf random points eventually explore the whole box") {
  Rng rng(31);
  ThreatBall ball{NormKind::Linf, 1.0, {}, {}};
  const std::vector<double> c{0.0, 0.0};
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i < 4000; ++i) {
    const std::vector<double> p = random_point(ball, c, rng);
    lo = std::min(lo, p[0]);
    hi = std::max(hi, p[0]);
  }
  CHECK(lo < -0.99);
  CHECK(hi > 0.99);
}

TEST_CASE("threat ball rejects malformed inputs") {
  ThreatBall ball{NormKind::Linf, 0.1, {}, {}};
  const std::vector<double> shorter{1.0, 2.0};
  CHECK_THROWS_AS(contains(ball, kCenter, shorter), std::domain_error);

  ThreatBall bad_mask{NormKind::Linf, 0.1, std::vector<double>{1.0}, {}};
  CHECK_THROWS_AS(contains(bad_mask, kCenter, kCenter), std::domain_error);

  ThreatBall neg_mask{NormKind::Linf, 0.1, std::vector<double>{1.0, -1.0, 1.0}, {}};
  CHECK_THROWS_AS(project(neg_mask, kCenter, kCenter), std::domain_error);

  ThreatBall neg_radius{NormKind::Linf, -0.5, {}, {}};
  CHECK_THROWS_AS(contains(neg_radius, kCenter, kCenter), std::domain_error);

  ThreatBall bad_clamp{NormKind::Linf, 0.1, {}, std::pair<double, double>{1.0, 0.0}};
  Rng rng(1);
  CHECK_THROWS_AS(random_point(bad_clamp, kCenter, rng), std::domain_error);
}
