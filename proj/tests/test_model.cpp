#include <catch_amalgamated.hpp>

#include <random>

#include "isq/model.hpp"

using namespace isq;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SingularPoint point(const Point& x, double Z, double radius, double inner, double outer) {
  SingularPoint p;
  p.position = x;
  p.Z = Z;
  p.cutoff_radius = radius;
  p.cutoff = {inner, outer};
  return p;
}

}  // namespace

TEST_CASE("rho examples", "[model]") {
  const PotentialSpec spec(Domain::torus(), {point(Point(0.5, 0.5, 0.5), 1.0, 0.2, 0.15, 0.2)});
  CHECK(rho(Point(0.5, 0.5, 0.5), spec) == 0.0);
  CHECK_THAT(rho(Point(0.6, 0.5, 0.5), spec), WithinAbs(0.1, 1e-15));
  CHECK(rho(Point(0.05, 0.05, 0.05), spec) == 1.0);
  CHECK(rho(Point(0.5, 0.5, 0.75), spec) == 1.0);
}

TEST_CASE("rho is monotone in the distance and bounded by one", "[model]") {
  const PotentialSpec spec(Domain::torus(), {point(Point(0.3, 0.3, 0.3), 0.0, 0.3, 0.1, 0.25)});
  double prev = 0.0;
  for (int i = 1; i <= 400; ++i) {
    const double d = 0.45 * i / 400.0;
    const double r = rho(Point(0.3 + d, 0.3, 0.3), spec);
    CHECK(r >= prev - 1e-15);
    CHECK(r <= 1.0);
    prev = r;
  }
}

TEST_CASE("potential examples", "[model]") {
  const PotentialSpec spec(Domain::ball(2.0), {point(Point::Zero(), 2.0, 1.0, 0.75, 1.0)});
  CHECK_THAT(eval_potential(Point(0.5, 0.0, 0.0), spec), WithinRel(8.0, 1e-15));
  CHECK_THROWS_AS(eval_potential(Point::Zero(), spec), Error);

  TrigPolynomial c;
  c.constant = 3.25;
  const PotentialSpec flat(Domain::torus(), {}, c);
  CHECK(eval_potential(Point(0.1, 0.7, 0.3), flat) == 3.25);

  const PotentialSpec crit(Domain::torus(), {point(Point(0.5, 0.5, 0.5), -3.0 / 16.0, 0.2, 0.1, 0.2)});
  for (double d : {1e-2, 1e-4, 1e-6}) {
    const Point x(0.5 + d, 0.5, 0.5);
    CHECK_THAT(d * d * eval_potential(x, crit), WithinAbs(-3.0 / 16.0, 1e-9));
  }
}

TEST_CASE("torus distance examples and properties", "[model]") {
  CHECK_THAT(torus_distance(Point(0.1, 0, 0), Point(0.9, 0, 0)), WithinAbs(0.2, 1e-15));
  CHECK(torus_distance(Point(0.3, 0.2, 0.1), Point(0.3, 0.2, 0.1)) == 0.0);
  CHECK_THAT(torus_distance(Point::Zero(), Point(0.5, 0.5, 0.5)), WithinAbs(std::sqrt(3.0) / 2.0, 1e-15));

  std::mt19937 gen(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Point x(U(gen), U(gen), U(gen)), y(U(gen), U(gen), U(gen)), z(U(gen), U(gen), U(gen));
    const double dxy = torus_distance(x, y);
    CHECK(dxy <= std::sqrt(3.0) / 2.0 + 1e-15);
    CHECK(dxy == torus_distance(y, x));
    CHECK(dxy <= torus_distance(x, z) + torus_distance(z, y) + 1e-14);
    CHECK_THAT(torus_distance(x + Point(1, -2, 3), y), WithinAbs(dxy, 1e-14));
  }
}

TEST_CASE("spec validation", "[model]") {
  CHECK_THROWS_AS(Domain::ball(0.0), Error);
  CHECK_THROWS_AS(PotentialSpec(Domain::torus(), {point(Point(0.5, 0.5, 0.5), 1.0, 0.5, 0.1, 0.2)}), Error);
  CHECK_THROWS_AS(PotentialSpec(Domain::torus(), {point(Point(0.5, 0.5, 0.5), 1.0, 0.2, 0.2, 0.1)}), Error);
  CHECK_THROWS_AS(PotentialSpec(Domain::torus(), {point(Point(0.2, 0.5, 0.5), 1.0, 0.2, 0.1, 0.2),
                                                  point(Point(0.5, 0.5, 0.5), 1.0, 0.2, 0.1, 0.2)}),
                  Error);
  const PotentialSpec ok(Domain::torus(), {point(Point(0.5, 0.5, 0.5), -0.2, 0.2, 0.1, 0.2)});
  CHECK(ok.assumption2_satisfied());
  const PotentialSpec bad(Domain::torus(), {point(Point(0.5, 0.5, 0.5), -0.25, 0.2, 0.1, 0.2)});
  CHECK_FALSE(bad.assumption2_satisfied());
}

TEST_CASE("smooth parts", "[model]") {
  TrigPolynomial tp;
  tp.constant = 1.0;
  tp.terms.push_back({-2.0, {1, 0, 0}, false});
  tp.terms.push_back({0.5, {0, 1, 1}, true});
  CHECK_THAT(tp(Point::Zero()), WithinAbs(-1.0, 1e-15));
  CHECK(tp.lower_bound() == -1.5);
  RadialProfile rp;
  rp.core_value = -1.0;
  rp.far_value = 5.0;
  rp.far_gradient = Point(2.0, 0.0, 0.0);
  rp.transition_inner = 1.0;
  rp.transition_outer = 2.0;
  CHECK(rp(Point(0.5, 0.0, 0.0)) == -1.0);
  CHECK_THAT(rp(Point(-3.0, 0.0, 0.0)), WithinAbs(3.0, 1e-15));
  CHECK(rp.lower_bound() == -1.0);
}
