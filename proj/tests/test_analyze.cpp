#include <catch_amalgamated.hpp>

#include <numbers>

#include "isq/analyze.hpp"
#include "isq/radial_oracle.hpp"

using namespace isq;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SingularPoint centre(double Z) {
  SingularPoint p;
  p.position = Point(0.5, 0.5, 0.5);
  p.Z = Z;
  p.cutoff_radius = 0.25;
  p.cutoff = {0.2, 0.25};
  return p;
}

}  // namespace

TEST_CASE("probe directions", "[analyze]") {
  const auto& d = probe_directions();
  REQUIRE(d.size() == 26);
  for (const auto& e : d) CHECK_THAT(e.norm(), WithinAbs(1.0, 1e-15));
  Point s = Point::Zero();
  for (const auto& e : d) s += e;
  CHECK(s.norm() < 1e-14);
}

TEST_CASE("exponent of an exact power interpolant", "[analyze]") {
  const auto p = centre(0.5);
  const PotentialSpec spec(Domain::torus(), {p});
  // 64 cells give >= 6 layer radii in the window, so every probe radius sits on a vertex layer.
  const auto mesh = build_torus_mesh(spec, 64, {0.5});
  const auto u = interpolate([&](const Point& x) { return cplx(std::pow(torus_distance(x, p.position), 0.75)); }, mesh);
  const auto f = fit_singular_exponent(u, p, FitWindow{std::nullopt, mesh->layer_radii[0].back()});
  CHECK(f.radii.size() >= 6);
  CHECK_THAT(f.slope, WithinAbs(0.75, 1e-9));
  CHECK(f.angular_variation < 1e-3);
  CHECK_FALSE(f.vanished);
}

TEST_CASE("oracle sample path recovers the Frobenius exponent", "[analyze]") {
  for (double Z : {2.0, -3.0 / 16.0, 0.5}) {
    const auto mode = make_mode(Z, 0, 1, std::numbers::pi);
    std::vector<double> radii;
    std::vector<std::vector<cplx>> samples;
    for (int i = 0; i < 8; ++i) {
      const double r = 1e-3 * std::pow(2.0, i);
      radii.push_back(r);
      samples.emplace_back(26, cplx(model_eigenfunction(mode, r)));
    }
    const auto f = fit_exponent_samples(radii, samples, 1.0);
    CHECK_THAT(f.slope, WithinAbs(mode.nu - 0.5, 1e-3));
    CHECK(f.angular_variation < 1e-12);
  }
}

TEST_CASE("an l = 1 mode keeps a large angular variation", "[analyze]") {
  const auto p = centre(0.5);
  const PotentialSpec spec(Domain::torus(), {p});
  const auto mesh = build_torus_mesh(spec, 32, {0.5});
  const double beta1 = std::sqrt(2.25 + 0.5) - 0.5;
  const auto u = interpolate(
      [&](const Point& x) {
        const Point d = torus_displacement(x, p.position);
        const double r = d.norm();
        return cplx(r == 0.0 ? 0.0 : std::pow(r, beta1) * (0.5 + d[2] / r));
      },
      mesh);
  const auto f = fit_singular_exponent(u, p);
  CHECK(f.angular_variation > 0.5);
}

TEST_CASE("vanishing functions are flagged", "[analyze]") {
  const auto p = centre(0.5);
  const PotentialSpec spec(Domain::torus(), {p});
  const auto mesh = build_torus_mesh(spec, 16, {0.5});
  auto u = interpolate([](const Point& x) { return cplx(x[0] < 0.1 ? 1.0 : 0.0); }, mesh);
  CHECK(fit_singular_exponent(u, p).vanished);
}

TEST_CASE("leading coefficient and its subtraction", "[analyze]") {
  const auto p = centre(0.5);
  const PotentialSpec spec(Domain::torus(), {p});
  // 64 cells give >= 6 layer radii in the window, so every probe radius sits on a vertex layer.
  const auto mesh = build_torus_mesh(spec, 64, {0.5});
  const double gamma = 0.75, c = 2.5;
  const auto u = interpolate(
      [&](const Point& x) {
        const double r = torus_distance(x, p.position);
        return cplx(c * std::pow(r, gamma) + 3.0 * r * r);
      },
      mesh);
  const FitWindow w{std::nullopt, mesh->layer_radii[0][3]};
  const double got = leading_coefficient(u, p, gamma, w);
  CHECK_THAT(got, WithinRel(c, 0.05));
  const auto rest = subtract_leading_term(u, p, gamma, c, spec);
  const auto f = fit_singular_exponent(rest, p, w);
  CHECK_THAT(f.slope, WithinAbs(2.0, 0.05));
}

TEST_CASE("convergence study and Richardson order", "[analyze]") {
  std::vector<RateSample> s;
  for (double h : {0.4, 0.2, 0.1, 0.05}) s.push_back({h, 0, 3.0 + 0.7 * std::pow(h, 1.5)});
  const auto [limit, order] = richardson(s);
  CHECK_THAT(limit, WithinAbs(3.0, 1e-10));
  CHECK_THAT(order, WithinAbs(1.5, 1e-8));
  const auto exact = convergence_study(s, Regime::Graded, 3.0);
  CHECK_THAT(exact.slope, WithinAbs(1.5, 1e-10));
  CHECK(exact.reference_kind == "oracle");
  CHECK_FALSE(exact.preasymptotic);
  const auto rich = convergence_study(s, Regime::Graded, std::nullopt);
  CHECK(rich.reference_kind == "richardson");
  CHECK_THAT(rich.slope, WithinAbs(1.5, 1e-6));
  std::vector<RateSample> errs;
  for (double h : {0.4, 0.2, 0.1}) errs.push_back({h, 0, h * h});
  CHECK_THAT(convergence_study(errs, Regime::Uniform, std::nullopt, true).slope, WithinAbs(2.0, 1e-12));
  CHECK_THROWS_AS(convergence_study({s[0], s[1]}, Regime::Uniform, 3.0), Error);
  std::ostringstream os;
  write_rate_csv(exact, os);
  CHECK(os.str().rfind("level,h_max,dofs,value,error\n", 0) == 0);
}

TEST_CASE("essential spectrum bound", "[analyze]") {
  RadialProfile rp;
  rp.far_value = 25.0;
  rp.transition_inner = 1.0;
  rp.transition_outer = 1.5;
  CHECK(essential_spectrum_bound(PotentialSpec(Domain::ball(3.0), {}, rp)) == 25.0);
  rp.far_value = 5.0;
  rp.far_gradient = Point(2.0, 0.0, 0.0);
  CHECK_THAT(essential_spectrum_bound(PotentialSpec(Domain::ball(3.0), {}, rp)), WithinAbs(3.0, 1e-12));
  rp.far_value = 0.0;
  rp.far_gradient = Point::Zero();
  CHECK(essential_spectrum_bound(PotentialSpec(Domain::ball(3.0), {}, rp)) == 0.0);
  CHECK_THROWS_AS(essential_spectrum_bound(PotentialSpec(Domain::torus(), {})), Error);
}

TEST_CASE("decay fit on the radial surrogate and its precondition", "[analyze]") {
  RadialProfile rp;
  rp.far_value = 25.0;
  rp.transition_inner = 1.0;
  rp.transition_outer = 1.5;
  const PotentialSpec spec(Domain::ball(3.0), {}, rp);
  const auto s = radial_decay_surrogate(spec);
  CHECK(s.lambda < 25.0);
  CHECK(s.decay.epsilon_hat > 0.0);
  CHECK(s.decay.epsilon_hat < 1.2 * s.decay.sqrt_bound);

  const auto mesh = build_ball_mesh(spec, 8);
  const auto u = interpolate([](const Point& x) { return cplx(std::exp(-2.0 * x.norm())); }, mesh);
  CHECK_THROWS_AS(decay_fit(u, 30.0, spec), Error);
  const auto d = decay_fit(u, 10.0, spec);
  CHECK_THAT(d.epsilon_hat, WithinRel(2.0, 0.1));
}

TEST_CASE("weighted regularity profile locates the integrability threshold", "[analyze]") {
  // u = chi r^{1/4}: the K^1_{a+1} norm stays finite iff a < gamma + 1/2 = 0.75. The cutoff
  // transition is kept wide so the coarse meshes resolve it.
  SingularPoint p = centre(0.5);
  p.cutoff_radius = 0.4;
  p.cutoff = {0.1, 0.4};
  const PotentialSpec spec(Domain::torus(), {p});
  std::vector<DiscreteFunction> family;
  for (int n : {16, 24, 32}) {
    const auto mesh = build_torus_mesh(spec, n, {0.3});
    family.push_back(interpolate(
        [&](const Point& x) {
          const double r = torus_distance(x, p.position);
          return cplx(p.cutoff(r) * std::pow(r, 0.25));
        },
        mesh));
  }
  const auto prof = weighted_regularity_profile(family, spec, {-0.5, 0.0, 0.25, 0.5, 1.0, 1.25});
  REQUIRE(prof.transition);
  CHECK(prof.transition->first <= 0.75);
  CHECK(prof.transition->second >= 0.75);
  std::ostringstream os;
  write_profile_csv(prof, os);
  CHECK(os.str().rfind("a,level,n,norm,verdict\n", 0) == 0);
}
