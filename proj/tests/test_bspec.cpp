#include <catch_amalgamated.hpp>

#include <random>
#include <set>

#include "isq/bspec.hpp"

using namespace isq;
using Catch::Matchers::WithinAbs;

namespace {

bool near(cplx a, cplx b, double tol = 1e-14) { return std::abs(a - b) <= tol; }

SingularPoint point(const Point& x, double Z) {
  SingularPoint p;
  p.position = x;
  p.Z = Z;
  p.cutoff_radius = 0.2;
  p.cutoff = {0.1, 0.2};
  return p;
}

}  // namespace

TEST_CASE("indicial roots examples", "[bspec]") {
  auto [b0, a0] = indicial_roots(0.0, 0);
  CHECK(near(b0, 0.0));
  CHECK(near(a0, -1.0));
  auto [b1, a1] = indicial_roots(0.75, 0);
  CHECK(near(b1, 0.5));
  CHECK(near(a1, -1.5));
  auto [b2, a2] = indicial_roots(-0.25, 0);
  CHECK(near(b2, -0.5));
  CHECK(near(a2, -0.5));
}

TEST_CASE("Vieta identities hold across regimes", "[bspec]") {
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> UZ(-6.0, 6.0);
  for (int i = 0; i < 500; ++i) {
    const double Z = UZ(gen);
    const int l = i % 9;
    const auto [b, a] = indicial_roots(Z, l);
    CHECK(std::abs(b + a + 1.0) <= 1e-12);
    CHECK(std::abs(b * a + l * (l + 1.0) + Z) <= 1e-11);
    if (indicial_discriminant(Z, l) < 0.0) CHECK(b.imag() > 0.0);
  }
}

TEST_CASE("boundary spectrum examples", "[bspec]") {
  const auto s0 = boundary_spectrum(0.0, 1);
  std::multiset<double> vals;
  for (const auto& r : s0.roots) vals.insert(r.value.real());
  CHECK(vals == std::multiset<double>{-2.0, -1.0, 0.0, 1.0});

  const auto s9 = boundary_spectrum(-2.25, 1);
  REQUIRE(s9.double_root_l);
  CHECK(*s9.double_root_l == 1);
  for (const auto& r : s9.roots) {
    if (r.l == 0 && r.kind == RootKind::BetaPlus) CHECK(near(r.value, cplx(-0.5, std::sqrt(2.0))));
    if (r.l == 0 && r.kind == RootKind::AlphaMinus) CHECK(near(r.value, cplx(-0.5, -std::sqrt(2.0))));
    if (r.l == 1) CHECK(near(r.value, -0.5));
    CHECK(r.multiplicity == 2 * r.l + 1);
  }
  CHECK_FALSE(s9.eta);

  const auto s4 = boundary_spectrum(-0.25);
  CHECK(s4.has_double_root);
  CHECK(*s4.double_root_l == 0);
}

TEST_CASE("double roots exactly at Z = -(l + 1/2)^2", "[bspec]") {
  for (int l = 0; l < 6; ++l) {
    const double Z = -(l + 0.5) * (l + 0.5);
    REQUIRE(double_root_degree(Z));
    CHECK(*double_root_degree(Z) == l);
    CHECK_FALSE(double_root_degree(Z + 1e-9));
  }
}

TEST_CASE("nu0 and eta examples", "[bspec]") {
  CHECK(nu0(1.0) == 2.0);
  CHECK(nu0(0.0) == 1.5);
  CHECK(nu0(-0.5) == 1.0);
  CHECK_THAT(eta(PotentialSpec(Domain::torus(), {point(Point(0.5, 0.5, 0.5), 0.0)})), WithinAbs(0.5, 1e-15));
  CHECK_THAT(eta(PotentialSpec(Domain::torus(), {point(Point(0.5, 0.5, 0.5), 2.0)})), WithinAbs(1.5, 1e-15));
  CHECK_THAT(eta(PotentialSpec(Domain::torus(), {point(Point(0.5, 0.5, 0.5), -3.0 / 16.0)})), WithinAbs(0.25, 1e-15));
  CHECK_THROWS_AS(eta(PotentialSpec(Domain::torus(), {point(Point(0.5, 0.5, 0.5), -0.3)})), Error);
}

TEST_CASE("extension classification examples", "[bspec]") {
  CHECK(classify_extension(1.0).regime == ExtensionRegime::EssentiallySelfAdjointStrict);
  CHECK(classify_extension(0.75).regime == ExtensionRegime::EssentiallySelfAdjointBoundary);
  const auto c0 = classify_extension(0.0);
  CHECK(c0.regime == ExtensionRegime::FriedrichsWithOneSingularFunction);
  REQUIRE(c0.extension_basis.size() == 1);
  CHECK(c0.extension_basis[0].form == LocalForm::Power);
  CHECK(c0.extension_basis[0].exponent == 0.0);
  CHECK(classify_extension(-0.25).regime == ExtensionRegime::DoubleRootLog);
  const auto cm = classify_extension(-1.0);
  CHECK(cm.regime == ExtensionRegime::ImaginaryRootRegime);
  REQUIRE_FALSE(cm.extension_basis.empty());
  CHECK(cm.extension_basis[0].form == LocalForm::LogCos);
  CHECK_THAT(cm.extension_basis[0].frequency, WithinAbs(std::sqrt(3.0) / 2.0, 1e-15));
}

TEST_CASE("index set examples and gap property", "[bspec]") {
  std::vector<double> z0;
  for (const auto& e : index_set(0.0, 1.2, 1).exponents) z0.push_back(e.gamma.real());
  CHECK(std::set<double>(z0.begin(), z0.end()) == std::set<double>{-2.0, -1.0, 0.0, 1.0});

  std::vector<double> z2;
  for (const auto& e : index_set(2.0, 0.0, 0).exponents) z2.push_back(e.gamma.real());
  CHECK(z2 == std::vector<double>{-2.0, -1.0, 0.0});
  CHECK(index_set(2.0, -2.5, 0).exponents.empty());
  CHECK_THROWS_AS(index_set(-0.25, 1.0), Error);

  // Brute-force enumeration oracle for Z = 0.5, L_max = 3.
  const double Z = 0.5;
  std::vector<double> brute;
  for (int l = 0; l <= 3; ++l) {
    const double s = std::sqrt((1.0 + 2 * l) * (1.0 + 2 * l) + 4 * Z);
    for (int n = 0; n < 20; ++n)
      for (double g : {(s - 1) / 2 + n, (-s - 1) / 2 + n})
        if (g <= 2.0) brute.push_back(g);
  }
  std::sort(brute.begin(), brute.end());
  std::vector<double> got;
  for (const auto& e : index_set(Z, 2.0, 3).exponents) got.push_back(e.gamma.real());
  REQUIRE(got.size() == brute.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK_THAT(got[i], WithinAbs(brute[i], 1e-14));
}

TEST_CASE("Fredholm index examples and antisymmetry", "[bspec]") {
  CHECK(fredholm_index(0.0, 1.0) == -1);
  CHECK(fredholm_index(0.0, 2.0) == -4);
  CHECK(fredholm_index(0.0, -1.0) == 1);
  CHECK(fredholm_index(0.0, 0.0) == 0);
  CHECK_THROWS_AS(fredholm_index(0.0, 0.5), Error);
  CHECK_THROWS_AS(fredholm_index(-0.5, 1.0), Error);
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> UZ(-0.2, 3.0), Ua(-3.0, 3.0);
  for (int i = 0; i < 300; ++i) {
    const double Z = UZ(gen), a = Ua(gen);
    CHECK(fredholm_index(Z, a) == -fredholm_index(Z, -a));
  }
}

TEST_CASE("singular space generators", "[bspec]") {
  const auto g1 = singular_space_Ws(PotentialSpec(Domain::torus(), {point(Point(0.5, 0.5, 0.5), 0.5)}));
  REQUIRE(g1.size() == 1);
  CHECK_THAT(g1[0].exponent, WithinAbs(std::sqrt(3.0) / 2.0 - 0.5, 1e-15));
  CHECK(singular_space_Ws(PotentialSpec(Domain::torus(), {point(Point(0.5, 0.5, 0.5), 1.0)})).empty());
  const auto g2 = singular_space_Ws(
      PotentialSpec(Domain::torus(), {point(Point(0.25, 0.5, 0.5), 0.0), point(Point(0.75, 0.5, 0.5), 2.0)}));
  REQUIRE(g2.size() == 1);
  CHECK(g2[0].point == 0);
}
