#include <catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include "isq/assemble.hpp"
#include "isq/eigensolve.hpp"

using namespace isq;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;

SingularPoint centre(double Z) {
  SingularPoint p;
  p.position = Point(0.5, 0.5, 0.5);
  p.Z = Z;
  p.cutoff_radius = 0.25;
  p.cutoff = {0.1, 0.2};
  return p;
}

PotentialSpec centred_ball(double Z, double R) {
  SingularPoint p;
  p.Z = Z;
  p.cutoff_radius = 2.0 * R;
  p.cutoff = {1.5 * R, 2.0 * R};
  return PotentialSpec(Domain::ball(R), {p});
}

template <class S>
Eigen::Matrix<S, Eigen::Dynamic, 1> ones(Eigen::Index n) {
  return Eigen::Matrix<S, Eigen::Dynamic, 1>::Ones(n);
}

double smallest(const DiscreteOperator<cplx>& op, const PotentialSpec& spec) {
  EigenOptions o;
  o.shift = coercive_shift(spec, op).C;
  return smallest_eigenpairs(op, o).eigenvalues[0];
}

}  // namespace

TEST_CASE("Bloch vector reduction", "[assemble]") {
  const BlochVector k(Point(3.5 * kPi, -kPi, 0.25));
  CHECK_THAT(k.k()[0], WithinAbs(-0.5 * kPi, 1e-14));
  CHECK_THAT(k.k()[1], WithinAbs(-kPi, 1e-14));
  CHECK(k.lattice_shift() == Eigen::Vector3i(2, 0, 0));
  CHECK(k.reduced());
  const Point back = k.k() + 2.0 * kPi * k.lattice_shift().cast<double>();
  CHECK((back - k.given()).norm() < 1e-13);
  CHECK(BlochVector(Point::Zero()).is_zero());
}

TEST_CASE("free k = 0 operator annihilates constants", "[assemble]") {
  const PotentialSpec free(Domain::torus(), {});
  const auto op = assemble_hk<double>(build_torus_mesh(free, 8), free, BlochVector());
  CHECK((op.A * ones<double>(op.size())).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THAT(ones<double>(op.size()).dot(op.M * ones<double>(op.size())), WithinAbs(1.0, 1e-13));
  CHECK(op.hermitian_defect() == 0.0);
}

TEST_CASE("form on constants equals |k|^2 + mean of V", "[assemble]") {
  TrigPolynomial tp;
  tp.constant = 3.0;
  tp.terms.push_back({1.5, {1, 0, 0}, false});
  tp.terms.push_back({-0.7, {0, 1, 1}, true});
  const PotentialSpec spec(Domain::torus(), {}, tp);
  const auto mesh = build_torus_mesh(spec, 8);
  for (const Point& k : {Point(0.0, 0.0, 0.0), Point(1.0, -2.0, 0.5), Point(kPi - 0.1, 0.3, 0.0)}) {
    const auto op = assemble_hk(mesh, spec, BlochVector(k));
    const auto e = ones<cplx>(op.size());
    const cplx a11 = e.dot(op.A * e);
    CHECK_THAT(a11.real(), WithinAbs(k.squaredNorm() + 3.0, 1e-9));
    CHECK(std::abs(a11.imag()) < 1e-12);
    CHECK(op.hermitian_defect() < 1e-13);
  }
}

TEST_CASE("singular potential integrates to the continuum value", "[assemble]") {
  // int_torus Z chi / r^2 with chi = 1 on r <= 0.1, C^2 step to 0 at 0.2.
  const double Z = 2.0;
  const PotentialSpec spec(Domain::torus(), {centre(Z)});
  const CutoffProfile chi{0.1, 0.2};
  double exact = 0.0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const double r = 0.2 * (i + 0.5) / N;
    exact += 4.0 * kPi * Z * chi(r) * 0.2 / N;
  }
  const auto op = assemble_hk<double>(build_torus_mesh(spec, 16, {0.5}), spec, BlochVector());
  const auto e = ones<double>(op.size());
  CHECK_THAT(e.dot(op.A * e), WithinRel(exact, 1e-4));
}

TEST_CASE("assembly is bit-identical across thread counts", "[assemble]") {
  const PotentialSpec spec(Domain::torus(), {centre(-3.0 / 16.0)});
  const auto mesh = build_torus_mesh(spec, 16, {0.3});
  set_num_threads(1);
  const auto a1 = assemble_hk(mesh, spec, BlochVector(Point(0.4, 0.0, -1.0)));
  set_num_threads(3);
  const auto a3 = assemble_hk(mesh, spec, BlochVector(Point(0.4, 0.0, -1.0)));
  set_num_threads(1);
  REQUIRE(a1.A.nonZeros() == a3.A.nonZeros());
  for (Eigen::Index i = 0; i < a1.A.nonZeros(); ++i) REQUIRE(a1.A.valuePtr()[i] == a3.A.valuePtr()[i]);
  for (Eigen::Index i = 0; i < a1.M.nonZeros(); ++i) REQUIRE(a1.M.valuePtr()[i] == a3.M.valuePtr()[i]);
}

TEST_CASE("reciprocal-lattice gauge covariance on the free torus", "[assemble]") {
  // The canonical gauge reduces k + 2 pi e1 to k exactly; the as-given gauge carries e^{2 pi i x}
  // in the P1 space, so its eigenvalue only converges to the canonical one under refinement.
  const PotentialSpec free(Domain::torus(), {});
  const BlochVector shifted(Point(0.5 + 2.0 * kPi, 0.0, 0.0));
  std::vector<double> gap;
  for (int n : {8, 16, 24}) {
    const auto mesh = build_torus_mesh(free, n);
    const double canonical = smallest(assemble_hk(mesh, free, shifted, BlochGauge::Canonical), free);
    const double as_given = smallest(assemble_hk(mesh, free, shifted, BlochGauge::AsGiven), free);
    CHECK_THAT(canonical, WithinRel(0.25, 1e-3));
    gap.push_back(std::abs(as_given - canonical));
  }
  CHECK(gap[1] < gap[0]);
  CHECK(gap[2] < gap[1]);
}

TEST_CASE("coercive shift certification", "[assemble]") {
  const PotentialSpec free(Domain::torus(), {});
  const auto c0 = coercive_shift(free, assemble_hk<double>(build_torus_mesh(free, 8), free, BlochVector()));
  CHECK(c0.C == 1.0);
  CHECK(c0.doublings == 0);

  TrigPolynomial tp;
  tp.terms.push_back({-5.0, {1, 0, 0}, false});
  const PotentialSpec well(Domain::torus(), {}, tp);
  const auto c5 = coercive_shift(well, assemble_hk<double>(build_torus_mesh(well, 8), well, BlochVector()));
  CHECK(c5.C <= 6.0);

  const PotentialSpec crit(Domain::torus(), {centre(-3.0 / 16.0)});
  for (int n : {8, 16, 24})
    CHECK_NOTHROW(coercive_shift(crit, assemble_hk<double>(build_torus_mesh(crit, n, {0.2}), crit, BlochVector())));

  const PotentialSpec bad(Domain::torus(), {centre(-0.5)});
  try {
    coercive_shift(bad, assemble_hk<double>(build_torus_mesh(free, 8), free, BlochVector()));
    FAIL("expected AssumptionViolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AssumptionViolation);
  }
}

TEST_CASE("discrete Hardy quotient for random P1 functions", "[assemble]") {
  const auto spec = centred_ball(0.0, 1.0);
  const auto mesh = build_ball_mesh(spec, 12, 0.5);
  const auto pair = assemble_hardy_pair(mesh, spec, 1.0, true);
  std::mt19937 gen(17);
  std::normal_distribution<double> N;
  double worst = 0.0;
  for (int s = 0; s < 50; ++s) {
    Eigen::VectorXd u(pair.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = N(gen);
    worst = std::max(worst, u.dot(pair.M * u) / u.dot(pair.A * u));
  }
  CHECK(worst > 0.0);
  CHECK(worst <= 4.0);
}

TEST_CASE("ball Dirichlet ground state approaches the radial oracle", "[assemble]") {
  const PotentialSpec free(Domain::ball(kPi), {});
  std::vector<double> err;
  for (int n : {8, 16}) {
    const auto op = assemble_dirichlet(build_ball_mesh(free, n), free);
    EigenOptions o;
    o.shift = coercive_shift(free, op).C;
    err.push_back(std::abs(smallest_eigenpairs(op, o).eigenvalues[0] - 1.0));
  }
  CHECK(err[1] < err[0]);
  CHECK(err[1] < 0.1);
}

TEST_CASE("matrix export format", "[assemble]") {
  const PotentialSpec free(Domain::torus(), {});
  const auto op = assemble_hk<double>(build_torus_mesh(free, 4), free, BlochVector());
  std::ostringstream os;
  export_matrix(op.A, os);
  std::istringstream is(os.str());
  std::string tag;
  long r = 0, c = 0, nnz = 0;
  is >> tag >> r >> c >> nnz;
  CHECK(tag == "isq-coo");
  CHECK(r == op.size());
  CHECK(nnz == op.A.nonZeros());
}
