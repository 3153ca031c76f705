#include <catch_amalgamated.hpp>

#include <numbers>

#include "isq/eigensolve.hpp"

using namespace isq;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;

SparseRow<double> identity(int n) {
  SparseRow<double> I(n, n);
  I.setIdentity();
  return I;
}

/// Dirichlet second-difference matrix tridiag(-1, 2, -1).
SparseRow<double> laplacian_1d(int n) {
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, 2.0);
    if (i + 1 < n) {
      t.emplace_back(i, i + 1, -1.0);
      t.emplace_back(i + 1, i, -1.0);
    }
  }
  SparseRow<double> A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

}  // namespace

TEST_CASE("diagonal example", "[eigensolve]") {
  SparseRow<double> A(3, 3);
  A.insert(0, 0) = 1.0;
  A.insert(1, 1) = 2.0;
  A.insert(2, 2) = 3.0;
  EigenOptions o;
  o.n_eigs = 2;
  const auto r = smallest_eigenpairs<double>(A, identity(3), o);
  REQUIRE(r.converged);
  CHECK_THAT(r.eigenvalues[0], WithinAbs(1.0, 1e-14));
  CHECK_THAT(r.eigenvalues[1], WithinAbs(2.0, 1e-14));
  CHECK_THAT(std::abs(r.vectors(0, 0)), WithinAbs(1.0, 1e-14));
  CHECK_THAT(std::abs(r.vectors(1, 1)), WithinAbs(1.0, 1e-14));
}

TEST_CASE("iterative path against the analytic 1D spectrum", "[eigensolve]") {
  const int n = 600;
  const auto A = laplacian_1d(n);
  SparseRow<double> M = identity(n);
  M *= 0.5;  // generalized problem: lambda = 2 * (2 - 2 cos(j pi / (n + 1)))
  EigenOptions o;
  o.n_eigs = 5;
  o.tol = 1e-10;
  o.shift = 0.0;
  const auto r = smallest_eigenpairs<double>(A, M, o);
  REQUIRE(r.converged);
  for (int j = 1; j <= 5; ++j)
    CHECK_THAT(r.eigenvalues[j - 1], WithinRel(2.0 * (2.0 - 2.0 * std::cos(j * kPi / (n + 1))), 1e-8));
  // M-orthonormality.
  const Eigen::MatrixXd G = r.vectors.transpose() * (M * r.vectors);
  CHECK((G - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);
  // Ritz values never increase (the Rayleigh-Ritz space contains the previous block).
  for (std::size_t it = 1; it < r.ritz_history.size(); ++it)
    for (std::size_t j = 0; j < r.ritz_history[it].size(); ++j)
      CHECK(r.ritz_history[it][j] <= r.ritz_history[it - 1][j] * (1.0 + 1e-12) + 1e-14);
}

TEST_CASE("eigenvalues do not depend on the shift", "[eigensolve]") {
  const PotentialSpec free(Domain::torus(), {});
  const auto op = assemble_hk<double>(build_torus_mesh(free, 8), free, BlochVector());
  EigenOptions o;
  o.n_eigs = 4;
  o.tol = 1e-10;
  o.shift = 1.0;
  const auto r1 = smallest_eigenpairs(op, o);
  o.shift = 7.5;
  const auto r2 = smallest_eigenpairs(op, o);
  REQUIRE(r1.converged);
  REQUIRE(r2.converged);
  for (int j = 0; j < 4; ++j) CHECK_THAT(r1.eigenvalues[j], WithinAbs(r2.eigenvalues[j], 1e-8));
}

TEST_CASE("free torus spectrum at Gamma", "[eigensolve]") {
  const PotentialSpec free(Domain::torus(), {});
  std::vector<double> dev;
  for (int n : {8, 16}) {
    const auto op = assemble_hk<double>(build_torus_mesh(free, n), free, BlochVector());
    EigenOptions o;
    o.n_eigs = 8;
    const auto r = smallest_eigenpairs(op, o);
    REQUIRE(r.converged);
    CHECK(std::abs(r.eigenvalues[0]) < 1e-9);
    double d = 0.0;
    for (int j = 1; j < 7; ++j) d = std::max(d, std::abs(r.eigenvalues[j] / (4 * kPi * kPi) - 1.0));
    dev.push_back(d);
    for (std::size_t j = 0; j < r.residuals.size(); ++j)
      CHECK(r.residuals[j] <= 1e-8 * std::max(1.0, std::abs(r.eigenvalues[j])));
  }
  CHECK(dev[1] < dev[0]);
}

TEST_CASE("bands along Gamma-X and time-reversal symmetry", "[eigensolve]") {
  const PotentialSpec free(Domain::torus(), {});
  const auto mesh = build_torus_mesh(free, 12);
  std::vector<BlochVector> path;
  for (double t : {0.25, 0.5, 0.75}) path.emplace_back(Point(t * kPi, 0.0, 0.0));
  EigenOptions o;
  const auto rows = band_sweep(mesh, free, path, 2, o);
  REQUIRE(rows.size() == 6);
  for (const auto& row : rows)
    if (row.band == 0) {
      const double t = row.k[0] / kPi;
      CHECK_THAT(row.lambda, WithinRel(t * t * kPi * kPi, 0.02));
    }
  TrigPolynomial tp;
  tp.terms.push_back({2.0, {1, 1, 0}, false});
  tp.terms.push_back({-1.0, {0, 1, 2}, true});
  const PotentialSpec spec(Domain::torus(), {}, tp);
  const auto m2 = build_torus_mesh(spec, 8);
  const Point k(0.7, -1.1, 0.4);
  const auto plus = band_sweep(m2, spec, {BlochVector(k)}, 3, o);
  const auto minus = band_sweep(m2, spec, {BlochVector(Point(-k))}, 3, o);
  for (int b = 0; b < 3; ++b) CHECK_THAT(plus[b].lambda, WithinAbs(minus[b].lambda, 1e-7));
  std::ostringstream os;
  write_band_csv(rows, os);
  CHECK(os.str().rfind("k_index,k1,k2,k3,band_index,lambda,residual\n", 0) == 0);
}

TEST_CASE("non-convergence is reported, not thrown", "[eigensolve]") {
  const PotentialSpec free(Domain::torus(), {});
  const auto op = assemble_hk<double>(build_torus_mesh(free, 8), free, BlochVector());
  EigenOptions o;
  o.n_eigs = 3;
  o.max_iter = 1;
  o.tol = 1e-14;
  const auto r = smallest_eigenpairs(op, o);
  CHECK_FALSE(r.converged);
  CHECK_FALSE(r.diagnostic.empty());
  CHECK(r.eigenvalues.size() == 3);
}

TEST_CASE("an indefinite shifted pencil is refused", "[eigensolve]") {
  const PotentialSpec free(Domain::torus(), {});
  const auto op = assemble_hk<double>(build_torus_mesh(free, 8), free, BlochVector());
  EigenOptions o;
  o.shift = -5.0;
  CHECK_THROWS_AS(smallest_eigenpairs(op, o), Error);
}
