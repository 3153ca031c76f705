#pragma once

// P1 assembly of the Bloch form a(u,v) = int (grad + ik)u . conj((grad + ik)v) + V u conj(v)
// on the torus, and of the Dirichlet form for -Delta + V + C on a ball.

#include <Eigen/CholmodSupport>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <optional>
#include <ostream>
#include <type_traits>
#include <vector>

#include "isq/error.hpp"
#include "isq/mesh.hpp"
#include "isq/model.hpp"
#include "isq/parallel.hpp"

namespace isq {

/// Quasi-momentum with its first-Brillouin-zone representative k in [-pi, pi)^3;
/// the as-given vector equals k + 2 pi * lattice_shift.
class BlochVector {
 public:
  BlochVector() = default;
  explicit BlochVector(const Point& given) : given_(given) {
    const double tp = 2.0 * std::numbers::pi;
    for (int c = 0; c < 3; ++c) {
      const double s = std::floor((given[c] + std::numbers::pi) / tp);
      shift_[c] = static_cast<int>(s);
      k_[c] = given[c] - tp * s;
      if (k_[c] >= std::numbers::pi) {
        k_[c] -= tp;
        ++shift_[c];
      }
    }
  }

  const Point& k() const { return k_; }
  const Point& given() const { return given_; }
  const Eigen::Vector3i& lattice_shift() const { return shift_; }
  bool reduced() const { return shift_ != Eigen::Vector3i::Zero(); }
  bool is_zero() const { return given_.isZero(0.0); }

 private:
  Point given_ = Point::Zero();
  Point k_ = Point::Zero();
  Eigen::Vector3i shift_ = Eigen::Vector3i::Zero();
};

/// Which representative of k enters the assembled form.
enum class BlochGauge { Canonical, AsGiven };

template <class Scalar>
using SparseRow = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>;

/// Global operator pair on the identified (torus) or interior (ball) dofs.
template <class Scalar>
struct DiscreteOperator {
  MeshPtr mesh;
  SparseRow<Scalar> A;
  SparseRow<double> M;
  std::vector<int> dof_of_vertex;  // -1 where eliminated; identified vertices share a dof
  std::vector<int> vertex_of_dof;  // representative vertex
  std::optional<double> assembled_shift;
  Point k = Point::Zero();

  Eigen::Index size() const { return A.rows(); }

  /// max_ij |A_ij - conj(A_ji)|.
  double hermitian_defect() const {
    const SparseRow<Scalar> At = A.adjoint();
    double d = 0.0;
    const SparseRow<Scalar> D = A - At;
    for (Eigen::Index i = 0; i < D.nonZeros(); ++i) d = std::max(d, double(std::abs(D.valuePtr()[i])));
    return d;
  }
};

namespace detail {

inline std::vector<int> torus_dofs(const GradedMesh& m, std::vector<int>& vertex_of_dof) {
  std::vector<int> dof(m.vertices.size(), -1);
  vertex_of_dof.clear();
  for (std::size_t v = 0; v < m.vertices.size(); ++v)
    if (m.rep[v] == int(v)) {
      dof[v] = int(vertex_of_dof.size());
      vertex_of_dof.push_back(int(v));
    }
  for (std::size_t v = 0; v < m.vertices.size(); ++v) dof[v] = dof[m.rep[v]];
  return dof;
}

inline std::vector<int> interior_dofs(const GradedMesh& m, std::vector<int>& vertex_of_dof,
                                      const std::vector<int>& also_eliminate = {}) {
  std::vector<int> dof(m.vertices.size(), -1);
  vertex_of_dof.clear();
  for (std::size_t v = 0; v < m.vertices.size(); ++v) {
    if (m.boundary[v]) continue;
    if (std::find(also_eliminate.begin(), also_eliminate.end(), int(v)) != also_eliminate.end()) continue;
    dof[v] = int(vertex_of_dof.size());
    vertex_of_dof.push_back(int(v));
  }
  return dof;
}

/// Sparsity pattern of the P1 coupling, rows sorted.
template <class Scalar>
SparseRow<Scalar> p1_pattern(const GradedMesh& m, const std::vector<int>& dof, Eigen::Index ndof) {
  std::vector<std::vector<int>> rows(ndof);
  for (const auto& t : m.tets)
    for (int a = 0; a < 4; ++a) {
      const int i = dof[t[a]];
      if (i < 0) continue;
      for (int b = 0; b < 4; ++b)
        if (dof[t[b]] >= 0) rows[i].push_back(dof[t[b]]);
    }
  Eigen::VectorXi nnz(ndof);
  for (Eigen::Index i = 0; i < ndof; ++i) {
    auto& r = rows[i];
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    nnz[i] = int(r.size());
  }
  SparseRow<Scalar> S(ndof, ndof);
  S.reserve(nnz);
  for (Eigen::Index i = 0; i < ndof; ++i)
    for (int j : rows[i]) S.insert(i, j) = Scalar(0);
  S.makeCompressed();
  return S;
}

template <class Scalar>
Scalar& entry(SparseRow<Scalar>& S, int i, int j) {
  const int* begin = S.innerIndexPtr() + S.outerIndexPtr()[i];
  const int* end = S.innerIndexPtr() + S.outerIndexPtr()[i + 1];
  const int* p = std::lower_bound(begin, end, j);
  return S.valuePtr()[p - S.innerIndexPtr()];
}

/// Element matrices of one tet: potential part by singular-aware quadrature.
inline Eigen::Matrix4d potential_element(const GradedMesh& m, const PotentialSpec& spec, std::size_t t) {
  Eigen::Matrix4d acc = Eigen::Matrix4d::Zero();
  bool singular = false;
  for (const auto& p : spec.singular()) singular |= p.Z != 0.0;
  if (!singular && smooth_is_zero(spec.smooth_part())) return acc;
  integrate_tet(m, spec, t, acc,
                [&](const std::array<double, 4>& b, const Point& x) -> Eigen::Matrix4d {
                  const Eigen::Vector4d l(b[0], b[1], b[2], b[3]);
                  return eval_potential(x, spec) * (l * l.transpose());
                },
                singular);
  return acc;
}

inline Eigen::Matrix4d mass_element(double vol) {
  Eigen::Matrix4d Me = Eigen::Matrix4d::Constant(vol / 20.0);
  Me.diagonal().setConstant(vol / 10.0);
  return Me;
}

/// Assembles A = K (+ Bloch terms) + V + shift M and M; element work runs in parallel,
/// scattering is sequential in tet order so the result is independent of the thread count.
template <class Scalar, class Weight>
void assemble_into(DiscreteOperator<Scalar>& op, const Point& k, double shift,
                   Weight&& weight_element) {
  const GradedMesh& m = *op.mesh;
  const Eigen::Index ndof = Eigen::Index(op.vertex_of_dof.size());
  op.A = p1_pattern<Scalar>(m, op.dof_of_vertex, ndof);
  op.M = p1_pattern<double>(m, op.dof_of_vertex, ndof);
  using Elem = Eigen::Matrix<Scalar, 4, 4>;
  constexpr std::size_t block = 1 << 15;
  std::vector<Elem> Ae(block);
  std::vector<Eigen::Matrix4d> Me(block);
  const double k2 = k.squaredNorm();
  for (std::size_t t0 = 0; t0 < m.tets.size(); t0 += block) {
    const std::size_t nb = std::min(block, m.tets.size() - t0);
    parallel_for(nb, [&](std::size_t b0, std::size_t b1) {
      for (std::size_t s = b0; s < b1; ++s) {
        const std::size_t t = t0 + s;
        const auto [G, vol] = p1_gradients(m, t);
        const Eigen::Matrix4d K = vol * (G * G.transpose());
        const Eigen::Matrix4d Mloc = mass_element(vol);
        const Eigen::Matrix4d Vloc = weight_element(t);
        Elem E = (K + Vloc + (shift + k2) * Mloc).template cast<Scalar>();
        if constexpr (!std::is_same_v<Scalar, double>) {
          const Eigen::Vector4d kg = G * k;
          for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) E(i, j) += Scalar(0.0, 0.25 * vol * (kg[i] - kg[j]));
        }
        Ae[s] = E;
        Me[s] = Mloc;
      }
    }, 512);
    for (std::size_t s = 0; s < nb; ++s) {
      const auto& tv = m.tets[t0 + s];
      for (int a = 0; a < 4; ++a) {
        const int i = op.dof_of_vertex[tv[a]];
        if (i < 0) continue;
        for (int b = 0; b < 4; ++b) {
          const int j = op.dof_of_vertex[tv[b]];
          if (j < 0) continue;
          entry(op.A, i, j) += Ae[s](a, b);
          entry(op.M, i, j) += Me[s](a, b);
        }
      }
    }
  }
}

}  // namespace detail

/// Bloch operator H_k on a torus mesh. Scalar = double is allowed only for k = 0.
template <class Scalar = std::complex<double>>
DiscreteOperator<Scalar> assemble_hk(const MeshPtr& mesh, const PotentialSpec& spec, const BlochVector& k,
                                     BlochGauge gauge = BlochGauge::Canonical) {
  if (!mesh->domain.is_torus()) throw Error(ErrorCode::DomainError, "assemble_hk needs a torus mesh");
  const Point kv = gauge == BlochGauge::Canonical ? k.k() : k.given();
  if constexpr (std::is_same_v<Scalar, double>) {
    if (!kv.isZero(0.0)) throw Error(ErrorCode::OutOfRange, "real assembly requires k = 0");
  }
  DiscreteOperator<Scalar> op;
  op.mesh = mesh;
  op.k = kv;
  op.dof_of_vertex = detail::torus_dofs(*mesh, op.vertex_of_dof);
  detail::assemble_into(op, kv, 0.0,
                        [&](std::size_t t) { return detail::potential_element(*mesh, spec, t); });
  return op;
}

/// -Delta + V + C on a ball mesh with the boundary dofs eliminated.
inline DiscreteOperator<double> assemble_dirichlet(const MeshPtr& mesh, const PotentialSpec& spec, double C = 0.0) {
  if (mesh->domain.is_torus()) throw Error(ErrorCode::DomainError, "assemble_dirichlet needs a ball mesh");
  DiscreteOperator<double> op;
  op.mesh = mesh;
  op.assembled_shift = C;
  op.dof_of_vertex = detail::interior_dofs(*mesh, op.vertex_of_dof);
  detail::assemble_into(op, Point::Zero(), C,
                        [&](std::size_t t) { return detail::potential_element(*mesh, spec, t); });
  return op;
}

/// Pair (K, W) on a ball mesh: K the Dirichlet stiffness, W_ij = int rho^{-2a} phi_i phi_j.
/// With eliminate_singular the singular vertex dof is removed as well, so the smallest
/// generalized eigenvalue mu_1 of K x = mu W x gives the sharp discrete Hardy quotient 1/mu_1
/// for a = 1.
inline DiscreteOperator<double> assemble_hardy_pair(const MeshPtr& mesh, const PotentialSpec& spec, double a,
                                                    bool eliminate_singular) {
  if (mesh->domain.is_torus()) throw Error(ErrorCode::DomainError, "assemble_hardy_pair needs a ball mesh");
  DiscreteOperator<double> op;
  op.mesh = mesh;
  op.dof_of_vertex = detail::interior_dofs(*mesh, op.vertex_of_dof,
                                           eliminate_singular ? mesh->singular_vertex : std::vector<int>{});
  detail::assemble_into(op, Point::Zero(), 0.0, [](std::size_t) { return Eigen::Matrix4d::Zero().eval(); });
  // Replace M by the weighted mass matrix.
  const GradedMesh& m = *mesh;
  std::vector<Eigen::Matrix4d> We(m.tets.size());
  parallel_for(m.tets.size(), [&](std::size_t b0, std::size_t b1) {
    for (std::size_t t = b0; t < b1; ++t) {
      Eigen::Matrix4d acc = Eigen::Matrix4d::Zero();
      integrate_tet(m, spec, t, acc,
                    [&](const std::array<double, 4>& b, const Point& x) -> Eigen::Matrix4d {
                      const Eigen::Vector4d l(b[0], b[1], b[2], b[3]);
                      return std::pow(rho(x, spec), -2.0 * a) * (l * l.transpose());
                    },
                    true);
      We[t] = acc;
    }
  });
  for (Eigen::Index i = 0; i < op.M.nonZeros(); ++i) op.M.valuePtr()[i] = 0.0;
  for (std::size_t t = 0; t < m.tets.size(); ++t)
    for (int x = 0; x < 4; ++x) {
      const int i = op.dof_of_vertex[m.tets[t][x]];
      if (i < 0) continue;
      for (int y = 0; y < 4; ++y) {
        const int j = op.dof_of_vertex[m.tets[t][y]];
        if (j >= 0) detail::entry(op.M, i, j) += We[t](x, y);
      }
    }
  return op;
}

namespace detail {

template <class Scalar>
bool cholesky_ok(const Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>& S) {
  Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>, Eigen::Lower> llt;
  llt.compute(S);
  return llt.info() == Eigen::Success;
}

}  // namespace detail

/// Result of coercive_shift: certified C and the number of doublings it took.
struct ShiftCertificate {
  double C = 0.0;
  int doublings = 0;
};

/// Smallest tried C = C0 * 2^j (C0 = 1 + max(0, -inf V_smooth)) for which A + C M admits a
/// Cholesky factorization.
template <class Scalar>
ShiftCertificate coercive_shift(const PotentialSpec& spec, const DiscreteOperator<Scalar>& op) {
  if (!spec.assumption2_satisfied())
    throw Error(ErrorCode::AssumptionViolation,
                "min Z(p) <= -1/4: the form is not bounded below on K^1_1, no shift can be certified");
  double C = 1.0 + std::max(0.0, -smooth_lower_bound(spec.smooth_part()));
  const Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int> A = op.A;
  const Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int> M = op.M.template cast<Scalar>();
  for (int j = 0; j <= 40; ++j, C *= 2.0) {
    const Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int> S = A + Scalar(C) * M;
    if (detail::cholesky_ok(S)) return {C, j};
  }
  throw Error(ErrorCode::ShiftNotCertified, "no positive-definite shift found within 40 doublings");
}

/// Coordinate export: header "isq-coo <rows> <cols> <nnz>", then "row col re im" (0-based,
/// row-major order, %.17g).
template <class Scalar>
void export_matrix(const SparseRow<Scalar>& S, std::ostream& os) {
  os << "isq-coo " << S.rows() << ' ' << S.cols() << ' ' << S.nonZeros() << '\n';
  char buf[160];
  for (Eigen::Index i = 0; i < S.outerSize(); ++i)
    for (typename SparseRow<Scalar>::InnerIterator it(S, i); it; ++it) {
      const std::complex<double> v(it.value());
      std::snprintf(buf, sizeof buf, "%ld %ld %.17g %.17g\n", long(it.row()), long(it.col()), v.real(), v.imag());
      os << buf;
    }
}

/// Expands a dof vector to per-vertex values (0 on eliminated vertices).
template <class Derived>
DiscreteFunction to_function(const MeshPtr& mesh, const std::vector<int>& dof_of_vertex,
                             const Eigen::MatrixBase<Derived>& x) {
  DiscreteFunction u;
  u.mesh = mesh;
  u.values.resize(mesh->vertices.size());
  for (std::size_t v = 0; v < mesh->vertices.size(); ++v) {
    const int d = dof_of_vertex[v];
    u.values[v] = d < 0 ? cplx(0.0) : cplx(x[d]);
  }
  return u;
}

}  // namespace isq
