#pragma once

// Smallest eigenpairs of A x = lambda M x by block inverse iteration with Rayleigh-Ritz.
// The shifted operator S = A + sigma M is factorized once by CHOLMOD; each sweep enlarges the
// current Ritz block X by S^{-1} M X (unconverged columns only) and projects.

#include <Eigen/CholmodSupport>
#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "isq/assemble.hpp"
#include "isq/error.hpp"

namespace isq {

struct EigenOptions {
  int n_eigs = 1;
  double tol = 1e-8;
  int max_iter = 300;
  int block_size = 0;  // 0: n_eigs + max(2, n_eigs / 2)
  double shift = 1.0;  // sigma, certified by coercive_shift
  unsigned seed = 20240601u;

  void validate() const {
    if (n_eigs < 1) throw Error(ErrorCode::OutOfRange, "n_eigs must be >= 1");
    if (!(tol > 0.0)) throw Error(ErrorCode::OutOfRange, "tol must be > 0");
    if (max_iter < 1) throw Error(ErrorCode::OutOfRange, "max_iter must be >= 1");
  }
};

template <class Scalar>
struct EigenResult {
  using Block = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  std::vector<double> eigenvalues;
  Block vectors;                           // dof coefficients, columns M-orthonormal
  std::vector<DiscreteFunction> functions; // expanded to mesh vertices (when a mesh is attached)
  std::vector<double> residuals;           // lumped M^{-1} norm of A x - lambda M x, ||x||_M = 1
  std::vector<std::vector<double>> ritz_history;
  int iterations = 0;
  bool converged = false;
  std::string diagnostic;
};

namespace detail {

template <class Scalar>
using DenseBlock = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Makes the columns of Q M-orthonormal; drops numerically dependent directions.
template <class Scalar>
DenseBlock<Scalar> m_orthonormalize(const DenseBlock<Scalar>& Q, const SparseRow<double>& M) {
  DenseBlock<Scalar> X = Q;
  for (int pass = 0; pass < 2; ++pass) {
    // Unit columns first, so that small but independent directions survive the Gram cut.
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double nj = std::sqrt(std::abs(X.col(j).dot(M.template cast<Scalar>() * X.col(j))));
      if (nj > 0.0) X.col(j) /= nj;
    }
    const DenseBlock<Scalar> MX = M.template cast<Scalar>() * X;
    DenseBlock<Scalar> G = X.adjoint() * MX;
    G = 0.5 * (G + G.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<DenseBlock<Scalar>> es(G);
    const auto& d = es.eigenvalues();
    const double dmax = d.maxCoeff();
    std::vector<int> keep;
    for (int i = int(d.size()) - 1; i >= 0; --i)
      if (d[i] > 1e-13 * dmax) keep.push_back(i);
    DenseBlock<Scalar> T(G.rows(), Eigen::Index(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c)
      T.col(Eigen::Index(c)) = es.eigenvectors().col(keep[c]) / std::sqrt(d[keep[c]]);
    X = (X * T).eval();
  }
  return X;
}

template <class Scalar>
DenseBlock<Scalar> random_block(Eigen::Index n, Eigen::Index b, unsigned seed) {
  std::minstd_rand gen(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  DenseBlock<Scalar> X(n, b);
  for (Eigen::Index j = 0; j < b; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      if constexpr (std::is_same_v<Scalar, double>) {
        X(i, j) = U(gen);
      } else {
        const double re = U(gen);
        X(i, j) = Scalar(re, U(gen));
      }
    }
  return X;
}

template <class Scalar>
EigenResult<Scalar> dense_eigenpairs(const SparseRow<Scalar>& A, const SparseRow<double>& M, const EigenOptions& o) {
  const DenseBlock<Scalar> Ad = DenseBlock<Scalar>(A);
  const DenseBlock<Scalar> Md = DenseBlock<Scalar>(M.template cast<Scalar>());
  Eigen::GeneralizedSelfAdjointEigenSolver<DenseBlock<Scalar>> es(Ad, Md);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::NotConverged, "dense generalized eigensolver failed");
  EigenResult<Scalar> r;
  const int k = std::min<int>(o.n_eigs, int(A.rows()));
  r.vectors = es.eigenvectors().leftCols(k);
  for (int i = 0; i < k; ++i) r.eigenvalues.push_back(es.eigenvalues()[i]);
  r.converged = true;
  return r;
}

}  // namespace detail

/// Lumped-mass dual norm of the residual A x - lambda M x for each column.
template <class Scalar>
std::vector<double> residual_norms(const SparseRow<Scalar>& A, const SparseRow<double>& M,
                                   const detail::DenseBlock<Scalar>& X, const std::vector<double>& lambda) {
  const Eigen::VectorXd lumped = M * Eigen::VectorXd::Ones(M.cols());
  const detail::DenseBlock<Scalar> AX = A * X;
  const detail::DenseBlock<Scalar> MX = M.template cast<Scalar>() * X;
  std::vector<double> res(lambda.size());
  for (std::size_t j = 0; j < lambda.size(); ++j) {
    const auto r = (AX.col(j) - Scalar(lambda[j]) * MX.col(j)).eval();
    const double xm = std::sqrt(std::abs(X.col(j).dot(MX.col(j))));
    res[j] = std::sqrt((r.cwiseAbs2().array() / lumped.array()).sum()) / xm;
  }
  return res;
}

/// The n_eigs algebraically smallest generalized eigenpairs of (A, M). A + shift M must be
/// positive definite. On non-convergence the current Ritz pairs are returned with
/// converged = false and a diagnostic.
template <class Scalar>
EigenResult<Scalar> smallest_eigenpairs(const SparseRow<Scalar>& A, const SparseRow<double>& M,
                                        const EigenOptions& opts) {
  opts.validate();
  using Block = detail::DenseBlock<Scalar>;
  using ColMat = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>;
  const Eigen::Index n = A.rows();
  if (A.cols() != n || M.rows() != n || M.cols() != n) throw Error(ErrorCode::OutOfRange, "A and M sizes differ");
  const int nev = opts.n_eigs;
  const int b = std::max(nev, opts.block_size > 0 ? opts.block_size : nev + std::max(2, nev / 2));
  if (n <= 3 * b || n <= 64) {
    auto r = detail::dense_eigenpairs(A, M, opts);
    r.residuals = residual_norms<Scalar>(A, M, r.vectors, r.eigenvalues);
    return r;
  }

  const SparseRow<Scalar> Ms = M.template cast<Scalar>();
  const ColMat S = ColMat(A) + Scalar(opts.shift) * ColMat(Ms);
  Eigen::CholmodSupernodalLLT<ColMat, Eigen::Lower> llt;
  llt.compute(S);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::ShiftNotCertified, "A + shift M is not positive definite; run coercive_shift");

  EigenResult<Scalar> res;
  Block X = detail::m_orthonormalize<Scalar>(detail::random_block<Scalar>(n, b, opts.seed), M);
  std::vector<double> theta(b, 0.0);
  std::vector<char> done(b, 0);
  for (int it = 1; it <= opts.max_iter; ++it) {
    std::vector<int> active;
    for (int j = 0; j < X.cols(); ++j)
      if (!done[std::min(j, b - 1)]) active.push_back(j);
    Block MXa(n, Eigen::Index(active.size()));
    for (std::size_t c = 0; c < active.size(); ++c) MXa.col(Eigen::Index(c)) = Ms * X.col(active[c]);
    Block Y = llt.solve(MXa);
    // Orthogonalize the new directions against X, then among themselves.
    for (int pass = 0; pass < 2; ++pass) {
      Y -= X * (X.adjoint() * (Ms * Y));
      Y = detail::m_orthonormalize<Scalar>(Y, M);
    }
    Block Q(n, X.cols() + Y.cols());
    Q << X, Y;
    Block H = Q.adjoint() * (A * Q);
    H = 0.5 * (H + H.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Block> es(H);
    const int keep = std::min<int>(b, int(Q.cols()));
    X = Q * es.eigenvectors().leftCols(keep);
    theta.assign(es.eigenvalues().data(), es.eigenvalues().data() + keep);
    res.ritz_history.push_back(std::vector<double>(theta.begin(), theta.begin() + std::min(nev, keep)));
    std::vector<double> lam(theta.begin(), theta.begin() + std::min(nev, keep));
    const Block Xn = X.leftCols(Eigen::Index(lam.size()));
    const auto r = residual_norms<Scalar>(A, M, Xn, lam);
    bool all = int(lam.size()) == nev;
    // Per-pair convergence; a pair only stays frozen while every pair below it has converged.
    bool prefix = true;
    for (int j = 0; j < b; ++j) {
      const bool ok = j < int(r.size()) && r[j] <= opts.tol * std::max(1.0, std::abs(lam[j]));
      done[j] = prefix && ok;
      prefix = prefix && ok;
      if (j < nev) all = all && ok;
    }
    res.iterations = it;
    if (all) {
      res.converged = true;
      res.residuals = r;
      break;
    }
    if (it == opts.max_iter) {
      res.residuals = r;
      std::ostringstream os;
      os << "block inverse iteration stopped after " << it << " sweeps; worst residual "
         << *std::max_element(r.begin(), r.end()) << " > tol " << opts.tol;
      res.diagnostic = os.str();
    }
  }
  res.eigenvalues.assign(theta.begin(), theta.begin() + std::min<int>(nev, int(theta.size())));
  res.vectors = X.leftCols(Eigen::Index(res.eigenvalues.size()));
  return res;
}

/// Operator overload: vectors are also expanded to mesh functions.
template <class Scalar>
EigenResult<Scalar> smallest_eigenpairs(const DiscreteOperator<Scalar>& op, const EigenOptions& opts) {
  auto res = smallest_eigenpairs<Scalar>(op.A, op.M, opts);
  if (res.residuals.empty()) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> X = res.vectors;
    res.residuals = residual_norms<Scalar>(op.A, op.M, X, res.eigenvalues);
  }
  if (op.mesh)
    for (Eigen::Index j = 0; j < res.vectors.cols(); ++j)
      res.functions.push_back(to_function(op.mesh, op.dof_of_vertex, res.vectors.col(j)));
  return res;
}

struct BandRow {
  int k_index = 0;
  Point k = Point::Zero();
  int band = 0;
  double lambda = 0.0;
  double residual = 0.0;
};

/// Lowest n_bands eigenvalues of H_k along a path of quasi-momenta (complex assembly).
inline std::vector<BandRow> band_sweep(const MeshPtr& mesh, const PotentialSpec& spec,
                                       const std::vector<BlochVector>& path, int n_bands, EigenOptions opts) {
  opts.n_eigs = n_bands;
  std::vector<BandRow> rows;
  for (std::size_t i = 0; i < path.size(); ++i) {
    try {
      const auto op = assemble_hk<std::complex<double>>(mesh, spec, path[i]);
      EigenOptions o = opts;
      o.shift = coercive_shift(spec, op).C;
      const auto r = smallest_eigenpairs(op, o);
      if (!r.converged) throw Error(ErrorCode::NotConverged, r.diagnostic);
      for (int b = 0; b < int(r.eigenvalues.size()); ++b)
        rows.push_back({int(i), path[i].k(), b, r.eigenvalues[b], r.residuals[b]});
    } catch (const Error& e) {
      std::ostringstream os;
      os << "band_sweep at k_index " << i << " (k = " << path[i].k().transpose() << "): " << e.what();
      throw Error(e.code(), os.str());
    }
  }
  return rows;
}

/// CSV with header k_index,k1,k2,k3,band_index,lambda,residual.
inline void write_band_csv(const std::vector<BandRow>& rows, std::ostream& os) {
  os << "k_index,k1,k2,k3,band_index,lambda,residual\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%d,%.17g,%.6e\n", r.k_index, r.k[0], r.k[1], r.k[2], r.band,
                  r.lambda, r.residual);
    os << buf;
  }
}

}  // namespace isq
