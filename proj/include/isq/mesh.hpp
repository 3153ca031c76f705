#pragma once

// Graded tetrahedral meshes of the unit torus and of balls.
//
// Both meshes start from a structured grid split into six Kuhn tetrahedra per cell. The
// split is mirrored per axis so that, near a singular point p, every cell's main diagonal
// starts at the corner closest to p; the rays along the 26 grid directions through p are
// then mesh edges. A radial map applied to the vertices inside the grading box of p moves
// the l^inf shell at grid distance j onto the sphere of radius w (j/m)^{1/mu}. On the torus
// the outer half of the box is a transition shell in which the spheres are blended back
// into the cube faces, so the mapped box matches the untouched grid around it.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "isq/error.hpp"
#include "isq/model.hpp"
#include "isq/quadrature.hpp"

namespace isq {

using Tet = std::array<int, 4>;
using cplx = std::complex<double>;

/// Radii r_j = cutoff (j / n_layers)^{1/mu}, j = 1..n_layers.
inline std::vector<double> layer_radii(double cutoff, int n_layers, double mu) {
  if (n_layers < 1 || !(mu > 0.0 && mu <= 1.0)) throw Error(ErrorCode::OutOfRange, "layer_radii needs n_layers >= 1, 0 < mu <= 1");
  std::vector<double> r(n_layers);
  for (int j = 1; j <= n_layers; ++j) r[j - 1] = cutoff * std::pow(double(j) / n_layers, 1.0 / mu);
  r.back() = cutoff;
  return r;
}

/// Default grading exponent mu_p = min(1, eta_p - 0.05), eta_p = sqrt(1/4 + Z(p)).
inline double default_grading(double Z) {
  if (!(Z > -0.25)) throw Error(ErrorCode::AssumptionViolation, "grading rule needs Z(p) > -1/4");
  const double mu = std::min(1.0, std::sqrt(0.25 + Z) - 0.05);
  if (!(mu > 0.0)) throw Error(ErrorCode::OutOfRange, "Z(p) too close to -1/4 for the default grading rule");
  return mu;
}

/// Radial grading about one centre, acting on reference displacements.
struct GradingBox {
  std::size_t point = 0;
  Point center = Point::Zero();  // reference = physical position of p
  double half_width = 0.0;       // w
  int layers = 0;                // m grid cells from p to the box face
  double mu = 1.0;
  double blend_start = 0.5;      // s beyond which spheres blend into cube faces (1 = never)

  double blend(double s) const {
    if (s <= blend_start) return 0.0;
    const double t = (s - blend_start) / (1.0 - blend_start);
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
  }

  /// Image of a reference displacement d with |d|_inf < w.
  Point map(const Point& d) const {
    const double t = d.lpNorm<Eigen::Infinity>();
    if (t == 0.0) return Point::Zero();
    const double s = t / half_width;
    const Point e = d / t;
    const double b = blend(s);
    const double scale = half_width * std::pow(s, 1.0 / mu) * ((1.0 - b) / e.norm() + b);
    return scale * e;
  }

  /// Inverse of map for a physical displacement with |x|_inf < w.
  Point unmap(const Point& x) const {
    const double tx = x.lpNorm<Eigen::Infinity>();
    if (tx == 0.0) return Point::Zero();
    const Point e = x / tx;
    const double en = e.norm();
    const double target = x.norm();
    auto radius = [&](double s) {
      const double b = blend(s);
      return half_width * std::pow(s, 1.0 / mu) * ((1.0 - b) / en + b) * en;
    };
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (radius(mid) < target ? lo : hi) = mid;
    }
    return half_width * 0.5 * (lo + hi) * e;
  }

  /// Radii of the spherical (unblended) layers, j = 1.. while j/m <= blend_start.
  std::vector<double> sphere_radii() const {
    std::vector<double> r;
    for (int j = 1; j <= layers && double(j) / layers <= blend_start + 1e-12; ++j)
      r.push_back(half_width * std::pow(double(j) / layers, 1.0 / mu));
    return r;
  }
};

struct GradedMesh {
  Domain domain;
  int n = 0;
  std::vector<Point> vertices;
  std::vector<Tet> tets;               // six per grid cell, cell-major order
  std::vector<int> rep;                // periodic representative of each vertex (identity on the ball)
  std::vector<char> boundary;          // Dirichlet vertices (ball surface)
  std::vector<double> grading;         // mu_p per singular point
  std::vector<int> singular_vertex;    // vertex carrying each singular point
  std::vector<int> singular_of_vertex; // inverse map, -1 elsewhere
  std::vector<std::vector<double>> layer_radii;  // spherical layer radii about each p
  double h_max = 0.0;
  double shape_constant = 0.0;         // max circumradius / inradius
  double ball_scale = 1.0;             // physical = ball_scale * reference (ball)
  Point origin = Point::Zero();        // reference grid origin
  double spacing = 0.0;                // reference grid spacing
  std::vector<GradingBox> boxes;

  std::size_t num_cells() const { return static_cast<std::size_t>(n) * n * n; }
  int node(int i, int j, int k) const { return i + (n + 1) * (j + (n + 1) * k); }

  double tet_volume(std::size_t t) const {
    const auto& v = tets[t];
    return (vertices[v[1]] - vertices[v[0]])
               .dot((vertices[v[2]] - vertices[v[0]]).cross(vertices[v[3]] - vertices[v[0]])) /
           6.0;
  }
  double total_volume() const {
    double s = 0.0;
    for (std::size_t t = 0; t < tets.size(); ++t) s += tet_volume(t);
    return s;
  }
  /// Number of distinct vertices after periodic identification.
  std::size_t num_identified() const {
    std::size_t c = 0;
    for (std::size_t v = 0; v < rep.size(); ++v) c += rep[v] == int(v);
    return c;
  }
};

using MeshPtr = std::shared_ptr<const GradedMesh>;

namespace detail {

inline double circum_over_in(const std::array<Point, 4>& p) {
  Eigen::Matrix3d A;
  Eigen::Vector3d b;
  for (int i = 0; i < 3; ++i) {
    const Point e = p[i + 1] - p[0];
    A.row(i) = 2.0 * e.transpose();
    b[i] = e.squaredNorm();
  }
  const double R = A.fullPivLu().solve(b).norm();
  const double vol = std::abs((p[1] - p[0]).dot((p[2] - p[0]).cross(p[3] - p[0]))) / 6.0;
  double area = 0.0;
  const int f[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
  for (const auto& fa : f) area += 0.5 * (p[fa[1]] - p[fa[0]]).cross(p[fa[2]] - p[fa[0]]).norm();
  return R / (3.0 * vol / area);
}

/// Six Kuhn tetrahedra of cell (i,j,k) whose diagonal starts at corner `flip`.
inline void kuhn_cell(const GradedMesh& m, int i, int j, int k, const std::array<int, 3>& flip,
                      std::vector<Tet>& out) {
  static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& pm : perms) {
    std::array<int, 3> c = flip;
    Tet t{};
    t[0] = m.node(i + c[0], j + c[1], k + c[2]);
    for (int s = 0; s < 3; ++s) {
      c[pm[s]] ^= 1;
      t[s + 1] = m.node(i + c[0], j + c[1], k + c[2]);
    }
    out.push_back(t);
  }
}

inline void finalize_mesh(GradedMesh& m) {
  // Orientation from the reference (affine) grid is fixed before mapping; here we only verify.
  m.h_max = 0.0;
  m.shape_constant = 0.0;
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    const double vol = m.tet_volume(t);
    if (!(vol > 0.0)) {
      std::ostringstream os;
      os << "grading layers invert tetrahedron " << t << " (n = " << m.n << "); increase n or mu";
      throw Error(ErrorCode::MeshInversion, os.str());
    }
    std::array<Point, 4> p;
    for (int a = 0; a < 4; ++a) p[a] = m.vertices[m.tets[t][a]];
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b) m.h_max = std::max(m.h_max, (p[a] - p[b]).norm());
    m.shape_constant = std::max(m.shape_constant, circum_over_in(p));
  }
  m.singular_of_vertex.assign(m.vertices.size(), -1);
  for (std::size_t s = 0; s < m.singular_vertex.size(); ++s) {
    m.singular_of_vertex[m.singular_vertex[s]] = int(s);
    for (std::size_t v = 0; v < m.vertices.size(); ++v)
      if (m.rep[v] == m.rep[m.singular_vertex[s]]) m.singular_of_vertex[v] = int(s);
  }
}

inline void orient(GradedMesh& m, const std::vector<Point>& reference) {
  for (auto& t : m.tets) {
    const double v = (reference[t[1]] - reference[t[0]])
                         .dot((reference[t[2]] - reference[t[0]]).cross(reference[t[3]] - reference[t[0]]));
    if (v < 0.0) std::swap(t[2], t[3]);
  }
}

}  // namespace detail

/// Torus mesh: n^3 cells, singular points must be grid nodes. mu[i] overrides the grading
/// exponent of singular point i (default rule otherwise).
inline MeshPtr build_torus_mesh(const PotentialSpec& spec, int n, const std::vector<double>& mu = {}) {
  if (!spec.domain().is_torus()) throw Error(ErrorCode::MeshLayout, "build_torus_mesh needs a torus domain");
  if (n < 4 || n % 2 != 0) throw Error(ErrorCode::MeshLayout, "torus mesh needs n >= 4 even");
  auto m = std::make_shared<GradedMesh>();
  m->domain = spec.domain();
  m->n = n;
  m->spacing = 1.0 / n;
  const auto& pts = spec.singular();
  if (!pts.empty()) {
    for (int c = 0; c < 3; ++c) m->origin[c] = pts[0].position[c] - std::floor(pts[0].position[c] * n) / n;
  }
  for (std::size_t s = 0; s < pts.size(); ++s) {
    GradingBox b;
    b.point = s;
    b.center = pts[s].position;
    const Point g = (pts[s].position - m->origin) * n;
    for (int c = 0; c < 3; ++c)
      if (std::abs(g[c] - std::round(g[c])) > 1e-9)
        throw Error(ErrorCode::MeshLayout, "singular point " + std::to_string(s) + " is not a node of the n-grid");
    b.layers = static_cast<int>(std::floor(pts[s].cutoff_radius * n + 1e-9));
    if (b.layers < 2) throw Error(ErrorCode::MeshLayout, "cutoff ball spans fewer than two grid cells; increase n");
    b.half_width = double(b.layers) / n;
    b.mu = s < mu.size() ? mu[s] : default_grading(pts[s].Z);
    if (!(b.mu > 0.0 && b.mu <= 1.0)) throw Error(ErrorCode::OutOfRange, "grading exponent must lie in (0, 1]");
    b.blend_start = 0.5;
    for (const auto& o : m->boxes) {
      const Point d = torus_displacement(b.center, o.center);
      if (d.lpNorm<Eigen::Infinity>() < b.half_width + o.half_width)
        throw Error(ErrorCode::MeshLayout, "grading boxes of two singular points overlap");
    }
    m->boxes.push_back(b);
    m->grading.push_back(b.mu);
  }

  const int N1 = n + 1;
  std::vector<Point> reference(std::size_t(N1) * N1 * N1);
  m->vertices.resize(reference.size());
  m->rep.resize(reference.size());
  m->boundary.assign(reference.size(), 0);
  for (int k = 0; k <= n; ++k)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) {
        const int v = m->node(i, j, k);
        const Point x = m->origin + Point(i, j, k) / double(n);
        reference[v] = x;
        Point y = x;
        for (const auto& b : m->boxes) {
          const Point d = torus_displacement(x, b.center);
          if (d.lpNorm<Eigen::Infinity>() < b.half_width - 1e-14) {
            y = x - d + b.map(d);
            break;
          }
        }
        m->vertices[v] = y;
        m->rep[v] = m->node(i % n, j % n, k % n);
      }

  // Mirror the Kuhn split per axis index toward the singular point owning that slab.
  std::array<std::vector<int>, 3> flip;
  for (int c = 0; c < 3; ++c) {
    flip[c].assign(n, 0);
    for (int i = 0; i < n; ++i) {
      const double xc = m->origin[c] + (i + 0.5) / n;
      for (const auto& b : m->boxes) {
        double d = xc - b.center[c];
        d -= std::round(d);
        if (std::abs(d) < b.half_width) {
          flip[c][i] = d < 0.0;
          break;
        }
      }
    }
  }
  m->tets.reserve(m->num_cells() * 6);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) detail::kuhn_cell(*m, i, j, k, {flip[0][i], flip[1][j], flip[2][k]}, m->tets);
  detail::orient(*m, reference);

  for (const auto& b : m->boxes) {
    const Point g = (b.center - m->origin) * n;
    const int i = int(std::lround(g[0])) % n, j = int(std::lround(g[1])) % n, k = int(std::lround(g[2])) % n;
    m->singular_vertex.push_back(m->node(i, j, k));
    m->layer_radii.push_back(b.sphere_radii());
  }
  detail::finalize_mesh(*m);
  return m;
}

/// Ball mesh of radius R: the reference cube [-1,1]^3 with n cells per side (n even) is
/// mapped shell by shell onto concentric spheres of radius R (j/(n/2))^{1/mu}. A singular
/// point, if present, must sit at the centre.
inline MeshPtr build_ball_mesh(const PotentialSpec& spec, int n, std::optional<double> mu = std::nullopt) {
  if (spec.domain().is_torus()) throw Error(ErrorCode::MeshLayout, "build_ball_mesh needs a ball domain");
  if (n < 4 || n % 2 != 0) throw Error(ErrorCode::MeshLayout, "ball mesh needs n >= 4 even");
  const auto& pts = spec.singular();
  if (pts.size() > 1) throw Error(ErrorCode::MeshLayout, "ball meshes support one singular point at the centre");
  if (pts.size() == 1 && pts[0].position.norm() != 0.0)
    throw Error(ErrorCode::MeshLayout, "ball singular point must sit at the centre");
  const double R = spec.domain().radius;
  auto m = std::make_shared<GradedMesh>();
  m->domain = spec.domain();
  m->n = n;
  m->spacing = 2.0 / n;
  m->origin = Point::Constant(-1.0);
  m->ball_scale = R;
  GradingBox b;
  b.center = Point::Zero();
  b.half_width = 1.0;
  b.layers = n / 2;
  b.blend_start = 1.0;
  b.mu = mu ? *mu : (pts.empty() ? 1.0 : default_grading(pts[0].Z));
  if (!(b.mu > 0.0 && b.mu <= 1.0)) throw Error(ErrorCode::OutOfRange, "grading exponent must lie in (0, 1]");
  m->boxes.push_back(b);
  if (!pts.empty()) m->grading.push_back(b.mu);

  const int N1 = n + 1;
  std::vector<Point> reference(std::size_t(N1) * N1 * N1);
  m->vertices.resize(reference.size());
  m->rep.resize(reference.size());
  m->boundary.assign(reference.size(), 0);
  for (int k = 0; k <= n; ++k)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) {
        const int v = m->node(i, j, k);
        // Integer offsets from the centre keep the reference shells exact.
        const Point x = Point(2 * i - n, 2 * j - n, 2 * k - n) / double(n);
        reference[v] = x;
        const bool surface = i == 0 || j == 0 || k == 0 || i == n || j == n || k == n;
        Point y = surface ? Point(x / x.norm()) : b.map(x);
        m->vertices[v] = R * y;
        m->rep[v] = v;
        m->boundary[v] = surface;
      }
  const int h = n / 2;
  m->tets.reserve(m->num_cells() * 6);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) detail::kuhn_cell(*m, i, j, k, {i < h, j < h, k < h}, m->tets);
  detail::orient(*m, reference);
  if (!pts.empty()) {
    m->singular_vertex.push_back(m->node(h, h, h));
    std::vector<double> radii = b.sphere_radii();
    for (auto& r : radii) r *= R;
    m->layer_radii.push_back(radii);
  }
  detail::finalize_mesh(*m);
  return m;
}

/// Nodal P1 function; values are stored per mesh vertex and agree on identified vertices.
struct DiscreteFunction {
  MeshPtr mesh;
  std::vector<cplx> values;
  std::vector<int> truncated_nodes;  // singular vertices whose limit was not finite

};

/// Barycentric gradients of tet t (rows) and its volume.
inline std::pair<Eigen::Matrix<double, 4, 3>, double> p1_gradients(const GradedMesh& m, std::size_t t) {
  const auto& v = m.tets[t];
  Eigen::Matrix3d J;
  for (int a = 0; a < 3; ++a) J.col(a) = m.vertices[v[a + 1]] - m.vertices[v[0]];
  const double vol = J.determinant() / 6.0;
  const Eigen::Matrix3d Jinv = J.inverse();
  Eigen::Matrix<double, 4, 3> g;
  g.block<3, 3>(1, 0) = Jinv;
  g.row(0) = -Jinv.colwise().sum();
  return {g, vol};
}

/// Located point: tet index and barycentric coordinates.
struct Location {
  std::size_t tet = 0;
  std::array<double, 4> bary{};
};

/// Finds the tetrahedron containing x. Returns nullopt outside the mesh (ball exterior).
inline std::optional<Location> locate(const GradedMesh& m, const Point& x) {
  const bool torus = m.domain.is_torus();
  Point ref;
  if (torus) {
    Point y = x;
    for (int c = 0; c < 3; ++c) y[c] -= std::floor(y[c] - m.origin[c]);  // into [o, o+1)
    ref = y;
    for (const auto& b : m.boxes) {
      const Point d = torus_displacement(y, b.center);
      if (d.lpNorm<Eigen::Infinity>() < b.half_width) {
        ref = y - d + b.unmap(d);
        break;
      }
    }
  } else {
    const Point y = x / m.ball_scale;
    if (y.norm() > 1.0 + 1e-12) return std::nullopt;
    const double r = y.norm();
    const auto& b = m.boxes.front();
    if (r == 0.0) {
      ref = Point::Zero();
    } else {
      const Point e = y / r;
      const double s = std::pow(std::min(r, 1.0), b.mu);
      ref = s * e / e.lpNorm<Eigen::Infinity>();
    }
  }
  const Point g = (ref - m.origin) / m.spacing;
  const int ci = int(std::floor(g[0])), cj = int(std::floor(g[1])), ck = int(std::floor(g[2]));
  std::optional<Location> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int dk = -1; dk <= 1; ++dk)
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        int i = ci + di, j = cj + dj, k = ck + dk;
        if (torus) {
          i = ((i % m.n) + m.n) % m.n;
          j = ((j % m.n) + m.n) % m.n;
          k = ((k % m.n) + m.n) % m.n;
        } else if (i < 0 || j < 0 || k < 0 || i >= m.n || j >= m.n || k >= m.n) {
          continue;
        }
        const std::size_t cell = std::size_t(i) + std::size_t(m.n) * (j + std::size_t(m.n) * k);
        for (std::size_t t = 6 * cell; t < 6 * cell + 6; ++t) {
          const auto& v = m.tets[t];
          const Point& p0 = m.vertices[v[0]];
          const Point xs = torus ? Point(p0 + torus_displacement(x, p0)) : x;
          Eigen::Matrix3d J;
          for (int a = 0; a < 3; ++a) J.col(a) = m.vertices[v[a + 1]] - p0;
          const Eigen::Vector3d l = J.partialPivLu().solve(xs - p0);
          const std::array<double, 4> bary{1.0 - l.sum(), l[0], l[1], l[2]};
          const double score = *std::min_element(bary.begin(), bary.end());
          if (score > best_score) {
            best_score = score;
            best = Location{t, bary};
          }
        }
      }
  if (!best || best_score < -1e-8) return std::nullopt;
  return best;
}

/// Value of a P1 function at x (zero outside the ball).
inline cplx evaluate(const DiscreteFunction& u, const Point& x) {
  const auto loc = locate(*u.mesh, x);
  if (!loc) return 0.0;
  cplx s = 0.0;
  for (int a = 0; a < 4; ++a) s += loc->bary[a] * u.values[u.mesh->tets[loc->tet][a]];
  return s;
}

/// Nodal interpolation. At a singular vertex the value is the limit of f approaching p
/// inside the first layer if it settles, otherwise 0 and the node is flagged.
inline DiscreteFunction interpolate(const std::function<cplx(const Point&)>& f, const MeshPtr& mesh) {
  DiscreteFunction u;
  u.mesh = mesh;
  u.values.resize(mesh->vertices.size());
  const bool torus = mesh->domain.is_torus();
  auto wrap = [&](Point x) {
    if (torus)
      for (int c = 0; c < 3; ++c) x[c] -= std::floor(x[c]);
    return x;
  };
  for (std::size_t v = 0; v < mesh->vertices.size(); ++v) {
    const int s = mesh->singular_of_vertex[v];
    if (s < 0) {
      u.values[v] = f(wrap(mesh->vertices[v]));
      continue;
    }
    const Point p = mesh->vertices[v];
    const double r1 = mesh->layer_radii[s].empty() ? mesh->spacing : mesh->layer_radii[s].front();
    const Point e = Point(1.0, 1.0, 1.0).normalized();
    std::array<cplx, 3> seq;
    const double ts[3] = {1e-4, 1e-8, 1e-12};
    for (int i = 0; i < 3; ++i) seq[i] = f(wrap(p + ts[i] * r1 * e));
    const bool finite = std::isfinite(seq[2].real()) && std::isfinite(seq[2].imag());
    if (finite && std::abs(seq[2] - seq[1]) <= 1e-6 * std::max(1.0, std::abs(seq[1]))) {
      u.values[v] = seq[2];
    } else {
      u.values[v] = 0.0;
      if (mesh->rep[v] == int(v)) u.truncated_nodes.push_back(int(v));
    }
  }
  return u;
}

namespace detail {

/// Sub-tetrahedron in barycentric coordinates of its parent.
using SubTet = std::array<Eigen::Vector4d, 4>;

inline std::array<SubTet, 8> red_refine(const SubTet& t) {
  auto mid = [&](int a, int b) -> Eigen::Vector4d { return 0.5 * (t[a] + t[b]); };
  const Eigen::Vector4d m01 = mid(0, 1), m02 = mid(0, 2), m03 = mid(0, 3), m12 = mid(1, 2), m13 = mid(1, 3),
                        m23 = mid(2, 3);
  return {SubTet{t[0], m01, m02, m03}, SubTet{m01, t[1], m12, m13}, SubTet{m02, m12, t[2], m23},
          SubTet{m03, m13, m23, t[3]},  SubTet{m01, m02, m03, m13}, SubTet{m01, m02, m12, m13},
          SubTet{m02, m03, m13, m23},   SubTet{m02, m12, m13, m23}};
}

}  // namespace detail

/// Singularity-aware quadrature over tet t of f(bary, x), accumulating into acc.
/// Tets with a singular vertex use a rule collapsed at that vertex; tets close to a
/// singular point relative to their size are red-refined; order 6 near p, 4 elsewhere.
// Subtets with diameter above this multiple of their distance to p are red-refined.
inline constexpr double kSubdivideRatio = 1.0;
inline constexpr int kMaxDepth = 5;

template <class Acc, class F>
void integrate_tet(const GradedMesh& m, const PotentialSpec& spec, std::size_t t, Acc& acc, F&& f,
                   bool singular_integrand) {
  const auto& tv = m.tets[t];
  std::array<Point, 4> P;
  for (int a = 0; a < 4; ++a) P[a] = m.vertices[tv[a]];
  const double vol = m.tet_volume(t);

  auto apply_rule = [&](const QuadratureRule& rule, const detail::SubTet& st, double frac) {
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      Eigen::Vector4d b = Eigen::Vector4d::Zero();
      for (int a = 0; a < 4; ++a) b += rule.points[q][a] * st[a];
      const Point x = b[0] * P[0] + b[1] * P[1] + b[2] * P[2] + b[3] * P[3];
      acc += (rule.weights[q] * frac * vol) * f(std::array<double, 4>{b[0], b[1], b[2], b[3]}, x);
    }
  };
  const detail::SubTet whole{Eigen::Vector4d::UnitX(), Eigen::Vector4d::UnitY(), Eigen::Vector4d::UnitZ(),
                             Eigen::Vector4d::UnitW()};
  if (!singular_integrand || spec.singular().empty()) {
    apply_rule(tet_rule(4), whole, 1.0);
    return;
  }
  for (int a = 0; a < 4; ++a) {
    if (m.singular_of_vertex[tv[a]] >= 0) {
      static thread_local std::array<std::optional<QuadratureRule>, 4> rules;
      if (!rules[a]) rules[a] = collapsed_at(tet_rule(8), a);
      apply_rule(*rules[a], whole, 1.0);
      return;
    }
  }
  // Distance-to-size ratio against the nearest singular point.
  auto ratio = [&](const detail::SubTet& st) {
    std::array<Point, 4> X;
    for (int a = 0; a < 4; ++a) X[a] = st[a][0] * P[0] + st[a][1] * P[1] + st[a][2] * P[2] + st[a][3] * P[3];
    double diam = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int c = a + 1; c < 4; ++c) diam = std::max(diam, (X[a] - X[c]).norm());
    double dmin = std::numeric_limits<double>::infinity();
    for (const auto& p : spec.singular())
      for (int a = 0; a < 4; ++a) dmin = std::min(dmin, spec.distance(X[a], p.position));
    return diam / dmin;
  };
  auto recurse = [&](auto&& self, const detail::SubTet& st, double frac, int depth) -> void {
    const double q = ratio(st);
    if (q > kSubdivideRatio && depth < kMaxDepth) {
      for (const auto& c : detail::red_refine(st)) self(self, c, frac / 8.0, depth + 1);
    } else {
      apply_rule(tet_rule(q > 0.2 ? 6 : 4), st, frac);
    }
  };
  recurse(recurse, whole, 1.0, 0);
}

/// Discrete Kondratiev norm ||u||_{K^m_a} = (sum_{|b|<=m} int rho^{2(|b|-a)} |d^b u|^2)^{1/2}, m in {0,1}.
inline double weighted_norm(const DiscreteFunction& u, int m, double a, const PotentialSpec& spec) {
  if (m < 0 || m > 1) throw Error(ErrorCode::OutOfRange, "weighted_norm supports m in {0, 1} for P1 functions");
  const GradedMesh& mesh = *u.mesh;
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    const auto& tv = mesh.tets[t];
    std::array<cplx, 4> c;
    for (int i = 0; i < 4; ++i) c[i] = u.values[tv[i]];
    double g2 = 0.0;
    if (m == 1) {
      const auto [G, vol] = p1_gradients(mesh, t);
      Eigen::Vector3cd g = Eigen::Vector3cd::Zero();
      for (int i = 0; i < 4; ++i) g += c[i] * G.row(i).transpose().cast<cplx>();
      g2 = g.squaredNorm();
    }
    double acc = 0.0;
    integrate_tet(mesh, spec, t, acc,
                  [&](const std::array<double, 4>& b, const Point& x) {
                    const double r = rho(x, spec);
                    cplx val = 0.0;
                    for (int i = 0; i < 4; ++i) val += b[i] * c[i];
                    double s = std::pow(r, -2.0 * a) * std::norm(val);
                    if (m == 1) s += std::pow(r, 2.0 - 2.0 * a) * g2;
                    return s;
                  },
                  a != 0.0 || m == 1);
    total += acc;
  }
  return std::sqrt(total);
}

/// ASCII export:
///   isq-mesh 1
///   domain <torus|ball> <radius>
///   counts <vertices> <tets> <identifications>
///   v <x> <y> <z> <boundary 0|1>        (one per vertex, index order)
///   t <a> <b> <c> <d>                   (one per tet, 0-based, positive orientation)
///   i <vertex> <representative>         (only vertices with rep != self)
inline void export_mesh(const GradedMesh& m, std::ostream& os) {
  std::size_t ident = 0;
  for (std::size_t v = 0; v < m.rep.size(); ++v) ident += m.rep[v] != int(v);
  os << "isq-mesh 1\n";
  os << "domain " << (m.domain.is_torus() ? "torus" : "ball") << ' ' << m.domain.radius << '\n';
  os << "counts " << m.vertices.size() << ' ' << m.tets.size() << ' ' << ident << '\n';
  char buf[128];
  for (std::size_t v = 0; v < m.vertices.size(); ++v) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g %d\n", m.vertices[v][0], m.vertices[v][1], m.vertices[v][2],
                  int(m.boundary[v]));
    os << buf;
  }
  for (const auto& t : m.tets) os << "t " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  for (std::size_t v = 0; v < m.rep.size(); ++v)
    if (m.rep[v] != int(v)) os << "i " << v << ' ' << m.rep[v] << '\n';
}

}  // namespace isq
