#pragma once

// Matrix-free 2D discretizations: the anisotropic Dirichlet triangle, the
// Lu-Pan half-plane operator, and complex magnetic operators (well, strip)
// discretized in symmetric covariant-difference form with mid-edge averaged
// vector potentials.

#include <memory>

#include "eigencore.hpp"

namespace magspec {

/// Descriptor for the rectangular 2D grids (the triangle carries its own
/// exact diagonal-aligned mask).
struct Grid2D {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  int nx = 0, ny = 0;
  bool diagonal_aligned = false;
  double dx() const { return (x1 - x0) / nx; }
  double dy() const { return (y1 - y0) / ny; }
  std::string describe() const {
    std::ostringstream os;
    os << "grid2d[" << x0 << "," << x1 << "]x[" << y0 << "," << y1 << "];"
       << nx << "x" << ny;
    return os.str();
  }
};

struct MagneticPotential2D {
  std::function<double(double, double)> a1;  // coefficient of (h D_x + A1)^2
  std::function<double(double, double)> a2;  // coefficient of (h D_y + A2)^2
  std::string gauge = "default";
};

// ---------------------------------------------------------------------------
// Dirichlet triangle, -h^2 dxx - dyy
// ---------------------------------------------------------------------------

/// Triangle with vertices (-pi sqrt2, 0), (0, -pi sqrt2), (0, pi sqrt2);
/// diagonal-aligned grid dx = dy = pi sqrt2 / M puts every boundary node
/// exactly on an edge, so the Dirichlet condition is imposed without
/// staircase error. Interior nodes: x_i = -pi sqrt2 + i dx (1 <= i < M),
/// y_j = j dx with |j| <= i-1; dimension (M-1)^2.
inline MatrixFreeOp build_triangle(double h, int M) {
  if (M < 16) throw std::invalid_argument("build_triangle: M must be >= 16");
  if (!(h > 0.0)) throw std::invalid_argument("build_triangle: h must be > 0");
  const double dx = M_PI * std::sqrt(2.0) / M;
  const double cx = h * h / (dx * dx), cy = 1.0 / (dx * dx);
  const std::size_t dim = static_cast<std::size_t>(M - 1) * (M - 1);

  // node (i, j) -> (i-1)^2 + (j + i - 1), row i holds 2i-1 nodes
  auto idx = [](long i, long j) {
    return static_cast<std::size_t>((i - 1) * (i - 1) + (j + i - 1));
  };
  MatrixFreeOp op;
  op.dim = dim;
  op.meta.grid = "triangle M=" + std::to_string(M);
  op.meta.box = "h=" + std::to_string(h);
  op.apply = [M, cx, cy, idx](const double* u, double* v) {
    const double diag = 2.0 * cx + 2.0 * cy;
    for (long i = 1; i < M; ++i) {
      for (long j = -(i - 1); j <= i - 1; ++j) {
        double s = diag * u[idx(i, j)];
        if (std::abs(j) <= i - 2) s -= cx * u[idx(i - 1, j)];
        if (i + 1 < M) s -= cx * u[idx(i + 1, j)];
        if (j - 1 >= -(i - 1)) s -= cy * u[idx(i, j - 1)];
        if (j + 1 <= i - 1) s -= cy * u[idx(i, j + 1)];
        v[idx(i, j)] = s;
      }
    }
  };
  return op;
}

/// Dense assembly of a small matrix-free operator (oracle cross-checks).
inline std::vector<double> mf_to_dense(const MatrixFreeOp& op) {
  if (op.dim > 600) throw std::invalid_argument("mf_to_dense: dim > 600");
  const std::size_t n = op.dim;
  std::vector<double> a(n * n), e(n, 0.0), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    op.apply(e.data(), col.data());
    e[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) a[i * n + j] = col[i];
  }
  return a;
}

// ---------------------------------------------------------------------------
// Lu-Pan operator on the half-plane
// ---------------------------------------------------------------------------

/// D_s^2 + D_t^2 + (t cos(theta) - s sin(theta))^2 on (-S,S) x (0,T) with
/// the symmetric Neumann closure at t = 0 (half-weight boundary row) and
/// Dirichlet cuts elsewhere. The operator is returned in symmetrized
/// coordinates y = W^{1/2} u, so only the t = 0 <-> t = dt coupling carries
/// the sqrt(2) factor. `vcap`, when positive, clips the potential; any cap
/// far above the essential threshold leaves the low spectrum unchanged to
/// below solver tolerance while keeping the spectral width (and hence the
/// iteration count) moderate.
inline MatrixFreeOp build_lupan(double theta, double S, double T, int nx,
                                int ny, double vcap = 0.0,
                                double margin = 10.0) {
  if (!(theta > 0.0 && theta < 0.5 * M_PI))
    throw std::invalid_argument("build_lupan: theta outside (0, pi/2)");
  const double ct = std::cos(theta), st = std::sin(theta);
  const double corner = (T * ct - S * st) * (T * ct - S * st);
  if (corner < 1.0 + margin)
    throw std::invalid_argument(
        "build_lupan: box too small (V at the far corner below 1 + margin)");

  const double ds = 2.0 * S / nx, dt = T / ny;
  const int mi = nx - 1;  // interior columns i = 1..nx-1
  const int mj = ny;      // rows j = 0..ny-1 (j = 0 is the Neumann node)
  std::vector<double> pot(static_cast<std::size_t>(mi) * mj);
  for (int i = 0; i < mi; ++i)
    for (int j = 0; j < mj; ++j) {
      const double s = -S + (i + 1) * ds, t = j * dt;
      double V = (t * ct - s * st) * (t * ct - s * st);
      if (vcap > 0.0) V = std::min(V, vcap);
      pot[static_cast<std::size_t>(i) * mj + j] = V;
    }

  MatrixFreeOp op;
  op.dim = static_cast<std::size_t>(mi) * mj;
  op.meta.grid = std::to_string(nx) + "x" + std::to_string(ny);
  {
    std::ostringstream os;
    os << "lupan theta=" << theta << " S=" << S << " T=" << T;
    op.meta.box = os.str();
  }
  const double cs = 1.0 / (ds * ds), ctt = 1.0 / (dt * dt);
  op.apply = [mi, mj, cs, ctt, pot = std::move(pot)](const double* u, double* v) {
    const double rt2 = std::sqrt(2.0);
    for (int i = 0; i < mi; ++i) {
      const std::size_t base = static_cast<std::size_t>(i) * mj;
      for (int j = 0; j < mj; ++j) {
        const std::size_t id = base + j;
        double s = (2.0 * cs + 2.0 * ctt + pot[id]) * u[id];
        if (i > 0) s -= cs * u[id - mj];
        if (i + 1 < mi) s -= cs * u[id + mj];
        if (j > 1) s -= ctt * u[id - 1];
        if (j == 1) s -= rt2 * ctt * u[id - 1];
        if (j + 1 < mj) s -= (j == 0 ? rt2 : 1.0) * ctt * u[id + 1];
        v[id] = s;
      }
    }
  };
  return op;
}

// ---------------------------------------------------------------------------
// Complex magnetic operators (covariant edge differences)
// ---------------------------------------------------------------------------

namespace detail {

// (h D + A)^2-type terms are assembled as D^dagger D over grid edges with
// the vector potential averaged at mid-edge; Hermitian by construction.
struct EdgeScheme {
  int mi = 0, mj = 0;                  // interior nodes per direction
  double hx = 0.0, hy = 0.0;           // quasimomentum factors
  double dx = 0.0, dy = 0.0;
  std::vector<double> ax;              // x-edge potentials ((mi+1) * mj)
  std::vector<double> ay;              // y-edge potentials (mi * (mj+1))

  void apply(const std::complex<double>* u, std::complex<double>* v) const {
    using C = std::complex<double>;
    const C ix(0.0, hx / dx), iy(0.0, hy / dy);
    for (std::size_t t = 0; t < static_cast<std::size_t>(mi) * mj; ++t)
      v[t] = C(0.0, 0.0);
    auto node = [this](int i, int j) {
      return static_cast<std::size_t>(i) * mj + j;
    };
    // x-edges: e = (i-1,j) -> (i,j) for i = 0..mi (ghosts at both walls)
    for (int i = 0; i <= mi; ++i)
      for (int j = 0; j < mj; ++j) {
        const double a = ax[static_cast<std::size_t>(i) * mj + j];
        const C alpha = -ix + 0.5 * a;  // coefficient of u_right
        const C beta = ix + 0.5 * a;    // coefficient of u_left
        const C ul = i > 0 ? u[node(i - 1, j)] : C(0.0);
        const C ur = i < mi ? u[node(i, j)] : C(0.0);
        const C w = alpha * ur + beta * ul;
        if (i < mi) v[node(i, j)] += std::conj(alpha) * w;
        if (i > 0) v[node(i - 1, j)] += std::conj(beta) * w;
      }
    // y-edges
    for (int i = 0; i < mi; ++i)
      for (int j = 0; j <= mj; ++j) {
        const double a = ay[static_cast<std::size_t>(i) * (mj + 1) + j];
        const C alpha = -iy + 0.5 * a;
        const C beta = iy + 0.5 * a;
        const C ud = j > 0 ? u[node(i, j - 1)] : C(0.0);
        const C uu = j < mj ? u[node(i, j)] : C(0.0);
        const C w = alpha * uu + beta * ud;
        if (j < mj) v[node(i, j)] += std::conj(alpha) * w;
        if (j > 0) v[node(i, j - 1)] += std::conj(beta) * w;
      }
  }
};

}  // namespace detail

/// Magnetic Schroedinger operator (h D_x + A1)^2 + (h D_y + A2)^2 on the
/// square [-R, R]^2, Dirichlet, as a complex Hermitian matrix-free operator.
/// The default well has A1 = 0, A2 = x + x^3/3 + y^2 x (field 1 + x^2 + y^2).
inline ComplexMatrixFreeOp build_magnetic_well(
    double h, double R, int n,
    const MagneticPotential2D* gauge = nullptr) {
  if (!(h > 0.0)) throw std::invalid_argument("build_magnetic_well: h > 0");
  // well depth check: field at the wall must dominate the minimum
  const double field_wall = 1.0 + R * R;
  if (field_wall < 3.0)
    throw std::invalid_argument("build_magnetic_well: box too small (B(R,0) < 3 B_min)");

  auto a1 = gauge && gauge->a1
                ? gauge->a1
                : std::function<double(double, double)>([](double, double) { return 0.0; });
  auto a2 = gauge && gauge->a2
                ? gauge->a2
                : std::function<double(double, double)>([](double x, double y) {
                    return x + x * x * x / 3.0 + y * y * x;
                  });

  auto sch = std::make_shared<detail::EdgeScheme>();
  sch->mi = n - 1;
  sch->mj = n - 1;
  sch->dx = 2.0 * R / n;
  sch->dy = sch->dx;
  sch->hx = h;
  sch->hy = h;
  auto xi = [&](int i) { return -R + (i + 1) * sch->dx; };
  sch->ax.resize(static_cast<std::size_t>(sch->mi + 1) * sch->mj);
  for (int i = 0; i <= sch->mi; ++i)
    for (int j = 0; j < sch->mj; ++j)
      sch->ax[static_cast<std::size_t>(i) * sch->mj + j] =
          a1(xi(i) - 0.5 * sch->dx, xi(j));
  sch->ay.resize(static_cast<std::size_t>(sch->mi) * (sch->mj + 1));
  for (int i = 0; i < sch->mi; ++i)
    for (int j = 0; j <= sch->mj; ++j)
      sch->ay[static_cast<std::size_t>(i) * (sch->mj + 1) + j] =
          a2(xi(i), xi(j) - 0.5 * sch->dy);

  ComplexMatrixFreeOp op;
  op.dim = static_cast<std::size_t>(sch->mi) * sch->mj;
  op.meta.grid = std::to_string(n) + "x" + std::to_string(n);
  op.meta.box = "well R=" + std::to_string(R) + " h=" + std::to_string(h);
  op.apply = [sch](const std::complex<double>* u, std::complex<double>* v) {
    sch->apply(u, v);
  };
  return op;
}

/// Magnetic strip operator (i d_s + B(s,0) tau)^2 - eps^{-2} d_tau^2 on
/// (-S, S) x (-1, 1), Dirichlet. `a_extra(s, tau)` adds a gauge term to the
/// s-component of the vector potential.
inline ComplexMatrixFreeOp build_magnetic_strip(
    double eps, const std::function<double(double)>& b_profile, double S,
    int ns, int ntau,
    const std::function<double(double, double)>& a_extra = nullptr) {
  if (!(eps > 0.0)) throw std::invalid_argument("build_magnetic_strip: eps > 0");
  // compact support check: the profile must vanish at the s cuts
  if (std::abs(b_profile(-S)) > 1e-12 || std::abs(b_profile(S)) > 1e-12)
    throw std::invalid_argument(
        "build_magnetic_strip: B not compactly supported within the box");

  auto sch = std::make_shared<detail::EdgeScheme>();
  sch->mi = ns - 1;
  sch->mj = ntau - 1;
  sch->dx = 2.0 * S / ns;
  sch->dy = 2.0 / ntau;
  sch->hx = 1.0;
  sch->hy = 1.0 / eps;
  sch->ax.resize(static_cast<std::size_t>(sch->mi + 1) * sch->mj);
  for (int i = 0; i <= sch->mi; ++i)
    for (int j = 0; j < sch->mj; ++j) {
      const double s = -S + (i + 0.5) * sch->dx;
      const double tau = -1.0 + (j + 1) * sch->dy;
      double a = b_profile(s) * tau;
      if (a_extra) a += a_extra(s, tau);
      sch->ax[static_cast<std::size_t>(i) * sch->mj + j] = a;
    }
  sch->ay.assign(static_cast<std::size_t>(sch->mi) * (sch->mj + 1), 0.0);

  ComplexMatrixFreeOp op;
  op.dim = static_cast<std::size_t>(sch->mi) * sch->mj;
  op.meta.grid = std::to_string(ns) + "x" + std::to_string(ntau);
  op.meta.box = "strip eps=" + std::to_string(eps) + " S=" + std::to_string(S);
  op.apply = [sch](const std::complex<double>* u, std::complex<double>* v) {
    sch->apply(u, v);
  };
  return op;
}

/// Stochastic Hermiticity defect of a complex operator.
inline double hermiticity_defect(const ComplexMatrixFreeOp& op,
                                 std::uint64_t seed, int trials = 4) {
  std::uint64_t st = seed ^ 0x6865726dULL;
  using C = std::complex<double>;
  std::vector<C> u(op.dim), v(op.dim), au(op.dim), av(op.dim);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    for (auto& x : u) x = C(detail::runif(st), detail::runif(st));
    for (auto& x : v) x = C(detail::runif(st), detail::runif(st));
    op.apply(u.data(), au.data());
    op.apply(v.data(), av.data());
    C d1(0, 0), d2(0, 0);
    double nau = 0, nv = 0, nav = 0, nu = 0;
    for (std::size_t i = 0; i < op.dim; ++i) {
      d1 += au[i] * std::conj(v[i]);
      d2 += u[i] * std::conj(av[i]);
      nau += std::norm(au[i]);
      nv += std::norm(v[i]);
      nav += std::norm(av[i]);
      nu += std::norm(u[i]);
    }
    const double scale = std::sqrt(nau * nv) + std::sqrt(nav * nu) + 1e-300;
    worst = std::max(worst, std::abs(d1 - d2) / scale);
  }
  return worst;
}

}  // namespace magspec
