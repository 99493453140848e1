#pragma once

// Discretizations of the 1D model operators on truncated domains, assembled
// as Tridiag instances. All builders use conservative second-order finite
// differences; Neumann boundaries use a vertex grid with a half-weight
// boundary node, Dirichlet truncation boundaries use a zero ghost value.

#include <functional>
#include <optional>
#include <sstream>
#include <variant>

#include "eigencore.hpp"

namespace magspec {

enum class BC { Dirichlet, Neumann };
enum class Layout { Vertex, CellCentered };

/// Uniform 1D grid of n kept nodes on (a, b).
///
/// Vertex layout: candidate nodes a + i*dx, i = 0..M; a Dirichlet end drops
/// its boundary node, a Neumann end keeps it (with inner-product weight 1/2).
/// CellCentered layout: nodes a + (i+1/2)*dx, i = 0..n-1, dx = (b-a)/n;
/// only Dirichlet ends are supported there.
struct Grid1D {
  double a = 0.0;
  double b = 1.0;
  int n = 0;
  BC bc_left = BC::Dirichlet;
  BC bc_right = BC::Dirichlet;
  Layout layout = Layout::Vertex;

  int segments() const {
    if (layout == Layout::CellCentered) return n;
    int m = n - 1;
    if (bc_left == BC::Dirichlet) ++m;
    if (bc_right == BC::Dirichlet) ++m;
    return m;
  }
  double dx() const { return (b - a) / segments(); }

  double node(int i) const {
    const double h = dx();
    if (layout == Layout::CellCentered) return a + (i + 0.5) * h;
    const int off = bc_left == BC::Dirichlet ? 1 : 0;
    return a + (i + off) * h;
  }

  void validate() const {
    if (!(b > a)) throw std::invalid_argument("Grid1D: b must exceed a");
    if (n < 8) throw std::invalid_argument("Grid1D: n must be >= 8");
    if (layout == Layout::CellCentered &&
        (bc_left == BC::Neumann || bc_right == BC::Neumann))
      throw std::invalid_argument("Grid1D: cell-centered grid is Dirichlet-only");
  }

  Grid1D refined() const {
    Grid1D g = *this;
    if (layout == Layout::CellCentered) {
      g.n = 2 * n;
    } else {
      g.n = n + segments();  // doubles the segment count
    }
    return g;
  }

  std::string describe() const {
    std::ostringstream os;
    os << "grid1d[" << a << "," << b << ";n=" << n
       << (layout == Layout::CellCentered ? ";cc" : ";v") << "]";
    return os.str();
  }
};

// ---------------------------------------------------------------------------
// Generic Sturm-Liouville assembly
// ---------------------------------------------------------------------------

/// Conservative FD of  (1/w) [ -h_s d/dx ( p du/dx ) ] + V u  on g,
/// self-adjoint in the inner product sum_i W_i u_i v_i dx. p and w default
/// to 1. The assembled form off-diagonals are checked for finiteness; the
/// weighted reduction is symmetric by construction of the flux form.
inline Tridiag assemble_sturm_liouville(
    const Grid1D& g, const std::function<double(double)>& V,
    const std::function<double(double)>& p = nullptr,
    const std::function<double(double)>& w = nullptr, double h_s = 1.0) {
  g.validate();
  const int n = g.n;
  const double dx = g.dx();
  auto pval = [&](double x) { return p ? p(x) : 1.0; };
  auto wval = [&](double x) { return w ? w(x) : 1.0; };

  Tridiag T;
  T.cell = dx;
  T.diag.resize(n);
  T.offdiag.resize(n - 1);
  T.weights.resize(n);

  for (int i = 0; i < n; ++i) {
    const double x = g.node(i);
    const double Vx = V(x);
    if (!std::isfinite(Vx))
      throw std::invalid_argument("assemble_sturm_liouville: non-finite V at x=" +
                                  std::to_string(x));
    const double pl = pval(x - 0.5 * dx), pr = pval(x + 0.5 * dx);
    double wi = wval(x);
    if (!(wi > 0.0))
      throw std::invalid_argument("assemble_sturm_liouville: weight <= 0");

    double flux = 0.0;
    bool left_open = true, right_open = true;
    if (g.layout == Layout::Vertex) {
      if (i == 0 && g.bc_left == BC::Neumann) {
        left_open = false;
        wi *= 0.5;
      }
      if (i == n - 1 && g.bc_right == BC::Neumann) {
        right_open = false;
        wi *= 0.5;
      }
    }
    if (left_open) flux += pl;
    if (right_open) flux += pr;
    const double form_diag = h_s * flux / (dx * dx) + wi * Vx;
    T.diag[i] = form_diag / wi;
    T.weights[i] = wi;
    if (i + 1 < n) T.offdiag[i] = -h_s * pr / (dx * dx);
  }
  T.validate();
  return T;
}

// ---------------------------------------------------------------------------
// Model tags
// ---------------------------------------------------------------------------

enum class FiberDomain { FullLine, HalfLineNeumann };

struct DeGennes {
  double zeta;
};
struct Montgomery {
  int k = 1;
  double zeta = 0.0;
};
struct BrokenMontFiber {
  double x = 0.0;
  double xi = 0.0;
  FiberDomain domain = FiberDomain::HalfLineNeumann;
};
struct Harmonic {};
struct Laguerre {};
struct BOTriangle {
  double h;
};
struct BOGuide {
  double h;
  double x_max = 8.0;
};
struct DeltaEffective {
  double h;
  int branch = 1;
  double x_left = 2.0;
  double x_max = 4.0;
};
struct CustomPotential {
  std::function<double(double)> V;
  std::function<double(double)> weight;  // optional
  std::function<double(double)> p;       // optional; defaults to weight or 1
  double h_s = 1.0;
};

using Model1D = std::variant<DeGennes, Montgomery, BrokenMontFiber, Harmonic,
                             Laguerre, BOTriangle, BOGuide, DeltaEffective,
                             CustomPotential>;

// ---------------------------------------------------------------------------
// Potentials
// ---------------------------------------------------------------------------

inline double de_gennes_potential(double zeta, double t) {
  const double u = zeta - t;
  return u * u;
}

inline double montgomery_potential(int k, double zeta, double t) {
  const double u = zeta - std::pow(t, k + 1) / (k + 1);
  return u * u;
}

inline double broken_mont_potential(double x, double xi, double tau) {
  const double sgn = tau >= 0.0 ? 1.0 : -1.0;
  const double u = -xi - x * tau + sgn * 0.5 * tau * tau;
  return u * u;
}

inline double bo_triangle_potential(double x) {
  const double d = x + M_PI * std::sqrt(2.0);
  return M_PI * M_PI / (4.0 * d * d);
}

inline double bo_guide_potential(double x) {
  return x < 0.0 ? bo_triangle_potential(x) : 0.5;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

namespace detail {

inline void require_no_node_at(const Grid1D& g, double x0, const char* what) {
  for (int i = 0; i < g.n; ++i)
    if (std::abs(g.node(i) - x0) < 1e-12 * std::max(1.0, std::abs(g.b - g.a)))
      throw std::invalid_argument(std::string("grid places a node on ") + what);
}

// Truncation check: potential at the cut must dominate the eigenvalue
// estimate by `margin`; the estimate comes from a coarse pre-solve.
inline double coarse_lowest(const Tridiag& T) {
  return tridiag_eigenvalues(T, 1, 1e-9).eigenvalues[0];
}

}  // namespace detail

/// Neumann realization of D_t^2 + (zeta - t)^2 on [0, b], Dirichlet cut at b.
/// Requires b >= zeta + 12 so the cut sits deep in the Gaussian tail; the
/// Dirichlet truncation yields an upper bound on each true eigenvalue.
inline Tridiag build_de_gennes(double zeta, const Grid1D& g) {
  if (g.a != 0.0 || g.bc_left != BC::Neumann || g.bc_right != BC::Dirichlet ||
      g.layout != Layout::Vertex)
    throw std::invalid_argument("build_de_gennes: needs Neumann at 0, Dirichlet cut");
  if (g.b < zeta + 12.0)
    throw std::invalid_argument("build_de_gennes: truncation too small (b < zeta+12)");
  return assemble_sturm_liouville(
      g, [zeta](double t) { return de_gennes_potential(zeta, t); });
}

/// Generalized Montgomery operator D_t^2 + (zeta - t^{k+1}/(k+1))^2 on a
/// symmetric interval, Dirichlet at both cuts. Fixes the t^{k+1}/(k+1)
/// normalization; the zeta-reflection map is t -> -t for odd k only.
inline Tridiag build_montgomery(int k, double zeta, const Grid1D& g,
                                double margin = 10.0) {
  if (k < 1) throw std::invalid_argument("build_montgomery: k must be >= 1");
  if (g.bc_left != BC::Dirichlet || g.bc_right != BC::Dirichlet)
    throw std::invalid_argument("build_montgomery: Dirichlet cuts required");
  if (std::abs(g.a + g.b) > 1e-12 * std::abs(g.b))
    throw std::invalid_argument("build_montgomery: interval must be symmetric");
  auto V = [k, zeta](double t) { return montgomery_potential(k, zeta, t); };
  Tridiag T = assemble_sturm_liouville(g, V);
  const double nu_est = detail::coarse_lowest(T);
  if (V(g.a) < nu_est + margin || V(g.b) < nu_est + margin)
    throw std::invalid_argument("build_montgomery: truncation check failed");
  return T;
}

/// Neumann half-line realization of the Montgomery operator (equal lowest
/// eigenvalue for odd k by the even symmetry of the potential).
inline Tridiag build_montgomery_halfline(int k, double zeta, const Grid1D& g) {
  if (g.a != 0.0 || g.bc_left != BC::Neumann || g.bc_right != BC::Dirichlet)
    throw std::invalid_argument(
        "build_montgomery_halfline: needs Neumann at 0, Dirichlet cut");
  return assemble_sturm_liouville(
      g, [k, zeta](double t) { return montgomery_potential(k, zeta, t); });
}

/// Fiber operator of the broken Montgomery model,
/// D_tau^2 + (-xi - x tau + sgn(tau) tau^2/2)^2.
/// FullLine uses a cell-centered grid with no node at tau = 0 (sgn must be
/// well defined); HalfLineNeumann is the Neumann realization on [0, L].
inline Tridiag build_broken_mont_fiber(double x, double xi, FiberDomain domain,
                                       const Grid1D& g, double margin = 10.0) {
  auto V = [x, xi](double tau) { return broken_mont_potential(x, xi, tau); };
  Tridiag T;
  if (domain == FiberDomain::FullLine) {
    if (g.layout != Layout::CellCentered || g.bc_left != BC::Dirichlet ||
        g.bc_right != BC::Dirichlet)
      throw std::invalid_argument(
          "build_broken_mont_fiber: full line needs cell-centered Dirichlet grid");
    detail::require_no_node_at(g, 0.0, "tau = 0 (sgn kink)");
    T = assemble_sturm_liouville(g, V);
  } else {
    if (g.a != 0.0 || g.bc_left != BC::Neumann || g.bc_right != BC::Dirichlet)
      throw std::invalid_argument(
          "build_broken_mont_fiber: half line needs Neumann at 0");
    T = assemble_sturm_liouville(g, V);
  }
  const double nu_est = detail::coarse_lowest(T);
  if (V(g.b) < nu_est + margin ||
      (domain == FiberDomain::FullLine && V(g.a) < nu_est + margin))
    throw std::invalid_argument("build_broken_mont_fiber: truncation check failed");
  return T;
}

/// Harmonic oscillator D_x^2 + x^2 on a symmetric Dirichlet interval.
inline Tridiag build_harmonic(const Grid1D& g) {
  if (g.bc_left != BC::Dirichlet || g.bc_right != BC::Dirichlet)
    throw std::invalid_argument("build_harmonic: Dirichlet cuts required");
  return assemble_sturm_liouville(g, [](double x) { return x * x; });
}

/// Radial Laguerre-type operator -(1/tau^2) d/dtau (tau^2 d/dtau) + tau^2/32
/// in L^2(tau^2 dtau) on (0, L]. Cell-centered grid: the flux coefficient
/// p = tau^2 vanishes at tau = 0, which realizes the natural condition.
inline Tridiag build_laguerre(const Grid1D& g) {
  if (g.layout != Layout::CellCentered)
    throw std::invalid_argument("build_laguerre: grid must be cell-centered");
  if (g.a != 0.0) throw std::invalid_argument("build_laguerre: domain starts at 0");
  auto sq = [](double t) { return t * t; };
  return assemble_sturm_liouville(
      g, [](double t) { return t * t / 32.0; }, sq, sq);
}

/// Born-Oppenheimer reduction of the thin triangle:
/// -h^2 d^2/dx^2 + pi^2 / (4 (x + pi sqrt(2))^2) on (-pi sqrt(2), 0).
inline Tridiag build_bo_triangle(double h, const Grid1D& g) {
  if (!(h > 0.0)) throw std::invalid_argument("build_bo_triangle: h must be > 0");
  if (std::abs(g.a + M_PI * std::sqrt(2.0)) > 1e-12 || std::abs(g.b) > 1e-12)
    throw std::invalid_argument("build_bo_triangle: domain must be (-pi sqrt2, 0)");
  return assemble_sturm_liouville(
      g, [](double x) { return bo_triangle_potential(x); }, nullptr, nullptr,
      h * h);
}

/// Broken-guide reduction: -h^2 d^2/dx^2 + V with V the triangle potential
/// for x < 0 and the guide threshold 1/2 for x >= 0. The jump at x = 0 is
/// handled by nodal evaluation; no node may sit exactly on it.
inline Tridiag build_bo_guide(double h, const Grid1D& g) {
  if (!(h > 0.0)) throw std::invalid_argument("build_bo_guide: h must be > 0");
  if (std::abs(g.a + M_PI * std::sqrt(2.0)) > 1e-12)
    throw std::invalid_argument("build_bo_guide: domain must start at -pi sqrt2");
  if (g.b < 5.0) throw std::invalid_argument("build_bo_guide: X_max must be >= 5");
  detail::require_no_node_at(g, 0.0, "the potential jump at x = 0");
  return assemble_sturm_liouville(
      g, [](double x) { return bo_guide_potential(x); }, nullptr, nullptr, h * h);
}

/// Effective delta-interaction operator h^2 D^2 + mu_hat_1(x) with
/// mu_hat_1 = 1 for x < 0 and the closed-form mu_1(x) for x >= 0.
inline Tridiag build_delta_effective(double h, const Grid1D& g);

/// Generic assembly entry used by the Born-Oppenheimer pipeline.
inline Tridiag build_custom(const CustomPotential& m, const Grid1D& g) {
  if (!m.V) throw std::invalid_argument("build_custom: V required");
  const auto& p = m.p ? m.p : m.weight;
  return assemble_sturm_liouville(g, m.V, p, m.weight, m.h_s);
}

// ---------------------------------------------------------------------------
// Suggested grids (truncation policy)
// ---------------------------------------------------------------------------

namespace gridpolicy {

/// de Gennes: decay-margin policy b = max(0, zeta) + 12.
inline Grid1D de_gennes(double zeta, int n = 2000) {
  Grid1D g;
  g.a = 0.0;
  g.b = std::max(0.0, zeta) + 12.0;
  g.n = n;
  g.bc_left = BC::Neumann;
  g.bc_right = BC::Dirichlet;
  return g;
}

/// Symmetric interval with V(+-L) >= nu_estimate + margin, found by growing
/// L from a coarse pre-solve.
inline Grid1D symmetric_by_margin(const std::function<double(double)>& V,
                                  double L0, double margin, int n) {
  double L = L0;
  for (int it = 0; it < 60; ++it) {
    Grid1D coarse{-L, L, 301, BC::Dirichlet, BC::Dirichlet, Layout::Vertex};
    Tridiag T = assemble_sturm_liouville(coarse, V);
    const double nu = detail::coarse_lowest(T);
    if (V(-L) >= nu + margin && V(L) >= nu + margin) {
      Grid1D g{-L, L, n, BC::Dirichlet, BC::Dirichlet, Layout::Vertex};
      return g;
    }
    L *= 1.25;
  }
  throw SolverError("symmetric_by_margin: no admissible truncation found");
}

inline Grid1D montgomery(int k, double zeta, int n = 2000, double margin = 10.0) {
  return symmetric_by_margin(
      [k, zeta](double t) { return montgomery_potential(k, zeta, t); },
      3.0 + std::pow(std::abs(zeta), 1.0 / (k + 1)), margin, n);
}

inline Grid1D harmonic(int n = 2000, double margin = 10.0) {
  return symmetric_by_margin([](double x) { return x * x; }, 4.0, margin, n);
}

/// Broken Montgomery fiber; full-line grids are cell-centered with an even
/// node count so no node sits at tau = 0.
inline Grid1D broken_fiber(double x, double xi, FiberDomain domain, int n = 2000,
                           double margin = 10.0) {
  auto V = [x, xi](double tau) { return broken_mont_potential(x, xi, tau); };
  if (domain == FiberDomain::FullLine) {
    Grid1D g = symmetric_by_margin(V, 4.0 + std::abs(x) + std::sqrt(std::abs(xi)),
                                   margin, n);
    g.layout = Layout::CellCentered;
    if (g.n % 2) ++g.n;
    return g;
  }
  double L = 4.0 + std::abs(x) + std::sqrt(std::abs(xi));
  for (int it = 0; it < 60; ++it) {
    Grid1D coarse{0.0, L, 301, BC::Neumann, BC::Dirichlet, Layout::Vertex};
    Tridiag T = assemble_sturm_liouville(coarse, V);
    const double nu = detail::coarse_lowest(T);
    if (V(L) >= nu + margin)
      return Grid1D{0.0, L, n, BC::Neumann, BC::Dirichlet, Layout::Vertex};
    L *= 1.25;
  }
  throw SolverError("broken_fiber grid: no admissible truncation found");
}

inline Grid1D laguerre(int n = 2000, double margin = 10.0) {
  // potential tau^2/32 >= l_3 + margin comfortably
  double L = std::sqrt(32.0 * (2.0 + margin));
  Grid1D g{0.0, L, n, BC::Dirichlet, BC::Dirichlet, Layout::CellCentered};
  return g;
}

inline Grid1D bo_triangle(int n = 2000) {
  return Grid1D{-M_PI * std::sqrt(2.0), 0.0, n, BC::Dirichlet, BC::Dirichlet,
                Layout::Vertex};
}

inline Grid1D bo_guide(double x_max, int n = 2000) {
  Grid1D g{-M_PI * std::sqrt(2.0), x_max, n, BC::Dirichlet, BC::Dirichlet,
           Layout::Vertex};
  // keep the kink x = 0 off the nodes
  for (int bump = 0; bump < 4; ++bump) {
    bool hit = false;
    for (int i = 0; i < g.n; ++i)
      if (std::abs(g.node(i)) < 1e-12 * g.b) hit = true;
    if (!hit) return g;
    ++g.n;
  }
  return g;
}

inline Grid1D delta_effective(double x_left, double x_max, int n = 4000) {
  Grid1D g{-x_left, x_max, n, BC::Dirichlet, BC::Dirichlet, Layout::CellCentered};
  if (g.n % 2) ++g.n;  // cell-centered, avoid node at the jump when symmetric
  for (int bump = 0; bump < 4; ++bump) {
    bool hit = false;
    for (int i = 0; i < g.n; ++i)
      if (std::abs(g.node(i)) < 1e-12 * std::max(1.0, x_max)) hit = true;
    if (!hit) return g;
    ++g.n;
  }
  return g;
}

}  // namespace gridpolicy

// ---------------------------------------------------------------------------
// Dispatch + solve helpers
// ---------------------------------------------------------------------------

/// Builds any Model1D on the given grid.
inline Tridiag build_model(const Model1D& m, const Grid1D& g);

/// k lowest eigenvalues; with `richardson` the grid-halving combination
/// (4 lambda_{dx/2} - lambda_dx)/3 removes the leading O(dx^2) error.
inline std::vector<double> model_eigenvalues(const Model1D& m, const Grid1D& g,
                                             int k, bool richardson = true,
                                             double tol = 1e-12) {
  const Tridiag T = build_model(m, g);
  const Spectrum coarse = tridiag_eigenvalues(T, k, tol);
  if (!richardson) return coarse.eigenvalues;
  const Tridiag T2 = build_model(m, g.refined());
  const Spectrum fine = tridiag_eigenvalues(T2, k, tol);
  std::vector<double> out(k);
  for (int j = 0; j < k; ++j)
    out[j] = (4.0 * fine.eigenvalues[j] - coarse.eigenvalues[j]) / 3.0;
  return out;
}

inline double model_lowest(const Model1D& m, const Grid1D& g,
                           bool richardson = true, double tol = 1e-12) {
  return model_eigenvalues(m, g, 1, richardson, tol)[0];
}

/// Weighted mass of |v|^2 in the outer fraction of the grid (truncation
/// sanity: the models have super-polynomially decaying eigenfunctions).
inline double tail_mass(const Tridiag& T, const std::vector<double>& v,
                        double fraction = 0.10, bool both_ends = true) {
  const std::size_t n = T.size();
  const std::size_t m = static_cast<std::size_t>(fraction * n);
  double s = 0.0;
  for (std::size_t i = n - m; i < n; ++i) s += T.weight(i) * v[i] * v[i] * T.cell;
  if (both_ends)
    for (std::size_t i = 0; i < m; ++i) s += T.weight(i) * v[i] * v[i] * T.cell;
  return s;
}

inline Tridiag build_model(const Model1D& m, const Grid1D& g) {
  return std::visit(
      [&g](const auto& mm) -> Tridiag {
        using T = std::decay_t<decltype(mm)>;
        if constexpr (std::is_same_v<T, DeGennes>)
          return build_de_gennes(mm.zeta, g);
        else if constexpr (std::is_same_v<T, Montgomery>)
          return build_montgomery(mm.k, mm.zeta, g);
        else if constexpr (std::is_same_v<T, BrokenMontFiber>)
          return build_broken_mont_fiber(mm.x, mm.xi, mm.domain, g);
        else if constexpr (std::is_same_v<T, Harmonic>)
          return build_harmonic(g);
        else if constexpr (std::is_same_v<T, Laguerre>)
          return build_laguerre(g);
        else if constexpr (std::is_same_v<T, BOTriangle>)
          return build_bo_triangle(mm.h, g);
        else if constexpr (std::is_same_v<T, BOGuide>)
          return build_bo_guide(mm.h, g);
        else if constexpr (std::is_same_v<T, DeltaEffective>)
          return build_delta_effective(mm.h, g);
        else
          return build_custom(mm, g);
      },
      m);
}

}  // namespace magspec

// The delta-effective builder needs the closed-form mu_1; keep the include
// cycle one-directional by defining it after specialfn.
#include "specialfn.hpp"

namespace magspec {

inline Tridiag build_delta_effective(double h, const Grid1D& g) {
  if (!(h > 0.0)) throw std::invalid_argument("build_delta_effective: h must be > 0");
  if (g.a >= 0.0 || g.b <= 0.0)
    throw std::invalid_argument("build_delta_effective: domain must straddle 0");
  detail::require_no_node_at(g, 0.0, "the mu_hat_1 jump at x = 0");
  auto mu_hat = [](double x) {
    return x < 0.0 ? 1.0 : delta_spectrum(x).mu1;
  };
  return assemble_sturm_liouville(g, mu_hat, nullptr, nullptr, h * h);
}

}  // namespace magspec
