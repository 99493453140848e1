#pragma once

// Band-function sampling and minimization for the parameter-dependent fiber
// operators, the de Gennes spectral constants, Feynman-Hellmann and virial
// identity reports, and the broken-Montgomery band surfaces.

#include <array>
#include <map>
#include <mutex>

#include "operators1d.hpp"

namespace magspec {

// ---------------------------------------------------------------------------
// Sampling and 1D minimization
// ---------------------------------------------------------------------------

struct BandSample {
  std::vector<double> parameter;
  std::vector<double> value;
  std::vector<double> residual;
  bool has_minimum = false;
  double min_parameter = 0.0;
  double min_value = 0.0;
  double bracket_width = 0.0;
  bool flat_band = false;
};

/// Brent minimization on [a, b]; returns (x*, f*) with |bracket| <= xtol.
inline std::pair<double, double> brent_minimize(
    const std::function<double(double)>& f, double a, double b, double xtol,
    int maxit = 200) {
  const double gr = 0.5 * (3.0 - std::sqrt(5.0));
  double x = a + gr * (b - a), w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  for (int it = 0; it < maxit; ++it) {
    const double m = 0.5 * (a + b);
    const double tol1 = xtol * 0.5 + 1e-15 * std::abs(x);
    if (std::abs(x - m) <= 2.0 * tol1 - 0.5 * (b - a)) break;
    double p = 0.0, q = 0.0, r = 0.0;
    bool parab = false;
    if (std::abs(e) > tol1) {
      r = (x - w) * (fx - fv);
      q = (x - v) * (fx - fw);
      p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      if (std::abs(p) < std::abs(0.5 * q * e) && p > q * (a - x) &&
          p < q * (b - x)) {
        e = d;
        d = p / q;
        parab = true;
      }
    }
    if (!parab) {
      e = (x < m ? b : a) - x;
      d = gr * e;
    }
    const double u = x + (std::abs(d) >= tol1 ? d : (d > 0 ? tol1 : -tol1));
    const double fu = f(u);
    if (fu <= fx) {
      if (u < x) b = x; else a = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return {x, fx};
}

/// Samples a band over [lo, hi] with npts >= 9 points.
inline BandSample band_sample(const std::function<double(double)>& band,
                              double lo, double hi, int npts,
                              double solver_tol = 1e-10) {
  if (npts < 9) throw std::invalid_argument("band_sample: npts must be >= 9");
  BandSample s;
  s.parameter.resize(npts);
  s.value.resize(npts);
  s.residual.assign(npts, solver_tol);
  for (int i = 0; i < npts; ++i) {
    s.parameter[i] = lo + (hi - lo) * i / (npts - 1);
    s.value[i] = band(s.parameter[i]);
  }
  return s;
}

/// Scans for an interior bracket, then refines with Brent. A band whose
/// sampled variation stays below 1e-9 relative is flagged flat and returned
/// at the midpoint without refinement.
inline BandSample band_minimize(const std::function<double(double)>& band,
                                double lo, double hi, double tol,
                                int scan_pts = 33) {
  BandSample s = band_sample(band, lo, hi, std::max(scan_pts, 9));
  const int npts = static_cast<int>(s.parameter.size());
  int ibest = 0;
  double vmax = s.value[0];
  for (int i = 0; i < npts; ++i) {
    if (s.value[i] < s.value[ibest]) ibest = i;
    vmax = std::max(vmax, s.value[i]);
  }
  if (vmax - s.value[ibest] <= 1e-9 * std::max(1.0, std::abs(vmax))) {
    s.has_minimum = true;
    s.flat_band = true;
    s.min_parameter = 0.5 * (lo + hi);
    s.min_value = band(s.min_parameter);
    s.bracket_width = hi - lo;
    return s;
  }
  if (ibest == 0 || ibest == npts - 1)
    throw SolverError("band_minimize: no interior bracket found");
  auto [xs, vs] = brent_minimize(band, s.parameter[ibest - 1],
                                 s.parameter[ibest + 1],
                                 std::max(tol, 1e-6));
  if (tol < 1e-6) {
    // Brent bottoms out at the solver noise floor sqrt(eps/nu''); polish by
    // a least-squares parabola over a symmetric stencil, which averages the
    // noise instead of chasing it.
    const double step = 5e-4 * std::max(1.0, std::abs(xs));
    constexpr int half = 3;
    double sx2 = 0, sx4 = 0, s0 = 0, sx1y = 0, sx2y = 0;
    const int npt = 2 * half + 1;
    for (int i = -half; i <= half; ++i) {
      const double dx = i * step;
      const double y = i == 0 ? vs : band(xs + dx);
      s0 += y;
      sx1y += dx * y;
      sx2y += dx * dx * y;
      sx2 += dx * dx;
      sx4 += dx * dx * dx * dx;
    }
    // fit y = a + b dx + c dx^2 (odd/even moments decouple)
    const double b_lin = sx1y / sx2;
    const double det = npt * sx4 - sx2 * sx2;
    const double c_quad = (npt * sx2y - sx2 * s0) / det;
    if (c_quad > 0.0) {
      const double shift = -0.5 * b_lin / c_quad;
      if (std::abs(shift) < half * step) {
        xs += shift;
        vs = band(xs);
      }
    }
  }
  s.has_minimum = true;
  s.min_parameter = xs;
  s.min_value = vs;
  s.bracket_width = tol;
  return s;
}

// ---------------------------------------------------------------------------
// de Gennes machinery
// ---------------------------------------------------------------------------

/// Band nu_1^{[0]}(zeta) with a truncation box fixed across the sweep
/// (b = zeta_max + 12) so the sampled band is smooth in zeta.
inline std::function<double(double)> de_gennes_band(double zeta_max,
                                                    int n = 2000,
                                                    bool richardson = true) {
  const double b = std::max(0.0, zeta_max) + 12.0;
  return [b, n, richardson](double zeta) {
    Grid1D g{0.0, b, n, BC::Neumann, BC::Dirichlet, Layout::Vertex};
    return model_lowest(DeGennes{zeta}, g, richardson);
  };
}

inline std::function<double(double)> montgomery_band(int k, double zeta_lo,
                                                     double zeta_hi,
                                                     int n = 2000,
                                                     double margin = 15.0,
                                                     bool richardson = true) {
  // worst-case symmetric box over the sweep range
  double L = 0.0;
  for (double z : {zeta_lo, zeta_hi, 0.5 * (zeta_lo + zeta_hi)}) {
    Grid1D g = gridpolicy::montgomery(k, z, n, margin);
    L = std::max(L, g.b);
  }
  return [k, L, n, richardson](double zeta) {
    Grid1D g{-L, L, n, BC::Dirichlet, BC::Dirichlet, Layout::Vertex};
    return model_lowest(Montgomery{k, zeta}, g, richardson);
  };
}

/// Spectral constants of the de Gennes operator together with consistency
/// checks among them; construction fails if an identity is violated.
struct DeGennesConstants {
  double theta0 = 0.0;   // band minimum
  double zeta0 = 0.0;    // minimizer
  double u0sq = 0.0;     // squared boundary value of the ground state
  double c1 = 0.0;       // u0sq / 3
  double nu2 = 0.0;      // second derivative of the band at zeta0

  void enforce() const {
    if (!(theta0 > 0.0 && theta0 < 1.0))
      throw InvariantViolation("de Gennes: theta0 outside (0,1)");
    if (!(zeta0 > 0.0)) throw InvariantViolation("de Gennes: zeta0 <= 0");
    if (std::abs(theta0 - zeta0 * zeta0) > 1e-5 * theta0)
      throw InvariantViolation("de Gennes: theta0 != zeta0^2");
    if (std::abs(c1 - u0sq / 3.0) > 1e-8)
      throw InvariantViolation("de Gennes: c1 != u0sq/3");
    if (std::abs(0.5 * nu2 - 3.0 * c1 * std::sqrt(theta0)) > 1e-3)
      throw InvariantViolation("de Gennes: nu''/2 != 3 c1 sqrt(theta0)");
  }
};

namespace detail {

struct DeGennesSolve {
  Tridiag T;
  double nu;
  std::vector<double> u;
  Grid1D g;
};

inline DeGennesSolve de_gennes_solve(double zeta, const Grid1D& g) {
  DeGennesSolve s;
  s.g = g;
  s.T = build_de_gennes(zeta, g);
  s.nu = tridiag_eigenvalues(s.T, 1, 1e-13).eigenvalues[0];
  s.u = tridiag_eigenvector(s.T, s.nu);
  return s;
}

inline double weighted_integral(const Tridiag& T, const Grid1D& g,
                                const std::vector<double>& u,
                                const std::function<double(double)>& f) {
  double s = 0.0;
  for (int i = 0; i < g.n; ++i)
    s += T.weight(i) * f(g.node(i)) * u[i] * u[i] * T.cell;
  return s;
}

/// Richardson combination of a scalar grid functional (O(dx^2) error).
inline double richardson_scalar(const std::function<double(const Grid1D&)>& f,
                                const Grid1D& g) {
  return (4.0 * f(g.refined()) - f(g)) / 3.0;
}

}  // namespace detail

/// Centered derivative of a band with one Richardson halving in the step.
inline double band_derivative(const std::function<double(double)>& band,
                              double z, double delta = 1e-3) {
  auto d = [&](double dl) { return (band(z + dl) - band(z - dl)) / (2.0 * dl); };
  return (4.0 * d(0.5 * delta) - d(delta)) / 3.0;
}

inline double band_second_derivative(const std::function<double(double)>& band,
                                     double z, double delta = 1e-2) {
  const double f0 = band(z);
  auto d = [&](double dl) {
    return (band(z + dl) - 2.0 * f0 + band(z - dl)) / (dl * dl);
  };
  return (4.0 * d(0.5 * delta) - d(delta)) / 3.0;
}

/// Computes (zeta0, Theta0, u(0)^2, C1, nu'') and enforces the identities.
inline DeGennesConstants degennes_constants(int n = 3000, double tol = 1e-8) {
  auto band = de_gennes_band(1.5, n);
  BandSample m = band_minimize(band, 0.2, 1.4, tol);
  DeGennesConstants c;
  c.zeta0 = m.min_parameter;
  c.theta0 = m.min_value;

  Grid1D g{0.0, 13.0, n, BC::Neumann, BC::Dirichlet, Layout::Vertex};
  c.u0sq = detail::richardson_scalar(
      [&](const Grid1D& gg) {
        auto s = detail::de_gennes_solve(c.zeta0, gg);
        return s.u[0] * s.u[0];
      },
      g);
  c.c1 = c.u0sq / 3.0;
  c.nu2 = band_second_derivative(band, c.zeta0);
  c.enforce();
  return c;
}

/// Feynman-Hellmann / virial diagnostics of the de Gennes band at zeta.
struct FHReport {
  double zeta = 0.0;
  double nu = 0.0;
  double u0sq = 0.0;
  double nu_prime_numeric = 0.0;
  double nu_prime_fh = 0.0;       // (zeta^2 - nu) u(0)^2
  double fh_residual = 0.0;
  // filled when requested (meaningful at zeta0)
  double kinetic = 0.0;           // ||u'||^2
  double potential = 0.0;         // ||(t - zeta) u||^2
  double moment = 0.0;            // int (t - zeta) u^2
  double nu2_numeric = 0.0;
  double nu2_fh = 0.0;            // 2 zeta u(0)^2
};

inline FHReport feynman_hellmann_report(double zeta, int n = 3000,
                                        bool with_virial = false) {
  FHReport r;
  r.zeta = zeta;
  const double bmax = std::max(0.0, zeta) + 13.0;
  Grid1D g{0.0, bmax, n, BC::Neumann, BC::Dirichlet, Layout::Vertex};

  auto band = [&](double z) {
    return model_lowest(DeGennes{z}, g, true);
  };
  r.nu = band(zeta);
  r.u0sq = detail::richardson_scalar(
      [&](const Grid1D& gg) {
        auto s = detail::de_gennes_solve(zeta, gg);
        return s.u[0] * s.u[0];
      },
      g);
  r.nu_prime_numeric = band_derivative(band, zeta);
  r.nu_prime_fh = (zeta * zeta - r.nu) * r.u0sq;
  r.fh_residual = std::abs(r.nu_prime_numeric - r.nu_prime_fh);
  if (with_virial) {
    r.potential = detail::richardson_scalar(
        [&](const Grid1D& gg) {
          auto s = detail::de_gennes_solve(zeta, gg);
          return detail::weighted_integral(s.T, gg, s.u, [zeta](double t) {
            return (t - zeta) * (t - zeta);
          });
        },
        g);
    r.kinetic = r.nu - r.potential;  // discrete form identity
    r.moment = detail::richardson_scalar(
        [&](const Grid1D& gg) {
          auto s = detail::de_gennes_solve(zeta, gg);
          return detail::weighted_integral(s.T, gg, s.u,
                                           [zeta](double t) { return t - zeta; });
        },
        g);
    r.nu2_numeric = band_second_derivative(band, zeta);
    r.nu2_fh = 2.0 * zeta * r.u0sq;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Broken-Montgomery band surface
// ---------------------------------------------------------------------------

struct SurfacePoint {
  double x = 0.0, xi = 0.0, value = 0.0;
};

struct SurfaceMin {
  std::vector<SurfacePoint> samples;  // row-major over the coarse grid
  double x = 0.0, xi = 0.0, value = 0.0;
  bool on_boundary = false;
  std::array<double, 3> hessian{0.0, 0.0, 0.0};  // (xx, xixi, xxi) estimate
};

/// Lowest fiber eigenvalue of the broken Montgomery model at (x, xi).
inline double broken_band_value(FiberDomain domain, double x, double xi,
                                int n = 1200, double margin = 12.0,
                                bool richardson = true) {
  Grid1D g = gridpolicy::broken_fiber(x, xi, domain, n, margin);
  return model_lowest(BrokenMontFiber{x, xi, domain}, g, richardson);
}

namespace detail {

// Nelder-Mead in 2D.
inline std::array<double, 3> nelder_mead2(
    const std::function<double(double, double)>& f, double x0, double y0,
    double step, double tol, int maxit = 300) {
  struct P {
    double x, y, v;
  };
  std::array<P, 3> s{P{x0, y0, f(x0, y0)}, P{x0 + step, y0, f(x0 + step, y0)},
                     P{x0, y0 + step, f(x0, y0 + step)}};
  auto order = [&] {
    std::sort(s.begin(), s.end(), [](const P& a, const P& b) { return a.v < b.v; });
  };
  order();
  for (int it = 0; it < maxit; ++it) {
    const double size = std::max(
        std::hypot(s[1].x - s[0].x, s[1].y - s[0].y),
        std::hypot(s[2].x - s[0].x, s[2].y - s[0].y));
    if (size < tol) break;
    const double cx = 0.5 * (s[0].x + s[1].x), cy = 0.5 * (s[0].y + s[1].y);
    P refl{cx + (cx - s[2].x), cy + (cy - s[2].y), 0.0};
    refl.v = f(refl.x, refl.y);
    if (refl.v < s[0].v) {
      P exp_{cx + 2.0 * (cx - s[2].x), cy + 2.0 * (cy - s[2].y), 0.0};
      exp_.v = f(exp_.x, exp_.y);
      s[2] = exp_.v < refl.v ? exp_ : refl;
    } else if (refl.v < s[1].v) {
      s[2] = refl;
    } else {
      P con{cx + 0.5 * (s[2].x - cx), cy + 0.5 * (s[2].y - cy), 0.0};
      con.v = f(con.x, con.y);
      if (con.v < s[2].v) {
        s[2] = con;
      } else {
        for (int i = 1; i < 3; ++i) {
          s[i].x = 0.5 * (s[i].x + s[0].x);
          s[i].y = 0.5 * (s[i].y + s[0].y);
          s[i].v = f(s[i].x, s[i].y);
        }
      }
    }
    order();
  }
  return {s[0].x, s[0].y, s[0].v};
}

}  // namespace detail

/// Coarse scan of mu_1 over [x0,x1] x [xi0,xi1] followed by Nelder-Mead
/// refinement from the best cell. A minimum landing on the region boundary
/// is flagged. The Hessian estimate is reported for diagnostics only; no
/// uniqueness claim is made.
inline SurfaceMin band_surface_min(FiberDomain domain, double x0, double x1,
                                   double xi0, double xi1, int nx, int nxi,
                                   double tol = 1e-5, int fiber_n = 1000) {
  if (nx < 9 || nxi < 9)
    throw std::invalid_argument("band_surface_min: coarse grid must be >= 9x9");
  SurfaceMin out;
  auto f = [&](double x, double xi) {
    return broken_band_value(domain, x, xi, fiber_n, 12.0, false);
  };
  int best = -1;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nxi; ++j) {
      SurfacePoint p;
      p.x = x0 + (x1 - x0) * i / (nx - 1);
      p.xi = xi0 + (xi1 - xi0) * j / (nxi - 1);
      p.value = f(p.x, p.xi);
      out.samples.push_back(p);
      if (best < 0 || p.value < out.samples[best].value)
        best = static_cast<int>(out.samples.size()) - 1;
    }
  const SurfacePoint& b = out.samples[best];
  auto fr = [&](double x, double xi) {
    return broken_band_value(domain, x, xi, fiber_n, 12.0, true);
  };
  const double step = 0.5 * std::max((x1 - x0) / (nx - 1), (xi1 - xi0) / (nxi - 1));
  auto r = detail::nelder_mead2(fr, b.x, b.xi, step, tol);
  out.x = r[0];
  out.xi = r[1];
  out.value = r[2];
  const double ex = 1e-3 * std::max(1.0, x1 - x0);
  out.on_boundary = out.x < x0 + ex || out.x > x1 - ex || out.xi < xi0 + ex ||
                    out.xi > xi1 - ex;
  const double hs = 1e-2;
  out.hessian[0] =
      (fr(out.x + hs, out.xi) - 2.0 * r[2] + fr(out.x - hs, out.xi)) / (hs * hs);
  out.hessian[1] =
      (fr(out.x, out.xi + hs) - 2.0 * r[2] + fr(out.x, out.xi - hs)) / (hs * hs);
  out.hessian[2] = (fr(out.x + hs, out.xi + hs) - fr(out.x + hs, out.xi - hs) -
                    fr(out.x - hs, out.xi + hs) + fr(out.x - hs, out.xi - hs)) /
                   (4.0 * hs * hs);
  return out;
}

// ---------------------------------------------------------------------------
// Scaled bands (cached)
// ---------------------------------------------------------------------------

namespace detail {

// Shape-preserving cubic interpolation (Fritsch-Carlson derivative rule).
struct Pchip {
  std::vector<double> x, y, d;

  Pchip() = default;
  Pchip(std::vector<double> xs, std::vector<double> ys)
      : x(std::move(xs)), y(std::move(ys)) {
    const std::size_t n = x.size();
    d.assign(n, 0.0);
    std::vector<double> h(n - 1), s(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      h[i] = x[i + 1] - x[i];
      s[i] = (y[i + 1] - y[i]) / h[i];
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (s[i - 1] * s[i] <= 0.0) {
        d[i] = 0.0;
      } else {
        const double w1 = 2.0 * h[i] + h[i - 1], w2 = h[i] + 2.0 * h[i - 1];
        d[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
      }
    }
    d[0] = s[0];
    d[n - 1] = s[n - 2];
  }

  double operator()(double t) const {
    if (t < x.front() || t > x.back())
      throw std::out_of_range("Pchip: argument outside sampled range");
    std::size_t i =
        std::upper_bound(x.begin(), x.end(), t) - x.begin();
    i = std::min(std::max<std::size_t>(i, 1), x.size() - 1) - 1;
    const double h = x[i + 1] - x[i];
    const double u = (t - x[i]) / h;
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    return h00 * y[i] + h10 * h * d[i] + h01 * y[i + 1] + h11 * h * d[i + 1];
  }
};

}  // namespace detail

/// Cached Montgomery band nu_1^{[k]} used to evaluate the scaled band
/// surfaces mu_1^{[k]}(x, xi) = gamma(x)^{2/(k+2)} nu(gamma(x)^{-1/(k+2)} xi)
/// without new fiber solves. `exact` evaluations bypass the interpolant
/// (used where second differences need C^2 smoothness).
class MontgomeryBandCache {
 public:
  MontgomeryBandCache(int k, double zeta_lo, double zeta_hi, int npts = 201,
                      int grid_n = 2000)
      : k_(k), band_(montgomery_band(k, zeta_lo, zeta_hi, grid_n)) {
    std::vector<double> z(npts), v(npts);
    for (int i = 0; i < npts; ++i) {
      z[i] = zeta_lo + (zeta_hi - zeta_lo) * i / (npts - 1);
      v[i] = band_(z[i]);
    }
    spline_ = detail::Pchip(std::move(z), std::move(v));
  }

  int order() const { return k_; }

  double nu(double zeta) const { return spline_(zeta); }

  double nu_exact(double zeta) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = memo_.find(zeta);
    if (it != memo_.end()) return it->second;
    const double v = band_(zeta);
    memo_.emplace(zeta, v);
    return v;
  }

  /// mu(x, xi) through the scaling identity; no 2D solve involved.
  double scaled(const std::function<double(double)>& gamma, double x, double xi,
                bool exact = false) const {
    const double g = gamma(x);
    if (!(g > 0.0)) throw std::invalid_argument("scaled_band: gamma(x) <= 0");
    const double pow1 = std::pow(g, 2.0 / (k_ + 2.0));
    const double zeta = xi * std::pow(g, -1.0 / (k_ + 2.0));
    return pow1 * (exact ? nu_exact(zeta) : nu(zeta));
  }

 private:
  int k_;
  std::function<double(double)> band_;
  detail::Pchip spline_;
  mutable std::mutex mu_;
  mutable std::map<double, double> memo_;
};

}  // namespace magspec
