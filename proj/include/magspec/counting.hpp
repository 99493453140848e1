#pragma once

// Exact eigenvalue counting for discretized 1D operators, the semiclassical
// Weyl estimate with turning-point-aware quadrature, Dirichlet-Neumann
// bracketing, and the delta-interaction counting integral.

#include "operators1d.hpp"
#include "specialfn.hpp"

namespace magspec {

/// Number of eigenvalues <= E (ties broken toward inclusion by nudging E
/// up by 1e-12 |E|).
inline int count_below(const Tridiag& T, double E) {
  return sturm_count(T, E + 1e-12 * std::abs(E));
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

namespace detail {

inline double adaptive_simpson_rec(const std::function<double(double)>& f,
                                   double a, double b, double fa, double fm,
                                   double fb, double whole, double tol,
                                   int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

/// Adaptive Simpson over uniform initial panels (so narrow supports and
/// interior turning points are never missed); integrable sqrt singularities
/// are handled by depth-limited bisection refinement.
inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double tol, int depth = 52,
                               int panels = 64) {
  if (!(b > a)) return 0.0;
  double total = 0.0;
  const double w = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double pa = a + p * w, pb = pa + w;
    const double m = 0.5 * (pa + pb);
    const double fa = f(pa), fm = f(m), fb = f(pb);
    const double whole = (pb - pa) / 6.0 * (fa + 4.0 * fm + fb);
    total += adaptive_simpson_rec(f, pa, pb, fa, fm, fb, whole, tol / panels,
                                  depth);
  }
  return total;
}

}  // namespace detail

/// Semiclassical phase-space estimate (1/(pi h)) int sqrt((E0 - V)_+) dx
/// over the caller-supplied bounding interval [a, b] of {V <= E0}.
inline double weyl_estimate(const std::function<double(double)>& V, double E0,
                            double h, double quad_tol, double a, double b) {
  if (V(a) < E0 - quad_tol || V(b) < E0 - quad_tol)
    throw std::invalid_argument(
        "weyl_estimate: unbounded sublevel set (V < E0 at interval ends)");
  auto integrand = [&](double x) {
    const double r = E0 - V(x);
    return r > 0.0 ? std::sqrt(r) : 0.0;
  };
  const double integral = detail::adaptive_simpson(integrand, a, b, quad_tol);
  return integral / (M_PI * h);
}

/// Counting integral int_0^inf sqrt((-1/4 - C0 + k(x)^2)_+) dx of the
/// delta-interaction model, k(x) = 1/2 + W(x e^{-x})/(2x). The integrand has
/// compact support for C0 > 0 (clipped at the radicand zero) and decays like
/// e^{-x/2} for C0 = 0.
inline double delta_counting_integral(double c0, double quad_tol = 1e-12) {
  if (!(c0 >= 0.0 && c0 < 0.75))
    throw std::invalid_argument("delta_counting_integral: need 0 <= C0 < 3/4");
  auto radicand = [c0](double x) {
    const double mu1 = delta_spectrum(x).mu1;  // = -k^2
    return -0.25 - c0 - mu1;
  };
  // upper endpoint: radicand decreasing from 3/4 - C0 toward -C0
  double hi = 1.0;
  while (radicand(hi) > 0.0 && hi < 1e4) hi *= 2.0;
  double xmax = hi;
  if (c0 > 0.0) {
    double lo = 0.5 * hi;
    while (radicand(lo) <= 0.0) {
      hi = lo;
      lo *= 0.5;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (radicand(mid) > 0.0 ? lo : hi) = mid;
    }
    xmax = lo;
  } else {
    // e^{-x}/2 tail; truncation error below 1e-10 absolute
    xmax = 50.0;
  }
  auto integrand = [&](double x) {
    const double r = radicand(x);
    return r > 0.0 ? std::sqrt(r) : 0.0;
  };
  return detail::adaptive_simpson(integrand, 0.0, xmax, quad_tol);
}

// ---------------------------------------------------------------------------
// Dirichlet-Neumann bracketing
// ---------------------------------------------------------------------------

struct BracketedCounts {
  int lower = 0;
  int exact = 0;
  int upper = 0;
};

namespace detail {

inline int cell_count(const std::function<double(double)>& V, double h,
                      double E, double a, double b, BC bc, int n) {
  Grid1D g{a, b, n, bc, bc, Layout::Vertex};
  CustomPotential cp;
  cp.V = V;
  cp.h_s = h * h;
  return count_below(build_custom(cp, g), E);
}

}  // namespace detail

/// Counts of h^2 D^2 + V below E: exact on [cuts.front(), cuts.back()]
/// (Dirichlet), bracketed by the Dirichlet (lower) and Neumann (upper)
/// subdivision sums over the partition cells.
inline BracketedCounts bracketing_counts(const std::function<double(double)>& V,
                                         double h, double E,
                                         const std::vector<double>& cuts,
                                         int n_per_unit = 4000) {
  if (cuts.size() < 2)
    throw std::invalid_argument("bracketing_counts: partition needs >= 2 points");
  for (std::size_t i = 1; i < cuts.size(); ++i)
    if (!(cuts[i] > cuts[i - 1]))
      throw std::invalid_argument("bracketing_counts: cuts must increase");

  auto cell_n = [&](double a, double b) {
    return std::max(128, static_cast<int>((b - a) * n_per_unit));
  };
  BracketedCounts out;
  out.exact = detail::cell_count(V, h, E, cuts.front(), cuts.back(), BC::Dirichlet,
                                 cell_n(cuts.front(), cuts.back()));
  for (std::size_t i = 1; i < cuts.size(); ++i) {
    out.lower += detail::cell_count(V, h, E, cuts[i - 1], cuts[i], BC::Dirichlet,
                                    cell_n(cuts[i - 1], cuts[i]));
    out.upper += detail::cell_count(V, h, E, cuts[i - 1], cuts[i], BC::Neumann,
                                    cell_n(cuts[i - 1], cuts[i]));
  }
  return out;
}

}  // namespace magspec
