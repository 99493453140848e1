#pragma once

// Lambert W branches, Airy function with its negative-axis zeros, and the
// closed-form spectrum of the double delta-well together with its secular
// oracle.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace magspec {

// ---------------------------------------------------------------------------
// Lambert W
// ---------------------------------------------------------------------------

namespace detail {

inline double lambert_halley(double y, double w) {
  // Halley iteration on f(w) = w e^w - y.
  for (int it = 0; it < 60; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - y;
    if (std::abs(f) <= 1e-15 * std::max(1.0, std::abs(y))) return w;
    const double fp = ew * (w + 1.0);
    const double denom = fp - f * (w + 2.0) / (2.0 * (w + 1.0));
    const double step = f / denom;
    w -= step;
    if (std::abs(step) <= 1e-17 * (1.0 + std::abs(w))) return w;
  }
  return w;
}

}  // namespace detail

/// Principal branch W0 on [-1/e, +inf). |W e^W - y| <= 1e-14 max(1,|y|).
inline double lambert_w0(double y) {
  const double inv_e = std::exp(-1.0);
  if (y < -inv_e - 1e-12)
    throw std::invalid_argument("lambert_w0: argument below -1/e");
  if (y < -inv_e) y = -inv_e;
  if (y == 0.0) return 0.0;

  double w;
  if (y < -inv_e + 0.05) {
    // branch-point series in p = sqrt(2(e y + 1))
    const double p = std::sqrt(2.0 * (std::exp(1.0) * y + 1.0));
    w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  } else if (y < 2.0) {
    w = y * (1.0 - y + 1.5 * y * y) / (1.0 + 0.5 * y);
    if (w <= -1.0) w = -0.9;
  } else {
    const double l1 = std::log(y), l2 = std::log(std::log(y));
    w = l1 - l2 + l2 / l1;
  }
  return detail::lambert_halley(y, w);
}

/// Lower branch W-1 on [-1/e, 0).
inline double lambert_wm1(double y) {
  const double inv_e = std::exp(-1.0);
  if (y < -inv_e - 1e-12 || y >= 0.0)
    throw std::invalid_argument("lambert_wm1: argument outside [-1/e, 0)");
  if (y < -inv_e) y = -inv_e;

  double w;
  if (y < -inv_e + 0.05) {
    const double p = std::sqrt(2.0 * (std::exp(1.0) * y + 1.0));
    w = -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p * p * p;
  } else {
    const double l1 = std::log(-y), l2 = std::log(-std::log(-y));
    w = l1 - l2 + l2 / l1;
  }
  return detail::lambert_halley(y, w);
}

// ---------------------------------------------------------------------------
// Airy function
// ---------------------------------------------------------------------------

namespace detail {

struct AiryPair {
  double ai;
  double aip;
};

// Maclaurin series of the two ODE solutions of y'' = x y and their
// derivatives, combined with Ai(0), Ai'(0). Accurate for |x| <= ~7.
inline AiryPair airy_series(double x) {
  const long double ai0 = 0.35502805388781723926L;   // 3^{-2/3}/Gamma(2/3)
  const long double aip0 = -0.25881940379280679841L; // -3^{-1/3}/Gamma(1/3)
  if (x == 0.0) return {static_cast<double>(ai0), static_cast<double>(aip0)};
  const long double x3 = static_cast<long double>(x) * x * x;

  // f: c0 = 1 branch, g: c1 = 1 branch.
  long double f = 1.0L, fp = 0.0L;
  long double tf = 1.0L;
  long double g = x, gp = 1.0L;
  long double tg = x;
  for (int k = 0; k < 80; ++k) {
    tf *= x3 / ((3.0L * k + 2.0L) * (3.0L * k + 3.0L));
    f += tf;
    fp += tf * (3.0L * (k + 1)) / x;
    tg *= x3 / ((3.0L * k + 3.0L) * (3.0L * k + 4.0L));
    g += tg;
    gp += tg * (3.0L * (k + 1) + 1.0L) / x;
    if (std::abs(static_cast<double>(tf)) < 1e-20 &&
        std::abs(static_cast<double>(tg)) < 1e-20)
      break;
  }
  AiryPair out;
  out.ai = static_cast<double>(ai0 * f + aip0 * g);
  out.aip = static_cast<double>(ai0 * fp + aip0 * gp);
  return out;
}

// Poincare coefficients u_k (for Ai) and v_k (for Ai').
inline const double* airy_u() {
  static double u[24];
  static bool init = false;
  if (!init) {
    u[0] = 1.0;
    for (int k = 0; k < 23; ++k)
      u[k + 1] = u[k] * (6.0 * k + 1.0) * (6.0 * k + 5.0) / (72.0 * (k + 1));
    init = true;
  }
  return u;
}

inline const double* airy_v() {
  static double v[24];
  static bool init = false;
  if (!init) {
    const double* u = airy_u();
    v[0] = 1.0;
    for (int k = 1; k < 24; ++k) v[k] = -u[k] * (6.0 * k + 1.0) / (6.0 * k - 1.0);
    init = true;
  }
  return v;
}

// Asymptotic expansion on the negative axis, x = -z, z > ~6.
inline AiryPair airy_asymptotic_neg(double z) {
  const double* u = airy_u();
  const double* v = airy_v();
  const double zeta = 2.0 / 3.0 * std::pow(z, 1.5);
  // Even/odd sums truncated at the smallest term.
  double pe = 0.0, po = 0.0, qe = 0.0, qo = 0.0;
  double pw = 1.0;  // zeta^{-k}
  double prev = std::numeric_limits<double>::max();
  for (int k = 0; k < 22; ++k) {
    const double tu = u[k] * pw, tv = v[k] * pw;
    if (std::abs(tu) > prev) break;
    prev = std::abs(tu);
    const double sgn = (k / 2) % 2 == 0 ? 1.0 : -1.0;  // (-1)^{floor(k/2)}
    if (k % 2 == 0) {
      pe += sgn * tu;
      qe += sgn * tv;
    } else {
      po += sgn * tu;
      qo += sgn * tv;
    }
    pw /= zeta;
  }
  const double s = std::sin(zeta + M_PI / 4.0), c = std::cos(zeta + M_PI / 4.0);
  const double rpi = 1.0 / std::sqrt(M_PI);
  AiryPair out;
  out.ai = rpi * std::pow(z, -0.25) * (s * pe - c * po);
  // d/dx Ai at x = -z
  out.aip = -rpi * std::pow(z, 0.25) * (c * qe + s * qo);
  return out;
}

inline AiryPair airy_asymptotic_pos(double x) {
  const double* u = airy_u();
  const double zeta = 2.0 / 3.0 * std::pow(x, 1.5);
  double sa = 0.0, sap = 0.0;
  double pw = 1.0;
  double prev = std::numeric_limits<double>::max();
  const double* v = airy_v();
  for (int k = 0; k < 22; ++k) {
    const double tu = u[k] * pw;
    if (std::abs(tu) > prev) break;
    prev = std::abs(tu);
    const double sgn = k % 2 == 0 ? 1.0 : -1.0;
    sa += sgn * tu;
    sap += sgn * v[k] * pw;  // v-series carries (+1)^k with zeta sign folded
    pw /= zeta;
  }
  const double e = std::exp(-zeta);
  AiryPair out;
  out.ai = 0.5 / std::sqrt(M_PI) * std::pow(x, -0.25) * e * sa;
  out.aip = -0.5 / std::sqrt(M_PI) * std::pow(x, 0.25) * e * sap;
  return out;
}

inline AiryPair airy_both(double x) {
  if (std::abs(x) <= 6.0) return airy_series(x);
  if (x > 0.0) return airy_asymptotic_pos(x);
  return airy_asymptotic_neg(-x);
}

}  // namespace detail

/// Ai(x); series for |x| <= 6, Poincare asymptotics beyond.
inline double airy_ai(double x) { return detail::airy_both(x).ai; }

/// Ai'(x).
inline double airy_ai_prime(double x) { return detail::airy_both(x).aip; }

/// n-th positive zero of Ai(-x) (n >= 1). Newton from the asymptotic seed
/// (3 pi (4n-1)/8)^{2/3}.
inline double airy_zero(int n) {
  if (n < 1) throw std::invalid_argument("airy_zero: n must be >= 1");
  double z = std::pow(3.0 * M_PI * (4.0 * n - 1.0) / 8.0, 2.0 / 3.0);
  double last = std::numeric_limits<double>::max();
  for (int it = 0; it < 50; ++it) {
    const detail::AiryPair p = detail::airy_both(-z);
    if (std::abs(p.ai) <= 1e-12 && std::abs(z - last) <= 1e-11 * z) return z;
    const double step = p.ai / p.aip;  // f = Ai(-z), f' = -Ai'(-z)
    last = z;
    z += step;
    if (!(z > 0.0)) throw std::runtime_error("airy_zero: Newton left (0,inf)");
  }
  if (std::abs(detail::airy_both(-z).ai) <= 1e-12) return z;
  throw std::runtime_error("airy_zero: Newton stagnation at n=" +
                           std::to_string(n));
}

// ---------------------------------------------------------------------------
// Double delta-well spectrum
// ---------------------------------------------------------------------------

/// Two lowest eigenvalues of the double delta-well with half-separation x.
/// mu2 is 0 for x <= 1 where the odd state does not exist.
struct DeltaPair {
  double x;
  double mu1;
  double mu2;
};

/// Closed forms via Lambert W. The x -> 0 limit is handled analytically
/// (W(x e^{-x})/x -> 1, so mu1(0) = -1).
inline DeltaPair delta_spectrum(double x) {
  if (x < 0.0) throw std::invalid_argument("delta_spectrum: x must be >= 0");
  DeltaPair out{x, -1.0, 0.0};
  if (x > 1e-8) {
    const double k1 = 0.5 + lambert_w0(x * std::exp(-x)) / (2.0 * x);
    out.mu1 = -k1 * k1;
  } else {
    const double k1 = 1.0 - x;  // W(x e^{-x})/(2x) = 1/2 - x + O(x^2)
    out.mu1 = -k1 * k1;
  }
  if (x > 1.0) {
    const double k2 = 0.5 + lambert_w0(-x * std::exp(-x)) / (2.0 * x);
    out.mu2 = -k2 * k2;
  }
  return out;
}

/// Independent oracle: bisection on the secular equations
///   even: 2k - 1 =  e^{-2kx}     (k in (1/2, 1])
///   odd:  2k - 1 = -e^{-2kx}     (k in (0, 1/2), only for x > 1)
/// obtained from the one-sided derivative jump psi'(c+) - psi'(c-) = -psi(c)
/// at each well c = +-x; returns mu = -k^2.
inline DeltaPair delta_oracle(double x) {
  if (x < 0.0) throw std::invalid_argument("delta_oracle: x must be >= 0");
  auto bisect = [x](double lo, double hi, auto&& f) {
    double flo = f(lo);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = f(mid);
      if ((fm < 0.0) == (flo < 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
      if (hi - lo <= 1e-13) break;
    }
    return 0.5 * (lo + hi);
  };
  DeltaPair out{x, 0.0, 0.0};
  const double ke =
      bisect(0.5, 1.0 + 1e-14, [x](double k) { return 2.0 * k - 1.0 - std::exp(-2.0 * k * x); });
  out.mu1 = -ke * ke;
  if (x > 1.0) {
    const double ko =
        bisect(1e-9, 0.5, [x](double k) { return 2.0 * k - 1.0 + std::exp(-2.0 * k * x); });
    out.mu2 = -ko * ko;
  }
  return out;
}

}  // namespace magspec
