#pragma once

// Eigenvalue engines: exact-count bisection for symmetric tridiagonal
// operators (optionally weighted), inverse iteration, dense Householder+QL,
// thick-restart Lanczos with full reorthogonalization, and a Chebyshev
// filtered subspace iteration for matrix-free operators whose spectral
// width makes plain Lanczos impractical. Complex Hermitian operators are
// handled through a real 2n embedding.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace magspec {

/// Thrown when an iterative solve fails to converge (CLI exit code 3).
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown by self-check paths when a structural invariant fails (exit 4).
class InvariantViolation : public std::runtime_error {
 public:
  explicit InvariantViolation(const std::string& what)
      : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Symmetric tridiagonal operator, self-adjoint in the (optionally weighted)
/// inner product <u,v> = sum_i w_i u_i v_i * cell.
///
/// Storage convention: `diag` holds the operator diagonal (form diagonal
/// divided by the weight), `offdiag` holds the symmetric form off-diagonal.
/// The similarity d_i -> d_i, e_i -> e_i / sqrt(w_i w_{i+1}) reduces the
/// weighted problem to a standard symmetric tridiagonal one.
struct Tridiag {
  std::vector<double> diag;
  std::vector<double> offdiag;
  std::vector<double> weights;  // empty means all ones
  double cell = 1.0;            // measure of one grid cell (for normalization)

  std::size_t size() const { return diag.size(); }
  bool weighted() const { return !weights.empty(); }

  double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }

  /// Off-diagonal of the reduced (unit-weight) matrix.
  double reduced_off(std::size_t i) const {
    if (weights.empty()) return offdiag[i];
    return offdiag[i] / std::sqrt(weights[i] * weights[i + 1]);
  }

  void validate() const {
    const std::size_t n = size();
    if (n < 2) throw std::invalid_argument("Tridiag: n must be >= 2");
    if (offdiag.size() != n - 1)
      throw std::invalid_argument("Tridiag: offdiag must have length n-1");
    if (!weights.empty() && weights.size() != n)
      throw std::invalid_argument("Tridiag: weights must have length n");
    for (double w : weights)
      if (!(w > 0.0)) throw std::invalid_argument("Tridiag: weights must be > 0");
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isfinite(diag[i]) || (i + 1 < n && !std::isfinite(reduced_off(i))))
        throw std::invalid_argument("Tridiag: non-finite entry");
    if (!(cell > 0.0)) throw std::invalid_argument("Tridiag: cell must be > 0");
  }
};

struct SolverMeta {
  std::string solver;
  std::string grid;
  std::string box;
};

/// Sorted eigenvalues with aligned residual norms and optional eigenvectors
/// (weighted-unit-norm). `multiplicity` is filled by dedup_spectrum.
struct Spectrum {
  std::vector<double> eigenvalues;
  std::vector<double> residuals;
  std::vector<int> multiplicity;
  std::vector<std::vector<double>> vectors;
  SolverMeta meta;
  bool converged = true;
};

/// Merges eigenvalues equal up to `reltol` relative tolerance, accumulating
/// multiplicities. Residuals of merged entries take the maximum.
inline Spectrum dedup_spectrum(const Spectrum& s, double reltol = 1e-8) {
  Spectrum out;
  out.meta = s.meta;
  out.converged = s.converged;
  const double scale = [&] {
    double m = 1.0;
    for (double v : s.eigenvalues) m = std::max(m, std::abs(v));
    return m;
  }();
  for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) {
    const double mult_in = s.multiplicity.empty() ? 1 : s.multiplicity[i];
    if (!out.eigenvalues.empty() &&
        std::abs(s.eigenvalues[i] - out.eigenvalues.back()) <= reltol * scale) {
      out.multiplicity.back() += static_cast<int>(mult_in);
      out.residuals.back() = std::max(out.residuals.back(),
                                      i < s.residuals.size() ? s.residuals[i] : 0.0);
    } else {
      out.eigenvalues.push_back(s.eigenvalues[i]);
      out.residuals.push_back(i < s.residuals.size() ? s.residuals[i] : 0.0);
      out.multiplicity.push_back(static_cast<int>(mult_in));
      if (i < s.vectors.size()) out.vectors.push_back(s.vectors[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sturm counting and bisection
// ---------------------------------------------------------------------------

namespace detail {

// Number of negative pivots of the LDL^T factorization of B - E, where B is
// the weight-reduced symmetric tridiagonal matrix. Returns -1 on an exactly
// singular pivot.
inline int pivot_count(const Tridiag& T, double E) {
  const std::size_t n = T.size();
  int cnt = 0;
  double q = T.diag[0] - E;
  if (q == 0.0 || !std::isfinite(q)) return -1;
  if (q < 0.0) ++cnt;
  for (std::size_t i = 1; i < n; ++i) {
    const double c = T.reduced_off(i - 1);
    q = (T.diag[i] - E) - c * c / q;
    if (q == 0.0 || !std::isfinite(q)) return -1;
    if (q < 0.0) ++cnt;
  }
  return cnt;
}

inline void gershgorin(const Tridiag& T, double& lo, double& hi) {
  const std::size_t n = T.size();
  lo = std::numeric_limits<double>::max();
  hi = std::numeric_limits<double>::lowest();
  for (std::size_t i = 0; i < n; ++i) {
    const double r = (i > 0 ? std::abs(T.reduced_off(i - 1)) : 0.0) +
                     (i + 1 < n ? std::abs(T.reduced_off(i)) : 0.0);
    lo = std::min(lo, T.diag[i] - r);
    hi = std::max(hi, T.diag[i] + r);
  }
}

inline double reduced_inf_norm(const Tridiag& T) {
  double m = 0.0;
  const std::size_t n = T.size();
  for (std::size_t i = 0; i < n; ++i) {
    double r = std::abs(T.diag[i]);
    if (i > 0) r += std::abs(T.reduced_off(i - 1));
    if (i + 1 < n) r += std::abs(T.reduced_off(i));
    m = std::max(m, r);
  }
  return m;
}

}  // namespace detail

/// Exact number of eigenvalues of T strictly below E (Sturm count via LDL^T
/// pivots). A pivot that lands exactly on zero perturbs E by n ulps and
/// retries, at most 3 times.
inline int sturm_count(const Tridiag& T, double E) {
  T.validate();
  const double scale = std::max(std::abs(E), detail::reduced_inf_norm(T));
  double shift = E;
  for (int attempt = 0; attempt < 4; ++attempt) {
    const int c = detail::pivot_count(T, shift);
    if (c >= 0) return c;
    shift += static_cast<double>(T.size()) *
             std::numeric_limits<double>::epsilon() * std::max(scale, 1.0);
  }
  throw SolverError("sturm_count: shift hits eigenvalue");
}

/// k smallest eigenvalues, each bracketed by bisection to width <= tol.
/// Residuals report the bracket half-widths.
inline Spectrum tridiag_eigenvalues(const Tridiag& T, int k, double tol) {
  T.validate();
  const int n = static_cast<int>(T.size());
  if (k < 1 || k > n) throw std::invalid_argument("tridiag_eigenvalues: bad k");
  if (!(tol > 0.0)) throw std::invalid_argument("tridiag_eigenvalues: bad tol");

  double lo, hi;
  detail::gershgorin(T, lo, hi);
  hi += tol;
  lo -= tol;

  Spectrum out;
  out.meta.solver = "tridiag_bisection";
  double a_prev = lo;
  for (int j = 1; j <= k; ++j) {
    double a = a_prev;  // count(a) < j
    double b = hi;      // count(b) >= j
    while (b - a > tol) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;  // bracket at rounding resolution
      if (sturm_count(T, mid) >= j)
        b = mid;
      else
        a = mid;
    }
    out.eigenvalues.push_back(0.5 * (a + b));
    out.residuals.push_back(0.5 * (b - a));
    a_prev = a;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inverse iteration
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& st) {
  st += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = st;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform in (-1, 1), reproducible across platforms.
inline double runif(std::uint64_t& st) {
  return 2.0 * (static_cast<double>(splitmix64(st) >> 11) * 0x1.0p-53) - 1.0;
}

// Tridiagonal LU with partial pivoting for (B - lambda), B reduced from T.
struct TridiagLU {
  std::vector<double> d, u1, u2, l;
  std::vector<int> piv;

  TridiagLU(const Tridiag& T, double lambda) {
    const std::size_t n = T.size();
    d.resize(n);
    u1.assign(n, 0.0);
    u2.assign(n, 0.0);
    l.assign(n, 0.0);
    piv.assign(n, 0);
    std::vector<double> sub(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) d[i] = T.diag[i] - lambda;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      u1[i] = T.reduced_off(i);
      sub[i + 1] = T.reduced_off(i);
    }
    const double tiny = 1e-150;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (std::abs(sub[i + 1]) > std::abs(d[i])) {
        piv[i] = 1;
        std::swap(d[i], sub[i + 1]);
        std::swap(u1[i], d[i + 1]);
        if (i + 2 < n) {
          u2[i] = u1[i + 1];
          u1[i + 1] = 0.0;
        }
      }
      double denom = d[i];
      if (denom == 0.0) denom = tiny;
      const double m = sub[i + 1] / denom;
      l[i] = m;
      d[i + 1] -= m * u1[i];
      if (i + 2 < n) u1[i + 1] -= m * u2[i];
    }
    if (d[n - 1] == 0.0) d[n - 1] = tiny;
    for (std::size_t i = 0; i < n; ++i)
      if (d[i] == 0.0) d[i] = tiny;
  }

  void solve(std::vector<double>& x) const {
    const std::size_t n = d.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (piv[i]) std::swap(x[i], x[i + 1]);
      x[i + 1] -= l[i] * x[i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double v = x[ii];
      if (ii + 1 < n) v -= u1[ii] * x[ii + 1];
      if (ii + 2 < n) v -= u2[ii] * x[ii + 2];
      x[ii] = v / d[ii];
    }
  }
};

inline double nrm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void tridiag_apply_reduced(const Tridiag& T, const std::vector<double>& y,
                                  std::vector<double>& out) {
  const std::size_t n = T.size();
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = T.diag[i] * y[i];
    if (i > 0) v += T.reduced_off(i - 1) * y[i - 1];
    if (i + 1 < n) v += T.reduced_off(i) * y[i + 1];
    out[i] = v;
  }
}

}  // namespace detail

/// Eigenvector by inverse iteration at a converged eigenvalue lambda.
/// The result is weighted-unit-norm (sum_i w_i v_i^2 * cell = 1) and
/// sign-fixed so that the entry of largest magnitude is positive.
/// `previous` (same normalization) is deflated for clustered eigenvalues.
inline std::vector<double> tridiag_eigenvector(
    const Tridiag& T, double lambda,
    const std::vector<std::vector<double>>& previous = {}) {
  T.validate();
  const std::size_t n = T.size();
  const double norm_b = detail::reduced_inf_norm(T);

  // Previous vectors mapped to reduced coordinates y_i = v_i sqrt(w_i cell).
  std::vector<std::vector<double>> prev_y;
  for (const auto& v : previous) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
      y[i] = v[i] * std::sqrt(T.weight(i) * T.cell);
    const double nn = detail::nrm2(y);
    if (nn > 0) {
      for (double& t : y) t /= nn;
      prev_y.push_back(std::move(y));
    }
  }

  detail::TridiagLU lu(T, lambda);
  std::uint64_t rng = 0x6d61677370656331ULL ^ (static_cast<std::uint64_t>(n) << 17);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = detail::runif(rng);

  std::vector<double> resid_buf;
  for (int sweep = 0; sweep < 8; ++sweep) {
    lu.solve(y);
    // pre-scale by the largest entry: when lambda sits on an eigenvalue the
    // solve legitimately produces huge components
    double amax = 0.0;
    for (double t : y) amax = std::max(amax, std::abs(t));
    if (!(amax > 0.0) || !std::isfinite(amax))
      throw SolverError("tridiag_eigenvector: breakdown");
    if (amax > 1e100)
      for (double& t : y) t /= amax;
    for (const auto& p : prev_y) {
      const double c = detail::dot(y, p);
      for (std::size_t i = 0; i < n; ++i) y[i] -= c * p[i];
    }
    const double nn = detail::nrm2(y);
    if (!(nn > 0.0) || !std::isfinite(nn))
      throw SolverError("tridiag_eigenvector: breakdown");
    for (double& t : y) t /= nn;

    detail::tridiag_apply_reduced(T, y, resid_buf);
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = resid_buf[i] - lambda * y[i];
      r += e * e;
    }
    r = std::sqrt(r);
    if (sweep >= 1 && r <= 1e-8 * norm_b) {
      std::vector<double> v(n);
      double nw = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = y[i] / std::sqrt(T.weight(i));
        nw += T.weight(i) * v[i] * v[i] * T.cell;
      }
      nw = std::sqrt(nw);
      std::size_t imax = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
      const double s = v[imax] < 0.0 ? -1.0 : 1.0;
      for (double& t : v) t *= s / nw;
      return v;
    }
  }
  throw SolverError("tridiag_eigenvector: no convergence after 8 sweeps");
}

// ---------------------------------------------------------------------------
// Dense symmetric eigensolver (Householder tridiagonalization + implicit QL)
// ---------------------------------------------------------------------------

namespace detail {

// Reduces a symmetric matrix (row-major, n x n) to tridiagonal form; if
// accumulate, a is overwritten by the orthogonal transformation.
inline void tred2(std::vector<double>& a, int n, std::vector<double>& d,
                  std::vector<double>& e, bool accumulate) {
  auto A = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  for (int i = n - 1; i >= 1; --i) {
    const int l = i - 1;
    double h = 0.0, scale = 0.0;
    if (l > 0) {
      for (int k = 0; k <= l; ++k) scale += std::abs(A(i, k));
      if (scale == 0.0) {
        e[i] = A(i, l);
      } else {
        for (int k = 0; k <= l; ++k) {
          A(i, k) /= scale;
          h += A(i, k) * A(i, k);
        }
        double f = A(i, l);
        double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        A(i, l) = f - g;
        f = 0.0;
        for (int j = 0; j <= l; ++j) {
          if (accumulate) A(j, i) = A(i, j) / h;
          g = 0.0;
          for (int k = 0; k <= j; ++k) g += A(j, k) * A(i, k);
          for (int k = j + 1; k <= l; ++k) g += A(k, j) * A(i, k);
          e[j] = g / h;
          f += e[j] * A(i, j);
        }
        const double hh = f / (h + h);
        for (int j = 0; j <= l; ++j) {
          f = A(i, j);
          e[j] = g = e[j] - hh * f;
          for (int k = 0; k <= j; ++k) A(j, k) -= f * e[k] + g * A(i, k);
        }
      }
    } else {
      e[i] = A(i, l);
    }
    d[i] = h;
  }
  if (accumulate) d[0] = 0.0;
  e[0] = 0.0;
  for (int i = 0; i < n; ++i) {
    if (accumulate) {
      const int l = i - 1;
      if (d[i] != 0.0) {
        for (int j = 0; j <= l; ++j) {
          double g = 0.0;
          for (int k = 0; k <= l; ++k) g += A(i, k) * A(k, j);
          for (int k = 0; k <= l; ++k) A(k, j) -= g * A(k, i);
        }
      }
      d[i] = A(i, i);
      A(i, i) = 1.0;
      for (int j = 0; j <= l; ++j) A(j, i) = A(i, j) = 0.0;
    } else {
      d[i] = A(i, i);
    }
  }
}

inline double hypot2(double a, double b) { return std::hypot(a, b); }

// Implicit-shift QL on a tridiagonal (d, e); z accumulates eigenvectors when
// non-null (z row-major n x n).
inline void tql2(std::vector<double>& d, std::vector<double>& e, int n,
                 std::vector<double>* z) {
  auto Z = [&](int i, int j) -> double& { return (*z)[static_cast<std::size_t>(i) * n + j]; };
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
      }
      if (m != l) {
        if (iter++ == 50) throw SolverError("tql2: too many iterations");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = hypot2(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
        double s = 1.0, c = 1.0, p = 0.0;
        for (int i = m - 1; i >= l; --i) {
          double f = s * e[i];
          const double b = c * e[i];
          r = hypot2(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          if (z) {
            for (int k = 0; k < n; ++k) {
              f = Z(k, i + 1);
              Z(k, i + 1) = s * Z(k, i) + c * f;
              Z(k, i) = c * Z(k, i) - s * f;
            }
          }
        }
        if (r == 0.0 && m - 1 >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

}  // namespace detail

/// All eigenvalues (ascending) of a dense symmetric matrix (row-major),
/// n <= 600. Serves as the oracle for the iterative paths.
inline Spectrum dense_sym_eigen(std::vector<double> a, int n,
                                bool want_vectors = false) {
  if (n < 1 || a.size() != static_cast<std::size_t>(n) * n)
    throw std::invalid_argument("dense_sym_eigen: bad dimensions");
  if (n > 600) throw std::invalid_argument("dense_sym_eigen: n > 600");
  double amax = 0.0;
  for (double x : a) amax = std::max(amax, std::abs(x));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j)
      if (std::abs(a[static_cast<std::size_t>(i) * n + j] -
                   a[static_cast<std::size_t>(j) * n + i]) >
          1e-12 * std::max(1.0, amax))
        throw std::invalid_argument("dense_sym_eigen: asymmetry detected");

  std::vector<double> d, e;
  detail::tred2(a, n, d, e, want_vectors);
  detail::tql2(d, e, n, want_vectors ? &a : nullptr);

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int i, int j) { return d[i] < d[j]; });

  Spectrum out;
  out.meta.solver = "dense_householder_ql";
  out.eigenvalues.resize(n);
  out.residuals.assign(n, 10.0 * n * std::numeric_limits<double>::epsilon() *
                              std::max(1.0, amax));
  for (int j = 0; j < n; ++j) out.eigenvalues[j] = d[idx[j]];
  if (want_vectors) {
    out.vectors.resize(n);
    for (int j = 0; j < n; ++j) {
      out.vectors[j].resize(n);
      for (int i = 0; i < n; ++i)
        out.vectors[j][i] = a[static_cast<std::size_t>(i) * n + idx[j]];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matrix-free operators
// ---------------------------------------------------------------------------

/// Real symmetric matrix-free operator in the plain l2 inner product.
struct MatrixFreeOp {
  std::size_t dim = 0;
  std::function<void(const double*, double*)> apply;
  bool symmetric = true;
  SolverMeta meta;
};

/// Complex Hermitian matrix-free operator.
struct ComplexMatrixFreeOp {
  std::size_t dim = 0;
  std::function<void(const std::complex<double>*, std::complex<double>*)> apply;
  bool hermitian = true;
  SolverMeta meta;
};

/// Real symmetric embedding [[Re, -Im], [Im, Re]] of dimension 2n. Every
/// eigenvalue of the complex operator appears with doubled multiplicity;
/// consumers must deduplicate pairs (dedup_spectrum, relative 1e-8).
inline MatrixFreeOp hermitian_embed(const ComplexMatrixFreeOp& op) {
  if (!op.hermitian) throw std::invalid_argument("hermitian_embed: not Hermitian");
  MatrixFreeOp out;
  out.dim = 2 * op.dim;
  out.meta = op.meta;
  out.meta.solver = "hermitian_embed";
  const std::size_t n = op.dim;
  out.apply = [n, capply = op.apply](const double* u, double* v) {
    // per-call buffers keep the wrapper reentrant
    std::vector<std::complex<double>> z(n), w(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = {u[i], u[n + i]};
    capply(z.data(), w.data());
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = w[i].real();
      v[n + i] = w[i].imag();
    }
  };
  return out;
}

namespace detail {

inline void mf_apply(const MatrixFreeOp& op, const std::vector<double>& x,
                     std::vector<double>& y) {
  y.resize(op.dim);
  op.apply(x.data(), y.data());
}

// Rough upper bound of the spectrum by power iteration (deterministic).
inline double power_norm_estimate(const MatrixFreeOp& op, std::uint64_t seed,
                                  int iters = 30) {
  std::uint64_t st = seed ^ 0x706f776572ULL;
  std::vector<double> x(op.dim), y;
  for (double& v : x) v = runif(st);
  double nn = nrm2(x);
  for (double& v : x) v /= nn;
  double lam = 0.0;
  for (int it = 0; it < iters; ++it) {
    mf_apply(op, x, y);
    lam = dot(x, y);
    const double ny = nrm2(y);
    if (ny == 0.0) return 0.0;
    for (std::size_t i = 0; i < op.dim; ++i) x[i] = y[i] / ny;
  }
  std::vector<double> r(op.dim);
  mf_apply(op, x, y);
  lam = dot(x, y);
  for (std::size_t i = 0; i < op.dim; ++i) r[i] = y[i] - lam * x[i];
  return std::abs(lam) + nrm2(r);  // certified upper bound of |lambda|_max
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Thick-restart Lanczos with full reorthogonalization
// ---------------------------------------------------------------------------

/// k smallest eigenvalues of a symmetric matrix-free operator. Deterministic
/// given `seed`. Residuals are true norms ||Av - lambda v||. When `maxiter`
/// matvecs are exhausted with residuals above tol, the partial Spectrum is
/// returned flagged unconverged.
inline Spectrum lanczos_smallest(const MatrixFreeOp& op, int k, int maxiter,
                                 std::uint64_t seed, double tol,
                                 bool want_vectors = false) {
  if (!op.symmetric) throw std::invalid_argument("lanczos_smallest: not symmetric");
  const std::size_t n = op.dim;
  if (k < 1 || k > 20 || static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("lanczos_smallest: k must be in [1, min(20, dim)]");

  const int mbasis =
      static_cast<int>(std::min<std::size_t>(n, std::max(4 * k + 20, 60)));
  const int keep = std::min(mbasis - 4, 2 * k + 6);

  std::vector<std::vector<double>> V;  // orthonormal basis, columns complete
  V.reserve(mbasis);
  std::vector<double> H(static_cast<std::size_t>(mbasis) * mbasis, 0.0);
  auto Hat = [&](int i, int j) -> double& {
    return H[static_cast<std::size_t>(i) * mbasis + j];
  };

  std::uint64_t rng = seed;
  auto fresh_vector = [&](std::vector<double>& v) {
    v.resize(n);
    for (double& x : v) x = detail::runif(rng);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : V) {
        const double c = detail::dot(v, q);
        for (std::size_t i = 0; i < n; ++i) v[i] -= c * q[i];
      }
    const double nn = detail::nrm2(v);
    if (nn < 1e-14) throw SolverError("lanczos: cannot generate start vector");
    for (double& x : v) x /= nn;
  };

  // Continuation state: r/beta_r is the next basis direction. After a thick
  // restart the coupling of the continuation vector is an arrow row already
  // written into H; `arrow_pending` suppresses the subdiagonal write.
  std::vector<double> r;
  double beta_r = 0.0;
  bool arrow_pending = false;

  int matvecs = 0;
  std::vector<double> w, tmp;
  const double breakdown_tol = 1e-12;
  Spectrum best;

  while (true) {
    while (static_cast<int>(V.size()) < mbasis && matvecs < maxiter) {
      const int j = static_cast<int>(V.size());
      std::vector<double> vnew;
      if (arrow_pending) {
        vnew = std::move(r);
        arrow_pending = false;
      } else if (beta_r > breakdown_tol) {
        vnew = std::move(r);
        for (double& x : vnew) x /= beta_r;
        Hat(j, j - 1) = Hat(j - 1, j) = beta_r;
      } else {
        if (V.size() >= n) break;  // full space spanned
        fresh_vector(vnew);
      }
      V.push_back(std::move(vnew));

      detail::mf_apply(op, V[j], w);
      ++matvecs;
      // Full reorthogonalization, two passes. Only the diagonal projection
      // enters H: sub-diagonal/arrow couplings are already stored, all other
      // exact couplings vanish for locked Ritz vectors.
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i <= j; ++i) {
          const double c = detail::dot(w, V[i]);
          if (pass == 0 && i == j) Hat(j, j) = c;
          for (std::size_t t = 0; t < n; ++t) w[t] -= c * V[i][t];
        }
      beta_r = detail::nrm2(w);
      r = std::move(w);
    }

    // Rayleigh-Ritz on the completed block.
    const int m = static_cast<int>(V.size());
    std::vector<double> Hm(static_cast<std::size_t>(m) * m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) Hm[static_cast<std::size_t>(i) * m + j] = Hat(i, j);
    Spectrum small = dense_sym_eigen(Hm, m, true);

    const int kk = std::min(k, m);
    std::vector<std::vector<double>> ritz(kk);
    std::vector<double> resid(kk);
    for (int j = 0; j < kk; ++j) {
      ritz[j].assign(n, 0.0);
      for (int i = 0; i < m; ++i) {
        const double c = small.vectors[j][i];
        if (c == 0.0) continue;
        for (std::size_t t = 0; t < n; ++t) ritz[j][t] += c * V[i][t];
      }
      detail::mf_apply(op, ritz[j], tmp);
      ++matvecs;
      double rr = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double e = tmp[t] - small.eigenvalues[j] * ritz[j][t];
        rr += e * e;
      }
      resid[j] = std::sqrt(rr);
    }

    best = Spectrum{};
    best.meta = op.meta;
    best.meta.solver = "lanczos_tr";
    for (int j = 0; j < kk; ++j) {
      best.eigenvalues.push_back(small.eigenvalues[j]);
      best.residuals.push_back(resid[j]);
    }
    if (want_vectors) best.vectors = ritz;

    const bool all_ok =
        kk == k && std::all_of(resid.begin(), resid.end(),
                               [tol](double rr) { return rr <= tol; });
    if (all_ok) {
      best.converged = true;
      return best;
    }
    if (matvecs >= maxiter || m >= static_cast<int>(n)) {
      best.converged = false;
      return best;
    }

    // Thick restart: keep the lowest Ritz vectors; the projected matrix
    // restarts as diag(theta) with arrow couplings beta_r * s_{m,i} to the
    // continuation direction r/beta_r (already orthogonal to the kept set).
    const int l = std::min(keep, m - 1);
    std::vector<std::vector<double>> Y(l);
    for (int j = 0; j < l; ++j) {
      if (j < kk) {
        Y[j] = std::move(ritz[j]);
        continue;
      }
      Y[j].assign(n, 0.0);
      for (int i = 0; i < m; ++i) {
        const double c = small.vectors[j][i];
        if (c == 0.0) continue;
        for (std::size_t t = 0; t < n; ++t) Y[j][t] += c * V[i][t];
      }
    }
    std::fill(H.begin(), H.end(), 0.0);
    V = std::move(Y);
    for (int j = 0; j < l; ++j) Hat(j, j) = small.eigenvalues[j];

    if (beta_r > breakdown_tol) {
      for (double& x : r) x /= beta_r;
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& y : V) {
          const double c = detail::dot(r, y);
          for (std::size_t t = 0; t < n; ++t) r[t] -= c * y[t];
        }
      const double rn = detail::nrm2(r);
      if (rn > 0.5) {  // still a genuine new direction
        for (double& x : r) x /= rn;
        for (int j = 0; j < l; ++j)
          Hat(j, l) = Hat(l, j) = beta_r * small.vectors[j][m - 1];
        arrow_pending = true;
      } else {
        beta_r = 0.0;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Chebyshev-filtered subspace iteration
// ---------------------------------------------------------------------------

struct FilterOpts {
  int block = 0;          // 0: k + 3
  int degree = 0;         // 0: adaptive
  long max_matvec = 400000;
  double tol = 1e-8;
  std::uint64_t seed = 42;
};

/// k smallest eigenvalues by Chebyshev-filtered subspace iteration. Chosen
/// over Lanczos when the spectral width is many orders larger than the gap
/// (fine 2D grids): cost is plain matvecs, no growing basis.
inline Spectrum filtered_smallest(const MatrixFreeOp& op, int k,
                                  const FilterOpts& opts = {}) {
  if (!op.symmetric) throw std::invalid_argument("filtered_smallest: not symmetric");
  const std::size_t n = op.dim;
  const int p = std::min<std::size_t>(opts.block > 0 ? opts.block : k + 3, n);
  if (k < 1 || k > p) throw std::invalid_argument("filtered_smallest: bad k");

  const double lam_hi = detail::power_norm_estimate(op, opts.seed) * 1.02 + 1e-8;
  long matvecs = 30;

  std::uint64_t rng = opts.seed ^ 0x66696c74ULL;
  std::vector<std::vector<double>> X(p);
  for (auto& col : X) {
    col.resize(n);
    for (double& x : col) x = detail::runif(rng);
  }

  auto orthonormalize = [&](std::vector<std::vector<double>>& B) {
    for (int j = 0; j < static_cast<int>(B.size()); ++j) {
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i < j; ++i) {
          const double c = detail::dot(B[j], B[i]);
          for (std::size_t t = 0; t < n; ++t) B[j][t] -= c * B[i][t];
        }
      double nn = detail::nrm2(B[j]);
      if (nn < 1e-13) {
        for (double& x : B[j]) x = detail::runif(rng);
        for (int i = 0; i < j; ++i) {
          const double c = detail::dot(B[j], B[i]);
          for (std::size_t t = 0; t < n; ++t) B[j][t] -= c * B[i][t];
        }
        nn = detail::nrm2(B[j]);
      }
      for (double& x : B[j]) x /= nn;
    }
  };

  std::vector<double> tmp;
  std::vector<double> theta(p, 0.0), resid(p, 1e300);

  auto rayleigh_ritz = [&]() {
    std::vector<std::vector<double>> AX(p);
    std::vector<double> Hm(static_cast<std::size_t>(p) * p);
    for (int j = 0; j < p; ++j) {
      detail::mf_apply(op, X[j], AX[j]);
      ++matvecs;
    }
    for (int i = 0; i < p; ++i)
      for (int j = 0; j <= i; ++j) {
        const double v = detail::dot(X[i], AX[j]);
        Hm[static_cast<std::size_t>(i) * p + j] = v;
        Hm[static_cast<std::size_t>(j) * p + i] = v;
      }
    Spectrum small = dense_sym_eigen(Hm, p, true);
    std::vector<std::vector<double>> Xn(p), AXn(p);
    for (int j = 0; j < p; ++j) {
      Xn[j].assign(n, 0.0);
      AXn[j].assign(n, 0.0);
      for (int i = 0; i < p; ++i) {
        const double c = small.vectors[j][i];
        if (c == 0.0) continue;
        for (std::size_t t = 0; t < n; ++t) {
          Xn[j][t] += c * X[i][t];
          AXn[j][t] += c * AX[i][t];
        }
      }
      theta[j] = small.eigenvalues[j];
      double r = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double e = AXn[j][t] - theta[j] * Xn[j][t];
        r += e * e;
      }
      resid[j] = std::sqrt(r);
    }
    X.swap(Xn);
  };

  orthonormalize(X);
  rayleigh_ritz();

  const int max_cycles = 600;
  for (int cycle = 0; cycle < max_cycles; ++cycle) {
    bool ok = true;
    for (int j = 0; j < k; ++j) ok = ok && resid[j] <= opts.tol;
    if (ok) break;
    if (matvecs >= opts.max_matvec) break;

    // Filter window: damp [a, lam_hi]. The cut must fall in a genuine
    // spectral gap -- with clustered or embedding-doubled eigenvalues the
    // (k+1)-th Ritz value can coincide with the k-th, which would leave the
    // wanted cluster unamplified. Pick the widest gap among theta[k..p-1].
    int cut = std::min(k, p - 1);
    double best_gap = -1.0;
    for (int j = k; j < p; ++j) {
      const double gap_j = theta[j] - theta[j - 1];
      if (gap_j > best_gap) {
        best_gap = gap_j;
        cut = j;
      }
    }
    double a = 0.5 * (theta[cut] + theta[cut - 1]);
    const double span = lam_hi - theta[0];
    a = std::max(a, theta[k - 1] + 1e-10 * std::max(1.0, std::abs(theta[k - 1])));
    a = std::min(a, lam_hi - 0.05 * span);
    const double b = lam_hi;
    const double e = 0.5 * (b - a), c = 0.5 * (b + a);

    int degree = opts.degree;
    if (degree <= 0) {
      // enough degree to gain ~e^20 on the lowest state per cycle, clamped
      const double gap = std::max((a - theta[0]) / (b - a), 1e-12);
      degree = static_cast<int>(
          std::clamp(20.0 / (2.0 * std::sqrt(gap)), 60.0, 4000.0));
    }

    // leading converged columns stay locked; they still participate in the
    // orthonormalization and Rayleigh-Ritz
    int nlock = 0;
    while (nlock < k && resid[nlock] <= 0.2 * opts.tol) ++nlock;

    for (int j = nlock; j < p; ++j) {
      if (matvecs >= opts.max_matvec && j > k) break;
      std::vector<double> t0 = X[j], t1(n);
      detail::mf_apply(op, t0, t1);
      ++matvecs;
      for (std::size_t t = 0; t < n; ++t) t1[t] = (t1[t] - c * t0[t]) / e;
      for (int d = 1; d < degree; ++d) {
        detail::mf_apply(op, t1, tmp);
        ++matvecs;
        for (std::size_t t = 0; t < n; ++t) {
          const double nxt = 2.0 * (tmp[t] - c * t1[t]) / e - t0[t];
          t0[t] = t1[t];
          t1[t] = nxt;
        }
        if ((d & 31) == 0) {
          const double nn = detail::nrm2(t1);
          if (nn > 1e100) {
            for (std::size_t t = 0; t < n; ++t) {
              t0[t] /= nn;
              t1[t] /= nn;
            }
          }
        }
      }
      X[j] = std::move(t1);
    }
    orthonormalize(X);
    rayleigh_ritz();
  }

  Spectrum out;
  out.meta = op.meta;
  out.meta.solver = "chebyshev_filtered mv=" + std::to_string(matvecs);
  out.converged = true;
  for (int j = 0; j < k; ++j) {
    out.eigenvalues.push_back(theta[j]);
    out.residuals.push_back(resid[j]);
    if (resid[j] > opts.tol) out.converged = false;
  }
  out.vectors.assign(X.begin(), X.begin() + k);
  return out;
}

// ---------------------------------------------------------------------------
// Stochastic operator checks
// ---------------------------------------------------------------------------

/// Max symmetry defect |<Au,v> - <u,Av>| over `trials` random pairs,
/// normalized by ||Au|| ||v||.
inline double symmetry_defect(const MatrixFreeOp& op, std::uint64_t seed,
                              int trials = 5) {
  std::uint64_t st = seed ^ 0x73796dULL;
  std::vector<double> u(op.dim), v(op.dim), au, av;
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    for (double& x : u) x = detail::runif(st);
    for (double& x : v) x = detail::runif(st);
    detail::mf_apply(op, u, au);
    detail::mf_apply(op, v, av);
    const double scale = detail::nrm2(au) * detail::nrm2(v) +
                         detail::nrm2(av) * detail::nrm2(u) + 1e-300;
    worst = std::max(worst,
                     std::abs(detail::dot(au, v) - detail::dot(u, av)) / scale);
  }
  return worst;
}

/// Max linearity defect ||A(au+bv) - aAu - bAv|| / scale over random trials.
inline double linearity_defect(const MatrixFreeOp& op, std::uint64_t seed,
                               int trials = 3) {
  std::uint64_t st = seed ^ 0x6c696eULL;
  std::vector<double> u(op.dim), v(op.dim), s(op.dim), au, av, as;
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const double a = detail::runif(st), b = detail::runif(st);
    for (std::size_t i = 0; i < op.dim; ++i) {
      u[i] = detail::runif(st);
      v[i] = detail::runif(st);
      s[i] = a * u[i] + b * v[i];
    }
    detail::mf_apply(op, u, au);
    detail::mf_apply(op, v, av);
    detail::mf_apply(op, s, as);
    double err = 0.0;
    for (std::size_t i = 0; i < op.dim; ++i) {
      const double e = as[i] - a * au[i] - b * av[i];
      err += e * e;
    }
    const double scale = detail::nrm2(au) + detail::nrm2(av) + 1e-300;
    worst = std::max(worst, std::sqrt(err) / scale);
  }
  return worst;
}

}  // namespace magspec
