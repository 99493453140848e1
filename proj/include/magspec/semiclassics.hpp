#pragma once

// h-sweeps, asymptotic-coefficient fitting, harmonic-approximation
// predictions, the Born-Oppenheimer reduction pipeline, quantized-Hessian
// second terms, and spectral-theorem residual bounds.

#include "bandfun.hpp"

namespace magspec {

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

struct HSweep {
  std::vector<double> h;
  std::vector<double> lambda;
  std::vector<double> residual;
  int index = 1;  // eigenvalue index n

  void validate() const {
    if (h.size() < 3) throw std::invalid_argument("HSweep: need >= 3 samples");
    for (std::size_t i = 1; i < h.size(); ++i)
      if (!(h[i] < h[i - 1]))
        throw std::invalid_argument("HSweep: h must be strictly decreasing");
  }
};

struct AsymptoticFit {
  std::vector<double> exponents;
  std::vector<double> coefficients;
  double rms_residual = 0.0;
  double condition = 0.0;
  std::vector<double> h_samples;
  double slope_diagnostic = 0.0;  // d log(lambda - c0) / d log h, two smallest h
};

namespace detail {

// Householder QR least squares for a small dense m x p system.
inline std::vector<double> qr_lsq(std::vector<double> A, int m, int p,
                                  std::vector<double> b) {
  for (int j = 0; j < p; ++j) {
    double nrm = 0.0;
    for (int i = j; i < m; ++i) nrm += A[i * p + j] * A[i * p + j];
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) throw SolverError("qr_lsq: rank deficient design");
    if (A[j * p + j] < 0) nrm = -nrm;  // same sign as the pivot: v_j >= 1
    for (int i = j; i < m; ++i) A[i * p + j] /= nrm;
    A[j * p + j] += 1.0;
    for (int c = j + 1; c < p; ++c) {
      double s = 0.0;
      for (int i = j; i < m; ++i) s += A[i * p + j] * A[i * p + c];
      s = -s / A[j * p + j];
      for (int i = j; i < m; ++i) A[i * p + c] += s * A[i * p + j];
    }
    double s = 0.0;
    for (int i = j; i < m; ++i) s += A[i * p + j] * b[i];
    s = -s / A[j * p + j];
    for (int i = j; i < m; ++i) b[i] += s * A[i * p + j];
    A[j * p + j] = -nrm;  // R diagonal after the reflection
  }
  std::vector<double> x(p);
  for (int j = p - 1; j >= 0; --j) {
    double s = b[j];
    for (int c = j + 1; c < p; ++c) s -= A[j * p + c] * x[c];
    x[j] = s / A[j * p + j];
  }
  return x;
}

}  // namespace detail

/// Ordinary least squares for lambda(h) = sum_j c_j h^{e_j} with
/// caller-supplied exponents (never inferred). Errors out when the design
/// condition exceeds 1e12.
inline AsymptoticFit fit_expansion(const HSweep& sweep,
                                   const std::vector<double>& exponents) {
  sweep.validate();
  const int m = static_cast<int>(sweep.h.size());
  const int p = static_cast<int>(exponents.size());
  if (m < p + 1)
    throw std::invalid_argument("fit_expansion: need #samples >= #exponents + 1");

  std::vector<double> X(static_cast<std::size_t>(m) * p);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < p; ++j) X[i * p + j] = std::pow(sweep.h[i], exponents[j]);

  // condition estimate via the Gram matrix spectrum
  std::vector<double> G(static_cast<std::size_t>(p) * p, 0.0);
  for (int a = 0; a < p; ++a)
    for (int c = 0; c < p; ++c) {
      double s = 0.0;
      for (int i = 0; i < m; ++i) s += X[i * p + a] * X[i * p + c];
      G[a * p + c] = s;
    }
  Spectrum gs = dense_sym_eigen(G, p);
  const double smin = std::max(gs.eigenvalues.front(), 0.0);
  const double smax = gs.eigenvalues.back();
  const double cond = smin > 0 ? std::sqrt(smax / smin)
                               : std::numeric_limits<double>::infinity();
  if (!(cond <= 1e12))
    throw SolverError("fit_expansion: ill-conditioned design (cond=" +
                      std::to_string(cond) + ")");

  AsymptoticFit fit;
  fit.exponents = exponents;
  fit.h_samples = sweep.h;
  fit.condition = cond;
  fit.coefficients = detail::qr_lsq(X, m, p, sweep.lambda);

  double ss = 0.0;
  for (int i = 0; i < m; ++i) {
    double pred = 0.0;
    for (int j = 0; j < p; ++j) pred += fit.coefficients[j] * X[i * p + j];
    ss += (sweep.lambda[i] - pred) * (sweep.lambda[i] - pred);
  }
  fit.rms_residual = std::sqrt(ss / m);

  // slope diagnostic on the two smallest h, constant term removed
  const double c0 = fit.coefficients[0];
  const double l1 = sweep.lambda[m - 1] - c0, l2 = sweep.lambda[m - 2] - c0;
  if (l1 > 0 && l2 > 0)
    fit.slope_diagnostic =
        std::log(l2 / l1) / std::log(sweep.h[m - 2] / sweep.h[m - 1]);
  return fit;
}

// ---------------------------------------------------------------------------
// Harmonic approximation
// ---------------------------------------------------------------------------

/// First-order harmonic level V0 + (2n-1) h sqrt(V2 / 2) of
/// h^2 D^2 + V0 + V2 (s-s0)^2 / 2.
inline double harmonic_prediction(double v0, double v2, int n, double h) {
  if (!(v2 > 0.0)) throw std::invalid_argument("harmonic_prediction: V2 <= 0");
  if (n < 1) throw std::invalid_argument("harmonic_prediction: n >= 1");
  return v0 + (2.0 * n - 1.0) * h * std::sqrt(0.5 * v2);
}

// ---------------------------------------------------------------------------
// h sweeps
// ---------------------------------------------------------------------------

/// Generic sweep over a decreasing h list; `eval` returns (lambda_n, residual)
/// for one h with whatever resolution policy the builder declares.
inline HSweep h_sweep(
    const std::function<std::pair<double, double>(double)>& eval,
    const std::vector<double>& hs, int index = 1) {
  HSweep s;
  s.h = hs;
  s.index = index;
  s.validate();
  for (double h : hs) {
    auto [lam, res] = eval(h);
    if (!std::isfinite(lam)) throw SolverError("h_sweep: unconverged solve");
    s.lambda.push_back(lam);
    s.residual.push_back(res);
  }
  return s;
}

/// Sweep over a Tridiag builder (bisection, optional Richardson pairing is
/// the builder's responsibility).
inline HSweep h_sweep(const std::function<Tridiag(double)>& builder,
                      const std::vector<double>& hs, int index = 1,
                      double tol = 1e-12) {
  return h_sweep(
      [&](double h) {
        Spectrum sp = tridiag_eigenvalues(builder(h), index, tol);
        return std::make_pair(sp.eigenvalues[index - 1],
                              sp.residuals[index - 1]);
      },
      hs, index);
}

// ---------------------------------------------------------------------------
// Born-Oppenheimer reduction
// ---------------------------------------------------------------------------

struct BOReduction {
  std::vector<double> s;        // s nodes
  std::vector<double> nu;       // fiber ground energies
  Tridiag effective;            // h^2 D_s^2 + nu(s)
  Grid1D grid;
};

/// Tabulates the fiber ground energy over the s grid and assembles the
/// effective operator h^2 D_s^2 + nu(s) through the custom builder on the
/// same grid. The fiberwise bound makes its eigenvalues lower bounds for
/// the full operator (up to discretization slack).
inline BOReduction bo_reduce(const std::function<Tridiag(double)>& fiber,
                             const Grid1D& s_grid, double h,
                             double tol = 1e-11) {
  BOReduction out;
  out.grid = s_grid;
  out.s.resize(s_grid.n);
  out.nu.resize(s_grid.n);
  for (int i = 0; i < s_grid.n; ++i) {
    out.s[i] = s_grid.node(i);
    try {
      Tridiag T = fiber(out.s[i]);
      out.nu[i] = tridiag_eigenvalues(T, 1, tol).eigenvalues[0];
    } catch (const SolverError&) {
      throw;
    } catch (const std::exception& e) {
      throw SolverError("bo_reduce: fiber failure at s=" +
                        std::to_string(out.s[i]) + ": " + e.what());
    }
  }
  const double dx = s_grid.dx();
  auto lookup = [s0 = out.s.front(), dx, &nu = out.nu](double s) {
    const auto i = static_cast<std::size_t>(std::llround((s - s0) / dx));
    if (i >= nu.size()) throw std::out_of_range("bo_reduce: node lookup");
    return nu[i];
  };
  CustomPotential cp;
  cp.V = lookup;
  cp.h_s = h * h;
  out.effective = build_custom(cp, s_grid);
  return out;
}

// ---------------------------------------------------------------------------
// Quantized Hessian levels
// ---------------------------------------------------------------------------

/// n-th eigenvalue (2n-1) sqrt(det H) / 2 of the Weyl quantization of the
/// quadratic form (H11 s^2 + 2 H12 s xi + H22 xi^2) / 2 for positive
/// definite H.
inline double quantized_hessian_levels(double h11, double h22, double h12,
                                       int n) {
  const double det = h11 * h22 - h12 * h12;
  if (!(h11 > 0.0) || !(det > 0.0))
    throw std::invalid_argument("quantized_hessian_levels: H not positive definite");
  if (n < 1) throw std::invalid_argument("quantized_hessian_levels: n >= 1");
  return (2.0 * n - 1.0) * 0.5 * std::sqrt(det);
}

// ---------------------------------------------------------------------------
// Quasimode residual distance
// ---------------------------------------------------------------------------

/// ||(A - mu) psi|| / ||psi|| in the operator's inner product; the spectral
/// theorem bounds dist(mu, sp A) by this value.
inline double residual_distance(const Tridiag& T, double mu,
                                const std::vector<double>& psi) {
  if (psi.size() != T.size())
    throw std::invalid_argument("residual_distance: size mismatch");
  const std::size_t n = T.size();
  // reduced coordinates y = W^{1/2} psi make both norms plain l2
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = psi[i] * std::sqrt(T.weight(i));
  double nn = detail::nrm2(y);
  if (!(nn > 0.0)) throw std::invalid_argument("residual_distance: psi = 0");
  std::vector<double> by;
  detail::tridiag_apply_reduced(T, y, by);
  double rr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = by[i] - mu * y[i];
    rr += e * e;
  }
  return std::sqrt(rr) / nn;
}

inline double residual_distance(const MatrixFreeOp& op, double mu,
                                const std::vector<double>& psi) {
  if (psi.size() != op.dim)
    throw std::invalid_argument("residual_distance: size mismatch");
  std::vector<double> ap;
  detail::mf_apply(op, psi, ap);
  double rr = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < op.dim; ++i) {
    const double e = ap[i] - mu * psi[i];
    rr += e * e;
    nn += psi[i] * psi[i];
  }
  if (!(nn > 0.0)) throw std::invalid_argument("residual_distance: psi = 0");
  return std::sqrt(rr / nn);
}

// ---------------------------------------------------------------------------
// Canned sweep families (resolution policies)
// ---------------------------------------------------------------------------

namespace sweeps {

/// BO triangle eigenvalue; n chosen so the Airy layer of width h^{2/3} is
/// resolved, Richardson-paired.
inline std::pair<double, double> bo_triangle_level(double h, int index = 1) {
  const int n = std::max(2000, static_cast<int>(60.0 / std::pow(h, 2.0 / 3.0)));
  Grid1D g = gridpolicy::bo_triangle(n);
  auto e = model_eigenvalues(BOTriangle{h}, g, index);
  return {e[index - 1], 1e-10};
}

inline std::pair<double, double> bo_guide_level(double h, int index = 1) {
  const int n = std::max(4000, static_cast<int>(120.0 / std::pow(h, 2.0 / 3.0)));
  Grid1D g = gridpolicy::bo_guide(8.0, n);
  auto e = model_eigenvalues(BOGuide{h, 8.0}, g, index);
  return {e[index - 1], 1e-10};
}

inline std::pair<double, double> delta_effective_level(double h, int index = 1) {
  // Airy width (h^2/2)^{1/3}; the jump sits at x = 0
  const double width = std::pow(0.5 * h * h, 1.0 / 3.0);
  const int n = std::max(6000, static_cast<int>(1.1 / (width / 30.0)));
  Grid1D g = gridpolicy::delta_effective(0.1, 1.0, n);
  auto e = model_eigenvalues(DeltaEffective{h, 1}, g, index);
  return {e[index - 1], 1e-10};
}

}  // namespace sweeps

}  // namespace magspec
