#pragma once

// Cross-cutting invariant suite shared by the CLI `selftest` subcommand and
// the acceptance run: eigensolver cross-oracle agreement, residual
// contracts, Hermitian-embedding dedup, gauge invariance, truncation tail
// mass, and discretization convergence order.

#include <functional>
#include <iostream>

#include "bandfun.hpp"
#include "domains2d.hpp"
#include "semiclassics.hpp"

namespace magspec::selftest {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail_st {

inline double rand_unit(std::uint64_t& st) { return magspec::detail::runif(st); }

}  // namespace detail_st

/// Sturm counts match the dense oracle exactly, and bisection eigenvalues
/// agree with dense ones, over random tridiagonal instances.
inline Check cross_oracle(std::uint64_t seed) {
  Check c{"eigensolver_cross_oracle"};
  std::uint64_t st = seed;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 4 + static_cast<int>((magspec::detail::splitmix64(st) % 97));
    Tridiag T;
    T.diag.resize(n);
    T.offdiag.resize(n - 1);
    for (auto& d : T.diag) d = 3.0 * detail_st::rand_unit(st);
    for (auto& e : T.offdiag) e = detail_st::rand_unit(st);
    std::vector<double> A(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
      A[static_cast<std::size_t>(i) * n + i] = T.diag[i];
      if (i + 1 < n)
        A[static_cast<std::size_t>(i) * n + i + 1] =
            A[static_cast<std::size_t>(i + 1) * n + i] = T.offdiag[i];
    }
    Spectrum dense = dense_sym_eigen(A, n);
    for (int probe = 0; probe < 5; ++probe) {
      const double E = 4.0 * detail_st::rand_unit(st);
      int ref = 0;
      for (double lam : dense.eigenvalues)
        if (lam < E) ++ref;
      if (sturm_count(T, E) != ref) {
        c.detail = "count mismatch at n=" + std::to_string(n);
        return c;
      }
    }
    const int k = std::min(n, 4);
    Spectrum bis = tridiag_eigenvalues(T, k, 1e-12);
    for (int j = 0; j < k; ++j)
      worst = std::max(worst,
                       std::abs(bis.eigenvalues[j] - dense.eigenvalues[j]));
  }
  c.pass = worst <= 1e-9;
  c.detail = "max |bisect - dense| = " + std::to_string(worst);
  return c;
}

/// Lanczos agrees with the dense oracle; residual contract holds for the
/// returned Ritz pairs.
inline Check lanczos_oracle(std::uint64_t seed) {
  Check c{"lanczos_vs_dense_residual_contract"};
  const int n = 120;
  std::uint64_t st = seed ^ 0x6f72ULL;
  std::vector<double> A(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = detail_st::rand_unit(st) / (1.0 + std::abs(i - j));
      A[static_cast<std::size_t>(i) * n + j] = v;
      A[static_cast<std::size_t>(j) * n + i] = v;
    }
  MatrixFreeOp op;
  op.dim = n;
  op.apply = [&A, n](const double* x, double* y) {
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += A[static_cast<std::size_t>(i) * n + j] * x[j];
      y[i] = s;
    }
  };
  Spectrum dense = dense_sym_eigen(A, n);
  Spectrum lz = lanczos_smallest(op, 4, 4000, seed, 1e-9, true);
  double worst = 0.0;
  for (int j = 0; j < 4; ++j)
    worst = std::max(worst, std::abs(lz.eigenvalues[j] - dense.eigenvalues[j]) -
                                std::max(1e-9, lz.residuals[j]));
  bool contract = true;
  std::vector<double> av(n);
  for (int j = 0; j < 4; ++j) {
    op.apply(lz.vectors[j].data(), av.data());
    double rr = 0.0, nn = 0.0;
    for (int i = 0; i < n; ++i) {
      const double e = av[i] - lz.eigenvalues[j] * lz.vectors[j][i];
      rr += e * e;
      nn += lz.vectors[j][i] * lz.vectors[j][i];
    }
    if (std::sqrt(rr / nn) > lz.residuals[j] * 1.01 + 1e-14) contract = false;
  }
  c.pass = lz.converged && worst <= 0.0 && contract;
  c.detail = contract ? "agreement and residual contract hold"
                      : "residual contract violated";
  return c;
}

/// Deduplicated embedded spectra equal the complex ones on analytic cases.
inline Check embed_dedup() {
  Check c{"hermitian_embed_dedup"};
  using C = std::complex<double>;
  // block diag: Pauli-Y (eigen -1, 1) and [[2, 1+i], [1-i, 2]] (2 -+ sqrt2)
  ComplexMatrixFreeOp cop;
  cop.dim = 4;
  cop.apply = [](const C* x, C* y) {
    y[0] = C(0, 1) * x[1];
    y[1] = C(0, -1) * x[0];
    y[2] = 2.0 * x[2] + C(1, 1) * x[3];
    y[3] = C(1, -1) * x[2] + 2.0 * x[3];
  };
  auto rop = hermitian_embed(cop);
  Spectrum full = dense_sym_eigen(mf_to_dense(rop), 8);
  full.multiplicity.assign(8, 1);
  Spectrum ded = dedup_spectrum(full, 1e-8);
  const double r2 = std::sqrt(2.0);
  const std::vector<double> expect = {-1.0, 2.0 - r2, 1.0, 2.0 + r2};
  bool ok = ded.eigenvalues.size() == 4;
  if (ok)
    for (int i = 0; i < 4; ++i)
      ok = ok && std::abs(ded.eigenvalues[i] - expect[i]) < 1e-10 &&
           ded.multiplicity[i] == 2;
  c.pass = ok;
  c.detail = ok ? "2x2 and 4x4 analytic spectra doubled and deduplicated"
                : "dedup structure wrong";
  return c;
}

/// Gauge shift A -> A + grad(xy): the mid-edge averaged scheme is gauge
/// invariant up to O(dx^2); verify the shift is small and vanishes at
/// second order under refinement.
inline Check gauge_invariance(std::uint64_t seed) {
  Check c{"gauge_invariance"};
  const double h = 0.1;
  auto shift_at = [&](int n) {
    auto base = build_magnetic_well(h, 2.0, n);
    MagneticPotential2D shifted;
    shifted.a1 = [](double, double y) { return y; };
    shifted.a2 = [](double x, double y) {
      return x + x * x * x / 3.0 + y * y * x + x;
    };
    shifted.gauge = "phi=xy";
    auto moved = build_magnetic_well(h, 2.0, n, &shifted);
    FilterOpts fo;
    fo.block = 4;
    fo.tol = 1e-9;
    fo.max_matvec = 2000000;
    fo.seed = seed;
    Spectrum a = filtered_smallest(hermitian_embed(base), 2, fo);
    Spectrum b = filtered_smallest(hermitian_embed(moved), 2, fo);
    if (!a.converged || !b.converged)
      throw SolverError("gauge check: unconverged");
    return std::abs(a.eigenvalues[0] - b.eigenvalues[0]);
  };
  const double d1 = shift_at(60), d2 = shift_at(120);
  c.pass = d2 <= 2e-3 && d2 <= d1 / 3.0;
  c.detail = "lambda1 shift " + std::to_string(d1) + " -> " +
             std::to_string(d2) + " under halving";
  return c;
}

/// Ground vectors of the truncated 1D models carry no mass in the outer 10%
/// of the box.
inline Check tail_mass_check() {
  Check c{"tail_mass"};
  double worst = 0.0;
  {
    Grid1D g = gridpolicy::de_gennes(0.8, 1500);
    Tridiag T = build_de_gennes(0.8, g);
    auto v = tridiag_eigenvector(T, tridiag_eigenvalues(T, 1, 1e-12).eigenvalues[0]);
    worst = std::max(worst, tail_mass(T, v, 0.10, false));
  }
  {
    // quartic wells need a deep box before the outer tenth is truly empty
    Grid1D g = gridpolicy::montgomery(1, 0.35, 1500, 150.0);
    Tridiag T = build_montgomery(1, 0.35, g, 150.0);
    auto v = tridiag_eigenvector(T, tridiag_eigenvalues(T, 1, 1e-12).eigenvalues[0]);
    worst = std::max(worst, tail_mass(T, v, 0.10, true));
  }
  {
    Grid1D g = gridpolicy::harmonic(1500, 25.0);
    Tridiag T = build_harmonic(g);
    auto v = tridiag_eigenvector(T, tridiag_eigenvalues(T, 1, 1e-12).eigenvalues[0]);
    worst = std::max(worst, tail_mass(T, v, 0.10, true));
  }
  c.pass = worst <= 1e-8;
  c.detail = "max outer-10% mass = " + std::to_string(worst);
  return c;
}

/// Measured convergence order of the discretizations (log2 of successive
/// eigenvalue differences under grid halving) stays in [1.8, 2.2].
inline Check convergence_order() {
  Check c{"convergence_order"};
  auto order_of = [](const std::function<double(int)>& lam, int n0) {
    const double l1 = lam(n0), l2 = lam(2 * n0), l3 = lam(4 * n0);
    return std::log2(std::abs((l1 - l2) / (l2 - l3)));
  };
  const double o1 = order_of(
      [](int n) {
        Grid1D g{0.0, 13.0, n, BC::Neumann, BC::Dirichlet, Layout::Vertex};
        return tridiag_eigenvalues(build_de_gennes(0.77, g), 1, 1e-13)
            .eigenvalues[0];
      },
      400);
  const double o2 = order_of(
      [](int n) {
        Grid1D g{-5.5, 5.5, n, BC::Dirichlet, BC::Dirichlet, Layout::Vertex};
        return tridiag_eigenvalues(build_harmonic(g), 1, 1e-13).eigenvalues[0];
      },
      400);
  // 2D triangle under mesh refinement
  auto tri = [](int M) {
    FilterOpts fo;
    fo.block = 2;
    fo.tol = 1e-10;
    fo.max_matvec = 300000;
    return filtered_smallest(build_triangle(1.0, M), 1, fo).eigenvalues[0];
  };
  const double t1 = tri(24), t2 = tri(48), t3 = tri(96);
  const double o3 = std::log2(std::abs((t1 - t2) / (t2 - t3)));
  c.pass = o1 > 1.8 && o1 < 2.2 && o2 > 1.8 && o2 < 2.2 && o3 > 1.8 && o3 < 2.2;
  c.detail = "orders: de Gennes " + std::to_string(o1) + ", harmonic " +
             std::to_string(o2) + ", triangle " + std::to_string(o3);
  return c;
}

inline std::vector<Check> run_all(std::uint64_t seed) {
  return {cross_oracle(seed),   lanczos_oracle(seed), embed_dedup(),
          gauge_invariance(seed), tail_mass_check(),  convergence_order()};
}

}  // namespace magspec::selftest
