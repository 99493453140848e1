#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <magspec/eigencore.hpp>

using namespace magspec;

namespace {

Tridiag diag_matrix(std::initializer_list<double> d) {
  Tridiag T;
  T.diag = d;
  T.offdiag.assign(T.diag.size() - 1, 0.0);
  return T;
}

// second-order FD of -u'' on (0, pi) with Dirichlet ends; exact eigenvalues
// (2/dx^2)(1 - cos(m dx)) serve as the independent oracle.
Tridiag dirichlet_laplacian(int n) {
  const double dx = M_PI / (n + 1);
  Tridiag T;
  T.cell = dx;
  T.diag.assign(n, 2.0 / (dx * dx));
  T.offdiag.assign(n - 1, -1.0 / (dx * dx));
  return T;
}

double fd_exact(int n, int m) {
  const double dx = M_PI / (n + 1);
  return 2.0 / (dx * dx) * (1.0 - std::cos(m * dx));
}

}  // namespace

TEST_CASE("sturm count on a diagonal matrix") {
  const Tridiag T = diag_matrix({1.0, 2.0, 3.0});
  CHECK(sturm_count(T, 2.5) == 2);
  CHECK(sturm_count(T, 0.0) == 0);
  CHECK(sturm_count(T, 100.0) == 3);
}

TEST_CASE("sturm count below the Gershgorin bound is zero") {
  Tridiag T = dirichlet_laplacian(100);
  CHECK(sturm_count(T, -1e6) == 0);
}

TEST_CASE("sturm count of the Dirichlet Laplacian matches the FD formula") {
  const int n = 200;
  Tridiag T = dirichlet_laplacian(n);
  // only the first eigenvalue (~1) lies below 2.5
  CHECK(sturm_count(T, 2.5) == 1);
  int below_20 = 0;
  for (int m = 1; m <= n; ++m)
    if (fd_exact(n, m) < 20.0) ++below_20;
  CHECK(sturm_count(T, 20.0) == below_20);
}

TEST_CASE("bisection eigenvalues: diagonal and FD oracle") {
  const Spectrum s = tridiag_eigenvalues(diag_matrix({5.0, 1.0, 3.0}), 2, 1e-12);
  CHECK_THAT(s.eigenvalues[0], Catch::Matchers::WithinAbs(1.0, 1e-11));
  CHECK_THAT(s.eigenvalues[1], Catch::Matchers::WithinAbs(3.0, 1e-11));

  const int n = 400;
  const Spectrum f = tridiag_eigenvalues(dirichlet_laplacian(n), 2, 1e-12);
  CHECK_THAT(f.eigenvalues[0], Catch::Matchers::WithinAbs(fd_exact(n, 1), 1e-10));
  CHECK_THAT(f.eigenvalues[1], Catch::Matchers::WithinAbs(fd_exact(n, 2), 1e-10));
  CHECK_THROWS_AS(tridiag_eigenvalues(dirichlet_laplacian(8), 9, 1e-12),
                  std::invalid_argument);
}

TEST_CASE("eigenvector of a diagonal matrix is a coordinate vector") {
  const Tridiag T = diag_matrix({2.0, -1.0, 4.0, 0.5});
  const auto v = tridiag_eigenvector(T, -1.0);
  CHECK_THAT(std::abs(v[1]), Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(v[0], Catch::Matchers::WithinAbs(0.0, 1e-10));
  CHECK(v[1] > 0.0);  // sign fix
}

TEST_CASE("inverse iteration residual and weighted normalization") {
  const int n = 300;
  Tridiag T = dirichlet_laplacian(n);
  const Spectrum s = tridiag_eigenvalues(T, 3, 1e-13);
  std::vector<std::vector<double>> found;
  for (int j = 0; j < 3; ++j) {
    const auto v = tridiag_eigenvector(T, s.eigenvalues[j], found);
    double norm = 0.0, resid = 0.0;
    for (int i = 0; i < n; ++i) {
      norm += v[i] * v[i] * T.cell;
      double av = T.diag[i] * v[i];
      if (i > 0) av += T.offdiag[i - 1] * v[i - 1];
      if (i + 1 < n) av += T.offdiag[i] * v[i + 1];
      resid += (av - s.eigenvalues[j] * v[i]) * (av - s.eigenvalues[j] * v[i]);
    }
    CHECK_THAT(norm, Catch::Matchers::WithinAbs(1.0, 1e-10));
    CHECK(std::sqrt(resid) <= 1e-8 * detail::reduced_inf_norm(T));
    found.push_back(v);
  }
}

TEST_CASE("dense eigensolver analytic 2x2 and trace identity") {
  const double a = 1.3, b = -0.7;
  const Spectrum s = dense_sym_eigen({a, b, b, a}, 2);
  CHECK_THAT(s.eigenvalues[0], Catch::Matchers::WithinAbs(a - std::abs(b), 1e-13));
  CHECK_THAT(s.eigenvalues[1], Catch::Matchers::WithinAbs(a + std::abs(b), 1e-13));

  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const int n = 50;
  std::vector<double> A(n * n);
  double trace = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = U(gen);
      A[i * n + j] = A[j * n + i] = v;
      if (i == j) trace += v;
    }
  const Spectrum r = dense_sym_eigen(A, n);
  double sum = 0.0;
  for (double lam : r.eigenvalues) sum += lam;
  CHECK_THAT(sum, Catch::Matchers::WithinAbs(trace, 1e-9));

  A[1] += 1e-3;  // break symmetry
  CHECK_THROWS_AS(dense_sym_eigen(A, n), std::invalid_argument);
}

TEST_CASE("dense agrees with bisection on random tridiagonals") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 10 + trial * 4;
    Tridiag T;
    T.diag.resize(n);
    T.offdiag.resize(n - 1);
    for (auto& d : T.diag) d = 3.0 * U(gen);
    for (auto& e : T.offdiag) e = U(gen);
    std::vector<double> A(n * n, 0.0);
    for (int i = 0; i < n; ++i) {
      A[i * n + i] = T.diag[i];
      if (i + 1 < n) A[i * n + i + 1] = A[(i + 1) * n + i] = T.offdiag[i];
    }
    const Spectrum dense = dense_sym_eigen(A, n);
    const Spectrum bis = tridiag_eigenvalues(T, 5, 1e-13);
    for (int j = 0; j < 5; ++j)
      CHECK_THAT(bis.eigenvalues[j],
                 Catch::Matchers::WithinAbs(dense.eigenvalues[j], 1e-9));
    // exact integer count match at random thresholds
    for (int probe = 0; probe < 5; ++probe) {
      const double E = 4.0 * U(gen);
      int ref = 0;
      for (double lam : dense.eigenvalues)
        if (lam < E) ++ref;
      CHECK(sturm_count(T, E) == ref);
    }
  }
}

TEST_CASE("lanczos on the 2D FD Laplacian (separable oracle)") {
  const int m = 40;
  const double dx = 1.0 / (m + 1);
  MatrixFreeOp op;
  op.dim = static_cast<std::size_t>(m) * m;
  op.apply = [m, dx](const double* x, double* y) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double c = 4.0 * x[i * m + j];
        if (i > 0) c -= x[(i - 1) * m + j];
        if (i + 1 < m) c -= x[(i + 1) * m + j];
        if (j > 0) c -= x[i * m + j - 1];
        if (j + 1 < m) c -= x[i * m + j + 1];
        y[i * m + j] = c / (dx * dx);
      }
  };
  auto lam1d = [dx](int q) { return 2.0 / (dx * dx) * (1.0 - std::cos(q * M_PI * dx)); };
  const Spectrum s = lanczos_smallest(op, 3, 3000, 42, 1e-8);
  REQUIRE(s.converged);
  CHECK_THAT(s.eigenvalues[0], Catch::Matchers::WithinAbs(lam1d(1) * 2, 1e-7));
  CHECK_THAT(s.eigenvalues[1], Catch::Matchers::WithinAbs(lam1d(1) + lam1d(2), 1e-7));
  // continuum value 2 pi^2 up to O(dx^2)
  CHECK_THAT(s.eigenvalues[0], Catch::Matchers::WithinAbs(2.0 * M_PI * M_PI, 0.02));
  // determinism given the seed
  const Spectrum again = lanczos_smallest(op, 3, 3000, 42, 1e-8);
  CHECK(again.eigenvalues == s.eigenvalues);
}

TEST_CASE("lanczos on the identity collapses with multiplicity metadata") {
  MatrixFreeOp op;
  op.dim = 40;
  op.apply = [](const double* x, double* y) {
    for (int i = 0; i < 40; ++i) y[i] = x[i];
  };
  const Spectrum s = lanczos_smallest(op, 3, 600, 42, 1e-10);
  const Spectrum d = dedup_spectrum(s);
  REQUIRE(d.eigenvalues.size() == 1);
  CHECK_THAT(d.eigenvalues[0], Catch::Matchers::WithinAbs(1.0, 1e-10));
  CHECK(d.multiplicity[0] == 3);
}

TEST_CASE("unconverged lanczos returns a flagged partial spectrum") {
  const int n = 500;
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> diag(n);
  for (auto& d : diag) d = U(gen);
  MatrixFreeOp op;
  op.dim = n;
  op.apply = [&diag, n](const double* x, double* y) {
    for (int i = 0; i < n; ++i) y[i] = diag[i] * x[i] + 0.1 * x[(i + 1) % n] + 0.1 * x[(i + n - 1) % n];
  };
  const Spectrum s = lanczos_smallest(op, 4, 25, 42, 1e-14);
  CHECK_FALSE(s.converged);
  CHECK(s.eigenvalues.size() == 4);
}

TEST_CASE("hermitian embedding: real operator decouples, Pauli-Y doubles") {
  using C = std::complex<double>;
  ComplexMatrixFreeOp real_op;
  real_op.dim = 3;
  real_op.apply = [](const C* x, C* y) {
    y[0] = 2.0 * x[0] + x[1];
    y[1] = x[0] + 3.0 * x[1] - x[2];
    y[2] = -x[1] + x[2];
  };
  auto emb = hermitian_embed(real_op);
  std::vector<double> dense(36);
  {
    std::vector<double> e(6, 0.0), col(6);
    for (int j = 0; j < 6; ++j) {
      e[j] = 1.0;
      emb.apply(e.data(), col.data());
      e[j] = 0.0;
      for (int i = 0; i < 6; ++i) dense[i * 6 + j] = col[i];
    }
  }
  const Spectrum s = dense_sym_eigen(dense, 6);
  const Spectrum d = dedup_spectrum(s);
  CHECK(d.eigenvalues.size() == 3);  // two decoupled copies
  for (int m : d.multiplicity) CHECK(m == 2);

  ComplexMatrixFreeOp pauli;
  pauli.dim = 2;
  pauli.apply = [](const C* x, C* y) {
    y[0] = C(0, 1) * x[1];
    y[1] = C(0, -1) * x[0];
  };
  auto pe = hermitian_embed(pauli);
  std::vector<double> pd(16);
  std::vector<double> e(4, 0.0), col(4);
  for (int j = 0; j < 4; ++j) {
    e[j] = 1.0;
    pe.apply(e.data(), col.data());
    e[j] = 0.0;
    for (int i = 0; i < 4; ++i) pd[i * 4 + j] = col[i];
  }
  const Spectrum ps = dense_sym_eigen(pd, 4);
  CHECK_THAT(ps.eigenvalues[0], Catch::Matchers::WithinAbs(-1.0, 1e-12));
  CHECK_THAT(ps.eigenvalues[1], Catch::Matchers::WithinAbs(-1.0, 1e-12));
  CHECK_THAT(ps.eigenvalues[2], Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(ps.eigenvalues[3], Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("filtered solver agrees with lanczos and dense") {
  const int n = 300;
  Tridiag T = dirichlet_laplacian(n);
  MatrixFreeOp op;
  op.dim = n;
  op.apply = [&T, n](const double* x, double* y) {
    for (int i = 0; i < n; ++i) {
      double s = T.diag[i] * x[i];
      if (i > 0) s += T.offdiag[i - 1] * x[i - 1];
      if (i + 1 < n) s += T.offdiag[i] * x[i + 1];
      y[i] = s;
    }
  };
  const Spectrum bis = tridiag_eigenvalues(T, 3, 1e-13);
  const Spectrum fil = filtered_smallest(op, 3, {});
  REQUIRE(fil.converged);
  for (int j = 0; j < 3; ++j)
    CHECK_THAT(fil.eigenvalues[j],
               Catch::Matchers::WithinAbs(bis.eigenvalues[j],
                                          std::max(1e-8, fil.residuals[j])));
}

TEST_CASE("weighted reduction keeps the residual contract") {
  // half-line Neumann oscillator in the weighted inner product
  const int n = 2000;
  const double b = 14.0, dx = b / n;
  Tridiag T;
  T.cell = dx;
  T.diag.resize(n);
  T.offdiag.assign(n - 1, -1.0 / (dx * dx));
  T.weights.assign(n, 1.0);
  T.weights[0] = 0.5;
  for (int i = 0; i < n; ++i) {
    const double t = i * dx;
    const double form = (i == 0 ? 1.0 : 2.0) / (dx * dx) + T.weight(i) * t * t;
    T.diag[i] = form / T.weight(i);
  }
  const Spectrum s = tridiag_eigenvalues(T, 3, 1e-12);
  CHECK_THAT(s.eigenvalues[0], Catch::Matchers::WithinAbs(1.0, 2e-5));
  CHECK_THAT(s.eigenvalues[1], Catch::Matchers::WithinAbs(5.0, 2e-4));
  CHECK_THAT(s.eigenvalues[2], Catch::Matchers::WithinAbs(9.0, 5e-4));
  const auto v = tridiag_eigenvector(T, s.eigenvalues[0]);
  double mass = 0.0;
  for (int i = 0; i < n; ++i) mass += T.weight(i) * v[i] * v[i] * dx;
  CHECK_THAT(mass, Catch::Matchers::WithinAbs(1.0, 1e-10));
}

TEST_CASE("stochastic operator checks flag asymmetry") {
  MatrixFreeOp bad;
  bad.dim = 30;
  bad.apply = [](const double* x, double* y) {
    for (int i = 0; i < 30; ++i) y[i] = x[i] + (i > 0 ? 0.5 * x[i - 1] : 0.0);
  };
  CHECK(symmetry_defect(bad, 42) > 1e-3);
  CHECK(linearity_defect(bad, 42) <= 1e-10);
}
