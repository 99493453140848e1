// Acceptance suite: eleven numbered criteria covering the model operators,
// their spectral constants, the asymptotic expansions, and the invariant
// suite. Each criterion prints a single PASS/FAIL line; the process exits
// nonzero if any criterion fails.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <thread>

#include <magspec/counting.hpp>
#include <magspec/domains2d.hpp>
#include <magspec/selftest.hpp>

using namespace magspec;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int id, bool pass, const std::string& what, double elapsed_s) {
  std::printf("criterion %2d %s  %s  [%.1f s]\n", id, pass ? "PASS" : "FAIL",
              what.c_str(), elapsed_s);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

template <class F>
void criterion(int id, const std::string& what, F&& body) {
  const auto t0 = Clock::now();
  bool pass = false;
  std::string detail;
  try {
    detail = body(pass);
  } catch (const std::exception& e) {
    pass = false;
    detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  report(id, pass, what + (detail.empty() ? "" : " | " + detail), secs);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

template <class F>
void parallel_for(int n, F&& f) {
  const int jobs = std::max(1u, std::min<unsigned>(
                                    std::thread::hardware_concurrency(), n));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < n;) f(i);
    });
  for (auto& t : pool) t.join();
}

// Richardson-paired lowest eigenvalue of the Lu-Pan operator.
double lupan_rich(double theta, double S, double T, int nx, int ny) {
  FilterOpts fo;
  fo.block = 3;
  fo.tol = 1e-7;
  fo.max_matvec = 6000000;
  const Spectrum f = filtered_smallest(build_lupan(theta, S, T, nx, ny, 64.0), 1, fo);
  const Spectrum c =
      filtered_smallest(build_lupan(theta, S, T, nx / 2, ny / 2, 64.0), 1, fo);
  if (!f.converged || !c.converged) throw SolverError("lupan unconverged");
  return (4.0 * f.eigenvalues[0] - c.eigenvalues[0]) / 3.0;
}

// Richardson-paired triangle eigenvalue at resolution M (pairs with M/2).
double triangle_rich(double h, int M) {
  FilterOpts fo;
  fo.block = 2;
  fo.tol = 1e-8;
  fo.max_matvec = 900000;
  const Spectrum f = filtered_smallest(build_triangle(h, M), 1, fo);
  fo.max_matvec = 450000;
  const Spectrum c = filtered_smallest(build_triangle(h, M / 2), 1, fo);
  if (!f.converged || !c.converged) throw SolverError("triangle unconverged");
  return (4.0 * f.eigenvalues[0] - c.eigenvalues[0]) / 3.0;
}

// Richardson-paired magnetic well levels (deduplicated index 1 and 2).
std::pair<double, double> well_levels_rich(double h) {
  auto levels = [&](int n) {
    FilterOpts fo;
    fo.block = 8;
    fo.tol = 1e-9;
    fo.max_matvec = 6000000;
    const Spectrum s =
        filtered_smallest(hermitian_embed(build_magnetic_well(h, 2.0, n)), 4, fo);
    if (!s.converged) throw SolverError("well unconverged");
    const Spectrum d = dedup_spectrum(s, 1e-6);
    if (d.eigenvalues.size() < 2) throw SolverError("well dedup lost levels");
    return std::pair<double, double>(d.eigenvalues[0], d.eigenvalues[1]);
  };
  const auto c = levels(120);
  const auto f = levels(240);
  return {(4.0 * f.first - c.first) / 3.0, (4.0 * f.second - c.second) / 3.0};
}

}  // namespace

int main() {
  const double z1 = airy_zero(1);
  const double airy_c1 = z1 * std::pow(4.0 * M_PI * std::sqrt(2.0), -2.0 / 3.0);

  // 1. Montgomery minimum ------------------------------------------------
  criterion(1, "Montgomery minimum (zeta0, nu_Mo) = (0.3467, 0.5698) +- 2e-3",
            [&](bool& pass) {
              auto band = montgomery_band(1, -0.5, 1.5);
              const BandSample m = band_minimize(band, -0.5, 1.5, 1e-7);
              pass = std::abs(m.min_parameter - 0.3467) <= 2e-3 &&
                     std::abs(m.min_value - 0.5698) <= 2e-3 &&
                     m.min_value >= 0.5;
              return "zeta0=" + fmt(m.min_parameter) +
                     " nu_Mo=" + fmt(m.min_value);
            });

  // 2. de Gennes identities ----------------------------------------------
  criterion(2, "de Gennes identities (Theta0 = zeta0^2, FH, virial, WKB)",
            [&](bool& pass) {
              const DeGennesConstants c = degennes_constants();
              bool ok = std::abs(c.theta0 - c.zeta0 * c.zeta0) <= 1e-5 * c.theta0;

              const Grid1D g = gridpolicy::de_gennes(0.0);
              const double nu0 = model_lowest(DeGennes{0.0}, g);
              ok = ok && std::abs(nu0 - 1.0) <= 1e-4;

              std::uint64_t st = 42;
              double worst_fh = 0.0;
              for (int i = 0; i < 5; ++i) {
                const double z = 1.0 + magspec::detail::runif(st);
                worst_fh = std::max(
                    worst_fh, feynman_hellmann_report(z, 2500).fh_residual);
              }
              ok = ok && worst_fh <= 1e-4;

              const FHReport rz = feynman_hellmann_report(c.zeta0, 3000, true);
              ok = ok && std::abs(rz.kinetic - 0.5 * c.theta0) <= 1e-4 &&
                   std::abs(rz.potential - 0.5 * c.theta0) <= 1e-4;
              const double wkb =
                  std::abs(0.5 * c.nu2 - 3.0 * c.c1 * std::sqrt(c.theta0));
              ok = ok && wkb <= 1e-3;
              pass = ok;
              return "theta0=" + fmt(c.theta0) + " zeta0=" + fmt(c.zeta0) +
                     " FHmax=" + fmt(worst_fh) + " wkb=" + fmt(wkb);
            });

  // 3. Broken Montgomery --------------------------------------------------
  criterion(3, "broken-Montgomery slice minimum and Neumann comparison",
            [&](bool& pass) {
              auto slice = [](double x) {
                return broken_band_value(FiberDomain::HalfLineNeumann, x, 0.0,
                                         1500, 12.0, true);
              };
              const BandSample m = band_minimize(slice, 0.4, 1.3, 1e-6);
              bool ok = m.min_value <= 0.33227 + 2e-3 &&
                        std::abs(m.min_parameter - 0.827) <= 0.01;

              // 5 x 5 grid: full-line band dominates min of the Neumann pair
              double worst = -1e300;
              std::vector<double> xs{0.4, 0.6, 0.8, 1.0, 1.2};
              std::vector<double> xis{-0.6, -0.3, 0.0, 0.3, 0.6};
              std::vector<double> gap(25);
              parallel_for(25, [&](int idx) {
                const double x = xs[idx / 5], xi = xis[idx % 5];
                const double line =
                    broken_band_value(FiberDomain::FullLine, x, xi, 1200, 12.0, true);
                const double np = broken_band_value(FiberDomain::HalfLineNeumann,
                                                    x, xi, 1200, 12.0, true);
                const double nm = broken_band_value(FiberDomain::HalfLineNeumann,
                                                    x, -xi, 1200, 12.0, true);
                gap[idx] = std::min(np, nm) - line;  // must stay <= 5e-4
              });
              for (double gv : gap) worst = std::max(worst, gv);
              ok = ok && worst <= 5e-4;
              pass = ok;
              return "min=" + fmt(m.min_value) + " at x=" + fmt(m.min_parameter) +
                     " worst_gap=" + fmt(worst);
            });

  // 4. Laguerre / cone levels ----------------------------------------------
  criterion(4, "Laguerre cone levels vs (4n-1)/2^{5/2}", [&](bool& pass) {
    const Grid1D g = gridpolicy::laguerre(2000);
    const auto e = model_eigenvalues(Laguerre{}, g, 3);
    const double base = std::pow(2.0, -2.5);
    const double r1 = std::abs(e[0] - 3.0 * base) / (3.0 * base);
    const double r2 = std::abs(e[1] - 7.0 * base) / (7.0 * base);
    const double r3 = std::abs(e[2] - 11.0 * base) / (11.0 * base);
    pass = r1 <= 1e-4 && r2 <= 5e-4 && r3 <= 1e-3;
    return "rel errors " + fmt(r1) + ", " + fmt(r2) + ", " + fmt(r3);
  });

  // 5. Airy-type expansions -------------------------------------------------
  criterion(5, "Airy expansions: BO-triangle and 2D triangle fits",
            [&](bool& pass) {
              const std::vector<double> hs = {0.04, 0.02, 0.01, 0.005};
              HSweep bo;
              bo.h = hs;
              bo.lambda.resize(hs.size());
              bo.residual.assign(hs.size(), 1e-10);
              parallel_for(static_cast<int>(hs.size()), [&](int i) {
                bo.lambda[i] = sweeps::bo_triangle_level(hs[i]).first;
              });
              // expansion in powers h^{2j/3}: exponents {0, 2/3, 4/3}
              const AsymptoticFit fb =
                  fit_expansion(bo, {0.0, 2.0 / 3.0, 4.0 / 3.0});
              const double bo_c0 = fb.coefficients[0], bo_c1 = fb.coefficients[1];
              bool ok = std::abs(bo_c0 - 0.125) <= 1e-3 &&
                        std::abs(bo_c1 - airy_c1) <= 0.02 * airy_c1;
              // slope diagnostic tracks the leading correction exponent
              ok = ok && std::abs(fb.slope_diagnostic - 2.0 / 3.0) <=
                             0.1 * (2.0 / 3.0);

              HSweep tri;
              tri.h = hs;
              tri.lambda.resize(hs.size());
              tri.residual.assign(hs.size(), 1e-8);
              parallel_for(static_cast<int>(hs.size()), [&](int i) {
                tri.lambda[i] = triangle_rich(hs[i], 512);
              });
              const AsymptoticFit ft =
                  fit_expansion(tri, {0.0, 2.0 / 3.0, 4.0 / 3.0});
              const double t_c0 = ft.coefficients[0], t_c1 = ft.coefficients[1];
              ok = ok && std::abs(t_c0 - 0.125) <= 0.03 * 0.125 &&
                   std::abs(t_c1 - airy_c1) <= 0.03 * airy_c1;
              pass = ok;
              return "BO (c0, c1) = (" + fmt(bo_c0) + ", " + fmt(bo_c1) +
                     "), 2D (" + fmt(t_c0) + ", " + fmt(t_c1) + "), target c1 " +
                     fmt(airy_c1);
            });

  // 6. delta interaction -----------------------------------------------------
  criterion(6, "delta wells: Lambert vs secular, effective fit, counting",
            [&](bool& pass) {
              double worst = 0.0;
              for (int i = 0; i <= 80; ++i) {
                const double x = 0.1 + (8.0 - 0.1) * i / 80.0;
                const DeltaPair a = delta_spectrum(x);
                const DeltaPair b = delta_oracle(x);
                worst = std::max({worst, std::abs(a.mu1 - b.mu1),
                                  std::abs(a.mu2 - b.mu2)});
              }
              bool ok = worst <= 1e-10;

              // effective-model fit of (lambda_1 + 1) / h^{2/3}
              const std::vector<double> hs = {0.004, 0.002, 0.001, 0.0005, 0.00025};
              HSweep sw;
              sw.h = hs;
              sw.lambda.resize(hs.size());
              sw.residual.assign(hs.size(), 1e-10);
              parallel_for(static_cast<int>(hs.size()), [&](int i) {
                sw.lambda[i] = sweeps::delta_effective_level(hs[i]).first;
              });
              const AsymptoticFit fit =
                  fit_expansion(sw, {0.0, 2.0 / 3.0, 1.0, 4.0 / 3.0});
              const double target = std::pow(2.0, 2.0 / 3.0) * z1;
              const double rel = std::abs(fit.coefficients[1] - target) / target;
              ok = ok && rel <= 0.03 &&
                   std::abs(fit.slope_diagnostic - 2.0 / 3.0) <= 0.1 * (2.0 / 3.0);

              // counting integral against the Weyl quadrature path
              double worst_int = 0.0;
              for (double c0 : {0.0, 0.1, 0.3}) {
                const double direct = delta_counting_integral(c0);
                auto mu_hat = [](double x) {
                  return x < 0.0 ? 1.0 : delta_spectrum(x).mu1;
                };
                const double via = weyl_estimate(mu_hat, -0.25 - c0, 1.0, 1e-12,
                                                 -1.0, 60.0) * M_PI;
                worst_int = std::max(worst_int, std::abs(direct - via) / direct);
              }
              ok = ok && worst_int <= 1e-6;
              pass = ok;
              return "lambert_vs_oracle=" + fmt(worst) + " fit_rel=" + fmt(rel) +
                     " counting_rel=" + fmt(worst_int);
            });

  // 7. Lu-Pan -----------------------------------------------------------------
  criterion(7, "Lu-Pan: paper value, small-angle slope, BO lower bound",
            [&](bool& pass) {
              const double lam07 =
                  lupan_rich(0.7 * M_PI / 2.0, 80.0, 40.0, 480, 240);
              bool ok = std::abs(lam07 - 0.99445407220) <= 2e-3;

              const DeGennesConstants c = degennes_constants();
              const double lam_small = lupan_rich(0.05, 60.0, 16.0, 480, 192);
              const double slope = (lam_small - c.theta0) / 0.05;
              const double gamma1 = std::sqrt(0.5 * c.nu2);
              ok = ok && std::abs(slope - gamma1) <= 0.05 * gamma1;

              // BO reduction on the matched box is a lower bound
              const double theta = 0.7 * M_PI / 2.0, S = 80.0, T = 40.0;
              FilterOpts fo;
              fo.block = 3;
              fo.tol = 1e-7;
              fo.max_matvec = 6000000;
              const Spectrum raw = filtered_smallest(
                  build_lupan(theta, S, T, 480, 240, 64.0), 1, fo);
              const double ct = std::cos(theta), st = std::sin(theta);
              Grid1D sg{-S, S, 479, BC::Dirichlet, BC::Dirichlet, Layout::Vertex};
              auto fiber = [&](double s) {
                Grid1D gt{0.0, T, 400, BC::Neumann, BC::Dirichlet, Layout::Vertex};
                return assemble_sturm_liouville(gt, [=](double t) {
                  const double u = t * ct - s * st;
                  return u * u;
                });
              };
              const BOReduction bo = bo_reduce(fiber, sg, 1.0);
              const double lam_bo =
                  tridiag_eigenvalues(bo.effective, 1, 1e-10).eigenvalues[0];
              ok = ok && raw.eigenvalues[0] >= lam_bo - 5e-3;
              pass = ok;
              return "lam(0.7)=" + fmt(lam07) + " slope=" + fmt(slope) +
                     " (target " + fmt(gamma1) + ") BO=" + fmt(lam_bo);
            });

  // 8. Magnetic well ------------------------------------------------------------
  criterion(
      8, "magnetic well: lambda1/h -> min B and level spacing -> 2 h^2",
      [&](bool& pass) {
        const std::vector<double> hs = {0.1, 0.07, 0.05};
        std::vector<double> l1h(hs.size()), sp(hs.size());
        parallel_for(static_cast<int>(hs.size()), [&](int i) {
          const auto [a, b] = well_levels_rich(hs[i]);
          l1h[i] = a / hs[i];
          sp[i] = (b - a) / (hs[i] * hs[i]);
        });
        // linear-in-h extrapolation over the pinned sweep; the O(h)
        // correction (the unevaluated c0 constant) is genuinely larger than
        // the stated window at h = 0.05 itself
        auto intercept = [&](const std::vector<double>& y) {
          double sh = 0, shh = 0, sy = 0, shy = 0;
          const int m = static_cast<int>(hs.size());
          for (int i = 0; i < m; ++i) {
            sh += hs[i];
            shh += hs[i] * hs[i];
            sy += y[i];
            shy += hs[i] * y[i];
          }
          return (shh * sy - sh * shy) / (m * shh - sh * sh);
        };
        const double lim1 = intercept(l1h);
        const double lim2 = intercept(sp);
        pass = std::abs(lim1 - 1.0) <= 0.08 && std::abs(lim2 - 2.0) <= 0.2;
        return "lambda1/h -> " + fmt(lim1) + " (at h=0.05: " + fmt(l1h[2]) +
               "), spacing/h^2 -> " + fmt(lim2) + " (at h=0.05: " + fmt(sp[2]) +
               ")";
      });

  // 9. Quantized Hessian -----------------------------------------------------
  criterion(
      9, "quantized Hessian level vs sqrt(nu_Mo nu''(zeta0)/3)",
      [&](bool& pass) {
        MontgomeryBandCache cache(1, -1.0, 2.0, 161, 2000);
        auto band = [&](double z) { return cache.nu_exact(z); };
        const BandSample m = band_minimize(band, -0.2, 1.0, 1e-7);
        const double nu2 = band_second_derivative(band, m.min_parameter);

        auto gamma = [](double x) { return 1.0 + x * x; };
        auto mu = [&](double x, double xi) {
          return cache.scaled(gamma, x, xi, true);
        };
        // centered second differences, step 1e-2, one Richardson halving
        auto hess = [&](double step) {
          const double f0 = mu(0.0, m.min_parameter);
          const double hxx = (mu(step, m.min_parameter) - 2.0 * f0 +
                              mu(-step, m.min_parameter)) / (step * step);
          const double hxixi =
              (mu(0.0, m.min_parameter + step) - 2.0 * f0 +
               mu(0.0, m.min_parameter - step)) / (step * step);
          const double hxxi =
              (mu(step, m.min_parameter + step) - mu(step, m.min_parameter - step) -
               mu(-step, m.min_parameter + step) + mu(-step, m.min_parameter - step)) /
              (4.0 * step * step);
          return std::array<double, 3>{hxx, hxixi, hxxi};
        };
        const auto h1 = hess(1e-2), h2 = hess(5e-3);
        std::array<double, 3> H;
        for (int i = 0; i < 3; ++i) H[i] = (4.0 * h2[i] - h1[i]) / 3.0;

        const double level = quantized_hessian_levels(H[0], H[1], H[2], 1);
        const double target = std::sqrt(m.min_value * nu2 / 3.0);
        pass = std::abs(level - target) <= 1e-3;
        return "level=" + fmt(level) + " target=" + fmt(target) +
               " Hxx=" + fmt(H[0]) + " Hxixi=" + fmt(H[1]) +
               " Hxxi=" + fmt(H[2]);
      });

  // 10. Counting ----------------------------------------------------------------
  criterion(10, "counting: bracketing sandwich and Weyl vs Sturm at h = 2e-3",
            [&](bool& pass) {
              auto Vb = [](double x) { return x * x / (1.0 + x * x); };
              const double h = 2e-3, E0 = 0.5;
              const double w = weyl_estimate(Vb, E0, h, 1e-11, -6.0, 6.0);
              Grid1D g{-8.0, 8.0, 16000, BC::Dirichlet, BC::Dirichlet,
                       Layout::Vertex};
              CustomPotential cp;
              cp.V = Vb;
              cp.h_s = h * h;
              const int exact = count_below(build_custom(cp, g), E0);
              bool ok = std::abs(w - exact) / exact <= 0.03;

              auto Vh = [](double x) { return x * x; };
              std::vector<double> cuts;
              for (int i = 0; i <= 8; ++i) cuts.push_back(-1.6 + 3.2 * i / 8.0);
              const BracketedCounts bc = bracketing_counts(Vh, 0.05, 1.0, cuts);
              ok = ok && bc.lower <= bc.exact && bc.exact <= bc.upper &&
                   bc.exact == 10;
              pass = ok;
              return "weyl=" + fmt(w) + " exact=" + std::to_string(exact) +
                     " bracket " + std::to_string(bc.lower) + " <= " +
                     std::to_string(bc.exact) + " <= " + std::to_string(bc.upper);
            });

  // 11. Property suite ------------------------------------------------------------
  criterion(11, "property suite (selftest hard assertions)", [&](bool& pass) {
    pass = true;
    std::string bad;
    for (const auto& c : selftest::run_all(42)) {
      if (!c.pass) {
        pass = false;
        bad += " " + c.name;
      }
    }
    return bad.empty() ? std::string("all checks green") : ("failing:" + bad);
  });

  if (g_failures) std::printf("%d criterion(s) FAILED\n", g_failures);
  else std::printf("all 11 criteria passed\n");
  return g_failures == 0 ? 0 : 1;
}
