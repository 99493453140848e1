// Command-line front end: band sweeps, spectral constants, h-sweeps with
// asymptotic fits, eigenvalue counting, band-surface minimization, the
// delta-interaction table, and the invariant selftest.
//
// Exit codes: 0 ok, 2 usage error, 3 solver non-convergence, 4 invariant
// violation. Machine-readable failures are printed to stderr as "ERR: ...".

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include <magspec/counting.hpp>
#include <magspec/csv.hpp>
#include <magspec/domains2d.hpp>
#include <magspec/selftest.hpp>

namespace {

using namespace magspec;

std::uint64_t global_seed() {
  if (const char* env = std::getenv("MAGSPEC_SEED"))
    return static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
  return 42;
}

template <class F>
void parallel_for(int n, int jobs, F&& f) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mu;
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < n;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::ostream& open_out(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path, std::ios::binary);  // LF endings everywhere
  if (!file) throw std::invalid_argument("cannot open output file " + path);
  return file;
}

// ---------------------------------------------------------------------------

int run_band(const std::string& model, double lo, double hi, int npts,
             bool minimize, double xi, const std::string& out, int jobs) {
  std::function<double(double)> band;
  if (model == "degennes") {
    band = de_gennes_band(hi);
  } else if (model.rfind("montgomery:", 0) == 0) {
    const int k = std::stoi(model.substr(11));
    band = montgomery_band(k, lo, hi);
  } else if (model == "broken:neumann" || model == "broken:line") {
    const FiberDomain dom = model == "broken:neumann"
                                ? FiberDomain::HalfLineNeumann
                                : FiberDomain::FullLine;
    band = [dom, xi](double x) { return broken_band_value(dom, x, xi); };
  } else {
    throw std::invalid_argument("unknown band model " + model);
  }

  BandSample s;
  s.parameter.resize(npts);
  s.value.resize(npts);
  s.residual.assign(npts, 1e-10);
  parallel_for(npts, jobs, [&](int i) {
    s.parameter[i] = lo + (hi - lo) * i / (npts - 1);
    s.value[i] = band(s.parameter[i]);
  });

  std::ofstream file;
  std::ostream& os = open_out(file, out);
  csv::write_band(os, s);
  if (minimize) {
    BandSample m = band_minimize(band, lo, hi, 1e-7);
    std::cout << "min " << csv::num(m.min_parameter) << ' '
              << csv::num(m.min_value)
              << (m.flat_band ? " flat_band" : "") << '\n';
  }
  return 0;
}

int run_constants() {
  DeGennesConstants c = degennes_constants();
  auto kv = [](const std::string& k, double v) {
    std::cout << k << '=' << csv::num(v) << '\n';
  };
  kv("theta0", c.theta0);
  kv("zeta0", c.zeta0);
  kv("u0sq", c.u0sq);
  kv("c1", c.c1);
  kv("nu_second", c.nu2);
  std::cout << "theta0_eq_zeta0sq="
            << (std::abs(c.theta0 - c.zeta0 * c.zeta0) <= 1e-5 * c.theta0
                    ? "pass"
                    : "fail")
            << '\n';
  std::cout << "wkb_identity="
            << (std::abs(0.5 * c.nu2 - 3.0 * c.c1 * std::sqrt(c.theta0)) <= 1e-3
                    ? "pass"
                    : "fail")
            << '\n';
  return 0;
}

// 2D sweep evaluators used by `sweep` (Richardson over a grid pair).
double triangle_level_rich(double h, int M, std::uint64_t seed) {
  FilterOpts fo;
  fo.block = 2;
  fo.tol = 1e-8;
  fo.max_matvec = 700000;
  fo.seed = seed;
  Spectrum fine = filtered_smallest(build_triangle(h, M), 1, fo);
  fo.max_matvec = 350000;
  Spectrum coarse = filtered_smallest(build_triangle(h, M / 2), 1, fo);
  if (!fine.converged || !coarse.converged)
    throw SolverError("triangle2d: unconverged at h=" + std::to_string(h));
  return (4.0 * fine.eigenvalues[0] - coarse.eigenvalues[0]) / 3.0;
}

double lupan_level_rich(double theta, std::uint64_t seed) {
  const double S = 80.0, T = 40.0;
  FilterOpts fo;
  fo.block = 3;
  fo.tol = 1e-7;
  fo.seed = seed;
  fo.max_matvec = 3000000;
  Spectrum fine = filtered_smallest(build_lupan(theta, S, T, 480, 240, 64.0), 1, fo);
  Spectrum coarse =
      filtered_smallest(build_lupan(theta, S, T, 240, 120, 64.0), 1, fo);
  if (!fine.converged || !coarse.converged)
    throw SolverError("lupan: unconverged at theta=" + std::to_string(theta));
  return (4.0 * fine.eigenvalues[0] - coarse.eigenvalues[0]) / 3.0;
}

double well_level_rich(double h, int index, std::uint64_t seed) {
  FilterOpts fo;
  fo.block = 2 * index + 4;
  fo.tol = 1e-9;
  fo.seed = seed;
  fo.max_matvec = 4000000;
  auto level = [&](int n) {
    Spectrum s =
        filtered_smallest(hermitian_embed(build_magnetic_well(h, 2.0, n)),
                          2 * index, fo);
    if (!s.converged) throw SolverError("well: unconverged");
    Spectrum d = dedup_spectrum(s, 1e-6);
    if (static_cast<int>(d.eigenvalues.size()) < index)
      throw SolverError("well: dedup lost levels");
    return d.eigenvalues[index - 1];
  };
  const double c = level(120), f = level(240);
  return (4.0 * f - c) / 3.0;
}

int run_sweep(const std::string& builder, const std::vector<double>& hs,
              int index, const std::vector<double>& exps, int M,
              const std::string& out, const std::string& fit_out, int jobs,
              std::uint64_t seed) {
  HSweep sweep;
  sweep.h = hs;
  sweep.index = index;
  sweep.validate();
  sweep.lambda.resize(hs.size());
  sweep.residual.assign(hs.size(), 1e-9);

  std::function<double(double)> eval;
  if (builder == "bo-triangle") {
    eval = [index](double h) { return sweeps::bo_triangle_level(h, index).first; };
  } else if (builder == "bo-guide") {
    eval = [index](double h) { return sweeps::bo_guide_level(h, index).first; };
  } else if (builder == "delta-eff") {
    eval = [index](double h) { return sweeps::delta_effective_level(h, index).first; };
  } else if (builder == "triangle2d") {
    eval = [M, seed](double h) { return triangle_level_rich(h, M, seed); };
  } else if (builder == "lupan") {
    eval = [seed](double th) { return lupan_level_rich(th, seed); };
  } else if (builder == "well") {
    eval = [index, seed](double h) { return well_level_rich(h, index, seed); };
  } else {
    throw std::invalid_argument("unknown sweep builder " + builder);
  }

  parallel_for(static_cast<int>(hs.size()), jobs,
               [&](int i) { sweep.lambda[i] = eval(hs[i]); });

  std::ofstream file;
  std::ostream& os = open_out(file, out);
  csv::write_sweep(os, sweep);
  if (!exps.empty()) {
    AsymptoticFit fit = fit_expansion(sweep, exps);
    if (!fit_out.empty()) {
      std::ofstream ff(fit_out, std::ios::binary);
      csv::write_fit(ff, fit);
    }
    for (std::size_t j = 0; j < exps.size(); ++j)
      std::cout << "c" << j << '=' << csv::num(fit.coefficients[j])
                << " (h^" << csv::num(exps[j]) << ")\n";
    std::cout << "rms_residual=" << csv::num(fit.rms_residual) << '\n';
    std::cout << "condition=" << csv::num(fit.condition) << '\n';
    std::cout << "slope_diagnostic=" << csv::num(fit.slope_diagnostic) << '\n';
  }
  return 0;
}

std::function<double(double)> named_potential(const std::string& name) {
  if (name == "builtin:harmonic") return [](double x) { return x * x; };
  if (name == "builtin:bounded")
    return [](double x) { return x * x / (1.0 + x * x); };
  if (name == "builtin:delta-eff")
    return [](double x) { return x < 0.0 ? 1.0 : delta_spectrum(x).mu1; };
  if (name.rfind("file:", 0) == 0) {
    std::ifstream in(name.substr(5));
    if (!in) throw std::invalid_argument("cannot open potential file");
    std::vector<double> xs, vs;
    double x, v;
    while (in >> x >> v) {
      xs.push_back(x);
      vs.push_back(v);
    }
    if (xs.size() < 4)
      throw std::invalid_argument("potential file needs >= 4 samples");
    auto spline = std::make_shared<magspec::detail::Pchip>(xs, vs);
    return [spline](double t) { return (*spline)(t); };
  }
  throw std::invalid_argument("unknown potential " + name);
}

int run_count(const std::string& pot, double h, double E, int bracket_cells,
              double lo, double hi) {
  auto V = named_potential(pot);
  const double w = weyl_estimate(V, E, h, 1e-10, lo, hi);
  std::cout << "weyl_estimate=" << csv::num(w) << '\n';
  std::vector<double> cuts;
  const int cells = std::max(1, bracket_cells);
  for (int i = 0; i <= cells; ++i) cuts.push_back(lo + (hi - lo) * i / cells);
  BracketedCounts bc = bracketing_counts(V, h, E, cuts);
  std::cout << "count_exact=" << bc.exact << '\n';
  if (bracket_cells > 0) {
    std::cout << "count_lower=" << bc.lower << '\n';
    std::cout << "count_upper=" << bc.upper << '\n';
    if (!(bc.lower <= bc.exact && bc.exact <= bc.upper))
      throw InvariantViolation("bracketing violated: lower <= exact <= upper");
  }
  return 0;
}

int run_surface(const std::string& domain, double x0, double x1, double xi0,
                double xi1, int gx, int gxi, const std::string& out) {
  const FiberDomain dom =
      domain == "neumann" ? FiberDomain::HalfLineNeumann : FiberDomain::FullLine;
  SurfaceMin sm = band_surface_min(dom, x0, x1, xi0, xi1, gx, gxi);
  std::ofstream file;
  std::ostream& os = open_out(file, out);
  csv::write_surface(os, sm);
  std::cout << "min " << csv::num(sm.x) << ' ' << csv::num(sm.xi) << ' '
            << csv::num(sm.value) << '\n';
  std::cout << "hessian_estimate " << csv::num(sm.hessian[0]) << ' '
            << csv::num(sm.hessian[1]) << ' ' << csv::num(sm.hessian[2]) << '\n';
  if (sm.on_boundary) std::cout << "warning minimum may lie outside region\n";
  return 0;
}

int run_delta(double x, const std::vector<double>& scan) {
  std::vector<double> xs;
  if (!scan.empty()) {
    if (scan.size() != 3) throw std::invalid_argument("--scan needs a,b,N");
    const int n = static_cast<int>(scan[2]);
    for (int i = 0; i < n; ++i)
      xs.push_back(scan[0] + (scan[1] - scan[0]) * i / std::max(1, n - 1));
  } else {
    xs.push_back(x);
  }
  csv::write_row(std::cout, {"x", "mu1_closed", "mu1_oracle", "mu2_closed",
                             "mu2_oracle"});
  double worst = 0.0;
  for (double t : xs) {
    DeltaPair a = delta_spectrum(t);
    DeltaPair b = delta_oracle(t);
    csv::write_row(std::cout, {csv::num(t), csv::num(a.mu1), csv::num(b.mu1),
                               csv::num(a.mu2), csv::num(b.mu2)});
    worst = std::max({worst, std::abs(a.mu1 - b.mu1), std::abs(a.mu2 - b.mu2)});
  }
  std::cout << "max_disagreement=" << csv::num(worst) << '\n';
  return 0;
}

int run_selftest(std::uint64_t seed) {
  bool all = true;
  for (const auto& c : magspec::selftest::run_all(seed)) {
    std::cout << c.name << ' ' << (c.pass ? "pass" : "FAIL") << " (" << c.detail
              << ")\n";
    all = all && c.pass;
  }
  if (!all) throw InvariantViolation("selftest failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral toolkit for semiclassical magnetic model operators"};
  app.set_help_flag("--help", "print help");  // frees -h / --h for options
  app.fallthrough();  // lets --config / --jobs appear after the subcommand
  app.set_config("--config", "", "TOML-like key=value file; subcommand keys in [subcommand] sections");
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
  app.add_option("--jobs", jobs, "worker pool size for sweeps");

  // band
  auto* band = app.add_subcommand("band", "sample a band function");
  std::string band_model = "degennes", band_range = "-1,1", band_out;
  int band_points = 61;
  bool band_min = false;
  double band_xi = 0.0;
  band->add_option("--model", band_model, "degennes|montgomery:k|broken:domain");
  band->add_option("--range", band_range, "a,b");
  band->add_option("--points", band_points)->check(CLI::Range(9, 100000));
  band->add_flag("--minimize", band_min);
  band->add_option("--xi", band_xi, "fixed xi for broken:* models");
  band->add_option("--out", band_out, "CSV output path (default stdout)");

  // constants
  auto* consts = app.add_subcommand("constants", "spectral constants");
  std::string which = "degennes";
  consts->add_option("name", which);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "h-sweep with asymptotic fit");
  std::string sw_builder = "bo-triangle", sw_hs = "0.04,0.02,0.01,0.005",
              sw_fit, sw_out, sw_fit_out;
  int sw_n = 1, sw_M = 128;
  sweep->add_option("--builder", sw_builder,
                    "bo-triangle|bo-guide|delta-eff|triangle2d|lupan|well");
  sweep->add_option("--hs", sw_hs, "decreasing h list");
  sweep->add_option("--n", sw_n, "eigenvalue index");
  sweep->add_option("--fit", sw_fit, "exponent list");
  sweep->add_option("--M", sw_M, "triangle2d resolution");
  sweep->add_option("--out", sw_out);
  sweep->add_option("--fit-out", sw_fit_out, "CSV output for the fitted coefficients");

  // count
  auto* count = app.add_subcommand("count", "eigenvalue counting");
  count->set_help_flag("--help", "print help");
  std::string ct_pot = "builtin:harmonic", ct_range = "-3,3";
  double ct_h = 0.05, ct_E = 1.0;
  int ct_bracket = 0;
  count->add_option("--potential", ct_pot, "builtin:NAME or file:PATH");
  count->add_option("--h", ct_h);
  count->add_option("--E", ct_E);
  count->add_option("--bracket", ct_bracket, "partition cells");
  count->add_option("--range", ct_range, "bounding interval a,b");

  // surface
  auto* surface = app.add_subcommand("surface", "band surface minimization");
  std::string sf_domain = "neumann", sf_x = "0.3,1.4", sf_xi = "-0.6,0.6",
              sf_grid = "9x9", sf_out;
  surface->add_option("--domain", sf_domain, "neumann|line");
  surface->add_option("--xrange", sf_x);
  surface->add_option("--xirange", sf_xi);
  surface->add_option("--grid", sf_grid, "GxG coarse scan");
  surface->add_option("--out", sf_out);

  // delta
  auto* delta = app.add_subcommand("delta", "delta-well closed form vs oracle");
  double dl_x = 1.0;
  std::string dl_scan;
  delta->add_option("--x", dl_x);
  delta->add_option("--scan", dl_scan, "a,b,N");

  auto* selftest = app.add_subcommand("selftest", "run the invariant suite");
  (void)selftest;

  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "ERR: " << e.what() << '\n';
    return 2;
  }

  const std::uint64_t seed = global_seed();
  try {
    if (band->parsed()) {
      auto r = parse_list(band_range);
      if (r.size() != 2) throw std::invalid_argument("--range needs a,b");
      return run_band(band_model, r[0], r[1], band_points, band_min, band_xi,
                      band_out, jobs);
    }
    if (consts->parsed()) {
      if (which != "degennes")
        throw std::invalid_argument("unknown constants set " + which);
      return run_constants();
    }
    if (sweep->parsed()) {
      return run_sweep(sw_builder, parse_list(sw_hs), sw_n,
                       sw_fit.empty() ? std::vector<double>{} : parse_list(sw_fit),
                       sw_M, sw_out, sw_fit_out, jobs, seed);
    }
    if (count->parsed()) {
      auto r = parse_list(ct_range);
      if (r.size() != 2) throw std::invalid_argument("--range needs a,b");
      return run_count(ct_pot, ct_h, ct_E, ct_bracket, r[0], r[1]);
    }
    if (surface->parsed()) {
      auto rx = parse_list(sf_x), rxi = parse_list(sf_xi);
      const auto xpos = sf_grid.find('x');
      if (rx.size() != 2 || rxi.size() != 2 || xpos == std::string::npos)
        throw std::invalid_argument("surface: bad ranges or grid");
      return run_surface(sf_domain, rx[0], rx[1], rxi[0], rxi[1],
                         std::stoi(sf_grid.substr(0, xpos)),
                         std::stoi(sf_grid.substr(xpos + 1)), sf_out);
    }
    if (delta->parsed()) {
      return run_delta(dl_x,
                       dl_scan.empty() ? std::vector<double>{} : parse_list(dl_scan));
    }
    return run_selftest(seed);
  } catch (const InvariantViolation& e) {
    std::cerr << "ERR: " << e.what() << '\n';
    return 4;
  } catch (const SolverError& e) {
    std::cerr << "ERR: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "ERR: " << e.what() << '\n';
    return 2;
  }
}
