#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#ifndef MAGSPEC_CLI_PATH
#define MAGSPEC_CLI_PATH "./magspec"
#endif

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string out_path = "cli_test_stdout.txt";
  const std::string cmd =
      std::string(MAGSPEC_CLI_PATH) + " " + args + " > " + out_path + " 2>&1";
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(rc);
  std::ifstream in(out_path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("no-such-subcommand").exit_code == 2);
  CHECK(run("band --model nonsense --range 0,1 --points 9").exit_code == 2);
  CHECK(run("band --model degennes --range 0,1 --points 3").exit_code == 2);
}

TEST_CASE("delta table agrees to 1e-10 and is deterministic") {
  const RunResult a = run("delta --scan 0.2,6,25");
  REQUIRE(a.exit_code == 0);
  CHECK(a.out.find("max_disagreement=") != std::string::npos);
  // parse the trailing disagreement value
  const auto pos = a.out.rfind('=');
  const double worst = std::stod(a.out.substr(pos + 1));
  CHECK(worst <= 1e-10);
  const RunResult b = run("delta --scan 0.2,6,25");
  CHECK(a.out == b.out);  // byte-for-byte determinism
}

TEST_CASE("single-point delta query") {
  const RunResult r = run("delta --x 2");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("mu1_closed") != std::string::npos);
}

TEST_CASE("band sweep CSV with minimization") {
  const RunResult r =
      run("band --model montgomery:1 --range -1,2 --points 31 --minimize "
          "--out cli_band.csv");
  REQUIRE(r.exit_code == 0);
  // last line: min <zeta> <nu>
  const auto pos = r.out.rfind("min ");
  REQUIRE(pos != std::string::npos);
  std::istringstream tail(r.out.substr(pos + 4));
  double zeta = 0.0, nu = 0.0;
  tail >> zeta >> nu;
  CHECK_THAT(zeta, Catch::Matchers::WithinAbs(0.3467, 2e-3));
  CHECK_THAT(nu, Catch::Matchers::WithinAbs(0.5698, 2e-3));

  std::ifstream csv("cli_band.csv", std::ios::binary);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "param,value,residual");
  int rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == 31);

  // deterministic byte-for-byte under a fixed seed
  const RunResult again =
      run("band --model montgomery:1 --range -1,2 --points 31 --minimize "
          "--out cli_band2.csv");
  std::ifstream f1("cli_band.csv", std::ios::binary), f2("cli_band2.csv", std::ios::binary);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());
}

TEST_CASE("constants subcommand reports passing identities") {
  const RunResult r = run("constants degennes");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("theta0_eq_zeta0sq=pass") != std::string::npos);
  CHECK(r.out.find("wkb_identity=pass") != std::string::npos);
  CHECK(r.out.find("theta0=0.59") != std::string::npos);
}

TEST_CASE("count subcommand with bracketing") {
  const RunResult r = run(
      "count --potential builtin:harmonic --h 0.05 --E 1 --bracket 8 --range "
      "-1.6,1.6");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("count_exact=10") != std::string::npos);
  CHECK(r.out.find("weyl_estimate=") != std::string::npos);
  CHECK(r.out.find("count_lower=") != std::string::npos);
}

TEST_CASE("sweep subcommand fits the BO-triangle expansion") {
  const RunResult r = run(
      "sweep --builder bo-triangle --hs 0.04,0.02,0.01,0.005 --n 1 "
      "--fit 0,0.6666666666666666,1.3333333333333333 --out cli_sweep.csv "
      "--fit-out cli_fit.csv");
  REQUIRE(r.exit_code == 0);
  const auto pos = r.out.find("c0=");
  REQUIRE(pos != std::string::npos);
  const double c0 = std::stod(r.out.substr(pos + 3));
  CHECK_THAT(c0, Catch::Matchers::WithinAbs(0.125, 1e-3));
  CHECK(r.out.find("slope_diagnostic=") != std::string::npos);
  std::ifstream fit_csv("cli_fit.csv", std::ios::binary);
  std::string fit_header;
  std::getline(fit_csv, fit_header);
  CHECK(fit_header == "exponent,coefficient");
}

TEST_CASE("config file provides defaults that flags override") {
  {
    std::ofstream cfg("cli_cfg.ini", std::ios::binary);
    cfg << "[delta]\nx=3\n";
  }
  const RunResult r = run("delta --config cli_cfg.ini");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("\n3,") != std::string::npos);
  const RunResult over = run("delta --config cli_cfg.ini --x 2");
  CHECK(over.out.find("\n2,") != std::string::npos);
}
