// End-to-end checks of the command-line tool run as a subprocess.
// argv[1] = path to the dra binary, argv[2] = directory with model configs.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string g_bin, g_configs;
int g_failures = 0;

int run(const std::string& args) {
  const std::string cmd = g_bin + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void expect(bool ok, const std::string& what) {
  if (!ok) {
    ++g_failures;
    std::cerr << "FAILED: " << what << "\n";
  }
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("dra_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: test_cli <dra-binary> <config-dir>\n";
    return 2;
  }
  g_bin = argv[1];
  g_configs = argv[2];

  const std::string lgq = g_configs + "/lgq.json";
  const std::string merton = g_configs + "/merton.json";

  {
    const fs::path d = fresh_dir("check");
    expect(run("--out-dir " + d.string() + " check " + lgq) == 0,
           "check on the ergodic model exits 0");
    expect(fs::exists(d / "check_report.json"), "check writes its report");
    expect(fs::exists(d / "manifest_check.json"), "check writes a manifest");
  }
  expect(run("check " + merton) == 1,
         "check flags the non-coercive constant model with exit 1");

  {
    const fs::path bad = fs::temp_directory_path() / "dra_cli_bad.json";
    std::ofstream(bad) << "{ not json";
    expect(run("check " + bad.string()) == 2, "malformed JSON exits 2");
  }
  expect(run("check") == 2, "missing required argument exits 2");
  expect(run("frobnicate") == 2, "unknown subcommand exits 2");

  const fs::path chi_dir = fresh_dir("chi");
  {
    expect(run("--out-dir " + chi_dir.string() + " chi " + merton +
               " --force-oracle --gamma-min -8 --gamma-max -0.02 "
               "--points 200") == 0,
           "oracle chi curve exits 0");
    expect(fs::exists(chi_dir / "chi.csv"), "chi writes chi.csv");
    expect(fs::exists(chi_dir / "plot_chi.gp"), "chi writes a plot script");
    const std::string csv = slurp(chi_dir / "chi.csv");
    expect(csv.find("convexity_certified=true") != std::string::npos,
           "oracle curve is certified");
    expect(run("chi " + merton + " --points 1") == 2,
           "chi with a single point exits 2");
    expect(run("chi " + merton + " --gamma-max 0.5") == 2,
           "chi with gamma_max >= 0 exits 2");
  }

  {
    const fs::path d = fresh_dir("rate");
    expect(run("--out-dir " + d.string() + " rate --chi " +
               (chi_dir / "chi.csv").string() +
               " --kappa-min -0.01 --kappa-max 0.08 --points 10") == 0,
           "rate over a wide kappa range exits 0");
    const std::string csv = slurp(d / "rate.csv");
    expect(csv.find("-inf") != std::string::npos,
           "negative kappa row reports J = -inf");
    expect(csv.find("out-of-range") != std::string::npos,
           "kappa above chi'(0-) reports the out-of-range branch");
    expect(run("rate --chi " + (d / "missing.csv").string()) != 0,
           "rate on a missing curve fails");
  }

  {
    const fs::path d1 = fresh_dir("sim1");
    const fs::path d2 = fresh_dir("sim2");
    const std::string args = " simulate " + merton +
                             " --strategy zero --kappa 0.01 --T 10,20 "
                             "--paths 200 --seed 9";
    expect(run("--out-dir " + d1.string() + args) == 0,
           "zero-strategy simulate exits 0");
    expect(run("--out-dir " + d2.string() + args) == 0,
           "repeated simulate exits 0");
    expect(fs::exists(d1 / "sim.csv") && fs::exists(d1 / "slope.csv"),
           "simulate writes sim.csv and slope.csv");
    expect(slurp(d1 / "sim.csv") == slurp(d2 / "sim.csv"),
           "same seed gives byte-identical sim.csv");
    expect(slurp(d1 / "slope.csv") == slurp(d2 / "slope.csv"),
           "same seed gives byte-identical slope.csv");
  }

  expect(run("validate --config-dir /nonexistent_dir_42") == 2,
         "validate with a missing config dir exits 2");

  if (g_failures == 0) {
    std::cout << "all cli checks passed\n";
    return 0;
  }
  std::cout << g_failures << " cli check(s) failed\n";
  return 1;
}
