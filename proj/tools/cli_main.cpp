#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dra/acceptance.hpp"
#include "dra/duality.hpp"
#include "dra/ergodic.hpp"
#include "dra/errors.hpp"
#include "dra/hjb.hpp"
#include "dra/io.hpp"
#include "dra/oracle.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

struct GlobalOpts {
  int threads = 1;
  bool verbose = false;
  std::string out_dir = ".";
};

std::string out_path(const GlobalOpts& g, const std::string& name) {
  return g.out_dir + "/" + name;
}

dra::RunManifest start_manifest(const std::string& command,
                                const std::string& config) {
  dra::RunManifest m;
  m.command = command;
  m.config_path = config;
  m.version = kVersion;
  m.started_at = dra::iso8601_now();
  return m;
}

void finish_manifest(dra::RunManifest* m, const GlobalOpts& g) {
  m->finished_at = dra::iso8601_now();
  dra::write_file(out_path(g, "manifest_" + m->command + ".json"),
                  m->to_json());
}

void emit(const GlobalOpts& g, dra::RunManifest* m, const std::string& name,
          const std::string& content) {
  dra::write_file(out_path(g, name), content);
  m->add_output(name, content);
  if (g.verbose) std::cerr << "wrote " << out_path(g, name) << "\n";
}

const char* kChiPlot =
    "# gnuplot script: chi(gamma) curve\n"
    "set datafile separator ','\n"
    "set xlabel 'gamma'\n"
    "set ylabel 'chi'\n"
    "plot 'chi.csv' using 1:2 with linespoints title 'chi', \\\n"
    "     'chi.csv' using 1:3 with linespoints title \"chi'\"\n";

const char* kRatePlot =
    "# gnuplot script: rate function and downside value\n"
    "set datafile separator ','\n"
    "set xlabel 'kappa'\n"
    "plot 'rate.csv' using 1:2 with linespoints title 'I', \\\n"
    "     'rate.csv' using 1:3 with linespoints title 'J'\n";

const char* kSlopePlot =
    "# gnuplot script: log p_hat against T with the fitted slope\n"
    "set datafile separator ','\n"
    "set xlabel 'T'\n"
    "set ylabel 'log p_hat'\n"
    "plot 'sim.csv' using 1:(log($3)) with points title 'log p_hat'\n";

int cmd_check(const GlobalOpts& g, const std::string& config, double box,
              int samples) {
  auto manifest = start_manifest("check", config);
  const dra::ModelSpec spec = dra::parse_model_json(dra::read_file(config));
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(spec.n, -box);
  const Eigen::VectorXd hi = Eigen::VectorXd::Constant(spec.n, box);
  const dra::AssumptionReport report =
      dra::check_assumptions(spec, lo, hi, samples);
  std::cout << report.summary();
  emit(g, &manifest, "check_report.json", report.to_json() + "\n");
  finish_manifest(&manifest, g);
  if (!report.all_required_ok()) {
    std::cout << "FAIL: a required assumption does not hold\n";
    return 1;
  }
  std::cout << "OK: all required assumptions hold\n";
  return 0;
}

int cmd_chi(const GlobalOpts& g, const std::string& config, double gamma_min,
            double gamma_max, int points, double grid_l, int grid_n,
            bool force_oracle, bool fd_derivative) {
  if (points < 2) throw dra::ConfigError("chi: --points must be >= 2");
  if (!(gamma_min < gamma_max && gamma_max < 0.0))
    throw dra::ConfigError("chi: need gamma_min < gamma_max < 0");
  auto manifest = start_manifest("chi", config);
  const dra::ModelSpec spec = dra::parse_model_json(dra::read_file(config));

  std::vector<double> gammas(points);
  for (int i = 0; i < points; ++i)
    gammas[i] = gamma_min + i * (gamma_max - gamma_min) / (points - 1);

  dra::ChiCurve curve;
  if (force_oracle) {
    const dra::DerivedCoefficients d =
        dra::derived_gamma(spec, Eigen::VectorXd::Zero(spec.n), -1.0);
    curve.gammas = gammas;
    curve.source = "oracle";
    for (double gamma : gammas) {
      const auto mv = dra::oracle::merton_chi(d.theta_sq, gamma);
      curve.chi.push_back(mv.chi);
      curve.chi_prime.push_back(mv.chi_prime);
      curve.chi_prime_source.push_back("oracle");
    }
    dra::certify_convexity(&curve);
  } else {
    const Eigen::VectorXd lo = Eigen::VectorXd::Constant(spec.n, -6.0);
    const Eigen::VectorXd hi = Eigen::VectorXd::Constant(spec.n, 6.0);
    const dra::AssumptionReport report =
        dra::check_assumptions(spec, lo, hi, 512);
    dra::Grid grid = grid_l > 0.0
                         ? (spec.n == 1
                                ? dra::Grid::make1d(-grid_l, grid_l, grid_n)
                                : dra::Grid::make2d(-grid_l, grid_l, grid_n,
                                                    -grid_l, grid_l, grid_n))
                         : dra::default_grid(spec, report, grid_n);
    curve = dra::build_chi_curve(spec, gammas, grid, !fd_derivative);
  }
  emit(g, &manifest, "chi.csv", dra::chi_curve_csv(curve));
  emit(g, &manifest, "plot_chi.gp", kChiPlot);
  finish_manifest(&manifest, g);
  std::cout << (curve.convexity_certified
                    ? "chi curve certified convex\n"
                    : "chi curve NOT certified: " + curve.certification_note +
                          "\n");
  return curve.convexity_certified ? 0 : 1;
}

int cmd_rate(const GlobalOpts& g, const std::string& chi_path,
             double kappa_min, double kappa_max, int points) {
  if (points < 1) throw dra::ConfigError("rate: --points must be >= 1");
  auto manifest = start_manifest("rate", chi_path);
  const dra::ChiCurve curve =
      dra::chi_curve_from_csv(dra::read_file(chi_path));
  if (!curve.convexity_certified) {
    std::cerr << "refusing an uncertified chi curve\n";
    return 1;
  }
  std::vector<double> kappas(points);
  for (int i = 0; i < points; ++i)
    kappas[i] =
        points == 1
            ? kappa_min
            : kappa_min + i * (kappa_max - kappa_min) / (points - 1);
  const auto rows = dra::rate_function_table(curve, kappas);
  emit(g, &manifest, "rate.csv", dra::rate_table_csv(rows));
  emit(g, &manifest, "plot_rate.gp", kRatePlot);
  finish_manifest(&manifest, g);
  return 0;
}

int cmd_simulate(const GlobalOpts& g, const std::string& config,
                 const std::string& strategy, std::vector<double> h,
                 double gamma, double kappa, std::vector<double> horizons,
                 int paths, double dt, std::uint64_t seed, bool tilted,
                 double j_ref) {
  auto manifest = start_manifest("simulate", config);
  manifest.seed = seed;
  dra::SimulateRequest req;
  req.spec = dra::parse_model_json(dra::read_file(config));
  req.strategy = strategy == "finite-horizon" ? "finite_horizon" : strategy;
  if (!h.empty())
    req.constant_h =
        Eigen::Map<Eigen::VectorXd>(h.data(), static_cast<long>(h.size()));
  req.gamma = gamma;
  req.kappa = kappa;
  req.horizons = std::move(horizons);
  req.n_paths = paths;
  req.dt = dt;
  req.seed = seed;
  req.tilted = tilted;
  req.threads = g.threads;
  req.j_ref_override = j_ref;

  const dra::SimulateOutputs out = dra::run_simulate_pipeline(req);
  emit(g, &manifest, "sim.csv", out.sim_csv_text);
  emit(g, &manifest, "slope.csv", out.slope_csv_text);
  emit(g, &manifest, "plot_slope.gp", kSlopePlot);
  finish_manifest(&manifest, g);
  std::cout << "slope " << dra::format_double(out.report.slope)
            << " (reference J " << dra::format_double(out.report.j_ref)
            << ")\n";
  return 0;
}

int cmd_validate(const GlobalOpts& g, const std::string& suite,
                 const std::string& config_dir) {
  dra::AcceptanceOptions opts;
  opts.config_dir = config_dir;
  opts.fast = suite == "fast";
  opts.threads = g.threads;
  opts.verbose = g.verbose;
  const auto results = dra::run_acceptance(opts);
  for (const auto& r : results)
    std::cout << dra::format_result_line(r) << "\n";
  const bool ok = dra::all_passed(results);
  std::cout << (ok ? "ALL CRITERIA PASSED\n" : "CRITERIA FAILED\n");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Large-deviations asymptotics of downside-risk minimization "
               "in factor models"};
  app.require_subcommand(1);
  GlobalOpts g;
  app.add_option("--threads", g.threads, "worker threads");
  app.add_flag("--verbose", g.verbose, "chatty output");
  app.add_option("--out-dir", g.out_dir, "output directory");

  std::string config, chi_path = "chi.csv", strategy = "stationary";
  std::string suite = "fast", config_dir = "configs";
  double box = 6.0, gamma_min = -4.0, gamma_max = -0.1;
  double kappa_min = 0.0, kappa_max = 0.04, grid_l = 0.0;
  double gamma = -0.5, kappa = 0.02, dt = 0.0, j_ref = NAN;
  int samples = 512, points = 20, grid_n = 201, paths = 10000;
  std::uint64_t seed = 1;
  bool force_oracle = false, fd_derivative = false, tilted = false;
  std::vector<double> horizons{25.0, 50.0, 100.0}, hvec;

  auto* check = app.add_subcommand("check", "certify model assumptions");
  check->add_option("config", config, "model JSON")->required();
  check->add_option("--box", box, "half-width of the sampling box");
  check->add_option("--samples", samples, "sample count");

  auto* chi = app.add_subcommand("chi", "compute the chi(gamma) curve");
  chi->add_option("config", config, "model JSON")->required();
  chi->add_option("--gamma-min", gamma_min);
  chi->add_option("--gamma-max", gamma_max);
  chi->add_option("--points", points);
  chi->add_option("--grid-l", grid_l, "grid half-width (0 = automatic)");
  chi->add_option("--grid-n", grid_n, "nodes per axis");
  chi->add_flag("--force-oracle", force_oracle,
                "closed-form constant-coefficient curve, bypassing the PDE");
  chi->add_flag("--fd-derivative", fd_derivative,
                "finite-difference chi' instead of the Poisson route");

  auto* rate = app.add_subcommand("rate", "Legendre-dual rate function");
  rate->add_option("--chi", chi_path, "certified chi.csv")->required();
  rate->add_option("--kappa-min", kappa_min);
  rate->add_option("--kappa-max", kappa_max);
  rate->add_option("--points", points);

  auto* sim = app.add_subcommand("simulate", "Monte Carlo downside slopes");
  sim->add_option("config", config, "model JSON")->required();
  sim->add_option("--strategy", strategy,
                  "zero|constant|stationary|finite_horizon");
  sim->add_option("--weights", hvec, "constant strategy weights");
  sim->add_option("--gamma", gamma);
  sim->add_option("--kappa", kappa);
  sim->add_option("--T", horizons, "horizon ladder")->delimiter(',');
  sim->add_option("--paths", paths);
  sim->add_option("--dt", dt, "step (0 = default min(1e-2, T/1000))");
  sim->add_option("--seed", seed);
  sim->add_flag("--tilted", tilted, "importance-sampled (tilted) measure");
  sim->add_option("--j-ref", j_ref, "reference slope for the gap column");

  auto* validate = app.add_subcommand("validate", "acceptance suite");
  validate->add_option("--suite", suite)
      ->check(CLI::IsMember({"fast", "full"}));
  validate->add_option("--config-dir", config_dir, "reference model configs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (check->parsed()) return cmd_check(g, config, box, samples);
    if (chi->parsed())
      return cmd_chi(g, config, gamma_min, gamma_max, points, grid_l, grid_n,
                     force_oracle, fd_derivative);
    if (rate->parsed())
      return cmd_rate(g, chi_path, kappa_min, kappa_max, points);
    if (sim->parsed())
      return cmd_simulate(g, config, strategy, hvec, gamma, kappa, horizons,
                          paths, dt, seed, tilted, j_ref);
    if (validate->parsed()) return cmd_validate(g, suite, config_dir);
  } catch (const dra::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const dra::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
