#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dra/errors.hpp"
#include "dra/hjb.hpp"
#include "dra/io.hpp"
#include "dra/montecarlo.hpp"
#include "dra/oracle.hpp"

using namespace dra;

namespace {

ModelSpec load(const char* name) {
  return parse_model_json(read_file(std::string(CONFIG_DIR) + "/" + name));
}

const Grid kGrid = Grid::make1d(-6.0, 6.0, 201);

}  // namespace

TEST_CASE("config invariants are enforced") {
  SimConfig cfg;
  cfg.T = 10.0;
  cfg.n_paths = 50;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.n_paths = 200;
  cfg.dt = 0.5;  // > T/100
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.dt = 0.05;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("identical seeds give bit-identical samples") {
  const ModelSpec spec = load("merton.json");
  SimConfig cfg;
  cfg.T = 5.0;
  cfg.n_paths = 300;
  cfg.seed = 99;
  const Strategy s = Strategy::constant(Eigen::VectorXd::Constant(1, 0.2));
  const SimResult a = simulate_paths(spec, s, cfg);
  cfg.threads = 4;
  const SimResult b = simulate_paths(spec, s, cfg);
  REQUIRE(a.samples.size() == b.samples.size());
  for (size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].L_T == b.samples[i].L_T);
    CHECK(a.samples[i].x_T[0] == b.samples[i].x_T[0]);
  }
}

TEST_CASE("zero benchmark is exact") {
  const ModelSpec spec = load("merton.json");
  SimConfig cfg;
  cfg.T = 25.0;
  cfg.n_paths = 200;
  cfg.seed = 5;
  const SimResult r = simulate_paths(spec, Strategy::zero(), cfg);
  for (const PathSample& s : r.samples) CHECK(s.L_T == 0.0);
  CHECK(estimate_downside(r, 0.01).p_hat == 1.0);
  CHECK(estimate_downside(r, -0.01).p_hat == 0.0);
}

TEST_CASE("constant strategy hits the gaussian mean") {
  const ModelSpec spec = load("merton.json");
  SimConfig cfg;
  cfg.T = 50.0;
  cfg.n_paths = 4000;
  cfg.seed = 21;
  const SimResult r = simulate_paths(
      spec, Strategy::constant(Eigen::VectorXd::Constant(1, 0.2)), cfg);
  double mean = 0.0, sq = 0.0;
  for (const PathSample& s : r.samples) {
    mean += s.L_T;
    sq += s.L_T * s.L_T;
  }
  mean /= cfg.n_paths;
  const double sd = std::sqrt(sq / cfg.n_paths - mean * mean);
  // E L_T = h alpha - h^2 sigma^2 / 2 = 0.06 - 0.02 = 0.04.
  CHECK(std::abs(mean - 0.04) <= 3.0 * sd / std::sqrt(1.0 * cfg.n_paths));
}

TEST_CASE("downside estimate matches the exact gaussian tail") {
  const ModelSpec spec = load("merton.json");
  const ErgodicSolution sol = extract_ergodic(spec, -0.5, kGrid);
  SimConfig cfg;
  cfg.T = 100.0;
  cfg.n_paths = 20000;
  cfg.seed = 31;
  const SimResult r =
      simulate_paths(spec, Strategy::stationary(sol.w, -0.5), cfg);
  const DownsideEstimate e = estimate_downside(r, 0.02);
  // L_T ~ N(0.04, 0.04/T): P(L_T <= 0.02) = Phi(-0.1 sqrt(T)) = Phi(-1).
  const double ref = 0.15865525393145705;
  CHECK(std::abs(e.p_hat - ref) <= 3.0 * (e.ci_high - e.ci_low) / 3.92 + 5e-3);
  CHECK(e.ci_low <= e.p_hat);
  CHECK(e.p_hat <= e.ci_high);
}

TEST_CASE("halving dt moves the estimate less than the CI half-width") {
  const ModelSpec spec = load("merton.json");
  const ErgodicSolution sol = extract_ergodic(spec, -0.5, kGrid);
  SimConfig cfg;
  cfg.T = 50.0;
  cfg.n_paths = 20000;
  cfg.seed = 13;
  cfg.dt = 0.02;
  const Strategy s = Strategy::stationary(sol.w, -0.5);
  const DownsideEstimate coarse =
      estimate_downside(simulate_paths(spec, s, cfg), 0.02);
  cfg.dt = 0.01;
  const DownsideEstimate fine =
      estimate_downside(simulate_paths(spec, s, cfg), 0.02);
  CHECK(std::abs(coarse.p_hat - fine.p_hat) <=
        0.5 * (coarse.ci_high - coarse.ci_low) +
            0.5 * (fine.ci_high - fine.ci_low));
}

TEST_CASE("tilted mean of L_T concentrates at kappa") {
  const ModelSpec spec = load("merton.json");
  const ErgodicSolution sol = extract_ergodic(spec, -0.5, kGrid);
  SimConfig cfg;
  cfg.T = 50.0;
  cfg.n_paths = 20000;
  cfg.seed = 17;
  cfg.measure = SimConfig::Measure::kTilted;
  cfg.tilt_gamma = -0.5;
  cfg.tilt_w = sol.w;
  const SimResult r =
      simulate_paths(spec, Strategy::stationary(sol.w, -0.5), cfg);
  double mean = 0.0, sq = 0.0;
  for (const PathSample& s : r.samples) {
    mean += s.L_T;
    sq += s.L_T * s.L_T;
  }
  mean /= cfg.n_paths;
  const double sd = std::sqrt(sq / cfg.n_paths - mean * mean);
  // For a constant model the tilted L_T is exactly Gaussian with mean
  // chi'(gamma) = kappa, so only sampling error remains.
  CHECK(std::abs(mean - 0.02) <= 3.5 * sd / std::sqrt(1.0 * cfg.n_paths));
}

TEST_CASE("degenerate tilt reproduces the physical paths") {
  const ModelSpec spec = load("merton.json");
  SimConfig cfg;
  cfg.T = 10.0;
  cfg.n_paths = 200;
  cfg.seed = 8;
  const Strategy s = Strategy::constant(Eigen::VectorXd::Constant(1, 0.2));
  const SimResult plain = simulate_paths(spec, s, cfg);
  cfg.measure = SimConfig::Measure::kTilted;
  cfg.tilt_gamma = 0.0;  // rho = 0: identity measure change
  const SimResult tilted = simulate_paths(spec, s, cfg);
  for (size_t i = 0; i < plain.samples.size(); ++i) {
    CHECK(plain.samples[i].L_T == tilted.samples[i].L_T);
    CHECK(tilted.samples[i].log_lr == 0.0);
  }
}

TEST_CASE("slope regression needs two horizons and flags dead ladders") {
  const ModelSpec spec = load("merton.json");
  SimConfig cfg;
  cfg.n_paths = 200;
  cfg.seed = 4;
  CHECK_THROWS_AS(
      ld_slope(spec, Strategy::zero(), 0.01, {25.0}, cfg, NAN),
      ConfigError);
  // Zero strategy never goes below kappa = -0.01: all p_hat are 0.
  CHECK_THROWS_AS(
      ld_slope(spec, Strategy::zero(), -0.01, {10.0, 20.0}, cfg, NAN),
      NumericalError);
  // And for kappa > 0 the slope is exactly 0.
  const SlopeReport rep =
      ld_slope(spec, Strategy::zero(), 0.01, {10.0, 20.0}, cfg, NAN);
  CHECK(rep.slope == 0.0);
}
