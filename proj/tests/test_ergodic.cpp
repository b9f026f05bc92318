#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dra/ergodic.hpp"
#include "dra/errors.hpp"
#include "dra/hjb.hpp"
#include "dra/io.hpp"
#include "dra/oracle.hpp"

using namespace dra;

namespace {

ModelSpec load(const char* name) {
  return parse_model_json(read_file(std::string(CONFIG_DIR) + "/" + name));
}

const Grid kGrid = Grid::make1d(-6.0, 6.0, 201);

}  // namespace

TEST_CASE("lgq invariant measure is the stationary gaussian") {
  const ModelSpec spec = load("lgq.json");
  const ErgodicSolution sol = extract_ergodic(spec, -1.0, kGrid);
  const InvariantMeasure m = invariant_measure(spec, -1.0, sol.w, kGrid);

  // Optimal drift is -sqrt(10)/2 x, diffusion 1: variance 1/sqrt(10).
  const double var = 1.0 / std::sqrt(10.0);
  double sup_err = 0.0;
  for (int i = 0; i < kGrid.nodes(); ++i) {
    const double x = kGrid.point(i)[0];
    const double ref =
        std::exp(-x * x / (2.0 * var)) / std::sqrt(2.0 * M_PI * var);
    sup_err = std::max(sup_err, std::abs(m.density[i] - ref));
  }
  CHECK(sup_err < 1e-3);
  CHECK(m.normalization_error < 1e-8);
  CHECK(m.boundary_mass < 1e-10);
  // The shell where the exponent is fitted decays ~0.65 per node, so the
  // fitted rate carries a few percent of discretization bias.
  CHECK(m.gaussian_tail_delta ==
        doctest::Approx(1.0 / (2.0 * var)).epsilon(8e-2));
  // Second moment via the quadrature weights.
  Eigen::VectorXd x2(kGrid.nodes());
  for (int i = 0; i < kGrid.nodes(); ++i)
    x2[i] = kGrid.point(i)[0] * kGrid.point(i)[0];
  CHECK(m.integrate(x2) == doctest::Approx(var).epsilon(1e-6));
}

TEST_CASE("fokker-planck and ergodic-average routes agree in total variation") {
  const ModelSpec spec = load("lgq.json");
  const ErgodicSolution sol = extract_ergodic(spec, -1.0, kGrid);
  const InvariantMeasure fp = invariant_measure(spec, -1.0, sol.w, kGrid);
  ErgodicAverageOptions opts;
  opts.steps = 20'000'000;  // long trajectory: samples are autocorrelated
  opts.burn_in = 100'000;
  const InvariantMeasure avg = invariant_measure(
      spec, -1.0, sol.w, kGrid, MeasureMethod::kErgodicAverage, opts);
  double tv = 0.0;
  for (int i = 0; i < kGrid.nodes(); ++i)
    tv += 0.5 * std::abs(fp.density[i] - avg.density[i]) *
          fp.quad_weights[i];
  CHECK(tv <= 0.02);
}

TEST_CASE("chi_prime matches the oracle and the finite difference") {
  const ModelSpec spec = load("lgq.json");
  const ErgodicSolution sol = extract_ergodic(spec, -1.0, kGrid);
  const InvariantMeasure m = invariant_measure(spec, -1.0, sol.w, kGrid);
  const PoissonSolution ps = chi_prime(spec, -1.0, sol.w, m);
  CHECK(ps.theta == doctest::Approx(oracle::lgq_riccati(spec, -1.0).chi_prime)
                        .epsilon(1e-4));
  CHECK(std::abs(ps.theta - chi_prime_fd_check(spec, -1.0, 1e-3, kGrid)) <
        1e-4);
  CHECK(ps.residual < 1e-6);
  CHECK(ps.u[kGrid.anchor_index()] == doctest::Approx(0.0));
}

TEST_CASE("theta is nondecreasing in gamma") {
  const ModelSpec spec = load("lgq.json");
  double prev = -1.0;
  for (double gamma : {-4.0, -1.0, -0.25}) {
    const ErgodicSolution sol = extract_ergodic(spec, gamma, kGrid);
    const InvariantMeasure m = invariant_measure(spec, gamma, sol.w, kGrid);
    const double theta = chi_prime(spec, gamma, sol.w, m).theta;
    CHECK(theta > prev - 1e-9);
    prev = theta;
  }
}

TEST_CASE("non-ergodic drift is refused with a domain diagnostic") {
  const ModelSpec spec = load("merton.json");
  const ErgodicSolution sol = extract_ergodic(spec, -0.5, kGrid);
  CHECK_THROWS_AS(invariant_measure(spec, -0.5, sol.w, kGrid),
                  NumericalError);
}

TEST_CASE("chi_zero reproduces the closed-form bound constant") {
  const ModelSpec spec = load("lgq.json");
  // G-drift is -2x, theta^2 = x^2: chi_0 = E x^2 / 2 = (1/4) / 2 = 1/8.
  CHECK(chi_zero(spec, kGrid) == doctest::Approx(0.125).epsilon(1e-6));
}

TEST_CASE("stationary-strategy condition holds on lgq and degenerates safely") {
  const ModelSpec spec = load("lgq.json");
  const ErgodicSolution sol = extract_ergodic(spec, -1.0, kGrid);
  const ConditionCheck c = check_condition_2_26(spec, -1.0, sol.w);
  CHECK(c.holds);
  const double p = 3.0 - std::sqrt(10.0);
  CHECK(c.max_ratio == doctest::Approx(p * p).epsilon(1e-3));

  const ModelSpec merton = load("merton.json");
  const ErgodicSolution msol = extract_ergodic(merton, -0.5, kGrid);
  CHECK(check_condition_2_26(merton, -0.5, msol.w).holds);
}
