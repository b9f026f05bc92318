#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dra/errors.hpp"
#include "dra/hjb.hpp"
#include "dra/io.hpp"
#include "dra/oracle.hpp"

using namespace dra;

namespace {

ModelSpec load(const char* name) {
  return parse_model_json(read_file(std::string(CONFIG_DIR) + "/" + name));
}

const Grid kGrid1d = Grid::make1d(-6.0, 6.0, 201);

}  // namespace

TEST_CASE("merton ergodic pair is flat and exact") {
  const ModelSpec spec = load("merton.json");
  const ErgodicSolution sol = extract_ergodic(spec, -0.5, kGrid1d);
  // The driftless stationary system carries a quadratic near-null mode that
  // the anchor at x = 0 cannot pin, so the pair is exact only to ~1e-5.
  CHECK(sol.chi == doctest::Approx(-0.015).epsilon(1e-5));
  CHECK(sol.w.values().cwiseAbs().maxCoeff() < 1e-4);
  CHECK(sol.residual < 1e-9);
}

TEST_CASE("lgq ergodic pair matches the riccati oracle") {
  const ModelSpec spec = load("lgq.json");
  for (double gamma : {-2.0, -1.0, -0.25}) {
    const ErgodicSolution sol = extract_ergodic(spec, gamma, kGrid1d);
    const auto ref = oracle::lgq_riccati(spec, gamma);
    CHECK(sol.chi == doctest::Approx(ref.chi).epsilon(1e-6));
    // w is the quadratic p x^2 / 2 + q x (anchored at 0).
    double werr = 0.0;
    for (int i = 0; i < kGrid1d.nodes(); ++i) {
      const double x = kGrid1d.point(i)[0];
      werr = std::max(werr, std::abs(sol.w[i] -
                                     (0.5 * ref.p * x * x + ref.q * x)));
    }
    CHECK(werr < 1e-6);
  }
}

TEST_CASE("long-horizon route agrees with vanishing discount") {
  const ModelSpec spec = load("lgq.json");
  ErgodicSchedule lh;
  lh.method = ErgodicSolution::Method::kLongHorizon;
  lh.horizons = {4.0, 8.0};
  const ErgodicSolution a = extract_ergodic(spec, -1.0, kGrid1d, lh);
  const ErgodicSolution b = extract_ergodic(spec, -1.0, kGrid1d);
  CHECK(a.chi == doctest::Approx(b.chi).epsilon(1e-8));
}

TEST_CASE("finite-horizon surface: terminal data and riccati lower bound") {
  const ModelSpec spec = load("lgq.json");
  const double T = 1.0;
  const int steps = 100;
  const ValueSurface surf = solve_finite_horizon(spec, -1.0, kGrid1d, T,
                                                 steps);
  for (int i = 0; i < kGrid1d.nodes(); i += 40)
    CHECK(surf.at(steps, i) == doctest::Approx(0.0));  // -gamma log v0 = 0

  // vbar grows as t decreases (more time to accumulate utility).
  const int mid = kGrid1d.anchor_index();
  for (int k = 0; k + 1 <= steps; ++k)
    CHECK(surf.at(k, mid) >= surf.at(k + 1, mid) - 1e-12);

  oracle::RiccatiBoundParams params{1.0, 0.0, 1.0, 1.0, 8.0};
  const auto pair = oracle::riccati_bound(spec, -1.0, T, params);
  const double h = kGrid1d.max_spacing();
  double worst = 1e300;
  for (int k = 0; k <= steps; ++k)
    for (int i = 0; i < kGrid1d.nodes(); ++i) {
      if (!kGrid1d.in_interior(i)) continue;
      worst = std::min(worst, surf.at(k, i) -
                                  oracle::riccati_bound_value(
                                      pair, surf.times()[k],
                                      kGrid1d.point(i)));
    }
  CHECK(worst >= -5.0 * h * h);
}

TEST_CASE("vanishing-discount trail is monotone and recorded") {
  const ModelSpec spec = load("lgq.json");
  const ErgodicSolution sol = extract_ergodic(spec, -0.5, kGrid1d);
  REQUIRE(sol.schedule_trail.size() == 4);
  // The trail eps*v_eps(x0) approaches -chi; the last entry is the closest.
  CHECK(std::abs(sol.schedule_trail.back() - (-sol.chi)) <=
        std::abs(sol.schedule_trail.front() - (-sol.chi)) + 1e-12);
  for (double v : sol.schedule_trail) CHECK(v > 0.0);
}

TEST_CASE("stationary feedback has the merton closed form") {
  const ModelSpec spec = load("merton.json");
  const ErgodicSolution sol = extract_ergodic(spec, -0.5, kGrid1d);
  int one_sided = -1;
  const Eigen::MatrixXd h = feedback_from_w(spec, -0.5, sol.w, &one_sided);
  // h = alpha_hat / ((1 - gamma) sigma sigma*) = 0.3 / 1.5 = 0.2.
  for (int i = 0; i < kGrid1d.nodes(); ++i)
    CHECK(h(i, 0) == doctest::Approx(0.2).epsilon(1e-8));
  CHECK(one_sided == 2);
}

TEST_CASE("a two-factor decoupled model reduces to the scalar solution") {
  // Factor 1 drives the asset exactly as in the 1-d LGQ model; factor 2 is
  // an inert OU component. chi must match the scalar oracle.
  ModelSpec spec;
  spec.n = 2;
  spec.m = 1;
  spec.v0 = 1.0;
  spec.r = CoefficientField::constant(Eigen::MatrixXd::Zero(1, 1));
  Eigen::MatrixXd A(1, 2);
  A << 1.0, 0.0;
  spec.alpha = CoefficientField::affine(Eigen::MatrixXd::Zero(1, 1),
                                        {A.col(0), A.col(1)});
  Eigen::MatrixXd sigma(1, 3);
  sigma << 1.0, 0.0, 0.0;
  spec.sigma = CoefficientField::constant(sigma);
  Eigen::MatrixXd B = -Eigen::MatrixXd::Identity(2, 2);
  spec.beta = CoefficientField::affine(Eigen::MatrixXd::Zero(2, 1),
                                       {B.col(0), B.col(1)});
  Eigen::MatrixXd lambda(2, 3);
  lambda << 1.0, 0.0, 0.0,
            0.0, 0.0, 1.0;
  spec.lambda = CoefficientField::constant(lambda);

  const Grid grid = Grid::make2d(-6.0, 6.0, 41, -6.0, 6.0, 41);
  const ErgodicSolution sol = extract_ergodic(spec, -1.0, grid);
  const auto ref = oracle::lgq_riccati(load("lgq.json"), -1.0);
  CHECK(sol.chi == doctest::Approx(ref.chi).epsilon(1e-6));
}

TEST_CASE("invalid arguments are rejected") {
  const ModelSpec spec = load("lgq.json");
  CHECK_THROWS_AS(extract_ergodic(spec, 0.5, kGrid1d), ConfigError);
  CHECK_THROWS_AS(solve_discounted(spec, -1.0, kGrid1d, 0.0), ConfigError);
  CHECK_THROWS_AS(solve_finite_horizon(spec, -1.0, kGrid1d, -1.0, 10),
                  ConfigError);
  ErgodicSchedule bad;
  bad.epsilons = {0.05};
  CHECK_THROWS_AS(extract_ergodic(spec, -1.0, kGrid1d, bad), ConfigError);
}
