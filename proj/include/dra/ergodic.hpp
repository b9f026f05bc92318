#pragma once

#include <cstdint>

#include "dra/grid.hpp"
#include "dra/hjb.hpp"
#include "dra/model.hpp"

namespace dra {

/// Stationary density of the optimally controlled factor diffusion.
struct InvariantMeasure {
  Grid grid;
  Eigen::VectorXd density;           // nodewise values, >= 0
  Eigen::VectorXd quad_weights;      // trapezoid weights; dot(density) == 1
  double normalization_error = 0.0;  // |1 - raw mass| before rescaling
  double gaussian_tail_delta = 0.0;  // log-density curvature fit, diagnostic only
  double boundary_mass = 0.0;        // mass in the outer 5% of the box

  double integrate(const Eigen::VectorXd& f) const {
    return density.cwiseProduct(quad_weights).dot(f);
  }
};

struct PoissonSolution {
  double theta = 0.0;  // chi'(gamma)
  ScalarField u;       // L-bar u = theta - V1, u(x0) = 0
  ScalarField v1;      // V1(x)
  double residual = 0.0;
};

enum class MeasureMethod { kFokkerPlanck, kErgodicAverage };

struct ErgodicAverageOptions {
  std::int64_t steps = 1'000'000;
  std::int64_t burn_in = 100'000;
  double dt = 1e-2;
  std::uint64_t seed = 7;
};

/// Drift of the optimal generator: b(x) = beta_gamma + lambda N^-1 lambda* Dw.
Eigen::MatrixXd optimal_drift(const ModelSpec& spec, double gamma,
                              const ScalarField& w);

/// Stationary density of the diffusion with the given nodal drift and
/// diffusion matrix lambda lambda*. Fokker-Planck route: nullspace of the
/// discrete adjoint generator by inverse iteration with shift 0.
InvariantMeasure invariant_measure_for_drift(const ModelSpec& spec,
                                             const Grid& grid,
                                             const Eigen::MatrixXd& drift);

InvariantMeasure invariant_measure(
    const ModelSpec& spec, double gamma, const ScalarField& w,
    const Grid& grid, MeasureMethod method = MeasureMethod::kFokkerPlanck,
    const ErgodicAverageOptions& opts = {});

/// chi'(gamma) by the integral formula: theta = int V1 dm with
/// V1 = (alpha_hat + sigma lambda* Dw)* (sigma sigma*)^-1 (...) / (2(1-gamma)^2),
/// and the Poisson equation L-bar u = theta - V1 solved for u.
PoissonSolution chi_prime(const ModelSpec& spec, double gamma,
                          const ScalarField& w, const InvariantMeasure& m);

/// Centered finite difference (chi(gamma+delta) - chi(gamma-delta)) / (2 delta)
/// from two independent ergodic solves; cross-check of chi_prime.
double chi_prime_fd_check(const ModelSpec& spec, double gamma, double delta,
                          const Grid& grid,
                          const ErgodicSchedule& schedule = {});

struct ConditionCheck {
  bool holds = false;
  double max_ratio = 0.0;
  int worst_node = -1;
};

/// Stationary-strategy hypothesis:
/// (Dw)* lambda sigma*(sigma sigma*)^-1 sigma lambda* Dw
/// < alpha_hat*(sigma sigma*)^-1 alpha_hat at all interior nodes.
ConditionCheck check_condition_2_26(const ModelSpec& spec, double gamma,
                                    const ScalarField& w);

/// chi_0 from the uncontrolled G-drift diffusion: int theta_sq/2 dm.
double chi_zero(const ModelSpec& spec, const Grid& grid);

}  // namespace dra
