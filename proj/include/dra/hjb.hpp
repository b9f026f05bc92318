#pragma once

#include <vector>

#include "dra/grid.hpp"
#include "dra/model.hpp"

namespace dra {

/// Ergodic pair (chi, w) with w normalized to w(x0) = 0 at the anchor node.
struct ErgodicSolution {
  double gamma = 0.0;
  double chi = 0.0;
  ScalarField w;
  enum class Method { kVanishingDiscount, kLongHorizon } method =
      Method::kVanishingDiscount;
  double residual = 0.0;  // max interior residual of (chi, w) in the ergodic equation
  std::vector<double> schedule_trail;  // eps v_eps(x0), or vbar(0,x0;T)/T
};

struct ErgodicSchedule {
  std::vector<double> epsilons{0.08, 0.04, 0.02, 0.01};
  std::vector<double> horizons;  // long-horizon alternative (increasing T)
  ErgodicSolution::Method method = ErgodicSolution::Method::kVanishingDiscount;
  /// Newton correction of (chi, w) on the discrete ergodic system after the
  /// schedule limit; the schedule supplies the starting point.
  bool newton_polish = true;
  int finite_horizon_steps_per_unit = 4;
};

/// Backward-in-time solution of the finite-horizon equation for vbar,
/// terminal data vbar(T, x) = -gamma log v0. Implicit Euler in time,
/// policy iteration on the control representation per step.
ValueSurface solve_finite_horizon(const ModelSpec& spec, double gamma,
                                  const Grid& grid, double T, int steps);

/// Discounted equation eps v_eps = L v_eps - quadratic + U_gamma; v_eps >= 0.
/// A warm start (same grid) accelerates schedule sweeps.
ScalarField solve_discounted(const ModelSpec& spec, double gamma,
                             const Grid& grid, double eps,
                             const ScalarField* warm_start = nullptr);

/// Ergodic pair via the vanishing-discount (default) or long-horizon route.
ErgodicSolution extract_ergodic(const ModelSpec& spec, double gamma,
                                const Grid& grid,
                                const ErgodicSchedule& schedule = {});

/// Stationary feedback h_bar(x) = (sigma sigma*)^-1 (alpha_hat + sigma
/// lambda* Dw) / (1 - gamma), one m-row per node. `one_sided_count`, when
/// given, receives the number of nodes where a face gradient was used.
Eigen::MatrixXd feedback_from_w(const ModelSpec& spec, double gamma,
                                const ScalarField& w,
                                int* one_sided_count = nullptr);

/// Same map from a time slice of the vbar surface (Dv = -D vbar).
Eigen::MatrixXd feedback_from_vbar(const ModelSpec& spec, double gamma,
                                   const ScalarField& vbar_slice,
                                   int* one_sided_count = nullptr);

/// Max interior residual of (chi, w) in the ergodic equation.
double ergodic_residual(const ModelSpec& spec, double gamma, double chi,
                        const ScalarField& w);

/// Default computational box [-L, L]^n, L = 6 max(1, sqrt(c0'/c0)),
/// 201 nodes per axis.
Grid default_grid(const ModelSpec& spec, const AssumptionReport& report,
                  int nodes_per_axis = 201);

}  // namespace dra
