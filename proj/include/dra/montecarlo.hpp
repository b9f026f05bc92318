#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dra/grid.hpp"
#include "dra/model.hpp"

namespace dra {

/// Investment policy evaluated along the simulated factor path. Feedback
/// kinds interpolate the nodal feedback multilinearly; evaluation outside
/// the grid clamps to the face value and increments the clamp counter.
struct Strategy {
  enum class Kind {
    kZeroBenchmark,
    kConstant,
    kFiniteHorizonFeedback,
    kStationaryFeedback,
  };
  Kind kind = Kind::kZeroBenchmark;
  Eigen::VectorXd h;    // constant kind
  double gamma = 0.0;   // feedback kinds
  ScalarField w;        // stationary feedback
  ValueSurface vbar;    // finite-horizon feedback

  static Strategy zero();
  static Strategy constant(Eigen::VectorXd h);
  static Strategy stationary(const ScalarField& w, double gamma);
  static Strategy finite_horizon(const ValueSurface& vbar, double gamma);
};

struct SimConfig {
  double T = 0.0;
  double dt = 0.0;  // <= 0 picks the default min(1e-2, T/1000)
  int n_paths = 0;
  std::uint64_t seed = 1;
  enum class Measure { kPhysical, kTilted } measure = Measure::kPhysical;
  double tilt_gamma = 0.0;  // tilted measure parameters
  ScalarField tilt_w;
  int threads = 1;

  double effective_dt() const;
  void validate() const;  // dt <= T/100, n_paths >= 100
};

struct PathSample {
  double L_T = 0.0;       // (1/T) log(V_T / S0_T)
  double log_lr = 0.0;    // log dP/dP-tilde along the path (0 when physical)
  Eigen::VectorXd x_T;
};

struct SimResult {
  std::vector<PathSample> samples;
  double T = 0.0;
  double kappa = 0.0;  // carried through for reporting; not used here
  SimConfig::Measure measure = SimConfig::Measure::kPhysical;
  std::int64_t clamp_count = 0;
};

struct DownsideEstimate {
  double kappa = 0.0;
  double T = 0.0;
  double p_hat = 0.0;
  double ci_low = 0.0, ci_high = 0.0;  // 95% normal / delta-method interval
  int n_paths = 0;
  std::int64_t boundary_clamp_count = 0;
  std::string measure = "physical";
};

struct SlopeReport {
  double kappa = 0.0;
  std::vector<double> horizons;
  std::vector<double> log_p;
  std::vector<DownsideEstimate> estimates;
  double slope = 0.0;
  double stderr_ = 0.0;
  double j_ref = 0.0;     // NaN when no reference was supplied
  double rel_gap = 0.0;
};

struct TiltAgreement {
  DownsideEstimate plain, tilted;
  bool agree = false;          // |p_tilted - p_plain| within combined CIs
  double mean_weight = 0.0;    // sample mean of the likelihood weights
  double weight_se = 0.0;
  bool martingale_ok = false;  // mean weight within 1 +- 3 se
};

/// Euler-Maruyama on the factor, exact-in-log wealth accumulation; one
/// independent RNG stream per path derived from the root seed, so results
/// are independent of the thread count. Deterministic given (spec,
/// strategy, cfg).
SimResult simulate_paths(const ModelSpec& spec, const Strategy& strategy,
                         const SimConfig& cfg);

/// p_hat = weighted fraction of paths with L_T <= kappa; likelihood weights
/// under the tilted measure, unit weights otherwise.
DownsideEstimate estimate_downside(const SimResult& result, double kappa);

/// OLS of log p_hat against the horizon ladder; the strategy factory allows
/// horizon-dependent policies. j_ref, when finite, fills the reference gap.
SlopeReport ld_slope(const ModelSpec& spec,
                     const std::function<Strategy(double)>& strategy_for_T,
                     double kappa, const std::vector<double>& T_ladder,
                     SimConfig cfg, double j_ref);
SlopeReport ld_slope(const ModelSpec& spec, const Strategy& strategy,
                     double kappa, const std::vector<double>& T_ladder,
                     const SimConfig& cfg, double j_ref);

/// Importance-sampling consistency: plain and tilted estimates agree within
/// the sum of their CI half-widths, and the mean weight is 1 within 3 se.
TiltAgreement tilted_vs_plain_check(const ModelSpec& spec,
                                    const Strategy& strategy, double kappa,
                                    const SimConfig& cfg);

}  // namespace dra
