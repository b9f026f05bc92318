#pragma once

#include <limits>
#include <string>
#include <vector>

#include "dra/duality.hpp"
#include "dra/io.hpp"
#include "dra/montecarlo.hpp"

namespace dra {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  std::string config_dir = "configs";
  bool fast = false;  // skips the long Monte Carlo criteria
  int threads = 1;
  bool verbose = false;
};

/// Runs the oracle self-check plus the twelve acceptance criteria (the fast
/// suite skips the two multi-minute Monte Carlo ones). Solver exceptions are
/// converted into failing results, never propagated.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts);

bool all_passed(const std::vector<CriterionResult>& results);
std::string format_result_line(const CriterionResult& r);

/// The `simulate` pipeline shared by the CLI command and the determinism
/// criterion: strategy construction, ladder simulation, CSV rendering.
struct SimulateRequest {
  ModelSpec spec;
  std::string strategy = "stationary";  // zero|constant|stationary|finite_horizon
  Eigen::VectorXd constant_h;
  double gamma = -0.5;
  double kappa = 0.0;
  std::vector<double> horizons;
  int n_paths = 0;
  double dt = 0.0;
  std::uint64_t seed = 1;
  bool tilted = false;
  int threads = 1;
  double j_ref_override = std::numeric_limits<double>::quiet_NaN();
};

struct SimulateOutputs {
  SlopeReport report;
  std::string sim_csv_text;
  std::string slope_csv_text;
};

SimulateOutputs run_simulate_pipeline(const SimulateRequest& req);

}  // namespace dra
