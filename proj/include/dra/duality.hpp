#pragma once

#include <string>
#include <vector>

#include "dra/ergodic.hpp"
#include "dra/hjb.hpp"
#include "dra/model.hpp"

namespace dra {

/// Sampled chi(gamma) curve on a strictly increasing grid in (-inf, 0).
struct ChiCurve {
  std::vector<double> gammas;
  std::vector<double> chi;
  std::vector<double> chi_prime;
  std::vector<std::string> chi_prime_source;  // "poisson" or "fd" per entry
  std::string source = "pde";                 // pde | oracle | external-csv
  bool convexity_certified = false;
  std::string certification_note;
};

/// Certifies chi <= tol, chi' > 0 nondecreasing (1e-6 slack), and second
/// divided differences of chi >= -1e-6; records the violation otherwise.
void certify_convexity(ChiCurve* curve);

/// Interpolants: monotone cubic (Fritsch-Carlson) on chi', and chi
/// reconstructed by exact integration of that interpolant from the nearest
/// node, preserving convexity. gamma must lie in [gammas.front(), .back()].
double curve_chi_prime_at(const ChiCurve& curve, double gamma);
double curve_chi_at(const ChiCurve& curve, double gamma);

struct RateResult {
  enum class Branch {
    kInterior,
    kKappaNegative,
    kKappaAtOrAboveChiPrimeLimit,
  };
  double kappa = 0.0;
  double I = 0.0;
  double J = 0.0;  // -I; +-infinity appears only through the branch sentinel
  double gamma_star = 0.0;  // NaN off the interior branch
  Branch branch = Branch::kInterior;
  bool truncated = false;  // kappa at or below chi'(gamma_min): gamma clamped
};

const char* branch_name(RateResult::Branch b);

/// chi per gamma via extract_ergodic; chi' via the Poisson/occupation formula
/// when `use_poisson_derivative`, else by centered finite differences of chi.
ChiCurve build_chi_curve(const ModelSpec& spec,
                         const std::vector<double>& gamma_grid,
                         const Grid& grid, bool use_poisson_derivative,
                         const ErgodicSchedule& schedule = {});

/// I(kappa) = sup_{gamma<0} { gamma kappa - chi(gamma) }, J = -I; requires a
/// certified curve. kappa < 0 yields the -infinity sentinel branch and
/// kappa >= chi'(gamma_max) the zero out-of-range branch.
RateResult legendre(const ChiCurve& curve, double kappa);

std::vector<RateResult> rate_function_table(const ChiCurve& curve,
                                            const std::vector<double>& kappas);

}  // namespace dra
