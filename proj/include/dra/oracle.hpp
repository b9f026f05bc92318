#pragma once

#include <vector>

#include "dra/model.hpp"

namespace dra {
namespace oracle {

/// Constant-coefficient market: w is constant, so chi = -U_gamma.
struct MertonValues {
  double chi;
  double chi_prime;
};

/// chi(gamma) = gamma theta^2 / (2 (1 - gamma)), chi'(gamma) =
/// theta^2 / (2 (1 - gamma)^2). Requires gamma < 1.
MertonValues merton_chi(double theta_sq, double gamma);

struct MertonRate {
  double I;
  double J;
  double gamma_star;
};

/// Closed-form Legendre transform of the Merton chi curve,
/// valid for 0 < kappa < theta^2 / 2.
MertonRate merton_rate(double theta_sq, double kappa);

/// Quadratic-ansatz solution w(x) = p x^2 / 2 + q x of the 1-d ergodic
/// equation for affine alpha/beta with constant scalar-market sigma, lambda.
struct LgqSolution {
  double p;
  double q;
  double chi;
  double chi_prime;  // implicit differentiation of the coefficient match
};

LgqSolution lgq_riccati(const ModelSpec& spec, double gamma);

/// Residual of (p, q, chi) in the ergodic equation at the given points;
/// the self-verification gate run before any oracle-backed assertion.
double lgq_residual(const ModelSpec& spec, double gamma,
                    const LgqSolution& sol,
                    const std::vector<double>& points);

/// Riccati pair whose quadratic form bounds the finite-horizon value from
/// below, integrated backward from P(T) = 0, q(T) = -gamma log v0.
struct RiccatiPair {
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> P;
  std::vector<double> q;
  double b;  // source constant c_gamma - (c/2) c_beta
  double quad_coeff;  // c2/(1-gamma) + 1/c
};

struct RiccatiBoundParams {
  double c0, c0_prime;  // coercivity fit
  double c1, c2;        // ellipticity constants
  double c_beta;        // |beta_gamma|^2 <= c_beta (|x|^2 + 1)
};

/// `c` <= 0 selects the default (midpoint of the admissible interval).
RiccatiPair riccati_bound(const ModelSpec& spec, double gamma, double T,
                          const RiccatiBoundParams& params, int steps = 2000,
                          double c = -1.0);

/// Evaluates the bound R(t,x) = x* P(t) x / 2 + q(t) at the time grid entry
/// nearest to t.
double riccati_bound_value(const RiccatiPair& pair, double t,
                           const Eigen::VectorXd& x);

}  // namespace oracle
}  // namespace dra
