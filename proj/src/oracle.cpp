#include "dra/oracle.hpp"

#include <cmath>
#include <sstream>

#include "dra/errors.hpp"

namespace dra {
namespace oracle {

MertonValues merton_chi(double theta_sq, double gamma) {
  if (gamma >= 1.0) throw ConfigError("merton_chi requires gamma < 1");
  if (theta_sq <= 0.0) throw ConfigError("merton_chi requires theta_sq > 0");
  const double d = 1.0 - gamma;
  return {gamma * theta_sq / (2.0 * d), theta_sq / (2.0 * d * d)};
}

MertonRate merton_rate(double theta_sq, double kappa) {
  if (theta_sq <= 0.0) throw ConfigError("merton_rate requires theta_sq > 0");
  if (!(kappa > 0.0 && kappa < theta_sq / 2.0))
    throw ConfigError("merton_rate requires 0 < kappa < theta_sq/2");
  const double theta = std::sqrt(theta_sq);
  // Stationarity of gamma kappa - chi(gamma): (1-gamma)^2 = theta^2/(2 kappa).
  const double gamma_star = 1.0 - theta / std::sqrt(2.0 * kappa);
  const double I = std::pow(std::sqrt(kappa) - theta / std::sqrt(2.0), 2);
  return {I, -I, gamma_star};
}

namespace {

// Scalar reduction of the 1-d affine model. All quantities entering the
// quadratic-ansatz coefficient match, plus their gamma-derivatives.
struct LgqScalars {
  double s, k, l;        // sigma sigma*, sigma lambda*, lambda lambda*
  double A, abar, B, b;  // alpha = A x + a, beta = B x + b, abar = a - r
  double Bt, bt, Q;      // effective drift slope/offset, lambda N^-1 lambda*
  double u2, u1, u0;     // coefficients of -U_gamma = u2 x^2 + u1 x + u0
  double dBt, dbt, dQ, du2, du1, du0;
};

LgqScalars lgq_scalars(const ModelSpec& spec, double gamma) {
  if (spec.n != 1 || spec.m != 1)
    throw ConfigError("lgq_riccati requires n = m = 1");
  if (!spec.sigma.is_constant() || !spec.lambda.is_constant() ||
      !spec.r.is_constant())
    throw ConfigError("lgq_riccati requires constant sigma, lambda, r");
  if (!spec.alpha.is_affine_or_constant() || !spec.beta.is_affine_or_constant())
    throw ConfigError("lgq_riccati requires affine alpha and beta");
  if (gamma >= 0.0) throw ConfigError("lgq_riccati requires gamma < 0");

  LgqScalars v{};
  const Eigen::MatrixXd sig = spec.sigma.offset();
  const Eigen::MatrixXd lam = spec.lambda.offset();
  v.s = (sig * sig.transpose())(0, 0);
  v.k = (sig * lam.transpose())(0, 0);
  v.l = (lam * lam.transpose())(0, 0);
  if (v.s <= 0.0 || v.l <= 0.0)
    throw NumericalError("lgq_riccati: degenerate sigma or lambda");

  auto slope = [](const CoefficientField& f) {
    return f.is_constant() ? 0.0 : f.linear()[0](0, 0);
  };
  v.A = slope(spec.alpha);
  v.abar = spec.alpha.offset()(0, 0) - spec.r.offset()(0, 0);
  v.B = slope(spec.beta);
  v.b = spec.beta.offset()(0, 0);
  if (v.A == 0.0)
    throw ConfigError("lgq_riccati: model outside oracle class (A = 0 "
                      "violates the coercivity assumption)");

  const double c = gamma / (1.0 - gamma);
  const double dc = 1.0 / ((1.0 - gamma) * (1.0 - gamma));
  v.Bt = v.B + c * v.k * v.A / v.s;
  v.bt = v.b + c * v.k * v.abar / v.s;
  v.Q = v.l + c * v.k * v.k / v.s;
  v.u2 = 0.5 * c * v.A * v.A / v.s;
  v.u1 = c * v.A * v.abar / v.s;
  v.u0 = 0.5 * c * v.abar * v.abar / v.s;
  v.dBt = dc * v.k * v.A / v.s;
  v.dbt = dc * v.k * v.abar / v.s;
  v.dQ = dc * v.k * v.k / v.s;
  v.du2 = 0.5 * dc * v.A * v.A / v.s;
  v.du1 = dc * v.A * v.abar / v.s;
  v.du0 = 0.5 * dc * v.abar * v.abar / v.s;
  return v;
}

}  // namespace

LgqSolution lgq_riccati(const ModelSpec& spec, double gamma) {
  const LgqScalars v = lgq_scalars(spec, gamma);

  // x^2 match: Q p^2 / 2 + Bt p + u2 = 0; stable root has Bt + Q p < 0.
  const double disc = v.Bt * v.Bt - 2.0 * v.Q * v.u2;
  if (disc < 0.0)
    throw NumericalError("lgq_riccati: negative discriminant, model outside "
                         "oracle class");
  const double root = std::sqrt(disc);
  const double p = (-v.Bt - root) / v.Q;
  const double denom = v.Bt + v.Q * p;  // = -root
  if (denom >= 0.0)
    throw NumericalError("lgq_riccati: no stable root");

  // x^1 match: (Bt + Q p) q + bt p + u1 = 0.
  const double q = -(v.bt * p + v.u1) / denom;
  // x^0 match.
  const double chi = 0.5 * v.l * p + v.bt * q + 0.5 * v.Q * q * q + v.u0;

  // Implicit differentiation of the three matches with respect to gamma.
  const double dp = -(0.5 * v.dQ * p * p + v.dBt * p + v.du2) / denom;
  const double dq = -(v.dBt * q + v.dbt * p + v.bt * dp + v.dQ * p * q +
                      v.Q * dp * q + v.du1) /
                    denom;
  const double dchi = 0.5 * v.l * dp + v.dbt * q + v.bt * dq +
                      0.5 * v.dQ * q * q + v.Q * q * dq + v.du0;
  return {p, q, chi, dchi};
}

double lgq_residual(const ModelSpec& spec, double gamma,
                    const LgqSolution& sol, const std::vector<double>& points) {
  double worst = 0.0;
  for (double x : points) {
    Eigen::VectorXd xv(1);
    xv[0] = x;
    const DerivedCoefficients d = derived_gamma(spec, xv, gamma);
    const CoefficientValues c = eval_coefficients(spec, xv);
    const double dw = sol.p * x + sol.q;
    const Eigen::MatrixXd Qm =
        c.lambda * d.N_inv * c.lambda.transpose();  // 1x1
    const double lhs = 0.5 * (c.lambda * c.lambda.transpose())(0, 0) * sol.p +
                       d.beta_gamma[0] * dw + 0.5 * Qm(0, 0) * dw * dw -
                       d.U_gamma;
    worst = std::max(worst, std::abs(lhs - sol.chi));
  }
  return worst;
}

RiccatiPair riccati_bound(const ModelSpec& spec, double gamma, double T,
                          const RiccatiBoundParams& params, int steps,
                          double c) {
  if (gamma >= 0.0) throw ConfigError("riccati_bound requires gamma < 0");
  if (T <= 0.0 || steps < 2) throw ConfigError("riccati_bound: bad T/steps");
  const double c_gamma = -gamma * params.c0 / (2.0 * (1.0 - gamma));
  const double c_gamma_p = -gamma * params.c0_prime / (2.0 * (1.0 - gamma));
  if (params.c_beta <= 0.0)
    throw ConfigError("riccati_bound: c_beta must be positive");
  const double c_max = 2.0 * c_gamma / params.c_beta;
  if (c <= 0.0) c = 0.5 * c_max;  // midpoint of the admissible interval
  const double b = c_gamma - 0.5 * c * params.c_beta;
  if (b <= 0.0) {
    std::ostringstream os;
    os << "riccati_bound: b <= 0 for c = " << c << "; choose c in (0, "
       << c_max << ")";
    throw ConfigError(os.str());
  }
  const double quad = params.c2 / (1.0 - gamma) + 1.0 / c;

  RiccatiPair out;
  out.b = b;
  out.quad_coeff = quad;
  const int n = spec.n;
  const double dt = T / steps;
  out.times.resize(steps + 1);
  out.P.resize(steps + 1);
  out.q.resize(steps + 1);
  for (int i = 0; i <= steps; ++i) out.times[i] = i * dt;

  // Backward integration in tau = T - t with RK4:
  //   dP/dtau = b I - quad P^2,   dq/dtau = (c1/2) tr P - c c_beta / 2 - c_gamma'.
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  auto fP = [&](const Eigen::MatrixXd& P) -> Eigen::MatrixXd {
    return b * I - quad * P * P;
  };
  auto fq = [&](const Eigen::MatrixXd& P) {
    return 0.5 * params.c1 * P.trace() - 0.5 * c * params.c_beta - c_gamma_p;
  };
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  double q = -gamma * std::log(spec.v0);
  out.P[steps] = P;
  out.q[steps] = q;
  for (int i = steps - 1; i >= 0; --i) {
    const Eigen::MatrixXd k1 = fP(P);
    const Eigen::MatrixXd k2 = fP(P + 0.5 * dt * k1);
    const Eigen::MatrixXd k3 = fP(P + 0.5 * dt * k2);
    const Eigen::MatrixXd k4 = fP(P + dt * k3);
    const double q1 = fq(P);
    const double q2 = fq(P + 0.5 * dt * k1);
    const double q3 = fq(P + 0.5 * dt * k2);
    const double q4 = fq(P + dt * k3);
    P += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    q += dt / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4);
    out.P[i] = P;
    out.q[i] = q;
  }
  return out;
}

double riccati_bound_value(const RiccatiPair& pair, double t,
                           const Eigen::VectorXd& x) {
  const double dt = pair.times[1] - pair.times[0];
  int i = static_cast<int>(std::lround(t / dt));
  i = std::min(std::max(i, 0), static_cast<int>(pair.times.size()) - 1);
  return 0.5 * x.dot(pair.P[i] * x) + pair.q[i];
}

}  // namespace oracle
}  // namespace dra
