#include "dra/duality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dra/errors.hpp"

namespace dra {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_grid(const ChiCurve& c) {
  const size_t n = c.gammas.size();
  if (n < 2 || c.chi.size() != n || c.chi_prime.size() != n)
    throw ConfigError("ChiCurve: need >= 2 aligned (gamma, chi, chi') rows");
  for (size_t i = 0; i < n; ++i) {
    if (!(c.gammas[i] < 0.0))
      throw ConfigError("ChiCurve: gammas must be negative");
    if (i > 0 && !(c.gammas[i] > c.gammas[i - 1]))
      throw ConfigError("ChiCurve: gammas must be strictly increasing");
  }
}

// Fritsch-Carlson monotone cubic slopes for data (x, y).
std::vector<double> pchip_slopes(const std::vector<double>& x,
                                 const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  std::vector<double> d(n - 1), m(n);
  for (int i = 0; i < n - 1; ++i) d[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
  if (n == 2) {
    m[0] = m[1] = d[0];
    return m;
  }
  m[0] = d[0];
  m[n - 1] = d[n - 2];
  for (int i = 1; i < n - 1; ++i) {
    if (d[i - 1] * d[i] <= 0.0) {
      m[i] = 0.0;
    } else {
      const double w1 = 2.0 * (x[i + 1] - x[i]) + (x[i] - x[i - 1]);
      const double w2 = (x[i + 1] - x[i]) + 2.0 * (x[i] - x[i - 1]);
      m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
    }
  }
  // Endpoint clamping (three-point rule, projected to preserve monotonicity).
  auto clamp_end = [&](int i, int k) {
    if (d[k] == 0.0)
      m[i] = 0.0;
    else if (m[i] * d[k] < 0.0)
      m[i] = 0.0;
    else if (std::abs(m[i]) > 3.0 * std::abs(d[k]))
      m[i] = 3.0 * d[k];
  };
  clamp_end(0, 0);
  clamp_end(n - 1, n - 2);
  return m;
}

// Cubic coefficients in t = (x - x[k]) / h of segment k of the interpolant.
struct Segment {
  double a, b, c, d, h;
  double eval(double t) const { return a + t * (b + t * (c + t * d)); }
  // Integral of the segment over x from x[k] to x[k] + t h.
  double integral(double t) const {
    return h * t * (a + t * (b / 2.0 + t * (c / 3.0 + t * d / 4.0)));
  }
};

Segment segment(const std::vector<double>& x, const std::vector<double>& y,
                const std::vector<double>& m, int k) {
  const double h = x[k + 1] - x[k];
  Segment s;
  s.h = h;
  s.a = y[k];
  s.b = h * m[k];
  s.c = -3.0 * y[k] - 2.0 * h * m[k] + 3.0 * y[k + 1] - h * m[k + 1];
  s.d = 2.0 * y[k] + h * m[k] - 2.0 * y[k + 1] + h * m[k + 1];
  return s;
}

int locate(const std::vector<double>& x, double v) {
  const int n = static_cast<int>(x.size());
  if (v < x.front() || v > x.back())
    throw ConfigError("ChiCurve interpolation: gamma outside the sampled grid");
  const int k = static_cast<int>(
      std::upper_bound(x.begin(), x.end(), v) - x.begin()) - 1;
  return std::clamp(k, 0, n - 2);
}

}  // namespace

void certify_convexity(ChiCurve* curve) {
  validate_grid(*curve);
  const size_t n = curve->gammas.size();
  std::ostringstream note;
  bool ok = true;
  for (size_t i = 0; i < n && ok; ++i) {
    if (curve->chi[i] > 1e-9) {
      note << "chi(" << curve->gammas[i] << ") = " << curve->chi[i] << " > 0";
      ok = false;
    } else if (!(curve->chi_prime[i] > 0.0)) {
      note << "chi'(" << curve->gammas[i] << ") = " << curve->chi_prime[i]
           << " is not positive";
      ok = false;
    } else if (i > 0 &&
               curve->chi_prime[i] < curve->chi_prime[i - 1] - 1e-6) {
      note << "chi' decreases between gamma = " << curve->gammas[i - 1]
           << " and " << curve->gammas[i];
      ok = false;
    }
  }
  for (size_t i = 1; ok && i + 1 < n; ++i) {
    const double dl = (curve->chi[i] - curve->chi[i - 1]) /
                      (curve->gammas[i] - curve->gammas[i - 1]);
    const double dr = (curve->chi[i + 1] - curve->chi[i]) /
                      (curve->gammas[i + 1] - curve->gammas[i]);
    const double second = (dr - dl) / (curve->gammas[i + 1] -
                                       curve->gammas[i - 1]);
    if (second < -1e-6) {
      note << "chi second divided difference " << second << " at gamma = "
           << curve->gammas[i];
      ok = false;
    }
  }
  curve->convexity_certified = ok;
  curve->certification_note = ok ? "certified" : note.str();
}

double curve_chi_prime_at(const ChiCurve& curve, double gamma) {
  validate_grid(curve);
  const int k = locate(curve.gammas, gamma);
  const auto m = pchip_slopes(curve.gammas, curve.chi_prime);
  const Segment s = segment(curve.gammas, curve.chi_prime, m, k);
  return s.eval((gamma - curve.gammas[k]) / s.h);
}

double curve_chi_at(const ChiCurve& curve, double gamma) {
  validate_grid(curve);
  const int k = locate(curve.gammas, gamma);
  // Exact node hits return the tabulated value; locate clamps the last node
  // into the final segment, where integration would add its own error.
  if (gamma == curve.gammas[k + 1]) return curve.chi[k + 1];
  const auto m = pchip_slopes(curve.gammas, curve.chi_prime);
  const Segment s = segment(curve.gammas, curve.chi_prime, m, k);
  return curve.chi[k] + s.integral((gamma - curve.gammas[k]) / s.h);
}

const char* branch_name(RateResult::Branch b) {
  switch (b) {
    case RateResult::Branch::kInterior:
      return "interior";
    case RateResult::Branch::kKappaNegative:
      return "kappa_negative";
    case RateResult::Branch::kKappaAtOrAboveChiPrimeLimit:
      return "out-of-range";
  }
  return "?";
}

ChiCurve build_chi_curve(const ModelSpec& spec,
                         const std::vector<double>& gamma_grid,
                         const Grid& grid, bool use_poisson_derivative,
                         const ErgodicSchedule& schedule) {
  std::vector<double> gammas = gamma_grid;
  std::sort(gammas.begin(), gammas.end());
  if (gammas.empty() || gammas.back() >= 0.0)
    throw ConfigError("build_chi_curve: gamma grid must be negative");

  ChiCurve curve;
  curve.gammas = gammas;
  for (double gamma : gammas) {
    ErgodicSolution sol;
    try {
      sol = extract_ergodic(spec, gamma, grid, schedule);
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "build_chi_curve failed at gamma = " << gamma << ": " << e.what();
      throw NumericalError(os.str());
    }
    curve.chi.push_back(sol.chi);
    if (use_poisson_derivative) {
      const InvariantMeasure m = invariant_measure(spec, gamma, sol.w, grid);
      curve.chi_prime.push_back(chi_prime(spec, gamma, sol.w, m).theta);
      curve.chi_prime_source.push_back("poisson");
    } else {
      const double delta = std::max(1e-3, 5e-3 * std::abs(gamma));
      curve.chi_prime.push_back(
          chi_prime_fd_check(spec, gamma, delta, grid, schedule));
      curve.chi_prime_source.push_back("fd");
    }
  }
  certify_convexity(&curve);
  return curve;
}

RateResult legendre(const ChiCurve& curve, double kappa) {
  validate_grid(curve);
  if (!curve.convexity_certified)
    throw ConfigError("legendre: chi curve is not convexity-certified (" +
                      curve.certification_note + ")");
  RateResult r;
  r.kappa = kappa;
  if (kappa < 0.0) {
    r.branch = RateResult::Branch::kKappaNegative;
    r.I = kInf;
    r.J = -kInf;
    r.gamma_star = kNan;
    return r;
  }
  if (kappa >= curve.chi_prime.back()) {
    r.branch = RateResult::Branch::kKappaAtOrAboveChiPrimeLimit;
    r.I = 0.0;
    r.J = 0.0;
    r.gamma_star = kNan;
    return r;
  }
  r.branch = RateResult::Branch::kInterior;
  double gs;
  if (kappa <= curve.chi_prime.front()) {
    // The maximizer lies beyond the truncation; clamp and flag.
    gs = curve.gammas.front();
    r.truncated = true;
  } else {
    // chi'(gamma) = kappa by bisection on the monotone interpolant.
    double lo = curve.gammas.front(), hi = curve.gammas.back();
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo));
         ++it) {
      const double mid = 0.5 * (lo + hi);
      (curve_chi_prime_at(curve, mid) < kappa ? lo : hi) = mid;
    }
    gs = 0.5 * (lo + hi);
  }
  r.gamma_star = gs;
  r.I = std::max(0.0, gs * kappa - curve_chi_at(curve, gs));
  r.J = -r.I;
  return r;
}

std::vector<RateResult> rate_function_table(
    const ChiCurve& curve, const std::vector<double>& kappas) {
  std::vector<RateResult> out;
  out.reserve(kappas.size());
  for (double k : kappas) out.push_back(legendre(curve, k));
  return out;
}

}  // namespace dra
