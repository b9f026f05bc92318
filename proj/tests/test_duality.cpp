#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dra/duality.hpp"
#include "dra/errors.hpp"
#include "dra/io.hpp"
#include "dra/oracle.hpp"

using namespace dra;

namespace {

ChiCurve merton_oracle_curve(double theta_sq, double lo, double hi, int n) {
  ChiCurve c;
  c.source = "oracle";
  for (int i = 0; i < n; ++i) {
    const double g = lo + i * (hi - lo) / (n - 1);
    const auto mv = oracle::merton_chi(theta_sq, g);
    c.gammas.push_back(g);
    c.chi.push_back(mv.chi);
    c.chi_prime.push_back(mv.chi_prime);
    c.chi_prime_source.push_back("oracle");
  }
  certify_convexity(&c);
  return c;
}

}  // namespace

TEST_CASE("certification accepts the oracle curve and catches corruption") {
  ChiCurve c = merton_oracle_curve(0.09, -8.0, -0.05, 100);
  CHECK(c.convexity_certified);
  c.chi[50] += 1e-3;  // break convexity
  certify_convexity(&c);
  CHECK(!c.convexity_certified);
  CHECK(c.certification_note.find("second divided difference") !=
        std::string::npos);
  CHECK_THROWS_AS(legendre(c, 0.02), ConfigError);
}

TEST_CASE("interpolants reproduce node values and stay monotone") {
  const ChiCurve c = merton_oracle_curve(0.09, -6.0, -0.1, 40);
  for (size_t i = 0; i < c.gammas.size(); ++i) {
    CHECK(curve_chi_prime_at(c, c.gammas[i]) ==
          doctest::Approx(c.chi_prime[i]).epsilon(1e-12));
    CHECK(curve_chi_at(c, c.gammas[i]) ==
          doctest::Approx(c.chi[i]).epsilon(1e-6));
  }
  double prev = 0.0;
  for (int k = 0; k <= 500; ++k) {
    const double g = -6.0 + k * 5.9 / 500.0;
    const double v = curve_chi_prime_at(c, g);
    if (k > 0) CHECK(v >= prev - 1e-12);
    prev = v;
  }
}

TEST_CASE("legendre branches") {
  const ChiCurve c = merton_oracle_curve(0.09, -8.0, -0.02, 400);

  const RateResult interior = legendre(c, 0.02);
  CHECK(interior.branch == RateResult::Branch::kInterior);
  CHECK(interior.gamma_star == doctest::Approx(-0.5).epsilon(1e-5));
  CHECK(interior.I == doctest::Approx(0.005).epsilon(1e-6));
  CHECK(interior.J == doctest::Approx(-0.005).epsilon(1e-6));
  CHECK(!interior.truncated);

  const RateResult neg = legendre(c, -0.01);
  CHECK(neg.branch == RateResult::Branch::kKappaNegative);
  CHECK(std::isinf(neg.J));
  CHECK(neg.J < 0.0);

  const RateResult high = legendre(c, 0.08);
  CHECK(high.branch == RateResult::Branch::kKappaAtOrAboveChiPrimeLimit);
  CHECK(high.I == 0.0);
  CHECK(high.J == 0.0);

  // kappa below chi'(gamma_min): clamped and flagged.
  const RateResult low = legendre(c, 1e-4);
  CHECK(low.branch == RateResult::Branch::kInterior);
  CHECK(low.truncated);
  CHECK(low.gamma_star == doctest::Approx(-8.0));
}

TEST_CASE("fenchel identity on the interior branch") {
  const ChiCurve c = merton_oracle_curve(0.09, -8.0, -0.02, 400);
  for (double kappa : {0.005, 0.01, 0.02, 0.04}) {
    const RateResult r = legendre(c, kappa);
    REQUIRE(r.branch == RateResult::Branch::kInterior);
    CHECK(curve_chi_prime_at(c, r.gamma_star) ==
          doctest::Approx(kappa).epsilon(1e-9));
    CHECK(curve_chi_at(c, r.gamma_star) - r.gamma_star * kappa ==
          doctest::Approx(-r.I).epsilon(1e-9));
  }
}

TEST_CASE("rate table matches the closed form and is shape-correct") {
  const ChiCurve c = merton_oracle_curve(0.09, -8.0, -0.02, 400);
  const std::vector<double> kappas{0.005, 0.02, 0.04};
  const auto rows = rate_function_table(c, kappas);
  const double theta = 0.3;
  for (size_t i = 0; i < kappas.size(); ++i) {
    const double ref =
        std::pow(std::sqrt(kappas[i]) - theta / std::sqrt(2.0), 2);
    CHECK(rows[i].I == doctest::Approx(ref).epsilon(1e-5));
  }
  CHECK(rows[0].I > rows[1].I);  // I nonincreasing
  CHECK(rows[1].I > rows[2].I);

  // J strictly concave on a dense interior grid.
  std::vector<double> dense;
  for (int i = 1; i < 60; ++i) dense.push_back(0.004 + i * 0.0006);
  const auto table = rate_function_table(c, dense);
  for (size_t i = 1; i + 1 < table.size(); ++i) {
    const double second =
        table[i + 1].J - 2.0 * table[i].J + table[i - 1].J;
    CHECK(second <= -1e-8);
  }

  CHECK(rate_function_table(c, {}).empty());
}

TEST_CASE("chi csv round trip preserves the certified curve") {
  const ChiCurve c = merton_oracle_curve(0.09, -4.0, -0.1, 25);
  const ChiCurve back = chi_curve_from_csv(chi_curve_csv(c));
  CHECK(back.convexity_certified);
  REQUIRE(back.gammas.size() == c.gammas.size());
  for (size_t i = 0; i < c.gammas.size(); ++i) {
    CHECK(back.gammas[i] == c.gammas[i]);
    CHECK(back.chi[i] == c.chi[i]);
    CHECK(back.chi_prime[i] == c.chi_prime[i]);
  }
  CHECK_THROWS_AS(chi_curve_from_csv("x,y\n1,2\n"), ConfigError);
}
