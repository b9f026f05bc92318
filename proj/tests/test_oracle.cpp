#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dra/errors.hpp"
#include "dra/io.hpp"
#include "dra/oracle.hpp"

using namespace dra;

namespace {

ModelSpec lgq_model() {
  return parse_model_json(read_file(std::string(CONFIG_DIR) + "/lgq.json"));
}

}  // namespace

TEST_CASE("merton closed forms") {
  const double ts = 0.09;
  CHECK(oracle::merton_chi(ts, -0.5).chi == doctest::Approx(-0.015));
  CHECK(oracle::merton_chi(ts, -1.0).chi == doctest::Approx(-0.0225));
  CHECK(oracle::merton_chi(ts, -4.0).chi == doctest::Approx(-0.036));
  // chi' against a centered difference of chi.
  const double dg = 1e-6;
  const double fd =
      (oracle::merton_chi(ts, -2.0 + dg).chi -
       oracle::merton_chi(ts, -2.0 - dg).chi) / (2.0 * dg);
  CHECK(oracle::merton_chi(ts, -2.0).chi_prime ==
        doctest::Approx(fd).epsilon(1e-8));
}

TEST_CASE("merton rate transform") {
  const auto r = oracle::merton_rate(0.09, 0.02);
  CHECK(r.gamma_star == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(r.I == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(r.J == doctest::Approx(-0.005).epsilon(1e-12));
  // I(kappa) = (sqrt(kappa) - theta/sqrt(2))^2.
  const double theta = 0.3;
  for (double kappa : {0.005, 0.04}) {
    const double ref = std::pow(std::sqrt(kappa) - theta / std::sqrt(2.0), 2);
    CHECK(oracle::merton_rate(0.09, kappa).I ==
          doctest::Approx(ref).epsilon(1e-12));
  }
  CHECK_THROWS_AS(oracle::merton_rate(0.09, 0.08), ConfigError);
  CHECK_THROWS_AS(oracle::merton_rate(0.09, -0.01), ConfigError);
}

TEST_CASE("lgq riccati reference values") {
  const ModelSpec spec = lgq_model();
  const auto sol = oracle::lgq_riccati(spec, -1.0);
  CHECK(sol.p == doctest::Approx(3.0 - std::sqrt(10.0)).epsilon(1e-12));
  CHECK(sol.chi == doctest::Approx(0.5 * (3.0 - std::sqrt(10.0))));
  CHECK(sol.chi == doctest::Approx(-0.081139).epsilon(1e-4));
  CHECK(sol.chi_prime == doctest::Approx(0.027740).epsilon(1e-3));
  CHECK(sol.q == doctest::Approx(0.0));
}

TEST_CASE("lgq riccati self-verification residual") {
  const ModelSpec spec = lgq_model();
  for (double gamma : {-4.0, -2.0, -1.0, -0.5, -0.25, -0.1}) {
    const auto sol = oracle::lgq_riccati(spec, gamma);
    CHECK(oracle::lgq_residual(spec, gamma, sol,
                               {-3.0, -1.0, 0.0, 0.5, 1.7, 4.0}) < 1e-10);
  }
}

TEST_CASE("lgq implicit chi' matches a finite difference") {
  const ModelSpec spec = lgq_model();
  for (double gamma : {-2.0, -0.5}) {
    const double dg = 1e-6;
    const double fd = (oracle::lgq_riccati(spec, gamma + dg).chi -
                       oracle::lgq_riccati(spec, gamma - dg).chi) /
                      (2.0 * dg);
    CHECK(oracle::lgq_riccati(spec, gamma).chi_prime ==
          doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("riccati bound matches the scalar tanh solution") {
  const ModelSpec spec = lgq_model();
  oracle::RiccatiBoundParams params;
  params.c0 = 1.0;
  params.c0_prime = 0.0;
  params.c1 = 1.0;
  params.c2 = 1.0;
  params.c_beta = 8.0;
  const double T = 1.5;
  const auto pair = oracle::riccati_bound(spec, -1.0, T, params, 4000);
  // dP/dtau = b - quad P^2, P(0) = 0  =>  P = sqrt(b/quad) tanh(sqrt(b quad) tau).
  REQUIRE(pair.b > 0.0);
  REQUIRE(pair.quad_coeff > 0.0);
  const double amp = std::sqrt(pair.b / pair.quad_coeff);
  const double rate = std::sqrt(pair.b * pair.quad_coeff);
  for (size_t k = 0; k < pair.times.size(); k += 500) {
    const double tau = T - pair.times[k];
    CHECK(pair.P[k](0, 0) ==
          doctest::Approx(amp * std::tanh(rate * tau)).epsilon(1e-8));
  }
  // Terminal data.
  CHECK(pair.P.back()(0, 0) == doctest::Approx(0.0));
  CHECK(pair.q.back() == doctest::Approx(0.0));
}
