#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dra/errors.hpp"
#include "dra/grid.hpp"

using namespace dra;

TEST_CASE("1d grid indexing and points") {
  const Grid g = Grid::make1d(-2.0, 2.0, 17);
  CHECK(g.nodes() == 17);
  CHECK(g.spacing(0) == doctest::Approx(0.25));
  CHECK(g.point(0)[0] == doctest::Approx(-2.0));
  CHECK(g.point(16)[0] == doctest::Approx(2.0));
  CHECK(g.on_boundary(0));
  CHECK(g.on_boundary(16));
  CHECK(!g.on_boundary(8));
  CHECK(g.anchor_index() == 8);
  CHECK(g.point(g.anchor_index())[0] == doctest::Approx(0.0));
}

TEST_CASE("2d grid layout is row-major with axis 0 outermost") {
  const Grid g = Grid::make2d(-1.0, 1.0, 21, -3.0, 3.0, 31);
  CHECK(g.nodes() == 21 * 31);
  CHECK(g.index(2, 5) == 2 * 31 + 5);
  const auto c = g.coords(g.index(2, 5));
  CHECK(c[0] == 2);
  CHECK(c[1] == 5);
  const Eigen::VectorXd x = g.point(g.index(0, 30));
  CHECK(x[0] == doctest::Approx(-1.0));
  CHECK(x[1] == doctest::Approx(3.0));
  CHECK(g.in_interior(g.index(10, 15), 5));
  CHECK(!g.in_interior(g.index(3, 15), 5));
}

TEST_CASE("too-coarse grids are rejected") {
  CHECK_THROWS_AS(Grid::make1d(-1.0, 1.0, 8).validate(), ConfigError);
  CHECK_THROWS_AS(Grid::make1d(1.0, -1.0, 33).validate(), ConfigError);
}

TEST_CASE("gradients are exact on quadratics in the interior") {
  const Grid g = Grid::make2d(-2.0, 2.0, 33, -2.0, 2.0, 33);
  Eigen::VectorXd v(g.nodes());
  for (int i = 0; i < g.nodes(); ++i) {
    const Eigen::VectorXd x = g.point(i);
    v[i] = 0.5 * x[0] * x[0] + x[0] * x[1] - x[1];
  }
  const ScalarField f(g, v);
  for (int i = 0; i < g.nodes(); ++i) {
    if (!g.in_interior(i)) continue;
    const Eigen::VectorXd x = g.point(i);
    bool face = true;
    const Eigen::VectorXd grad = f.gradient(i, &face);
    CHECK(!face);
    CHECK(grad[0] == doctest::Approx(x[0] + x[1]).epsilon(1e-12));
    CHECK(grad[1] == doctest::Approx(x[0] - 1.0).epsilon(1e-12));
  }
}

TEST_CASE("multilinear interpolation reproduces affine functions") {
  const Grid g = Grid::make2d(-1.0, 1.0, 21, -1.0, 1.0, 21);
  Eigen::VectorXd v(g.nodes());
  for (int i = 0; i < g.nodes(); ++i) {
    const Eigen::VectorXd x = g.point(i);
    v[i] = 2.0 * x[0] - 3.0 * x[1] + 0.5;
  }
  const ScalarField f(g, v);
  Eigen::VectorXd x(2);
  x << 0.137, -0.482;
  double got = 0.0;
  CHECK(f.interpolate(x, &got));
  CHECK(got == doctest::Approx(2.0 * x[0] - 3.0 * x[1] + 0.5).epsilon(1e-12));
  x << 5.0, 0.0;  // clamped to the face
  CHECK(!f.interpolate(x, &got));
  CHECK(got == doctest::Approx(2.0 * 1.0 + 0.5).epsilon(1e-12));
}

TEST_CASE("normalize pins the anchor value") {
  const Grid g = Grid::make1d(-1.0, 1.0, 17);
  ScalarField f(g, Eigen::VectorXd::LinSpaced(17, 3.0, 5.0));
  f.normalize(g.anchor_index());
  CHECK(f[g.anchor_index()] == doctest::Approx(0.0));
}

TEST_CASE("value surface stores time slices") {
  const Grid g = Grid::make1d(0.0, 1.0, 16);
  ValueSurface s(g, {0.0, 0.5, 1.0});
  s.set_slice(1, Eigen::VectorXd::Constant(16, 7.0));
  CHECK(s.at(1, 3) == doctest::Approx(7.0));
  CHECK(s.slice_field(1)[0] == doctest::Approx(7.0));
  CHECK(s.time_steps() == 3);
}
