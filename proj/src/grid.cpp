#include "dra/grid.hpp"

#include <cmath>
#include <sstream>

#include "dra/errors.hpp"
#include "json.hpp"

namespace dra {

Grid Grid::make1d(double lo, double hi, int n) {
  Grid g;
  g.dim = 1;
  g.lo = {lo, 0.0};
  g.hi = {hi, 0.0};
  g.num = {n, 1};
  g.validate();
  return g;
}

Grid Grid::make2d(double lo0, double hi0, int n0, double lo1, double hi1,
                  int n1) {
  Grid g;
  g.dim = 2;
  g.lo = {lo0, lo1};
  g.hi = {hi0, hi1};
  g.num = {n0, n1};
  g.validate();
  return g;
}

void Grid::validate() const {
  if (dim != 1 && dim != 2) throw ConfigError("grid dim must be 1 or 2");
  for (int ax = 0; ax < dim; ++ax) {
    if (num[ax] < 16)
      throw ConfigError("grid needs at least 16 nodes per axis");
    if (!(lo[ax] < hi[ax])) throw ConfigError("grid requires lo < hi");
  }
  if (dim == 1 && num[1] != 1) throw ConfigError("1-d grid must have num[1]=1");
}

double Grid::max_spacing() const {
  double h = spacing(0);
  if (dim == 2) h = std::max(h, spacing(1));
  return h;
}

Eigen::VectorXd Grid::point(int idx) const {
  auto c = coords(idx);
  Eigen::VectorXd x(dim);
  for (int ax = 0; ax < dim; ++ax) x[ax] = lo[ax] + c[ax] * spacing(ax);
  return x;
}

bool Grid::on_boundary(int idx) const { return !in_interior(idx, 1); }

bool Grid::in_interior(int idx, int margin) const {
  auto c = coords(idx);
  for (int ax = 0; ax < dim; ++ax) {
    if (c[ax] < margin || c[ax] >= num[ax] - margin) return false;
  }
  return true;
}

int Grid::anchor_index() const {
  std::array<int, 2> c{0, 0};
  for (int ax = 0; ax < dim; ++ax) {
    double t = (0.0 - lo[ax]) / spacing(ax);
    int i = static_cast<int>(std::lround(t));
    c[ax] = std::min(std::max(i, 0), num[ax] - 1);
  }
  return index(c[0], c[1]);
}

bool Grid::contains(const Eigen::VectorXd& x) const {
  for (int ax = 0; ax < dim; ++ax) {
    if (x[ax] < lo[ax] || x[ax] > hi[ax]) return false;
  }
  return true;
}

ScalarField::ScalarField(Grid grid, Eigen::VectorXd values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.nodes())
    throw ConfigError("field values do not match grid size");
}

ScalarField::ScalarField(Grid grid)
    : grid_(std::move(grid)), values_(Eigen::VectorXd::Zero(grid_.nodes())) {}

Eigen::VectorXd ScalarField::gradient(int idx, bool* one_sided) const {
  auto c = grid_.coords(idx);
  Eigen::VectorXd g(grid_.dim);
  bool face = false;
  for (int ax = 0; ax < grid_.dim; ++ax) {
    const double h = grid_.spacing(ax);
    auto shift = [&](int d) {
      auto cc = c;
      cc[ax] += d;
      return grid_.index(cc[0], cc[1]);
    };
    if (c[ax] == 0) {
      g[ax] = (values_[shift(1)] - values_[idx]) / h;
      face = true;
    } else if (c[ax] == grid_.num[ax] - 1) {
      g[ax] = (values_[idx] - values_[shift(-1)]) / h;
      face = true;
    } else {
      g[ax] = (values_[shift(1)] - values_[shift(-1)]) / (2.0 * h);
    }
  }
  if (one_sided) *one_sided = face;
  return g;
}

Eigen::MatrixXd ScalarField::gradients() const {
  Eigen::MatrixXd out(grid_.nodes(), grid_.dim);
  for (int i = 0; i < grid_.nodes(); ++i) out.row(i) = gradient(i).transpose();
  return out;
}

bool ScalarField::interpolate(const Eigen::VectorXd& x, double* value) const {
  bool inside = grid_.contains(x);
  std::array<int, 2> i0{0, 0};
  std::array<double, 2> frac{0.0, 0.0};
  for (int ax = 0; ax < grid_.dim; ++ax) {
    double t = (x[ax] - grid_.lo[ax]) / grid_.spacing(ax);
    t = std::min(std::max(t, 0.0), static_cast<double>(grid_.num[ax] - 1));
    i0[ax] = std::min(static_cast<int>(t), grid_.num[ax] - 2);
    frac[ax] = t - i0[ax];
  }
  if (grid_.dim == 1) {
    *value = (1.0 - frac[0]) * values_[i0[0]] + frac[0] * values_[i0[0] + 1];
  } else {
    const double v00 = values_[grid_.index(i0[0], i0[1])];
    const double v10 = values_[grid_.index(i0[0] + 1, i0[1])];
    const double v01 = values_[grid_.index(i0[0], i0[1] + 1)];
    const double v11 = values_[grid_.index(i0[0] + 1, i0[1] + 1)];
    *value = (1.0 - frac[0]) * ((1.0 - frac[1]) * v00 + frac[1] * v01) +
             frac[0] * ((1.0 - frac[1]) * v10 + frac[1] * v11);
  }
  return inside;
}

void ScalarField::normalize(int anchor, double anchor_value) {
  values_.array() += anchor_value - values_[anchor];
}

namespace {
nlohmann::json grid_json(const Grid& g) {
  nlohmann::json j;
  j["dim"] = g.dim;
  j["lo"] = std::vector<double>(g.lo.begin(), g.lo.begin() + g.dim);
  j["hi"] = std::vector<double>(g.hi.begin(), g.hi.begin() + g.dim);
  j["num"] = std::vector<int>(g.num.begin(), g.num.begin() + g.dim);
  return j;
}
}  // namespace

std::string ScalarField::to_json() const {
  nlohmann::json j;
  j["grid"] = grid_json(grid_);
  j["values"] = std::vector<double>(values_.begin(), values_.end());
  return j.dump();
}

std::string ScalarField::to_csv() const {
  std::ostringstream os;
  os.precision(12);
  os << (grid_.dim == 1 ? "# x,value\n" : "# x,y,value\n");
  for (int i = 0; i < grid_.nodes(); ++i) {
    Eigen::VectorXd x = grid_.point(i);
    for (int ax = 0; ax < grid_.dim; ++ax) os << x[ax] << ",";
    os << values_[i] << "\n";
  }
  return os.str();
}

ValueSurface::ValueSurface(Grid grid, std::vector<double> times)
    : grid_(std::move(grid)), times_(std::move(times)) {
  if (times_.size() < 2) throw ConfigError("surface needs at least two times");
  values_ = Eigen::MatrixXd::Zero(static_cast<int>(times_.size()),
                                  grid_.nodes());
}

std::string ValueSurface::to_json() const {
  nlohmann::json j;
  j["grid"] = grid_json(grid_);
  j["times"] = times_;
  std::vector<double> flat(values_.size());
  // row-major: time-slice blocks
  int k = 0;
  for (int t = 0; t < values_.rows(); ++t)
    for (int i = 0; i < values_.cols(); ++i) flat[k++] = values_(t, i);
  j["values"] = flat;
  return j.dump();
}

}  // namespace dra
