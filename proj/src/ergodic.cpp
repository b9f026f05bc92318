#include "dra/ergodic.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <random>
#include <sstream>

#include "dra/errors.hpp"

namespace dra {
namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

Eigen::VectorXd trapezoid_weights(const Grid& g) {
  Eigen::VectorXd w(g.nodes());
  for (int i = 0; i < g.nodes(); ++i) {
    const auto c = g.coords(i);
    double v = 1.0;
    for (int ax = 0; ax < g.dim; ++ax) {
      const bool edge = c[ax] == 0 || c[ax] == g.num[ax] - 1;
      v *= g.spacing(ax) * (edge ? 0.5 : 1.0);
    }
    w[i] = v;
  }
  return w;
}

// Hybrid central/upwind coefficients of v(+1), v(-1) inside the generator
// L v = 1/2 a v'' + b v' along one axis; both are >= 0 by construction.
void axis_coeffs(double a, double b, double h, double* cp, double* cm) {
  const double diff = 0.5 * a / (h * h);
  if (std::abs(b) * h <= a) {
    *cp = diff + b / (2.0 * h);
    *cm = diff - b / (2.0 * h);
  } else if (b > 0.0) {
    *cp = diff + b / h;
    *cm = diff;
  } else {
    *cp = diff;
    *cm = diff - b / h;
  }
}

// Discrete generator with the given nodal drift, diffusion lambda lambda*,
// and reflecting (no-flux) boundary: a missing face neighbour is folded onto
// the mirror neighbour, so every row sums to zero and off-diagonals are >= 0.
// Cross-derivative terms apply to interior nodes only.
SpMat reflecting_generator(const ModelSpec& spec, const Grid& g,
                           const Eigen::MatrixXd& drift) {
  const int nn = g.nodes();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(nn) * 9);
  for (int i = 0; i < nn; ++i) {
    const auto c = g.coords(i);
    const Eigen::VectorXd x = g.point(i);
    const CoefficientValues cv = eval_coefficients(spec, x);
    const Eigen::MatrixXd a = cv.lambda * cv.lambda.transpose();
    auto at = [&](int d0, int d1) { return g.index(c[0] + d0, c[1] + d1); };
    double diag = 0.0;
    for (int ax = 0; ax < g.dim; ++ax) {
      double cp, cm;
      axis_coeffs(a(ax, ax), drift(i, ax), g.spacing(ax), &cp, &cm);
      const bool lo = c[ax] == 0, hi = c[ax] == g.num[ax] - 1;
      const int ip = ax == 0 ? at(1, 0) : at(0, 1);
      const int im = ax == 0 ? at(-1, 0) : at(0, -1);
      if (lo) {
        trips.emplace_back(i, ip, cp + cm);  // v(-1) := v(+1)
      } else if (hi) {
        trips.emplace_back(i, im, cp + cm);
      } else {
        trips.emplace_back(i, ip, cp);
        trips.emplace_back(i, im, cm);
      }
      diag -= cp + cm;
    }
    if (g.dim == 2 && a(0, 1) != 0.0 && g.in_interior(i)) {
      const double cc = a(0, 1) / (4.0 * g.spacing(0) * g.spacing(1));
      trips.emplace_back(i, at(1, 1), cc);
      trips.emplace_back(i, at(-1, -1), cc);
      trips.emplace_back(i, at(1, -1), -cc);
      trips.emplace_back(i, at(-1, 1), -cc);
    }
    trips.emplace_back(i, i, diag);
  }
  SpMat L(nn, nn);
  L.setFromTriplets(trips.begin(), trips.end());
  return L;
}

void require_inward_drift(const Grid& g, const Eigen::MatrixXd& drift) {
  for (int i = 0; i < g.nodes(); ++i) {
    if (!g.on_boundary(i)) continue;
    const auto c = g.coords(i);
    for (int ax = 0; ax < g.dim; ++ax) {
      const int dir = c[ax] == 0 ? -1 : (c[ax] == g.num[ax] - 1 ? 1 : 0);
      if (dir != 0 && drift(i, ax) * dir >= 0.0) {
        std::ostringstream os;
        os << "invariant_measure: drift is not inward at the boundary node "
              "x = ["
           << g.point(i).transpose()
           << "]; enlarge the domain or the controlled factor process is "
              "not ergodic";
        throw NumericalError(os.str());
      }
    }
  }
}

void tail_and_boundary_stats(const Grid& g, InvariantMeasure* m) {
  // Gaussian tail: regress log density on |x|^2 over the outer shell.
  double sxx = 0.0, sx = 0.0, sy = 0.0, sxy = 0.0;
  int used = 0;
  double shell = 0.0;
  for (int ax = 0; ax < g.dim; ++ax)
    shell = std::max(shell, 0.5 * (g.hi[ax] - g.lo[ax]));
  const double r2min = 0.36 * shell * shell;
  // Densities below the linear-algebra noise floor carry no tail information.
  const double floor = 1e-12 * m->density.maxCoeff();
  m->boundary_mass = 0.0;
  for (int i = 0; i < g.nodes(); ++i) {
    const Eigen::VectorXd x = g.point(i);
    for (int ax = 0; ax < g.dim; ++ax) {
      const double margin = 0.05 * (g.hi[ax] - g.lo[ax]);
      if (x[ax] < g.lo[ax] + margin || x[ax] > g.hi[ax] - margin) {
        m->boundary_mass += m->density[i] * m->quad_weights[i];
        break;
      }
    }
    const double r2 = x.squaredNorm();
    if (r2 < r2min || m->density[i] <= floor) continue;
    const double y = std::log(m->density[i]);
    sx += r2;
    sy += y;
    sxx += r2 * r2;
    sxy += r2 * y;
    ++used;
  }
  if (used >= 3) {
    const double denom = used * sxx - sx * sx;
    if (denom > 0.0)
      m->gaussian_tail_delta = -(used * sxy - sx * sy) / denom;
  }
}

InvariantMeasure measure_by_simulation(const ModelSpec& spec, const Grid& g,
                                       const Eigen::MatrixXd& drift,
                                       const ErgodicAverageOptions& opts) {
  if (opts.steps < 1000 || opts.dt <= 0.0 || opts.burn_in < 0)
    throw ConfigError("invariant_measure: bad ergodic-average options");
  std::vector<ScalarField> b;
  b.reserve(g.dim);
  for (int ax = 0; ax < g.dim; ++ax)
    b.emplace_back(g, Eigen::VectorXd(drift.col(ax)));

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(spec.n);
  const double sdt = std::sqrt(opts.dt);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(g.nodes());
  std::int64_t outside = 0;

  const bool frozen_lambda = spec.lambda.is_constant();
  const Eigen::MatrixXd lambda0 = frozen_lambda
                                      ? spec.lambda.eval(x)
                                      : Eigen::MatrixXd();
  Eigen::VectorXd xi(spec.n + spec.m), bx(spec.n);
  for (std::int64_t k = 0; k < opts.burn_in + opts.steps; ++k) {
    for (int ax = 0; ax < g.dim; ++ax) {
      double v;
      if (!b[ax].interpolate(x, &v)) ++outside;
      bx[ax] = v;
    }
    for (int j = 0; j < xi.size(); ++j) xi[j] = gauss(rng);
    if (frozen_lambda)
      x += bx * opts.dt + sdt * (lambda0 * xi);
    else
      x += bx * opts.dt + sdt * (spec.lambda.eval(x) * xi);
    if (k < opts.burn_in) continue;
    // Nearest-node bin; excursions beyond the box land in the edge bin.
    int idx0 = 0, idx1 = 0;
    for (int ax = 0; ax < g.dim; ++ax) {
      int j = static_cast<int>(
          std::lround((x[ax] - g.lo[ax]) / g.spacing(ax)));
      j = std::clamp(j, 0, g.num[ax] - 1);
      (ax == 0 ? idx0 : idx1) = j;
    }
    counts[g.index(idx0, idx1)] += 1.0;
  }

  InvariantMeasure m;
  m.grid = g;
  m.quad_weights = trapezoid_weights(g);
  m.density = counts.cwiseQuotient(m.quad_weights) /
              static_cast<double>(opts.steps);
  m.normalization_error =
      static_cast<double>(outside) / static_cast<double>(opts.steps);
  const double mass = m.density.dot(m.quad_weights);
  if (mass <= 0.0)
    throw NumericalError("invariant_measure: empty ergodic-average histogram");
  m.density /= mass;
  tail_and_boundary_stats(g, &m);
  return m;
}

}  // namespace

Eigen::MatrixXd optimal_drift(const ModelSpec& spec, double gamma,
                              const ScalarField& w) {
  const Grid& g = w.grid();
  if (g.dim != spec.n)
    throw ConfigError("optimal_drift: grid dimension must equal n");
  const Eigen::MatrixXd grads = w.gradients();
  Eigen::MatrixXd drift(g.nodes(), spec.n);
  for (int i = 0; i < g.nodes(); ++i) {
    const Eigen::VectorXd x = g.point(i);
    const CoefficientValues c = eval_coefficients(spec, x);
    const DerivedCoefficients d = derived_gamma(spec, x, gamma);
    drift.row(i) =
        (d.beta_gamma +
         c.lambda * d.N_inv * c.lambda.transpose() * grads.row(i).transpose())
            .transpose();
  }
  return drift;
}

InvariantMeasure invariant_measure_for_drift(const ModelSpec& spec,
                                             const Grid& grid,
                                             const Eigen::MatrixXd& drift) {
  grid.validate();
  if (drift.rows() != grid.nodes() || drift.cols() != grid.dim)
    throw ConfigError("invariant_measure: drift shape mismatch");
  require_inward_drift(grid, drift);

  const int nn = grid.nodes();
  const SpMat L = reflecting_generator(spec, grid, drift);
  SpMat A = SpMat(L.transpose());
  double dmax = 0.0;
  for (int i = 0; i < nn; ++i) dmax = std::max(dmax, std::abs(A.coeff(i, i)));
  for (int i = 0; i < nn; ++i) A.coeffRef(i, i) += 1e-10 * dmax;

  Eigen::SparseLU<SpMat> lu(A);
  if (lu.info() != Eigen::Success)
    throw NumericalError("invariant_measure: singular adjoint factorization");

  // Inverse iteration with shift 0 for the Perron null vector of L*.
  Eigen::VectorXd m = Eigen::VectorXd::Constant(nn, 1.0 / nn);
  const SpMat Lt = SpMat(L.transpose());
  for (int iter = 0; iter < 50; ++iter) {
    Eigen::VectorXd y = lu.solve(m);
    if (y.sum() < 0.0) y = -y;
    m = y / y.cwiseAbs().sum();
    const double res = (Lt * m).cwiseAbs().maxCoeff();
    if (res <= 1e-13 * dmax) break;
  }
  const double mmax = m.maxCoeff();
  if (mmax <= 0.0 || m.minCoeff() < -1e-6 * mmax)
    throw NumericalError(
        "invariant_measure: adjoint null vector is not signed; the "
        "stationary density is not unique on this grid");
  m = m.cwiseMax(0.0);

  InvariantMeasure out;
  out.grid = grid;
  out.quad_weights = trapezoid_weights(grid);
  // Scale so that each node carries unit cell mass, then report how far the
  // trapezoid quadrature is from one before the exact rescale.
  double cell = 1.0;
  for (int ax = 0; ax < grid.dim; ++ax) cell *= grid.spacing(ax);
  out.density = m / (m.sum() * cell);
  out.normalization_error =
      std::abs(out.density.dot(out.quad_weights) - 1.0);
  out.density /= out.density.dot(out.quad_weights);
  tail_and_boundary_stats(grid, &out);
  return out;
}

InvariantMeasure invariant_measure(const ModelSpec& spec, double gamma,
                                   const ScalarField& w, const Grid& grid,
                                   MeasureMethod method,
                                   const ErgodicAverageOptions& opts) {
  ScalarField wg = w;
  if (w.grid().nodes() != grid.nodes()) {
    // Resample w onto the requested grid.
    Eigen::VectorXd v(grid.nodes());
    for (int i = 0; i < grid.nodes(); ++i) {
      double val;
      w.interpolate(grid.point(i), &val);
      v[i] = val;
    }
    wg = ScalarField(grid, std::move(v));
  }
  const Eigen::MatrixXd drift = optimal_drift(spec, gamma, wg);
  require_inward_drift(grid, drift);
  if (method == MeasureMethod::kFokkerPlanck)
    return invariant_measure_for_drift(spec, grid, drift);
  return measure_by_simulation(spec, grid, drift, opts);
}

PoissonSolution chi_prime(const ModelSpec& spec, double gamma,
                          const ScalarField& w, const InvariantMeasure& m) {
  const Grid& g = w.grid();
  if (g.nodes() != m.grid.nodes())
    throw ConfigError("chi_prime: w and measure grids differ");
  const int nn = g.nodes();
  const Eigen::MatrixXd grads = w.gradients();

  Eigen::VectorXd v1(nn);
  const double scale = 1.0 / (2.0 * (1.0 - gamma) * (1.0 - gamma));
  for (int i = 0; i < nn; ++i) {
    const Eigen::VectorXd x = g.point(i);
    const CoefficientValues c = eval_coefficients(spec, x);
    const DerivedCoefficients d = derived_gamma(spec, x, gamma);
    const Eigen::VectorXd u =
        d.alpha_hat + c.sigma * c.lambda.transpose() * grads.row(i).transpose();
    v1[i] = scale * u.dot(d.sigma_sigma_t_inv * u);
  }
  PoissonSolution out;
  out.theta = m.integrate(v1);
  out.v1 = ScalarField(g, v1);

  // L-bar u = theta - V1 on the interior, zero third normal difference on
  // the faces, and the anchor equation replaced by u(x0) = 0.
  const Eigen::MatrixXd drift = optimal_drift(spec, gamma, w);
  const SpMat L = reflecting_generator(spec, g, drift);
  const Eigen::SparseMatrix<double, Eigen::RowMajor> Lr(L);
  const int anchor = g.anchor_index();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(nn) * 9);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nn);
  for (int i = 0; i < nn; ++i) {
    if (i == anchor) {
      trips.emplace_back(i, i, 1.0);
      continue;
    }
    if (g.on_boundary(i)) {
      // Quadratic extrapolation closure, as in the HJB discretization.
      const auto c = g.coords(i);
      int ax = -1, dir = 0;
      for (int a = 0; a < g.dim; ++a) {
        if (c[a] == 0) { ax = a; dir = 1; break; }
        if (c[a] == g.num[a] - 1) { ax = a; dir = -1; break; }
      }
      auto at = [&](int d) {
        auto cc = c;
        cc[ax] += dir * d;
        return g.index(cc[0], cc[1]);
      };
      trips.emplace_back(i, at(0), 1.0);
      trips.emplace_back(i, at(1), -3.0);
      trips.emplace_back(i, at(2), 3.0);
      trips.emplace_back(i, at(3), -1.0);
      continue;
    }
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator
             it(Lr, i);
         it; ++it)
      trips.emplace_back(i, it.col(), it.value());
    rhs[i] = out.theta - v1[i];
  }
  SpMat M(nn, nn);
  M.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseLU<SpMat> lu(M);
  if (lu.info() != Eigen::Success)
    throw NumericalError("chi_prime: singular Poisson system");
  Eigen::VectorXd u = lu.solve(rhs);
  u.array() -= u[anchor];
  out.u = ScalarField(g, std::move(u));

  const Eigen::VectorXd lr = L * out.u.values();
  double worst = 0.0;
  for (int i = 0; i < nn; ++i) {
    if (!g.in_interior(i)) continue;
    worst = std::max(worst, std::abs(lr[i] - (out.theta - v1[i])));
  }
  out.residual = worst;
  return out;
}

double chi_prime_fd_check(const ModelSpec& spec, double gamma, double delta,
                          const Grid& grid, const ErgodicSchedule& schedule) {
  if (!(delta > 0.0) || gamma + delta >= 0.0)
    throw ConfigError("chi_prime_fd_check: need gamma + delta < 0, delta > 0");
  const ErgodicSolution hi = extract_ergodic(spec, gamma + delta, grid,
                                             schedule);
  const ErgodicSolution lo = extract_ergodic(spec, gamma - delta, grid,
                                             schedule);
  return (hi.chi - lo.chi) / (2.0 * delta);
}

ConditionCheck check_condition_2_26(const ModelSpec& spec, double gamma,
                                    const ScalarField& w) {
  const Grid& g = w.grid();
  const Eigen::MatrixXd grads = w.gradients();
  ConditionCheck out;
  out.holds = true;
  // Both sides vanish together where theta^2 does (e.g. at the origin of a
  // linear model); compare against a scale set by the largest theta^2 so the
  // ratio stays meaningful there.
  double theta_scale = 1.0;
  for (int i = 0; i < g.nodes(); ++i) {
    if (!g.in_interior(i)) continue;
    theta_scale = std::max(
        theta_scale, derived_gamma(spec, g.point(i), gamma).theta_sq);
  }
  const double slack = 1e-12 * theta_scale;
  for (int i = 0; i < g.nodes(); ++i) {
    if (!g.in_interior(i)) continue;
    const Eigen::VectorXd x = g.point(i);
    const CoefficientValues c = eval_coefficients(spec, x);
    const DerivedCoefficients d = derived_gamma(spec, x, gamma);
    const Eigen::VectorXd t =
        c.sigma * c.lambda.transpose() * grads.row(i).transpose();
    const double lhs = t.dot(d.sigma_sigma_t_inv * t);
    const double ratio = lhs / std::max(d.theta_sq, slack);
    if (ratio > out.max_ratio) {
      out.max_ratio = ratio;
      out.worst_node = i;
    }
    if (lhs >= d.theta_sq + slack) out.holds = false;
  }
  return out;
}

double chi_zero(const ModelSpec& spec, const Grid& grid) {
  Eigen::MatrixXd drift(grid.nodes(), spec.n);
  Eigen::VectorXd half_theta_sq(grid.nodes());
  for (int i = 0; i < grid.nodes(); ++i) {
    const Eigen::VectorXd x = grid.point(i);
    const DerivedCoefficients d = derived_gamma(spec, x, -1.0);  // G, theta_sq
    drift.row(i) = d.G.transpose();
    half_theta_sq[i] = 0.5 * d.theta_sq;
  }
  const InvariantMeasure m = invariant_measure_for_drift(spec, grid, drift);
  return m.integrate(half_theta_sq);
}

}  // namespace dra
