#include "dra/hjb.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <sstream>

#include "dra/errors.hpp"

namespace dra {
namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// gamma-dependent coefficients frozen per node for one (spec, gamma, grid).
struct NodeData {
  Eigen::MatrixXd a;       // lambda lambda*, n x n
  Eigen::MatrixXd lambda;  // n x (n+m)
  Eigen::MatrixXd N, N_inv;
  Eigen::MatrixXd Q;       // lambda N^-1 lambda*
  Eigen::VectorXd G, beta_gamma;
  Eigen::VectorXd Sa;      // Sigma* alpha_hat, n+m
  double U = 0.0;
  double half_theta_sq = 0.0;
};

struct Problem {
  Grid grid;
  int dim = 1;
  std::vector<NodeData> nodes;
};

Problem build_problem(const ModelSpec& spec, double gamma, const Grid& grid) {
  spec.validate();
  Problem pd;
  pd.grid = grid;
  pd.dim = grid.dim;
  if (grid.dim != spec.n)
    throw ConfigError("grid dimension must equal the factor dimension n");
  pd.nodes.resize(grid.nodes());
  for (int i = 0; i < grid.nodes(); ++i) {
    const Eigen::VectorXd x = grid.point(i);
    const CoefficientValues c = eval_coefficients(spec, x);
    const DerivedCoefficients d = derived_gamma(spec, x, gamma);
    NodeData& nd = pd.nodes[i];
    nd.a = c.lambda * c.lambda.transpose();
    nd.lambda = c.lambda;
    nd.N = d.N;
    nd.N_inv = d.N_inv;
    nd.Q = c.lambda * d.N_inv * c.lambda.transpose();
    nd.G = d.G;
    nd.beta_gamma = d.beta_gamma;
    nd.Sa = d.Sigma.transpose() * d.alpha_hat;
    nd.U = d.U_gamma;
    nd.half_theta_sq = 0.5 * d.theta_sq;
  }
  return pd;
}

// Adds the row of (shift * v - [1/2 tr(a D^2 v) + drift . Dv])_i for an
// interior node. Drift per axis is discretized centrally when the cell
// Peclet number allows a monotone row and upwinded otherwise.
void add_interior_row(const Problem& pd, int idx,
                      const Eigen::VectorXd& drift, double shift,
                      std::vector<Triplet>* trips) {
  const Grid& g = pd.grid;
  const NodeData& nd = pd.nodes[idx];
  const auto c = g.coords(idx);
  double diag = shift;
  auto at = [&](int d0, int d1) { return g.index(c[0] + d0, c[1] + d1); };

  for (int ax = 0; ax < g.dim; ++ax) {
    const double h = g.spacing(ax);
    const double adiag = nd.a(ax, ax);
    const double diff = 0.5 * adiag / (h * h);
    const double b = drift[ax];
    const bool central = std::abs(b) * h <= adiag;  // keeps off-diagonals <= 0
    double cp, cm;  // coefficients of v(+1), v(-1) inside L
    if (central) {
      cp = diff + b / (2.0 * h);
      cm = diff - b / (2.0 * h);
    } else if (b > 0.0) {
      cp = diff + b / h;
      cm = diff;
    } else {
      cp = diff;
      cm = diff - b / h;
    }
    const int ip = ax == 0 ? at(1, 0) : at(0, 1);
    const int im = ax == 0 ? at(-1, 0) : at(0, -1);
    trips->emplace_back(idx, ip, -cp);
    trips->emplace_back(idx, im, -cm);
    diag += cp + cm;
  }
  if (g.dim == 2 && nd.a(0, 1) != 0.0) {
    const double cc = nd.a(0, 1) / (4.0 * g.spacing(0) * g.spacing(1));
    trips->emplace_back(idx, at(1, 1), -cc);
    trips->emplace_back(idx, at(-1, -1), -cc);
    trips->emplace_back(idx, at(1, -1), cc);
    trips->emplace_back(idx, at(-1, 1), cc);
  }
  trips->emplace_back(idx, idx, diag);
}

// Zero third difference along the inward direction: quadratic extrapolation
// at the artificial boundary.
void add_closure_row(const Grid& g, int idx, std::vector<Triplet>* trips) {
  const auto c = g.coords(idx);
  int ax = -1, dir = 0;
  for (int a = 0; a < g.dim; ++a) {
    if (c[a] == 0) {
      ax = a;
      dir = 1;
      break;
    }
    if (c[a] == g.num[a] - 1) {
      ax = a;
      dir = -1;
      break;
    }
  }
  auto at = [&](int d) {
    auto cc = c;
    cc[ax] += dir * d;
    return g.index(cc[0], cc[1]);
  };
  trips->emplace_back(idx, at(0), 1.0);
  trips->emplace_back(idx, at(1), -3.0);
  trips->emplace_back(idx, at(2), 3.0);
  trips->emplace_back(idx, at(3), -1.0);
}

Eigen::MatrixXd field_gradients(const Grid& g, const Eigen::VectorXd& v) {
  return ScalarField(g, v).gradients();
}

// One policy-improvement step for the control representation: freeze
// z = -N^-1 (lambda* Dv - Sigma* alpha_hat), yielding effective drift
// G + lambda z and running cost phi(x, z).
void frozen_policy(const Problem& pd, const Eigen::MatrixXd& grads,
                   Eigen::MatrixXd* drift, Eigen::VectorXd* cost) {
  const int nn = pd.grid.nodes();
  drift->resize(nn, pd.dim);
  cost->resize(nn);
  for (int i = 0; i < nn; ++i) {
    const NodeData& nd = pd.nodes[i];
    const Eigen::VectorXd xi =
        nd.lambda.transpose() * grads.row(i).transpose() - nd.Sa;
    const Eigen::VectorXd z = -nd.N_inv * xi;
    drift->row(i) = (nd.G + nd.lambda * z).transpose();
    (*cost)[i] =
        0.5 * z.dot(nd.N * z) - z.dot(nd.Sa) + nd.half_theta_sq;
  }
}

// Applies the discrete generator 1/2 tr(a D^2 v) + drift . D v at an
// interior node with the same hybrid central/upwind stencil that
// add_interior_row assembles, so fixed points of the linear solves get a
// consistent residual of zero.
double apply_L(const Problem& pd, int idx, const Eigen::VectorXd& drift,
               const Eigen::VectorXd& v) {
  const Grid& g = pd.grid;
  const NodeData& nd = pd.nodes[idx];
  const auto c = g.coords(idx);
  auto at = [&](int d0, int d1) { return g.index(c[0] + d0, c[1] + d1); };
  double out = 0.0;
  for (int ax = 0; ax < g.dim; ++ax) {
    const double h = g.spacing(ax);
    const double adiag = nd.a(ax, ax);
    const double diff = 0.5 * adiag / (h * h);
    const double b = drift[ax];
    const bool central = std::abs(b) * h <= adiag;
    double cp, cm;
    if (central) {
      cp = diff + b / (2.0 * h);
      cm = diff - b / (2.0 * h);
    } else if (b > 0.0) {
      cp = diff + b / h;
      cm = diff;
    } else {
      cp = diff;
      cm = diff - b / h;
    }
    const int ip = ax == 0 ? at(1, 0) : at(0, 1);
    const int im = ax == 0 ? at(-1, 0) : at(0, -1);
    out += cp * v[ip] + cm * v[im] - (cp + cm) * v[idx];
  }
  if (g.dim == 2 && nd.a(0, 1) != 0.0) {
    out += nd.a(0, 1) *
           (v[at(1, 1)] + v[at(-1, -1)] - v[at(1, -1)] - v[at(-1, 1)]) /
           (4.0 * g.spacing(0) * g.spacing(1));
  }
  return out;
}

// Residual of the optimized scheme at v: the policy is re-frozen at v, so
//   r = shift*v - L_{drift(v)} v - cost(v) - extra
// vanishes exactly at a fixed point of the policy iteration.
Eigen::VectorXd scheme_residual(const Problem& pd, const Eigen::VectorXd& v,
                                double shift, const Eigen::VectorXd& extra) {
  const Grid& g = pd.grid;
  const int nn = g.nodes();
  Eigen::MatrixXd drift;
  Eigen::VectorXd cost;
  frozen_policy(pd, ScalarField(g, v).gradients(), &drift, &cost);
  Eigen::VectorXd res = Eigen::VectorXd::Zero(nn);
  for (int i = 0; i < nn; ++i) {
    if (!g.in_interior(i)) continue;
    res[i] = shift * v[i] - apply_L(pd, i, drift.row(i).transpose(), v) -
             cost[i] - extra[i];
  }
  return res;
}

// Solves shift*v - [1/2 tr(a D^2 v) + G.Dv + inf_z{...}] = extra by policy
// iteration; `extra` carries the previous time slice for the implicit Euler
// step and is zero for the discounted equation.
Eigen::VectorXd policy_solve(const Problem& pd, double shift,
                             const Eigen::VectorXd& extra,
                             Eigen::VectorXd v, double tol,
                             const char* context) {
  const Grid& g = pd.grid;
  const int nn = g.nodes();
  Eigen::SparseLU<SpMat> lu;
  double best = std::numeric_limits<double>::infinity();
  int stall = 0;
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::MatrixXd drift;
    Eigen::VectorXd cost;
    frozen_policy(pd, field_gradients(g, v), &drift, &cost);

    std::vector<Triplet> trips;
    trips.reserve(static_cast<size_t>(nn) * 8);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nn);
    for (int i = 0; i < nn; ++i) {
      if (g.on_boundary(i)) {
        add_closure_row(g, i, &trips);
      } else {
        add_interior_row(pd, i, drift.row(i).transpose(), shift, &trips);
        rhs[i] = cost[i] + extra[i];
      }
    }
    SpMat M(nn, nn);
    M.setFromTriplets(trips.begin(), trips.end());
    lu.compute(M);
    if (lu.info() != Eigen::Success)
      throw NumericalError(std::string(context) +
                           ": singular linearized system");
    v = lu.solve(rhs);

    const Eigen::VectorXd res = scheme_residual(pd, v, shift, extra);
    int worst = 0;
    const double rmax = res.cwiseAbs().maxCoeff(&worst);
    if (rmax <= tol) return v;
    if (rmax < best * 0.99) {
      best = rmax;
      stall = 0;
    } else if (++stall >= 4) {
      if (best <= 1e3 * tol) return v;  // stagnated at rounding level
      std::ostringstream os;
      os << context << ": policy iteration stalled, residual " << rmax
         << " at node " << worst << " (x = ["
         << g.point(worst).transpose() << "])";
      throw NumericalError(os.str());
    }
  }
  throw NumericalError(std::string(context) +
                       ": policy iteration did not converge");
}

}  // namespace

// --- public API -----------------------------------------------------------

ScalarField solve_discounted(const ModelSpec& spec, double gamma,
                             const Grid& grid, double eps,
                             const ScalarField* warm_start) {
  if (gamma >= 0.0) throw ConfigError("solve_discounted requires gamma < 0");
  if (!(eps > 0.0 && eps <= 1.0))
    throw ConfigError("solve_discounted requires eps in (0, 1]");
  const Problem pd = build_problem(spec, gamma, grid);
  Eigen::VectorXd v0 = warm_start ? warm_start->values()
                                  : Eigen::VectorXd::Zero(grid.nodes());
  Eigen::VectorXd v =
      policy_solve(pd, eps, Eigen::VectorXd::Zero(grid.nodes()), std::move(v0),
                   1e-10, "solve_discounted");
  // Significantly negative interior values indicate boundary contamination.
  for (int i = 0; i < grid.nodes(); ++i) {
    if (grid.in_interior(i) && v[i] < -1e-7 * (1.0 + v.cwiseAbs().maxCoeff()))
      throw NumericalError("solve_discounted: negative interior values "
                           "(boundary contamination)");
  }
  return {grid, std::move(v)};
}

ValueSurface solve_finite_horizon(const ModelSpec& spec, double gamma,
                                  const Grid& grid, double T, int steps) {
  if (gamma >= 0.0)
    throw ConfigError("solve_finite_horizon requires gamma < 0");
  if (T <= 0.0 || steps < 1)
    throw ConfigError("solve_finite_horizon: bad T/steps");
  const Problem pd = build_problem(spec, gamma, grid);
  const double dt = T / steps;
  std::vector<double> times(steps + 1);
  for (int k = 0; k <= steps; ++k) times[k] = k * dt;
  ValueSurface surf(grid, times);

  Eigen::VectorXd v = Eigen::VectorXd::Constant(
      grid.nodes(), -gamma * std::log(spec.v0));
  surf.set_slice(steps, v);
  for (int k = steps - 1; k >= 0; --k) {
    const Eigen::VectorXd extra = v / dt;
    v = policy_solve(pd, 1.0 / dt, extra, v, 1e-10, "solve_finite_horizon");
    surf.set_slice(k, v);
  }
  return surf;
}

double ergodic_residual(const ModelSpec& spec, double gamma, double chi,
                        const ScalarField& w) {
  // Residual of 1/2 tr(a D^2 w) + beta_gamma.Dw + 1/2 Dw.Q Dw - U = chi,
  // discretized with the same hybrid stencil as the stationary solve.
  const Problem pd = build_problem(spec, gamma, w.grid());
  const Grid& g = w.grid();
  const Eigen::MatrixXd p = w.gradients();
  double worst = 0.0;
  for (int i = 0; i < g.nodes(); ++i) {
    if (!g.in_interior(i)) continue;
    const NodeData& nd = pd.nodes[i];
    const Eigen::VectorXd pi = p.row(i).transpose();
    const double r = apply_L(pd, i, nd.beta_gamma + nd.Q * pi, w.values()) -
                     0.5 * pi.dot(nd.Q * pi) - nd.U - chi;
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

namespace {

// Howard iteration for the stationary pair (w, chi); w anchored at x0.
void polish_ergodic(const Problem& pd, Eigen::VectorXd* w, double* chi,
                    double tol) {
  const Grid& g = pd.grid;
  const int nn = g.nodes();
  const int anchor = g.anchor_index();
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::MatrixXd p = field_gradients(g, *w);
    std::vector<Triplet> trips;
    trips.reserve(static_cast<size_t>(nn) * 8);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nn + 1);
    for (int i = 0; i < nn; ++i) {
      if (g.on_boundary(i)) {
        add_closure_row(g, i, &trips);
        continue;
      }
      const NodeData& nd = pd.nodes[i];
      const Eigen::VectorXd pi = p.row(i).transpose();
      // 1/2 tr(a D^2 w) + (beta_gamma + Q p).Dw - chi = U + 1/2 p.Q p.
      // add_interior_row assembles -(L w); negate to match this sign.
      std::vector<Triplet> local;
      add_interior_row(pd, i, nd.beta_gamma + nd.Q * pi, 0.0, &local);
      for (auto& t : local) trips.emplace_back(t.row(), t.col(), -t.value());
      trips.emplace_back(i, nn, -1.0);  // the chi column
      rhs[i] = nd.U + 0.5 * pi.dot(nd.Q * pi);
    }
    trips.emplace_back(nn, anchor, 1.0);  // w(x0) = 0
    SpMat M(nn + 1, nn + 1);
    M.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<SpMat> lu(M);
    if (lu.info() != Eigen::Success)
      throw NumericalError("extract_ergodic: singular stationary system");
    const Eigen::VectorXd sol = lu.solve(rhs);
    *w = sol.head(nn);
    *chi = sol[nn];

    // Nonlinear residual in the beta_gamma-form, with the solve's stencil.
    const Eigen::MatrixXd pnew = field_gradients(g, *w);
    double rmax = 0.0;
    for (int i = 0; i < nn; ++i) {
      if (!g.in_interior(i)) continue;
      const NodeData& nd = pd.nodes[i];
      const Eigen::VectorXd pi = pnew.row(i).transpose();
      const double r = apply_L(pd, i, nd.beta_gamma + nd.Q * pi, *w) -
                       0.5 * pi.dot(nd.Q * pi) - nd.U - *chi;
      rmax = std::max(rmax, std::abs(r));
    }
    if (rmax <= tol) return;
  }
  throw NumericalError("extract_ergodic: stationary Howard iteration did not "
                       "converge");
}

// Polynomial extrapolation of (s_i, f_i) to s = 0 (Neville).
double extrapolate_to_zero(std::vector<double> s, std::vector<double> f) {
  const int n = static_cast<int>(s.size());
  for (int level = 1; level < n; ++level)
    for (int i = 0; i < n - level; ++i)
      f[i] = f[i + 1] + (f[i] - f[i + 1]) * (0.0 - s[i + level]) /
                            (s[i] - s[i + level]);
  return f[0];
}

}  // namespace

ErgodicSolution extract_ergodic(const ModelSpec& spec, double gamma,
                                const Grid& grid,
                                const ErgodicSchedule& schedule) {
  ErgodicSolution out;
  out.gamma = gamma;
  out.method = schedule.method;
  const int anchor = grid.anchor_index();

  Eigen::VectorXd w_init;
  double chi_init = 0.0;

  if (schedule.method == ErgodicSolution::Method::kVanishingDiscount) {
    std::vector<double> eps = schedule.epsilons;
    if (eps.size() < 2)
      throw ConfigError("extract_ergodic: need at least two epsilons");
    std::sort(eps.begin(), eps.end(), std::greater<double>());
    ScalarField v;
    std::vector<double> trail;
    for (size_t i = 0; i < eps.size(); ++i) {
      v = solve_discounted(spec, gamma, grid, eps[i], i == 0 ? nullptr : &v);
      trail.push_back(eps[i] * v[anchor]);
    }
    out.schedule_trail = trail;
    // The sequence eps v_eps(x0) should approach -chi monotonically.
    const double mono_tol = 1e-9 * (1.0 + std::abs(trail.back()));
    bool up = false, down = false;
    for (size_t i = 0; i + 1 < trail.size(); ++i) {
      if (trail[i + 1] - trail[i] > mono_tol) up = true;
      if (trail[i] - trail[i + 1] > mono_tol) down = true;
    }
    if (up && down)
      throw NumericalError(
          "extract_ergodic: vanishing-discount sequence is not monotone");
    chi_init = -extrapolate_to_zero(eps, trail);
    w_init = -(v.values().array() - v[anchor]);
  } else {
    std::vector<double> horizons = schedule.horizons;
    if (horizons.size() < 2)
      throw ConfigError("extract_ergodic: need at least two horizons");
    std::sort(horizons.begin(), horizons.end());
    std::vector<double> vals;
    Eigen::VectorXd last;
    for (double T : horizons) {
      const int steps = std::max(
          16, static_cast<int>(T * schedule.finite_horizon_steps_per_unit));
      const ValueSurface surf = solve_finite_horizon(spec, gamma, grid, T,
                                                     steps);
      last = surf.slice(0);
      vals.push_back(last[anchor] / T);
    }
    out.schedule_trail = vals;
    const size_t k = horizons.size() - 1;
    // vbar(0,x0;T) = -chi T + const + o(1).
    chi_init = -(vals[k] * horizons[k] - vals[k - 1] * horizons[k - 1]) /
               (horizons[k] - horizons[k - 1]);
    w_init = -(last.array() - last[anchor]);
  }

  double chi = chi_init;
  Eigen::VectorXd w = w_init;
  if (schedule.newton_polish) {
    const Problem pd = build_problem(spec, gamma, grid);
    polish_ergodic(pd, &w, &chi, 1e-11 * (1.0 + std::abs(chi_init)));
  }
  out.chi = chi;
  out.w = ScalarField(grid, std::move(w));
  out.w.normalize(anchor);
  out.residual = ergodic_residual(spec, gamma, out.chi, out.w);
  return out;
}

namespace {

Eigen::MatrixXd feedback_impl(const ModelSpec& spec, double gamma,
                              const ScalarField& field, double grad_sign,
                              int* one_sided_count) {
  const Grid& g = field.grid();
  Eigen::MatrixXd h(g.nodes(), spec.m);
  int count = 0;
  for (int i = 0; i < g.nodes(); ++i) {
    bool face = false;
    const Eigen::VectorXd dv = grad_sign * field.gradient(i, &face);
    if (face) ++count;
    const Eigen::VectorXd x = g.point(i);
    const CoefficientValues c = eval_coefficients(spec, x);
    const DerivedCoefficients d = derived_gamma(spec, x, gamma);
    h.row(i) = (d.sigma_sigma_t_inv *
                (d.alpha_hat + c.sigma * c.lambda.transpose() * dv) /
                (1.0 - gamma))
                   .transpose();
  }
  if (one_sided_count) *one_sided_count = count;
  return h;
}

}  // namespace

Eigen::MatrixXd feedback_from_w(const ModelSpec& spec, double gamma,
                                const ScalarField& w, int* one_sided_count) {
  return feedback_impl(spec, gamma, w, 1.0, one_sided_count);
}

Eigen::MatrixXd feedback_from_vbar(const ModelSpec& spec, double gamma,
                                   const ScalarField& vbar_slice,
                                   int* one_sided_count) {
  return feedback_impl(spec, gamma, vbar_slice, -1.0, one_sided_count);
}

Grid default_grid(const ModelSpec& spec, const AssumptionReport& report,
                  int nodes_per_axis) {
  double L = 6.0;
  if (report.coercive.ok && report.coercive.c > 0.0)
    L = 6.0 * std::max(1.0, std::sqrt(report.coercive.c_prime /
                                      report.coercive.c));
  if (spec.n == 1) return Grid::make1d(-L, L, nodes_per_axis);
  if (spec.n == 2)
    return Grid::make2d(-L, L, nodes_per_axis, -L, L, nodes_per_axis);
  throw ConfigError("PDE grids support n <= 2 only");
}

}  // namespace dra
