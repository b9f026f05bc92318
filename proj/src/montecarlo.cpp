#include "dra/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "dra/errors.hpp"
#include "dra/hjb.hpp"

namespace dra {

Strategy Strategy::zero() { return {}; }

Strategy Strategy::constant(Eigen::VectorXd h) {
  Strategy s;
  s.kind = Kind::kConstant;
  s.h = std::move(h);
  return s;
}

Strategy Strategy::stationary(const ScalarField& w, double gamma) {
  Strategy s;
  s.kind = Kind::kStationaryFeedback;
  s.w = w;
  s.gamma = gamma;
  return s;
}

Strategy Strategy::finite_horizon(const ValueSurface& vbar, double gamma) {
  Strategy s;
  s.kind = Kind::kFiniteHorizonFeedback;
  s.vbar = vbar;
  s.gamma = gamma;
  return s;
}

double SimConfig::effective_dt() const {
  return dt > 0.0 ? dt : std::min(1e-2, T / 1000.0);
}

void SimConfig::validate() const {
  if (!(T > 0.0)) throw ConfigError("SimConfig: T must be positive");
  if (n_paths < 100) throw ConfigError("SimConfig: n_paths >= 100 required");
  if (effective_dt() > T / 100.0 + 1e-15)
    throw ConfigError("SimConfig: dt <= T/100 required");
  if (threads < 1) throw ConfigError("SimConfig: threads >= 1 required");
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Multilinear interpolation of the rows of `table` (nodes x k) at x;
// coordinates outside the box are clamped. Returns false when clamped.
bool interp_rows(const Grid& g, const Eigen::MatrixXd& table,
                 const Eigen::VectorXd& x, Eigen::VectorXd* out) {
  bool inside = true;
  int base[2] = {0, 0};
  double frac[2] = {0.0, 0.0};
  for (int ax = 0; ax < g.dim; ++ax) {
    double t = (x[ax] - g.lo[ax]) / g.spacing(ax);
    if (t < 0.0) {
      t = 0.0;
      inside = false;
    } else if (t > g.num[ax] - 1) {
      t = g.num[ax] - 1;
      inside = false;
    }
    int b = static_cast<int>(t);
    b = std::min(b, g.num[ax] - 2);
    base[ax] = b;
    frac[ax] = t - b;
  }
  if (g.dim == 1) {
    out->noalias() = (1.0 - frac[0]) * table.row(g.index(base[0])).transpose() +
                     frac[0] * table.row(g.index(base[0] + 1)).transpose();
  } else {
    const double f0 = frac[0], f1 = frac[1];
    out->noalias() =
        (1.0 - f0) * (1.0 - f1) *
            table.row(g.index(base[0], base[1])).transpose() +
        f0 * (1.0 - f1) * table.row(g.index(base[0] + 1, base[1])).transpose() +
        (1.0 - f0) * f1 * table.row(g.index(base[0], base[1] + 1)).transpose() +
        f0 * f1 * table.row(g.index(base[0] + 1, base[1] + 1)).transpose();
  }
  return inside;
}

// Everything frozen once per simulate_paths call.
struct SimContext {
  const ModelSpec* spec = nullptr;
  const Strategy* strat = nullptr;
  SimConfig cfg;
  double dt = 0.0, sdt = 0.0;
  int steps = 0;

  bool const_coeffs = false;
  CoefficientValues c0;
  Eigen::VectorXd alpha_hat0;

  // Feedback tables: one row block per time slice (a single entry for the
  // stationary kind); empty for zero/constant strategies.
  std::vector<Eigen::MatrixXd> feedback;
  Grid feedback_grid;
  double surf_dt = 0.0;

  // Tilt: nodal rho table on tilt_w's grid, or a pointwise fallback when no
  // w field is attached (Dw = 0).
  bool tilted = false;
  bool tilt_table = false;
  Eigen::MatrixXd rho_nodes;
  Grid tilt_grid;
};

Eigen::VectorXd pointwise_rho(const ModelSpec& spec, double gamma,
                              const Eigen::VectorXd& x,
                              const Eigen::VectorXd& dw) {
  const CoefficientValues c = eval_coefficients(spec, x);
  const DerivedCoefficients d = derived_gamma(spec, x, gamma);
  return (gamma / (1.0 - gamma)) * (d.Sigma.transpose() * d.alpha_hat) +
         d.N_inv * (c.lambda.transpose() * dw);
}

SimContext build_context(const ModelSpec& spec, const Strategy& strat,
                         const SimConfig& cfg) {
  spec.validate();
  cfg.validate();
  SimContext ctx;
  ctx.spec = &spec;
  ctx.strat = &strat;
  ctx.cfg = cfg;
  ctx.dt = cfg.effective_dt();
  ctx.steps = static_cast<int>(std::llround(cfg.T / ctx.dt));
  ctx.dt = cfg.T / ctx.steps;  // land exactly on T
  ctx.sdt = std::sqrt(ctx.dt);

  ctx.const_coeffs = spec.r.is_constant() && spec.alpha.is_constant() &&
                     spec.sigma.is_constant() && spec.beta.is_constant() &&
                     spec.lambda.is_constant();
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(spec.n);
  ctx.c0 = eval_coefficients(spec, origin);
  ctx.alpha_hat0 =
      ctx.c0.alpha - ctx.c0.r * Eigen::VectorXd::Ones(spec.m);

  switch (strat.kind) {
    case Strategy::Kind::kZeroBenchmark:
    case Strategy::Kind::kConstant:
      if (strat.kind == Strategy::Kind::kConstant &&
          strat.h.size() != spec.m)
        throw ConfigError("Strategy: constant h must have m entries");
      break;
    case Strategy::Kind::kStationaryFeedback:
      ctx.feedback_grid = strat.w.grid();
      ctx.feedback.push_back(feedback_from_w(spec, strat.gamma, strat.w));
      break;
    case Strategy::Kind::kFiniteHorizonFeedback: {
      ctx.feedback_grid = strat.vbar.grid();
      const int k = strat.vbar.time_steps();
      if (k < 2) throw ConfigError("Strategy: vbar needs >= 2 time slices");
      ctx.surf_dt = strat.vbar.times()[1] - strat.vbar.times()[0];
      ctx.feedback.reserve(k);
      for (int i = 0; i < k; ++i)
        ctx.feedback.push_back(
            feedback_from_vbar(spec, strat.gamma, strat.vbar.slice_field(i)));
      break;
    }
  }

  ctx.tilted = cfg.measure == SimConfig::Measure::kTilted;
  if (ctx.tilted && cfg.tilt_w.grid().nodes() > 0) {
    ctx.tilt_table = true;
    ctx.tilt_grid = cfg.tilt_w.grid();
    const Eigen::MatrixXd grads = cfg.tilt_w.gradients();
    ctx.rho_nodes.resize(ctx.tilt_grid.nodes(), spec.n + spec.m);
    for (int i = 0; i < ctx.tilt_grid.nodes(); ++i)
      ctx.rho_nodes.row(i) =
          pointwise_rho(spec, cfg.tilt_gamma, ctx.tilt_grid.point(i),
                        grads.row(i).transpose())
              .transpose();
  }
  return ctx;
}

void run_path(const SimContext& ctx, int path_idx, PathSample* out,
              std::int64_t* clamps) {
  const ModelSpec& spec = *ctx.spec;
  const Strategy& strat = *ctx.strat;
  const int n = spec.n, m = spec.m, nw = spec.n + spec.m;

  std::mt19937_64 rng(splitmix64(ctx.cfg.seed ^
                                 (0x2545F4914F6CDD1DULL *
                                  (static_cast<std::uint64_t>(path_idx) + 1))));
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  double logv = 0.0, loglr = 0.0;
  Eigen::VectorXd xi(nw), h(m), rho(nw), tmp_n(n), svol(nw);
  const bool zero_strategy = strat.kind == Strategy::Kind::kZeroBenchmark;
  if (strat.kind == Strategy::Kind::kConstant) h = strat.h;

  const bool frozen = ctx.const_coeffs;
  CoefficientValues cbuf;
  for (int k = 0; k < ctx.steps; ++k) {
    if (!frozen) cbuf = eval_coefficients(spec, x);
    const CoefficientValues& c = frozen ? ctx.c0 : cbuf;

    if (strat.kind == Strategy::Kind::kStationaryFeedback) {
      if (!interp_rows(ctx.feedback_grid, ctx.feedback[0], x, &h)) ++*clamps;
    } else if (strat.kind == Strategy::Kind::kFiniteHorizonFeedback) {
      const int slice = std::clamp(
          static_cast<int>(std::lround(k * ctx.dt / ctx.surf_dt)), 0,
          static_cast<int>(ctx.feedback.size()) - 1);
      if (!interp_rows(ctx.feedback_grid, ctx.feedback[slice], x, &h))
        ++*clamps;
    }
    for (int j = 0; j < nw; ++j) xi[j] = gauss(rng);

    // Under the tilted measure the physical Brownian increment is
    // xi sqrt(dt) + rho dt; every driven quantity (wealth and factor) must
    // see the same shift, and the likelihood ratio compensates for it.
    if (ctx.tilted) {
      if (ctx.tilt_table) {
        if (!interp_rows(ctx.tilt_grid, ctx.rho_nodes, x, &rho)) ++*clamps;
      } else {
        rho = pointwise_rho(spec, ctx.cfg.tilt_gamma, x,
                            Eigen::VectorXd::Zero(n));
      }
      loglr += -rho.dot(xi) * ctx.sdt - 0.5 * rho.squaredNorm() * ctx.dt;
    }

    if (!zero_strategy) {
      const double h_dot_ah =
          frozen ? h.dot(ctx.alpha_hat0) : h.dot(c.alpha) - c.r * h.sum();
      svol.noalias() = c.sigma.transpose() * h;
      logv += (h_dot_ah - 0.5 * svol.squaredNorm()) * ctx.dt +
              svol.dot(xi) * ctx.sdt;
      if (ctx.tilted) logv += svol.dot(rho) * ctx.dt;
    }

    if (ctx.tilted) {
      tmp_n.noalias() = c.lambda * rho;
      x += tmp_n * ctx.dt;
    }
    tmp_n.noalias() = c.lambda * xi;
    x += c.beta * ctx.dt + tmp_n * ctx.sdt;

    if (!std::isfinite(logv) || !x.allFinite()) {
      std::ostringstream os;
      os << "simulate_paths: NaN on path " << path_idx << " at step " << k;
      throw NumericalError(os.str());
    }
  }
  out->L_T = logv / ctx.cfg.T;
  out->log_lr = loglr;
  out->x_T = x;
}

}  // namespace

SimResult simulate_paths(const ModelSpec& spec, const Strategy& strategy,
                         const SimConfig& cfg) {
  const SimContext ctx = build_context(spec, strategy, cfg);
  SimResult res;
  res.T = cfg.T;
  res.measure = cfg.measure;
  res.samples.resize(cfg.n_paths);

  const int threads = std::min(cfg.threads, cfg.n_paths);
  std::vector<std::int64_t> clamps(threads, 0);
  std::vector<std::exception_ptr> errors(threads);
  auto worker = [&](int t) {
    try {
      for (int i = t; i < cfg.n_paths; i += threads)
        run_path(ctx, i, &res.samples[i], &clamps[t]);
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (std::int64_t c : clamps) res.clamp_count += c;
  return res;
}

DownsideEstimate estimate_downside(const SimResult& result, double kappa) {
  const int n = static_cast<int>(result.samples.size());
  if (n == 0)
    throw NumericalError("estimate_downside: no samples (zero effective "
                         "sample size)");
  const bool tilted = result.measure == SimConfig::Measure::kTilted;
  double sum = 0.0, sumsq = 0.0;
  for (const PathSample& s : result.samples) {
    const double y =
        s.L_T <= kappa ? (tilted ? std::exp(s.log_lr) : 1.0) : 0.0;
    sum += y;
    sumsq += y * y;
  }
  DownsideEstimate est;
  est.kappa = kappa;
  est.T = result.T;
  est.n_paths = n;
  est.boundary_clamp_count = result.clamp_count;
  est.measure = tilted ? "tilted" : "physical";
  est.p_hat = sum / n;
  const double var = std::max(0.0, sumsq / n - est.p_hat * est.p_hat);
  const double half = 1.959963984540054 * std::sqrt(var / n);
  est.ci_low = std::max(0.0, est.p_hat - half);
  est.ci_high = tilted ? est.p_hat + half : std::min(1.0, est.p_hat + half);
  return est;
}

SlopeReport ld_slope(const ModelSpec& spec,
                     const std::function<Strategy(double)>& strategy_for_T,
                     double kappa, const std::vector<double>& T_ladder,
                     SimConfig cfg, double j_ref) {
  if (T_ladder.size() < 2)
    throw ConfigError("ld_slope: regression needs >= 2 horizons");
  std::vector<double> horizons = T_ladder;
  std::sort(horizons.begin(), horizons.end());

  SlopeReport rep;
  rep.kappa = kappa;
  rep.horizons = horizons;
  const std::uint64_t root = cfg.seed;
  for (size_t i = 0; i < horizons.size(); ++i) {
    cfg.T = horizons[i];
    cfg.seed = root + 1000003ULL * i;
    const SimResult r = simulate_paths(spec, strategy_for_T(horizons[i]), cfg);
    const DownsideEstimate e = estimate_downside(r, kappa);
    if (!(e.p_hat > 0.0)) {
      std::ostringstream os;
      os << "ld_slope: zero downside probability at T = " << horizons[i]
         << "; switch to the tilted estimator";
      throw NumericalError(os.str());
    }
    rep.estimates.push_back(e);
    rep.log_p.push_back(std::log(e.p_hat));
  }

  const int k = static_cast<int>(horizons.size());
  double tbar = 0.0, ybar = 0.0;
  for (int i = 0; i < k; ++i) {
    tbar += horizons[i];
    ybar += rep.log_p[i];
  }
  tbar /= k;
  ybar /= k;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < k; ++i) {
    sxx += (horizons[i] - tbar) * (horizons[i] - tbar);
    sxy += (horizons[i] - tbar) * (rep.log_p[i] - ybar);
  }
  rep.slope = sxy / sxx;
  if (k > 2) {
    double rss = 0.0;
    for (int i = 0; i < k; ++i) {
      const double fit = ybar + rep.slope * (horizons[i] - tbar);
      rss += (rep.log_p[i] - fit) * (rep.log_p[i] - fit);
    }
    rep.stderr_ = std::sqrt(rss / (k - 2) / sxx);
  }
  rep.j_ref = j_ref;
  rep.rel_gap = std::isfinite(j_ref) && j_ref != 0.0
                    ? std::abs(rep.slope - j_ref) / std::abs(j_ref)
                    : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

SlopeReport ld_slope(const ModelSpec& spec, const Strategy& strategy,
                     double kappa, const std::vector<double>& T_ladder,
                     const SimConfig& cfg, double j_ref) {
  return ld_slope(
      spec, [&](double) { return strategy; }, kappa, T_ladder, cfg, j_ref);
}

TiltAgreement tilted_vs_plain_check(const ModelSpec& spec,
                                    const Strategy& strategy, double kappa,
                                    const SimConfig& cfg) {
  SimConfig plain_cfg = cfg;
  plain_cfg.measure = SimConfig::Measure::kPhysical;
  SimConfig tilt_cfg = cfg;
  tilt_cfg.measure = SimConfig::Measure::kTilted;

  TiltAgreement rep;
  rep.plain = estimate_downside(simulate_paths(spec, strategy, plain_cfg),
                                kappa);
  const SimResult tilted = simulate_paths(spec, strategy, tilt_cfg);
  rep.tilted = estimate_downside(tilted, kappa);

  const double half_p = 0.5 * (rep.plain.ci_high - rep.plain.ci_low);
  const double half_t = 0.5 * (rep.tilted.ci_high - rep.tilted.ci_low);
  rep.agree =
      std::abs(rep.tilted.p_hat - rep.plain.p_hat) <= half_p + half_t;

  const int n = static_cast<int>(tilted.samples.size());
  double sum = 0.0, sumsq = 0.0;
  for (const PathSample& s : tilted.samples) {
    const double w = std::exp(s.log_lr);
    sum += w;
    sumsq += w * w;
  }
  rep.mean_weight = sum / n;
  rep.weight_se = std::sqrt(
      std::max(0.0, sumsq / n - rep.mean_weight * rep.mean_weight) / n);
  rep.martingale_ok = std::abs(rep.mean_weight - 1.0) <= 3.0 * rep.weight_se;
  return rep;
}

}  // namespace dra
