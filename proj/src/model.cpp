#include "dra/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "dra/errors.hpp"
#include "json.hpp"

namespace dra {

CoefficientField CoefficientField::constant(Eigen::MatrixXd value) {
  CoefficientField f;
  f.kind_ = Kind::kConstant;
  f.rows_ = static_cast<int>(value.rows());
  f.cols_ = static_cast<int>(value.cols());
  f.offset_ = std::move(value);
  return f;
}

CoefficientField CoefficientField::affine(
    Eigen::MatrixXd offset, std::vector<Eigen::MatrixXd> linear) {
  CoefficientField f;
  f.kind_ = Kind::kAffine;
  f.rows_ = static_cast<int>(offset.rows());
  f.cols_ = static_cast<int>(offset.cols());
  for (const auto& l : linear) {
    if (l.rows() != offset.rows() || l.cols() != offset.cols())
      throw ConfigError("affine field: linear part shape mismatch");
  }
  f.offset_ = std::move(offset);
  f.linear_ = std::move(linear);
  return f;
}

CoefficientField CoefficientField::callback(int rows, int cols, Callback fn) {
  CoefficientField f;
  f.kind_ = Kind::kCallback;
  f.rows_ = rows;
  f.cols_ = cols;
  f.fn_ = std::move(fn);
  return f;
}

Eigen::MatrixXd CoefficientField::eval(const Eigen::VectorXd& x) const {
  switch (kind_) {
    case Kind::kConstant:
      return offset_;
    case Kind::kAffine: {
      if (static_cast<size_t>(x.size()) != linear_.size())
        throw ConfigError("affine field: x dimension mismatch");
      Eigen::MatrixXd out = offset_;
      for (size_t k = 0; k < linear_.size(); ++k) out += x[k] * linear_[k];
      return out;
    }
    case Kind::kCallback: {
      Eigen::MatrixXd out = fn_(x);
      if (out.rows() != rows_ || out.cols() != cols_)
        throw ConfigError("callback field returned wrong shape");
      return out;
    }
  }
  throw ConfigError("invalid field kind");
}

void ModelSpec::validate() const {
  if (n < 1 || m < 1) throw ConfigError("model requires n >= 1 and m >= 1");
  if (v0 < 1.0) throw ConfigError("model requires v0 >= 1");
  auto check = [&](const CoefficientField& f, int rows, int cols,
                   const char* name) {
    if (f.rows() != rows || f.cols() != cols) {
      std::ostringstream os;
      os << "field " << name << " has shape " << f.rows() << "x" << f.cols()
         << ", expected " << rows << "x" << cols;
      throw ConfigError(os.str());
    }
  };
  check(r, 1, 1, "r");
  check(alpha, m, 1, "alpha");
  check(sigma, m, n + m, "sigma");
  check(beta, n, 1, "beta");
  check(lambda, n, n + m, "lambda");
}

CoefficientValues eval_coefficients(const ModelSpec& spec,
                                    const Eigen::VectorXd& x) {
  if (x.size() != spec.n)
    throw ConfigError("eval_coefficients: x has wrong dimension");
  if (!x.allFinite()) throw ConfigError("eval_coefficients: x not finite");
  CoefficientValues v;
  v.r = spec.r.eval_scalar(x);
  v.alpha = spec.alpha.eval(x);
  v.sigma = spec.sigma.eval(x);
  v.beta = spec.beta.eval(x);
  v.lambda = spec.lambda.eval(x);
  return v;
}

DerivedCoefficients derived_gamma(const ModelSpec& spec,
                                  const Eigen::VectorXd& x, double gamma) {
  if (gamma >= 1.0) throw ConfigError("derived_gamma requires gamma < 1");
  const CoefficientValues c = eval_coefficients(spec, x);
  const Eigen::MatrixXd ss = c.sigma * c.sigma.transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ss);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo <= 0.0 || hi / lo > 1e12) {
    std::ostringstream os;
    os << "sigma sigma* numerically singular at x = [" << x.transpose() << "]";
    throw NumericalError(os.str());
  }

  DerivedCoefficients d;
  d.sigma_sigma_t_inv = es.operatorInverseSqrt() * es.operatorInverseSqrt();
  d.alpha_hat = c.alpha - c.r * Eigen::VectorXd::Ones(spec.m);
  d.Sigma = d.sigma_sigma_t_inv * c.sigma;
  const Eigen::MatrixXd proj = c.sigma.transpose() * d.Sigma;  // sigma* (ss)^-1 sigma
  const double g1 = gamma / (1.0 - gamma);
  const int nm = spec.n + spec.m;
  d.N_inv = Eigen::MatrixXd::Identity(nm, nm) + g1 * proj;
  d.N = Eigen::MatrixXd::Identity(nm, nm) - gamma * proj;
  d.theta_sq = d.alpha_hat.dot(d.sigma_sigma_t_inv * d.alpha_hat);
  d.U_gamma = -0.5 * g1 * d.theta_sq;
  const Eigen::VectorXd Sa = d.Sigma.transpose() * d.alpha_hat;  // Sigma* alpha_hat
  d.beta_gamma = c.beta + g1 * c.lambda * Sa;
  d.G = c.beta - c.lambda * Sa;
  return d;
}

namespace {

// Least-squares fit y ~ s*slope + intercept over the sample cloud.
void linear_fit(const std::vector<double>& s, const std::vector<double>& y,
                double* slope, double* intercept) {
  const double n = static_cast<double>(s.size());
  double sm = 0, ym = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    sm += s[i];
    ym += y[i];
  }
  sm /= n;
  ym /= n;
  double num = 0, den = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    num += (s[i] - sm) * (y[i] - ym);
    den += (s[i] - sm) * (s[i] - sm);
  }
  *slope = den > 0 ? num / den : 0.0;
  *intercept = ym - *slope * sm;
}

}  // namespace

AssumptionReport check_assumptions(const ModelSpec& spec,
                                   const Eigen::VectorXd& box_lo,
                                   const Eigen::VectorXd& box_hi, int samples,
                                   std::uint64_t seed) {
  spec.validate();
  if (box_lo.size() != spec.n || box_hi.size() != spec.n)
    throw ConfigError("check_assumptions: box dimension mismatch");
  for (int k = 0; k < spec.n; ++k)
    if (!(box_lo[k] < box_hi[k]))
      throw ConfigError("check_assumptions: degenerate box");
  if (samples < 2) throw ConfigError("check_assumptions: need samples >= 2");

  AssumptionReport rep;
  rep.box_lo = box_lo;
  rep.box_hi = box_hi;
  rep.samples = samples;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  rep.c1 = std::numeric_limits<double>::infinity();
  rep.c2 = 0.0;
  rep.elliptic_ok = true;

  std::vector<double> s2(samples), gx(samples), th(samples);
  std::vector<Eigen::VectorXd> pts(samples);
  double worst_elliptic = std::numeric_limits<double>::infinity();
  double cb = 0.0;

  for (int i = 0; i < samples; ++i) {
    Eigen::VectorXd x(spec.n);
    for (int k = 0; k < spec.n; ++k)
      x[k] = box_lo[k] + (box_hi[k] - box_lo[k]) * unif(rng);
    pts[i] = x;
    const CoefficientValues c = eval_coefficients(spec, x);
    const Eigen::MatrixXd ll = c.lambda * c.lambda.transpose();
    const Eigen::MatrixXd ss = c.sigma * c.sigma.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> el(ll), es(ss);
    const double local_min =
        std::min(el.eigenvalues().minCoeff(), es.eigenvalues().minCoeff());
    rep.c1 = std::min(rep.c1, local_min);
    rep.c2 = std::max(rep.c2, std::max(el.eigenvalues().maxCoeff(),
                                       es.eigenvalues().maxCoeff()));
    if (local_min < worst_elliptic) {
      worst_elliptic = local_min;
      rep.elliptic_worst = x;
    }

    double gamma_ref = -1.0;
    DerivedCoefficients d;
    bool degenerate = local_min <= 1e-10;
    if (!degenerate) {
      d = derived_gamma(spec, x, gamma_ref);
      s2[i] = x.squaredNorm();
      gx[i] = d.G.dot(x);
      th[i] = d.theta_sq;
      cb = std::max(cb, d.beta_gamma.squaredNorm() / (x.squaredNorm() + 1.0));
    } else {
      rep.elliptic_ok = false;
      s2[i] = x.squaredNorm();
      gx[i] = 0.0;
      th[i] = 0.0;
    }
  }
  if (worst_elliptic <= 1e-10) rep.elliptic_ok = false;
  rep.c_beta = cb;

  if (rep.elliptic_ok) {
    // Drift condition: G(x)*x <= -c_G |x|^2 + c_G'. Slope from least squares, the
    // additive constant lifted to cover the worst sample.
    double slope, intercept;
    linear_fit(s2, gx, &slope, &intercept);
    rep.drift.c = -slope;
    if (rep.drift.c > 1e-8) {
      double cprime = std::max(intercept, 1e-12);
      int worst = 0;
      for (int i = 0; i < samples; ++i) {
        const double need = gx[i] + rep.drift.c * s2[i];
        if (need > cprime) cprime = need;
        if (gx[i] + rep.drift.c * s2[i] >
            gx[worst] + rep.drift.c * s2[worst])
          worst = i;
      }
      rep.drift.c_prime = cprime;
      rep.drift.ok = true;
      rep.drift.worst_point = pts[worst];
    } else {
      rep.drift.ok = false;
      int worst = 0;
      for (int i = 0; i < samples; ++i)
        if (gx[i] > gx[worst]) worst = i;
      rep.drift.worst_point = pts[worst];
    }

    // Coercivity: theta_sq(x) >= c_0 |x|^2 - c_0'.
    double c0, ic;
    linear_fit(s2, th, &c0, &ic);
    rep.coercive.c = c0;
    if (c0 > 1e-8) {
      double cprime = std::max(-ic, 1e-12);
      int worst = 0;
      double worst_gap = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < samples; ++i) {
        const double gap = c0 * s2[i] - th[i];
        if (gap > cprime) cprime = gap;
        if (gap > worst_gap) {
          worst_gap = gap;
          worst = i;
        }
      }
      rep.coercive.c_prime = cprime;
      rep.coercive.ok = true;
      rep.coercive.worst_point = pts[worst];
    } else {
      rep.coercive.ok = false;
      int worst = 0;
      for (int i = 0; i < samples; ++i)
        if (s2[i] > s2[worst]) worst = i;
      rep.coercive.worst_point = pts[worst];
    }
  }

  // Example conditions (i)-(iii) for affine alpha/beta with constant
  // sigma/lambda.
  if (spec.alpha.kind() == CoefficientField::Kind::kAffine &&
      spec.beta.kind() == CoefficientField::Kind::kAffine &&
      spec.sigma.is_constant() && spec.lambda.is_constant()) {
    Eigen::MatrixXd A(spec.m, spec.n), B(spec.n, spec.n);
    for (int k = 0; k < spec.n; ++k) {
      A.col(k) = spec.alpha.linear()[k];
      B.col(k) = spec.beta.linear()[k];
    }
    const Eigen::MatrixXd AtA = A.transpose() * A;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(AtA);
    rep.example_i = ea.eigenvalues().minCoeff() > 1e-12;
    Eigen::EigenSolver<Eigen::MatrixXd> eb(B.transpose() - AtA);
    rep.example_ii = eb.eigenvalues().real().maxCoeff() < -1e-12;
    const Eigen::MatrixXd sig = spec.sigma.offset();
    const Eigen::MatrixXd lam = spec.lambda.offset();
    const Eigen::MatrixXd res =
        sig * (lam.transpose() - sig.transpose() * A);
    rep.example_iii = res.cwiseAbs().maxCoeff() < 1e-10;
  }

  return rep;
}

// ---------------------------------------------------------------------------
// JSON config

namespace {

using nlohmann::json;

Eigen::MatrixXd parse_value(const json& j, int rows, int cols,
                            const std::string& where) {
  Eigen::MatrixXd out(rows, cols);
  if (j.is_number()) {
    if (rows != 1 || cols != 1)
      throw ConfigError(where + ": scalar given, matrix expected");
    out(0, 0) = j.get<double>();
    return out;
  }
  if (j.is_array() && !j.empty() && j[0].is_number()) {
    if (cols != 1 || static_cast<int>(j.size()) != rows)
      throw ConfigError(where + ": vector length mismatch");
    for (int i = 0; i < rows; ++i) out(i, 0) = j[i].get<double>();
    return out;
  }
  if (j.is_array() && !j.empty() && j[0].is_array()) {
    if (static_cast<int>(j.size()) != rows)
      throw ConfigError(where + ": matrix row count mismatch");
    for (int i = 0; i < rows; ++i) {
      if (static_cast<int>(j[i].size()) != cols)
        throw ConfigError(where + ": matrix column count mismatch");
      for (int k = 0; k < cols; ++k) out(i, k) = j[i][k].get<double>();
    }
    return out;
  }
  throw ConfigError(where + ": expected number or (nested) array");
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys,
                    const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys)
      if (it.key() == k) known = true;
    if (!known) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

CoefficientField parse_field(const json& j, int rows, int cols, int n,
                             const std::string& name) {
  if (!j.is_object()) throw ConfigError(name + ": expected object");
  const std::string type = j.value("type", "");
  if (type == "constant") {
    reject_unknown(j, {"type", "value"}, name);
    return CoefficientField::constant(
        parse_value(j.at("value"), rows, cols, name));
  }
  if (type == "affine") {
    // The slope/offset pair may be spelled A/a or B/b (the drift convention).
    reject_unknown(j, {"type", "A", "a", "B", "b"}, name);
    if (cols != 1)
      throw ConfigError(name +
                        ": affine is supported for scalar and vector fields "
                        "only; use the callback slot for matrix coefficients");
    const bool hasA = j.contains("A"), hasB = j.contains("B");
    const bool hasa = j.contains("a"), hasb = j.contains("b");
    if (hasA == hasB || hasa == hasb)
      throw ConfigError(name + ": affine needs exactly one slope (A or B) "
                               "and one offset (a or b)");
    const Eigen::MatrixXd A =
        parse_value(j.at(hasA ? "A" : "B"), rows, n, name + ".A");
    const Eigen::MatrixXd a =
        parse_value(j.at(hasa ? "a" : "b"), rows, 1, name + ".a");
    std::vector<Eigen::MatrixXd> linear(n);
    for (int k = 0; k < n; ++k) linear[k] = A.col(k);
    return CoefficientField::affine(a, std::move(linear));
  }
  throw ConfigError(name + ": type must be 'constant' or 'affine'");
}

json field_to_json(const CoefficientField& f, int n) {
  json j;
  auto mat = [](const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (int k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
      rows.push_back(row);
    }
    return rows;
  };
  if (f.is_constant()) {
    j["type"] = "constant";
    j["value"] = mat(f.offset());
  } else if (f.kind() == CoefficientField::Kind::kAffine) {
    j["type"] = "affine";
    Eigen::MatrixXd A(f.rows(), n);
    for (int k = 0; k < n; ++k) A.col(k) = f.linear()[k];
    j["A"] = mat(A);
    j["a"] = mat(f.offset());
  } else {
    j["type"] = "callback";
  }
  return j;
}

}  // namespace

ModelSpec parse_model_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("model config parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  reject_unknown(j, {"n", "m", "v0", "r", "alpha", "sigma", "beta", "lambda"},
                 "model");
  ModelSpec spec;
  spec.n = j.at("n").get<int>();
  spec.m = j.at("m").get<int>();
  spec.v0 = j.value("v0", 1.0);
  if (spec.n < 1 || spec.m < 1) throw ConfigError("model: n, m must be >= 1");
  spec.r = parse_field(j.at("r"), 1, 1, spec.n, "r");
  spec.alpha = parse_field(j.at("alpha"), spec.m, 1, spec.n, "alpha");
  spec.sigma =
      parse_field(j.at("sigma"), spec.m, spec.n + spec.m, spec.n, "sigma");
  spec.beta = parse_field(j.at("beta"), spec.n, 1, spec.n, "beta");
  spec.lambda =
      parse_field(j.at("lambda"), spec.n, spec.n + spec.m, spec.n, "lambda");
  spec.validate();
  return spec;
}

std::string model_to_json(const ModelSpec& spec) {
  json j;
  j["n"] = spec.n;
  j["m"] = spec.m;
  j["v0"] = spec.v0;
  j["r"] = field_to_json(spec.r, spec.n);
  j["alpha"] = field_to_json(spec.alpha, spec.n);
  j["sigma"] = field_to_json(spec.sigma, spec.n);
  j["beta"] = field_to_json(spec.beta, spec.n);
  j["lambda"] = field_to_json(spec.lambda, spec.n);
  return j.dump(2);
}

std::string AssumptionReport::to_json() const {
  nlohmann::json j;
  j["elliptic_ok"] = elliptic_ok;
  j["c1"] = c1;
  j["c2"] = c2;
  j["drift_ok"] = drift.ok;
  j["c_G"] = drift.c;
  j["c_G_prime"] = drift.c_prime;
  j["coercive_ok"] = coercive.ok;
  j["c_0"] = coercive.c;
  j["c_0_prime"] = coercive.c_prime;
  j["c_beta"] = c_beta;
  if (example_i) j["example_i"] = *example_i;
  if (example_ii) j["example_ii"] = *example_ii;
  if (example_iii) j["example_iii"] = *example_iii;
  if (condition_2_26) j["condition_2_26"] = *condition_2_26;
  j["box_lo"] = std::vector<double>(box_lo.begin(), box_lo.end());
  j["box_hi"] = std::vector<double>(box_hi.begin(), box_hi.end());
  j["samples"] = samples;
  return j.dump(2);
}

std::string AssumptionReport::summary() const {
  std::ostringstream os;
  auto line = [&](const char* name, bool ok) {
    os << (ok ? "  [pass] " : "  [FAIL] ") << name << "\n";
  };
  os << "assumption checks on [" << box_lo.transpose() << "] x ["
     << box_hi.transpose() << "], " << samples << " samples\n";
  line("uniform ellipticity", elliptic_ok);
  os << "         c1 = " << c1 << ", c2 = " << c2 << "\n";
  line("inward drift condition", drift.ok);
  os << "         c_G = " << drift.c << ", c_G' = " << drift.c_prime << "\n";
  line("theta^2 coercivity", coercive.ok);
  os << "         c_0 = " << coercive.c << ", c_0' = " << coercive.c_prime
     << "\n";
  if (example_i)
    line("example condition (i)", *example_i);
  if (example_ii)
    line("example condition (ii)", *example_ii);
  if (example_iii)
    line("example condition (iii)", *example_iii);
  return os.str();
}

}  // namespace dra
