#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dra {

/// Coefficient of the market/factor model as a function of the factor
/// x in R^n. Constant and affine families come from the config format;
/// arbitrary coefficients enter through the callback slot.
class CoefficientField {
 public:
  enum class Kind { kConstant, kAffine, kCallback };
  using Callback = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  static CoefficientField constant(Eigen::MatrixXd value);
  /// field(x) = offset + sum_k x[k] * linear[k]; linear.size() == n.
  static CoefficientField affine(Eigen::MatrixXd offset,
                                 std::vector<Eigen::MatrixXd> linear);
  static CoefficientField callback(int rows, int cols, Callback fn);

  Kind kind() const { return kind_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool is_constant() const { return kind_ == Kind::kConstant; }
  bool is_affine_or_constant() const { return kind_ != Kind::kCallback; }

  Eigen::MatrixXd eval(const Eigen::VectorXd& x) const;
  double eval_scalar(const Eigen::VectorXd& x) const {
    return eval(x)(0, 0);
  }

  const Eigen::MatrixXd& offset() const { return offset_; }
  const std::vector<Eigen::MatrixXd>& linear() const { return linear_; }

 private:
  Kind kind_ = Kind::kConstant;
  int rows_ = 0, cols_ = 0;
  Eigen::MatrixXd offset_;
  std::vector<Eigen::MatrixXd> linear_;
  Callback fn_;
};

/// Market model: m risky assets driven by an n-dimensional factor process,
///   dS/S   = (r + alpha_hat) dt + sigma dW     (sigma: m x (n+m))
///   dX     = beta dt + lambda dW               (lambda: n x (n+m))
/// with scalar short rate r(x).
struct ModelSpec {
  int n = 0;  // factor dimension
  int m = 0;  // asset count
  double v0 = 1.0;
  CoefficientField r;       // 1 x 1
  CoefficientField alpha;   // m x 1
  CoefficientField sigma;   // m x (n+m)
  CoefficientField beta;    // n x 1
  CoefficientField lambda;  // n x (n+m)

  void validate() const;
};

/// Raw coefficient values at one factor point.
struct CoefficientValues {
  double r;
  Eigen::VectorXd alpha;
  Eigen::MatrixXd sigma;
  Eigen::VectorXd beta;
  Eigen::MatrixXd lambda;
};

/// gamma-dependent derived quantities at one factor point.
struct DerivedCoefficients {
  Eigen::VectorXd alpha_hat;   // alpha - r 1
  Eigen::MatrixXd Sigma;       // (sigma sigma*)^-1 sigma
  Eigen::MatrixXd N_inv;       // I + gamma/(1-gamma) sigma* (sigma sigma*)^-1 sigma
  Eigen::MatrixXd N;           // I - gamma sigma* (sigma sigma*)^-1 sigma
  Eigen::VectorXd beta_gamma;
  double U_gamma;
  Eigen::VectorXd G;           // beta - lambda Sigma* alpha_hat
  double theta_sq;             // alpha_hat* (sigma sigma*)^-1 alpha_hat
  Eigen::MatrixXd sigma_sigma_t_inv;
};

struct FittedBound {
  bool ok = false;
  double c = 0.0;        // quadratic constant (c_G, c_0, ...)
  double c_prime = 0.0;  // additive constant
  Eigen::VectorXd worst_point;  // worst-case sample when !ok
};

/// Sampled certificate of the model's standing assumptions on a box.
struct AssumptionReport {
  bool elliptic_ok = false;
  double c1 = 0.0, c2 = 0.0;  // two-sided ellipticity constants
  Eigen::VectorXd elliptic_worst;
  FittedBound drift;     // G(x)* x <= -c_G |x|^2 + c_G'
  FittedBound coercive;  // theta_sq(x) >= c_0 |x|^2 - c_0'
  double c_beta = 0.0;   // |beta_gamma|^2 <= c_beta (|x|^2 + 1), at gamma = -1
  std::optional<bool> example_i, example_ii, example_iii;
  std::optional<bool> condition_2_26;  // filled by the ergodic module
  Eigen::VectorXd box_lo, box_hi;
  int samples = 0;

  bool all_required_ok() const {
    return elliptic_ok && drift.ok && coercive.ok;
  }
  std::string to_json() const;
  std::string summary() const;
};

CoefficientValues eval_coefficients(const ModelSpec& spec,
                                    const Eigen::VectorXd& x);

/// Derived gamma-coefficients; throws NumericalError naming x when
/// sigma sigma* is numerically singular (condition number > 1e12).
DerivedCoefficients derived_gamma(const ModelSpec& spec,
                                  const Eigen::VectorXd& x, double gamma);

/// Samples the box and certifies ellipticity, inward drift, coercivity.
/// Deterministic given the seed. Constants fitted by least squares; flags
/// true only when the inequality holds at every sample.
AssumptionReport check_assumptions(const ModelSpec& spec,
                                   const Eigen::VectorXd& box_lo,
                                   const Eigen::VectorXd& box_hi, int samples,
                                   std::uint64_t seed = 20'240'901ULL);

/// Parses the JSON model document. Unknown keys are rejected.
ModelSpec parse_model_json(const std::string& text);
std::string model_to_json(const ModelSpec& spec);

}  // namespace dra
