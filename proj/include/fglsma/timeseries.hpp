#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace fglsma {

using json = nlohmann::json;

/// Innovation distribution of the error process. Student-t is rescaled so
/// the innovation variance equals the configured value; dof must exceed 4
/// (lighter tails than that break the moment requirements of the weight
/// selection theory, so we refuse rather than silently accept).
struct InnovationDistribution {
  enum class Kind { Gaussian, StudentT };
  Kind kind = Kind::Gaussian;
  double dof = 0.0;  // only meaningful for StudentT

  static InnovationDistribution gaussian() { return {}; }
  static InnovationDistribution student_t(double dof) {
    return {Kind::StudentT, dof};
  }
};

/// A stationary linear error process e_t = a_t + sum_{k=1}^{K} beta_k a_{t-k}
/// with martingale-difference innovations a_t of variance sigma2. The MA
/// transfer function 1 + sum beta_k z^k must have no roots inside or on the
/// unit circle (invertibility), checked numerically at construction.
///
/// Processes given in AR form are converted to a truncated MA representation
/// at construction; the discarded tail mass is recorded, never hidden.
class ErrorProcessSpec {
 public:
  static constexpr std::size_t kDefaultTruncation = 100;

  /// Process specified by its MA coefficients beta_1..beta_K (beta_0 = 1).
  static ErrorProcessSpec from_ma(std::vector<double> ma_coefficients,
                                  double innovation_variance,
                                  InnovationDistribution dist =
                                      InnovationDistribution::gaussian());

  /// Exact AR(p) process sum_{j=0}^{p} a_j e_{t-j} = alpha_t with a_0 = 1.
  /// The MA representation is obtained by power-series inversion, truncated
  /// at `ma_truncation` coefficients.
  static ErrorProcessSpec from_ar(std::vector<double> ar_coefficients,
                                  double innovation_variance,
                                  InnovationDistribution dist =
                                      InnovationDistribution::gaussian(),
                                  std::size_t ma_truncation =
                                      kDefaultTruncation);

  static ErrorProcessSpec white_noise(double innovation_variance,
                                      InnovationDistribution dist =
                                          InnovationDistribution::gaussian());

  const std::vector<double>& ma_coefficients() const { return beta_; }
  const std::optional<std::vector<double>>& ar_form() const { return ar_; }
  double innovation_variance() const { return sigma2_; }
  const InnovationDistribution& innovation_distribution() const {
    return dist_;
  }

  /// Estimated sum_{j > K} |beta_j| dropped by the MA truncation
  /// (exactly 0 for explicitly given MA coefficients).
  double truncation_tail() const { return truncation_tail_; }

  json to_json() const;
  static ErrorProcessSpec from_json(const json& j);

 private:
  ErrorProcessSpec() = default;
  void validate() const;

  std::vector<double> beta_;
  std::optional<std::vector<double>> ar_;
  double sigma2_ = 1.0;
  InnovationDistribution dist_;
  double truncation_tail_ = 0.0;
};

/// Autocovariances gamma_0..gamma_L of an error process.
struct AutocovarianceTable {
  std::vector<double> gamma;

  std::size_t max_lag() const { return gamma.size() - 1; }
  double at(std::size_t lag) const { return gamma.at(lag); }
};

/// Order-k best linear predictor: coefficients a_1(k)..a_k(k) minimizing
/// E(e_t + c_1 e_{t-1} + ... + c_k e_{t-k})^2, and the attained prediction
/// error variance sigma2_k.
struct PredictorCoefficients {
  std::vector<double> a;
  double sigma2 = 0.0;

  std::size_t order() const { return a.size(); }
};

/// Dense n x n Toeplitz covariance matrix built from an autocovariance
/// table (lags beyond the table are taken as zero).
Eigen::MatrixXd toeplitz_covariance(const AutocovarianceTable& acf,
                                    std::size_t n);

/// Simulate e_1..e_n by the truncated MA convolution. Deterministic given
/// the seed. burn_in extra innovations are drawn before t = 1 and must be
/// at least K so every output has a full set of lags.
Eigen::VectorXd simulate_errors(const ErrorProcessSpec& spec, std::size_t n,
                                std::size_t burn_in, std::uint64_t seed);

/// Burn-in defaulted to 10 * K.
Eigen::VectorXd simulate_errors(const ErrorProcessSpec& spec, std::size_t n,
                                std::uint64_t seed);

/// gamma_j = sigma2 * sum_i beta_i beta_{i+j} over the truncated MA
/// coefficients (beta_0 = 1); zero for j > K.
AutocovarianceTable autocovariances(const ErrorProcessSpec& spec,
                                    std::size_t max_lag);

/// AR(infinity) coefficients a_1..a_J from the power-series inversion of
/// the MA transfer function: sum a_j z^j = (sum beta_j z^j)^{-1}.
std::vector<double> ar_from_ma(const ErrorProcessSpec& spec,
                               std::size_t order);

/// Levinson-Durbin solve of the order-k Yule-Walker system. Fails loudly on
/// an ill-conditioned Toeplitz segment (prediction variance collapsing to
/// zero, or a reflection coefficient reaching 1); never regularizes.
PredictorCoefficients best_linear_predictor(const AutocovarianceTable& acf,
                                            std::size_t k);

/// All predictors of order 1..max_order from one Levinson-Durbin sweep.
std::vector<PredictorCoefficients> predictor_hierarchy(
    const AutocovarianceTable& acf, std::size_t max_order);

/// Regression coefficient law for simulated designs.
struct ThetaLaw {
  enum class Kind { PowerDecay, Explicit };
  Kind kind = Kind::PowerDecay;
  double scale = 1.0;     // PowerDecay: theta_j = scale * j^{-exponent}
  double exponent = 1.5;  // must be > 1 (summability)
  std::vector<double> values;  // Explicit

  static ThetaLaw power_decay(double scale, double exponent) {
    ThetaLaw t;
    t.kind = Kind::PowerDecay;
    t.scale = scale;
    t.exponent = exponent;
    return t;
  }
  static ThetaLaw explicit_values(std::vector<double> v) {
    ThetaLaw t;
    t.kind = Kind::Explicit;
    t.values = std::move(v);
    return t;
  }
};

/// Design specification: a coefficient law truncated at j_max plus a
/// regressor law (i.i.d. standard normal entries; optionally a constant
/// first column).
class DesignSpec {
 public:
  DesignSpec(ThetaLaw law, std::size_t j_max, bool constant_first_column = false);

  const ThetaLaw& theta_law() const { return law_; }
  std::size_t j_max() const { return j_max_; }
  bool constant_first_column() const { return constant_col_; }

  double theta(std::size_t j) const;  // 1-based index
  Eigen::VectorXd theta_vector() const;

  /// sum_{j > j_max} |theta_j|, evaluated by long partial sums plus a
  /// midpoint integral remainder for the power-decay law.
  double theta_tail() const;

  json to_json() const;
  static DesignSpec from_json(const json& j);

 private:
  void validate() const;

  ThetaLaw law_;
  std::size_t j_max_;
  bool constant_col_;
};

/// One simulated data set. simulate_design fills X, theta, mu and the
/// reported coefficient tail; the response and errors are attached later by
/// whoever owns the error process.
struct RegressionInstance {
  Eigen::MatrixXd X;      // n x j_max
  Eigen::VectorXd theta;  // j_max
  Eigen::VectorXd mu;     // X * theta
  Eigen::VectorXd y;      // empty until a response is attached
  Eigen::VectorXd errors; // empty unless simulated
  double theta_tail = 0.0;
};

RegressionInstance simulate_design(const DesignSpec& design, std::size_t n,
                                   std::uint64_t seed);

}  // namespace fglsma
