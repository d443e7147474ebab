#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fglsma/timeseries.hpp"

namespace fglsma {

/// Modified Cholesky factorization of an inverse covariance matrix:
/// Sigma^{-1} = T' D^{-1} T, where row i of the unit-lower-triangular T
/// carries the order-(i-1) best-linear-predictor coefficients and D the
/// prediction-error variances (gamma_0, sigma2_1, ..., sigma2_{n-1}).
struct CholeskyFactors {
  Eigen::MatrixXd T;  // unit lower triangular
  Eigen::VectorXd D;  // positive

  std::size_t dim() const { return static_cast<std::size_t>(D.size()); }

  /// Dense T' D^{-1} T.
  Eigen::MatrixXd inverse_covariance() const;

  /// R = D^{-1/2} T, so that R' R = Sigma^{-1}.
  Eigen::MatrixXd whitening_factor() const;
};

CholeskyFactors modified_cholesky(const AutocovarianceTable& acf,
                                  std::size_t n);

/// q-banded factors: rows 2..q of T use the order-(i-1) predictor, rows
/// q+1..n reuse the order-q predictor; D repeats sigma2_q past position q.
CholeskyFactors banded_population_cholesky(const AutocovarianceTable& acf,
                                           std::size_t n, std::size_t q);

/// Assembled Sigma_n^{-1}(q) = T'(q) D^{-1}(q) T(q).
Eigen::MatrixXd banded_population_inverse(const AutocovarianceTable& acf,
                                          std::size_t n, std::size_t q);

/// Least squares residuals (I - H_d) y, H_d the orthogonal projection onto
/// the first d columns of X. Fails if those columns are rank deficient.
Eigen::VectorXd ls_residuals(const Eigen::VectorXd& y,
                             const Eigen::MatrixXd& X, std::size_t d);

/// Residual-based AR(k) fit plus the lag-0 moment.
struct ResidualArFit {
  PredictorCoefficients predictor;  // a_1(k)..a_k(k), sigma2_k
  double gamma0 = 0.0;              // n^{-1} sum e_t^2
};

/// Least squares AR(k) fit on residuals over the fixed window t = q+1..n
/// (the window is shared by all orders k <= q; it does not shrink with k).
/// sigma2 uses normalizer (n - q).
ResidualArFit fit_residual_ar(const Eigen::VectorXd& ehat, std::size_t k,
                              std::size_t q);

/// Same fit with the window start exposed (1-based first usable t).
ResidualArFit fit_residual_ar_window(const Eigen::VectorXd& ehat,
                                     std::size_t k, std::size_t window_start);

/// Residual-plug-in banded Cholesky estimate of Sigma_n^{-1}.
struct BandedInverseEstimate {
  std::size_t n = 0;
  std::size_t q = 0;
  std::size_t d = 0;
  Eigen::MatrixXd T;        // \hat T(q), dense storage, banded structure
  Eigen::VectorXd D;        // floored prediction-error variances
  Eigen::MatrixXd inverse;  // \hat Sigma^{-1}(q)

  // Provenance.
  double gamma0_hat = 0.0;
  std::vector<double> sigma2_hat;             // sigma2_1..sigma2_q, pre-floor
  std::vector<std::vector<double>> a_hat;     // a(1)..a(q)
  std::vector<std::size_t> floored_entries;   // indices of D where the floor bound

  json to_json() const;
};

/// Full residual pipeline: LS residuals from the first d columns, AR fits
/// of orders 1..q on the shared window, factor assembly, and the D-floor
/// guard (entries below 1e-8 * gamma0_hat are raised and reported).
BandedInverseEstimate estimate_inverse(const Eigen::VectorXd& y,
                                       const Eigen::MatrixXd& X,
                                       std::size_t d, std::size_t q);

/// Banding-parameter rule.
struct BandingDecay {
  enum class Mode { Exponential, Algebraic };
  Mode mode = Mode::Exponential;
  double c4 = 1.5;  // exponential: q = max(1, round(c4 log n))
  double nu0 = 1.0; // algebraic: q = floor(n^{1/(2(1 + 2/S + nu0))}), nu0 >= 1/3
  double S = std::numeric_limits<double>::infinity();

  static BandingDecay exponential(double c4) {
    BandingDecay b;
    b.mode = Mode::Exponential;
    b.c4 = c4;
    return b;
  }
  static BandingDecay algebraic(double nu0,
                                double S = std::numeric_limits<double>::infinity()) {
    BandingDecay b;
    b.mode = Mode::Algebraic;
    b.nu0 = nu0;
    b.S = S;
    return b;
  }
};

std::size_t select_banding(std::size_t n, const BandingDecay& decay);

enum class DimensionRounding { Round, Ceil };

/// Working dimension d_n = max(1, round(c n^{1/4})); ceil on request.
std::size_t select_dimension(std::size_t n, double c,
                             DimensionRounding rounding = DimensionRounding::Round);

/// Thrown when the spectral power iteration hits its cap; carries the last
/// iterate so callers can still inspect it.
class PowerIterationError : public std::runtime_error {
 public:
  PowerIterationError(const std::string& msg, double last_estimate,
                      std::size_t iterations)
      : std::runtime_error(msg),
        last_estimate(last_estimate),
        iterations(iterations) {}
  double last_estimate;
  std::size_t iterations;
};

/// Largest singular value of A - B by power iteration on (A-B)'(A-B),
/// relative tolerance 1e-9, deterministic start vector.
double spectral_distance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Largest singular value of A (same machinery).
double spectral_norm(const Eigen::MatrixXd& A);

}  // namespace fglsma
