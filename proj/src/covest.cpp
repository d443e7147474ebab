#include "fglsma/covest.hpp"

#include <algorithm>
#include <cmath>

namespace fglsma {

namespace {

// Band-aware assembly of T' D^{-1} T for a T whose row i has nonzeros only
// in columns i-bw..i (bw = n-1 reproduces the dense case but is O(n^3)).
Eigen::MatrixXd assemble_tdt(const Eigen::MatrixXd& T, const Eigen::VectorXd& D,
                             std::size_t bw) {
  const std::size_t n = static_cast<std::size_t>(D.size());
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < std::min(n, i + bw + 1); ++j) {
      double acc = 0.0;
      const std::size_t k_lo = j;  // T_{ki} and T_{kj} need k >= max(i,j)
      const std::size_t k_hi = std::min(n - 1, i + bw);
      for (std::size_t k = k_lo; k <= k_hi; ++k)
        acc += T(k, i) * T(k, j) / D(k);
      s(i, j) = acc;
      s(j, i) = acc;
    }
  }
  return s;
}

}  // namespace

Eigen::MatrixXd CholeskyFactors::inverse_covariance() const {
  const Eigen::MatrixXd w = whitening_factor();
  const std::size_t n = dim();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  s.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose());
  return s.selfadjointView<Eigen::Lower>();
}

Eigen::MatrixXd CholeskyFactors::whitening_factor() const {
  return D.cwiseSqrt().cwiseInverse().asDiagonal() * T;
}

CholeskyFactors modified_cholesky(const AutocovarianceTable& acf,
                                  std::size_t n) {
  if (n < 1) throw std::invalid_argument("modified_cholesky: n must be >= 1");
  if (acf.max_lag() + 1 < n) {
    throw std::invalid_argument(
        "modified_cholesky: autocovariances must cover lags 0..n-1");
  }
  CholeskyFactors f;
  f.T = Eigen::MatrixXd::Identity(n, n);
  f.D = Eigen::VectorXd::Constant(n, acf.gamma[0]);
  if (n == 1) return f;

  const auto predictors = predictor_hierarchy(acf, n - 1);
  for (std::size_t i = 2; i <= n; ++i) {
    const auto& p = predictors[i - 2];  // order i-1
    for (std::size_t j = 1; j < i; ++j) f.T(i - 1, j - 1) = p.a[i - j - 1];
    f.D(i - 1) = p.sigma2;
  }
  return f;
}

CholeskyFactors banded_population_cholesky(const AutocovarianceTable& acf,
                                           std::size_t n, std::size_t q) {
  if (q < 1 || q >= n) {
    throw std::invalid_argument(
        "banded_population_cholesky: need 1 <= q < n");
  }
  if (acf.max_lag() < q) {
    throw std::invalid_argument(
        "banded_population_cholesky: autocovariances must cover lags 0..q");
  }
  CholeskyFactors f;
  f.T = Eigen::MatrixXd::Identity(n, n);
  f.D = Eigen::VectorXd::Constant(n, acf.gamma[0]);

  const auto predictors = predictor_hierarchy(acf, q);
  for (std::size_t i = 2; i <= n; ++i) {
    const std::size_t order = std::min(i - 1, q);
    const auto& p = predictors[order - 1];
    // Row i holds a_{i-j}(order) in columns max(1, i-q)..i-1.
    for (std::size_t lag = 1; lag <= order && lag < i; ++lag)
      f.T(i - 1, i - 1 - lag) = p.a[lag - 1];
    f.D(i - 1) = p.sigma2;
  }
  return f;
}

Eigen::MatrixXd banded_population_inverse(const AutocovarianceTable& acf,
                                          std::size_t n, std::size_t q) {
  const CholeskyFactors f = banded_population_cholesky(acf, n, q);
  return assemble_tdt(f.T, f.D, q);
}

Eigen::VectorXd ls_residuals(const Eigen::VectorXd& y,
                             const Eigen::MatrixXd& X, std::size_t d) {
  const std::size_t n = static_cast<std::size_t>(y.size());
  if (d < 1) throw std::invalid_argument("ls_residuals: d must be >= 1");
  if (d > n || static_cast<Eigen::Index>(d) > X.cols()) {
    throw std::invalid_argument("ls_residuals: d exceeds available columns");
  }
  if (X.rows() != y.size()) {
    throw std::invalid_argument("ls_residuals: X and y dimension mismatch");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X.leftCols(d));
  qr.setThreshold(1e-10);
  if (static_cast<std::size_t>(qr.rank()) < d) {
    throw std::runtime_error(
        "ls_residuals: first " + std::to_string(d) +
        " design columns are rank deficient (rank " +
        std::to_string(qr.rank()) + ")");
  }
  return y - X.leftCols(d) * qr.solve(y);
}

ResidualArFit fit_residual_ar_window(const Eigen::VectorXd& ehat,
                                     std::size_t k, std::size_t window_start) {
  const std::size_t n = static_cast<std::size_t>(ehat.size());
  if (k < 1) throw std::invalid_argument("fit_residual_ar: k must be >= 1");
  if (window_start <= k) {
    throw std::invalid_argument(
        "fit_residual_ar: window start must exceed the order (lags must "
        "exist)");
  }
  if (n + 1 <= window_start || n - window_start + 1 < k) {
    throw std::invalid_argument("fit_residual_ar: window is empty or shorter "
                                "than the order");
  }
  const std::size_t rows = n - window_start + 1;

  Eigen::MatrixXd lagged(rows, k);
  Eigen::VectorXd rhs(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t t = window_start + r;  // 1-based time index
    rhs(r) = -ehat(t - 1);
    for (std::size_t j = 1; j <= k; ++j) lagged(r, j - 1) = ehat(t - j - 1);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(lagged);
  qr.setThreshold(1e-10);
  if (static_cast<std::size_t>(qr.rank()) < k) {
    throw std::runtime_error(
        "fit_residual_ar: lagged residual matrix is rank deficient at order " +
        std::to_string(k));
  }
  Eigen::VectorXd coef = qr.solve(rhs);

  ResidualArFit fit;
  fit.predictor.a.assign(coef.data(), coef.data() + k);
  double rss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double v = -rhs(r);
    for (std::size_t j = 0; j < k; ++j) v += coef(j) * lagged(r, j);
    rss += v * v;
  }
  fit.predictor.sigma2 = rss / static_cast<double>(rows);
  fit.gamma0 = ehat.squaredNorm() / static_cast<double>(n);
  return fit;
}

ResidualArFit fit_residual_ar(const Eigen::VectorXd& ehat, std::size_t k,
                              std::size_t q) {
  const std::size_t n = static_cast<std::size_t>(ehat.size());
  if (k > q) throw std::invalid_argument("fit_residual_ar: need k <= q");
  if (q >= n) throw std::invalid_argument("fit_residual_ar: need q < n");
  if (n < q + 10) {
    throw std::invalid_argument(
        "fit_residual_ar: need at least q + 10 observations");
  }
  return fit_residual_ar_window(ehat, k, q + 1);
}

json BandedInverseEstimate::to_json() const {
  json j;
  j["n"] = n;
  j["q"] = q;
  j["d"] = d;
  j["gamma0_hat"] = gamma0_hat;
  j["sigma2_hat"] = sigma2_hat;
  j["a_hat"] = a_hat;
  j["floored_entries"] = floored_entries;
  j["floor_activated"] = !floored_entries.empty();
  return j;
}

BandedInverseEstimate estimate_inverse(const Eigen::VectorXd& y,
                                       const Eigen::MatrixXd& X,
                                       std::size_t d, std::size_t q) {
  const std::size_t n = static_cast<std::size_t>(y.size());
  const Eigen::VectorXd ehat = ls_residuals(y, X, d);

  BandedInverseEstimate est;
  est.n = n;
  est.q = q;
  est.d = d;
  est.a_hat.resize(q);
  est.sigma2_hat.resize(q);
  for (std::size_t k = 1; k <= q; ++k) {
    const ResidualArFit fit = fit_residual_ar(ehat, k, q);
    est.a_hat[k - 1] = fit.predictor.a;
    est.sigma2_hat[k - 1] = fit.predictor.sigma2;
    if (k == 1) est.gamma0_hat = fit.gamma0;
  }
  if (!(est.gamma0_hat > 0.0)) {
    throw std::runtime_error("estimate_inverse: residuals are identically zero");
  }

  est.T = Eigen::MatrixXd::Identity(n, n);
  est.D = Eigen::VectorXd::Constant(n, est.gamma0_hat);
  for (std::size_t i = 2; i <= n; ++i) {
    const std::size_t order = std::min(i - 1, q);
    const auto& a = est.a_hat[order - 1];
    for (std::size_t lag = 1; lag <= order && lag < i; ++lag)
      est.T(i - 1, i - 1 - lag) = a[lag - 1];
    est.D(i - 1) = est.sigma2_hat[order - 1];
  }

  const double floor = 1e-8 * est.gamma0_hat;
  for (std::size_t i = 0; i < n; ++i) {
    if (est.D(i) < floor) {
      est.D(i) = floor;
      est.floored_entries.push_back(i);
    }
  }

  est.inverse = assemble_tdt(est.T, est.D, q);
  return est;
}

std::size_t select_banding(std::size_t n, const BandingDecay& decay) {
  if (n < 20) throw std::invalid_argument("select_banding: n must be >= 20");
  if (decay.mode == BandingDecay::Mode::Exponential) {
    if (!(decay.c4 > 0.0)) {
      throw std::invalid_argument("select_banding: c4 must be positive");
    }
    const double v = decay.c4 * std::log(static_cast<double>(n));
    return static_cast<std::size_t>(
        std::max<long long>(1, std::llround(v)));
  }
  if (decay.nu0 < 1.0 / 3.0) {
    throw std::invalid_argument("select_banding: nu0 must be >= 1/3");
  }
  const double inv_s = std::isinf(decay.S) ? 0.0 : 2.0 / decay.S;
  const double exponent = 1.0 / (2.0 * (1.0 + inv_s + decay.nu0));
  const double v = std::pow(static_cast<double>(n), exponent);
  return static_cast<std::size_t>(std::max(1.0, std::floor(v)));
}

std::size_t select_dimension(std::size_t n, double c,
                             DimensionRounding rounding) {
  if (!(c > 0.0)) throw std::invalid_argument("select_dimension: c must be > 0");
  const double v = c * std::pow(static_cast<double>(n), 0.25);
  const double r = rounding == DimensionRounding::Round
                       ? static_cast<double>(std::llround(v))
                       : std::ceil(v);
  return static_cast<std::size_t>(std::max(1.0, r));
}

namespace {

double power_largest_singular_value(const Eigen::MatrixXd& delta) {
  const Eigen::Index n = delta.cols();
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v(i) = 1.0 + 1e-3 * std::sin(static_cast<double>(i + 1));
  v.normalize();

  constexpr double kRelTol = 1e-9;
  constexpr std::size_t kMaxIter = 20000;
  double lambda = 0.0;
  for (std::size_t iter = 1; iter <= kMaxIter; ++iter) {
    const Eigen::VectorXd u = delta * v;
    Eigen::VectorXd w = delta.transpose() * u;
    const double lambda_new = v.dot(w);  // Rayleigh quotient for delta'delta
    const double wnorm = w.norm();
    if (wnorm == 0.0) return 0.0;
    v = w / wnorm;
    if (iter > 1 && std::abs(lambda_new - lambda) <= kRelTol * std::abs(lambda_new)) {
      return std::sqrt(std::max(0.0, lambda_new));
    }
    lambda = lambda_new;
  }
  throw PowerIterationError(
      "spectral_distance: power iteration did not converge",
      std::sqrt(std::max(0.0, lambda)), kMaxIter);
}

}  // namespace

double spectral_distance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols() || A.rows() != A.cols()) {
    throw std::invalid_argument(
        "spectral_distance: matrices must be square with equal dimensions");
  }
  return power_largest_singular_value(A - B);
}

double spectral_norm(const Eigen::MatrixXd& A) {
  return power_largest_singular_value(A);
}

}  // namespace fglsma
