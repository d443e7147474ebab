#include "fglsma/timeseries.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "fglsma/rng.hpp"

namespace fglsma {

namespace {

// Spectral radius of the companion matrix of the reversed polynomial
// w^K + c_1 w^{K-1} + ... + c_K, whose roots are the reciprocals of the
// roots of 1 + c_1 z + ... + c_K z^K. Radius < 1 iff all roots of the
// original polynomial lie strictly outside the closed unit disk.
double reciprocal_root_radius(const std::vector<double>& coeffs) {
  const std::size_t k = coeffs.size();
  if (k == 0) return 0.0;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t j = 0; j < k; ++j) companion(0, j) = -coeffs[j];
  for (std::size_t i = 1; i < k; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

constexpr double kRootMargin = 1e-10;

// beta_j of 1/a(z) for j = 1..count, a_0 = 1.
std::vector<double> invert_series(const std::vector<double>& a,
                                  std::size_t count) {
  std::vector<double> beta(count, 0.0);
  for (std::size_t j = 1; j <= count; ++j) {
    double s = 0.0;
    const std::size_t upper = std::min(j, a.size());
    for (std::size_t i = 1; i <= upper; ++i) {
      const double prev = (j == i) ? 1.0 : beta[j - i - 1];
      s += a[i - 1] * prev;
    }
    beta[j - 1] = -s;
  }
  return beta;
}

}  // namespace

ErrorProcessSpec ErrorProcessSpec::from_ma(std::vector<double> ma_coefficients,
                                           double innovation_variance,
                                           InnovationDistribution dist) {
  ErrorProcessSpec spec;
  spec.beta_ = std::move(ma_coefficients);
  spec.sigma2_ = innovation_variance;
  spec.dist_ = dist;
  spec.truncation_tail_ = 0.0;
  spec.validate();
  return spec;
}

ErrorProcessSpec ErrorProcessSpec::from_ar(std::vector<double> ar_coefficients,
                                           double innovation_variance,
                                           InnovationDistribution dist,
                                           std::size_t ma_truncation) {
  const double radius = reciprocal_root_radius(ar_coefficients);
  if (radius >= 1.0 - kRootMargin) {
    throw std::invalid_argument(
        "ErrorProcessSpec: AR form is not stationary (companion spectral "
        "radius " + std::to_string(radius) + ")");
  }
  // Invert the AR polynomial well past the truncation point so the dropped
  // tail can be reported.
  const std::size_t extra = std::max<std::size_t>(ma_truncation, 512);
  std::vector<double> beta = invert_series(ar_coefficients,
                                           ma_truncation + extra);
  double tail = 0.0;
  for (std::size_t j = ma_truncation; j < beta.size(); ++j)
    tail += std::abs(beta[j]);
  // Geometric extrapolation beyond the computed extension.
  if (beta.size() >= 2) {
    const double last = std::abs(beta[beta.size() - 1]);
    const double prev = std::abs(beta[beta.size() - 2]);
    if (prev > 0.0 && last < prev) {
      const double r = last / prev;
      tail += last * r / (1.0 - r);
    }
  }
  beta.resize(ma_truncation);

  ErrorProcessSpec spec;
  spec.beta_ = std::move(beta);
  spec.ar_ = std::move(ar_coefficients);
  spec.sigma2_ = innovation_variance;
  spec.dist_ = dist;
  spec.truncation_tail_ = tail;
  spec.validate();
  return spec;
}

ErrorProcessSpec ErrorProcessSpec::white_noise(double innovation_variance,
                                               InnovationDistribution dist) {
  return from_ma({}, innovation_variance, dist);
}

void ErrorProcessSpec::validate() const {
  if (!(sigma2_ > 0.0)) {
    throw std::invalid_argument(
        "ErrorProcessSpec: innovation variance must be positive");
  }
  if (dist_.kind == InnovationDistribution::Kind::StudentT && dist_.dof <= 4.0) {
    throw std::invalid_argument(
        "ErrorProcessSpec: Student-t innovations require dof > 4 "
        "(moment condition)");
  }
  const double radius = reciprocal_root_radius(beta_);
  if (radius >= 1.0 - kRootMargin) {
    throw std::invalid_argument(
        "ErrorProcessSpec: MA polynomial has a root with |z| <= 1 "
        "(not invertible; reciprocal radius " + std::to_string(radius) + ")");
  }
  if (ar_) {
    const double ar_radius = reciprocal_root_radius(*ar_);
    if (ar_radius >= 1.0 - kRootMargin) {
      throw std::invalid_argument(
          "ErrorProcessSpec: AR form is not stationary");
    }
  }
}

json ErrorProcessSpec::to_json() const {
  json j;
  j["ma_coefficients"] = beta_;
  if (ar_) {
    j["ar_form"] = *ar_;
  } else {
    j["ar_form"] = nullptr;
  }
  j["innovation_variance"] = sigma2_;
  json dist;
  if (dist_.kind == InnovationDistribution::Kind::Gaussian) {
    dist["kind"] = "gaussian";
  } else {
    dist["kind"] = "student_t";
    dist["dof"] = dist_.dof;
  }
  j["innovation_distribution"] = dist;
  return j;
}

ErrorProcessSpec ErrorProcessSpec::from_json(const json& j) {
  InnovationDistribution dist;
  if (j.contains("innovation_distribution")) {
    const auto& d = j.at("innovation_distribution");
    const std::string kind = d.at("kind").get<std::string>();
    if (kind == "gaussian") {
      dist = InnovationDistribution::gaussian();
    } else if (kind == "student_t") {
      dist = InnovationDistribution::student_t(d.at("dof").get<double>());
    } else {
      throw std::invalid_argument(
          "ErrorProcessSpec: unknown innovation distribution '" + kind + "'");
    }
  }
  const double sigma2 = j.at("innovation_variance").get<double>();
  if (j.contains("ar_form") && !j.at("ar_form").is_null()) {
    auto ar = j.at("ar_form").get<std::vector<double>>();
    std::size_t trunc = ErrorProcessSpec::kDefaultTruncation;
    if (j.contains("ma_truncation")) trunc = j.at("ma_truncation").get<std::size_t>();
    return from_ar(std::move(ar), sigma2, dist, trunc);
  }
  auto ma = j.at("ma_coefficients").get<std::vector<double>>();
  return from_ma(std::move(ma), sigma2, dist);
}

Eigen::MatrixXd toeplitz_covariance(const AutocovarianceTable& acf,
                                    std::size_t n) {
  Eigen::MatrixXd sigma(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t lag = i > j ? i - j : j - i;
      sigma(i, j) = lag <= acf.max_lag() ? acf.gamma[lag] : 0.0;
    }
  }
  return sigma;
}

Eigen::VectorXd simulate_errors(const ErrorProcessSpec& spec, std::size_t n,
                                std::size_t burn_in, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("simulate_errors: n must be >= 1");
  const std::size_t k = spec.ma_coefficients().size();
  if (burn_in < k) {
    throw std::invalid_argument(
        "simulate_errors: burn_in must be at least the MA truncation length");
  }
  rng::Sampler sampler(seed);
  const double sigma = std::sqrt(spec.innovation_variance());
  const auto& dist = spec.innovation_distribution();

  // Innovations alpha_{1-burn_in}..alpha_n, Student-t rescaled to variance
  // sigma2.
  std::vector<double> alpha(burn_in + n);
  if (dist.kind == InnovationDistribution::Kind::Gaussian) {
    for (double& a : alpha) a = sigma * sampler.normal();
  } else {
    const double scale = sigma * std::sqrt((dist.dof - 2.0) / dist.dof);
    for (double& a : alpha) a = scale * sampler.student_t(dist.dof);
  }

  const auto& beta = spec.ma_coefficients();
  Eigen::VectorXd e(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t idx = burn_in + t;  // position of alpha_t
    double v = alpha[idx];
    for (std::size_t j = 1; j <= k; ++j) v += beta[j - 1] * alpha[idx - j];
    e(t) = v;
  }
  return e;
}

Eigen::VectorXd simulate_errors(const ErrorProcessSpec& spec, std::size_t n,
                                std::uint64_t seed) {
  return simulate_errors(spec, n, 10 * spec.ma_coefficients().size(), seed);
}

AutocovarianceTable autocovariances(const ErrorProcessSpec& spec,
                                    std::size_t max_lag) {
  const auto& beta = spec.ma_coefficients();
  const std::size_t k = beta.size();
  const double sigma2 = spec.innovation_variance();
  auto b = [&](std::size_t i) { return i == 0 ? 1.0 : beta[i - 1]; };

  AutocovarianceTable acf;
  acf.gamma.assign(max_lag + 1, 0.0);
  for (std::size_t j = 0; j <= std::min(max_lag, k); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i + j <= k; ++i) s += b(i) * b(i + j);
    acf.gamma[j] = sigma2 * s;
  }

  // Positive definiteness of the leading Toeplitz segment (lags 0..20).
  const std::size_t check_dim = std::min<std::size_t>(max_lag, 20) + 1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      toeplitz_covariance(acf, check_dim), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 1e-10 * acf.gamma[0]) {
    throw std::runtime_error(
        "autocovariances: leading Toeplitz segment is not positive definite");
  }
  return acf;
}

std::vector<double> ar_from_ma(const ErrorProcessSpec& spec,
                               std::size_t order) {
  // Invertibility was established at construction; the inversion is the
  // same recursion in the other direction.
  std::vector<double> padded(spec.ma_coefficients());
  return invert_series(padded, order);
}

std::vector<PredictorCoefficients> predictor_hierarchy(
    const AutocovarianceTable& acf, std::size_t max_order) {
  if (max_order < 1) {
    throw std::invalid_argument("predictor_hierarchy: order must be >= 1");
  }
  if (acf.max_lag() < max_order) {
    throw std::invalid_argument(
        "predictor_hierarchy: autocovariances must cover lags 0.." +
        std::to_string(max_order));
  }
  const double gamma0 = acf.gamma[0];
  if (!(gamma0 > 0.0)) {
    throw std::runtime_error("predictor_hierarchy: gamma_0 must be positive");
  }
  constexpr double kConditionFloor = 1e-12;

  std::vector<PredictorCoefficients> out;
  out.reserve(max_order);
  std::vector<double> a;  // a_1(k)..a_k(k)
  double sigma2 = gamma0;
  for (std::size_t k = 1; k <= max_order; ++k) {
    if (sigma2 <= kConditionFloor * gamma0) {
      throw std::runtime_error(
          "best_linear_predictor: Toeplitz segment ill-conditioned at order " +
          std::to_string(k));
    }
    double acc = acf.gamma[k];
    for (std::size_t j = 1; j < k; ++j) acc += a[j - 1] * acf.gamma[k - j];
    const double reflection = -acc / sigma2;
    if (!(std::abs(reflection) < 1.0)) {
      throw std::runtime_error(
          "best_linear_predictor: reflection coefficient reached 1 at order " +
          std::to_string(k) + " (singular Toeplitz segment)");
    }
    std::vector<double> next(k);
    for (std::size_t j = 1; j < k; ++j)
      next[j - 1] = a[j - 1] + reflection * a[k - j - 1];
    next[k - 1] = reflection;
    a = std::move(next);
    sigma2 *= (1.0 - reflection * reflection);
    out.push_back(PredictorCoefficients{a, sigma2});
  }
  return out;
}

PredictorCoefficients best_linear_predictor(const AutocovarianceTable& acf,
                                            std::size_t k) {
  return predictor_hierarchy(acf, k).back();
}

DesignSpec::DesignSpec(ThetaLaw law, std::size_t j_max,
                       bool constant_first_column)
    : law_(std::move(law)), j_max_(j_max), constant_col_(constant_first_column) {
  validate();
}

void DesignSpec::validate() const {
  if (j_max_ < 1) throw std::invalid_argument("DesignSpec: j_max must be >= 1");
  if (law_.kind == ThetaLaw::Kind::PowerDecay && law_.exponent <= 1.0) {
    throw std::invalid_argument(
        "DesignSpec: power-decay exponent must exceed 1 (sum |theta_j| "
        "diverges otherwise)");
  }
}

double DesignSpec::theta(std::size_t j) const {
  if (j < 1) throw std::invalid_argument("DesignSpec: theta index is 1-based");
  if (law_.kind == ThetaLaw::Kind::Explicit) {
    return j <= law_.values.size() ? law_.values[j - 1] : 0.0;
  }
  return law_.scale * std::pow(static_cast<double>(j), -law_.exponent);
}

Eigen::VectorXd DesignSpec::theta_vector() const {
  Eigen::VectorXd t(j_max_);
  for (std::size_t j = 1; j <= j_max_; ++j) t(j - 1) = theta(j);
  return t;
}

double DesignSpec::theta_tail() const {
  if (law_.kind == ThetaLaw::Kind::Explicit) {
    double tail = 0.0;
    for (std::size_t j = j_max_; j < law_.values.size(); ++j)
      tail += std::abs(law_.values[j]);
    return tail;
  }
  // Partial sum out to a large horizon, then a midpoint integral remainder.
  const double s = law_.exponent;
  const std::size_t horizon = 1'000'000;
  double tail = 0.0;
  for (std::size_t j = horizon; j > j_max_; --j)
    tail += std::pow(static_cast<double>(j), -s);
  const double b = static_cast<double>(horizon) + 0.5;
  tail += std::pow(b, 1.0 - s) / (s - 1.0);
  return std::abs(law_.scale) * tail;
}

json DesignSpec::to_json() const {
  json law;
  if (law_.kind == ThetaLaw::Kind::PowerDecay) {
    law["kind"] = "power_decay";
    law["scale"] = law_.scale;
    law["exponent"] = law_.exponent;
  } else {
    law["kind"] = "explicit";
    law["values"] = law_.values;
  }
  return json{{"theta_law", law},
              {"j_max", j_max_},
              {"constant_first_column", constant_col_}};
}

DesignSpec DesignSpec::from_json(const json& j) {
  const auto& law = j.at("theta_law");
  const std::string kind = law.at("kind").get<std::string>();
  ThetaLaw t;
  if (kind == "power_decay") {
    t = ThetaLaw::power_decay(law.at("scale").get<double>(),
                              law.at("exponent").get<double>());
  } else if (kind == "explicit") {
    t = ThetaLaw::explicit_values(law.at("values").get<std::vector<double>>());
  } else {
    throw std::invalid_argument("DesignSpec: unknown theta law '" + kind + "'");
  }
  bool constant = false;
  if (j.contains("constant_first_column"))
    constant = j.at("constant_first_column").get<bool>();
  return DesignSpec(std::move(t), j.at("j_max").get<std::size_t>(), constant);
}

RegressionInstance simulate_design(const DesignSpec& design, std::size_t n,
                                   std::uint64_t seed) {
  rng::Sampler sampler(seed);
  RegressionInstance inst;
  inst.X.resize(n, design.j_max());
  const std::size_t first_random = design.constant_first_column() ? 1 : 0;
  if (design.constant_first_column()) inst.X.col(0).setOnes();
  // Row-major fill order; part of the determinism contract.
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = first_random; j < design.j_max(); ++j)
      inst.X(t, j) = sampler.normal();
  inst.theta = design.theta_vector();
  inst.mu = inst.X * inst.theta;
  inst.theta_tail = design.theta_tail();
  return inst;
}

}  // namespace fglsma
