#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fglsma/covest.hpp"

namespace fglsma {

enum class WeightingKind { Identity, ExactInverse, EstimatedInverse };

/// A positive definite weighting matrix W held in factored form, W = R'R.
/// All W-inner products go through R, so a single factorization is shared by
/// fits, criteria and losses. The identity weighting applies no transform at
/// all, which makes the reduction of the whitened criteria to their
/// ordinary-least-squares counterparts an arithmetic identity, not an
/// approximation.
class Weighting {
 public:
  static Weighting identity(std::size_t n);

  /// Cholesky-factorize a dense symmetric positive definite W.
  static Weighting from_inverse(const Eigen::MatrixXd& W,
                                WeightingKind kind = WeightingKind::ExactInverse);

  /// R = D^{-1/2} T from modified-Cholesky factors (no refactorization).
  static Weighting from_factors(const CholeskyFactors& factors,
                                WeightingKind kind = WeightingKind::ExactInverse);

  /// Banded R from a residual-based estimate; applications cost O(n q).
  static Weighting from_estimate(const BandedInverseEstimate& estimate);

  std::size_t dim() const { return n_; }
  WeightingKind kind() const { return kind_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& m) const;

 private:
  Weighting(std::size_t n, WeightingKind kind) : n_(n), kind_(kind) {}

  std::size_t n_ = 0;
  WeightingKind kind_ = WeightingKind::Identity;
  bool banded_ = false;
  Eigen::MatrixXd R_;          // dense factor (unused when identity/banded)
  Eigen::MatrixXd T_;          // banded storage
  Eigen::VectorXd d_inv_sqrt_;
  std::size_t q_ = 0;
};

struct GlsFit {
  Eigen::VectorXd fitted;
  Eigen::VectorXd coef;
};

/// GLS fit of y on the columns of Xm under weighting W: coefficients
/// (Xm' W Xm)^{-1} Xm' W y computed by QR on the whitened problem.
GlsFit gls_fit(const Eigen::MatrixXd& Xm, const Eigen::VectorXd& y,
               const Weighting& weighting);
GlsFit gls_fit(const Eigen::MatrixXd& Xm, const Eigen::VectorXd& y,
               const Eigen::MatrixXd& W);

/// Nested candidate fits sharing one weighting matrix.
class CandidateFits {
 public:
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t n_models() const { return sizes_.size(); }
  std::size_t n() const { return static_cast<std::size_t>(fitted_.rows()); }
  const Eigen::MatrixXd& fitted() const { return fitted_; }
  const Weighting& weighting() const { return weighting_; }
  const Eigen::MatrixXd& design() const { return X_; }

  /// Averaged fit sum_m w_m muhat(m).
  Eigen::VectorXd fitted_at(const Eigen::VectorXd& w) const;

  /// GLS projection of an arbitrary vector onto the m-th model
  /// (0-based m), under the shared weighting.
  Eigen::VectorXd project(std::size_t m, const Eigen::VectorXd& v) const;

 private:
  friend CandidateFits build_candidates(const Eigen::MatrixXd&,
                                        const Eigen::VectorXd&,
                                        const std::vector<std::size_t>&,
                                        const Weighting&);
  CandidateFits(Eigen::MatrixXd X, std::vector<std::size_t> sizes,
                Weighting weighting, Eigen::MatrixXd fitted)
      : X_(std::move(X)),
        sizes_(std::move(sizes)),
        weighting_(std::move(weighting)),
        fitted_(std::move(fitted)) {}

  Eigen::MatrixXd X_;  // first k_M columns of the design
  std::vector<std::size_t> sizes_;
  Weighting weighting_;
  Eigen::MatrixXd fitted_;  // n x M
};

CandidateFits build_candidates(const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y,
                               const std::vector<std::size_t>& sizes,
                               const Weighting& weighting);

enum class CriterionKind { Amma, Famma, GseLoss, Risk };

/// Any of the weight criteria reduced to w'Qw + b'w + c.
struct QuadraticWeightCriterion {
  Eigen::MatrixXd Q;
  Eigen::VectorXd b;
  double c = 0.0;
  CriterionKind kind = CriterionKind::Amma;

  std::size_t n_models() const { return static_cast<std::size_t>(Q.rows()); }
  double value(const Eigen::VectorXd& w) const {
    return w.dot(Q * w) + b.dot(w) + c;
  }
};

/// Whitened-residual Mallows criterion
///   (y - muhat(w))' W (y - muhat(w)) + 2 sum_m w_m k_m
/// in quadratic form. With the identity weighting this is exactly the MMA
/// criterion on least squares fits.
QuadraticWeightCriterion amma(const CandidateFits& fits,
                              const Eigen::VectorXd& y,
                              const Weighting& sigma_inv);

/// Same construction with an estimated inverse covariance throughout.
QuadraticWeightCriterion famma(const CandidateFits& fits,
                               const Eigen::VectorXd& y,
                               const Weighting& sigma_inv_hat);

/// Generalized squared error loss (muhat(w) - mu)' W (muhat(w) - mu) as a
/// quadratic in w. The weighting here is always the exact inverse
/// covariance, even when the fits are feasible-GLS.
QuadraticWeightCriterion gse_loss(const CandidateFits& fits,
                                  const Eigen::VectorXd& mu_true,
                                  const Weighting& exact_sigma_inv);

/// Symmetric inverse square root by eigendecomposition, with eigenvalues
/// floored at 1e-12 times the largest. Rejects matrices with a genuinely
/// negative spectrum.
Eigen::MatrixXd symmetric_inverse_sqrt(const Eigen::MatrixXd& sigma);

/// Conditional risk of the averaging estimator (given the design) in
/// quadratic form:
///   Q_{ml} = mu' S (I - P_{max(m,l)}) S mu + min(k_m, k_l),  S = Sigma^{-1/2}.
QuadraticWeightCriterion risk_criterion(const Eigen::VectorXd& mu,
                                        const Eigen::MatrixXd& X,
                                        const std::vector<std::size_t>& sizes,
                                        const Eigen::MatrixXd& sigma);

/// Same with a precomputed Sigma^{-1/2} (callers doing many evaluations
/// against one covariance).
QuadraticWeightCriterion risk_criterion_with_root(
    const Eigen::VectorXd& mu, const Eigen::MatrixXd& X,
    const std::vector<std::size_t>& sizes, const Eigen::MatrixXd& inv_sqrt);

double conditional_risk(const Eigen::VectorXd& w, const Eigen::VectorXd& mu,
                        const Eigen::MatrixXd& X,
                        const std::vector<std::size_t>& sizes,
                        const Eigen::MatrixXd& sigma);

/// Per-model risks D(m) = mu' S (I - P_m) S mu + k_m and their minimum,
/// the information index of the candidate set.
struct SingleModelRisks {
  Eigen::VectorXd D;
  double k_star = 0.0;
  std::size_t argmin = 0;
};

SingleModelRisks single_model_risks(const Eigen::VectorXd& mu,
                                    const Eigen::MatrixXd& X,
                                    const std::vector<std::size_t>& sizes,
                                    const Eigen::MatrixXd& sigma);

SingleModelRisks single_model_risks_with_root(
    const Eigen::VectorXd& mu, const Eigen::MatrixXd& X,
    const std::vector<std::size_t>& sizes, const Eigen::MatrixXd& inv_sqrt);

/// A weight vector in H_N: at most N nonzero entries, each at least delta,
/// summing to one (renormalized after solves).
class WeightVector {
 public:
  WeightVector(Eigen::VectorXd w, std::size_t N, double delta);

  const Eigen::VectorXd& values() const { return w_; }
  const std::vector<std::size_t>& support() const { return support_; }
  std::size_t sparsity_bound() const { return N_; }
  double lower_bound() const { return delta_; }

  static WeightVector unit(std::size_t m, std::size_t M, std::size_t N,
                           double delta);

  json to_json() const;

 private:
  Eigen::VectorXd w_;
  std::vector<std::size_t> support_;
  std::size_t N_ = 1;
  double delta_ = 0.0;
};

struct HnOptions {
  std::size_t support_cap = 1'000'000;  // max enumerated supports
  double feasibility_tol = 1e-9;
};

struct OptimizationResult {
  WeightVector weights;
  double value = 0.0;
  std::size_t supports_examined = 0;
  std::size_t kkt_solves = 0;
  std::size_t singular_skips = 0;   // KKT systems skipped as singular
  std::size_t skipped_supports = 0; // supports with no usable KKT point
  bool tied = false;                // an exact value tie was broken

  json to_json() const;
};

/// Exact minimizer of a quadratic criterion over H_N: enumerate supports of
/// size 1..N; on each support solve the equality-constrained problem for
/// every subset of coordinates pinned at delta, keep feasible minima. Ties
/// are broken toward the lexicographically smallest support, then the
/// smallest support size.
OptimizationResult minimize_over_HN(const QuadraticWeightCriterion& crit,
                                    std::size_t N, double delta,
                                    const HnOptions& options = {});

/// Approximate fallback for candidate counts beyond the support cap:
/// greedy forward selection of the support, exact solve per visited
/// support. Not an exact minimizer.
OptimizationResult minimize_over_HN_greedy(const QuadraticWeightCriterion& crit,
                                           std::size_t N, double delta,
                                           const HnOptions& options = {});

/// Discrete weight grid H_n(N): all w with entries in {0, 1/N, ..., 1}
/// summing to one. Fails (stating the count) past the cap.
std::vector<Eigen::VectorXd> grid_weights(std::size_t M, std::size_t N,
                                          std::size_t cap = 2'000'000);

/// Achieved loss over infimum loss.
double efficiency_ratio(double numerator, double denominator);

/// Residual of the algebraic identity relating the criterion and the loss,
///   C(w) - L(w) = e'We + 2 e'W(I - P(w))mu - 2 (e'W P(w) e - sum w_m k_m),
/// evaluated with e = y - mu. Both sides are computed independently; the
/// return value is their absolute difference.
double criterion_decomposition_check(const CandidateFits& fits,
                                     const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& mu,
                                     const Weighting& sigma_inv,
                                     const Eigen::VectorXd& w);

}  // namespace fglsma
