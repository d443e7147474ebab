#include "fglsma/averaging.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

namespace fglsma {

Weighting Weighting::identity(std::size_t n) {
  return Weighting(n, WeightingKind::Identity);
}

Weighting Weighting::from_inverse(const Eigen::MatrixXd& W,
                                  WeightingKind kind) {
  if (W.rows() != W.cols()) {
    throw std::invalid_argument("Weighting: matrix must be square");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(W);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error(
        "Weighting: matrix is not positive definite");
  }
  Weighting w(static_cast<std::size_t>(W.rows()), kind);
  w.R_ = llt.matrixL().transpose();
  return w;
}

Weighting Weighting::from_factors(const CholeskyFactors& factors,
                                  WeightingKind kind) {
  Weighting w(factors.dim(), kind);
  w.R_ = factors.whitening_factor();
  return w;
}

Weighting Weighting::from_estimate(const BandedInverseEstimate& estimate) {
  Weighting w(estimate.n, WeightingKind::EstimatedInverse);
  w.banded_ = true;
  w.T_ = estimate.T;
  w.d_inv_sqrt_ = estimate.D.cwiseSqrt().cwiseInverse();
  w.q_ = estimate.q;
  return w;
}

Eigen::VectorXd Weighting::apply(const Eigen::VectorXd& v) const {
  if (static_cast<std::size_t>(v.size()) != n_) {
    throw std::invalid_argument("Weighting: dimension mismatch");
  }
  if (kind_ == WeightingKind::Identity) return v;
  if (!banded_) return R_ * v;
  Eigen::VectorXd out(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    double acc = v(i);
    const std::size_t lo = i >= q_ ? i - q_ : 0;
    for (std::size_t j = lo; j < i; ++j) acc += T_(i, j) * v(j);
    out(i) = d_inv_sqrt_(i) * acc;
  }
  return out;
}

Eigen::MatrixXd Weighting::apply(const Eigen::MatrixXd& m) const {
  if (static_cast<std::size_t>(m.rows()) != n_) {
    throw std::invalid_argument("Weighting: dimension mismatch");
  }
  if (kind_ == WeightingKind::Identity) return m;
  if (!banded_) return R_ * m;
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    out.col(c) = apply(Eigen::VectorXd(m.col(c)));
  return out;
}

GlsFit gls_fit(const Eigen::MatrixXd& Xm, const Eigen::VectorXd& y,
               const Weighting& weighting) {
  if (Xm.rows() != y.size()) {
    throw std::invalid_argument("gls_fit: X and y dimension mismatch");
  }
  const Eigen::MatrixXd Xw = weighting.apply(Xm);
  const Eigen::VectorXd yw = weighting.apply(y);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
  qr.setThreshold(1e-10);
  if (qr.rank() < Xm.cols()) {
    throw std::runtime_error(
        "gls_fit: design is rank deficient under the weighting inner "
        "product (rank " + std::to_string(qr.rank()) + " of " +
        std::to_string(Xm.cols()) + ")");
  }
  GlsFit fit;
  fit.coef = qr.solve(yw);
  fit.fitted = Xm * fit.coef;
  return fit;
}

GlsFit gls_fit(const Eigen::MatrixXd& Xm, const Eigen::VectorXd& y,
               const Eigen::MatrixXd& W) {
  return gls_fit(Xm, y, Weighting::from_inverse(W));
}

Eigen::VectorXd CandidateFits::fitted_at(const Eigen::VectorXd& w) const {
  if (static_cast<std::size_t>(w.size()) != n_models()) {
    throw std::invalid_argument("CandidateFits: weight dimension mismatch");
  }
  return fitted_ * w;
}

Eigen::VectorXd CandidateFits::project(std::size_t m,
                                       const Eigen::VectorXd& v) const {
  if (m >= n_models()) {
    throw std::invalid_argument("CandidateFits: model index out of range");
  }
  return gls_fit(X_.leftCols(sizes_[m]), v, weighting_).fitted;
}

CandidateFits build_candidates(const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y,
                               const std::vector<std::size_t>& sizes,
                               const Weighting& weighting) {
  if (sizes.empty()) {
    throw std::invalid_argument("build_candidates: no candidate sizes");
  }
  for (std::size_t m = 1; m < sizes.size(); ++m) {
    if (sizes[m] <= sizes[m - 1]) {
      throw std::invalid_argument(
          "build_candidates: sizes must be strictly increasing");
    }
  }
  const std::size_t n = static_cast<std::size_t>(y.size());
  const std::size_t k_max = sizes.back();
  if (k_max >= n) {
    throw std::invalid_argument("build_candidates: largest model must have "
                                "fewer parameters than observations");
  }
  if (static_cast<Eigen::Index>(k_max) > X.cols()) {
    throw std::invalid_argument("build_candidates: design has too few columns");
  }

  Eigen::MatrixXd Xk = X.leftCols(k_max);
  const Eigen::MatrixXd Xw = weighting.apply(Xk);
  const Eigen::VectorXd yw = weighting.apply(y);

  Eigen::MatrixXd fitted(n, sizes.size());
  for (std::size_t m = 0; m < sizes.size(); ++m) {
    const std::size_t k = sizes[m];
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw.leftCols(k));
    qr.setThreshold(1e-10);
    if (static_cast<std::size_t>(qr.rank()) < k) {
      throw std::runtime_error(
          "build_candidates: model " + std::to_string(m + 1) +
          " (size " + std::to_string(k) + ") is rank deficient");
    }
    const Eigen::VectorXd coef = qr.solve(yw);
    fitted.col(m) = Xk.leftCols(k) * coef;
  }
  return CandidateFits(std::move(Xk), sizes, weighting, std::move(fitted));
}

namespace {

QuadraticWeightCriterion mallows_quadratic(const CandidateFits& fits,
                                           const Eigen::VectorXd& y,
                                           const Weighting& sigma_inv,
                                           CriterionKind kind) {
  if (static_cast<std::size_t>(y.size()) != fits.n() ||
      sigma_inv.dim() != fits.n()) {
    throw std::invalid_argument("criterion: dimension mismatch");
  }
  const Eigen::MatrixXd wf = sigma_inv.apply(fits.fitted());
  const Eigen::VectorXd wy = sigma_inv.apply(y);
  QuadraticWeightCriterion crit;
  crit.kind = kind;
  crit.Q = wf.transpose() * wf;
  crit.b.resize(fits.n_models());
  for (std::size_t m = 0; m < fits.n_models(); ++m) {
    crit.b(m) = -2.0 * wy.dot(wf.col(m)) +
                2.0 * static_cast<double>(fits.sizes()[m]);
  }
  crit.c = wy.dot(wy);
  return crit;
}

}  // namespace

QuadraticWeightCriterion amma(const CandidateFits& fits,
                              const Eigen::VectorXd& y,
                              const Weighting& sigma_inv) {
  return mallows_quadratic(fits, y, sigma_inv, CriterionKind::Amma);
}

QuadraticWeightCriterion famma(const CandidateFits& fits,
                               const Eigen::VectorXd& y,
                               const Weighting& sigma_inv_hat) {
  return mallows_quadratic(fits, y, sigma_inv_hat, CriterionKind::Famma);
}

QuadraticWeightCriterion gse_loss(const CandidateFits& fits,
                                  const Eigen::VectorXd& mu_true,
                                  const Weighting& exact_sigma_inv) {
  if (static_cast<std::size_t>(mu_true.size()) != fits.n() ||
      exact_sigma_inv.dim() != fits.n()) {
    throw std::invalid_argument("gse_loss: dimension mismatch");
  }
  Eigen::MatrixXd diffs = fits.fitted();
  diffs.colwise() -= mu_true;
  const Eigen::MatrixXd wd = exact_sigma_inv.apply(diffs);
  QuadraticWeightCriterion crit;
  crit.kind = CriterionKind::GseLoss;
  crit.Q = wd.transpose() * wd;
  crit.b = Eigen::VectorXd::Zero(fits.n_models());
  crit.c = 0.0;
  return crit;
}

Eigen::MatrixXd symmetric_inverse_sqrt(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols()) {
    throw std::invalid_argument("symmetric_inverse_sqrt: matrix must be square");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("symmetric_inverse_sqrt: eigendecomposition failed");
  }
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double lambda_max = ev.maxCoeff();
  if (!(lambda_max > 0.0) || ev.minCoeff() < -1e-10 * lambda_max) {
    throw std::runtime_error(
        "symmetric_inverse_sqrt: matrix is not positive definite");
  }
  const double floor = 1e-12 * lambda_max;
  Eigen::VectorXd scaled(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    scaled(i) = 1.0 / std::sqrt(std::max(ev(i), floor));
  return es.eigenvectors() * scaled.asDiagonal() *
         es.eigenvectors().transpose();
}

QuadraticWeightCriterion risk_criterion(const Eigen::VectorXd& mu,
                                        const Eigen::MatrixXd& X,
                                        const std::vector<std::size_t>& sizes,
                                        const Eigen::MatrixXd& sigma) {
  return risk_criterion_with_root(mu, X, sizes, symmetric_inverse_sqrt(sigma));
}

QuadraticWeightCriterion risk_criterion_with_root(
    const Eigen::VectorXd& mu, const Eigen::MatrixXd& X,
    const std::vector<std::size_t>& sizes, const Eigen::MatrixXd& root) {
  const std::size_t M = sizes.size();
  if (M == 0) throw std::invalid_argument("risk_criterion: no models");
  const Eigen::VectorXd mu_w = root * mu;
  const Eigen::MatrixXd Xw = root * X.leftCols(sizes.back());

  // Whitened squared bias of each model: ||(I - P_m) S mu||^2.
  Eigen::VectorXd bias(M);
  for (std::size_t m = 0; m < M; ++m) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw.leftCols(sizes[m]));
    qr.setThreshold(1e-10);
    const Eigen::VectorXd proj = Xw.leftCols(sizes[m]) * qr.solve(mu_w);
    bias(m) = (mu_w - proj).squaredNorm();
  }

  QuadraticWeightCriterion crit;
  crit.kind = CriterionKind::Risk;
  crit.Q.resize(M, M);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t l = 0; l < M; ++l) {
      crit.Q(m, l) = bias(std::max(m, l)) +
                     static_cast<double>(std::min(sizes[m], sizes[l]));
    }
  }
  crit.b = Eigen::VectorXd::Zero(M);
  crit.c = 0.0;
  return crit;
}

double conditional_risk(const Eigen::VectorXd& w, const Eigen::VectorXd& mu,
                        const Eigen::MatrixXd& X,
                        const std::vector<std::size_t>& sizes,
                        const Eigen::MatrixXd& sigma) {
  return risk_criterion(mu, X, sizes, sigma).value(w);
}

namespace {

SingleModelRisks risks_from_criterion(const QuadraticWeightCriterion& risk,
                                      std::size_t M) {
  SingleModelRisks out;
  out.D.resize(M);
  for (std::size_t m = 0; m < M; ++m) out.D(m) = risk.Q(m, m);
  Eigen::Index argmin = 0;
  out.k_star = out.D.minCoeff(&argmin);
  out.argmin = static_cast<std::size_t>(argmin);
  return out;
}

}  // namespace

SingleModelRisks single_model_risks(const Eigen::VectorXd& mu,
                                    const Eigen::MatrixXd& X,
                                    const std::vector<std::size_t>& sizes,
                                    const Eigen::MatrixXd& sigma) {
  return risks_from_criterion(risk_criterion(mu, X, sizes, sigma),
                              sizes.size());
}

SingleModelRisks single_model_risks_with_root(
    const Eigen::VectorXd& mu, const Eigen::MatrixXd& X,
    const std::vector<std::size_t>& sizes, const Eigen::MatrixXd& inv_sqrt) {
  return risks_from_criterion(
      risk_criterion_with_root(mu, X, sizes, inv_sqrt), sizes.size());
}

SingleModelRisks single_model_risks_old_unused(const Eigen::VectorXd& mu,
                                    const Eigen::MatrixXd& X,
                                    const std::vector<std::size_t>& sizes,
                                    const Eigen::MatrixXd& sigma) {
  const QuadraticWeightCriterion risk = risk_criterion(mu, X, sizes, sigma);
  SingleModelRisks out;
  out.D.resize(sizes.size());
  for (std::size_t m = 0; m < sizes.size(); ++m) out.D(m) = risk.Q(m, m);
  Eigen::Index argmin = 0;
  out.k_star = out.D.minCoeff(&argmin);
  out.argmin = static_cast<std::size_t>(argmin);
  return out;
}

WeightVector::WeightVector(Eigen::VectorXd w, std::size_t N, double delta)
    : w_(std::move(w)), N_(N), delta_(delta) {
  if (N_ < 1) throw std::invalid_argument("WeightVector: N must be >= 1");
  if (!(delta_ > 0.0) || !(delta_ < 1.0 / static_cast<double>(N_))) {
    throw std::invalid_argument("WeightVector: need 0 < delta < 1/N");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < w_.size(); ++i) {
    if (w_(i) < 0.0) throw std::invalid_argument("WeightVector: negative entry");
    if (w_(i) != 0.0) support_.push_back(static_cast<std::size_t>(i));
    sum += w_(i);
  }
  if (support_.size() > N_) {
    throw std::invalid_argument("WeightVector: support exceeds sparsity bound");
  }
  if (support_.empty() || !(std::abs(sum - 1.0) < 1e-6)) {
    throw std::invalid_argument("WeightVector: weights must sum to one");
  }
  if (sum != 1.0) w_ /= sum;
  for (const std::size_t i : support_) {
    if (w_(i) < delta_ - 1e-9) {
      throw std::invalid_argument(
          "WeightVector: nonzero entry below the lower bound delta");
    }
  }
}

WeightVector WeightVector::unit(std::size_t m, std::size_t M, std::size_t N,
                                double delta) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(M);
  w(m) = 1.0;
  return WeightVector(std::move(w), N, delta);
}

json WeightVector::to_json() const {
  json entries = json::array();
  for (const std::size_t i : support_) {
    entries.push_back(json{{"index", i}, {"value", w_(i)}});
  }
  return json{{"weights", entries},
              {"n_models", w_.size()},
              {"sparsity_bound", N_},
              {"lower_bound", delta_}};
}

json OptimizationResult::to_json() const {
  return json{{"weights", weights.to_json()},
              {"value", value},
              {"supports_examined", supports_examined},
              {"kkt_solves", kkt_solves},
              {"singular_skips", singular_skips},
              {"skipped_supports", skipped_supports},
              {"tied", tied}};
}

namespace {

struct Candidate {
  Eigen::VectorXd w;
  std::vector<std::size_t> support;
  double value = std::numeric_limits<double>::infinity();
  bool valid = false;
};

// Tie order: value, then lexicographically smaller support (prefix-shorter
// first), then smaller support size.
bool support_less(const std::vector<std::size_t>& a,
                  const std::vector<std::size_t>& b) {
  if (a == b) return false;
  if (std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end()))
    return true;
  if (std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end()))
    return false;
  return a.size() < b.size();
}

// Minimize w'Qw + b'w on one support with pinned-at-delta subsets
// enumerated; returns the best feasible point found on this support.
Candidate solve_support(const QuadraticWeightCriterion& crit,
                        const std::vector<std::size_t>& support, double delta,
                        double feas_tol, std::size_t& kkt_solves,
                        std::size_t& singular_skips) {
  const std::size_t l = support.size();
  const std::size_t M = crit.n_models();
  Candidate best;
  best.support = support;

  auto consider = [&](const Eigen::VectorXd& w_full) {
    const double v = crit.value(w_full);
    if (!std::isfinite(v)) return;
    if (!best.valid || v < best.value) {
      best.valid = true;
      best.value = v;
      best.w = w_full;
    }
  };

  if (l == 1) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(M);
    w(support[0]) = 1.0;
    consider(w);
    return best;
  }

  // Pinned subsets are encoded by bitmask; the all-pinned mask is excluded
  // (it cannot satisfy the sum constraint since l * delta < 1).
  const std::size_t n_masks = std::size_t{1} << l;
  for (std::size_t mask = 0; mask + 1 < n_masks; ++mask) {
    std::vector<std::size_t> free_idx;
    std::vector<std::size_t> pinned_idx;
    for (std::size_t i = 0; i < l; ++i) {
      if (mask & (std::size_t{1} << i)) {
        pinned_idx.push_back(support[i]);
      } else {
        free_idx.push_back(support[i]);
      }
    }
    const std::size_t f = free_idx.size();
    const double budget = 1.0 - delta * static_cast<double>(pinned_idx.size());

    // KKT system of the equality-constrained subproblem.
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(f + 1, f + 1);
    Eigen::VectorXd rhs(f + 1);
    for (std::size_t i = 0; i < f; ++i) {
      for (std::size_t j = 0; j < f; ++j) {
        kkt(i, j) = 2.0 * crit.Q(free_idx[i], free_idx[j]);
      }
      kkt(i, f) = 1.0;
      kkt(f, i) = 1.0;
      double lin = crit.b(free_idx[i]);
      for (const std::size_t p : pinned_idx)
        lin += 2.0 * crit.Q(free_idx[i], p) * delta;
      rhs(i) = -lin;
    }
    rhs(f) = budget;

    ++kkt_solves;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(kkt);
    const Eigen::VectorXd sol = cod.solve(rhs);
    const double resid = (kkt * sol - rhs).norm();
    if (!(resid <= 1e-8 * (rhs.norm() + 1.0))) {
      ++singular_skips;
      continue;
    }

    Eigen::VectorXd w_full = Eigen::VectorXd::Zero(M);
    for (const std::size_t p : pinned_idx) w_full(p) = delta;
    bool feasible = true;
    for (std::size_t i = 0; i < f; ++i) {
      double wi = sol(i);
      if (wi < delta - feas_tol || wi > 1.0 + feas_tol) {
        feasible = false;
        break;
      }
      w_full(free_idx[i]) = std::max(wi, delta);
    }
    if (!feasible) continue;
    const double sum = w_full.sum();
    if (sum != 1.0) w_full /= sum;
    consider(w_full);
  }
  return best;
}

OptimizationResult finalize(const QuadraticWeightCriterion& crit,
                            const Candidate& best, std::size_t N, double delta,
                            OptimizationResult&& partial) {
  if (!best.valid) {
    throw std::runtime_error(
        "minimize_over_HN: no support produced a usable KKT point");
  }
  OptimizationResult out = std::move(partial);
  out.value = crit.value(best.w);
  out.weights = WeightVector(best.w, N, delta);
  return out;
}

}  // namespace

OptimizationResult minimize_over_HN(const QuadraticWeightCriterion& crit,
                                    std::size_t N, double delta,
                                    const HnOptions& options) {
  const std::size_t M = crit.n_models();
  if (M < 1) throw std::invalid_argument("minimize_over_HN: no models");
  if (!(delta > 0.0) || !(delta < 1.0 / static_cast<double>(N))) {
    throw std::invalid_argument("minimize_over_HN: need 0 < delta < 1/N");
  }
  const std::size_t n_max = std::min(N, M);

  // Count supports first; refuse to start a search that cannot finish.
  double support_count = 0.0;
  for (std::size_t l = 1; l <= n_max; ++l) {
    double c = 1.0;
    for (std::size_t i = 0; i < l; ++i)
      c *= static_cast<double>(M - i) / static_cast<double>(i + 1);
    support_count += c;
  }
  if (support_count > static_cast<double>(options.support_cap)) {
    throw std::runtime_error(
        "minimize_over_HN: " + std::to_string(support_count) +
        " supports exceed the cap of " + std::to_string(options.support_cap) +
        "; use minimize_over_HN_greedy for an approximate search");
  }

  OptimizationResult result{WeightVector::unit(0, M, N, delta), 0.0,
                            0, 0, 0, 0, false};
  Candidate best;
  for (std::size_t l = 1; l <= n_max; ++l) {
    std::vector<std::size_t> support(l);
    for (std::size_t i = 0; i < l; ++i) support[i] = i;
    for (;;) {
      ++result.supports_examined;
      Candidate cand = solve_support(crit, support, delta,
                                     options.feasibility_tol,
                                     result.kkt_solves, result.singular_skips);
      if (!cand.valid) {
        ++result.skipped_supports;
      } else if (!best.valid || cand.value < best.value) {
        best = std::move(cand);
      } else if (cand.value == best.value) {
        result.tied = true;
        if (support_less(cand.support, best.support)) best = std::move(cand);
      }

      // Next combination in lexicographic order.
      std::size_t i = l;
      while (i > 0 && support[i - 1] == M - l + i - 1) --i;
      if (i == 0) break;
      ++support[i - 1];
      for (std::size_t j = i; j < l; ++j) support[j] = support[j - 1] + 1;
    }
  }
  return finalize(crit, best, N, delta, std::move(result));
}

OptimizationResult minimize_over_HN_greedy(const QuadraticWeightCriterion& crit,
                                           std::size_t N, double delta,
                                           const HnOptions& options) {
  const std::size_t M = crit.n_models();
  if (M < 1) throw std::invalid_argument("minimize_over_HN_greedy: no models");
  if (!(delta > 0.0) || !(delta < 1.0 / static_cast<double>(N))) {
    throw std::invalid_argument("minimize_over_HN_greedy: need 0 < delta < 1/N");
  }

  OptimizationResult result{WeightVector::unit(0, M, N, delta), 0.0,
                            0, 0, 0, 0, false};
  Candidate best;
  std::vector<std::size_t> current;
  for (std::size_t l = 1; l <= std::min(N, M); ++l) {
    Candidate best_at_l;
    std::vector<std::size_t> chosen;
    for (std::size_t add = 0; add < M; ++add) {
      if (std::find(current.begin(), current.end(), add) != current.end())
        continue;
      std::vector<std::size_t> support = current;
      support.insert(std::lower_bound(support.begin(), support.end(), add),
                     add);
      ++result.supports_examined;
      Candidate cand = solve_support(crit, support, delta,
                                     options.feasibility_tol,
                                     result.kkt_solves, result.singular_skips);
      if (!cand.valid) {
        ++result.skipped_supports;
        continue;
      }
      if (!best_at_l.valid || cand.value < best_at_l.value ||
          (cand.value == best_at_l.value &&
           support_less(cand.support, best_at_l.support))) {
        best_at_l = std::move(cand);
        chosen = support;
      }
    }
    if (!best_at_l.valid) break;
    current = chosen;
    if (!best.valid || best_at_l.value < best.value) {
      best = best_at_l;
    } else if (best_at_l.value == best.value) {
      result.tied = true;
      if (support_less(best_at_l.support, best.support)) best = best_at_l;
    }
  }
  return finalize(crit, best, N, delta, std::move(result));
}

std::vector<Eigen::VectorXd> grid_weights(std::size_t M, std::size_t N,
                                          std::size_t cap) {
  if (M < 1 || N < 1) {
    throw std::invalid_argument("grid_weights: need M >= 1 and N >= 1");
  }
  double count = 1.0;  // C(N + M - 1, M - 1)
  for (std::size_t i = 1; i < M; ++i)
    count *= static_cast<double>(N + i) / static_cast<double>(i);
  if (count > static_cast<double>(cap)) {
    throw std::runtime_error(
        "grid_weights: enumeration of ~" + std::to_string(count) +
        " vectors exceeds the cap of " + std::to_string(cap));
  }

  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(count) + 1);
  std::vector<std::size_t> parts(M, 0);
  const double step = 1.0 / static_cast<double>(N);
  // Compositions of N into M nonnegative parts, scaled by 1/N.
  auto rec = [&](auto&& self, std::size_t idx, std::size_t remaining) -> void {
    if (idx + 1 == M) {
      parts[idx] = remaining;
      Eigen::VectorXd w(M);
      for (std::size_t i = 0; i < M; ++i)
        w(i) = static_cast<double>(parts[i]) * step;
      out.push_back(std::move(w));
      return;
    }
    for (std::size_t v = 0; v <= remaining; ++v) {
      parts[idx] = v;
      self(self, idx + 1, remaining - v);
    }
  };
  rec(rec, 0, N);
  return out;
}

double efficiency_ratio(double numerator, double denominator) {
  if (!(denominator > 0.0)) {
    throw std::runtime_error(
        "efficiency_ratio: denominator is not positive (exact fit or "
        "degenerate loss surface)");
  }
  return numerator / denominator;
}

double criterion_decomposition_check(const CandidateFits& fits,
                                     const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& mu,
                                     const Weighting& sigma_inv,
                                     const Eigen::VectorXd& w) {
  const Eigen::VectorXd e = y - mu;
  const double lhs = amma(fits, y, sigma_inv).value(w) -
                     gse_loss(fits, mu, sigma_inv).value(w);

  Eigen::VectorXd proj_mu = Eigen::VectorXd::Zero(y.size());
  Eigen::VectorXd proj_e = Eigen::VectorXd::Zero(y.size());
  double penalty = 0.0;
  for (std::size_t m = 0; m < fits.n_models(); ++m) {
    if (w(m) == 0.0) continue;
    proj_mu += w(m) * fits.project(m, mu);
    proj_e += w(m) * fits.project(m, e);
    penalty += w(m) * static_cast<double>(fits.sizes()[m]);
  }
  const Eigen::VectorXd we = sigma_inv.apply(e);
  const double rhs = we.dot(we) +
                     2.0 * we.dot(sigma_inv.apply(mu - proj_mu)) -
                     2.0 * (we.dot(sigma_inv.apply(proj_e)) - penalty);
  return std::abs(lhs - rhs);
}

}  // namespace fglsma
