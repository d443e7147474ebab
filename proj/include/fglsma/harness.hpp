#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "fglsma/averaging.hpp"
#include "fglsma/covest.hpp"
#include "fglsma/timeseries.hpp"

namespace fglsma {

/// Candidate-set rule: nested models k_m = m for m = 1..M(n) with
/// M(n) = ceil(C * n^{1 / (1 + a_lower)}). a_lower is a strict lower bound
/// for the (unknown) decay exponent of the single-model risks; it is
/// supplied by the user, not guessed.
struct CandidateRule {
  double C = 1.0;
  double a_lower = 1.5;

  std::size_t n_models(std::size_t n) const;
  std::vector<std::size_t> sizes(std::size_t n) const;
};

struct DimensionRule {
  double c = 1.0;
  DimensionRounding rounding = DimensionRounding::Round;
};

class ExperimentConfig {
 public:
  ExperimentConfig(DesignSpec design, ErrorProcessSpec errors)
      : design(std::move(design)), errors(std::move(errors)) {}

  DesignSpec design;
  ErrorProcessSpec errors;
  std::vector<std::size_t> sample_sizes{200, 400, 800, 1600};
  CandidateRule candidates;
  std::size_t N = 3;
  double delta = 0.05;
  BandingDecay banding = BandingDecay::exponential(1.5);
  DimensionRule dimension;
  std::size_t replications = 200;
  std::uint64_t base_seed = 1;
  std::string output_dir = "out";
  bool force_identity_estimate = false;
  double failure_rate_threshold = 0.05;
  bool exclude_failed_from_medians = false;

  void validate() const;
  json to_json() const;
  static ExperimentConfig from_json(const json& j);
};

/// One weight-selection method's outcome inside a replication.
struct MethodOutcome {
  Eigen::VectorXd weights;            // full-length, sparse in content
  std::vector<std::size_t> support;
  double loss = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();
};

struct ReplicationRecord {
  std::size_t n = 0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::size_t n_models = 0;
  std::size_t q = 0;
  std::size_t d = 0;

  MethodOutcome amma;         // GLS fits, exact inverse covariance
  MethodOutcome famma;        // FGLS fits, banded residual estimate
  MethodOutcome best_single;  // model selection by the exact criterion (N = 1)
  MethodOutcome mma_ls;       // identity weighting baseline

  double inf_loss = std::numeric_limits<double>::quiet_NaN();
  double k_star = std::numeric_limits<double>::quiet_NaN();
  double spectral_distance = std::numeric_limits<double>::quiet_NaN();

  bool failed = false;
  std::string stage;  // pipeline stage of the failure, empty otherwise
  std::string message;
  double elapsed_ms = 0.0;  // never serialized (outputs are seed-pure)
};

/// Per-sample-size shared state: exact covariance objects that depend only
/// on (error process, n). Read-only during the replication loop.
struct SampleSizeCache {
  std::size_t n = 0;
  AutocovarianceTable acf;
  CholeskyFactors exact_factors;
  Weighting exact_weighting = Weighting::identity(0);
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd sigma_inv;
  Eigen::MatrixXd sigma_inv_sqrt;
};

SampleSizeCache build_cache(const ExperimentConfig& config, std::size_t n);

/// One replication: simulate, fit, select weights with every method,
/// evaluate losses against the infimum over H_N. Failures are captured in
/// the record with a stage tag, never dropped.
ReplicationRecord run_replication(const ExperimentConfig& config,
                                  std::size_t n, std::size_t rep,
                                  const SampleSizeCache& cache);
ReplicationRecord run_replication(const ExperimentConfig& config,
                                  std::size_t n, std::size_t rep);

struct ExperimentResult {
  std::vector<ReplicationRecord> records;
  json summary;
  double failure_rate = 0.0;
  bool failure_threshold_exceeded = false;
};

ExperimentResult run_experiment(const ExperimentConfig& config,
                                unsigned threads = 1);

/// records.csv, one row per replication per method, sorted by
/// (n, replication, method); every double printed with 17 significant
/// digits. Byte content is a pure function of (config, base seed).
void write_records_csv(std::ostream& os,
                       const std::vector<ReplicationRecord>& records);

json summarize_experiment(const ExperimentConfig& config,
                          const std::vector<ReplicationRecord>& records);

/// 17-significant-digit rendering (empty string for NaN).
std::string format_double(double v);

/// FNV-1a hash of a canonical JSON dump, for provenance lines.
std::string config_hash(const json& j);

/// Fast built-in invariant checks ("check" subcommand). Returns the number
/// of failed checks, printing one line per check.
int run_invariant_suite(std::ostream& os);

/// CLI entry point (subcommands simulate / estimate-cov / average /
/// experiment / check). Exit codes: 0 success, 1 usage, 2 config error,
/// 3 failure-rate exceeded, 4 invariant-suite failure.
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);

}  // namespace fglsma
