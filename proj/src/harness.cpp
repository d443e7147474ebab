#include "fglsma/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>
#include <thread>

#include "fglsma/rng.hpp"

namespace fglsma {

std::size_t CandidateRule::n_models(std::size_t n) const {
  const double m = std::ceil(
      C * std::pow(static_cast<double>(n), 1.0 / (1.0 + a_lower)));
  return static_cast<std::size_t>(std::max(1.0, m));
}

std::vector<std::size_t> CandidateRule::sizes(std::size_t n) const {
  const std::size_t m = n_models(n);
  std::vector<std::size_t> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = i + 1;
  return out;
}

void ExperimentConfig::validate() const {
  if (sample_sizes.empty()) {
    throw std::invalid_argument("ExperimentConfig: no sample sizes");
  }
  std::set<std::size_t> seen;
  for (const std::size_t n : sample_sizes) {
    if (!seen.insert(n).second) {
      throw std::invalid_argument("ExperimentConfig: duplicate sample size " +
                                  std::to_string(n));
    }
    if (n < 20) {
      throw std::invalid_argument("ExperimentConfig: sample sizes below 20 "
                                  "are not supported");
    }
    const std::size_t m = candidates.n_models(n);
    if (m >= n) {
      throw std::invalid_argument(
          "ExperimentConfig: candidate rule yields M >= n at n = " +
          std::to_string(n));
    }
    if (m > design.j_max()) {
      throw std::invalid_argument(
          "ExperimentConfig: candidate rule exceeds the design truncation "
          "j_max at n = " + std::to_string(n));
    }
    // The rules must resolve for every n up front, not mid-experiment.
    (void)select_banding(n, banding);
    const std::size_t d = select_dimension(n, dimension.c, dimension.rounding);
    if (d > design.j_max()) {
      throw std::invalid_argument(
          "ExperimentConfig: working dimension exceeds j_max at n = " +
          std::to_string(n));
    }
  }
  if (N < 1) throw std::invalid_argument("ExperimentConfig: N must be >= 1");
  if (!(delta > 0.0) || !(delta < 1.0 / static_cast<double>(N))) {
    throw std::invalid_argument("ExperimentConfig: need 0 < delta < 1/N");
  }
  if (replications < 1) {
    throw std::invalid_argument("ExperimentConfig: need at least 1 replication");
  }
  if (!(failure_rate_threshold >= 0.0 && failure_rate_threshold <= 1.0)) {
    throw std::invalid_argument(
        "ExperimentConfig: failure_rate_threshold must lie in [0, 1]");
  }
}

json ExperimentConfig::to_json() const {
  json banding_j;
  if (banding.mode == BandingDecay::Mode::Exponential) {
    banding_j = json{{"mode", "exponential"}, {"c4", banding.c4}};
  } else {
    banding_j = json{{"mode", "algebraic"}, {"nu0", banding.nu0}};
    if (std::isinf(banding.S)) {
      banding_j["S"] = nullptr;
    } else {
      banding_j["S"] = banding.S;
    }
  }
  return json{
      {"design", design.to_json()},
      {"error_process", errors.to_json()},
      {"sample_sizes", sample_sizes},
      {"candidates", json{{"C", candidates.C}, {"a_lower", candidates.a_lower}}},
      {"N", N},
      {"delta", delta},
      {"banding", banding_j},
      {"dimension",
       json{{"c", dimension.c},
            {"rounding",
             dimension.rounding == DimensionRounding::Round ? "round" : "ceil"}}},
      {"replications", replications},
      {"base_seed", base_seed},
      {"output_dir", output_dir},
      {"force_identity_estimate", force_identity_estimate},
      {"failure_rate_threshold", failure_rate_threshold},
      {"exclude_failed_from_medians", exclude_failed_from_medians}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig cfg(DesignSpec::from_json(j.at("design")),
                       ErrorProcessSpec::from_json(j.at("error_process")));
  if (j.contains("sample_sizes"))
    cfg.sample_sizes = j.at("sample_sizes").get<std::vector<std::size_t>>();
  if (j.contains("candidates")) {
    const auto& c = j.at("candidates");
    if (c.contains("C")) cfg.candidates.C = c.at("C").get<double>();
    if (c.contains("a_lower"))
      cfg.candidates.a_lower = c.at("a_lower").get<double>();
  }
  if (j.contains("N")) cfg.N = j.at("N").get<std::size_t>();
  if (j.contains("delta")) cfg.delta = j.at("delta").get<double>();
  if (j.contains("banding")) {
    const auto& b = j.at("banding");
    const std::string mode = b.at("mode").get<std::string>();
    if (mode == "exponential") {
      cfg.banding = BandingDecay::exponential(
          b.contains("c4") ? b.at("c4").get<double>() : 1.5);
    } else if (mode == "algebraic") {
      double S = std::numeric_limits<double>::infinity();
      if (b.contains("S") && !b.at("S").is_null()) S = b.at("S").get<double>();
      cfg.banding = BandingDecay::algebraic(b.at("nu0").get<double>(), S);
    } else {
      throw std::invalid_argument("ExperimentConfig: unknown banding mode '" +
                                  mode + "'");
    }
  }
  if (j.contains("dimension")) {
    const auto& d = j.at("dimension");
    if (d.contains("c")) cfg.dimension.c = d.at("c").get<double>();
    if (d.contains("rounding")) {
      const std::string r = d.at("rounding").get<std::string>();
      if (r == "round") {
        cfg.dimension.rounding = DimensionRounding::Round;
      } else if (r == "ceil") {
        cfg.dimension.rounding = DimensionRounding::Ceil;
      } else {
        throw std::invalid_argument(
            "ExperimentConfig: unknown dimension rounding '" + r + "'");
      }
    }
  }
  if (j.contains("replications"))
    cfg.replications = j.at("replications").get<std::size_t>();
  if (j.contains("base_seed"))
    cfg.base_seed = j.at("base_seed").get<std::uint64_t>();
  if (j.contains("output_dir"))
    cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("force_identity_estimate"))
    cfg.force_identity_estimate = j.at("force_identity_estimate").get<bool>();
  if (j.contains("failure_rate_threshold"))
    cfg.failure_rate_threshold = j.at("failure_rate_threshold").get<double>();
  if (j.contains("exclude_failed_from_medians"))
    cfg.exclude_failed_from_medians =
        j.at("exclude_failed_from_medians").get<bool>();
  cfg.validate();
  return cfg;
}

SampleSizeCache build_cache(const ExperimentConfig& config, std::size_t n) {
  SampleSizeCache cache;
  cache.n = n;
  cache.acf = autocovariances(config.errors, n - 1);
  cache.exact_factors = modified_cholesky(cache.acf, n);
  cache.exact_weighting =
      Weighting::from_factors(cache.exact_factors, WeightingKind::ExactInverse);
  cache.sigma = toeplitz_covariance(cache.acf, n);
  cache.sigma_inv = cache.exact_factors.inverse_covariance();
  cache.sigma_inv_sqrt = symmetric_inverse_sqrt(cache.sigma);
  return cache;
}

namespace {

MethodOutcome make_outcome(const OptimizationResult& opt,
                           const QuadraticWeightCriterion& loss,
                           double inf_loss) {
  MethodOutcome out;
  out.weights = opt.weights.values();
  out.support = opt.weights.support();
  out.loss = loss.value(out.weights);
  out.ratio = efficiency_ratio(out.loss, inf_loss);
  return out;
}

}  // namespace

ReplicationRecord run_replication(const ExperimentConfig& config,
                                  std::size_t n, std::size_t rep,
                                  const SampleSizeCache& cache) {
  const auto t0 = std::chrono::steady_clock::now();
  ReplicationRecord rec;
  rec.n = n;
  rec.rep = rep;
  rec.seed = rng::derive_seed(config.base_seed, n, rep);
  std::string stage = "simulate";
  try {
    const std::uint64_t design_seed = rng::substream(rec.seed, 0xD5);
    const std::uint64_t error_seed = rng::substream(rec.seed, 0xE7);
    RegressionInstance inst = simulate_design(config.design, n, design_seed);
    inst.errors = simulate_errors(config.errors, n, error_seed);
    inst.y = inst.mu + inst.errors;

    const std::vector<std::size_t> sizes = config.candidates.sizes(n);
    rec.n_models = sizes.size();
    rec.q = select_banding(n, config.banding);
    rec.d = select_dimension(n, config.dimension.c, config.dimension.rounding);

    stage = "gls_fits";
    const CandidateFits gls_fits =
        build_candidates(inst.X, inst.y, sizes, cache.exact_weighting);
    const QuadraticWeightCriterion loss_gls =
        gse_loss(gls_fits, inst.mu, cache.exact_weighting);

    stage = "amma";
    const QuadraticWeightCriterion crit_amma =
        amma(gls_fits, inst.y, cache.exact_weighting);
    const OptimizationResult sel_amma =
        minimize_over_HN(crit_amma, config.N, config.delta);
    const OptimizationResult inf_gls =
        minimize_over_HN(loss_gls, config.N, config.delta);
    rec.inf_loss = inf_gls.value;
    rec.amma = make_outcome(sel_amma, loss_gls, rec.inf_loss);

    stage = "best_single";
    const OptimizationResult sel_single =
        minimize_over_HN(crit_amma, 1, config.delta);
    rec.best_single = make_outcome(sel_single, loss_gls, rec.inf_loss);

    stage = "covest";
    Weighting est_weighting = Weighting::identity(n);
    if (config.force_identity_estimate) {
      rec.spectral_distance = spectral_distance(
          Eigen::MatrixXd::Identity(n, n), cache.sigma_inv);
    } else {
      const BandedInverseEstimate est =
          estimate_inverse(inst.y, inst.X, rec.d, rec.q);
      rec.spectral_distance = spectral_distance(est.inverse, cache.sigma_inv);
      est_weighting = Weighting::from_estimate(est);
    }

    stage = "fgls_fits";
    const CandidateFits fgls_fits =
        build_candidates(inst.X, inst.y, sizes, est_weighting);

    stage = "famma";
    const QuadraticWeightCriterion crit_famma =
        famma(fgls_fits, inst.y, est_weighting);
    const OptimizationResult sel_famma =
        minimize_over_HN(crit_famma, config.N, config.delta);
    // L^F weighs feasible-GLS fit errors by the exact inverse covariance.
    const QuadraticWeightCriterion loss_fgls =
        gse_loss(fgls_fits, inst.mu, cache.exact_weighting);
    rec.famma = make_outcome(sel_famma, loss_fgls, rec.inf_loss);

    stage = "mma_ls";
    const Weighting identity = Weighting::identity(n);
    const CandidateFits ls_fits =
        build_candidates(inst.X, inst.y, sizes, identity);
    const QuadraticWeightCriterion crit_mma = famma(ls_fits, inst.y, identity);
    const OptimizationResult sel_mma =
        minimize_over_HN(crit_mma, config.N, config.delta);
    const QuadraticWeightCriterion loss_ls =
        gse_loss(ls_fits, inst.mu, cache.exact_weighting);
    rec.mma_ls = make_outcome(sel_mma, loss_ls, rec.inf_loss);

    stage = "risk";
    const SingleModelRisks risks = single_model_risks_with_root(
        inst.mu, inst.X, sizes, cache.sigma_inv_sqrt);
    rec.k_star = risks.k_star;
  } catch (const std::exception& ex) {
    rec.failed = true;
    rec.stage = stage;
    rec.message = ex.what();
  }
  rec.elapsed_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  return rec;
}

ReplicationRecord run_replication(const ExperimentConfig& config,
                                  std::size_t n, std::size_t rep) {
  return run_replication(config, n, rep, build_cache(config, n));
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                unsigned threads) {
  config.validate();
  if (threads < 1) threads = 1;

  ExperimentResult result;
  result.records.resize(config.sample_sizes.size() * config.replications);

  std::size_t offset = 0;
  for (const std::size_t n : config.sample_sizes) {
    const SampleSizeCache cache = build_cache(config, n);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t rep = next.fetch_add(1);
        if (rep >= config.replications) break;
        result.records[offset + rep] = run_replication(config, n, rep, cache);
      }
    };
    std::vector<std::thread> pool;
    const unsigned spawn = std::min<unsigned>(
        threads, static_cast<unsigned>(config.replications));
    for (unsigned t = 1; t < spawn; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    offset += config.replications;
  }

  std::size_t failures = 0;
  for (const auto& r : result.records) failures += r.failed ? 1 : 0;
  result.failure_rate =
      static_cast<double>(failures) / static_cast<double>(result.records.size());
  result.failure_threshold_exceeded =
      result.failure_rate > config.failure_rate_threshold;
  result.summary = summarize_experiment(config, result.records);
  return result;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string config_hash(const json& j) {
  const std::string dump = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
  for (const unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string weights_field(const MethodOutcome& m) {
  std::string out;
  for (std::size_t i = 0; i < m.support.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(m.support[i]);
    out += ':';
    out += format_double(m.weights(static_cast<Eigen::Index>(m.support[i])));
  }
  return out;
}

// Type-7 quantile on a sorted vector.
double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (v.size() == 1) return v[0];
  const double h = p * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct MethodView {
  const char* name;
  const MethodOutcome& (*get)(const ReplicationRecord&);
};

constexpr MethodView kMethods[] = {
    {"amma", [](const ReplicationRecord& r) -> const MethodOutcome& { return r.amma; }},
    {"famma", [](const ReplicationRecord& r) -> const MethodOutcome& { return r.famma; }},
    {"best_single", [](const ReplicationRecord& r) -> const MethodOutcome& { return r.best_single; }},
    {"mma_ls", [](const ReplicationRecord& r) -> const MethodOutcome& { return r.mma_ls; }},
};

}  // namespace

void write_records_csv(std::ostream& os,
                       const std::vector<ReplicationRecord>& records) {
  std::vector<const ReplicationRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const ReplicationRecord* a, const ReplicationRecord* b) {
              return a->n != b->n ? a->n < b->n : a->rep < b->rep;
            });

  os << "# fglsma records v1\n";
  os << "n,rep,seed,method,loss,inf_loss,ratio,weights,support_size,"
        "n_models,q,d,k_star,spectral_distance,failed,stage\n";
  for (const ReplicationRecord* r : sorted) {
    for (const auto& method : kMethods) {
      const MethodOutcome& m = method.get(*r);
      os << r->n << ',' << r->rep << ',' << r->seed << ',' << method.name
         << ',' << format_double(m.loss) << ',' << format_double(r->inf_loss)
         << ',' << format_double(m.ratio) << ',' << weights_field(m) << ','
         << m.support.size() << ',' << r->n_models << ',' << r->q << ','
         << r->d << ',' << format_double(r->k_star) << ','
         << format_double(r->spectral_distance) << ',' << (r->failed ? 1 : 0)
         << ',' << r->stage << '\n';
    }
  }
}

json summarize_experiment(const ExperimentConfig& config,
                          const std::vector<ReplicationRecord>& records) {
  json per_n = json::array();
  for (const std::size_t n : config.sample_sizes) {
    std::vector<const ReplicationRecord*> ok;
    std::size_t failures = 0;
    json failure_stages = json::object();
    for (const auto& r : records) {
      if (r.n != n) continue;
      if (r.failed) {
        ++failures;
        const std::string key = r.stage.empty() ? "unknown" : r.stage;
        failure_stages[key] = failure_stages.value(key, 0) + 1;
      } else {
        ok.push_back(&r);
      }
    }
    const bool report = failures == 0 || config.exclude_failed_from_medians;

    auto stats = [&](auto&& extract) -> json {
      std::vector<double> v;
      v.reserve(ok.size());
      for (const auto* r : ok) v.push_back(extract(*r));
      std::sort(v.begin(), v.end());
      if (!report || v.empty()) {
        return json{{"median", nullptr}, {"q25", nullptr}, {"q75", nullptr}};
      }
      return json{{"median", quantile_sorted(v, 0.5)},
                  {"q25", quantile_sorted(v, 0.25)},
                  {"q75", quantile_sorted(v, 0.75)}};
    };

    json methods = json::object();
    for (const auto& method : kMethods) {
      methods[method.name] = json{
          {"ratio", stats([&](const ReplicationRecord& r) {
             return method.get(r).ratio;
           })},
          {"loss", stats([&](const ReplicationRecord& r) {
             return method.get(r).loss;
           })}};
    }

    per_n.push_back(json{
        {"n", n},
        {"replications", config.replications},
        {"failures", failures},
        {"failure_stages", failure_stages},
        {"medians_over_successes_only", config.exclude_failed_from_medians},
        {"methods", methods},
        {"inf_loss", stats([](const ReplicationRecord& r) { return r.inf_loss; })},
        {"spectral_distance",
         stats([](const ReplicationRecord& r) { return r.spectral_distance; })},
        {"k_star", stats([](const ReplicationRecord& r) { return r.k_star; })}});
  }

  const json cfg = config.to_json();
  return json{{"schema", "fglsma-summary-v1"},
              {"config_hash", config_hash(cfg)},
              {"config", cfg},
              {"per_n", per_n}};
}

}  // namespace fglsma
