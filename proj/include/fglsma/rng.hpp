#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace fglsma::rng {

/// SplitMix64 finalizer. Used both as a bit mixer for seed derivation and
/// (indirectly) to decorrelate nearby seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

/// Per-replication seed: hash(base, n, rep). The scheme is stable by
/// contract so experiments can be extended (more replications, more sample
/// sizes) without reshuffling the streams of existing replications.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t n,
                                 std::uint64_t rep) {
  return mix64(mix64(base ^ mix64(n ^ 0x9e3779b97f4a7c15ULL)) ^ rep);
}

/// Independent sub-stream of an already-derived seed (e.g. design draws vs
/// error draws inside one replication).
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) {
  return mix64(seed ^ mix64(tag));
}

/// Deterministic sampler on top of mt19937_64. Gaussian, gamma and
/// Student-t variates are generated by fixed in-repo algorithms
/// (Box-Muller, Marsaglia-Tsang) rather than std::*_distribution, whose
/// output sequences are implementation-defined.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : engine_(seed) {}

  /// Uniform draw on (0, 1].
  double uniform01() {
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the sine partner is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * pi * u2;
    spare_ = r * std::sin(angle);
    have_spare_ = true;
    return r * std::cos(angle);
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 handled by boosting.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be > 0");
    if (shape < 1.0) {
      const double u = uniform01();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x;
      double v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double chi_square(double dof) { return 2.0 * gamma(0.5 * dof); }

  /// Student-t with dof degrees of freedom, unit scale (variance dof/(dof-2)).
  double student_t(double dof) {
    return normal() / std::sqrt(chi_square(dof) / dof);
  }

 private:
  static constexpr double pi = 3.141592653589793238462643383279502884;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fglsma::rng
