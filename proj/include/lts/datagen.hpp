#pragma once

// Seeded synthetic regression data with contaminated rows.
//
// Regular rows follow y = x^T beta + delta with x and delta normal. The
// samplers below are built on the raw 64-bit output of std::mt19937_64,
// whose sequence is fixed by the standard, so datasets are identical on
// every platform.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "lts/dataset.hpp"

namespace lts {

enum class Contamination { Vertical, GoodLeverage, HighLeverage, HeavyTail };

inline std::string_view to_string(Contamination c) {
  switch (c) {
    case Contamination::Vertical: return "vertical";
    case Contamination::GoodLeverage: return "good-leverage";
    case Contamination::HighLeverage: return "high-leverage";
    case Contamination::HeavyTail: return "heavy-tail";
  }
  return "unknown";
}

inline Contamination parse_contamination(std::string_view s) {
  if (s == "vertical") return Contamination::Vertical;
  if (s == "good-leverage") return Contamination::GoodLeverage;
  if (s == "high-leverage") return Contamination::HighLeverage;
  if (s == "heavy-tail") return Contamination::HeavyTail;
  throw InvalidSpec("unknown contamination type '" + std::string(s) + "'");
}

struct GenSpec {
  Index n = 0;
  Index d = 0;
  Index n_outliers = 10;
  Contamination contamination = Contamination::HighLeverage;
  Vector beta_true;  // empty means all ones
  double noise_sd = 1.0;
  double shift_magnitude = 10.0;
  double laplace_scale = 5.0;
  std::uint64_t seed = 0;
};

struct GroundTruth {
  Vector beta_true;
  IndexSet outliers;  // sorted, 0-based
};

struct Generated {
  Dataset data;
  GroundTruth truth;
};

/// Deterministic samplers over std::mt19937_64.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() {
    for (;;) {
      const double u = uniform();
      if (u > 0.0) return u;
    }
  }

  /// Standard normal by the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    for (;;) {
      const double a = 2.0 * uniform() - 1.0, b = 2.0 * uniform() - 1.0;
      const double s = a * a + b * b;
      if (s >= 1.0 || s == 0.0) continue;
      const double f = std::sqrt(-2.0 * std::log(s) / s);
      spare_ = b * f;
      has_spare_ = true;
      return a * f;
    }
  }

  /// Laplace(0, scale) by inverting the distribution function.
  double laplace(double scale) {
    const double u = uniform_open() - 0.5;
    return -scale * std::copysign(1.0, u) * std::log(1.0 - 2.0 * std::abs(u));
  }

  /// Uniform integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;) {
      const std::uint64_t v = engine_();
      if (v < limit) return v % bound;
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 step, used to decorrelate derived seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// True when the outliers exceed what coverage h can trim away.
inline bool exceeds_breakdown(const GenSpec& spec) {
  const Index h = default_coverage(spec.n, spec.d);
  return spec.n_outliers >= spec.n - h + 1;
}

inline void validate(const GenSpec& spec) {
  if (spec.n < 1 || spec.d < 1) throw InvalidSpec("n and d must be positive");
  if (spec.n < spec.d) throw InvalidSpec("n must be at least d");
  if (spec.n_outliers > spec.n) throw InvalidSpec("more outliers than rows");
  if (spec.beta_true.size() != 0 && static_cast<Index>(spec.beta_true.size()) != spec.d)
    throw InvalidSpec("beta_true must have length d");
  if (!(spec.noise_sd >= 0.0) || !std::isfinite(spec.noise_sd)) throw InvalidSpec("noise_sd must be finite and >= 0");
  if (!std::isfinite(spec.shift_magnitude)) throw InvalidSpec("shift_magnitude must be finite");
  if (!(spec.laplace_scale > 0.0) || !std::isfinite(spec.laplace_scale)) throw InvalidSpec("laplace_scale must be positive");
}

inline Generated generate(const GenSpec& spec) {
  validate(spec);
  const auto n = static_cast<Eigen::Index>(spec.n), d = static_cast<Eigen::Index>(spec.d);
  const Vector beta = spec.beta_true.size() == 0 ? Vector::Ones(d) : spec.beta_true;
  Sampler rng(spec.seed);

  Matrix X(n, d);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rng.normal();
    y(i) = X.row(i).dot(beta) + spec.noise_sd * rng.normal();
  }

  // Partial Fisher-Yates: the first n_outliers slots are a uniform sample.
  IndexSet perm(spec.n);
  for (Index i = 0; i < spec.n; ++i) perm[i] = i;
  for (Index i = 0; i < spec.n_outliers; ++i) {
    const Index j = i + static_cast<Index>(rng.below(spec.n - i));
    std::swap(perm[i], perm[j]);
  }
  IndexSet outliers(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(spec.n_outliers));
  std::sort(outliers.begin(), outliers.end());

  for (Index k : outliers) {
    const auto i = static_cast<Eigen::Index>(k);
    switch (spec.contamination) {
      case Contamination::Vertical:
        y(i) += spec.shift_magnitude;
        break;
      case Contamination::HighLeverage:
        X.row(i).array() += spec.shift_magnitude;
        break;
      case Contamination::HeavyTail:
        for (Eigen::Index j = 0; j < d; ++j) X(i, j) += rng.laplace(spec.laplace_scale);
        break;
      case Contamination::GoodLeverage: {
        const double noise = y(i) - X.row(i).dot(beta);
        X.row(i).array() += spec.shift_magnitude;
        y(i) = X.row(i).dot(beta) + noise;
        break;
      }
    }
  }
  return {Dataset(std::move(X), std::move(y)), {beta, std::move(outliers)}};
}

struct SuiteEntry {
  GenSpec spec;
  Dataset data;
  GroundTruth truth;
};

/// `reps` datasets per (n, d, type) cell, in that nesting order. Seeds are
/// derived from the master seed and the running dataset number.
inline std::vector<SuiteEntry> benchmark_suite(const std::vector<Index>& n_list, const std::vector<Index>& d_list,
                                               const std::vector<Contamination>& types, Index reps,
                                               std::uint64_t seed, Index n_outliers = 10) {
  if (reps < 1) throw InvalidSpec("reps must be at least 1");
  std::vector<SuiteEntry> suite;
  std::uint64_t counter = 0;
  for (Index n : n_list) {
    for (Index d : d_list) {
      for (Contamination type : types) {
        for (Index r = 0; r < reps; ++r) {
          GenSpec spec;
          spec.n = n;
          spec.d = d;
          spec.n_outliers = n_outliers;
          spec.contamination = type;
          spec.seed = mix_seed(seed ^ mix_seed(counter++));
          Generated g = generate(spec);
          suite.push_back({spec, std::move(g.data), std::move(g.truth)});
        }
      }
    }
  }
  return suite;
}

}  // namespace lts
