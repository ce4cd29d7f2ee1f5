#pragma once

// Statistics primitives shared by the analytics modules: descriptive moments,
// t-tests, correlation, effect sizes, and a keyed deterministic sampler.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace prefaudit::stats {

enum class TestKind { welch_two_sample, pooled_two_sample, one_sample, paired };

const char* to_string(TestKind kind);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double df = 0.0;
  TestKind kind = TestKind::one_sample;
  /// Set when the statistic was defined by convention (zero mean difference
  /// with zero spread) rather than computed.
  bool zero_effect = false;
};

double mean(std::span<const double> x);
/// Variance dividing by n.
double population_variance(std::span<const double> x);
/// Variance dividing by n - 1.
double sample_variance(std::span<const double> x);
double sample_sd(std::span<const double> x);
double median(std::span<const double> x);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
/// P(T <= t) for Student's t with `df` degrees of freedom.
double t_cdf(double t, double df);
/// Two-sided p-value P(|T| >= |t|).
double t_two_sided_p(double t, double df);

/// Welch unequal-variance two-sample t, statistic for mean(a) - mean(b).
TestResult welch_t(std::span<const double> a, std::span<const double> b);
/// Student pooled-variance two-sample t.
TestResult pooled_t(std::span<const double> a, std::span<const double> b);
TestResult one_sample_t(std::span<const double> x, double mu0);
/// One-sample t of paired differences against zero. All-zero differences
/// yield t = 0, p = 1 with `zero_effect` set.
TestResult paired_t(std::span<const double> diffs);

struct EffectSize {
  double d = 0.0;
  bool zero_effect = false;
};

/// mean(diffs) / sd(diffs) with the n - 1 convention.
EffectSize cohens_d(std::span<const double> diffs);

double pearson_r(std::span<const double> x, std::span<const double> y);

/// Deterministic pseudo-random stream keyed by (seed, stream_key).
///
/// The generator and every derived distribution are implemented here rather
/// than through <random> distributions, whose output is
/// implementation-defined; identical keys give identical streams on every
/// platform.
class SeededSampler {
 public:
  SeededSampler(std::uint64_t seed, std::string_view stream_key);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal(double mean = 0.0, double sd = 1.0);
  /// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_[4];
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Stable 64-bit hash of a string (FNV-1a), used for stream derivation.
std::uint64_t stable_hash(std::string_view s);

}  // namespace prefaudit::stats
