#include "prefaudit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "prefaudit/error.hpp"

namespace prefaudit::stats {

const char* to_string(TestKind kind) {
  switch (kind) {
    case TestKind::welch_two_sample: return "welch_two_sample";
    case TestKind::pooled_two_sample: return "pooled_two_sample";
    case TestKind::one_sample: return "one_sample";
    case TestKind::paired: return "paired";
  }
  return "unknown";
}

double mean(std::span<const double> x) {
  if (x.empty()) throw InsufficientSupport("mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

namespace {

double sum_sq_dev(std::span<const double> x) {
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss;
}

void require_n(std::span<const double> x, std::size_t n, const char* what) {
  if (x.size() < n) {
    throw InsufficientSupport(std::string(what) + ": need at least " + std::to_string(n) +
                              " observations, got " + std::to_string(x.size()));
  }
}

}  // namespace

double population_variance(std::span<const double> x) {
  require_n(x, 1, "population_variance");
  return sum_sq_dev(x) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  require_n(x, 2, "sample_variance");
  return sum_sq_dev(x) / static_cast<double>(x.size() - 1);
}

double sample_sd(std::span<const double> x) { return std::sqrt(sample_variance(x)); }

double median(std::span<const double> x) {
  require_n(x, 1, "median");
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw ConfigError("incomplete_beta: a and b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw ConfigError("t distribution requires df > 0");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return std::clamp(incomplete_beta(0.5 * df, 0.5, x), 0.0, 1.0);
}

double t_cdf(double t, double df) {
  const double tail = 0.5 * t_two_sided_p(t, df);
  return t >= 0.0 ? 1.0 - tail : tail;
}

namespace {

TestResult finish(double statistic, double df, TestKind kind) {
  TestResult r;
  r.statistic = statistic;
  r.df = df;
  r.kind = kind;
  r.p_value = t_two_sided_p(statistic, df);
  return r;
}

}  // namespace

TestResult welch_t(std::span<const double> a, std::span<const double> b) {
  require_n(a, 2, "welch_t sample a");
  require_n(b, 2, "welch_t sample b");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = sample_variance(a) / na;
  const double vb = sample_variance(b) / nb;
  const double diff = mean(a) - mean(b);
  if (va + vb == 0.0) {
    if (diff == 0.0) {
      TestResult r{0.0, 1.0, na + nb - 2.0, TestKind::welch_two_sample, true};
      return r;
    }
    throw DegenerateVariance("welch_t: both samples have zero variance");
  }
  const double se = std::sqrt(va + vb);
  const double df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  return finish(diff / se, df, TestKind::welch_two_sample);
}

TestResult pooled_t(std::span<const double> a, std::span<const double> b) {
  require_n(a, 2, "pooled_t sample a");
  require_n(b, 2, "pooled_t sample b");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double df = na + nb - 2.0;
  const double sp2 = (sum_sq_dev(a) + sum_sq_dev(b)) / df;
  const double diff = mean(a) - mean(b);
  if (sp2 == 0.0) {
    if (diff == 0.0) return TestResult{0.0, 1.0, df, TestKind::pooled_two_sample, true};
    throw DegenerateVariance("pooled_t: pooled variance is zero");
  }
  return finish(diff / std::sqrt(sp2 * (1.0 / na + 1.0 / nb)), df, TestKind::pooled_two_sample);
}

TestResult one_sample_t(std::span<const double> x, double mu0) {
  require_n(x, 2, "one_sample_t");
  const double n = static_cast<double>(x.size());
  const double sd = sample_sd(x);
  const double diff = mean(x) - mu0;
  if (sd == 0.0) {
    if (diff == 0.0) return TestResult{0.0, 1.0, n - 1.0, TestKind::one_sample, true};
    throw DegenerateVariance("one_sample_t: sample has zero variance");
  }
  return finish(diff / (sd / std::sqrt(n)), n - 1.0, TestKind::one_sample);
}

TestResult paired_t(std::span<const double> diffs) {
  TestResult r = one_sample_t(diffs, 0.0);
  r.kind = TestKind::paired;
  return r;
}

EffectSize cohens_d(std::span<const double> diffs) {
  require_n(diffs, 2, "cohens_d");
  const double sd = sample_sd(diffs);
  const double m = mean(diffs);
  if (sd == 0.0) {
    if (m == 0.0) return EffectSize{0.0, true};
    throw DegenerateVariance("cohens_d: differences have zero variance");
  }
  return EffectSize{m / sd, false};
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("pearson_r: samples differ in length");
  require_n(x, 2, "pearson_r");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateVariance("pearson_r: a sample has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Sampler: xoshiro256** seeded through splitmix64.

std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

SeededSampler::SeededSampler(std::uint64_t seed, std::string_view stream_key) {
  std::uint64_t sm = seed;
  const std::uint64_t mixed = splitmix64(sm) ^ stable_hash(stream_key);
  std::uint64_t x = mixed;
  for (auto& s : state_) s = splitmix64(x);
}

std::uint64_t SeededSampler::next_u64() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double SeededSampler::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double SeededSampler::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t SeededSampler::below(std::uint64_t n) {
  if (n == 0) throw ConfigError("SeededSampler::below requires n > 0");
  // Rejection sampling on the top of the range removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

double SeededSampler::normal(double mean, double sd) {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return mean + sd * spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * f;
  has_spare_normal_ = true;
  return mean + sd * u * f;
}

std::vector<std::size_t> SeededSampler::sample_without_replacement(std::size_t n, std::size_t k) {
  if (k > n) throw ConfigError("sample_without_replacement: k exceeds n");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace prefaudit::stats
