#include <doctest.h>

#include <cmath>
#include <vector>

#include "prefaudit/error.hpp"
#include "prefaudit/stats.hpp"

using namespace prefaudit;
using namespace prefaudit::stats;

// Reference values from tests/oracles/stats_oracle.py (exact rationals,
// scipy for tail probabilities).
namespace oracle {
constexpr double welch_v1_v2_t = -3.6742346141747673;
constexpr double welch_v1_v2_df = 4.0;
constexpr double welch_v1_v2_p = 0.021311641128756727;
constexpr double welch_a_b_t = -3.3533546131107284;
constexpr double welch_a_b_df = 5.917901937331499;
constexpr double welch_a_b_p = 0.01567810034734723;
constexpr double pooled_a_b_t = -3.42880109848506;
constexpr double pooled_a_b_p = 0.011003102960041533;
constexpr double paired_t = 7.905694150420948;
constexpr double paired_p = 0.0013849379404235027;
constexpr double cohens_d = 3.5355339059327373;
constexpr double pearson_x_y = 0.7745966692414834;
constexpr double one_sample_a_3_t = 0.6413966910244537;
constexpr double one_sample_a_3_p = 0.5561709224006306;
constexpr double t_cdf_1_5_df3 = 0.8847080673775886;
constexpr double t_cdf_m2_df10 = 0.036694017385370196;
}  // namespace oracle

const std::vector<double> v1{1, 2, 3}, v2{4, 5, 6};
const std::vector<double> a{2.1, 3.4, 1.9, 5.6, 4.2}, b{6.3, 7.1, 5.8, 9.9};
const std::vector<double> diffs{10, 10, 10, 14, 6};

TEST_CASE("descriptive moments") {
  const std::vector<double> x{0, 100, 0, 100, 0};
  CHECK(mean(x) == doctest::Approx(40.0));
  CHECK(population_variance(x) == doctest::Approx(2400.0));
  CHECK(sample_variance(x) == doctest::Approx(3000.0));
  CHECK(median(std::vector<double>{3, 1, 2}) == 2.0);
  CHECK(median(std::vector<double>{4, 1, 2, 3}) == 2.5);
  CHECK_THROWS_AS(mean(std::vector<double>{}), DataError);
  CHECK_THROWS_AS(sample_variance(std::vector<double>{1.0}), DataError);
}

TEST_CASE("t distribution tails") {
  CHECK(t_cdf(1.5, 3) == doctest::Approx(oracle::t_cdf_1_5_df3).epsilon(1e-12));
  CHECK(t_cdf(-2.0, 10) == doctest::Approx(oracle::t_cdf_m2_df10).epsilon(1e-12));
  CHECK(t_cdf(0.0, 7) == doctest::Approx(0.5));
  CHECK(t_two_sided_p(0.0, 5) == doctest::Approx(1.0));
  CHECK(incomplete_beta(2, 3, 0.0) == 0.0);
  CHECK(incomplete_beta(2, 3, 1.0) == 1.0);
  // I_x(1, 1) is the identity.
  CHECK(incomplete_beta(1, 1, 0.37) == doctest::Approx(0.37).epsilon(1e-14));
}

TEST_CASE("Welch t matches the textbook formula") {
  const auto r = welch_t(v1, v2);
  CHECK(r.statistic == doctest::Approx(oracle::welch_v1_v2_t).epsilon(1e-12));
  CHECK(r.df == doctest::Approx(oracle::welch_v1_v2_df).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(oracle::welch_v1_v2_p).epsilon(1e-10));
  CHECK(r.kind == TestKind::welch_two_sample);

  const auto u = welch_t(a, b);
  CHECK(u.statistic == doctest::Approx(oracle::welch_a_b_t).epsilon(1e-12));
  CHECK(u.df == doctest::Approx(oracle::welch_a_b_df).epsilon(1e-12));
  CHECK(u.p_value == doctest::Approx(oracle::welch_a_b_p).epsilon(1e-10));
}

TEST_CASE("pooled and one-sample t") {
  const auto p = pooled_t(a, b);
  CHECK(p.statistic == doctest::Approx(oracle::pooled_a_b_t).epsilon(1e-12));
  CHECK(p.df == 7.0);
  CHECK(p.p_value == doctest::Approx(oracle::pooled_a_b_p).epsilon(1e-10));

  const auto o = one_sample_t(a, 3.0);
  CHECK(o.statistic == doctest::Approx(oracle::one_sample_a_3_t).epsilon(1e-12));
  CHECK(o.df == 4.0);
  CHECK(o.p_value == doctest::Approx(oracle::one_sample_a_3_p).epsilon(1e-10));
}

TEST_CASE("paired t and Cohen's d on differences") {
  const auto r = paired_t(diffs);
  CHECK(r.statistic == doctest::Approx(oracle::paired_t).epsilon(1e-12));
  CHECK(r.df == 4.0);
  CHECK(r.p_value == doctest::Approx(oracle::paired_p).epsilon(1e-10));
  CHECK(stats::cohens_d(diffs).d == doctest::Approx(oracle::cohens_d).epsilon(1e-12));

  // Paired toy vectors i = (10, 20, 30), j = (20, 30, 40): constant shift.
  const std::vector<double> shift{-10, -10, -10};
  CHECK_THROWS_AS(paired_t(shift), DegenerateVariance);
}

TEST_CASE("zero-spread conventions") {
  const std::vector<double> zeros{0, 0, 0, 0};
  const auto r = paired_t(zeros);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);
  CHECK(r.zero_effect);
  const auto d = stats::cohens_d(zeros);
  CHECK(d.d == 0.0);
  CHECK(d.zero_effect);

  const auto same = welch_t(v1, v1);
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == doctest::Approx(1.0));

  const std::vector<double> c1{5, 5, 5}, c2{7, 7, 7};
  CHECK_THROWS_AS(welch_t(c1, c2), DegenerateVariance);
  CHECK_THROWS_AS(welch_t(std::vector<double>{1.0}, v2), DataError);
}

TEST_CASE("Pearson correlation") {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 5, 4, 5};
  CHECK(pearson_r(x, y) == doctest::Approx(oracle::pearson_x_y).epsilon(1e-12));
  std::vector<double> lin;
  for (double v : x) lin.push_back(2 * v + 1);
  CHECK(pearson_r(x, lin) == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<double> flat{3, 3, 3, 3, 3};
  CHECK_THROWS_AS(pearson_r(flat, y), DegenerateVariance);
}

TEST_CASE("seeded sampler determinism and ranges") {
  SeededSampler s1(7, "a"), s2(7, "a"), s3(7, "b"), s4(8, "a");
  bool differs_key = false, differs_seed = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = s1.next_u64();
    CHECK(x == s2.next_u64());
    differs_key = differs_key || x != s3.next_u64();
    differs_seed = differs_seed || x != s4.next_u64();
  }
  CHECK(differs_key);
  CHECK(differs_seed);

  SeededSampler s(1, "range");
  for (int i = 0; i < 1000; ++i) {
    const double u = s.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(s.below(7) < 7u);
  }
  const auto idx = s.sample_without_replacement(10, 10);
  std::vector<std::size_t> sorted(idx);
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("sampler moments") {
  SeededSampler s(3, "moments");
  std::vector<double> n, u;
  for (int i = 0; i < 200000; ++i) {
    n.push_back(s.normal(10.0, 2.0));
    u.push_back(s.uniform(0.0, 100.0));
  }
  CHECK(mean(n) == doctest::Approx(10.0).epsilon(0.003));
  CHECK(sample_sd(n) == doctest::Approx(2.0).epsilon(0.01));
  CHECK(mean(u) == doctest::Approx(50.0).epsilon(0.01));
  CHECK(population_variance(u) == doctest::Approx(10000.0 / 12.0).epsilon(0.01));
}
