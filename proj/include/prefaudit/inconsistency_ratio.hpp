#pragma once

// Per-(annotator, theme) inconsistency ratios: the variance of an annotator's
// ratings within a theme divided by the expected variance of a same-size
// random grouping of that annotator's own ratings.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefaudit/ingest.hpp"
#include "prefaudit/stats.hpp"

namespace prefaudit::ratio {

struct RatioConfig {
  std::size_t resamples = 1000;
  std::uint64_t seed = 0;
  std::size_t min_support = 5;
  /// Drop the theme's own ratings from the baseline pool.
  bool exclude_theme_items = false;
  /// Interpretation bands: ratio below `low_band` reads as more coherent than
  /// random grouping, above `high_band` as less coherent.
  double low_band = 0.5;
  double high_band = 1.5;
};

enum class Band { below_random, comparable_to_random, above_random };
const char* to_string(Band b);

struct RatioRecord {
  std::string annotator_id;
  std::string theme;
  std::size_t n_items = 0;
  double var_within = 0.0;
  double baseline = 0.0;
  double ratio = 0.0;
  std::size_t resamples_used = 0;
  std::uint64_t seed = 0;
  /// Baseline was zero (annotator rates everything identically); ratio is
  /// reported as 0.
  bool degenerate = false;
  Band band = Band::comparable_to_random;

  bool operator==(const RatioRecord&) const = default;
};

/// True when the item's theme labels or value dimension include `theme`.
bool item_has_theme(const ItemMetadata& m, const std::string& theme);

/// The annotator's ratings on items carrying `theme`, one entry per record.
std::vector<double> theme_ratings(const Dataset& dataset, const std::string& annotator_id,
                                  const std::string& theme);
/// Every rating the annotator gave, in record order.
std::vector<double> history(const Dataset& dataset, const std::string& annotator_id);

struct VarianceResult {
  double variance = 0.0;
  std::size_t n = 0;
};

/// Population variance of the annotator's theme ratings. Throws
/// InsufficientSupport below `min_support` ratings.
VarianceResult within_theme_variance(const Dataset& dataset, const std::string& annotator_id,
                                     const std::string& theme, std::size_t min_support = 5);

/// Mean over `resamples` draws of the population variance of k values drawn
/// without replacement from `pool`.
double random_baseline(std::span<const double> pool, std::size_t k, std::size_t resamples,
                       stats::SeededSampler& sampler);

/// Baseline over the annotator's full rating history with a stream keyed by
/// the annotator id.
double random_baseline(const Dataset& dataset, const std::string& annotator_id, std::size_t k,
                       std::size_t resamples, std::uint64_t seed);

RatioRecord inconsistency_ratio(const Dataset& dataset, const std::string& annotator_id,
                                const std::string& theme, const RatioConfig& config = {});

/// Ratio from explicit theme ratings and baseline pool; shared by the
/// dataset-level entry points and cross-item consistency.
RatioRecord ratio_from_ratings(std::span<const double> theme_values, std::span<const double> pool,
                               stats::SeededSampler& sampler, const RatioConfig& config);

/// Every (annotator, theme) cell with enough support, ordered by annotator
/// then theme. Cells run in parallel on keyed substreams.
std::vector<RatioRecord> compute_all_ratios(const Dataset& dataset, const RatioConfig& config = {});

/// Mean of each annotator's theme ratios.
std::map<std::string, double> annotator_mean_ratios(std::span<const RatioRecord> ratios);

struct PopulationReport {
  std::size_t n_annotators = 0;
  double mean_ratio = 0.0;
  stats::TestResult ratio_vs_one;
  double median_ratio = 0.0;
  std::size_t n_low = 0;
  std::size_t n_high = 0;
  double mean_rating_low = 0.0;
  double mean_rating_high = 0.0;
  /// mean_rating_low - mean_rating_high.
  double mean_difference = 0.0;
  stats::TestResult median_split_welch;
  stats::TestResult median_split_pooled;
  /// Absent when either ratios or mean ratings have zero spread.
  std::optional<double> pearson_ratio_rating;
};

/// Annotators with a mean ratio strictly below the median form the low
/// group; the rest form the high group. Mean ratings are on the 0-100 scale.
PopulationReport population_stats(std::span<const RatioRecord> ratios, const Dataset& dataset);

nlohmann::json to_json(const RatioRecord& r);
RatioRecord ratio_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PopulationReport& r);
nlohmann::json to_json(const stats::TestResult& t);

}  // namespace prefaudit::ratio
