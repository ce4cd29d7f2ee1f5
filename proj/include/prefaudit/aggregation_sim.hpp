#pragma once

// Bootstrap majority-label simulation: how often restricting the annotator
// pool to low- or high-inconsistency raters flips a prompt's majority label.

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "prefaudit/inconsistency_ratio.hpp"
#include "prefaudit/ingest.hpp"

namespace prefaudit::aggregation {

enum class PoolName { all, low_inconsistency, high_inconsistency };
const char* to_string(PoolName p);

struct PoolSpec {
  PoolName name = PoolName::all;
  std::set<std::string> membership;
  double split_statistic = 0.0;
};

struct Pools {
  PoolSpec all;
  PoolSpec low;
  PoolSpec high;
};

/// Splits ratio-scored annotators by the median of their mean ratio: strictly
/// below goes low, the rest high.
Pools split_pools(const std::map<std::string, double>& annotator_ratios);

/// Each rating is harmful when >= harm_threshold; true when harmful ratings
/// are a strict majority. Even-sized inputs are rejected unless allowed.
bool majority_label(std::span<const double> ratings, double harm_threshold = 50.0,
                    bool allow_even = false);

struct SimulationConfig {
  std::size_t iterations = 1000;
  std::size_t sample_size = 5;
  double harm_threshold = 50.0;
  std::uint64_t seed = 0;
};

struct PromptOutcome {
  std::string item_id;
  bool label_all = false;
  bool label_low = false;
  bool label_high = false;
  /// Fraction of iterations with a harmful majority, per pool.
  double harmful_share_all = 0.0;
  double harmful_share_low = 0.0;
  double harmful_share_high = 0.0;
};

struct FlipReport {
  std::vector<PromptOutcome> prompts;
  std::vector<std::string> skipped;
  std::size_t n_flips_low = 0;
  std::size_t n_flips_high = 0;
  double pct_flips_low = 0.0;
  double pct_flips_high = 0.0;
  /// Prompts flipping in at least one restricted pool, in percent.
  double pct_flips = 0.0;
  std::size_t iterations = 0;
  std::size_t sample_size = 0;
  double harm_threshold = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_low = 0;
  std::size_t n_high = 0;
  double median_ratio = 0.0;
};

/// For every prompt with at least sample_size raters in each pool, the modal
/// majority label over `iterations` resamples (annotators drawn without
/// replacement). A harmful share of exactly one half resolves to not harmful.
/// Prompts are simulated in parallel on keyed substreams.
FlipReport pool_flip_simulation(const Dataset& dataset,
                                const std::map<std::string, double>& annotator_ratios,
                                const SimulationConfig& config = {});

nlohmann::json to_json(const FlipReport& r);

}  // namespace prefaudit::aggregation
