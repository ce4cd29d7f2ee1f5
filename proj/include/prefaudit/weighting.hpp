#pragma once

// Pipeline hand-off: item reliability, per-record validity weights, the
// artifact/preference variance split, and weighted or filtered exports.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefaudit/diagnostics.hpp"
#include "prefaudit/ingest.hpp"

namespace prefaudit::weighting {

/// Mean over annotators with temporal pairs on the item of their fraction of
/// consistent pairs. Throws InsufficientSupport when nobody repeated it.
double item_reliability(const Dataset& dataset, const std::string& item_id, double tau,
                        std::int64_t min_timestamp_gap = 0);

/// Reliability for every item that has repeats.
std::map<std::string, double> item_reliabilities(const Dataset& dataset, double tau,
                                                 std::int64_t min_timestamp_gap = 0);

enum class WeightMode { binary, linear, sigmoid };
const char* to_string(WeightMode m);
WeightMode weight_mode_from_string(const std::string& s);

struct WeightParams {
  WeightMode mode = WeightMode::linear;
  /// Binary mode: annotators below this reliability get weight 0.
  double annotator_threshold = 0.5;
  /// Binary mode: items below this reliability get weight 0.
  double item_threshold = 0.5;
  double sigmoid_midpoint = 0.5;
  double sigmoid_steepness = 10.0;
};

struct WeightTable {
  WeightMode mode = WeightMode::linear;
  /// Parallel to dataset.records.
  std::vector<double> weights;
  std::map<std::string, double> annotator_reliability;
  std::map<std::string, double> item_reliability;
  /// Annotators without any reliability component; their factor is 1.
  std::vector<std::string> unscored_annotators;
};

/// w_i from the record's annotator and item reliabilities; absent factors are
/// left out of the product. Throws ConfigError for out-of-range params.
WeightTable build_weights(const Dataset& dataset,
                          std::span<const diagnostics::ConsistencyProfile> profiles,
                          const WeightParams& params,
                          const std::map<std::string, double>& item_rel = {});

enum class ArtifactEstimator { half_mean_squared_difference, mean_absolute_deviation };

struct VarianceDecomposition {
  double var_total = 0.0;
  double var_artifact = 0.0;
  double var_preference = 0.0;
  /// var_total - var_artifact before the floor at zero.
  double var_preference_raw = 0.0;
  bool floored = false;
  std::size_t n_repeat_pairs = 0;
  /// Repeat pairs with |r1 - r2| > tau.
  std::size_t n_failed_pairs = 0;
};

/// var_artifact = 1/2 mean (r1 - r2)^2 over temporal repeat pairs;
/// var_total is the population variance of every rating.
VarianceDecomposition variance_decomposition(
    const Dataset& dataset, double tau,
    ArtifactEstimator estimator = ArtifactEstimator::half_mean_squared_difference,
    std::int64_t min_timestamp_gap = 0);

enum class ExportPolicy { weight, filter, both };
ExportPolicy export_policy_from_string(const std::string& s);

struct ExportSummary {
  std::size_t input = 0;
  std::size_t retained = 0;
  std::size_t dropped = 0;
};

/// Writes JSONL records, adding a `weight` field (weight, both) and dropping
/// zero-weight records (filter, both).
ExportSummary export_weighted(const Dataset& dataset, const WeightTable& weights,
                              ExportPolicy policy, std::ostream& out);
ExportSummary export_weighted(const Dataset& dataset, const WeightTable& weights,
                              ExportPolicy policy, const std::filesystem::path& path);

nlohmann::json to_json(const VarianceDecomposition& v);
nlohmann::json to_json(const ExportSummary& s);

}  // namespace prefaudit::weighting
