#pragma once

// Per-annotator consistency measures (temporal, framing, order, cross-item),
// the anchor failure rate, reliability aggregation, and framing-effect
// statistics for prompt pairs.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefaudit/inconsistency_ratio.hpp"
#include "prefaudit/ingest.hpp"
#include "prefaudit/pairing.hpp"
#include "prefaudit/stats.hpp"

namespace prefaudit::diagnostics {

/// 15 points on 0-100, 1 point on Likert-5, exact agreement on binary.
double default_tau(ScaleKind kind);

enum class ReliabilityMode { weighted, min, hierarchical };
const char* to_string(ReliabilityMode mode);
ReliabilityMode reliability_mode_from_string(const std::string& s);

struct ReliabilityConfig {
  ReliabilityMode mode = ReliabilityMode::weighted;
  /// Weights for temp, frame, order, cross.
  std::array<double, 4> weights{1.0, 1.0, 1.0, 1.0};
  /// Hierarchical mode returns temp when below this, then frame when below
  /// `frame_threshold`.
  double temp_threshold = 0.5;
  double frame_threshold = 0.6;
};

struct DiagnosticConfig {
  /// Consistency tolerance on the raw scale; scale default when absent.
  std::optional<double> tau;
  /// Same-session repeats count as temporal when their timestamps differ by
  /// more than this.
  std::int64_t min_timestamp_gap = 0;
  /// Anchor ratings further than this from the known score are failures;
  /// tau when absent.
  std::optional<double> anchor_tolerance;
  ratio::RatioConfig ratio;
  ReliabilityConfig reliability;
};

struct ConsistencyProfile {
  std::string annotator_id;
  std::optional<double> temp;
  std::optional<double> frame;
  std::optional<double> order;
  std::optional<double> cross;
  std::size_t n_temp_pairs = 0;
  std::size_t n_frame_pairs = 0;
  std::size_t n_order_pairs = 0;
  std::size_t n_cross_items = 0;
  std::optional<double> anchor_failure_rate;
  std::size_t n_anchor_items = 0;
  std::optional<double> reliability;
  double tau_used = 0.0;

  bool operator==(const ConsistencyProfile&) const = default;
};

struct ConsistencyScore {
  double score = 0.0;
  std::size_t n = 0;
};

/// Two ratings of the same item and framing count as a temporal pair when
/// their sessions differ, or failing that, their timestamps differ by more
/// than `min_timestamp_gap`.
bool is_temporal_pair(const AnnotationRecord& a, const AnnotationRecord& b,
                      std::int64_t min_timestamp_gap = 0);

/// Fraction of repeat rating pairs with |r1 - r2| <= tau. Throws
/// InsufficientSupport when the annotator has no temporal pairs.
ConsistencyScore temporal_consistency(const Dataset& dataset, const std::string& annotator_id,
                                      double tau, std::int64_t min_timestamp_gap = 0);

/// Fraction of equivalent-framing rating pairs with |r_a - r_b| <= tau.
/// Framing pairs are ratings of one item under two framing ids, plus
/// ratings of both members of any equivalent PromptPair supplied.
ConsistencyScore framing_consistency(const Dataset& dataset, const std::string& annotator_id,
                                     double tau,
                                     std::span<const pairing::PromptPair> equivalent_pairs = {});

/// Binary-choice data: fraction of (AB, BA) presentations of one response
/// pair, marked by condition_tag, where the same response was preferred.
ConsistencyScore order_consistency(const Dataset& dataset, const std::string& annotator_id);

/// 1 / (1 + ratio) for the annotator's inconsistency ratio on the dimension.
/// Throws InsufficientSupport below the ratio's minimum support.
ConsistencyScore cross_item_consistency(const Dataset& dataset, const std::string& annotator_id,
                                        const std::string& value_dimension,
                                        const ratio::RatioConfig& config = {});

/// Fraction of anchor-item ratings further than `tolerance` from the item's
/// anchor score.
ConsistencyScore anchor_failure_rate(const Dataset& dataset, const std::string& annotator_id,
                                     double tolerance);

/// Aggregates the present components. Throws InsufficientSupport when none
/// is present.
double reliability(const ConsistencyProfile& profile, const ReliabilityConfig& config = {});

ConsistencyProfile compute_profile(const Dataset& dataset, const std::string& annotator_id,
                                   const DiagnosticConfig& config = {},
                                   std::span<const pairing::PromptPair> equivalent_pairs = {});

/// Profiles for every annotator, ordered by annotator id.
std::vector<ConsistencyProfile> compute_profiles(
    const Dataset& dataset, const DiagnosticConfig& config = {},
    std::span<const pairing::PromptPair> equivalent_pairs = {});

struct FramingEffect {
  std::string pair_id;
  std::map<std::string, double> per_annotator_deviation;
  double pair_shift = 0.0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double paired_t = 0.0;
  double p_value = 1.0;
  double df = 0.0;
  double cohens_d = 0.0;
  bool zero_effect = false;
};

/// Paired statistics over annotators who rated both members of the pair.
/// An annotator's repeated ratings of one member are averaged.
FramingEffect framing_effect_stats(const Dataset& dataset, const pairing::PromptPair& pair);

nlohmann::json to_json(const ConsistencyProfile& p);
ConsistencyProfile profile_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FramingEffect& f);
/// CSV header and one row per profile; absent scores are empty cells.
void write_profiles_csv(std::ostream& out, std::span<const ConsistencyProfile> profiles);

}  // namespace prefaudit::diagnostics
