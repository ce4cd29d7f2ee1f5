#pragma once

// Classification of flagged inconsistencies: pair-level threshold schemes,
// the profile-rule cascade onto the four response categories, and routing of
// annotator profiles through the validity decision procedure.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefaudit/diagnostics.hpp"
#include "prefaudit/ingest.hpp"
#include "prefaudit/pairing.hpp"

namespace prefaudit::taxonomy {

enum class PairCategory { consistent, marginal, excessive, violation };
enum class Scheme { equivalent_scheme, directional_scheme };
enum class Label { non_attitude, constructed_preference, measurement_artifact, genuine_uncrystallized };
enum class Routing { filter_downweight, elicit_carefully, fix_instrument, use_as_signal };

const char* to_string(PairCategory c);
const char* to_string(Scheme s);
const char* to_string(Label l);
const char* to_string(Routing r);
Label label_from_string(const std::string& s);
Routing routing_from_string(const std::string& s);

/// Scheme cut points on the 0-100 scale.
struct PairThresholds {
  double consistent_max = 15.0;
  double marginal_max = 30.0;
};

struct PairClassification {
  PairCategory category = PairCategory::consistent;
  Scheme basis = Scheme::equivalent_scheme;
  double delta = 0.0;
};

/// |a - b| <= 15 consistent, <= 30 marginal, otherwise excessive.
PairClassification classify_equivalent_pair(double score_a, double score_b,
                                            const PairThresholds& t = {});

/// Signed margin in the expected direction: > 15 consistent, < -15
/// violation, otherwise marginal.
PairClassification classify_directional_pair(double score_a, double score_b,
                                             pairing::Direction expected,
                                             const PairThresholds& t = {});

/// Scheme chosen by the flag's pair kind.
PairClassification classify_pair(const pairing::InconsistencyFlag& flag,
                                 const PairThresholds& t = {});

/// Score-pattern codes over a pair of ratings. C1 extreme-to-extreme,
/// C2 extreme-to-middle, C3 middle-to-middle, C4 same-side with a gap of at
/// least 15. Codes are not exclusive.
struct ScorePattern {
  bool c1_extreme_to_extreme = false;
  bool c2_extreme_to_middle = false;
  bool c3_middle_to_middle = false;
  bool c4_same_side = false;

  std::vector<std::string> codes() const;
};

ScorePattern score_pattern(double score_a, double score_b);

struct ClassifyConfig {
  /// Bad-quality responses scored above this indicate task confusion.
  double artifact_floor = 40.0;
  /// Maximum delta for the uncrystallized-preference profile.
  double genuine_max_delta = 30.0;
  PairThresholds pair;
};

struct TaxonomyLabel {
  std::string annotator_id;
  std::string pair_id;
  std::string record_a;
  std::string record_b;
  double delta = 0.0;
  Label label = Label::constructed_preference;
  PairClassification pair_class;
  std::vector<std::string> rule_trace;
};

/// Rule cascade; the first matching rule decides and the fallback always
/// fires. Metadata codes are taken as given.
TaxonomyLabel classify_flag(const pairing::InconsistencyFlag& flag, const ItemMetadata* metadata,
                            const PairClassification& pair_class, const ScorePattern& pattern,
                            const ClassifyConfig& config = {});

/// Classifies every flag, merging the coding of item_a over item_b.
std::vector<TaxonomyLabel> classify_flags(std::span<const pairing::InconsistencyFlag> flags,
                                          const Dataset& dataset,
                                          const ClassifyConfig& config = {});

struct RoutingThresholds {
  double t_temp = 0.5;
  double t_frame = 0.6;
  double t_order = 0.6;
  /// Anchor failure rates strictly above this route to fix_instrument.
  double t_artifact = 0.05;
};

struct RoutingDecision {
  std::string annotator_id;
  Routing routing = Routing::use_as_signal;
  std::string reason;
};

/// First failing rule in order: temporal, framing, order or anchor failures.
/// Absent components pass. Throws InsufficientSupport for a profile with no
/// component at all.
RoutingDecision decision_procedure(const diagnostics::ConsistencyProfile& profile,
                                   const RoutingThresholds& thresholds = {});

struct SummaryRow {
  Label label = Label::non_attitude;
  std::size_t count = 0;
  double pct = 0.0;
  double mean_delta = 0.0;
};

/// Rows ordered by count descending, ties by label order.
std::vector<SummaryRow> classification_summary(std::span<const TaxonomyLabel> labels);

/// Consistent / marginal / inconsistent counts over every annotator rating
/// pair of the supplied pairs, one row per scheme that occurs. Inconsistent
/// means excessive (equivalent scheme) or violation (directional scheme).
struct PairCategoryRow {
  Scheme scheme = Scheme::equivalent_scheme;
  std::size_t n = 0;
  std::size_t consistent = 0;
  std::size_t marginal = 0;
  std::size_t inconsistent = 0;
};
std::vector<PairCategoryRow> pair_category_table(const Dataset& dataset,
                                                 std::span<const pairing::PromptPair> pairs,
                                                 const PairThresholds& t = {});

nlohmann::json to_json(const PairCategoryRow& r);
nlohmann::json to_json(const TaxonomyLabel& l);
TaxonomyLabel label_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RoutingDecision& d);
nlohmann::json to_json(const SummaryRow& r);

}  // namespace prefaudit::taxonomy
