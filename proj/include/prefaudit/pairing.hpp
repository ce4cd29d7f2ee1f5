#pragma once

// Discovery of exact repeats and semantically similar prompt pairs, score
// inconsistency flags, prevalence summaries and the test-retest filtering
// ladder.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefaudit/ingest.hpp"

namespace prefaudit::pairing {

enum class PairKind { identical, equivalent, directional };
enum class Direction { a_more, b_more, equal };

const char* to_string(PairKind kind);
const char* to_string(Direction d);
PairKind pair_kind_from_string(const std::string& s);
Direction direction_from_string(const std::string& s);

/// Similarity at or above which two embeddings count as identical.
inline constexpr double kIdenticalSimilarity = 1.0 - 1e-9;
/// Response-embedding similarity treated as an identical response.
inline constexpr double kIdenticalResponseSimilarity = 0.9999;
/// Above this many items, all-pairs search is refused.
inline constexpr std::size_t kMaxExactItems = 20000;

struct PromptPair {
  std::string pair_id;
  std::string item_a;
  std::string item_b;
  double similarity = 1.0;
  PairKind kind = PairKind::equivalent;
  std::optional<Direction> expected_direction;
  std::optional<std::string> rationale_tag;

  bool operator==(const PromptPair&) const = default;
};

/// Builds a pair with canonical ordering (item_a <= item_b) unless the pair
/// is directional, where order carries meaning.
PromptPair make_pair(std::string item_a, std::string item_b, double similarity, PairKind kind,
                     std::optional<Direction> expected = std::nullopt);

struct InconsistencyFlag {
  std::string annotator_id;
  PromptPair pair;
  std::string record_a;
  std::string record_b;
  double score_a = 0.0;
  double score_b = 0.0;
  double delta = 0.0;
  double threshold_used = 0.0;

  bool operator==(const InconsistencyFlag&) const = default;
};

struct PrevalenceSummary {
  std::size_t n_comparisons = 0;
  std::size_t n_inconsistent_pairs = 0;
  double pct_inconsistent = 0.0;
  std::size_t n_annotators_compared = 0;
  std::size_t n_annotators_flagged = 0;
  double pct_annotators_flagged = 0.0;
  /// Absent when nothing was flagged.
  std::optional<double> mean_delta;
  double threshold = 0.0;
};

struct FlagResult {
  std::vector<InconsistencyFlag> flags;
  PrevalenceSummary summary;
};

/// dot(u, v) / (|u| |v|). Throws DataError on length mismatch or zero vectors.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// All unordered item pairs with embedding similarity >= sim_threshold, in
/// canonical (item_a, item_b) order. With `same_annotator`, only pairs that
/// share at least one annotator are kept.
std::vector<PromptPair> find_similar_pairs(const Dataset& dataset, double sim_threshold,
                                           bool same_annotator);

/// Self-pairs (item_a == item_b) for every item some annotator rated twice.
std::vector<PromptPair> find_repeat_pairs(const Dataset& dataset);

/// One flag per (annotator, rating pair) whose absolute difference on the
/// common 0-100 scale is >= delta_threshold. Every annotator rating of
/// item_a is compared with every rating of item_b; for self-pairs, all
/// C(k, 2) ratings within a repeat group are compared.
FlagResult flag_inconsistencies(const Dataset& dataset, std::span<const PromptPair> pairs,
                                double delta_threshold = 15.0);

struct LadderStage {
  std::string name;
  std::function<bool(const InconsistencyFlag&)> keep;
};

struct LadderRow {
  std::string stage;
  std::size_t count = 0;
};

/// Applies predicates cumulatively; the first row is the unfiltered count.
std::vector<LadderRow> filter_ladder(std::span<const InconsistencyFlag> flags,
                                     std::span<const LadderStage> stages);

/// Identical prompts, then identical responses (exact text or response
/// embedding similarity >= 0.9999), then same model.
std::vector<LadderStage> default_ladder(const Dataset& dataset);

nlohmann::json to_json(const PromptPair& p);
PromptPair prompt_pair_from_json(const nlohmann::json& j);
nlohmann::json to_json(const InconsistencyFlag& f);
InconsistencyFlag flag_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PrevalenceSummary& s);
std::vector<PromptPair> load_pairs(const std::filesystem::path& path);

}  // namespace prefaudit::pairing
