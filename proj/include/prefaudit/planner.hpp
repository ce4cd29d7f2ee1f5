#pragma once

// Diagnostic design for annotation campaigns: tiered repeat/framing/retest
// plans with cost, task schedules that embed the diagnostics, and threshold
// calibration.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefaudit/ingest.hpp"

namespace prefaudit::planner {

struct PlanRequest {
  int tier = 1;
  std::size_t n_items = 0;
  std::size_t n_annotators = 0;
  double cost_per_annotation = 0.0;
  /// Defaults to ceil(n_items / n_annotators): each item rated once.
  std::optional<std::size_t> items_per_annotator;
  /// Defaults: repeat 5%, framing 12.5% (tier 2+), retest 25% and
  /// within-annotator framing 12.5% (tier 3).
  std::optional<double> repeat_rate;
  std::optional<double> framing_rate;
  std::optional<double> within_annotator_framing_rate;
  std::optional<double> retest_rate;
  std::size_t min_spacing = 20;
  std::size_t session_length = 100;
};

struct TierPlan {
  int tier = 1;
  std::size_t n_items = 0;
  std::size_t n_annotators = 0;
  std::size_t items_per_annotator = 0;
  double repeat_rate = 0.0;
  std::size_t n_repeats_per_annotator = 0;
  std::size_t min_spacing = 20;
  std::optional<double> framing_rate;
  /// Items given two framing variants split across annotators.
  std::size_t n_framing_items = 0;
  std::optional<double> within_annotator_framing_rate;
  std::size_t n_within_framing_per_annotator = 0;
  std::optional<double> retest_rate;
  std::size_t n_retest_per_annotator = 0;
  std::size_t session_length = 100;
  std::size_t base_annotations = 0;
  std::size_t extra_annotations = 0;
  double overhead_pct = 0.0;
  double extra_cost = 0.0;
};

inline constexpr std::size_t kMinRepeatsPerAnnotator = 15;
inline constexpr std::size_t kMinSpacing = 20;

/// Throws ConfigError naming the binding constraint when the request cannot
/// satisfy the tier's invariants.
TierPlan plan_tier(const PlanRequest& request);
TierPlan plan_tier(int tier, std::size_t n_items, std::size_t n_annotators,
                   double cost_per_annotation);

/// Throws ConfigError when `plan` breaks a tier invariant.
void check_tier_invariants(const TierPlan& plan);

enum class TaskKind { original, repeat, framing_variant, retest };
const char* to_string(TaskKind k);

struct Task {
  std::string item_id;
  TaskKind kind = TaskKind::original;
  std::optional<std::string> framing_id;
  std::size_t position = 0;
  std::size_t session = 0;
  /// Position of the original presentation, for diagnostic tasks.
  std::optional<std::size_t> original_position;
};

struct AnnotatorSchedule {
  std::string annotator_id;
  std::vector<Task> tasks;
  /// Index of the first task of each session.
  std::vector<std::size_t> session_starts;
};

struct Schedule {
  TierPlan plan;
  std::uint64_t seed = 0;
  std::vector<AnnotatorSchedule> annotators;
};

/// Lays out each annotator's task list. Repeats are inserted into the main
/// stream with at least `min_spacing` intervening tasks; within-annotator
/// framing variants and retests follow in later sessions. Repeat items are
/// stratified by content type when metadata provides one. Throws ConfigError
/// when the spacing cannot be met; the repeat minimum is not re-checked.
Schedule assign_diagnostics(const TierPlan& plan, std::span<const std::string> item_ids,
                            std::span<const std::string> annotator_ids, std::uint64_t seed,
                            const std::map<std::string, ItemMetadata>* metadata = nullptr);

enum class CalibrationMethod { empirical, scale_relative, consequence };
const char* to_string(CalibrationMethod m);

struct ThresholdCalibration {
  CalibrationMethod method = CalibrationMethod::scale_relative;
  ScaleKind scale_kind = ScaleKind::continuous_0_100;
  double consistent_max = 15.0;
  double marginal_max = 30.0;
  std::string basis;
};

/// consistent_max = mean + k * sd of clear-case differences (sample sd);
/// marginal_max doubles it. Needs at least 10 differences and k in [1.5, 2].
ThresholdCalibration calibrate_empirical(std::span<const double> clear_case_diffs, double k,
                                         ScaleKind scale = ScaleKind::continuous_0_100);
/// 15/30 on 0-100, 1/2 on Likert-5; on binary choices any disagreement is
/// inconsistent.
ThresholdCalibration calibrate_scale(ScaleKind scale);
/// consistent_max = flip_margin.
ThresholdCalibration calibrate_consequence(ScaleKind scale, double flip_margin);

nlohmann::json to_json(const TierPlan& p);
nlohmann::json to_json(const Schedule& s);
nlohmann::json to_json(const ThresholdCalibration& c);

}  // namespace prefaudit::planner
