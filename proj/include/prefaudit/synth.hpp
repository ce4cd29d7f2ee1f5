#pragma once

// Synthetic annotation campaigns with known latent annotator types, used as
// ground truth for diagnostic recovery.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "prefaudit/ingest.hpp"
#include "prefaudit/planner.hpp"
#include "prefaudit/taxonomy.hpp"

namespace prefaudit::synth {

enum class LatentType { genuine, non_attitude, constructed, artifact };
const char* to_string(LatentType t);
LatentType latent_type_from_string(const std::string& s);
/// genuine -> use_as_signal, non_attitude -> filter_downweight,
/// constructed -> elicit_carefully, artifact -> fix_instrument.
taxonomy::Routing expected_routing(LatentType t);

struct LatentParams {
  double noise_sd = 5.0;
  double framing_offset_sd = 30.0;
  double artifact_rate = 0.3;
};

struct LatentAnnotator {
  std::string annotator_id;
  LatentType latent_type = LatentType::genuine;
  LatentParams params;
};

struct GenerateConfig {
  /// Annotators per type, in enum order; zero counts are allowed.
  std::map<LatentType, std::size_t> n_per_type;
  LatentParams params;
  /// Attention-check items appended to every annotator's final session.
  std::size_t n_anchor_items = 20;
  double anchor_low = 5.0;
  double anchor_high = 95.0;
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  Dataset dataset;
  std::vector<LatentAnnotator> annotators;
  std::map<std::string, LatentType> truth;
  planner::TierPlan plan;
  std::uint64_t seed = 0;
  /// Ratings pulled back into [0, 100].
  std::size_t n_clamped = 0;
};

/// Tier-1 request in which every annotator rates every item and sees
/// `framing_pairs` within-annotator framing variants.
planner::PlanRequest plan_request(std::size_t n_annotators, std::size_t n_items,
                                  std::size_t framing_pairs);

/// The plan's n_annotators must equal the total requested annotators and it
/// must carry within-annotator framing pairs. Item means are drawn from
/// U(10, 90). Throws ConfigError for an infeasible plan.
SyntheticDataset generate(const GenerateConfig& config, std::size_t n_items,
                          const planner::TierPlan& plan);

struct RecoveryReport {
  /// latent type -> routing -> count; every cell present.
  std::map<std::string, std::map<std::string, std::size_t>> confusion;
  std::size_t n = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
};

/// Throws DataError when the routed annotators differ from the truth set.
RecoveryReport score_recovery(const std::map<std::string, LatentType>& truth,
                              std::span<const taxonomy::RoutingDecision> routing);

nlohmann::json truth_to_json(const SyntheticDataset& s);
std::map<std::string, LatentType> truth_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RecoveryReport& r);

/// Records JSONL, metadata JSONL and the truth sidecar.
void write_synthetic(const SyntheticDataset& s, const std::filesystem::path& records,
                     const std::filesystem::path& metadata, const std::filesystem::path& truth);

}  // namespace prefaudit::synth
