#pragma once

// Canonical data model for preference annotations and its loaders.
//
// One AnnotationRecord is one observed response r_a(x, c): annotator a,
// item x, and a condition c decomposed into session, framing variant and
// presentation position. Repeats of the same (annotator, item) are data.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace prefaudit {

enum class ScaleKind { continuous_0_100, likert_5, binary_pair };

const char* to_string(ScaleKind kind);
ScaleKind scale_kind_from_string(const std::string& s);

/// Binary choices are stored numerically: A = 0, B = 1.
enum class Choice { A = 0, B = 1 };

struct AnnotationRecord {
  std::string record_id;
  std::string annotator_id;
  std::string item_id;
  std::string prompt_text;
  std::optional<std::string> response_text;
  std::optional<std::string> model_id;
  /// Raw score on the record's scale; binary choices map A -> 0, B -> 1.
  double score = 0.0;
  ScaleKind scale_kind = ScaleKind::continuous_0_100;
  std::optional<std::string> session_id;
  std::optional<std::int64_t> timestamp;
  std::optional<std::uint32_t> position_index;
  std::optional<std::string> framing_id;
  std::optional<std::string> condition_tag;

  bool operator==(const AnnotationRecord&) const = default;
};

/// Lower and upper bound of valid raw scores for a scale.
std::pair<double, double> scale_bounds(ScaleKind kind);
/// Maps a raw score onto 0-100: Likert (s - 1) * 25, binary {0, 100}.
double to_common_scale(double score, ScaleKind kind);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dimension) : dimension_(dimension) {}

  /// Throws DataError on dimension mismatch or non-finite entries.
  void insert(const std::string& id, std::vector<double> vec);
  const std::vector<double>* find(const std::string& id) const;
  bool contains(const std::string& id) const { return entries_.count(id) != 0; }
  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, std::vector<double>>& entries() const { return entries_; }

 private:
  std::size_t dimension_ = 0;
  std::map<std::string, std::vector<double>> entries_;
};

enum class ContentType { A1_generic, A2_factual, A3_subjective, A4_value_laden, A5_task_based };
enum class ResponseQuality { B1_good, B2_bad, B3_mixed, B4_subjective };
enum class EvalComplexity { D1_uni, D2_multi_aligned, D3_multi_conflicting };
enum class PlausiblePref { E1_implausible, E2_moderate, E3_plausible };

struct ItemMetadata {
  std::string item_id;
  std::optional<ContentType> content_type;
  std::optional<ResponseQuality> response_quality;
  std::optional<EvalComplexity> eval_complexity;
  std::optional<PlausiblePref> plausible_pref;
  std::optional<std::set<std::string>> theme_labels;
  std::optional<std::string> value_dimension;
  /// Known correct rating for unambiguous attention-check content.
  std::optional<double> anchor_score;

  bool operator==(const ItemMetadata&) const = default;
};

struct Dataset {
  std::vector<AnnotationRecord> records;
  std::optional<EmbeddingTable> embeddings;
  /// Response-level embeddings keyed by record_id, used for exact-repeat
  /// detection when response text is absent.
  std::optional<EmbeddingTable> response_embeddings;
  std::map<std::string, ItemMetadata> metadata;
  ScaleKind scale_kind = ScaleKind::continuous_0_100;

  std::set<std::string> annotators() const;
  std::set<std::string> items() const;
  /// Indices into `records` for one annotator, in file order.
  std::vector<std::size_t> records_of(const std::string& annotator_id) const;
  const ItemMetadata* meta(const std::string& item_id) const;
};

enum class Format { jsonl, csv };

Format format_from_path(const std::filesystem::path& path);

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct LoadOptions {
  bool strict = false;
};

struct LoadResult {
  Dataset dataset;
  std::size_t rows_read = 0;
  std::vector<RejectedRow> rejected;
};

/// Loads annotation records. Lenient mode collects malformed rows with their
/// line numbers; strict mode throws on the first one. Throws DataError when
/// the file is unreadable or yields zero valid rows.
LoadResult load_records(const std::filesystem::path& path, Format format,
                        const LoadOptions& options = {});
LoadResult parse_records_jsonl(std::istream& in, const LoadOptions& options = {});
LoadResult parse_records_csv(std::istream& in, const LoadOptions& options = {});

/// JSONL rows {"item_id": ..., "vector": [...]} or CSV rows item_id,v0,v1,...
EmbeddingTable load_embeddings(const std::filesystem::path& path);
std::map<std::string, ItemMetadata> load_metadata(const std::filesystem::path& path);

nlohmann::json to_json(const AnnotationRecord& r);
/// Throws DataError naming the offending field.
AnnotationRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ItemMetadata& m);
ItemMetadata metadata_from_json(const nlohmann::json& j);

void write_records_jsonl(std::ostream& out, const std::vector<AnnotationRecord>& records);
void write_metadata_jsonl(std::ostream& out, const std::map<std::string, ItemMetadata>& metadata);

/// Config-echo and summary lines written by the command-line tools; loaders
/// skip them.
bool is_run_marker(const nlohmann::json& j);

/// Field order of the CSV header contract.
const std::vector<std::string>& record_fields();
/// Splits one CSV line with RFC 4180 quoting; embedded newlines are not
/// supported.
std::vector<std::string> split_csv_line(const std::string& line);

struct ValidationReport {
  std::size_t n_records = 0;
  std::size_t n_annotators = 0;
  std::size_t n_items = 0;
  /// (annotator, item) groups with two or more ratings.
  std::size_t n_repeat_groups = 0;
  /// Items presented under two or more distinct framing ids.
  std::size_t n_framing_pairs = 0;
  std::size_t n_sessions = 0;
  /// Fraction of items carrying any framing_id, in percent.
  double framing_coverage_pct = 0.0;
  std::vector<std::string> warnings;

  bool operator==(const ValidationReport&) const = default;
};

ValidationReport validate(const Dataset& dataset);
nlohmann::json to_json(const ValidationReport& report);

}  // namespace prefaudit
