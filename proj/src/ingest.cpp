#include "prefaudit/ingest.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

#include "prefaudit/error.hpp"

namespace prefaudit {

using nlohmann::json;

const char* to_string(ScaleKind kind) {
  switch (kind) {
    case ScaleKind::continuous_0_100: return "continuous_0_100";
    case ScaleKind::likert_5: return "likert_5";
    case ScaleKind::binary_pair: return "binary_pair";
  }
  return "unknown";
}

ScaleKind scale_kind_from_string(const std::string& s) {
  if (s == "continuous_0_100") return ScaleKind::continuous_0_100;
  if (s == "likert_5") return ScaleKind::likert_5;
  if (s == "binary_pair") return ScaleKind::binary_pair;
  throw DataError("unknown scale_kind '" + s + "'");
}

std::pair<double, double> scale_bounds(ScaleKind kind) {
  switch (kind) {
    case ScaleKind::continuous_0_100: return {0.0, 100.0};
    case ScaleKind::likert_5: return {1.0, 5.0};
    case ScaleKind::binary_pair: return {0.0, 1.0};
  }
  return {0.0, 0.0};
}

double to_common_scale(double score, ScaleKind kind) {
  switch (kind) {
    case ScaleKind::continuous_0_100: return score;
    case ScaleKind::likert_5: return (score - 1.0) * 25.0;
    case ScaleKind::binary_pair: return score * 100.0;
  }
  return score;
}

// ---------------------------------------------------------------------------

void EmbeddingTable::insert(const std::string& id, std::vector<double> vec) {
  if (vec.empty()) throw DataError("embedding for '" + id + "' is empty");
  if (dimension_ == 0) dimension_ = vec.size();
  if (vec.size() != dimension_) {
    throw DataError("embedding dimension mismatch for '" + id + "': expected " +
                    std::to_string(dimension_) + ", got " + std::to_string(vec.size()));
  }
  for (double v : vec) {
    if (!std::isfinite(v)) throw DataError("embedding for '" + id + "' contains a non-finite value");
  }
  entries_[id] = std::move(vec);
}

const std::vector<double>* EmbeddingTable::find(const std::string& id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------

std::set<std::string> Dataset::annotators() const {
  std::set<std::string> out;
  for (const auto& r : records) out.insert(r.annotator_id);
  return out;
}

std::set<std::string> Dataset::items() const {
  std::set<std::string> out;
  for (const auto& r : records) out.insert(r.item_id);
  return out;
}

std::vector<std::size_t> Dataset::records_of(const std::string& annotator_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].annotator_id == annotator_id) out.push_back(i);
  }
  return out;
}

const ItemMetadata* Dataset::meta(const std::string& item_id) const {
  auto it = metadata.find(item_id);
  return it == metadata.end() ? nullptr : &it->second;
}

Format format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return Format::csv;
  return Format::jsonl;
}

// ---------------------------------------------------------------------------
// JSON conversion

namespace {

template <typename E, std::size_t N>
struct EnumNames {
  std::array<const char*, N> names;

  const char* name(E e) const { return names[static_cast<std::size_t>(e)]; }
  E parse(const std::string& s, const char* field) const {
    for (std::size_t i = 0; i < N; ++i) {
      if (s == names[i]) return static_cast<E>(i);
    }
    throw DataError(std::string("field '") + field + "': unknown code '" + s + "'");
  }
};

constexpr EnumNames<ContentType, 5> kContentType{
    {"A1_generic", "A2_factual", "A3_subjective", "A4_value_laden", "A5_task_based"}};
constexpr EnumNames<ResponseQuality, 4> kResponseQuality{
    {"B1_good", "B2_bad", "B3_mixed", "B4_subjective"}};
constexpr EnumNames<EvalComplexity, 3> kEvalComplexity{
    {"D1_uni", "D2_multi_aligned", "D3_multi_conflicting"}};
constexpr EnumNames<PlausiblePref, 3> kPlausiblePref{
    {"E1_implausible", "E2_moderate", "E3_plausible"}};

const json* field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || it->is_null()) return nullptr;
  return &*it;
}

std::string required_string(const json& j, const char* name) {
  const json* v = field(j, name);
  if (!v) throw DataError(std::string("missing required field '") + name + "'");
  if (!v->is_string()) throw DataError(std::string("field '") + name + "' must be a string");
  return v->get<std::string>();
}

std::optional<std::string> optional_string(const json& j, const char* name) {
  const json* v = field(j, name);
  if (!v) return std::nullopt;
  if (!v->is_string()) throw DataError(std::string("field '") + name + "' must be a string");
  return v->get<std::string>();
}

template <typename T>
void put(json& j, const char* name, const std::optional<T>& v) {
  if (v) j[name] = *v;
}

}  // namespace

json to_json(const AnnotationRecord& r) {
  json j;
  j["record_id"] = r.record_id;
  j["annotator_id"] = r.annotator_id;
  j["item_id"] = r.item_id;
  j["prompt_text"] = r.prompt_text;
  put(j, "response_text", r.response_text);
  put(j, "model_id", r.model_id);
  if (r.scale_kind == ScaleKind::binary_pair) {
    j["score"] = r.score == 0.0 ? "A" : "B";
  } else {
    j["score"] = r.score;
  }
  j["scale_kind"] = to_string(r.scale_kind);
  put(j, "session_id", r.session_id);
  put(j, "timestamp", r.timestamp);
  put(j, "position_index", r.position_index);
  put(j, "framing_id", r.framing_id);
  put(j, "condition_tag", r.condition_tag);
  return j;
}

AnnotationRecord record_from_json(const json& j) {
  if (!j.is_object()) throw DataError("record is not a JSON object");
  AnnotationRecord r;
  r.record_id = required_string(j, "record_id");
  r.annotator_id = required_string(j, "annotator_id");
  r.item_id = required_string(j, "item_id");
  r.prompt_text = required_string(j, "prompt_text");
  r.response_text = optional_string(j, "response_text");
  r.model_id = optional_string(j, "model_id");
  r.scale_kind = scale_kind_from_string(required_string(j, "scale_kind"));

  const json* score = field(j, "score");
  if (!score) throw DataError("missing required field 'score'");
  if (r.scale_kind == ScaleKind::binary_pair) {
    if (!score->is_string()) throw DataError("field 'score' must be \"A\" or \"B\" on binary_pair");
    const auto s = score->get<std::string>();
    if (s == "A") {
      r.score = 0.0;
    } else if (s == "B") {
      r.score = 1.0;
    } else {
      throw DataError("field 'score' must be \"A\" or \"B\" on binary_pair, got '" + s + "'");
    }
  } else {
    if (!score->is_number()) throw DataError("field 'score' must be numeric");
    r.score = score->get<double>();
    const auto [lo, hi] = scale_bounds(r.scale_kind);
    if (!std::isfinite(r.score) || r.score < lo || r.score > hi) {
      std::ostringstream msg;
      msg << "score " << r.score << " outside [" << lo << ", " << hi << "] for "
          << to_string(r.scale_kind);
      throw DataError(msg.str());
    }
  }

  r.session_id = optional_string(j, "session_id");
  if (const json* v = field(j, "timestamp")) {
    if (!v->is_number_integer()) throw DataError("field 'timestamp' must be an integer");
    r.timestamp = v->get<std::int64_t>();
  }
  if (const json* v = field(j, "position_index")) {
    if (!v->is_number_integer() || v->get<std::int64_t>() < 0) {
      throw DataError("field 'position_index' must be a nonnegative integer");
    }
    r.position_index = v->get<std::uint32_t>();
  }
  r.framing_id = optional_string(j, "framing_id");
  r.condition_tag = optional_string(j, "condition_tag");
  return r;
}

json to_json(const ItemMetadata& m) {
  json j;
  j["item_id"] = m.item_id;
  if (m.content_type) j["content_type"] = kContentType.name(*m.content_type);
  if (m.response_quality) j["response_quality"] = kResponseQuality.name(*m.response_quality);
  if (m.eval_complexity) j["eval_complexity"] = kEvalComplexity.name(*m.eval_complexity);
  if (m.plausible_pref) j["plausible_pref"] = kPlausiblePref.name(*m.plausible_pref);
  if (m.theme_labels) j["theme_labels"] = *m.theme_labels;
  put(j, "value_dimension", m.value_dimension);
  put(j, "anchor_score", m.anchor_score);
  return j;
}

ItemMetadata metadata_from_json(const json& j) {
  if (!j.is_object()) throw DataError("metadata row is not a JSON object");
  ItemMetadata m;
  m.item_id = required_string(j, "item_id");
  if (auto s = optional_string(j, "content_type")) m.content_type = kContentType.parse(*s, "content_type");
  if (auto s = optional_string(j, "response_quality")) {
    m.response_quality = kResponseQuality.parse(*s, "response_quality");
  }
  if (auto s = optional_string(j, "eval_complexity")) {
    m.eval_complexity = kEvalComplexity.parse(*s, "eval_complexity");
  }
  if (auto s = optional_string(j, "plausible_pref")) {
    m.plausible_pref = kPlausiblePref.parse(*s, "plausible_pref");
  }
  if (const json* v = field(j, "theme_labels")) {
    if (!v->is_array()) throw DataError("field 'theme_labels' must be an array of strings");
    std::set<std::string> labels;
    for (const auto& e : *v) {
      if (!e.is_string()) throw DataError("field 'theme_labels' must be an array of strings");
      labels.insert(e.get<std::string>());
    }
    m.theme_labels = std::move(labels);
  }
  m.value_dimension = optional_string(j, "value_dimension");
  if (const json* v = field(j, "anchor_score")) {
    if (!v->is_number()) throw DataError("field 'anchor_score' must be numeric");
    m.anchor_score = v->get<double>();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Loading

namespace {

void accept_row(LoadResult& result, AnnotationRecord record, std::size_t line,
                const LoadOptions& options) {
  if (result.dataset.records.empty()) {
    result.dataset.scale_kind = record.scale_kind;
  } else if (record.scale_kind != result.dataset.scale_kind) {
    const std::string reason = std::string("scale_kind ") + to_string(record.scale_kind) +
                               " differs from dataset scale " +
                               to_string(result.dataset.scale_kind);
    if (options.strict) throw DataError("line " + std::to_string(line) + ": " + reason);
    result.rejected.push_back({line, reason});
    return;
  }
  result.dataset.records.push_back(std::move(record));
}

void reject(LoadResult& result, std::size_t line, const std::string& reason,
            const LoadOptions& options) {
  if (options.strict) throw DataError("line " + std::to_string(line) + ": " + reason);
  result.rejected.push_back({line, reason});
}

}  // namespace

bool is_run_marker(const json& j) {
  return j.is_object() && (j.contains("_config") || j.contains("_summary"));
}

namespace {

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

LoadResult parse_records_jsonl(std::istream& in, const LoadOptions& options) {
  LoadResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    try {
      const json j = json::parse(line);
      if (is_run_marker(j)) continue;
      ++result.rows_read;
      accept_row(result, record_from_json(j), line_no, options);
    } catch (const json::exception& e) {
      ++result.rows_read;
      reject(result, line_no, std::string("invalid JSON: ") + e.what(), options);
    } catch (const DataError& e) {
      if (options.strict) throw DataError("line " + std::to_string(line_no) + ": " + e.what());
      result.rejected.push_back({line_no, e.what()});
    }
  }
  return result;
}

const std::vector<std::string>& record_fields() {
  static const std::vector<std::string> fields{
      "record_id",  "annotator_id", "item_id",   "prompt_text",    "response_text",
      "model_id",   "score",        "scale_kind", "session_id",    "timestamp",
      "position_index", "framing_id", "condition_tag"};
  return fields;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  if (quoted) throw DataError("unterminated quoted CSV field");
  out.push_back(std::move(cell));
  return out;
}

namespace {

// Builds the JSON form of a CSV row so both formats share one validator.
json csv_row_to_json(const std::vector<std::string>& header, const std::vector<std::string>& cells) {
  json j = json::object();
  std::string scale;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "scale_kind") scale = cells[i];
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& name = header[i];
    const std::string& v = cells[i];
    if (v.empty()) continue;
    if (name == "score" && scale != "binary_pair") {
      std::size_t used = 0;
      double d = 0.0;
      try {
        d = std::stod(v, &used);
      } catch (const std::exception&) {
        throw DataError("field 'score' is not numeric: '" + v + "'");
      }
      if (used != v.size()) throw DataError("field 'score' is not numeric: '" + v + "'");
      j[name] = d;
    } else if (name == "timestamp" || name == "position_index") {
      std::size_t used = 0;
      long long n = 0;
      try {
        n = std::stoll(v, &used);
      } catch (const std::exception&) {
        throw DataError("field '" + name + "' is not an integer: '" + v + "'");
      }
      if (used != v.size()) throw DataError("field '" + name + "' is not an integer: '" + v + "'");
      j[name] = n;
    } else {
      j[name] = v;
    }
  }
  return j;
}

}  // namespace

LoadResult parse_records_csv(std::istream& in, const LoadOptions& options) {
  LoadResult result;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (!have_header && std::getline(in, line)) {
    ++line_no;
    have_header = !blank(line) && line[0] != '#';
  }
  if (!have_header) return result;
  const auto header = split_csv_line(line);
  const auto& known = record_fields();
  for (const auto& h : header) {
    if (std::find(known.begin(), known.end(), h) == known.end()) {
      throw DataError("CSV header has unknown column '" + h + "'");
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line) || line[0] == '#') continue;
    ++result.rows_read;
    try {
      const auto cells = split_csv_line(line);
      if (cells.size() != header.size()) {
        throw DataError("expected " + std::to_string(header.size()) + " columns, got " +
                        std::to_string(cells.size()));
      }
      accept_row(result, record_from_json(csv_row_to_json(header, cells)), line_no, options);
    } catch (const DataError& e) {
      if (options.strict) throw DataError("line " + std::to_string(line_no) + ": " + e.what());
      result.rejected.push_back({line_no, e.what()});
    }
  }
  return result;
}

LoadResult load_records(const std::filesystem::path& path, Format format,
                        const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  LoadResult result =
      format == Format::csv ? parse_records_csv(in, options) : parse_records_jsonl(in, options);
  if (result.dataset.records.empty()) {
    throw DataError("'" + path.string() + "' contains no valid records (" +
                    std::to_string(result.rejected.size()) + " rejected)");
  }
  return result;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  const bool csv = format_from_path(path) == Format::csv;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    std::string id;
    std::vector<double> vec;
    if (csv) {
      auto cells = split_csv_line(line);
      id = cells.at(0);
      for (std::size_t i = 1; i < cells.size(); ++i) {
        try {
          vec.push_back(std::stod(cells[i]));
        } catch (const std::exception&) {
          throw DataError("line " + std::to_string(line_no) + ": non-numeric entry for '" + id + "'");
        }
      }
    } else {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw DataError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
      }
      id = required_string(j, "item_id");
      const json* v = field(j, "vector");
      if (!v || !v->is_array()) throw DataError("line " + std::to_string(line_no) + ": missing 'vector'");
      for (const auto& e : *v) {
        // JSON has no literal for non-finite numbers; null and strings such
        // as "NaN" are how exports spell them.
        if (e.is_number()) {
          vec.push_back(e.get<double>());
        } else {
          throw DataError("embedding for '" + id + "' contains a non-finite value");
        }
      }
    }
    table.insert(id, std::move(vec));
  }
  return table;
}

std::map<std::string, ItemMetadata> load_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::map<std::string, ItemMetadata> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    try {
      const json j = json::parse(line);
      if (is_run_marker(j)) continue;
      auto m = metadata_from_json(j);
      out[m.item_id] = std::move(m);
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_records_jsonl(std::ostream& out, const std::vector<AnnotationRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

void write_metadata_jsonl(std::ostream& out, const std::map<std::string, ItemMetadata>& metadata) {
  for (const auto& [id, m] : metadata) out << to_json(m).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Validation

ValidationReport validate(const Dataset& dataset) {
  ValidationReport rep;
  rep.n_records = dataset.records.size();
  rep.n_annotators = dataset.annotators().size();
  const auto items = dataset.items();
  rep.n_items = items.size();

  std::map<std::pair<std::string, std::string>, std::size_t> group_sizes;
  std::map<std::string, std::set<std::string>> framings_by_item;
  std::set<std::pair<std::string, std::string>> sessions;
  std::map<std::pair<std::string, std::string>, std::int64_t> last_ts;
  bool any_time_info = false;
  bool any_order_tag = false;
  bool timestamp_regression = false;
  for (const auto& r : dataset.records) {
    ++group_sizes[{r.annotator_id, r.item_id}];
    if (r.framing_id) framings_by_item[r.item_id].insert(*r.framing_id);
    if (r.session_id) sessions.insert({r.annotator_id, *r.session_id});
    if (r.session_id || r.timestamp) any_time_info = true;
    if (r.condition_tag && (*r.condition_tag == "AB" || *r.condition_tag == "BA")) {
      any_order_tag = true;
    }
    if (r.timestamp) {
      const auto key = std::make_pair(r.annotator_id, r.session_id.value_or(""));
      auto it = last_ts.find(key);
      if (it != last_ts.end() && *r.timestamp < it->second) timestamp_regression = true;
      last_ts[key] = *r.timestamp;
    }
  }
  for (const auto& [key, n] : group_sizes) {
    if (n >= 2) ++rep.n_repeat_groups;
  }
  for (const auto& [item, framings] : framings_by_item) {
    if (framings.size() >= 2) ++rep.n_framing_pairs;
  }
  rep.n_sessions = sessions.size();
  rep.framing_coverage_pct =
      rep.n_items == 0 ? 0.0
                       : 100.0 * static_cast<double>(framings_by_item.size()) /
                             static_cast<double>(rep.n_items);

  if (rep.n_repeat_groups == 0) {
    rep.warnings.push_back("no repeated (annotator, item) ratings: temporal diagnostics unavailable");
  } else if (!any_time_info) {
    rep.warnings.push_back(
        "no session_id or timestamp: repeats cannot be placed in time, temporal diagnostics "
        "unavailable");
  }
  if (rep.n_framing_pairs == 0) {
    rep.warnings.push_back(
        "no item carries two framing variants: within-item framing diagnostics unavailable "
        "(supply a pair file for cross-item framing pairs)");
  }
  if (dataset.scale_kind == ScaleKind::binary_pair && !any_order_tag && !dataset.records.empty()) {
    rep.warnings.push_back("no AB/BA condition tags: order diagnostics unavailable");
  }
  bool any_theme = false;
  bool any_anchor = false;
  for (const auto& [id, m] : dataset.metadata) {
    any_theme = any_theme || (m.theme_labels && !m.theme_labels->empty()) || m.value_dimension;
    any_anchor = any_anchor || m.anchor_score.has_value();
  }
  if (!any_theme) {
    rep.warnings.push_back("no theme labels: inconsistency ratio and cross-item diagnostics unavailable");
  }
  if (!any_anchor) rep.warnings.push_back("no anchor items: artifact rate unavailable");
  if (!dataset.embeddings) rep.warnings.push_back("no embeddings: similar-pair discovery unavailable");
  if (timestamp_regression) {
    rep.warnings.push_back("timestamps decrease within a session for some annotator");
  }
  if (dataset.embeddings) {
    std::size_t missing = 0;
    for (const auto& item : items) missing += dataset.embeddings->contains(item) ? 0 : 1;
    if (missing > 0) {
      rep.warnings.push_back(std::to_string(missing) + " rated items have no embedding");
    }
  }
  return rep;
}

json to_json(const ValidationReport& report) {
  return json{{"n_records", report.n_records},
              {"n_annotators", report.n_annotators},
              {"n_items", report.n_items},
              {"n_repeat_groups", report.n_repeat_groups},
              {"n_framing_pairs", report.n_framing_pairs},
              {"n_sessions", report.n_sessions},
              {"framing_coverage_pct", report.framing_coverage_pct},
              {"warnings", report.warnings}};
}

}  // namespace prefaudit
