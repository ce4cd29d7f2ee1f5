#include "prefaudit/pairing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "prefaudit/error.hpp"

namespace prefaudit::pairing {

using nlohmann::json;

const char* to_string(PairKind kind) {
  switch (kind) {
    case PairKind::identical: return "identical";
    case PairKind::equivalent: return "equivalent";
    case PairKind::directional: return "directional";
  }
  return "unknown";
}

const char* to_string(Direction d) {
  switch (d) {
    case Direction::a_more: return "a_more";
    case Direction::b_more: return "b_more";
    case Direction::equal: return "equal";
  }
  return "unknown";
}

PairKind pair_kind_from_string(const std::string& s) {
  if (s == "identical") return PairKind::identical;
  if (s == "equivalent") return PairKind::equivalent;
  if (s == "directional") return PairKind::directional;
  throw DataError("unknown pair kind '" + s + "'");
}

Direction direction_from_string(const std::string& s) {
  if (s == "a_more") return Direction::a_more;
  if (s == "b_more") return Direction::b_more;
  if (s == "equal") return Direction::equal;
  throw DataError("unknown direction '" + s + "'");
}

PromptPair make_pair(std::string item_a, std::string item_b, double similarity, PairKind kind,
                     std::optional<Direction> expected) {
  if (kind != PairKind::directional && item_b < item_a) std::swap(item_a, item_b);
  if (kind == PairKind::equivalent && !expected) expected = Direction::equal;
  if (kind == PairKind::directional && (!expected || *expected == Direction::equal)) {
    throw DataError("directional pair " + item_a + "|" + item_b + " needs a_more or b_more");
  }
  if (kind == PairKind::identical) expected.reset();
  PromptPair p;
  p.pair_id = item_a + "|" + item_b;
  p.item_a = std::move(item_a);
  p.item_b = std::move(item_b);
  p.similarity = similarity;
  p.kind = kind;
  p.expected_direction = expected;
  return p;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DataError("cosine_similarity: vectors differ in length");
  if (u.empty()) throw DataError("cosine_similarity: empty vectors");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw DataError("cosine_similarity: zero vector");
  // Computing the product of norms symmetrically keeps sim(u,v) == sim(v,u)
  // bit for bit.
  return std::clamp(dot / std::sqrt(nu * nv), -1.0, 1.0);
}

std::vector<PromptPair> find_similar_pairs(const Dataset& dataset, double sim_threshold,
                                           bool same_annotator) {
  if (!(sim_threshold >= -1.0 && sim_threshold <= 1.0)) {
    throw ConfigError("similarity threshold must lie in [-1, 1]");
  }
  if (!dataset.embeddings) throw DataError("find_similar_pairs: dataset has no embeddings");
  const auto& table = *dataset.embeddings;

  std::vector<std::string> items;
  for (const auto& id : dataset.items()) {
    if (table.contains(id)) items.push_back(id);
  }
  if (items.size() > kMaxExactItems) {
    throw DataError("find_similar_pairs: " + std::to_string(items.size()) +
                    " items exceed the exact all-pairs limit; supply a candidate pair file");
  }

  std::map<std::string, std::set<std::string>> raters;
  if (same_annotator) {
    for (const auto& r : dataset.records) raters[r.item_id].insert(r.annotator_id);
  }
  auto share_annotator = [&](const std::string& a, const std::string& b) {
    const auto& ra = raters[a];
    const auto& rb = raters[b];
    auto ia = ra.begin();
    auto ib = rb.begin();
    while (ia != ra.end() && ib != rb.end()) {
      if (*ia == *ib) return true;
      if (*ia < *ib) ++ia; else ++ib;
    }
    return false;
  };

  std::vector<PromptPair> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& u = *table.find(items[i]);
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      const double sim = cosine_similarity(u, *table.find(items[j]));
      if (sim < sim_threshold) continue;
      if (same_annotator && !share_annotator(items[i], items[j])) continue;
      const auto kind = sim >= kIdenticalSimilarity ? PairKind::identical : PairKind::equivalent;
      out.push_back(make_pair(items[i], items[j], sim, kind));
    }
  }
  return out;
}

std::vector<PromptPair> find_repeat_pairs(const Dataset& dataset) {
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (const auto& r : dataset.records) ++counts[{r.item_id, r.annotator_id}];
  std::set<std::string> repeated;
  for (const auto& [key, n] : counts) {
    if (n >= 2) repeated.insert(key.first);
  }
  std::vector<PromptPair> out;
  for (const auto& item : repeated) out.push_back(make_pair(item, item, 1.0, PairKind::identical));
  return out;
}

FlagResult flag_inconsistencies(const Dataset& dataset, std::span<const PromptPair> pairs,
                                double delta_threshold) {
  if (!(delta_threshold >= 0.0)) throw ConfigError("delta threshold must be nonnegative");
  // (item, annotator) -> record indices
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> index;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& r = dataset.records[i];
    index[{r.item_id, r.annotator_id}].push_back(i);
  }
  std::map<std::string, std::set<std::string>> raters;
  for (const auto& r : dataset.records) raters[r.item_id].insert(r.annotator_id);

  FlagResult result;
  std::set<std::string> compared, flagged;
  auto consider = [&](const PromptPair& pair, const std::string& annotator, std::size_t ia,
                      std::size_t ib) {
    const auto& ra = dataset.records[ia];
    const auto& rb = dataset.records[ib];
    const double sa = to_common_scale(ra.score, ra.scale_kind);
    const double sb = to_common_scale(rb.score, rb.scale_kind);
    const double delta = std::fabs(sa - sb);
    ++result.summary.n_comparisons;
    compared.insert(annotator);
    if (delta >= delta_threshold) {
      flagged.insert(annotator);
      result.flags.push_back(
          {annotator, pair, ra.record_id, rb.record_id, sa, sb, delta, delta_threshold});
    }
  };

  for (const auto& pair : pairs) {
    auto ra_it = raters.find(pair.item_a);
    if (ra_it == raters.end()) continue;
    for (const auto& annotator : ra_it->second) {
      const auto a_it = index.find({pair.item_a, annotator});
      if (pair.item_a == pair.item_b) {
        const auto& idx = a_it->second;
        for (std::size_t x = 0; x < idx.size(); ++x) {
          for (std::size_t y = x + 1; y < idx.size(); ++y) consider(pair, annotator, idx[x], idx[y]);
        }
        continue;
      }
      const auto b_it = index.find({pair.item_b, annotator});
      if (b_it == index.end()) continue;
      for (std::size_t ia : a_it->second) {
        for (std::size_t ib : b_it->second) consider(pair, annotator, ia, ib);
      }
    }
  }

  auto& s = result.summary;
  s.threshold = delta_threshold;
  s.n_inconsistent_pairs = result.flags.size();
  s.pct_inconsistent = s.n_comparisons == 0 ? 0.0
                                            : 100.0 * static_cast<double>(s.n_inconsistent_pairs) /
                                                  static_cast<double>(s.n_comparisons);
  s.n_annotators_compared = compared.size();
  s.n_annotators_flagged = flagged.size();
  s.pct_annotators_flagged =
      compared.empty() ? 0.0
                       : 100.0 * static_cast<double>(flagged.size()) /
                             static_cast<double>(compared.size());
  if (!result.flags.empty()) {
    double sum = 0.0;
    for (const auto& f : result.flags) sum += f.delta;
    s.mean_delta = sum / static_cast<double>(result.flags.size());
  }
  return result;
}

std::vector<LadderRow> filter_ladder(std::span<const InconsistencyFlag> flags,
                                     std::span<const LadderStage> stages) {
  std::vector<const InconsistencyFlag*> alive;
  for (const auto& f : flags) alive.push_back(&f);
  std::vector<LadderRow> rows{{"flagged", alive.size()}};
  for (const auto& stage : stages) {
    std::erase_if(alive, [&](const InconsistencyFlag* f) { return !stage.keep(*f); });
    rows.push_back({stage.name, alive.size()});
  }
  return rows;
}

std::vector<LadderStage> default_ladder(const Dataset& dataset) {
  auto by_id = std::make_shared<std::map<std::string, const AnnotationRecord*>>();
  for (const auto& r : dataset.records) (*by_id)[r.record_id] = &r;
  auto lookup = [by_id](const std::string& id) -> const AnnotationRecord* {
    auto it = by_id->find(id);
    return it == by_id->end() ? nullptr : it->second;
  };
  const EmbeddingTable* responses =
      dataset.response_embeddings ? &*dataset.response_embeddings : nullptr;

  std::vector<LadderStage> stages;
  stages.push_back({"identical_prompts", [lookup](const InconsistencyFlag& f) {
                      if (f.pair.kind == PairKind::identical) return true;
                      const auto* a = lookup(f.record_a);
                      const auto* b = lookup(f.record_b);
                      return a && b && a->prompt_text == b->prompt_text;
                    }});
  stages.push_back({"identical_responses", [lookup, responses](const InconsistencyFlag& f) {
                      const auto* a = lookup(f.record_a);
                      const auto* b = lookup(f.record_b);
                      if (!a || !b) return false;
                      if (a->response_text && b->response_text) {
                        return *a->response_text == *b->response_text;
                      }
                      if (!responses) return false;
                      const auto* ea = responses->find(a->record_id);
                      const auto* eb = responses->find(b->record_id);
                      return ea && eb &&
                             cosine_similarity(*ea, *eb) >= kIdenticalResponseSimilarity;
                    }});
  stages.push_back({"same_model", [lookup](const InconsistencyFlag& f) {
                      const auto* a = lookup(f.record_a);
                      const auto* b = lookup(f.record_b);
                      return a && b && a->model_id && b->model_id && *a->model_id == *b->model_id;
                    }});
  return stages;
}

// ---------------------------------------------------------------------------

json to_json(const PromptPair& p) {
  json j{{"pair_id", p.pair_id},
         {"item_a", p.item_a},
         {"item_b", p.item_b},
         {"similarity", p.similarity},
         {"kind", to_string(p.kind)}};
  if (p.expected_direction) j["expected_direction"] = to_string(*p.expected_direction);
  if (p.rationale_tag) j["rationale_tag"] = *p.rationale_tag;
  return j;
}

PromptPair prompt_pair_from_json(const json& j) {
  try {
    std::optional<Direction> dir;
    if (j.contains("expected_direction") && !j["expected_direction"].is_null()) {
      dir = direction_from_string(j.at("expected_direction").get<std::string>());
    }
    const double sim = j.contains("similarity") ? j.at("similarity").get<double>() : 1.0;
    auto p = make_pair(j.at("item_a").get<std::string>(), j.at("item_b").get<std::string>(), sim,
                       pair_kind_from_string(j.at("kind").get<std::string>()), dir);
    if (j.contains("pair_id")) p.pair_id = j.at("pair_id").get<std::string>();
    if (j.contains("rationale_tag")) p.rationale_tag = j.at("rationale_tag").get<std::string>();
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed pair: ") + e.what());
  }
}

json to_json(const InconsistencyFlag& f) {
  return json{{"annotator_id", f.annotator_id}, {"pair", to_json(f.pair)},
              {"record_a", f.record_a},         {"record_b", f.record_b},
              {"score_a", f.score_a},           {"score_b", f.score_b},
              {"delta", f.delta},               {"threshold_used", f.threshold_used}};
}

InconsistencyFlag flag_from_json(const json& j) {
  try {
    InconsistencyFlag f;
    f.annotator_id = j.at("annotator_id").get<std::string>();
    f.pair = prompt_pair_from_json(j.at("pair"));
    f.record_a = j.value("record_a", "");
    f.record_b = j.value("record_b", "");
    f.score_a = j.at("score_a").get<double>();
    f.score_b = j.at("score_b").get<double>();
    f.delta = std::fabs(f.score_a - f.score_b);
    f.threshold_used = j.value("threshold_used", 0.0);
    return f;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed flag: ") + e.what());
  }
}

json to_json(const PrevalenceSummary& s) {
  json j{{"n_comparisons", s.n_comparisons},
         {"n_inconsistent_pairs", s.n_inconsistent_pairs},
         {"pct_inconsistent", s.pct_inconsistent},
         {"n_annotators_compared", s.n_annotators_compared},
         {"n_annotators_flagged", s.n_annotators_flagged},
         {"pct_annotators_flagged", s.pct_annotators_flagged},
         {"threshold", s.threshold}};
  j["mean_delta"] = s.mean_delta ? json(*s.mean_delta) : json(nullptr);
  return j;
}

std::vector<PromptPair> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::vector<PromptPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (is_run_marker(j)) continue;
      out.push_back(prompt_pair_from_json(j));
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace prefaudit::pairing
