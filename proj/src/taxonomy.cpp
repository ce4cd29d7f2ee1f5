#include "prefaudit/taxonomy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

#include "prefaudit/error.hpp"

namespace prefaudit::taxonomy {

using nlohmann::json;

const char* to_string(PairCategory c) {
  switch (c) {
    case PairCategory::consistent: return "consistent";
    case PairCategory::marginal: return "marginal";
    case PairCategory::excessive: return "excessive";
    case PairCategory::violation: return "violation";
  }
  return "unknown";
}

const char* to_string(Scheme s) {
  return s == Scheme::equivalent_scheme ? "equivalent_scheme" : "directional_scheme";
}

const char* to_string(Label l) {
  switch (l) {
    case Label::non_attitude: return "non_attitude";
    case Label::constructed_preference: return "constructed_preference";
    case Label::measurement_artifact: return "measurement_artifact";
    case Label::genuine_uncrystallized: return "genuine_uncrystallized";
  }
  return "unknown";
}

const char* to_string(Routing r) {
  switch (r) {
    case Routing::filter_downweight: return "filter_downweight";
    case Routing::elicit_carefully: return "elicit_carefully";
    case Routing::fix_instrument: return "fix_instrument";
    case Routing::use_as_signal: return "use_as_signal";
  }
  return "unknown";
}

Label label_from_string(const std::string& s) {
  for (auto l : {Label::non_attitude, Label::constructed_preference, Label::measurement_artifact,
                 Label::genuine_uncrystallized}) {
    if (s == to_string(l)) return l;
  }
  throw DataError("unknown taxonomy label '" + s + "'");
}

Routing routing_from_string(const std::string& s) {
  for (auto r : {Routing::filter_downweight, Routing::elicit_carefully, Routing::fix_instrument,
                 Routing::use_as_signal}) {
    if (s == to_string(r)) return r;
  }
  throw DataError("unknown routing '" + s + "'");
}

PairClassification classify_equivalent_pair(double score_a, double score_b,
                                            const PairThresholds& t) {
  PairClassification pc;
  pc.basis = Scheme::equivalent_scheme;
  pc.delta = std::fabs(score_a - score_b);
  if (pc.delta <= t.consistent_max) {
    pc.category = PairCategory::consistent;
  } else if (pc.delta <= t.marginal_max) {
    pc.category = PairCategory::marginal;
  } else {
    pc.category = PairCategory::excessive;
  }
  return pc;
}

PairClassification classify_directional_pair(double score_a, double score_b,
                                             pairing::Direction expected,
                                             const PairThresholds& t) {
  if (expected == pairing::Direction::equal) {
    throw ConfigError("directional classification needs a_more or b_more");
  }
  PairClassification pc;
  pc.basis = Scheme::directional_scheme;
  pc.delta = std::fabs(score_a - score_b);
  const double margin = expected == pairing::Direction::b_more ? score_b - score_a : score_a - score_b;
  if (margin > t.consistent_max) {
    pc.category = PairCategory::consistent;
  } else if (margin < -t.consistent_max) {
    pc.category = PairCategory::violation;
  } else {
    pc.category = PairCategory::marginal;
  }
  return pc;
}

PairClassification classify_pair(const pairing::InconsistencyFlag& flag, const PairThresholds& t) {
  if (flag.pair.kind == pairing::PairKind::directional && flag.pair.expected_direction) {
    return classify_directional_pair(flag.score_a, flag.score_b, *flag.pair.expected_direction, t);
  }
  return classify_equivalent_pair(flag.score_a, flag.score_b, t);
}

std::vector<std::string> ScorePattern::codes() const {
  std::vector<std::string> out;
  if (c1_extreme_to_extreme) out.emplace_back("C1");
  if (c2_extreme_to_middle) out.emplace_back("C2");
  if (c3_middle_to_middle) out.emplace_back("C3");
  if (c4_same_side) out.emplace_back("C4");
  return out;
}

namespace {

bool extreme(double s) { return s <= 20.0 || s >= 80.0; }
bool moderate(double s) { return s > 20.0 && s < 80.0; }

}  // namespace

ScorePattern score_pattern(double a, double b) {
  ScorePattern p;
  p.c1_extreme_to_extreme = (a <= 20.0 && b >= 80.0) || (b <= 20.0 && a >= 80.0);
  p.c2_extreme_to_middle = (extreme(a) && moderate(b)) || (extreme(b) && moderate(a));
  p.c3_middle_to_middle = moderate(a) && moderate(b);
  p.c4_same_side = ((a > 50.0 && b > 50.0) || (a < 50.0 && b < 50.0)) && std::fabs(a - b) >= 15.0;
  return p;
}

TaxonomyLabel classify_flag(const pairing::InconsistencyFlag& flag, const ItemMetadata* metadata,
                            const PairClassification& pair_class, const ScorePattern& pattern,
                            const ClassifyConfig& config) {
  TaxonomyLabel out;
  out.annotator_id = flag.annotator_id;
  out.pair_id = flag.pair.pair_id;
  out.record_a = flag.record_a;
  out.record_b = flag.record_b;
  out.delta = std::fabs(flag.score_a - flag.score_b);
  out.pair_class = pair_class;

  auto& trace = out.rule_trace;
  {
    std::string codes;
    for (const auto& c : pattern.codes()) codes += (codes.empty() ? "" : ",") + c;
    trace.push_back("pattern:" + (codes.empty() ? std::string("none") : codes));
    trace.push_back(std::string("pair:") + to_string(pair_class.category));
  }

  static const ItemMetadata kNoMetadata{};
  const ItemMetadata& m = metadata ? *metadata : kNoMetadata;
  const double hi = std::max(flag.score_a, flag.score_b);
  const auto content = m.content_type;
  auto content_in = [&](std::initializer_list<ContentType> set) {
    return content && std::find(set.begin(), set.end(), *content) != set.end();
  };

  auto decide = [&](Label l, std::string rule) {
    out.label = l;
    trace.push_back(std::move(rule));
    return out;
  };

  if (m.response_quality == ResponseQuality::B2_bad && hi > config.artifact_floor) {
    return decide(Label::measurement_artifact, "rule1:bad_response_scored_above_floor");
  }
  if (content_in({ContentType::A1_generic, ContentType::A2_factual}) &&
      m.plausible_pref == PlausiblePref::E1_implausible) {
    return decide(Label::non_attitude, "rule2:generic_or_factual_without_plausible_preference");
  }
  if (pair_class.category == PairCategory::violation) {
    return decide(Label::non_attitude, "rule3:direction_violation");
  }
  if (pair_class.category == PairCategory::excessive) {
    return decide(Label::constructed_preference, "rule4:excessive_framing_sensitivity");
  }
  if (content_in({ContentType::A3_subjective, ContentType::A4_value_laden,
                  ContentType::A5_task_based}) &&
      m.eval_complexity == EvalComplexity::D3_multi_conflicting) {
    return decide(Label::constructed_preference, "rule4:conflicting_evaluation_criteria");
  }
  const bool some_moderate = moderate(flag.score_a) || moderate(flag.score_b);
  if (content == ContentType::A4_value_laden && m.plausible_pref == PlausiblePref::E3_plausible &&
      some_moderate && out.delta <= config.genuine_max_delta) {
    return decide(Label::genuine_uncrystallized, "rule5:value_laden_moderate_instability");
  }
  return decide(Label::constructed_preference, "rule6:fallback");
}

std::vector<TaxonomyLabel> classify_flags(std::span<const pairing::InconsistencyFlag> flags,
                                          const Dataset& dataset, const ClassifyConfig& config) {
  std::vector<TaxonomyLabel> out;
  out.reserve(flags.size());
  for (const auto& f : flags) {
    std::optional<ItemMetadata> merged;
    const auto* ma = dataset.meta(f.pair.item_a);
    const auto* mb = dataset.meta(f.pair.item_b);
    if (ma || mb) {
      merged = ma ? *ma : *mb;
      if (ma && mb) {
        if (!merged->content_type) merged->content_type = mb->content_type;
        if (!merged->response_quality) merged->response_quality = mb->response_quality;
        if (!merged->eval_complexity) merged->eval_complexity = mb->eval_complexity;
        if (!merged->plausible_pref) merged->plausible_pref = mb->plausible_pref;
      }
    }
    out.push_back(classify_flag(f, merged ? &*merged : nullptr, classify_pair(f, config.pair),
                                score_pattern(f.score_a, f.score_b), config));
  }
  return out;
}

RoutingDecision decision_procedure(const diagnostics::ConsistencyProfile& p,
                                   const RoutingThresholds& t) {
  if (!p.temp && !p.frame && !p.order && !p.cross && !p.anchor_failure_rate) {
    throw InsufficientSupport("decision_procedure: annotator '" + p.annotator_id +
                              "' has no diagnostic components");
  }
  RoutingDecision d;
  d.annotator_id = p.annotator_id;
  auto fmt = [](const char* name, double v, const char* op, double thr) {
    std::ostringstream s;
    s << name << '=' << v << ' ' << op << ' ' << thr;
    return s.str();
  };
  if (p.temp && *p.temp < t.t_temp) {
    d.routing = Routing::filter_downweight;
    d.reason = fmt("temp", *p.temp, "<", t.t_temp);
  } else if (p.frame && *p.frame < t.t_frame) {
    d.routing = Routing::elicit_carefully;
    d.reason = fmt("frame", *p.frame, "<", t.t_frame);
  } else if (p.order && *p.order < t.t_order) {
    d.routing = Routing::fix_instrument;
    d.reason = fmt("order", *p.order, "<", t.t_order);
  } else if (p.anchor_failure_rate && *p.anchor_failure_rate > t.t_artifact) {
    d.routing = Routing::fix_instrument;
    d.reason = fmt("anchor_failure_rate", *p.anchor_failure_rate, ">", t.t_artifact);
  } else {
    d.routing = Routing::use_as_signal;
    d.reason = "all diagnostics pass";
  }
  return d;
}

std::vector<SummaryRow> classification_summary(std::span<const TaxonomyLabel> labels) {
  std::map<Label, std::pair<std::size_t, double>> acc;
  for (const auto& l : labels) {
    auto& [n, sum] = acc[l.label];
    ++n;
    sum += l.delta;
  }
  std::vector<SummaryRow> rows;
  for (const auto& [label, a] : acc) {
    rows.push_back({label, a.first,
                    100.0 * static_cast<double>(a.first) / static_cast<double>(labels.size()),
                    a.second / static_cast<double>(a.first)});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const SummaryRow& x, const SummaryRow& y) { return x.count > y.count; });
  return rows;
}

json to_json(const TaxonomyLabel& l) {
  return json{{"annotator_id", l.annotator_id},
              {"pair_id", l.pair_id},
              {"record_a", l.record_a},
              {"record_b", l.record_b},
              {"delta", l.delta},
              {"label", to_string(l.label)},
              {"pair_category", to_string(l.pair_class.category)},
              {"basis", to_string(l.pair_class.basis)},
              {"rule_trace", l.rule_trace}};
}

TaxonomyLabel label_from_json(const json& j) {
  try {
    TaxonomyLabel l;
    l.annotator_id = j.at("annotator_id").get<std::string>();
    l.pair_id = j.at("pair_id").get<std::string>();
    l.record_a = j.value("record_a", "");
    l.record_b = j.value("record_b", "");
    l.delta = j.at("delta").get<double>();
    l.label = label_from_string(j.at("label").get<std::string>());
    const auto cat = j.value("pair_category", std::string("consistent"));
    for (auto c : {PairCategory::consistent, PairCategory::marginal, PairCategory::excessive,
                   PairCategory::violation}) {
      if (cat == to_string(c)) l.pair_class.category = c;
    }
    l.pair_class.basis = j.value("basis", std::string("equivalent_scheme")) == "directional_scheme"
                             ? Scheme::directional_scheme
                             : Scheme::equivalent_scheme;
    l.pair_class.delta = l.delta;
    l.rule_trace = j.value("rule_trace", std::vector<std::string>{});
    return l;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed taxonomy label: ") + e.what());
  }
}

json to_json(const RoutingDecision& d) {
  return json{{"annotator_id", d.annotator_id}, {"routing", to_string(d.routing)}, {"reason", d.reason}};
}

std::vector<PairCategoryRow> pair_category_table(const Dataset& dataset,
                                                 std::span<const pairing::PromptPair> pairs,
                                                 const PairThresholds& t) {
  // A zero threshold flags every comparison.
  const auto all = pairing::flag_inconsistencies(dataset, pairs, 0.0);
  std::map<Scheme, PairCategoryRow> rows;
  for (const auto& f : all.flags) {
    const auto c = classify_pair(f, t);
    auto& row = rows[c.basis];
    row.scheme = c.basis;
    ++row.n;
    switch (c.category) {
      case PairCategory::consistent: ++row.consistent; break;
      case PairCategory::marginal: ++row.marginal; break;
      case PairCategory::excessive:
      case PairCategory::violation: ++row.inconsistent; break;
    }
  }
  std::vector<PairCategoryRow> out;
  for (auto& [scheme, row] : rows) out.push_back(row);
  return out;
}

json to_json(const PairCategoryRow& r) {
  return json{{"scheme", to_string(r.scheme)},
              {"n", r.n},
              {"consistent", r.consistent},
              {"marginal", r.marginal},
              {"inconsistent", r.inconsistent}};
}

json to_json(const SummaryRow& r) {
  return json{{"label", to_string(r.label)}, {"count", r.count}, {"pct", r.pct}, {"mean_delta", r.mean_delta}};
}

}  // namespace prefaudit::taxonomy
