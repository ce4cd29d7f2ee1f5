#include <doctest.h>

#include "builders.hpp"
#include "prefaudit/error.hpp"
#include "prefaudit/taxonomy.hpp"

using namespace prefaudit;
using namespace prefaudit::taxonomy;
using pairing::Direction;
using testing_support::Rec;

namespace {

pairing::InconsistencyFlag flag(double a, double b,
                                pairing::PairKind kind = pairing::PairKind::identical,
                                std::optional<Direction> direction = std::nullopt) {
  pairing::InconsistencyFlag f;
  f.annotator_id = "ann";
  f.pair = pairing::make_pair("x", kind == pairing::PairKind::identical ? "x" : "y", 1.0, kind,
                              direction);
  f.score_a = a;
  f.score_b = b;
  f.delta = std::abs(a - b);
  return f;
}

TaxonomyLabel run(const pairing::InconsistencyFlag& f, const ItemMetadata& m) {
  return classify_flag(f, &m, classify_pair(f), score_pattern(f.score_a, f.score_b));
}

}  // namespace

TEST_CASE("equivalent pair scheme boundaries") {
  CHECK(classify_equivalent_pair(55, 55).category == PairCategory::consistent);
  CHECK(classify_equivalent_pair(100, 0).category == PairCategory::excessive);
  CHECK(classify_equivalent_pair(40, 68).category == PairCategory::marginal);
  CHECK(classify_equivalent_pair(40, 55).category == PairCategory::consistent);
  CHECK(classify_equivalent_pair(40, 56).category == PairCategory::marginal);
  CHECK(classify_equivalent_pair(40, 70).category == PairCategory::marginal);
  CHECK(classify_equivalent_pair(40, 71).category == PairCategory::excessive);
}

TEST_CASE("directional pair scheme") {
  CHECK(classify_directional_pair(30, 60, Direction::b_more).category == PairCategory::consistent);
  CHECK(classify_directional_pair(100, 6, Direction::b_more).category == PairCategory::violation);
  CHECK(classify_directional_pair(50, 58, Direction::b_more).category == PairCategory::marginal);
  CHECK(classify_directional_pair(60, 30, Direction::a_more).category == PairCategory::consistent);
  CHECK(classify_directional_pair(50, 65, Direction::b_more).category == PairCategory::marginal);
  CHECK(classify_directional_pair(50, 66, Direction::b_more).category == PairCategory::consistent);
  CHECK(classify_directional_pair(66, 50, Direction::b_more).category == PairCategory::violation);
}

TEST_CASE("score patterns") {
  CHECK(score_pattern(10, 100).codes() == std::vector<std::string>{"C1"});
  // 50 sits on neither side of the midpoint.
  CHECK(score_pattern(10, 50).codes() == std::vector<std::string>{"C2"});
  CHECK(score_pattern(10, 45).codes() == std::vector<std::string>{"C2", "C4"});
  CHECK(score_pattern(40, 60).codes() == std::vector<std::string>{"C3"});
  CHECK(score_pattern(60, 70).codes() == std::vector<std::string>{"C3"});
  CHECK(score_pattern(60, 80).codes() == std::vector<std::string>{"C2", "C4"});
}

TEST_CASE("greeting rated inconsistently is a non-attitude") {
  ItemMetadata m;
  m.content_type = ContentType::A1_generic;
  m.plausible_pref = PlausiblePref::E1_implausible;
  const auto l = run(flag(10, 100), m);
  CHECK(l.label == Label::non_attitude);
  CHECK(l.rule_trace.back().rfind("rule2", 0) == 0);
}

TEST_CASE("echoed response rated 47 is a measurement artifact") {
  ItemMetadata m;
  m.response_quality = ResponseQuality::B2_bad;
  CHECK(run(flag(47, 1), m).label == Label::measurement_artifact);
  // Neither score above the floor: rule 1 does not fire.
  CHECK(run(flag(40, 1), m).label != Label::measurement_artifact);
}

TEST_CASE("value-laden moderate instability is genuine") {
  ItemMetadata m;
  m.content_type = ContentType::A4_value_laden;
  m.plausible_pref = PlausiblePref::E3_plausible;
  CHECK(run(flag(63, 85), m).label == Label::genuine_uncrystallized);
  // Excessive shift on the same item falls to rule 4.
  CHECK(run(flag(10, 90), m).label == Label::constructed_preference);
}

TEST_CASE("pair categories route through the cascade") {
  ItemMetadata none;
  const auto v = flag(100, 6, pairing::PairKind::directional, Direction::b_more);
  CHECK(run(v, none).label == Label::non_attitude);
  CHECK(run(flag(0, 100, pairing::PairKind::equivalent), none).label ==
        Label::constructed_preference);

  ItemMetadata conflicting;
  conflicting.content_type = ContentType::A3_subjective;
  conflicting.eval_complexity = EvalComplexity::D3_multi_conflicting;
  CHECK(run(flag(40, 60), conflicting).rule_trace.back() == "rule4:conflicting_evaluation_criteria");

  const auto fallback = classify_flag(flag(40, 60), nullptr, classify_pair(flag(40, 60)),
                                      score_pattern(40, 60));
  CHECK(fallback.label == Label::constructed_preference);
  CHECK(fallback.rule_trace.back() == "rule6:fallback");
}

TEST_CASE("routing decision procedure") {
  diagnostics::ConsistencyProfile p;
  p.annotator_id = "a";
  p.temp = 0.3;
  CHECK(decision_procedure(p).routing == Routing::filter_downweight);
  p.temp = 0.9;
  p.frame = 0.3;
  CHECK(decision_procedure(p).routing == Routing::elicit_carefully);
  p.frame = 1.0;
  p.order = 0.5;
  CHECK(decision_procedure(p).routing == Routing::fix_instrument);
  p.order = 1.0;
  p.anchor_failure_rate = 0.1;
  CHECK(decision_procedure(p).routing == Routing::fix_instrument);
  p.anchor_failure_rate = 0.05;
  p.cross = 1.0;
  p.temp = 1.0;
  CHECK(decision_procedure(p).routing == Routing::use_as_signal);
  // Boundary values pass.
  p.temp = 0.5;
  p.frame = 0.6;
  CHECK(decision_procedure(p).routing == Routing::use_as_signal);

  diagnostics::ConsistencyProfile empty;
  CHECK_THROWS_AS(decision_procedure(empty), InsufficientSupport);
}

TEST_CASE("classification summary ordering") {
  std::vector<TaxonomyLabel> labels(4);
  labels[0].label = Label::non_attitude;
  labels[0].delta = 90;
  labels[1].label = Label::measurement_artifact;
  labels[1].delta = 40;
  labels[2].label = Label::measurement_artifact;
  labels[2].delta = 60;
  labels[3].label = Label::constructed_preference;
  labels[3].delta = 20;
  const auto rows = classification_summary(labels);
  REQUIRE(rows.size() >= 3);
  CHECK(rows[0].label == Label::measurement_artifact);
  CHECK(rows[0].count == 2);
  CHECK(rows[0].pct == doctest::Approx(50.0));
  CHECK(rows[0].mean_delta == doctest::Approx(50.0));
  CHECK(rows[1].label == Label::non_attitude);
  CHECK(rows[2].label == Label::constructed_preference);
  std::size_t total = 0;
  for (const auto& r : rows) total += r.count;
  CHECK(total == 4);
}

TEST_CASE("pair category table") {
  Dataset ds;
  ds.records.push_back(Rec("r1", "a", "p", 50));
  ds.records.push_back(Rec("r2", "a", "q", 60));
  ds.records.push_back(Rec("r3", "b", "p", 10));
  ds.records.push_back(Rec("r4", "b", "q", 90));
  ds.records.push_back(Rec("r5", "c", "p", 20));
  ds.records.push_back(Rec("r6", "c", "q", 45));
  const std::vector<pairing::PromptPair> pairs{
      pairing::make_pair("p", "q", 0.95, pairing::PairKind::equivalent)};
  const auto rows = pair_category_table(ds, pairs);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].n == 3);
  CHECK(rows[0].consistent == 1);
  CHECK(rows[0].marginal == 1);
  CHECK(rows[0].inconsistent == 1);
}

TEST_CASE("label serialization") {
  TaxonomyLabel l = run(flag(47, 1), [] {
    ItemMetadata m;
    m.response_quality = ResponseQuality::B2_bad;
    return m;
  }());
  const auto back = label_from_json(to_json(l));
  CHECK(back.label == l.label);
  CHECK(back.rule_trace == l.rule_trace);
  CHECK(label_from_string(to_string(Label::genuine_uncrystallized)) == Label::genuine_uncrystallized);
}
