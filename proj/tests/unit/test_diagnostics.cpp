#include <doctest.h>

#include "builders.hpp"
#include "prefaudit/diagnostics.hpp"
#include "prefaudit/error.hpp"

using namespace prefaudit;
using namespace prefaudit::diagnostics;
using testing_support::Rec;

namespace {

// Two sessions per item, so every same-item pair is temporal.
void add_repeat(Dataset& ds, const std::string& ann, const std::string& item, double s1, double s2) {
  const auto n = std::to_string(ds.records.size());
  ds.records.push_back(Rec(ann + "-" + n + "a", ann, item, s1).session("s1"));
  ds.records.push_back(Rec(ann + "-" + n + "b", ann, item, s2).session("s2"));
}

void add_framed(Dataset& ds, const std::string& ann, const std::string& item, double s0, double s1) {
  const auto n = std::to_string(ds.records.size());
  ds.records.push_back(Rec(ann + "-" + n + "a", ann, item, s0).framing("v0"));
  ds.records.push_back(Rec(ann + "-" + n + "b", ann, item, s1).framing("v1"));
}

}  // namespace

TEST_CASE("temporal consistency counts pairs within tau") {
  Dataset ds;
  add_repeat(ds, "a", "x", 80, 80);
  add_repeat(ds, "a", "y", 60, 75);
  add_repeat(ds, "a", "z", 50, 10);
  const auto s = temporal_consistency(ds, "a", 15.0);
  CHECK(s.n == 3);
  CHECK(s.score == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("temporal consistency with three spread ratings is zero") {
  Dataset ds;
  ds.records.push_back(Rec("r1", "a", "x", 10).session("s1"));
  ds.records.push_back(Rec("r2", "a", "x", 50).session("s2"));
  ds.records.push_back(Rec("r3", "a", "x", 100).session("s3"));
  const auto s = temporal_consistency(ds, "a", 15.0);
  CHECK(s.n == 3);
  CHECK(s.score == 0.0);
}

TEST_CASE("temporal pair definition") {
  const AnnotationRecord a = Rec("r1", "a", "x", 1).session("s1").at(10);
  const AnnotationRecord same = Rec("r2", "a", "x", 1).session("s1").at(10);
  const AnnotationRecord later = Rec("r3", "a", "x", 1).session("s1").at(100);
  const AnnotationRecord other = Rec("r4", "a", "x", 1).session("s2").at(10);
  CHECK_FALSE(is_temporal_pair(a, same));
  CHECK(is_temporal_pair(a, later));
  CHECK_FALSE(is_temporal_pair(a, later, 90));
  CHECK(is_temporal_pair(a, other));

  Dataset ds;
  ds.records = {a, same};
  CHECK_THROWS_AS(temporal_consistency(ds, "a", 15.0), InsufficientSupport);
}

TEST_CASE("framing consistency") {
  Dataset far;
  add_framed(far, "a", "x", 100, 0);
  CHECK(framing_consistency(far, "a", 15.0).score == 0.0);

  Dataset equal;
  add_framed(equal, "a", "x", 55, 55);
  CHECK(framing_consistency(equal, "a", 15.0).score == 1.0);

  Dataset boundary;
  add_framed(boundary, "a", "x", 40, 55);
  CHECK(framing_consistency(boundary, "a", 15.0).score == 1.0);
  CHECK(framing_consistency(boundary, "a", 14.9).score == 0.0);

  Dataset cross;
  cross.records.push_back(Rec("r1", "a", "p", 30));
  cross.records.push_back(Rec("r2", "a", "q", 90));
  const std::vector<pairing::PromptPair> pairs{
      pairing::make_pair("p", "q", 0.95, pairing::PairKind::equivalent)};
  const auto s = framing_consistency(cross, "a", 15.0, pairs);
  CHECK(s.n == 1);
  CHECK(s.score == 0.0);
  CHECK_THROWS_AS(framing_consistency(cross, "a", 15.0), InsufficientSupport);
}

TEST_CASE("order consistency over AB/BA presentations") {
  Dataset ds;
  ds.scale_kind = ScaleKind::binary_pair;
  for (int i = 0; i < 10; ++i) {
    const std::string item = "pair" + std::to_string(i);
    const double ab = 1.0;
    const double ba = i < 7 ? 1.0 : 0.0;
    ds.records.push_back(Rec(item + "ab", "a", item, ab).scale(ScaleKind::binary_pair).tag("AB"));
    ds.records.push_back(Rec(item + "ba", "a", item, ba).scale(ScaleKind::binary_pair).tag("BA"));
  }
  const auto s = order_consistency(ds, "a");
  CHECK(s.n == 10);
  CHECK(s.score == doctest::Approx(0.7));
}

TEST_CASE("cross-item consistency") {
  Dataset ds;
  for (int i = 0; i < 6; ++i) {
    const std::string item = "v" + std::to_string(i);
    ds.records.push_back(Rec("r" + item, "a", item, 50));
    ItemMetadata m;
    m.item_id = item;
    m.value_dimension = "Fairness";
    ds.metadata[item] = m;
  }
  for (int i = 0; i < 6; ++i) {
    const std::string item = "o" + std::to_string(i);
    ds.records.push_back(Rec("r" + item, "a", item, 50));
  }
  // Constant ratings: degenerate baseline, ratio 0, consistency 1.
  CHECK(cross_item_consistency(ds, "a", "Fairness").score == 1.0);

  Dataset few;
  for (int i = 0; i < 4; ++i) {
    const std::string item = "v" + std::to_string(i);
    few.records.push_back(Rec("r" + item, "a", item, 10.0 * i));
    ItemMetadata m;
    m.item_id = item;
    m.value_dimension = "Fairness";
    few.metadata[item] = m;
  }
  CHECK_THROWS_AS(cross_item_consistency(few, "a", "Fairness"), InsufficientSupport);
}

TEST_CASE("anchor failure rate") {
  Dataset ds;
  for (int i = 0; i < 4; ++i) {
    const std::string item = "anchor" + std::to_string(i);
    ItemMetadata m;
    m.item_id = item;
    m.anchor_score = 95.0;
    ds.metadata[item] = m;
    ds.records.push_back(Rec("r" + item, "a", item, i == 0 ? 20.0 : 90.0));
  }
  const auto s = anchor_failure_rate(ds, "a", 15.0);
  CHECK(s.n == 4);
  CHECK(s.score == doctest::Approx(0.25));
}

TEST_CASE("reliability aggregation modes") {
  ConsistencyProfile p;
  p.annotator_id = "a";
  p.temp = 0.4;
  p.frame = 0.8;
  CHECK(reliability(p) == doctest::Approx(0.6));
  CHECK(reliability(p, {ReliabilityMode::min}) == doctest::Approx(0.4));
  CHECK(reliability(p, {ReliabilityMode::hierarchical}) == doctest::Approx(0.4));
  p.temp = 0.9;
  p.frame = 0.5;
  CHECK(reliability(p, {ReliabilityMode::hierarchical}) == doctest::Approx(0.5));
  p.frame = 0.7;
  CHECK(reliability(p, {ReliabilityMode::hierarchical}) == doctest::Approx(0.8));

  ReliabilityConfig w;
  w.weights = {3.0, 1.0, 1.0, 1.0};
  CHECK(reliability(p, w) == doctest::Approx((3 * 0.9 + 0.7) / 4.0));

  ConsistencyProfile empty;
  CHECK_THROWS_AS(reliability(empty), InsufficientSupport);
}

TEST_CASE("profile leaves missing components absent") {
  Dataset ds;
  add_repeat(ds, "a", "x", 80, 82);
  const auto p = compute_profile(ds, "a");
  CHECK(p.temp == 1.0);
  CHECK_FALSE(p.frame.has_value());
  CHECK_FALSE(p.order.has_value());
  CHECK_FALSE(p.cross.has_value());
  CHECK_FALSE(p.anchor_failure_rate.has_value());
  CHECK(p.reliability == 1.0);
  CHECK(p.tau_used == 15.0);
  CHECK(profile_from_json(to_json(p)) == p);
}

TEST_CASE("framing effect paired statistics") {
  // Per-annotator differences (10, 10, 10, 14, 6) as in the stats oracle.
  const double diffs[] = {10, 10, 10, 14, 6};
  Dataset ds;
  for (int i = 0; i < 5; ++i) {
    const std::string a = "ann" + std::to_string(i);
    ds.records.push_back(Rec(a + "p", a, "p", 50 + diffs[i]));
    ds.records.push_back(Rec(a + "q", a, "q", 50));
  }
  const auto fe = framing_effect_stats(ds, pairing::make_pair("p", "q", 0.95,
                                                              pairing::PairKind::equivalent));
  CHECK(fe.paired_t == doctest::Approx(7.905694150420948).epsilon(1e-12));
  CHECK(fe.p_value == doctest::Approx(0.0013849379404235027).epsilon(1e-10));
  CHECK(fe.cohens_d == doctest::Approx(3.5355339059327373).epsilon(1e-12));
  CHECK(fe.pair_shift == doctest::Approx(10.0));
  CHECK(fe.per_annotator_deviation.at("ann3") == 14.0);
}

TEST_CASE("default tolerances per scale") {
  CHECK(default_tau(ScaleKind::continuous_0_100) == 15.0);
  CHECK(default_tau(ScaleKind::likert_5) == 1.0);
  CHECK(default_tau(ScaleKind::binary_pair) == 0.0);
}
