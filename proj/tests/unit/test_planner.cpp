#include <doctest.h>

#include <cmath>

#include "prefaudit/error.hpp"
#include "prefaudit/planner.hpp"

using namespace prefaudit;
using namespace prefaudit::planner;

namespace {

std::vector<std::string> ids(const char* prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// Independent scan: every repeat sits at least `spacing` tasks after the
// earlier presentation of its item, found by searching backwards.
bool spacing_holds(const AnnotatorSchedule& s, std::size_t spacing) {
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    if (s.tasks[i].kind != TaskKind::repeat) continue;
    bool found = false;
    for (std::size_t j = 0; j < i; ++j) {
      if (s.tasks[j].item_id == s.tasks[i].item_id && s.tasks[j].kind == TaskKind::original) {
        if (i - j - 1 < spacing) return false;
        found = true;
      }
    }
    if (!found) return false;
  }
  return true;
}

std::size_t count_kind(const AnnotatorSchedule& s, TaskKind k) {
  std::size_t n = 0;
  for (const auto& t : s.tasks) n += t.kind == k;
  return n;
}

}  // namespace

TEST_CASE("tier 1 cost arithmetic") {
  const auto p = plan_tier(1, 10000, 5, 0.50);
  CHECK(p.items_per_annotator == 2000);
  CHECK(p.n_repeats_per_annotator == 100);
  CHECK(p.extra_annotations == 500);
  CHECK(p.extra_cost == doctest::Approx(250.0));
  CHECK(p.overhead_pct == doctest::Approx(5.0));
}

TEST_CASE("too few items for the repeat minimum") {
  try {
    plan_tier(1, 100, 1, 0.5);
    FAIL("expected infeasible plan");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("15") != std::string::npos);
    CHECK(msg.find("5") != std::string::npos);
  }
}

TEST_CASE("cross-annotator framing adds no annotations") {
  const auto t1 = plan_tier(1, 10000, 5, 0.50);
  const auto t2 = plan_tier(2, 10000, 5, 0.50);
  CHECK(t2.extra_annotations == t1.extra_annotations);
  CHECK(t2.n_framing_items == 1250);
  REQUIRE(t2.framing_rate.has_value());
  CHECK(*t2.framing_rate == doctest::Approx(0.125));

  const auto t3 = plan_tier(3, 10000, 5, 0.50);
  CHECK(t3.n_retest_per_annotator == 500);
  CHECK(t3.n_within_framing_per_annotator == 250);
  CHECK(t3.extra_annotations == 5 * (100 + 500 + 250));
}

TEST_CASE("tier invariants reject out-of-range rates") {
  PlanRequest r;
  r.tier = 1;
  r.n_items = 10000;
  r.n_annotators = 5;
  r.repeat_rate = 0.1;
  CHECK_THROWS_AS(plan_tier(r), ConfigError);
  r.repeat_rate = 0.08;
  CHECK_NOTHROW(plan_tier(r));
  r.tier = 2;
  r.framing_rate = 0.2;
  CHECK_THROWS_AS(plan_tier(r), ConfigError);
  r.framing_rate.reset();
  r.min_spacing = 10;
  CHECK_THROWS_AS(plan_tier(r), ConfigError);
  r.min_spacing = 20;
  r.tier = 4;
  CHECK_THROWS_AS(plan_tier(r), ConfigError);
}

TEST_CASE("schedule with five repeats at spacing 20") {
  TierPlan plan;
  plan.tier = 1;
  plan.n_items = 100;
  plan.n_annotators = 1;
  plan.items_per_annotator = 100;
  plan.n_repeats_per_annotator = 5;
  plan.min_spacing = 20;
  const auto s = assign_diagnostics(plan, ids("item", 100), ids("ann", 1), 42);
  REQUIRE(s.annotators.size() == 1);
  const auto& a = s.annotators[0];
  CHECK(a.tasks.size() == 105);
  CHECK(count_kind(a, TaskKind::repeat) == 5);
  CHECK(spacing_holds(a, 20));
  for (std::size_t i = 0; i < a.tasks.size(); ++i) CHECK(a.tasks[i].position == i);

  plan.min_spacing = 200;
  CHECK_THROWS_AS(assign_diagnostics(plan, ids("item", 100), ids("ann", 1), 42), ConfigError);
}

TEST_CASE("schedules are deterministic per seed") {
  PlanRequest req;
  req.tier = 3;
  req.n_items = 400;
  req.n_annotators = 4;
  req.items_per_annotator = 400;
  const auto plan = plan_tier(req);
  const auto a = assign_diagnostics(plan, ids("item", 400), ids("ann", 4), 9);
  const auto b = assign_diagnostics(plan, ids("item", 400), ids("ann", 4), 9);
  const auto c = assign_diagnostics(plan, ids("item", 400), ids("ann", 4), 10);
  CHECK(to_json(a) == to_json(b));
  CHECK(to_json(a) != to_json(c));
  for (const auto& s : a.annotators) {
    CHECK(spacing_holds(s, plan.min_spacing));
    CHECK(count_kind(s, TaskKind::repeat) == plan.n_repeats_per_annotator);
    CHECK(count_kind(s, TaskKind::retest) == plan.n_retest_per_annotator);
    CHECK(count_kind(s, TaskKind::framing_variant) == plan.n_within_framing_per_annotator);
    // Variants and retests come after every original and repeat.
    std::size_t last_main_session = 0;
    for (const auto& t : s.tasks) {
      if (t.kind == TaskKind::original || t.kind == TaskKind::repeat) {
        last_main_session = std::max(last_main_session, t.session);
      }
    }
    for (const auto& t : s.tasks) {
      if (t.kind == TaskKind::retest || t.kind == TaskKind::framing_variant) {
        CHECK(t.session > last_main_session);
      }
    }
  }
}

TEST_CASE("repeats are stratified by content type") {
  TierPlan plan;
  plan.n_items = 200;
  plan.n_annotators = 1;
  plan.items_per_annotator = 200;
  plan.n_repeats_per_annotator = 10;
  std::map<std::string, ItemMetadata> meta;
  const auto items = ids("item", 200);
  for (std::size_t i = 0; i < items.size(); ++i) {
    ItemMetadata m;
    m.item_id = items[i];
    m.content_type = i < 100 ? ContentType::A1_generic : ContentType::A4_value_laden;
    meta[items[i]] = m;
  }
  const auto s = assign_diagnostics(plan, items, ids("ann", 1), 3, &meta);
  std::size_t generic = 0;
  for (const auto& t : s.annotators[0].tasks) {
    if (t.kind == TaskKind::repeat && meta.at(t.item_id).content_type == ContentType::A1_generic) {
      ++generic;
    }
  }
  CHECK(generic == 5);
}

TEST_CASE("threshold calibration") {
  // Ten differences with mean 5 and sample sd 4.
  const double a = std::sqrt(14.4);
  std::vector<double> diffs;
  for (int i = 0; i < 5; ++i) {
    diffs.push_back(5 + a);
    diffs.push_back(5 - a);
  }
  const auto e = calibrate_empirical(diffs, 2.0);
  CHECK(e.consistent_max == doctest::Approx(13.0));
  CHECK(e.marginal_max == doctest::Approx(26.0));
  CHECK_THROWS_AS(calibrate_empirical(std::span(diffs).first(9), 2.0), DataError);
  CHECK_THROWS_AS(calibrate_empirical(diffs, 3.0), ConfigError);

  const auto l = calibrate_scale(ScaleKind::likert_5);
  CHECK(l.consistent_max == 1.0);
  CHECK(l.marginal_max == 2.0);
  const auto b = calibrate_scale(ScaleKind::binary_pair);
  CHECK(b.consistent_max == 0.0);
  CHECK(b.marginal_max < 1.0);
  const auto c = calibrate_scale(ScaleKind::continuous_0_100);
  CHECK(c.consistent_max == 15.0);
  CHECK(c.marginal_max == 30.0);

  const auto q = calibrate_consequence(ScaleKind::continuous_0_100, 10.0);
  CHECK(q.consistent_max == 10.0);
  CHECK(q.marginal_max == 20.0);
}
