#include "prefaudit/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "prefaudit/error.hpp"
#include "prefaudit/stats.hpp"

namespace prefaudit::planner {

using nlohmann::json;

namespace {

std::size_t count_at_rate(double rate, std::size_t n) {
  // Rates like 0.05 * 2000 land a hair off the integer in binary floating
  // point; round to nearest.
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
}

bool in_range(double v, double lo, double hi) { return v >= lo - 1e-12 && v <= hi + 1e-12; }

std::string pct(double rate) {
  std::ostringstream s;
  s << rate * 100.0 << '%';
  return s.str();
}

}  // namespace

void check_tier_invariants(const TierPlan& p) {
  if (p.tier < 1 || p.tier > 3) throw ConfigError("tier must be 1, 2 or 3");
  if (!in_range(p.repeat_rate, 0.05, 0.08)) {
    throw ConfigError("repeat rate " + pct(p.repeat_rate) + " outside 5-8%");
  }
  if (p.n_repeats_per_annotator < kMinRepeatsPerAnnotator) {
    throw ConfigError("binding constraint: " + pct(p.repeat_rate) + " of " +
                      std::to_string(p.items_per_annotator) + " items per annotator gives " +
                      std::to_string(p.n_repeats_per_annotator) + " repeats, below the minimum of " +
                      std::to_string(kMinRepeatsPerAnnotator));
  }
  if (p.min_spacing < kMinSpacing) {
    throw ConfigError("min_spacing " + std::to_string(p.min_spacing) + " below " +
                      std::to_string(kMinSpacing));
  }
  if (p.tier >= 2) {
    if (!p.framing_rate || !in_range(*p.framing_rate, 0.10, 0.15)) {
      throw ConfigError("tier 2+ framing rate must lie in 10-15%");
    }
  }
  if (p.tier == 3) {
    if (!p.retest_rate || !in_range(*p.retest_rate, 0.20, 0.30)) {
      throw ConfigError("tier 3 retest rate must lie in 20-30%");
    }
    if (!p.within_annotator_framing_rate || !in_range(*p.within_annotator_framing_rate, 0.10, 0.15)) {
      throw ConfigError("tier 3 within-annotator framing rate must lie in 10-15%");
    }
  }
}

TierPlan plan_tier(const PlanRequest& req) {
  if (req.tier < 1 || req.tier > 3) throw ConfigError("tier must be 1, 2 or 3");
  if (req.n_items == 0 || req.n_annotators == 0) {
    throw ConfigError("n_items and n_annotators must be positive");
  }
  if (!(req.cost_per_annotation >= 0.0)) throw ConfigError("cost per annotation must be >= 0");
  if (req.session_length == 0) throw ConfigError("session_length must be positive");

  TierPlan p;
  p.tier = req.tier;
  p.n_items = req.n_items;
  p.n_annotators = req.n_annotators;
  p.items_per_annotator =
      req.items_per_annotator.value_or((req.n_items + req.n_annotators - 1) / req.n_annotators);
  if (p.items_per_annotator == 0 || p.items_per_annotator > req.n_items) {
    throw ConfigError("items_per_annotator must lie in [1, n_items]");
  }
  p.min_spacing = req.min_spacing;
  p.session_length = req.session_length;
  p.repeat_rate = req.repeat_rate.value_or(0.05);
  p.n_repeats_per_annotator = count_at_rate(p.repeat_rate, p.items_per_annotator);

  if (p.tier >= 2) {
    p.framing_rate = req.framing_rate.value_or(0.125);
    p.n_framing_items = count_at_rate(*p.framing_rate, p.n_items);
  }
  if (p.tier == 3) {
    p.retest_rate = req.retest_rate.value_or(0.25);
    p.within_annotator_framing_rate = req.within_annotator_framing_rate.value_or(0.125);
  } else if (req.within_annotator_framing_rate) {
    p.within_annotator_framing_rate = req.within_annotator_framing_rate;
  }
  if (p.tier < 3 && req.retest_rate) p.retest_rate = req.retest_rate;
  if (p.within_annotator_framing_rate) {
    p.n_within_framing_per_annotator =
        count_at_rate(*p.within_annotator_framing_rate, p.items_per_annotator);
  }
  if (p.retest_rate) p.n_retest_per_annotator = count_at_rate(*p.retest_rate, p.items_per_annotator);

  check_tier_invariants(p);

  p.base_annotations = p.n_annotators * p.items_per_annotator;
  p.extra_annotations = p.n_annotators * (p.n_repeats_per_annotator +
                                          p.n_within_framing_per_annotator +
                                          p.n_retest_per_annotator);
  p.overhead_pct = 100.0 * static_cast<double>(p.extra_annotations) /
                   static_cast<double>(p.base_annotations);
  p.extra_cost = static_cast<double>(p.extra_annotations) * req.cost_per_annotation;
  return p;
}

TierPlan plan_tier(int tier, std::size_t n_items, std::size_t n_annotators,
                   double cost_per_annotation) {
  PlanRequest req;
  req.tier = tier;
  req.n_items = n_items;
  req.n_annotators = n_annotators;
  req.cost_per_annotation = cost_per_annotation;
  return plan_tier(req);
}

const char* to_string(TaskKind k) {
  switch (k) {
    case TaskKind::original: return "original";
    case TaskKind::repeat: return "repeat";
    case TaskKind::framing_variant: return "framing_variant";
    case TaskKind::retest: return "retest";
  }
  return "unknown";
}

namespace {

// Chooses `k` of `candidates` (base positions), stratified by content type
// with largest-remainder allocation when any candidate carries one.
std::vector<std::size_t> stratified_pick(const std::vector<std::size_t>& candidates, std::size_t k,
                                         const std::vector<std::string>& stream,
                                         const std::map<std::string, ItemMetadata>* metadata,
                                         stats::SeededSampler& sampler) {
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t pos : candidates) {
    std::string key = "unspecified";
    if (metadata) {
      auto it = metadata->find(stream[pos]);
      if (it != metadata->end() && it->second.content_type) {
        key = std::to_string(static_cast<int>(*it->second.content_type));
      }
    }
    strata[key].push_back(pos);
  }
  std::vector<std::size_t> picked;
  if (strata.size() <= 1) {
    for (std::size_t i : sampler.sample_without_replacement(candidates.size(), k)) {
      picked.push_back(candidates[i]);
    }
    return picked;
  }

  struct Share {
    std::string key;
    std::size_t base;
    double remainder;
  };
  std::vector<Share> shares;
  std::size_t allotted = 0;
  for (const auto& [key, members] : strata) {
    const double exact = static_cast<double>(k) * static_cast<double>(members.size()) /
                         static_cast<double>(candidates.size());
    const auto base = static_cast<std::size_t>(std::floor(exact));
    shares.push_back({key, base, exact - static_cast<double>(base)});
    allotted += base;
  }
  std::stable_sort(shares.begin(), shares.end(),
                   [](const Share& a, const Share& b) { return a.remainder > b.remainder; });
  for (std::size_t i = 0; allotted < k; i = (i + 1) % shares.size()) {
    if (shares[i].base < strata[shares[i].key].size()) {
      ++shares[i].base;
      ++allotted;
    }
  }
  for (const auto& s : shares) {
    const auto& members = strata[s.key];
    for (std::size_t i : sampler.sample_without_replacement(members.size(), s.base)) {
      picked.push_back(members[i]);
    }
  }
  return picked;
}

std::string other_variant(const std::optional<std::string>& f) {
  return f && *f == "v1" ? "v0" : "v1";
}

}  // namespace

Schedule assign_diagnostics(const TierPlan& plan, std::span<const std::string> item_ids,
                            std::span<const std::string> annotator_ids, std::uint64_t seed,
                            const std::map<std::string, ItemMetadata>* metadata) {
  // Only layout feasibility is checked here; the repeat minimum belongs to
  // plan_tier, so hand-built plans can schedule fewer repeats.
  if (plan.session_length == 0) throw ConfigError("session_length must be positive");
  if (annotator_ids.size() != plan.n_annotators) {
    throw ConfigError("plan expects " + std::to_string(plan.n_annotators) + " annotators, got " +
                      std::to_string(annotator_ids.size()));
  }
  if (item_ids.size() < plan.items_per_annotator) {
    throw ConfigError("fewer items than items_per_annotator");
  }
  const std::size_t L = plan.items_per_annotator;
  const std::size_t diagnostics =
      plan.n_repeats_per_annotator + plan.n_within_framing_per_annotator + plan.n_retest_per_annotator;
  if (L <= plan.min_spacing || L - plan.min_spacing < diagnostics) {
    throw ConfigError("spacing infeasible: " + std::to_string(L) + " items per annotator leave " +
                      std::to_string(L > plan.min_spacing ? L - plan.min_spacing : 0) +
                      " positions with " + std::to_string(plan.min_spacing) +
                      " intervening tasks for " + std::to_string(diagnostics) +
                      " diagnostic tasks");
  }

  Schedule schedule;
  schedule.plan = plan;
  schedule.seed = seed;

  std::vector<std::string> pool(item_ids.begin(), item_ids.end());
  stats::SeededSampler pool_sampler(seed, "schedule/items");
  pool_sampler.shuffle(pool);

  std::set<std::string> framing_items;
  if (plan.n_framing_items > 0) {
    std::vector<std::string> order(item_ids.begin(), item_ids.end());
    stats::SeededSampler framing_sampler(seed, "schedule/framing");
    framing_sampler.shuffle(order);
    framing_items.insert(order.begin(),
                         order.begin() + static_cast<std::ptrdiff_t>(
                                             std::min(plan.n_framing_items, order.size())));
  }

  for (std::size_t a = 0; a < annotator_ids.size(); ++a) {
    const std::string& annotator = annotator_ids[a];
    stats::SeededSampler sampler(seed, "schedule/annotator/" + annotator);

    std::vector<std::string> stream(L);
    for (std::size_t t = 0; t < L; ++t) stream[t] = pool[(a * L + t) % pool.size()];
    sampler.shuffle(stream);
    std::vector<std::optional<std::string>> base_framing(L);
    for (std::size_t t = 0; t < L; ++t) {
      if (framing_items.count(stream[t])) base_framing[t] = a % 2 == 0 ? "v0" : "v1";
    }

    std::vector<std::size_t> candidates(L - plan.min_spacing);
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    auto repeats = stratified_pick(candidates, plan.n_repeats_per_annotator, stream, metadata, sampler);
    std::sort(repeats.begin(), repeats.end());
    std::vector<std::size_t> rest;
    std::set_difference(candidates.begin(), candidates.end(), repeats.begin(), repeats.end(),
                        std::back_inserter(rest));
    std::vector<std::size_t> others;
    for (std::size_t i : sampler.sample_without_replacement(
             rest.size(), plan.n_within_framing_per_annotator + plan.n_retest_per_annotator)) {
      others.push_back(rest[i]);
    }
    const std::vector<std::size_t> within(
        others.begin(), others.begin() + static_cast<std::ptrdiff_t>(plan.n_within_framing_per_annotator));
    const std::vector<std::size_t> retest(
        others.begin() + static_cast<std::ptrdiff_t>(plan.n_within_framing_per_annotator), others.end());

    // Insertion slot s places a repeat before base index s (s == L: at the
    // end), leaving s - p - 1 >= min_spacing base tasks in between.
    std::map<std::size_t, std::vector<std::size_t>> slots;
    for (std::size_t p : repeats) {
      const std::size_t lo = p + plan.min_spacing + 1;
      const std::size_t s = lo + static_cast<std::size_t>(sampler.below(L - lo + 1));
      slots[s].push_back(p);
    }

    AnnotatorSchedule out;
    out.annotator_id = annotator;
    std::vector<std::size_t> final_pos(L);
    auto emit = [&](Task task) {
      task.position = out.tasks.size();
      out.tasks.push_back(std::move(task));
    };
    for (std::size_t i = 0; i <= L; ++i) {
      if (auto it = slots.find(i); it != slots.end()) {
        for (std::size_t p : it->second) {
          emit({stream[p], TaskKind::repeat, base_framing[p], 0, 0, final_pos[p]});
        }
      }
      if (i < L) {
        final_pos[i] = out.tasks.size();
        emit({stream[i], TaskKind::original, base_framing[i], 0, 0, std::nullopt});
      }
    }
    const std::size_t main_len = out.tasks.size();
    for (std::size_t t = 0; t < main_len; ++t) out.tasks[t].session = t / plan.session_length;
    std::size_t next_session = (main_len + plan.session_length - 1) / plan.session_length;
    for (std::size_t s = 0; s < next_session; ++s) out.session_starts.push_back(s * plan.session_length);

    auto later_session = [&](const std::vector<std::size_t>& picks, TaskKind kind) {
      if (picks.empty()) return;
      std::vector<std::size_t> order = picks;
      sampler.shuffle(order);
      out.session_starts.push_back(out.tasks.size());
      for (std::size_t p : order) {
        Task t{stream[p], kind,
               kind == TaskKind::framing_variant ? std::optional<std::string>(other_variant(base_framing[p]))
                                                 : base_framing[p],
               0, next_session, final_pos[p]};
        emit(std::move(t));
      }
      ++next_session;
    };
    // Within-annotator framing originals carry an explicit variant id so the
    // pair is identifiable.
    for (std::size_t p : within) {
      if (!base_framing[p]) {
        base_framing[p] = "v0";
        out.tasks[final_pos[p]].framing_id = "v0";
      }
    }
    later_session(within, TaskKind::framing_variant);
    later_session(retest, TaskKind::retest);
    schedule.annotators.push_back(std::move(out));
  }
  return schedule;
}

// ---------------------------------------------------------------------------

const char* to_string(CalibrationMethod m) {
  switch (m) {
    case CalibrationMethod::empirical: return "empirical";
    case CalibrationMethod::scale_relative: return "scale_relative";
    case CalibrationMethod::consequence: return "consequence";
  }
  return "unknown";
}

ThresholdCalibration calibrate_empirical(std::span<const double> clear_case_diffs, double k,
                                         ScaleKind scale) {
  if (clear_case_diffs.size() < 10) {
    throw InsufficientSupport("empirical calibration needs at least 10 clear-case differences, got " +
                              std::to_string(clear_case_diffs.size()));
  }
  if (!in_range(k, 1.5, 2.0)) throw ConfigError("k must lie in [1.5, 2]");
  const double m = stats::mean(clear_case_diffs);
  const double sd = stats::sample_sd(clear_case_diffs);
  ThresholdCalibration c;
  c.method = CalibrationMethod::empirical;
  c.scale_kind = scale;
  c.consistent_max = m + k * sd;
  c.marginal_max = 2.0 * c.consistent_max;
  if (!(c.consistent_max < c.marginal_max)) {
    throw DegenerateVariance("clear-case differences are all zero; no empirical band");
  }
  std::ostringstream b;
  b << "mean " << m << " + " << k << " sd " << sd << " over " << clear_case_diffs.size()
    << " clear-case differences; marginal band doubles it";
  c.basis = b.str();
  return c;
}

ThresholdCalibration calibrate_scale(ScaleKind scale) {
  ThresholdCalibration c;
  c.method = CalibrationMethod::scale_relative;
  c.scale_kind = scale;
  switch (scale) {
    case ScaleKind::continuous_0_100:
      c.consistent_max = 15.0;
      c.marginal_max = 30.0;
      c.basis = "100-point scale: <=15 consistent, 16-30 marginal, >30 inconsistent";
      break;
    case ScaleKind::likert_5:
      c.consistent_max = 1.0;
      c.marginal_max = 2.0;
      c.basis = "5-point scale: <=1 consistent, 2 marginal, >=3 inconsistent";
      break;
    case ScaleKind::binary_pair:
      // Choices differ by 0 or 1, so the (0, 0.5] marginal band is empty.
      c.consistent_max = 0.0;
      c.marginal_max = 0.5;
      c.basis = "binary choice: any disagreement on a repeated item is inconsistent";
      break;
  }
  return c;
}

ThresholdCalibration calibrate_consequence(ScaleKind scale, double flip_margin) {
  if (!(flip_margin >= 0.0)) throw ConfigError("flip_margin must be nonnegative");
  ThresholdCalibration c;
  c.method = CalibrationMethod::consequence;
  c.scale_kind = scale;
  c.consistent_max = flip_margin;
  c.marginal_max = flip_margin > 0.0 ? 2.0 * flip_margin : 0.5;
  std::ostringstream b;
  b << "differences above " << flip_margin << " change the training signal";
  c.basis = b.str();
  return c;
}

namespace {

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

json to_json(const TierPlan& p) {
  return json{{"tier", p.tier},
              {"n_items", p.n_items},
              {"n_annotators", p.n_annotators},
              {"items_per_annotator", p.items_per_annotator},
              {"repeat_rate", p.repeat_rate},
              {"n_repeats_per_annotator", p.n_repeats_per_annotator},
              {"min_spacing", p.min_spacing},
              {"framing_rate", opt(p.framing_rate)},
              {"n_framing_items", p.n_framing_items},
              {"within_annotator_framing_rate", opt(p.within_annotator_framing_rate)},
              {"n_within_framing_per_annotator", p.n_within_framing_per_annotator},
              {"retest_rate", opt(p.retest_rate)},
              {"n_retest_per_annotator", p.n_retest_per_annotator},
              {"session_length", p.session_length},
              {"base_annotations", p.base_annotations},
              {"extra_annotations", p.extra_annotations},
              {"overhead_pct", p.overhead_pct},
              {"extra_cost", p.extra_cost}};
}

json to_json(const Schedule& s) {
  json annotators = json::array();
  for (const auto& a : s.annotators) {
    json tasks = json::array();
    for (const auto& t : a.tasks) {
      json jt{{"item_id", t.item_id},
              {"kind", to_string(t.kind)},
              {"position", t.position},
              {"session", t.session}};
      if (t.framing_id) jt["framing_id"] = *t.framing_id;
      if (t.original_position) jt["original_position"] = *t.original_position;
      tasks.push_back(std::move(jt));
    }
    annotators.push_back(
        {{"annotator_id", a.annotator_id}, {"session_starts", a.session_starts}, {"tasks", tasks}});
  }
  return json{{"plan", to_json(s.plan)}, {"seed", s.seed}, {"annotators", annotators}};
}

json to_json(const ThresholdCalibration& c) {
  return json{{"method", to_string(c.method)},
              {"scale_kind", to_string(c.scale_kind)},
              {"consistent_max", c.consistent_max},
              {"marginal_max", c.marginal_max},
              {"basis", c.basis}};
}

}  // namespace prefaudit::planner
