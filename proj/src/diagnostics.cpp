#include "prefaudit/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <set>
#include <thread>

#include "prefaudit/error.hpp"

namespace prefaudit::diagnostics {

using nlohmann::json;

double default_tau(ScaleKind kind) {
  switch (kind) {
    case ScaleKind::continuous_0_100: return 15.0;
    case ScaleKind::likert_5: return 1.0;
    case ScaleKind::binary_pair: return 0.0;
  }
  return 15.0;
}

const char* to_string(ReliabilityMode mode) {
  switch (mode) {
    case ReliabilityMode::weighted: return "weighted";
    case ReliabilityMode::min: return "min";
    case ReliabilityMode::hierarchical: return "hierarchical";
  }
  return "unknown";
}

ReliabilityMode reliability_mode_from_string(const std::string& s) {
  if (s == "weighted") return ReliabilityMode::weighted;
  if (s == "min") return ReliabilityMode::min;
  if (s == "hierarchical") return ReliabilityMode::hierarchical;
  throw ConfigError("unknown reliability mode '" + s + "'");
}

bool is_temporal_pair(const AnnotationRecord& a, const AnnotationRecord& b,
                      std::int64_t min_timestamp_gap) {
  if (a.session_id && b.session_id && *a.session_id != *b.session_id) return true;
  if (a.timestamp && b.timestamp) {
    const auto gap = *a.timestamp > *b.timestamp ? *a.timestamp - *b.timestamp
                                                 : *b.timestamp - *a.timestamp;
    return gap > min_timestamp_gap;
  }
  return false;
}

namespace {

struct Tally {
  std::size_t consistent = 0;
  std::size_t total = 0;

  void add(bool ok) {
    consistent += ok ? 1 : 0;
    ++total;
  }
  ConsistencyScore finish(const char* what, const std::string& annotator) const {
    if (total == 0) {
      throw InsufficientSupport(std::string(what) + ": annotator '" + annotator +
                                "' has no supporting pairs");
    }
    return {static_cast<double>(consistent) / static_cast<double>(total), total};
  }
};

bool within(double a, double b, double tau) { return std::fabs(a - b) <= tau; }

}  // namespace

ConsistencyScore temporal_consistency(const Dataset& dataset, const std::string& annotator_id,
                                      double tau, std::int64_t min_timestamp_gap) {
  std::map<std::pair<std::string, std::string>, std::vector<const AnnotationRecord*>> groups;
  for (const auto& r : dataset.records) {
    if (r.annotator_id == annotator_id) groups[{r.item_id, r.framing_id.value_or("")}].push_back(&r);
  }
  Tally t;
  for (const auto& [key, rs] : groups) {
    for (std::size_t i = 0; i < rs.size(); ++i) {
      for (std::size_t j = i + 1; j < rs.size(); ++j) {
        if (is_temporal_pair(*rs[i], *rs[j], min_timestamp_gap)) {
          t.add(within(rs[i]->score, rs[j]->score, tau));
        }
      }
    }
  }
  return t.finish("temporal_consistency", annotator_id);
}

ConsistencyScore framing_consistency(const Dataset& dataset, const std::string& annotator_id,
                                     double tau,
                                     std::span<const pairing::PromptPair> equivalent_pairs) {
  std::map<std::string, std::vector<const AnnotationRecord*>> by_item;
  for (const auto& r : dataset.records) {
    if (r.annotator_id == annotator_id) by_item[r.item_id].push_back(&r);
  }
  Tally t;
  for (const auto& [item, rs] : by_item) {
    for (std::size_t i = 0; i < rs.size(); ++i) {
      for (std::size_t j = i + 1; j < rs.size(); ++j) {
        const auto& fa = rs[i]->framing_id;
        const auto& fb = rs[j]->framing_id;
        if (fa && fb && *fa != *fb) t.add(within(rs[i]->score, rs[j]->score, tau));
      }
    }
  }
  for (const auto& pair : equivalent_pairs) {
    if (pair.kind == pairing::PairKind::directional || pair.item_a == pair.item_b) continue;
    auto a = by_item.find(pair.item_a);
    auto b = by_item.find(pair.item_b);
    if (a == by_item.end() || b == by_item.end()) continue;
    for (const auto* ra : a->second) {
      for (const auto* rb : b->second) t.add(within(ra->score, rb->score, tau));
    }
  }
  return t.finish("framing_consistency", annotator_id);
}

ConsistencyScore order_consistency(const Dataset& dataset, const std::string& annotator_id) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_item;
  for (const auto& r : dataset.records) {
    if (r.annotator_id != annotator_id || r.scale_kind != ScaleKind::binary_pair) continue;
    if (!r.condition_tag) continue;
    if (*r.condition_tag == "AB") {
      by_item[r.item_id].first.push_back(r.score);
    } else if (*r.condition_tag == "BA") {
      by_item[r.item_id].second.push_back(r.score);
    }
  }
  Tally t;
  for (const auto& [item, orders] : by_item) {
    for (double ab : orders.first) {
      for (double ba : orders.second) t.add(ab == ba);
    }
  }
  return t.finish("order_consistency", annotator_id);
}

ConsistencyScore cross_item_consistency(const Dataset& dataset, const std::string& annotator_id,
                                        const std::string& value_dimension,
                                        const ratio::RatioConfig& config) {
  const auto rec = ratio::inconsistency_ratio(dataset, annotator_id, value_dimension, config);
  return {1.0 / (1.0 + rec.ratio), rec.n_items};
}

ConsistencyScore anchor_failure_rate(const Dataset& dataset, const std::string& annotator_id,
                                     double tolerance) {
  Tally failures;
  for (const auto& r : dataset.records) {
    if (r.annotator_id != annotator_id) continue;
    const auto* m = dataset.meta(r.item_id);
    if (!m || !m->anchor_score) continue;
    failures.add(!within(r.score, *m->anchor_score, tolerance));
  }
  return failures.finish("anchor_failure_rate", annotator_id);
}

double reliability(const ConsistencyProfile& profile, const ReliabilityConfig& config) {
  const std::array<std::optional<double>, 4> comps{profile.temp, profile.frame, profile.order,
                                                   profile.cross};
  bool any = false;
  for (const auto& c : comps) any = any || c.has_value();
  if (!any) {
    throw InsufficientSupport("reliability: annotator '" + profile.annotator_id +
                              "' has no consistency components");
  }

  auto weighted = [&] {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      if (!comps[i]) continue;
      if (config.weights[i] < 0.0) throw ConfigError("reliability weights must be nonnegative");
      num += config.weights[i] * *comps[i];
      den += config.weights[i];
    }
    if (den == 0.0) throw ConfigError("reliability weights of present components sum to zero");
    return num / den;
  };

  switch (config.mode) {
    case ReliabilityMode::weighted:
      return weighted();
    case ReliabilityMode::min: {
      double m = 1.0;
      for (const auto& c : comps) {
        if (c) m = std::min(m, *c);
      }
      return m;
    }
    case ReliabilityMode::hierarchical:
      if (profile.temp && *profile.temp < config.temp_threshold) return *profile.temp;
      if (profile.frame && *profile.frame < config.frame_threshold) return *profile.frame;
      return weighted();
  }
  return weighted();
}

ConsistencyProfile compute_profile(const Dataset& dataset, const std::string& annotator_id,
                                   const DiagnosticConfig& config,
                                   std::span<const pairing::PromptPair> equivalent_pairs) {
  ConsistencyProfile p;
  p.annotator_id = annotator_id;
  p.tau_used = config.tau.value_or(default_tau(dataset.scale_kind));

  auto attempt = [](auto&& fn, std::optional<double>& score, std::size_t& n) {
    try {
      const ConsistencyScore s = fn();
      score = s.score;
      n = s.n;
    } catch (const InsufficientSupport&) {
      // Absent component, not zero.
    }
  };
  attempt([&] { return temporal_consistency(dataset, annotator_id, p.tau_used,
                                            config.min_timestamp_gap); },
          p.temp, p.n_temp_pairs);
  attempt([&] { return framing_consistency(dataset, annotator_id, p.tau_used, equivalent_pairs); },
          p.frame, p.n_frame_pairs);
  attempt([&] { return order_consistency(dataset, annotator_id); }, p.order, p.n_order_pairs);
  attempt([&] {
    return anchor_failure_rate(dataset, annotator_id, config.anchor_tolerance.value_or(p.tau_used));
  }, p.anchor_failure_rate, p.n_anchor_items);

  // Cross-item consistency averages over every dimension with support.
  std::set<std::string> dims;
  for (const auto& r : dataset.records) {
    if (r.annotator_id != annotator_id) continue;
    if (const auto* m = dataset.meta(r.item_id)) {
      if (m->value_dimension) dims.insert(*m->value_dimension);
      if (m->theme_labels) dims.insert(m->theme_labels->begin(), m->theme_labels->end());
    }
  }
  double cross_sum = 0.0;
  std::size_t cross_dims = 0;
  for (const auto& d : dims) {
    try {
      const auto s = cross_item_consistency(dataset, annotator_id, d, config.ratio);
      cross_sum += s.score;
      p.n_cross_items += s.n;
      ++cross_dims;
    } catch (const InsufficientSupport&) {
    }
  }
  if (cross_dims > 0) p.cross = cross_sum / static_cast<double>(cross_dims);

  if (p.temp || p.frame || p.order || p.cross) p.reliability = reliability(p, config.reliability);
  return p;
}

std::vector<ConsistencyProfile> compute_profiles(
    const Dataset& dataset, const DiagnosticConfig& config,
    std::span<const pairing::PromptPair> equivalent_pairs) {
  const auto ids = dataset.annotators();
  const std::vector<std::string> annotators(ids.begin(), ids.end());
  std::vector<ConsistencyProfile> out(annotators.size());
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), 8));
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < annotators.size(); i += workers) {
        out[i] = compute_profile(dataset, annotators[i], config, equivalent_pairs);
      }
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

FramingEffect framing_effect_stats(const Dataset& dataset, const pairing::PromptPair& pair) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_annotator;
  for (const auto& r : dataset.records) {
    const double s = to_common_scale(r.score, r.scale_kind);
    if (r.item_id == pair.item_a) by_annotator[r.annotator_id].first.push_back(s);
    if (r.item_id == pair.item_b) by_annotator[r.annotator_id].second.push_back(s);
  }
  FramingEffect fe;
  fe.pair_id = pair.pair_id;
  std::vector<double> sa, sb, diffs;
  for (const auto& [annotator, scores] : by_annotator) {
    if (scores.first.empty() || scores.second.empty()) continue;
    const double a = stats::mean(scores.first);
    const double b = stats::mean(scores.second);
    sa.push_back(a);
    sb.push_back(b);
    diffs.push_back(a - b);
    fe.per_annotator_deviation[annotator] = std::fabs(a - b);
  }
  if (diffs.size() < 2) {
    throw InsufficientSupport("framing_effect_stats: pair '" + pair.pair_id + "' has " +
                              std::to_string(diffs.size()) + " annotators rating both variants");
  }
  fe.mean_a = stats::mean(sa);
  fe.mean_b = stats::mean(sb);
  fe.pair_shift = std::fabs(fe.mean_a - fe.mean_b);
  const auto t = stats::paired_t(diffs);
  fe.paired_t = t.statistic;
  fe.p_value = t.p_value;
  fe.df = t.df;
  const auto d = stats::cohens_d(diffs);
  fe.cohens_d = d.d;
  fe.zero_effect = t.zero_effect;
  return fe;
}

namespace {

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<double> opt_double(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

}  // namespace

json to_json(const ConsistencyProfile& p) {
  return json{{"annotator_id", p.annotator_id},
              {"temp", opt(p.temp)},
              {"frame", opt(p.frame)},
              {"order", opt(p.order)},
              {"cross", opt(p.cross)},
              {"n_temp_pairs", p.n_temp_pairs},
              {"n_frame_pairs", p.n_frame_pairs},
              {"n_order_pairs", p.n_order_pairs},
              {"n_cross_items", p.n_cross_items},
              {"anchor_failure_rate", opt(p.anchor_failure_rate)},
              {"n_anchor_items", p.n_anchor_items},
              {"reliability", opt(p.reliability)},
              {"tau_used", p.tau_used}};
}

ConsistencyProfile profile_from_json(const json& j) {
  try {
    ConsistencyProfile p;
    p.annotator_id = j.at("annotator_id").get<std::string>();
    p.temp = opt_double(j, "temp");
    p.frame = opt_double(j, "frame");
    p.order = opt_double(j, "order");
    p.cross = opt_double(j, "cross");
    p.n_temp_pairs = j.value("n_temp_pairs", std::size_t{0});
    p.n_frame_pairs = j.value("n_frame_pairs", std::size_t{0});
    p.n_order_pairs = j.value("n_order_pairs", std::size_t{0});
    p.n_cross_items = j.value("n_cross_items", std::size_t{0});
    p.anchor_failure_rate = opt_double(j, "anchor_failure_rate");
    p.n_anchor_items = j.value("n_anchor_items", std::size_t{0});
    p.reliability = opt_double(j, "reliability");
    p.tau_used = j.value("tau_used", 0.0);
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed profile: ") + e.what());
  }
}

json to_json(const FramingEffect& f) {
  return json{{"pair_id", f.pair_id},
              {"per_annotator_deviation", f.per_annotator_deviation},
              {"pair_shift", f.pair_shift},
              {"mean_a", f.mean_a},
              {"mean_b", f.mean_b},
              {"paired_t", f.paired_t},
              {"p_value", f.p_value},
              {"df", f.df},
              {"cohens_d", f.cohens_d},
              {"zero_effect", f.zero_effect}};
}

void write_profiles_csv(std::ostream& out, std::span<const ConsistencyProfile> profiles) {
  out << "annotator_id,temp,frame,order,cross,n_temp_pairs,n_frame_pairs,n_order_pairs,"
         "n_cross_items,anchor_failure_rate,n_anchor_items,reliability,tau_used\n";
  auto cell = [&](const std::optional<double>& v) {
    if (v) out << json(*v).dump();
  };
  for (const auto& p : profiles) {
    out << p.annotator_id << ',';
    cell(p.temp);
    out << ',';
    cell(p.frame);
    out << ',';
    cell(p.order);
    out << ',';
    cell(p.cross);
    out << ',' << p.n_temp_pairs << ',' << p.n_frame_pairs << ',' << p.n_order_pairs << ','
        << p.n_cross_items << ',';
    cell(p.anchor_failure_rate);
    out << ',' << p.n_anchor_items << ',';
    cell(p.reliability);
    out << ',' << json(p.tau_used).dump() << '\n';
  }
}

}  // namespace prefaudit::diagnostics
