#include "prefaudit/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "prefaudit/error.hpp"
#include "prefaudit/stats.hpp"

namespace prefaudit::weighting {

using nlohmann::json;

namespace {

// Temporal repeat pairs grouped by (item, annotator).
template <typename Fn>
void for_each_repeat_pair(const Dataset& dataset, std::int64_t min_gap, Fn&& fn) {
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<const AnnotationRecord*>>
      groups;
  for (const auto& r : dataset.records) {
    groups[{r.item_id, r.annotator_id, r.framing_id.value_or("")}].push_back(&r);
  }
  for (const auto& [key, rs] : groups) {
    for (std::size_t i = 0; i < rs.size(); ++i) {
      for (std::size_t j = i + 1; j < rs.size(); ++j) {
        if (diagnostics::is_temporal_pair(*rs[i], *rs[j], min_gap)) fn(*rs[i], *rs[j]);
      }
    }
  }
}

}  // namespace

std::map<std::string, double> item_reliabilities(const Dataset& dataset, double tau,
                                                 std::int64_t min_timestamp_gap) {
  // item -> annotator -> (consistent, total)
  std::map<std::string, std::map<std::string, std::pair<std::size_t, std::size_t>>> acc;
  for_each_repeat_pair(dataset, min_timestamp_gap,
                       [&](const AnnotationRecord& a, const AnnotationRecord& b) {
                         auto& [ok, n] = acc[a.item_id][a.annotator_id];
                         ok += std::fabs(a.score - b.score) <= tau ? 1 : 0;
                         ++n;
                       });
  std::map<std::string, double> out;
  for (const auto& [item, per_annotator] : acc) {
    double sum = 0.0;
    for (const auto& [annotator, t] : per_annotator) {
      sum += static_cast<double>(t.first) / static_cast<double>(t.second);
    }
    out[item] = sum / static_cast<double>(per_annotator.size());
  }
  return out;
}

double item_reliability(const Dataset& dataset, const std::string& item_id, double tau,
                        std::int64_t min_timestamp_gap) {
  const auto all = item_reliabilities(dataset, tau, min_timestamp_gap);
  auto it = all.find(item_id);
  if (it == all.end()) {
    throw InsufficientSupport("item '" + item_id + "' has no repeat ratings");
  }
  return it->second;
}

const char* to_string(WeightMode m) {
  switch (m) {
    case WeightMode::binary: return "binary";
    case WeightMode::linear: return "linear";
    case WeightMode::sigmoid: return "sigmoid";
  }
  return "unknown";
}

WeightMode weight_mode_from_string(const std::string& s) {
  if (s == "binary") return WeightMode::binary;
  if (s == "linear") return WeightMode::linear;
  if (s == "sigmoid") return WeightMode::sigmoid;
  throw ConfigError("unknown weight mode '" + s + "'");
}

WeightTable build_weights(const Dataset& dataset,
                          std::span<const diagnostics::ConsistencyProfile> profiles,
                          const WeightParams& params, const std::map<std::string, double>& item_rel) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(params.annotator_threshold) || !in_unit(params.item_threshold)) {
    throw ConfigError("binary thresholds must lie in [0, 1]");
  }
  if (!in_unit(params.sigmoid_midpoint) || !(params.sigmoid_steepness > 0.0)) {
    throw ConfigError("sigmoid midpoint must lie in [0, 1] and steepness be positive");
  }

  WeightTable table;
  table.mode = params.mode;
  table.item_reliability = item_rel;
  for (const auto& p : profiles) {
    if (p.reliability) {
      table.annotator_reliability[p.annotator_id] = *p.reliability;
    } else {
      table.unscored_annotators.push_back(p.annotator_id);
    }
  }
  for (const auto& a : dataset.annotators()) {
    const bool listed = std::find(table.unscored_annotators.begin(),
                                  table.unscored_annotators.end(), a) != table.unscored_annotators.end();
    if (!table.annotator_reliability.count(a) && !listed) table.unscored_annotators.push_back(a);
  }
  std::sort(table.unscored_annotators.begin(), table.unscored_annotators.end());

  table.weights.reserve(dataset.records.size());
  for (const auto& r : dataset.records) {
    std::optional<double> ra, rx;
    if (auto it = table.annotator_reliability.find(r.annotator_id);
        it != table.annotator_reliability.end()) {
      ra = it->second;
    }
    if (auto it = item_rel.find(r.item_id); it != item_rel.end()) rx = it->second;

    double w = 1.0;
    switch (params.mode) {
      case WeightMode::binary:
        w = (ra && *ra < params.annotator_threshold) || (rx && *rx < params.item_threshold) ? 0.0
                                                                                           : 1.0;
        break;
      case WeightMode::linear:
        w = ra.value_or(1.0) * rx.value_or(1.0);
        break;
      case WeightMode::sigmoid: {
        const double x = ra.value_or(1.0) * rx.value_or(1.0);
        w = 1.0 / (1.0 + std::exp(-params.sigmoid_steepness * (x - params.sigmoid_midpoint)));
        break;
      }
    }
    table.weights.push_back(std::clamp(w, 0.0, 1.0));
  }
  return table;
}

VarianceDecomposition variance_decomposition(const Dataset& dataset, double tau,
                                             ArtifactEstimator estimator,
                                             std::int64_t min_timestamp_gap) {
  VarianceDecomposition v;
  double acc = 0.0;
  for_each_repeat_pair(dataset, min_timestamp_gap,
                       [&](const AnnotationRecord& a, const AnnotationRecord& b) {
                         const double d = a.score - b.score;
                         acc += estimator == ArtifactEstimator::half_mean_squared_difference
                                    ? d * d
                                    : std::fabs(d);
                         ++v.n_repeat_pairs;
                         v.n_failed_pairs += std::fabs(d) > tau ? 1 : 0;
                       });
  if (v.n_repeat_pairs == 0) throw InsufficientSupport("variance_decomposition: no repeat pairs");
  const double m = acc / static_cast<double>(v.n_repeat_pairs);
  // Under normal errors E|r1 - r2| = 2 sigma / sqrt(pi), so sigma^2 = pi m^2 / 4.
  v.var_artifact = estimator == ArtifactEstimator::half_mean_squared_difference
                       ? 0.5 * m
                       : std::numbers::pi * m * m / 4.0;

  std::vector<double> all;
  all.reserve(dataset.records.size());
  for (const auto& r : dataset.records) all.push_back(r.score);
  v.var_total = stats::population_variance(all);
  v.var_preference_raw = v.var_total - v.var_artifact;
  v.floored = v.var_preference_raw < 0.0;
  v.var_preference = std::max(0.0, v.var_preference_raw);
  return v;
}

ExportPolicy export_policy_from_string(const std::string& s) {
  if (s == "weight") return ExportPolicy::weight;
  if (s == "filter") return ExportPolicy::filter;
  if (s == "both") return ExportPolicy::both;
  throw ConfigError("unknown export policy '" + s + "'");
}

ExportSummary export_weighted(const Dataset& dataset, const WeightTable& weights,
                              ExportPolicy policy, std::ostream& out) {
  if (weights.weights.size() != dataset.records.size()) {
    throw DataError("weight table does not match the dataset's record count");
  }
  ExportSummary s;
  s.input = dataset.records.size();
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const double w = weights.weights[i];
    if (policy != ExportPolicy::weight && w == 0.0) {
      ++s.dropped;
      continue;
    }
    json j = to_json(dataset.records[i]);
    if (policy != ExportPolicy::filter) j["weight"] = w;
    out << j.dump() << '\n';
    ++s.retained;
  }
  return s;
}

ExportSummary export_weighted(const Dataset& dataset, const WeightTable& weights,
                              ExportPolicy policy, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  auto s = export_weighted(dataset, weights, policy, out);
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
  return s;
}

json to_json(const VarianceDecomposition& v) {
  return json{{"var_total", v.var_total},
              {"var_artifact", v.var_artifact},
              {"var_preference", v.var_preference},
              {"var_preference_raw", v.var_preference_raw},
              {"floored", v.floored},
              {"n_repeat_pairs", v.n_repeat_pairs},
              {"n_failed_pairs", v.n_failed_pairs}};
}

json to_json(const ExportSummary& s) {
  return json{{"input", s.input}, {"retained", s.retained}, {"dropped", s.dropped}};
}

}  // namespace prefaudit::weighting
