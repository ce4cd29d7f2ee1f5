#include "prefaudit/inconsistency_ratio.hpp"

#include <algorithm>
#include <future>
#include <set>
#include <thread>

#include "prefaudit/error.hpp"

namespace prefaudit::ratio {

using nlohmann::json;

const char* to_string(Band b) {
  switch (b) {
    case Band::below_random: return "below_random";
    case Band::comparable_to_random: return "comparable_to_random";
    case Band::above_random: return "above_random";
  }
  return "unknown";
}

bool item_has_theme(const ItemMetadata& m, const std::string& theme) {
  if (m.value_dimension && *m.value_dimension == theme) return true;
  return m.theme_labels && m.theme_labels->count(theme) != 0;
}

std::vector<double> theme_ratings(const Dataset& dataset, const std::string& annotator_id,
                                  const std::string& theme) {
  std::vector<double> out;
  for (const auto& r : dataset.records) {
    if (r.annotator_id != annotator_id) continue;
    const auto* m = dataset.meta(r.item_id);
    if (m && item_has_theme(*m, theme)) out.push_back(r.score);
  }
  return out;
}

std::vector<double> history(const Dataset& dataset, const std::string& annotator_id) {
  std::vector<double> out;
  for (const auto& r : dataset.records) {
    if (r.annotator_id == annotator_id) out.push_back(r.score);
  }
  return out;
}

VarianceResult within_theme_variance(const Dataset& dataset, const std::string& annotator_id,
                                     const std::string& theme, std::size_t min_support) {
  const auto values = theme_ratings(dataset, annotator_id, theme);
  if (values.size() < min_support) {
    throw InsufficientSupport("annotator '" + annotator_id + "' has " +
                              std::to_string(values.size()) + " ratings on theme '" + theme +
                              "', need " + std::to_string(min_support));
  }
  return {stats::population_variance(values), values.size()};
}

double random_baseline(std::span<const double> pool, std::size_t k, std::size_t resamples,
                       stats::SeededSampler& sampler) {
  if (k == 0) throw ConfigError("random_baseline: k must be positive");
  if (resamples == 0) throw ConfigError("random_baseline: resamples must be positive");
  if (pool.size() < k) {
    throw InsufficientSupport("random_baseline: history of " + std::to_string(pool.size()) +
                              " ratings is smaller than k = " + std::to_string(k));
  }
  // Every draw of the whole pool is a permutation of it; skip the resampling
  // so a full-history ratio is exactly 1 rather than 1 up to summation order.
  if (k == pool.size()) return stats::population_variance(pool);
  std::vector<double> draw(k);
  double total = 0.0;
  for (std::size_t s = 0; s < resamples; ++s) {
    const auto idx = sampler.sample_without_replacement(pool.size(), k);
    for (std::size_t i = 0; i < k; ++i) draw[i] = pool[idx[i]];
    total += stats::population_variance(draw);
  }
  return total / static_cast<double>(resamples);
}

double random_baseline(const Dataset& dataset, const std::string& annotator_id, std::size_t k,
                       std::size_t resamples, std::uint64_t seed) {
  const auto pool = history(dataset, annotator_id);
  stats::SeededSampler sampler(seed, "baseline/" + annotator_id);
  return random_baseline(pool, k, resamples, sampler);
}

RatioRecord ratio_from_ratings(std::span<const double> theme_values, std::span<const double> pool,
                               stats::SeededSampler& sampler, const RatioConfig& config) {
  if (theme_values.size() < config.min_support) {
    throw InsufficientSupport("inconsistency ratio needs " + std::to_string(config.min_support) +
                              " ratings, got " + std::to_string(theme_values.size()));
  }
  RatioRecord rec;
  rec.n_items = theme_values.size();
  rec.var_within = stats::population_variance(theme_values);
  rec.baseline = random_baseline(pool, theme_values.size(), config.resamples, sampler);
  rec.resamples_used = config.resamples;
  rec.seed = config.seed;
  if (rec.baseline > 0.0) {
    rec.ratio = rec.var_within / rec.baseline;
  } else {
    rec.ratio = 0.0;
    rec.degenerate = true;
  }
  if (rec.ratio < config.low_band) {
    rec.band = Band::below_random;
  } else if (rec.ratio > config.high_band) {
    rec.band = Band::above_random;
  } else {
    rec.band = Band::comparable_to_random;
  }
  return rec;
}

namespace {

std::vector<double> baseline_pool(const Dataset& dataset, const std::string& annotator_id,
                                  const std::string& theme, bool exclude_theme) {
  std::vector<double> out;
  for (const auto& r : dataset.records) {
    if (r.annotator_id != annotator_id) continue;
    if (exclude_theme) {
      const auto* m = dataset.meta(r.item_id);
      if (m && item_has_theme(*m, theme)) continue;
    }
    out.push_back(r.score);
  }
  return out;
}

}  // namespace

RatioRecord inconsistency_ratio(const Dataset& dataset, const std::string& annotator_id,
                                const std::string& theme, const RatioConfig& config) {
  const auto values = theme_ratings(dataset, annotator_id, theme);
  const auto pool = baseline_pool(dataset, annotator_id, theme, config.exclude_theme_items);
  stats::SeededSampler sampler(config.seed, "ratio/" + annotator_id + "/" + theme);
  auto rec = ratio_from_ratings(values, pool, sampler, config);
  rec.annotator_id = annotator_id;
  rec.theme = theme;
  return rec;
}

std::vector<RatioRecord> compute_all_ratios(const Dataset& dataset, const RatioConfig& config) {
  // Collect eligible cells first so the output order is fixed before any
  // parallel work starts.
  std::map<std::pair<std::string, std::string>, std::size_t> support;
  for (const auto& r : dataset.records) {
    const auto* m = dataset.meta(r.item_id);
    if (!m) continue;
    std::set<std::string> themes;
    if (m->theme_labels) themes.insert(m->theme_labels->begin(), m->theme_labels->end());
    if (m->value_dimension) themes.insert(*m->value_dimension);
    for (const auto& t : themes) ++support[{r.annotator_id, t}];
  }
  std::vector<std::pair<std::string, std::string>> cells;
  for (const auto& [cell, n] : support) {
    if (n >= config.min_support) cells.push_back(cell);
  }

  std::vector<std::optional<RatioRecord>> results(cells.size());
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), 8));
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < cells.size(); i += workers) {
        try {
          results[i] = inconsistency_ratio(dataset, cells[i].first, cells[i].second, config);
        } catch (const InsufficientSupport&) {
          // Baseline pool smaller than the theme (only with exclusion).
        }
      }
    }));
  }
  for (auto& j : jobs) j.get();

  std::vector<RatioRecord> out;
  for (auto& r : results) {
    if (r) out.push_back(std::move(*r));
  }
  return out;
}

std::map<std::string, double> annotator_mean_ratios(std::span<const RatioRecord> ratios) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : ratios) {
    auto& [sum, n] = acc[r.annotator_id];
    sum += r.ratio;
    ++n;
  }
  std::map<std::string, double> out;
  for (const auto& [id, a] : acc) out[id] = a.first / static_cast<double>(a.second);
  return out;
}

PopulationReport population_stats(std::span<const RatioRecord> ratios, const Dataset& dataset) {
  const auto means = annotator_mean_ratios(ratios);
  if (means.size() < 2) {
    throw InsufficientSupport("population_stats needs at least two annotators with ratios");
  }
  std::map<std::string, std::pair<double, std::size_t>> rating_acc;
  for (const auto& r : dataset.records) {
    auto& [sum, n] = rating_acc[r.annotator_id];
    sum += to_common_scale(r.score, r.scale_kind);
    ++n;
  }

  PopulationReport rep;
  rep.n_annotators = means.size();
  std::vector<double> ratio_values, mean_ratings;
  for (const auto& [id, m] : means) {
    ratio_values.push_back(m);
    const auto& [sum, n] = rating_acc.at(id);
    mean_ratings.push_back(sum / static_cast<double>(n));
  }
  rep.mean_ratio = stats::mean(ratio_values);
  rep.ratio_vs_one = stats::one_sample_t(ratio_values, 1.0);
  rep.median_ratio = stats::median(ratio_values);

  std::vector<double> low, high;
  for (std::size_t i = 0; i < ratio_values.size(); ++i) {
    (ratio_values[i] < rep.median_ratio ? low : high).push_back(mean_ratings[i]);
  }
  rep.n_low = low.size();
  rep.n_high = high.size();
  if (!low.empty()) rep.mean_rating_low = stats::mean(low);
  if (!high.empty()) rep.mean_rating_high = stats::mean(high);
  rep.mean_difference = rep.mean_rating_low - rep.mean_rating_high;
  if (low.size() >= 2 && high.size() >= 2) {
    rep.median_split_welch = stats::welch_t(low, high);
    rep.median_split_pooled = stats::pooled_t(low, high);
  }
  try {
    rep.pearson_ratio_rating = stats::pearson_r(ratio_values, mean_ratings);
  } catch (const DegenerateVariance&) {
  }
  return rep;
}

json to_json(const stats::TestResult& t) {
  return json{{"statistic", t.statistic},
              {"p_value", t.p_value},
              {"df", t.df},
              {"kind", stats::to_string(t.kind)},
              {"zero_effect", t.zero_effect}};
}

json to_json(const RatioRecord& r) {
  return json{{"annotator_id", r.annotator_id},
              {"theme", r.theme},
              {"n_items", r.n_items},
              {"var_within", r.var_within},
              {"baseline", r.baseline},
              {"ratio", r.ratio},
              {"resamples_used", r.resamples_used},
              {"seed", r.seed},
              {"degenerate", r.degenerate},
              {"band", to_string(r.band)}};
}

RatioRecord ratio_from_json(const json& j) {
  try {
    RatioRecord r;
    r.annotator_id = j.at("annotator_id").get<std::string>();
    r.theme = j.at("theme").get<std::string>();
    r.n_items = j.value("n_items", std::size_t{0});
    r.var_within = j.value("var_within", 0.0);
    r.baseline = j.value("baseline", 0.0);
    r.ratio = j.at("ratio").get<double>();
    r.resamples_used = j.value("resamples_used", std::size_t{0});
    r.seed = j.value("seed", std::uint64_t{0});
    r.degenerate = j.value("degenerate", false);
    const auto band = j.value("band", std::string("comparable_to_random"));
    r.band = band == "below_random"   ? Band::below_random
             : band == "above_random" ? Band::above_random
                                      : Band::comparable_to_random;
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed ratio record: ") + e.what());
  }
}

json to_json(const PopulationReport& r) {
  return json{{"n_annotators", r.n_annotators},
              {"mean_ratio", r.mean_ratio},
              {"ratio_vs_one", to_json(r.ratio_vs_one)},
              {"median_ratio", r.median_ratio},
              {"n_low", r.n_low},
              {"n_high", r.n_high},
              {"mean_rating_low", r.mean_rating_low},
              {"mean_rating_high", r.mean_rating_high},
              {"mean_difference", r.mean_difference},
              {"median_split_welch", to_json(r.median_split_welch)},
              {"median_split_pooled", to_json(r.median_split_pooled)},
              {"pearson_ratio_rating", r.pearson_ratio_rating ? json(*r.pearson_ratio_rating) : json()}};
}

}  // namespace prefaudit::ratio
