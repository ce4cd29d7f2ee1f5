#include "prefaudit/aggregation_sim.hpp"

#include <algorithm>
#include <future>
#include <thread>

#include "prefaudit/error.hpp"
#include "prefaudit/stats.hpp"

namespace prefaudit::aggregation {

using nlohmann::json;

const char* to_string(PoolName p) {
  switch (p) {
    case PoolName::all: return "all";
    case PoolName::low_inconsistency: return "low_inconsistency";
    case PoolName::high_inconsistency: return "high_inconsistency";
  }
  return "unknown";
}

Pools split_pools(const std::map<std::string, double>& annotator_ratios) {
  if (annotator_ratios.empty()) throw InsufficientSupport("split_pools: no ratio-scored annotators");
  std::vector<double> values;
  for (const auto& [id, r] : annotator_ratios) values.push_back(r);
  const double med = stats::median(values);
  Pools p;
  p.all.name = PoolName::all;
  p.low.name = PoolName::low_inconsistency;
  p.high.name = PoolName::high_inconsistency;
  for (auto* spec : {&p.all, &p.low, &p.high}) spec->split_statistic = med;
  for (const auto& [id, r] : annotator_ratios) {
    p.all.membership.insert(id);
    (r < med ? p.low : p.high).membership.insert(id);
  }
  return p;
}

bool majority_label(std::span<const double> ratings, double harm_threshold, bool allow_even) {
  if (ratings.empty()) throw InsufficientSupport("majority_label: no ratings");
  if (!allow_even && ratings.size() % 2 == 0) {
    throw ConfigError("majority_label: even sample size " + std::to_string(ratings.size()) +
                      " admits ties");
  }
  std::size_t harmful = 0;
  for (double r : ratings) harmful += r >= harm_threshold ? 1 : 0;
  return 2 * harmful > ratings.size();
}

namespace {

double harmful_share(std::span<const double> ratings, const SimulationConfig& cfg,
                     stats::SeededSampler& sampler) {
  std::vector<double> draw(cfg.sample_size);
  std::size_t harmful = 0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const auto idx = sampler.sample_without_replacement(ratings.size(), cfg.sample_size);
    for (std::size_t i = 0; i < cfg.sample_size; ++i) draw[i] = ratings[idx[i]];
    harmful += majority_label(draw, cfg.harm_threshold, true) ? 1 : 0;
  }
  return static_cast<double>(harmful) / static_cast<double>(cfg.iterations);
}

}  // namespace

FlipReport pool_flip_simulation(const Dataset& dataset,
                                const std::map<std::string, double>& annotator_ratios,
                                const SimulationConfig& config) {
  if (config.iterations == 0) throw ConfigError("iterations must be positive");
  if (config.sample_size == 0 || config.sample_size % 2 == 0) {
    throw ConfigError("sample_size must be odd");
  }
  const Pools pools = split_pools(annotator_ratios);
  if (pools.low.membership.empty() || pools.high.membership.empty()) {
    throw InsufficientSupport("pool_flip_simulation: a restricted pool is empty");
  }

  // item -> annotator -> ratings on the 0-100 scale
  std::map<std::string, std::map<std::string, std::vector<double>>> by_item;
  for (const auto& r : dataset.records) {
    by_item[r.item_id][r.annotator_id].push_back(to_common_scale(r.score, r.scale_kind));
  }

  FlipReport rep;
  rep.iterations = config.iterations;
  rep.sample_size = config.sample_size;
  rep.harm_threshold = config.harm_threshold;
  rep.seed = config.seed;
  rep.n_low = pools.low.membership.size();
  rep.n_high = pools.high.membership.size();
  rep.median_ratio = pools.all.split_statistic;

  struct Job {
    std::string item;
    std::vector<double> all, low, high;
  };
  std::vector<Job> jobs;
  for (const auto& [item, raters] : by_item) {
    Job job{item, {}, {}, {}};
    for (const auto& [annotator, scores] : raters) {
      if (!pools.all.membership.count(annotator)) continue;
      const double s = stats::mean(scores);
      job.all.push_back(s);
      (pools.low.membership.count(annotator) ? job.low : job.high).push_back(s);
    }
    if (job.low.size() < config.sample_size || job.high.size() < config.sample_size) {
      rep.skipped.push_back(item);
    } else {
      jobs.push_back(std::move(job));
    }
  }
  if (jobs.empty()) throw InsufficientSupport("pool_flip_simulation: no eligible prompts");

  rep.prompts.resize(jobs.size());
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), 8));
  std::vector<std::future<void>> futures;
  for (std::size_t w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < jobs.size(); i += workers) {
        const auto& job = jobs[i];
        auto& out = rep.prompts[i];
        out.item_id = job.item;
        stats::SeededSampler s_all(config.seed, "flip/all/" + job.item);
        stats::SeededSampler s_low(config.seed, "flip/low/" + job.item);
        stats::SeededSampler s_high(config.seed, "flip/high/" + job.item);
        out.harmful_share_all = harmful_share(job.all, config, s_all);
        out.harmful_share_low = harmful_share(job.low, config, s_low);
        out.harmful_share_high = harmful_share(job.high, config, s_high);
        out.label_all = out.harmful_share_all > 0.5;
        out.label_low = out.harmful_share_low > 0.5;
        out.label_high = out.harmful_share_high > 0.5;
      }
    }));
  }
  for (auto& f : futures) f.get();

  std::size_t any_flip = 0;
  for (const auto& p : rep.prompts) {
    rep.n_flips_low += p.label_low != p.label_all ? 1 : 0;
    rep.n_flips_high += p.label_high != p.label_all ? 1 : 0;
    any_flip += (p.label_low != p.label_all || p.label_high != p.label_all) ? 1 : 0;
  }
  const double n = static_cast<double>(rep.prompts.size());
  rep.pct_flips_low = 100.0 * static_cast<double>(rep.n_flips_low) / n;
  rep.pct_flips_high = 100.0 * static_cast<double>(rep.n_flips_high) / n;
  rep.pct_flips = 100.0 * static_cast<double>(any_flip) / n;
  return rep;
}

json to_json(const FlipReport& r) {
  json prompts = json::array();
  for (const auto& p : r.prompts) {
    prompts.push_back({{"item_id", p.item_id},
                       {"label_all", p.label_all},
                       {"label_low", p.label_low},
                       {"label_high", p.label_high},
                       {"harmful_share_all", p.harmful_share_all},
                       {"harmful_share_low", p.harmful_share_low},
                       {"harmful_share_high", p.harmful_share_high}});
  }
  return json{{"prompts", prompts},
              {"skipped", r.skipped},
              {"n_eligible", r.prompts.size()},
              {"n_flips_low", r.n_flips_low},
              {"n_flips_high", r.n_flips_high},
              {"pct_flips_low", r.pct_flips_low},
              {"pct_flips_high", r.pct_flips_high},
              {"pct_flips", r.pct_flips},
              {"iterations", r.iterations},
              {"sample_size", r.sample_size},
              {"harm_threshold", r.harm_threshold},
              {"seed", r.seed},
              {"n_low", r.n_low},
              {"n_high", r.n_high},
              {"median_ratio", r.median_ratio}};
}

}  // namespace prefaudit::aggregation
