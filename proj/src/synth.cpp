#include "prefaudit/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <thread>

#include "prefaudit/error.hpp"
#include "prefaudit/stats.hpp"

namespace prefaudit::synth {

using nlohmann::json;

namespace {

constexpr LatentType kTypes[] = {LatentType::genuine, LatentType::non_attitude,
                                 LatentType::constructed, LatentType::artifact};

std::string padded(const char* prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

struct AnnotatorOutput {
  std::vector<AnnotationRecord> records;
  std::size_t clamped = 0;
};

AnnotatorOutput simulate_annotator(const LatentAnnotator& who,
                                   const planner::AnnotatorSchedule& schedule,
                                   const std::vector<std::pair<std::string, double>>& anchors,
                                   const std::map<std::string, double>& item_mean,
                                   std::uint64_t seed) {
  stats::SeededSampler rng(seed, "synth/ratings/" + who.annotator_id);
  std::map<std::string, double> offsets;       // constructed: (item, variant)
  std::map<std::string, double> wrong_values;  // artifact: item -> wrong value or NaN
  const LatentParams& p = who.params;

  auto rate = [&](const std::string& item, const std::optional<std::string>& framing, double mu) {
    switch (who.latent_type) {
      case LatentType::genuine:
        return mu + rng.normal(0.0, p.noise_sd);
      case LatentType::non_attitude:
        return rng.uniform(0.0, 100.0);
      case LatentType::constructed: {
        const std::string key = item + "/" + framing.value_or("base");
        auto it = offsets.find(key);
        if (it == offsets.end()) it = offsets.emplace(key, rng.normal(0.0, p.framing_offset_sd)).first;
        return mu + it->second + rng.normal(0.0, p.noise_sd);
      }
      case LatentType::artifact: {
        auto it = wrong_values.find(item);
        if (it == wrong_values.end()) {
          const bool wrong = rng.uniform() < p.artifact_rate;
          it = wrong_values.emplace(item, wrong ? rng.uniform(0.0, 100.0) : -1.0).first;
        }
        return (it->second >= 0.0 ? it->second : mu) + rng.normal(0.0, p.noise_sd);
      }
    }
    return mu;
  };

  AnnotatorOutput out;
  std::size_t last_session = 0;
  auto emit = [&](const std::string& item, const std::optional<std::string>& framing,
                  std::size_t position, std::size_t session, double mu) {
    double s = rate(item, framing, mu);
    if (s < 0.0 || s > 100.0) {
      ++out.clamped;
      s = std::clamp(s, 0.0, 100.0);
    }
    AnnotationRecord r;
    r.record_id = who.annotator_id + padded("-t", position, 4);
    r.annotator_id = who.annotator_id;
    r.item_id = item;
    r.prompt_text = "Synthetic prompt " + item + (framing ? " (" + *framing + ")" : "");
    r.score = s;
    r.scale_kind = ScaleKind::continuous_0_100;
    r.session_id = who.annotator_id + "-s" + std::to_string(session);
    r.timestamp = static_cast<std::int64_t>(position);
    r.position_index = static_cast<std::uint32_t>(position);
    r.framing_id = framing;
    out.records.push_back(std::move(r));
    last_session = std::max(last_session, session);
  };

  for (const auto& t : schedule.tasks) {
    emit(t.item_id, t.framing_id, t.position, t.session, item_mean.at(t.item_id));
  }
  const std::size_t anchor_session = last_session + 1;
  std::size_t pos = schedule.tasks.size();
  for (const auto& [item, score] : anchors) emit(item, std::nullopt, pos++, anchor_session, score);
  return out;
}

}  // namespace

const char* to_string(LatentType t) {
  switch (t) {
    case LatentType::genuine: return "genuine";
    case LatentType::non_attitude: return "non_attitude";
    case LatentType::constructed: return "constructed";
    case LatentType::artifact: return "artifact";
  }
  return "unknown";
}

LatentType latent_type_from_string(const std::string& s) {
  for (LatentType t : kTypes) {
    if (s == to_string(t)) return t;
  }
  throw DataError("unknown latent type '" + s + "'");
}

taxonomy::Routing expected_routing(LatentType t) {
  switch (t) {
    case LatentType::genuine: return taxonomy::Routing::use_as_signal;
    case LatentType::non_attitude: return taxonomy::Routing::filter_downweight;
    case LatentType::constructed: return taxonomy::Routing::elicit_carefully;
    case LatentType::artifact: return taxonomy::Routing::fix_instrument;
  }
  return taxonomy::Routing::use_as_signal;
}

planner::PlanRequest plan_request(std::size_t n_annotators, std::size_t n_items,
                                  std::size_t framing_pairs) {
  if (n_items == 0) throw ConfigError("synthetic plan needs items");
  planner::PlanRequest req;
  req.tier = 1;
  req.n_items = n_items;
  req.n_annotators = n_annotators;
  req.items_per_annotator = n_items;
  req.within_annotator_framing_rate =
      static_cast<double>(framing_pairs) / static_cast<double>(n_items);
  return req;
}

SyntheticDataset generate(const GenerateConfig& config, std::size_t n_items,
                          const planner::TierPlan& plan) {
  const LatentParams& p = config.params;
  if (!(p.noise_sd > 0.0) || !(p.framing_offset_sd > 0.0)) {
    throw ConfigError("noise_sd and framing_offset_sd must be positive");
  }
  if (!(p.artifact_rate >= 0.0 && p.artifact_rate <= 1.0)) {
    throw ConfigError("artifact_rate must lie in [0, 1]");
  }
  std::size_t total = 0;
  for (const auto& [type, n] : config.n_per_type) total += n;
  if (total == 0) throw ConfigError("no annotators requested");
  if (plan.n_annotators != total) {
    throw ConfigError("infeasible plan: it covers " + std::to_string(plan.n_annotators) +
                      " annotators but " + std::to_string(total) + " were requested");
  }
  if (plan.n_within_framing_per_annotator == 0) {
    throw ConfigError("infeasible plan: no within-annotator framing pairs");
  }
  if (n_items < plan.items_per_annotator) throw ConfigError("infeasible plan: too few items");

  SyntheticDataset out;
  out.plan = plan;
  out.seed = config.seed;

  std::vector<std::string> items;
  std::map<std::string, double> item_mean;
  stats::SeededSampler mean_rng(config.seed, "synth/item_means");
  for (std::size_t i = 0; i < n_items; ++i) {
    items.push_back(padded("item-", i, 4));
    item_mean[items.back()] = mean_rng.uniform(10.0, 90.0);
  }
  std::vector<std::pair<std::string, double>> anchors;
  for (std::size_t i = 0; i < config.n_anchor_items; ++i) {
    const std::string id = padded("anchor-", i, 3);
    const double score = i % 2 == 0 ? config.anchor_low : config.anchor_high;
    anchors.emplace_back(id, score);
    ItemMetadata m;
    m.item_id = id;
    m.anchor_score = score;
    out.dataset.metadata[id] = m;
  }

  std::vector<std::string> ids;
  for (LatentType t : kTypes) {
    auto it = config.n_per_type.find(t);
    for (std::size_t i = 0; it != config.n_per_type.end() && i < it->second; ++i) {
      LatentAnnotator a{padded("ann-", out.annotators.size(), 3), t, p};
      ids.push_back(a.annotator_id);
      out.truth[a.annotator_id] = t;
      out.annotators.push_back(a);
    }
  }

  const planner::Schedule schedule =
      planner::assign_diagnostics(plan, items, ids, config.seed);

  std::vector<AnnotatorOutput> results(out.annotators.size());
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), 8));
  std::vector<std::future<void>> futures;
  for (std::size_t w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < out.annotators.size(); i += workers) {
        results[i] = simulate_annotator(out.annotators[i], schedule.annotators[i], anchors,
                                        item_mean, config.seed);
      }
    }));
  }
  for (auto& f : futures) f.get();

  for (auto& r : results) {
    out.n_clamped += r.clamped;
    for (auto& rec : r.records) out.dataset.records.push_back(std::move(rec));
  }
  out.dataset.scale_kind = ScaleKind::continuous_0_100;
  return out;
}

RecoveryReport score_recovery(const std::map<std::string, LatentType>& truth,
                              std::span<const taxonomy::RoutingDecision> routing) {
  if (truth.empty() || routing.empty()) throw DataError("score_recovery: nothing to score");
  std::map<std::string, taxonomy::Routing> routed;
  for (const auto& d : routing) routed[d.annotator_id] = d.routing;
  if (routed.size() != truth.size()) {
    throw DataError("score_recovery: " + std::to_string(routed.size()) + " routed annotators vs " +
                    std::to_string(truth.size()) + " in the truth set");
  }

  RecoveryReport rep;
  for (LatentType t : kTypes) {
    for (auto r : {taxonomy::Routing::filter_downweight, taxonomy::Routing::elicit_carefully,
                   taxonomy::Routing::fix_instrument, taxonomy::Routing::use_as_signal}) {
      rep.confusion[to_string(t)][taxonomy::to_string(r)] = 0;
    }
  }
  for (const auto& [id, type] : truth) {
    auto it = routed.find(id);
    if (it == routed.end()) throw DataError("score_recovery: no routing for '" + id + "'");
    ++rep.confusion[to_string(type)][taxonomy::to_string(it->second)];
    rep.n_correct += it->second == expected_routing(type) ? 1 : 0;
    ++rep.n;
  }
  rep.accuracy = static_cast<double>(rep.n_correct) / static_cast<double>(rep.n);
  return rep;
}

json truth_to_json(const SyntheticDataset& s) {
  json annotators = json::array();
  for (const auto& a : s.annotators) {
    annotators.push_back({{"annotator_id", a.annotator_id},
                          {"latent_type", to_string(a.latent_type)},
                          {"params",
                           {{"noise_sd", a.params.noise_sd},
                            {"framing_offset_sd", a.params.framing_offset_sd},
                            {"artifact_rate", a.params.artifact_rate}}}});
  }
  return json{{"seed", s.seed},
              {"plan", planner::to_json(s.plan)},
              {"n_clamped", s.n_clamped},
              {"annotators", annotators}};
}

std::map<std::string, LatentType> truth_from_json(const json& j) {
  std::map<std::string, LatentType> out;
  try {
    for (const auto& a : j.at("annotators")) {
      out[a.at("annotator_id").get<std::string>()] =
          latent_type_from_string(a.at("latent_type").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed truth file: ") + e.what());
  }
  return out;
}

json to_json(const RecoveryReport& r) {
  return json{{"confusion", r.confusion},
              {"n", r.n},
              {"n_correct", r.n_correct},
              {"accuracy", r.accuracy}};
}

void write_synthetic(const SyntheticDataset& s, const std::filesystem::path& records,
                     const std::filesystem::path& metadata, const std::filesystem::path& truth) {
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
    return f;
  };
  {
    auto f = open(records);
    write_records_jsonl(f, s.dataset.records);
  }
  {
    auto f = open(metadata);
    write_metadata_jsonl(f, s.dataset.metadata);
  }
  auto f = open(truth);
  f << truth_to_json(s).dump(2) << '\n';
}

}  // namespace prefaudit::synth
