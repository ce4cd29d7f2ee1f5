// One PASS/FAIL/SKIP line per acceptance criterion. Exits nonzero when any
// criterion fails; SKIP (missing source data) does not fail the run.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "prefaudit/aggregation_sim.hpp"
#include "prefaudit/cli.hpp"
#include "prefaudit/diagnostics.hpp"
#include "prefaudit/inconsistency_ratio.hpp"
#include "prefaudit/ingest.hpp"
#include "prefaudit/pairing.hpp"
#include "prefaudit/planner.hpp"
#include "prefaudit/stats.hpp"
#include "prefaudit/synth.hpp"
#include "prefaudit/taxonomy.hpp"
#include "prefaudit/theme_client.hpp"

using namespace prefaudit;
namespace fs = std::filesystem;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict = Verdict::pass;
  std::string detail;
};

// Collects sub-check failures; the first one becomes the detail line.
struct Checks {
  std::vector<std::string> failures;
  std::ostringstream notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s.precision(12);
    s << what << ": got " << got << ", want " << want << " +/- " << tol;
    expect(std::fabs(got - want) <= tol, s.str());
  }
  Outcome result(std::string pass_detail) const {
    if (failures.empty()) return {Verdict::pass, std::move(pass_detail)};
    std::string d = failures.front();
    if (failures.size() > 1) d += " (+" + std::to_string(failures.size() - 1) + " more)";
    return {Verdict::fail, d};
  }
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(prec);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// 1. Oracle recovery

Outcome oracle_recovery() {
  const auto start = std::chrono::steady_clock::now();
  synth::GenerateConfig gc;
  for (auto t : {synth::LatentType::genuine, synth::LatentType::non_attitude,
                 synth::LatentType::constructed, synth::LatentType::artifact}) {
    gc.n_per_type[t] = 50;
  }
  gc.seed = 42;
  const std::size_t n_items = 400;
  const auto plan = planner::plan_tier(synth::plan_request(200, n_items, 10));
  const auto s = synth::generate(gc, n_items, plan);
  const auto profiles = diagnostics::compute_profiles(s.dataset);
  std::vector<taxonomy::RoutingDecision> routing;
  for (const auto& p : profiles) routing.push_back(taxonomy::decision_procedure(p));
  const auto rep = synth::score_recovery(s.truth, routing);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  double temp_sum = 0.0;
  std::size_t temp_n = 0, min_repeats = SIZE_MAX, min_frames = SIZE_MAX;
  for (const auto& p : profiles) {
    min_repeats = std::min(min_repeats, p.n_temp_pairs);
    min_frames = std::min(min_frames, p.n_frame_pairs);
    if (s.truth.at(p.annotator_id) == synth::LatentType::non_attitude && p.temp) {
      temp_sum += *p.temp;
      ++temp_n;
    }
  }
  const double na_temp = temp_n ? temp_sum / static_cast<double>(temp_n) : -1.0;

  Checks c;
  c.expect(plan.n_repeats_per_annotator == 20, "plan repeats per annotator != 20");
  c.expect(plan.n_within_framing_per_annotator == 10, "plan framing pairs per annotator != 10");
  c.expect(min_repeats >= 20 && min_frames >= 10, "an annotator lacks repeats or framing pairs");
  c.expect(rep.accuracy >= 0.90, "routing accuracy " + fmt(rep.accuracy) + " < 0.90");
  c.near(na_temp, 0.2775, 0.05, "non_attitude mean temp");
  c.expect(secs < 30.0, "runtime " + fmt(secs, 2) + " s >= 30 s");
  return c.result("accuracy " + fmt(rep.accuracy, 3) + " (" + std::to_string(rep.n_correct) + "/" +
                  std::to_string(rep.n) + "), non_attitude temp " + fmt(na_temp) +
                  " vs 0.2775, " + fmt(secs, 2) + " s");
}

// ---------------------------------------------------------------------------
// 2. Boundary exactness

Outcome boundary_exactness() {
  using taxonomy::PairCategory;
  Checks c;
  const std::vector<std::pair<double, PairCategory>> equivalent{
      {0, PairCategory::consistent}, {15, PairCategory::consistent}, {16, PairCategory::marginal},
      {30, PairCategory::marginal},  {31, PairCategory::excessive}};
  for (const auto& [delta, want] : equivalent) {
    const auto got = taxonomy::classify_equivalent_pair(50.0, 50.0 + delta).category;
    c.expect(got == want, "equivalent delta " + fmt(delta, 0) + " -> " + taxonomy::to_string(got));
  }
  // Expected b_more: +16 correct direction, 15 points wrong way, 16 wrong way.
  const std::vector<std::tuple<double, double, PairCategory, const char*>> directional{
      {50, 66, PairCategory::consistent, "+16"},
      {65, 50, PairCategory::marginal, "+15 wrong-direction"},
      {66, 50, PairCategory::violation, "-16"}};
  for (const auto& [a, b, want, name] : directional) {
    const auto got =
        taxonomy::classify_directional_pair(a, b, pairing::Direction::b_more).category;
    c.expect(got == want, std::string("directional ") + name + " -> " + taxonomy::to_string(got));
  }
  return c.result("equivalent {0,15,16,30,31} and directional {+16,+15 wrong,-16} exact");
}

// ---------------------------------------------------------------------------
// 3. Statistics kernel oracle (tests/oracles/stats_oracle.py)

Outcome stats_oracle() {
  const std::vector<double> v1{1, 2, 3}, v2{4, 5, 6};
  const std::vector<double> a{2.1, 3.4, 1.9, 5.6, 4.2}, b{6.3, 7.1, 5.8, 9.9};
  const std::vector<double> diffs{10, 10, 10, 14, 6};
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 5, 4, 5};
  Checks c;
  const double tol = 1e-9;
  const auto w1 = stats::welch_t(v1, v2);
  c.near(w1.statistic, -3.6742346141747673, tol, "welch t (v1, v2)");
  c.near(w1.df, 4.0, tol, "welch df (v1, v2)");
  const auto w2 = stats::welch_t(a, b);
  c.near(w2.statistic, -3.3533546131107284, tol, "welch t (a, b)");
  c.near(w2.df, 5.917901937331499, tol, "welch df (a, b)");
  c.near(w2.p_value, 0.01567810034734723, tol, "welch p (a, b)");
  const auto pt = stats::paired_t(diffs);
  c.near(pt.statistic, 7.905694150420948, tol, "paired t");
  c.near(pt.p_value, 0.0013849379404235027, tol, "paired p");
  c.near(stats::pearson_r(x, y), 0.7745966692414834, tol, "pearson r");
  c.near(stats::cohens_d(diffs).d, 3.5355339059327373, tol, "cohen's d");
  return c.result("welch, paired t, pearson r, cohen's d within 1e-9 on 5 vectors");
}

// ---------------------------------------------------------------------------
// 4. Inconsistency-ratio convergence (tests/oracles/ratio_oracle.py)

Outcome ratio_convergence() {
  const std::vector<double> history{12, 85, 40, 40, 97, 3, 66, 58, 21, 77, 50, 33};
  const double exhaustive = 37756.0 / 55.0;
  stats::SeededSampler sampler(2024, "acceptance/ratio");
  const double resampled = ratio::random_baseline(history, 5, 100000, sampler);
  const double rel = std::fabs(resampled - exhaustive) / exhaustive;

  stats::SeededSampler s2(2024, "acceptance/ratio-self");
  ratio::RatioConfig cfg;
  cfg.min_support = 5;
  const auto self = ratio::ratio_from_ratings(history, history, s2, cfg);

  Checks c;
  c.expect(rel < 0.01, "relative error " + fmt(100 * rel, 3) + "% >= 1%");
  c.expect(self.ratio == 1.0, "ratio of the full history = " + fmt(self.ratio, 15));
  return c.result("exhaustive " + fmt(exhaustive) + ", resampled " + fmt(resampled) + " (" +
                  fmt(100 * rel, 3) + "%), self ratio " + fmt(self.ratio, 1));
}

// ---------------------------------------------------------------------------
// 5. Planner reproduction

bool spacing_valid(const planner::AnnotatorSchedule& s, std::size_t spacing) {
  std::map<std::string, std::size_t> first_seen;
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    const auto& t = s.tasks[i];
    if (t.kind == planner::TaskKind::original) first_seen.emplace(t.item_id, i);
    if (t.kind != planner::TaskKind::repeat) continue;
    auto it = first_seen.find(t.item_id);
    if (it == first_seen.end() || i - it->second - 1 < spacing) return false;
  }
  return true;
}

Outcome planner_reproduction() {
  const auto plan = planner::plan_tier(1, 10000, 5, 0.50);
  Checks c;
  c.expect(plan.extra_annotations == 500,
           "extra annotations " + std::to_string(plan.extra_annotations));
  c.near(plan.extra_cost, 250.0, 1e-9, "extra cost");
  c.near(plan.overhead_pct, 5.0, 1e-9, "overhead %");

  std::vector<std::string> items, annotators;
  for (int i = 0; i < 10000; ++i) items.push_back("item-" + std::to_string(i));
  for (int a = 0; a < 5; ++a) annotators.push_back("ann-" + std::to_string(a));
  std::size_t checked = 0;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const auto schedule = planner::assign_diagnostics(plan, items, annotators, seed);
    for (const auto& s : schedule.annotators) {
      c.expect(spacing_valid(s, 20), "repeat within 20 positions for " + s.annotator_id);
      ++checked;
    }
  }
  return c.result("500 extra, $" + fmt(plan.extra_cost, 2) + ", " + fmt(plan.overhead_pct, 1) +
                  "% overhead; " + std::to_string(checked) + " schedules pass spacing scan");
}

// ---------------------------------------------------------------------------
// 6. Published-figure replication, conditional on source exports

struct SourceData {
  fs::path dir;
  bool has(const char* name) const { return fs::exists(dir / name); }
  fs::path at(const char* name) const { return dir / name; }
};

Outcome source_replication() {
  const char* env = std::getenv("PREFAUDIT_SOURCE_DATA");
  if (!env) return {Verdict::skip, "set PREFAUDIT_SOURCE_DATA to a directory of canonical exports"};
  const SourceData d{env};
  const char* required[] = {"prism_records.jsonl", "prism_embeddings.jsonl",
                            "pluriharms_records.jsonl", "pluriharms_metadata.jsonl",
                            "survey_records.jsonl", "survey_pairs.jsonl"};
  for (const char* f : required) {
    if (!d.has(f)) return {Verdict::skip, std::string("missing ") + (d.dir / f).string()};
  }

  Checks c;
  // Similar-pair prevalence.
  auto prism = load_records(d.at("prism_records.jsonl"), Format::jsonl).dataset;
  prism.embeddings = load_embeddings(d.at("prism_embeddings.jsonl"));
  const auto pp = pairing::find_similar_pairs(prism, 0.9, true);
  const auto pf = pairing::flag_inconsistencies(prism, pp, 15.0);
  c.expect(pf.summary.n_inconsistent_pairs == 136,
           "PRISM inconsistent pairs " + std::to_string(pf.summary.n_inconsistent_pairs));
  c.near(pf.summary.pct_inconsistent, 19.91, 0.005, "PRISM % inconsistent");
  c.expect(pf.summary.n_annotators_flagged == 103,
           "PRISM annotators " + std::to_string(pf.summary.n_annotators_flagged));
  c.near(pf.summary.mean_delta.value_or(-1), 33.96, 0.005, "PRISM mean delta");

  auto pluri = load_records(d.at("pluriharms_records.jsonl"), Format::jsonl).dataset;
  pluri.metadata = load_metadata(d.at("pluriharms_metadata.jsonl"));
  if (d.has("pluriharms_embeddings.jsonl")) {
    pluri.embeddings = load_embeddings(d.at("pluriharms_embeddings.jsonl"));
    const auto hf =
        pairing::flag_inconsistencies(pluri, pairing::find_similar_pairs(pluri, 0.9, true), 15.0);
    c.near(hf.summary.mean_delta.value_or(-1), 41.58, 0.005, "PluriHarms mean delta");
  } else {
    c.expect(false, "PluriHarms embeddings missing for the prevalence row");
  }

  // Pair categories on the survey.
  const auto survey = load_records(d.at("survey_records.jsonl"), Format::jsonl).dataset;
  const auto survey_pairs = pairing::load_pairs(d.at("survey_pairs.jsonl"));
  const auto rows = taxonomy::pair_category_table(survey, survey_pairs);
  const std::map<taxonomy::Scheme, std::tuple<std::size_t, double, double, double>> want{
      {taxonomy::Scheme::equivalent_scheme, {281, 70.8, 12.5, 16.7}},
      {taxonomy::Scheme::directional_scheme, {392, 27.0, 65.1, 7.9}}};
  for (const auto& r : rows) {
    const auto& [n, pc, pm, pi] = want.at(r.scheme);
    const double nn = static_cast<double>(r.n);
    c.expect(r.n == n, std::string(taxonomy::to_string(r.scheme)) + " n " + std::to_string(r.n));
    c.near(100 * r.consistent / nn, pc, 0.05, "survey consistent %");
    c.near(100 * r.marginal / nn, pm, 0.05, "survey marginal %");
    c.near(100 * r.inconsistent / nn, pi, 0.05, "survey inconsistent %");
  }

  // Ratio population statistics and flips.
  ratio::RatioConfig rc;
  const auto ratios = ratio::compute_all_ratios(pluri, rc);
  const auto pop = ratio::population_stats(ratios, pluri);
  c.near(pop.ratio_vs_one.statistic, -15.29, 0.005, "one-sample t");
  c.near(pop.median_split_welch.statistic, 5.31, 0.005, "median-split t");
  c.near(pop.mean_difference, 13.19, 0.005, "median-split mean difference");
  c.near(pop.pearson_ratio_rating.value_or(std::nan("")), -0.65, 0.005, "ratio-rating r");
  const auto flips =
      aggregation::pool_flip_simulation(pluri, ratio::annotator_mean_ratios(ratios), {});
  c.expect(flips.n_flips_low == 17, "low-pool flips " + std::to_string(flips.n_flips_low));
  c.expect(flips.n_flips_high == 11, "high-pool flips " + std::to_string(flips.n_flips_high));
  return c.result("prevalence, pair categories, ratio statistics and flips reproduced");
}

// ---------------------------------------------------------------------------
// 7. Determinism of seeded subcommands

std::string run_cli(const std::vector<std::string>& args, int& code) {
  std::ostringstream out, err;
  code = cli::run(args, out, err);
  return out.str() + err.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "prefaudit_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // Themed campaign for ratio and simulate.
  {
    stats::SeededSampler rng(5, "acceptance/fixture");
    std::vector<AnnotationRecord> records;
    for (int a = 0; a < 15; ++a) {
      for (int i = 0; i < 24; ++i) {
        AnnotationRecord r;
        r.annotator_id = "ann" + std::to_string(a);
        r.item_id = "item" + std::to_string(i);
        r.record_id = r.annotator_id + "-" + r.item_id;
        r.prompt_text = "prompt " + r.item_id;
        r.score = std::round(std::clamp(rng.normal(30.0 + 2.0 * i, 5.0 + 3.0 * (a % 5)), 0.0, 100.0));
        records.push_back(r);
      }
    }
    std::ofstream rec(dir / "themed.jsonl");
    write_records_jsonl(rec, records);
    std::map<std::string, ItemMetadata> meta;
    for (int i = 0; i < 24; ++i) {
      ItemMetadata m;
      m.item_id = "item" + std::to_string(i);
      m.theme_labels = std::set<std::string>{"theme" + std::to_string(i % 3)};
      meta[m.item_id] = m;
    }
    std::ofstream md(dir / "themed_meta.jsonl");
    write_metadata_jsonl(md, meta);
  }

  const std::string themed = (dir / "themed.jsonl").string();
  const std::string meta = (dir / "themed_meta.jsonl").string();
  const std::vector<std::pair<std::string, std::function<std::vector<std::string>(const fs::path&)>>>
      commands{
          {"synth",
           [](const fs::path& out) {
             return std::vector<std::string>{"synth", "--per-type", "3", "--n-items", "300",
                                             "--seed", "7", "--recover", "--out-dir",
                                             out.string()};
           }},
          {"ratio",
           [&](const fs::path& out) {
             return std::vector<std::string>{"ratio", "--input", themed, "--metadata", meta,
                                             "--seed", "7", "--output", (out / "o").string()};
           }},
          {"simulate",
           [&](const fs::path& out) {
             return std::vector<std::string>{"simulate", "--input", themed, "--metadata", meta,
                                             "--seed", "7", "--iterations", "300", "--output",
                                             (out / "o").string()};
           }},
          {"diagnose",
           [&](const fs::path& out) {
             return std::vector<std::string>{"diagnose", "--input", themed, "--metadata", meta,
                                             "--seed", "7", "--output", (out / "o").string()};
           }},
          {"weights",
           [&](const fs::path& out) {
             return std::vector<std::string>{"weights", "--input", themed, "--metadata", meta,
                                             "--seed", "7", "--output", (out / "o").string(),
                                             "--export", (out / "w").string()};
           }},
          {"plan",
           [](const fs::path& out) {
             return std::vector<std::string>{"plan", "--tier", "3", "--n-items", "600",
                                             "--n-annotators", "2", "--items-per-annotator",
                                             "600", "--seed", "7", "--output",
                                             (out / "o").string(), "--schedule",
                                             (out / "s").string()};
           }},
      };

  Checks c;
  std::size_t files = 0;
  for (const auto& [name, make] : commands) {
    std::vector<std::string> snapshots;
    for (int run = 0; run < 2; ++run) {
      // Same path both runs: outputs echo their own paths.
      const fs::path out = dir / name;
      fs::remove_all(out);
      fs::create_directories(out);
      int code = 0;
      std::string text = run_cli(make(out), code);
      c.expect(code == 0, name + " exited " + std::to_string(code) + ": " + text.substr(0, 200));
      for (const auto& e : fs::directory_iterator(out)) text += "\n@" + e.path().filename().string() + "\n" + slurp(e.path());
      snapshots.push_back(text);
    }
    c.expect(snapshots[0] == snapshots[1], name + " outputs differ between runs");
    c.expect(snapshots[0].size() > 100, name + " produced almost no output");
    ++files;
  }
  return c.result(std::to_string(files) + " seeded subcommands byte-identical across two runs");
}

// ---------------------------------------------------------------------------
// 8. Theme client protocol on mock transports

class ScriptedTransport : public themes::Transport {
 public:
  std::function<std::string(const std::string&, const std::string&)> reply;
  std::atomic<std::size_t> calls{0};
  std::string complete(const themes::EndpointConfig& e, const std::string& prompt) override {
    ++calls;
    return reply(e.endpoint_id, prompt);
  }
};

Outcome theme_protocol() {
  const std::vector<std::string> labels{"Privacy", "Violence", "Misinformation", "Fairness"};
  // Unroutable addresses: a transport that reached the network would fail.
  const std::vector<themes::EndpointConfig> endpoints{{"alpha", "http://192.0.2.1/v1", "", "m"},
                                                      {"beta", "http://192.0.2.2/v1", "", "m"},
                                                      {"gamma", "http://192.0.2.3/v1", "", "m"}};
  Dataset corpus;
  for (int i = 0; i < 20; ++i) {
    AnnotationRecord r;
    r.item_id = "p" + std::to_string(i);
    r.record_id = "r" + std::to_string(i);
    r.annotator_id = "a";
    r.prompt_text = "Prompt number " + std::to_string(i) + (i % 2 ? " about privacy" : "");
    corpus.records.push_back(r);
  }
  themes::RetryPolicy retry;
  retry.sleep = [](std::chrono::milliseconds) {};

  Checks c;
  // Unanimous intersection: alpha {Privacy, Fairness}, beta {Privacy}, gamma
  // {Privacy, Violence} on odd prompts; even prompts get disjoint sets.
  ScriptedTransport agree;
  agree.reply = [](const std::string& ep, const std::string& prompt) -> std::string {
    const bool privacy = prompt.find("about privacy") != std::string::npos;
    if (!privacy) return ep == "alpha" ? R"({"labels":["Violence"]})" : R"({"labels":["Fairness"]})";
    if (ep == "alpha") return R"({"labels":["Privacy","Fairness"]})";
    if (ep == "beta") return R"({"labels":["Privacy"]})";
    return R"({"labels":["Privacy","Violence"]})";
  };
  themes::LabelCache cache;
  const auto first = themes::label_corpus(corpus, labels, endpoints, agree, 4, cache, retry);
  std::size_t privacy = 0, empty = 0;
  for (const auto& [item, m] : first.patch) {
    if (m.theme_labels == std::set<std::string>{"Privacy"}) ++privacy;
    if (m.theme_labels && m.theme_labels->empty()) ++empty;
  }
  c.expect(first.patch.size() == 20, "patch covers " + std::to_string(first.patch.size()) + " prompts");
  c.expect(privacy == 10 && empty == 10, "intersection mismatch");
  c.expect(agree.calls == 60, "first pass made " + std::to_string(agree.calls.load()) + " calls");

  // Cache idempotence.
  ScriptedTransport silent;
  silent.reply = [](const std::string&, const std::string&) -> std::string {
    throw std::runtime_error("unexpected call");
  };
  const auto second = themes::label_corpus(corpus, labels, endpoints, silent, 4, cache, retry);
  c.expect(silent.calls == 0, "cached rerun made " + std::to_string(silent.calls.load()) + " calls");
  c.expect(themes::to_json(second).at("patch") == themes::to_json(first).at("patch"),
           "cached rerun changed the patch");

  // Malformed payload: retried twice, then the empty set with a warning.
  ScriptedTransport malformed;
  malformed.reply = [](const std::string& ep, const std::string&) -> std::string {
    return ep == "gamma" ? R"({"label":["Privacy"]})" : R"({"labels":["Privacy"]})";
  };
  themes::LabelCache fresh;
  const auto third = themes::label_corpus(corpus, labels, endpoints, malformed, 4, fresh, retry);
  bool all_empty = third.patch.size() == 20;
  bool all_warned = true;
  for (const auto& [item, m] : third.patch) all_empty = all_empty && m.theme_labels->empty();
  for (const auto& p : third.prompts) all_warned = all_warned && p.warnings.size() == 1;
  c.expect(all_empty, "malformed endpoint did not empty the intersection");
  c.expect(all_warned, "malformed endpoint produced no warning");
  c.expect(malformed.calls == 20 * (2 + 3), "retry count " + std::to_string(malformed.calls.load()));
  return c.result("intersection, retry-then-empty and cache idempotence on 20 prompts x 3 endpoints");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"oracle recovery", oracle_recovery},
      {"boundary exactness", boundary_exactness},
      {"statistics kernel oracle", stats_oracle},
      {"inconsistency-ratio convergence", ratio_convergence},
      {"planner reproduction", planner_reproduction},
      {"source-data replication", source_replication},
      {"determinism", determinism},
      {"theme client protocol", theme_protocol},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Verdict::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
    std::printf("[%s] %zu. %s: %s\n", tag, i + 1, criteria[i].first, o.detail.c_str());
    failed += o.verdict == Verdict::fail;
  }
  std::fflush(stdout);
  return failed == 0 ? 0 : 1;
}
