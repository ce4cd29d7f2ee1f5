#include "prefaudit/cli.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "prefaudit/aggregation_sim.hpp"
#include "prefaudit/diagnostics.hpp"
#include "prefaudit/error.hpp"
#include "prefaudit/inconsistency_ratio.hpp"
#include "prefaudit/ingest.hpp"
#include "prefaudit/pairing.hpp"
#include "prefaudit/planner.hpp"
#include "prefaudit/report.hpp"
#include "prefaudit/synth.hpp"
#include "prefaudit/taxonomy.hpp"
#include "prefaudit/theme_client.hpp"
#include "prefaudit/weighting.hpp"

namespace prefaudit::cli {

using nlohmann::json;

namespace {

struct Options {
  std::string config_file;
  // Inputs.
  std::string input;
  std::string input_format = "auto";
  std::string metadata;
  std::string embeddings;
  std::string pairs;
  std::string flags;
  std::string ratios;
  bool strict = false;
  // Outputs.
  std::string output;
  std::string format = "jsonl";
  std::string pairs_out;
  std::string dataset_name;
  // Thresholds.
  std::optional<double> tau;
  double sim_threshold = 0.9;
  double delta_threshold = 15.0;
  double t_temp = 0.5;
  double t_frame = 0.6;
  double t_order = 0.6;
  double t_artifact = 0.05;
  bool any_annotator = false;
  std::int64_t min_gap = 0;
  std::optional<double> anchor_tolerance;
  std::string reliability_mode = "weighted";
  double consistent_max = 15.0;
  double marginal_max = 30.0;
  double artifact_floor = 40.0;
  // Randomised procedures.
  std::uint64_t seed = 0;
  std::size_t resamples = 1000;
  std::size_t min_support = 5;
  bool exclude_theme_items = false;
  std::size_t iterations = 1000;
  std::size_t sample_size = 5;
  double harm_threshold = 50.0;
  // Weights.
  std::string weight_mode = "linear";
  std::string policy = "weight";
  std::string export_path;
  double annotator_threshold = 0.5;
  double item_threshold = 0.5;
  std::string estimator = "half_msd";
  // Planner.
  int tier = 1;
  std::size_t n_items = 0;
  std::size_t n_annotators = 0;
  double cost = 0.0;
  std::optional<std::size_t> items_per_annotator;
  std::optional<double> repeat_rate;
  std::optional<double> framing_rate;
  std::optional<double> within_framing_rate;
  std::optional<double> retest_rate;
  std::size_t min_spacing = 20;
  std::size_t session_length = 100;
  std::string schedule_path;
  // Calibration.
  std::string method = "scale";
  std::string scale = "continuous_0_100";
  std::string diffs;
  double k = 2.0;
  double flip_margin = 15.0;
  // Synthetic data.
  std::size_t per_type = 50;
  std::size_t framing_pairs = 10;
  std::size_t anchors = 20;
  double noise_sd = 5.0;
  double framing_offset_sd = 30.0;
  double artifact_rate = 0.3;
  std::string out_dir;
  bool recover = false;
  // Themes.
  std::string labels;
  std::string endpoints;
  std::string cache;
  std::size_t concurrency = 4;
  // Report inputs.
  std::vector<std::string> prevalence_files;
  std::string classification_file;
  std::string ratio_file;
  std::string flips_file;
};

// Result of one subcommand: text for the output sink and an exit code.
struct Output {
  std::string text;
  int code = kOk;
};

void require_format(const Options& o, std::initializer_list<const char*> allowed, const std::string& cmd) {
  for (const char* f : allowed) {
    if (o.format == f) return;
  }
  std::string list;
  for (const char* f : allowed) list += (list.empty() ? "" : ", ") + std::string(f);
  throw ConfigError(cmd + " supports --format " + list);
}

std::string config_line(const json& config) { return json{{"_config", config}}.dump() + "\n"; }
std::string summary_line(const json& summary) { return json{{"_summary", summary}}.dump() + "\n"; }
std::string comment_line(const json& config) { return "# config " + config.dump() + "\n"; }

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::string csv_num(const json& v) { return v.is_null() ? std::string() : v.dump(); }

json input_config(const Options& o) {
  json j{{"input", o.input}, {"input_format", o.input_format}, {"strict", o.strict}};
  if (!o.metadata.empty()) j["metadata"] = o.metadata;
  if (!o.embeddings.empty()) j["embeddings"] = o.embeddings;
  if (!o.pairs.empty()) j["pairs"] = o.pairs;
  return j;
}

json base_config(const Options& o, const std::string& cmd) {
  json j{{"subcommand", cmd}, {"format", o.format}};
  if (!o.config_file.empty()) j["config_file"] = o.config_file;
  return j;
}

Dataset load_dataset(const Options& o, std::ostream& err, bool need_input = true) {
  Dataset ds;
  if (!o.input.empty()) {
    const Format f = o.input_format == "auto" ? format_from_path(o.input)
                     : o.input_format == "csv" ? Format::csv
                                               : Format::jsonl;
    auto res = load_records(o.input, f, LoadOptions{o.strict});
    if (!res.rejected.empty()) {
      err << "warning: " << res.rejected.size() << " of " << res.rows_read
          << " rows rejected (first: line " << res.rejected.front().line << ": "
          << res.rejected.front().reason << ")\n";
    }
    ds = std::move(res.dataset);
  } else if (need_input) {
    throw ConfigError("--input is required");
  }
  if (!o.metadata.empty()) ds.metadata = load_metadata(o.metadata);
  if (!o.embeddings.empty()) ds.embeddings = load_embeddings(o.embeddings);
  return ds;
}

double effective_tau(const Options& o, const Dataset& ds) {
  return o.tau.value_or(diagnostics::default_tau(ds.scale_kind));
}

diagnostics::DiagnosticConfig diagnostic_config(const Options& o) {
  diagnostics::DiagnosticConfig c;
  c.tau = o.tau;
  c.min_timestamp_gap = o.min_gap;
  c.anchor_tolerance = o.anchor_tolerance;
  c.ratio.seed = o.seed;
  c.ratio.resamples = o.resamples;
  c.ratio.min_support = o.min_support;
  c.reliability.mode = diagnostics::reliability_mode_from_string(o.reliability_mode);
  c.reliability.temp_threshold = o.t_temp;
  c.reliability.frame_threshold = o.t_frame;
  return c;
}

taxonomy::RoutingThresholds routing_thresholds(const Options& o) {
  return {o.t_temp, o.t_frame, o.t_order, o.t_artifact};
}

json diagnostic_config_json(const Options& o, const Dataset& ds) {
  return json{{"tau", effective_tau(o, ds)},
              {"min_gap", o.min_gap},
              {"anchor_tolerance", o.anchor_tolerance ? json(*o.anchor_tolerance) : json(effective_tau(o, ds))},
              {"reliability_mode", o.reliability_mode},
              {"t_temp", o.t_temp},
              {"t_frame", o.t_frame},
              {"t_order", o.t_order},
              {"t_artifact", o.t_artifact},
              {"seed", o.seed},
              {"resamples", o.resamples},
              {"min_support", o.min_support}};
}

std::vector<pairing::PromptPair> equivalent_pairs(const Options& o) {
  if (o.pairs.empty()) return {};
  return pairing::load_pairs(o.pairs);
}

// Reads the record lines of a JSONL file produced by a subcommand, skipping
// config and summary lines; the summary (if any) is returned separately.
std::vector<json> read_jsonl(const std::string& path, json* summary = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::vector<json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (j.is_object() && j.contains("_summary")) {
      if (summary) *summary = j["_summary"];
    } else if (!is_run_marker(j)) {
      rows.push_back(std::move(j));
    }
  }
  return rows;
}

json read_summary(const std::string& path) {
  json s;
  read_jsonl(path, &s);
  if (s.is_null()) throw DataError("'" + path + "' has no summary line");
  return s;
}

// ---------------------------------------------------------------------------

Output cmd_validate(const Options& o, std::ostream& err) {
  require_format(o, {"jsonl", "report"}, "validate");
  const Format f = o.input_format == "auto" ? format_from_path(o.input)
                   : o.input_format == "csv" ? Format::csv
                                             : Format::jsonl;
  auto res = load_records(o.input, f, LoadOptions{o.strict});
  if (!o.metadata.empty()) res.dataset.metadata = load_metadata(o.metadata);
  if (!o.embeddings.empty()) res.dataset.embeddings = load_embeddings(o.embeddings);
  const auto report = validate(res.dataset);
  json config = base_config(o, "validate");
  config["inputs"] = input_config(o);

  json rejected = json::array();
  for (const auto& r : res.rejected) rejected.push_back({{"line", r.line}, {"reason", r.reason}});
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';

  if (o.format == "report") {
    json fields = to_json(report);
    fields.erase("warnings");
    fields["rows_read"] = res.rows_read;
    fields["rows_rejected"] = res.rejected.size();
    std::string text = comment_line(config) + report::render(report::field_table("Dataset validation", fields));
    for (const auto& w : report.warnings) text += "warning: " + w + "\n";
    return {text};
  }
  json j{{"config", config}, {"rows_read", res.rows_read}, {"rejected", rejected}, {"report", to_json(report)}};
  return {j.dump() + "\n"};
}

Output cmd_flags(const Options& o, std::ostream& err, bool similar) {
  const std::string cmd = similar ? "pairs" : "repeats";
  require_format(o, {"jsonl", "csv", "report"}, cmd);
  Dataset ds = load_dataset(o, err);
  if (similar && !ds.embeddings) throw ConfigError("pairs needs --embeddings");

  const auto found = similar ? pairing::find_similar_pairs(ds, o.sim_threshold, !o.any_annotator)
                             : pairing::find_repeat_pairs(ds);
  const auto result = pairing::flag_inconsistencies(ds, found, o.delta_threshold);
  const auto ladder = pairing::filter_ladder(result.flags, pairing::default_ladder(ds));

  const std::string name =
      o.dataset_name.empty() ? std::filesystem::path(o.input).stem().string() : o.dataset_name;
  json config = base_config(o, cmd);
  config["inputs"] = input_config(o);
  config["dataset_name"] = name;
  config["delta_threshold"] = o.delta_threshold;
  if (similar) {
    config["sim_threshold"] = o.sim_threshold;
    config["same_annotator"] = !o.any_annotator;
  }

  if (!o.pairs_out.empty()) {
    std::ofstream f(o.pairs_out);
    if (!f) throw std::runtime_error("cannot write '" + o.pairs_out + "'");
    f << config_line(config);
    for (const auto& p : found) f << pairing::to_json(p).dump() << '\n';
  }

  json ladder_json = json::array();
  for (const auto& r : ladder) ladder_json.push_back({{"stage", r.stage}, {"count", r.count}});
  json summary{{"dataset", name},
               {"n_pairs", found.size()},
               {"prevalence", pairing::to_json(result.summary)},
               {"ladder", ladder_json}};

  std::ostringstream out;
  if (o.format == "report") {
    out << comment_line(config)
        << report::render(report::prevalence_table({{name, summary["prevalence"]}})) << '\n'
        << report::render(report::ladder_table(ladder_json));
  } else if (o.format == "csv") {
    out << comment_line(config)
        << "annotator_id,pair_id,item_a,item_b,kind,record_a,record_b,score_a,score_b,delta,threshold\n";
    for (const auto& f : result.flags) {
      out << csv_cell(f.annotator_id) << ',' << csv_cell(f.pair.pair_id) << ',' << csv_cell(f.pair.item_a)
          << ',' << csv_cell(f.pair.item_b) << ',' << pairing::to_string(f.pair.kind) << ','
          << csv_cell(f.record_a) << ',' << csv_cell(f.record_b) << ',' << json(f.score_a).dump() << ','
          << json(f.score_b).dump() << ',' << json(f.delta).dump() << ',' << json(f.threshold_used).dump()
          << '\n';
    }
  } else {
    out << config_line(config);
    for (const auto& f : result.flags) out << pairing::to_json(f).dump() << '\n';
    out << summary_line(summary);
  }
  return {out.str()};
}

Output cmd_diagnose(const Options& o, std::ostream& err) {
  require_format(o, {"jsonl", "csv", "report"}, "diagnose");
  Dataset ds = load_dataset(o, err);
  const auto eq = equivalent_pairs(o);
  const auto profiles = diagnostics::compute_profiles(ds, diagnostic_config(o), eq);
  const auto thresholds = routing_thresholds(o);

  json config = base_config(o, "diagnose");
  config["inputs"] = input_config(o);
  config["thresholds"] = diagnostic_config_json(o, ds);

  std::map<std::string, std::size_t> counts;
  for (auto r : {taxonomy::Routing::filter_downweight, taxonomy::Routing::elicit_carefully,
                 taxonomy::Routing::fix_instrument, taxonomy::Routing::use_as_signal}) {
    counts[taxonomy::to_string(r)] = 0;
  }
  std::size_t unscored = 0;
  std::vector<json> rows;
  for (const auto& p : profiles) {
    json j = diagnostics::to_json(p);
    try {
      const auto d = taxonomy::decision_procedure(p, thresholds);
      j["routing"] = taxonomy::to_string(d.routing);
      j["routing_reason"] = d.reason;
      ++counts[taxonomy::to_string(d.routing)];
    } catch (const InsufficientSupport& e) {
      j["routing"] = nullptr;
      j["routing_reason"] = e.what();
      ++unscored;
    }
    rows.push_back(std::move(j));
  }
  if (unscored) err << "warning: " << unscored << " annotators have no diagnostic component\n";

  std::ostringstream out;
  if (o.format == "report") {
    out << comment_line(config) << report::render(report::routing_table(counts));
  } else if (o.format == "csv") {
    static const char* cols[] = {"temp", "frame", "order", "cross", "n_temp_pairs", "n_frame_pairs",
                                 "n_order_pairs", "n_cross_items", "anchor_failure_rate",
                                 "n_anchor_items", "reliability"};
    out << comment_line(config) << "annotator_id";
    for (const char* c : cols) out << ',' << c;
    out << ",routing\n";
    for (const auto& j : rows) {
      out << csv_cell(j["annotator_id"].get<std::string>());
      for (const char* c : cols) out << ',' << csv_num(j.value(c, json()));
      out << ',' << (j["routing"].is_null() ? std::string() : j["routing"].get<std::string>()) << '\n';
    }
  } else {
    out << config_line(config);
    for (const auto& j : rows) out << j.dump() << '\n';
    out << summary_line({{"n_annotators", profiles.size()}, {"routing_counts", counts}, {"n_unscored", unscored}});
  }
  return {out.str()};
}

Output cmd_classify(const Options& o, std::ostream& err) {
  require_format(o, {"jsonl", "csv", "report"}, "classify");
  if (o.flags.empty()) throw ConfigError("classify needs --flags");
  Dataset ds = load_dataset(o, err, false);
  std::vector<pairing::InconsistencyFlag> flags;
  for (const auto& j : read_jsonl(o.flags)) flags.push_back(pairing::flag_from_json(j));

  taxonomy::ClassifyConfig cc;
  cc.artifact_floor = o.artifact_floor;
  cc.genuine_max_delta = o.marginal_max;
  cc.pair = {o.consistent_max, o.marginal_max};
  const auto labels = taxonomy::classify_flags(flags, ds, cc);
  const auto rows = taxonomy::classification_summary(labels);

  json config = base_config(o, "classify");
  config["inputs"] = input_config(o);
  config["inputs"]["flags"] = o.flags;
  config["consistent_max"] = o.consistent_max;
  config["marginal_max"] = o.marginal_max;
  config["artifact_floor"] = o.artifact_floor;

  json rows_json = json::array();
  for (const auto& r : rows) rows_json.push_back(taxonomy::to_json(r));
  json categories = json::array();
  if (!o.pairs.empty() && !ds.records.empty()) {
    const auto pairs = pairing::load_pairs(o.pairs);
    for (const auto& r : taxonomy::pair_category_table(ds, pairs, cc.pair)) {
      categories.push_back(taxonomy::to_json(r));
    }
  }

  std::ostringstream out;
  if (o.format == "report") {
    out << comment_line(config) << report::render(report::classification_table(rows_json));
    if (!categories.empty()) out << '\n' << report::render(report::pair_category_table(categories));
  } else if (o.format == "csv") {
    out << comment_line(config) << "annotator_id,pair_id,record_a,record_b,delta,label,pair_category,rule_trace\n";
    for (const auto& l : labels) {
      std::string trace;
      for (const auto& t : l.rule_trace) trace += (trace.empty() ? "" : ";") + t;
      out << csv_cell(l.annotator_id) << ',' << csv_cell(l.pair_id) << ',' << csv_cell(l.record_a) << ','
          << csv_cell(l.record_b) << ',' << json(l.delta).dump() << ',' << taxonomy::to_string(l.label) << ','
          << taxonomy::to_string(l.pair_class.category) << ',' << csv_cell(trace) << '\n';
    }
  } else {
    out << config_line(config);
    for (const auto& l : labels) out << taxonomy::to_json(l).dump() << '\n';
    out << summary_line({{"n", labels.size()}, {"classification", rows_json}, {"pair_categories", categories}});
  }
  return {out.str()};
}

ratio::RatioConfig ratio_config(const Options& o) {
  ratio::RatioConfig c;
  c.resamples = o.resamples;
  c.seed = o.seed;
  c.min_support = o.min_support;
  c.exclude_theme_items = o.exclude_theme_items;
  return c;
}

json ratio_config_json(const Options& o) {
  return json{{"seed", o.seed},
              {"resamples", o.resamples},
              {"min_support", o.min_support},
              {"exclude_theme_items", o.exclude_theme_items}};
}

Output cmd_ratio(const Options& o, std::ostream& err) {
  require_format(o, {"jsonl", "csv", "report"}, "ratio");
  Dataset ds = load_dataset(o, err);
  const auto ratios = ratio::compute_all_ratios(ds, ratio_config(o));
  json config = base_config(o, "ratio");
  config["inputs"] = input_config(o);
  config["ratio"] = ratio_config_json(o);

  json population = nullptr;
  if (ratios.empty()) {
    err << "warning: no (annotator, theme) cell reaches the minimum support\n";
  } else {
    try {
      population = ratio::to_json(ratio::population_stats(ratios, ds));
    } catch (const DataError& e) {
      err << "warning: population statistics unavailable: " << e.what() << '\n';
    }
  }

  std::ostringstream out;
  if (o.format == "report") {
    out << comment_line(config) << report::render(report::ratio_table(population));
  } else if (o.format == "csv") {
    out << comment_line(config) << "annotator_id,theme,n_items,var_within,baseline,ratio,band,degenerate\n";
    for (const auto& r : ratios) {
      out << csv_cell(r.annotator_id) << ',' << csv_cell(r.theme) << ',' << r.n_items << ','
          << json(r.var_within).dump() << ',' << json(r.baseline).dump() << ',' << json(r.ratio).dump() << ','
          << ratio::to_string(r.band) << ',' << (r.degenerate ? "true" : "false") << '\n';
    }
  } else {
    out << config_line(config);
    for (const auto& r : ratios) out << ratio::to_json(r).dump() << '\n';
    out << summary_line({{"n_cells", ratios.size()},
                         {"annotator_mean_ratios", ratio::annotator_mean_ratios(ratios)},
                         {"population", population}});
  }
  return {out.str()};
}

Output cmd_simulate(const Options& o, std::ostream& err) {
  require_format(o, {"jsonl", "report"}, "simulate");
  Dataset ds = load_dataset(o, err);
  std::vector<ratio::RatioRecord> ratios;
  if (!o.ratios.empty()) {
    for (const auto& j : read_jsonl(o.ratios)) ratios.push_back(ratio::ratio_from_json(j));
  } else {
    ratios = ratio::compute_all_ratios(ds, ratio_config(o));
  }
  aggregation::SimulationConfig sc{o.iterations, o.sample_size, o.harm_threshold, o.seed};
  const auto rep = aggregation::pool_flip_simulation(ds, ratio::annotator_mean_ratios(ratios), sc);

  json config = base_config(o, "simulate");
  config["inputs"] = input_config(o);
  if (!o.ratios.empty()) config["inputs"]["ratios"] = o.ratios;
  config["ratio"] = ratio_config_json(o);
  config["iterations"] = o.iterations;
  config["sample_size"] = o.sample_size;
  config["harm_threshold"] = o.harm_threshold;

  json j = aggregation::to_json(rep);
  const json prompts = j["prompts"];
  j.erase("prompts");
  std::ostringstream out;
  if (o.format == "report") {
    out << comment_line(config) << report::render(report::flip_table(j));
  } else {
    out << config_line(config);
    for (const auto& p : prompts) out << p.dump() << '\n';
    out << summary_line(j);
  }
  return {out.str()};
}

Output cmd_weights(const Options& o, std::ostream& err) {
  require_format(o, {"jsonl", "report"}, "weights");
  Dataset ds = load_dataset(o, err);
  const double tau = effective_tau(o, ds);
  const auto profiles = diagnostics::compute_profiles(ds, diagnostic_config(o), equivalent_pairs(o));
  const auto item_rel = weighting::item_reliabilities(ds, tau, o.min_gap);
  weighting::WeightParams params;
  params.mode = weighting::weight_mode_from_string(o.weight_mode);
  params.annotator_threshold = o.annotator_threshold;
  params.item_threshold = o.item_threshold;
  const auto table = weighting::build_weights(ds, profiles, params, item_rel);
  const auto policy = weighting::export_policy_from_string(o.policy);
  if (o.estimator != "half_msd" && o.estimator != "mad") {
    throw ConfigError("--estimator must be half_msd or mad");
  }
  const auto estimator = o.estimator == "mad" ? weighting::ArtifactEstimator::mean_absolute_deviation
                                              : weighting::ArtifactEstimator::half_mean_squared_difference;

  json config = base_config(o, "weights");
  config["inputs"] = input_config(o);
  config["thresholds"] = diagnostic_config_json(o, ds);
  config["weights"] = {{"mode", o.weight_mode},
                       {"annotator_threshold", o.annotator_threshold},
                       {"item_threshold", o.item_threshold},
                       {"policy", o.policy},
                       {"estimator", o.estimator}};

  json variance = nullptr;
  try {
    variance = weighting::to_json(weighting::variance_decomposition(ds, tau, estimator, o.min_gap));
  } catch (const InsufficientSupport& e) {
    err << "warning: variance decomposition unavailable: " << e.what() << '\n';
  }
  json summary{{"n_records", ds.records.size()},
               {"unscored_annotators", table.unscored_annotators},
               {"n_items_with_reliability", item_rel.size()},
               {"variance", variance}};
  if (!o.export_path.empty()) {
    std::ofstream f(o.export_path);
    if (!f) throw std::runtime_error("cannot write '" + o.export_path + "'");
    f << config_line(config);
    summary["export"] = weighting::to_json(weighting::export_weighted(ds, table, policy, f));
    summary["export_path"] = o.export_path;
  }

  std::ostringstream out;
  if (o.format == "report") {
    out << comment_line(config)
        << report::render(report::field_table("Variance decomposition", variance.is_null() ? json::object() : variance));
  } else {
    out << config_line(config);
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      const auto& r = ds.records[i];
      out << json{{"record_id", r.record_id},
                  {"annotator_id", r.annotator_id},
                  {"item_id", r.item_id},
                  {"weight", table.weights[i]}}
                 .dump()
          << '\n';
    }
    out << summary_line(summary);
  }
  return {out.str()};
}

planner::PlanRequest plan_request(const Options& o) {
  planner::PlanRequest r;
  r.tier = o.tier;
  r.n_items = o.n_items;
  r.n_annotators = o.n_annotators;
  r.cost_per_annotation = o.cost;
  r.items_per_annotator = o.items_per_annotator;
  r.repeat_rate = o.repeat_rate;
  r.framing_rate = o.framing_rate;
  r.within_annotator_framing_rate = o.within_framing_rate;
  r.retest_rate = o.retest_rate;
  r.min_spacing = o.min_spacing;
  r.session_length = o.session_length;
  return r;
}

Output cmd_plan(const Options& o, std::ostream&) {
  require_format(o, {"jsonl", "report"}, "plan");
  const auto plan = planner::plan_tier(plan_request(o));
  json config = base_config(o, "plan");
  config["request"] = {{"tier", o.tier},
                       {"n_items", o.n_items},
                       {"n_annotators", o.n_annotators},
                       {"cost_per_annotation", o.cost},
                       {"seed", o.seed}};
  if (!o.schedule_path.empty()) {
    std::vector<std::string> items, annotators;
    for (std::size_t i = 0; i < plan.n_items; ++i) items.push_back("item-" + std::to_string(i));
    for (std::size_t a = 0; a < plan.n_annotators; ++a) annotators.push_back("annotator-" + std::to_string(a));
    const auto schedule = planner::assign_diagnostics(plan, items, annotators, o.seed);
    std::ofstream f(o.schedule_path);
    if (!f) throw std::runtime_error("cannot write '" + o.schedule_path + "'");
    json j = planner::to_json(schedule);
    j["config"] = config;
    f << j.dump() << '\n';
  }
  if (o.format == "report") {
    return {comment_line(config) + report::render(report::field_table("Tier " + std::to_string(plan.tier) + " plan",
                                                                      planner::to_json(plan)))};
  }
  return {json{{"config", config}, {"plan", planner::to_json(plan)}}.dump() + "\n"};
}

std::vector<double> read_numbers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  try {
    if (first != std::string::npos && text[first] == '[') return json::parse(text).get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw DataError("'" + path + "': " + e.what());
  }
  std::vector<double> out;
  std::istringstream s(text);
  std::string tok;
  while (s >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw DataError("'" + path + "': '" + tok + "' is not a number");
    out.push_back(v);
  }
  return out;
}

Output cmd_calibrate(const Options& o, std::ostream&) {
  require_format(o, {"jsonl", "report"}, "calibrate");
  const ScaleKind scale = scale_kind_from_string(o.scale);
  planner::ThresholdCalibration c;
  json config = base_config(o, "calibrate");
  config["method"] = o.method;
  config["scale"] = o.scale;
  if (o.method == "empirical") {
    if (o.diffs.empty()) throw ConfigError("empirical calibration needs --diffs");
    const auto diffs = read_numbers(o.diffs);
    c = planner::calibrate_empirical(diffs, o.k, scale);
    config["diffs"] = o.diffs;
    config["k"] = o.k;
  } else if (o.method == "scale") {
    c = planner::calibrate_scale(scale);
  } else if (o.method == "consequence") {
    c = planner::calibrate_consequence(scale, o.flip_margin);
    config["flip_margin"] = o.flip_margin;
  } else {
    throw ConfigError("--method must be empirical, scale or consequence");
  }
  if (o.format == "report") {
    return {comment_line(config) + report::render(report::field_table("Threshold calibration", planner::to_json(c)))};
  }
  return {json{{"config", config}, {"calibration", planner::to_json(c)}}.dump() + "\n"};
}

Output cmd_synth(const Options& o, std::ostream&) {
  require_format(o, {"jsonl", "report"}, "synth");
  synth::GenerateConfig gc;
  for (auto t : {synth::LatentType::genuine, synth::LatentType::non_attitude, synth::LatentType::constructed,
                 synth::LatentType::artifact}) {
    gc.n_per_type[t] = o.per_type;
  }
  gc.params = {o.noise_sd, o.framing_offset_sd, o.artifact_rate};
  gc.n_anchor_items = o.anchors;
  gc.seed = o.seed;
  if (o.n_items == 0) throw ConfigError("synth needs --n-items");

  planner::PlanRequest req = synth::plan_request(4 * o.per_type, o.n_items, o.framing_pairs);
  if (o.items_per_annotator) {
    req.items_per_annotator = *o.items_per_annotator;
    req.within_annotator_framing_rate =
        static_cast<double>(o.framing_pairs) / static_cast<double>(*o.items_per_annotator);
  }
  req.repeat_rate = o.repeat_rate;
  req.min_spacing = o.min_spacing;
  req.session_length = o.session_length;
  const auto plan = planner::plan_tier(req);
  const auto s = synth::generate(gc, o.n_items, plan);

  json config = base_config(o, "synth");
  config["per_type"] = o.per_type;
  config["n_items"] = o.n_items;
  config["items_per_annotator"] = *req.items_per_annotator;
  config["repeat_rate"] = plan.repeat_rate;
  config["framing_pairs"] = o.framing_pairs;
  config["anchors"] = o.anchors;
  config["params"] = {{"noise_sd", o.noise_sd}, {"framing_offset_sd", o.framing_offset_sd}, {"artifact_rate", o.artifact_rate}};
  config["seed"] = o.seed;

  if (!o.out_dir.empty()) {
    const std::filesystem::path dir(o.out_dir);
    std::filesystem::create_directories(dir);
    std::ofstream rec(dir / "records.jsonl"), meta(dir / "metadata.jsonl"), truth(dir / "truth.json");
    if (!rec || !meta || !truth) throw std::runtime_error("cannot write into '" + o.out_dir + "'");
    rec << config_line(config);
    write_records_jsonl(rec, s.dataset.records);
    write_metadata_jsonl(meta, s.dataset.metadata);
    json t = synth::truth_to_json(s);
    t["config"] = config;
    truth << t.dump(2) << '\n';
  }

  json recovery = nullptr;
  if (o.recover) {
    diagnostics::DiagnosticConfig dc = diagnostic_config(o);
    const auto profiles = diagnostics::compute_profiles(s.dataset, dc);
    std::vector<taxonomy::RoutingDecision> routing;
    for (const auto& p : profiles) routing.push_back(taxonomy::decision_procedure(p, routing_thresholds(o)));
    recovery = synth::to_json(synth::score_recovery(s.truth, routing));
  }
  json summary{{"config", config},
               {"n_records", s.dataset.records.size()},
               {"n_annotators", s.annotators.size()},
               {"n_clamped", s.n_clamped},
               {"plan", planner::to_json(plan)},
               {"recovery", recovery}};
  if (o.format == "report") {
    return {comment_line(config) + report::render(report::confusion_table(recovery))};
  }
  return {summary.dump() + "\n"};
}

std::vector<std::string> read_label_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    try {
      return json::parse(text).get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw DataError("'" + path + "': " + e.what());
    }
  }
  std::vector<std::string> out;
  std::istringstream s(text);
  std::string line;
  while (std::getline(s, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

Output cmd_themes(const Options& o, std::ostream& err) {
  require_format(o, {"jsonl"}, "themes");
  if (o.labels.empty() || o.endpoints.empty()) throw ConfigError("themes needs --labels and --endpoints");
  Dataset ds = load_dataset(o, err);
  const auto labels = read_label_list(o.labels);
  const auto endpoints = themes::load_endpoints(o.endpoints);
  auto cache = o.cache.empty() ? themes::LabelCache() : themes::LabelCache::load(o.cache);
  themes::HttpTransport transport;
  const auto result = themes::label_corpus(ds, labels, endpoints, transport, o.concurrency, cache);
  if (!o.cache.empty()) cache.save(o.cache);

  json config = base_config(o, "themes");
  config["inputs"] = input_config(o);
  config["labels"] = o.labels;
  config["endpoints"] = o.endpoints;
  config["cache"] = o.cache;
  config["concurrency"] = o.concurrency;

  std::ostringstream out;
  out << config_line(config);
  write_metadata_jsonl(out, result.patch);
  out << summary_line(themes::to_json(result));
  for (const auto& p : result.prompts) {
    for (const auto& w : p.warnings) err << "warning: " << p.item_id << ": " << w << '\n';
    if (!p.error.empty()) err << "error: " << p.item_id << ": " << p.error << '\n';
  }
  const bool all_failed = !result.prompts.empty() && result.n_failed == result.prompts.size();
  return {out.str(), all_failed ? kRuntime : kOk};
}

Output cmd_report(const Options& o, std::ostream&) {
  if (o.prevalence_files.empty() && o.classification_file.empty() && o.ratio_file.empty() &&
      o.flips_file.empty()) {
    throw ConfigError("report needs at least one of --prevalence, --classification, --ratio, --flips");
  }
  json config = base_config(o, "report");
  config["format"] = "report";
  std::ostringstream out;
  std::vector<std::string> sections;
  if (!o.prevalence_files.empty()) {
    std::vector<std::pair<std::string, json>> rows;
    for (const auto& f : o.prevalence_files) {
      const json s = read_summary(f);
      rows.emplace_back(s.value("dataset", std::filesystem::path(f).stem().string()), s.at("prevalence"));
    }
    sections.push_back(report::render(report::prevalence_table(rows)));
    config["prevalence"] = o.prevalence_files;
  }
  if (!o.classification_file.empty()) {
    const json s = read_summary(o.classification_file);
    sections.push_back(report::render(report::classification_table(s.at("classification"))));
    if (!s.value("pair_categories", json::array()).empty()) {
      sections.push_back(report::render(report::pair_category_table(s["pair_categories"])));
    }
    config["classification"] = o.classification_file;
  }
  if (!o.ratio_file.empty()) {
    sections.push_back(report::render(report::ratio_table(read_summary(o.ratio_file).at("population"))));
    config["ratio"] = o.ratio_file;
  }
  if (!o.flips_file.empty()) {
    sections.push_back(report::render(report::flip_table(read_summary(o.flips_file))));
    config["flips"] = o.flips_file;
  }
  out << comment_line(config);
  for (std::size_t i = 0; i < sections.size(); ++i) out << (i ? "\n" : "") << sections[i];
  return {out.str()};
}

// ---------------------------------------------------------------------------

void add_input(CLI::App* c, Options& o, bool required = true) {
  auto* in = c->add_option("-i,--input", o.input, "Annotation records (JSONL or CSV)");
  if (required) in->required();
  c->add_option("--input-format", o.input_format, "auto, jsonl or csv")
      ->check(CLI::IsMember({"auto", "jsonl", "csv"}));
  c->add_option("--metadata", o.metadata, "Item metadata JSONL");
  c->add_flag("--strict", o.strict, "Fail on the first malformed row");
}

void add_output(CLI::App* c, Options& o, std::initializer_list<const char*> formats) {
  c->add_option("-o,--output", o.output, "Output file (default: standard output)");
  std::vector<std::string> f(formats.begin(), formats.end());
  c->add_option("--format", o.format, "Output format")->check(CLI::IsMember(f));
}

void add_diagnostic_options(CLI::App* c, Options& o) {
  c->add_option("--tau", o.tau, "Consistency tolerance on the raw scale (default by scale)");
  c->add_option("--min-gap", o.min_gap, "Same-session repeats need a larger timestamp gap");
  c->add_option("--anchor-tolerance", o.anchor_tolerance, "Anchor failure tolerance (default tau)");
  c->add_option("--reliability-mode", o.reliability_mode, "weighted, min or hierarchical")
      ->check(CLI::IsMember({"weighted", "min", "hierarchical"}));
  c->add_option("--t-temp", o.t_temp, "Temporal consistency routing threshold");
  c->add_option("--t-frame", o.t_frame, "Framing consistency routing threshold");
  c->add_option("--t-order", o.t_order, "Order consistency routing threshold");
  c->add_option("--t-artifact", o.t_artifact, "Anchor failure rate routing threshold");
  c->add_option("--pairs", o.pairs, "Equivalent prompt pairs JSONL");
}

void add_ratio_options(CLI::App* c, Options& o) {
  c->add_option("--seed", o.seed, "Random seed");
  c->add_option("--resamples", o.resamples, "Baseline resamples")->check(CLI::PositiveNumber);
  c->add_option("--min-support", o.min_support, "Minimum ratings per (annotator, theme)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Validity audit for preference annotation data", "prefaudit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file; keys live under [subcommand] sections");

  auto* validate = app.add_subcommand("validate", "Check records against the schema and report coverage");
  add_input(validate, o);
  validate->add_option("--embeddings", o.embeddings, "Item embeddings");
  add_output(validate, o, {"jsonl", "report"});

  auto* pairs = app.add_subcommand("pairs", "Flag inconsistent ratings on semantically similar prompts");
  add_input(pairs, o);
  pairs->add_option("--embeddings", o.embeddings, "Item embeddings (JSONL or CSV)")->required();
  pairs->add_option("--sim-threshold", o.sim_threshold, "Cosine similarity threshold");
  pairs->add_option("--delta-threshold", o.delta_threshold, "Score difference that counts as inconsistent");
  pairs->add_flag("--any-annotator", o.any_annotator, "Keep pairs no annotator rated both of");
  pairs->add_option("--pairs-out", o.pairs_out, "Also write the discovered pairs");
  pairs->add_option("--dataset-name", o.dataset_name, "Row label in the prevalence table");
  add_output(pairs, o, {"jsonl", "csv", "report"});

  auto* repeats = app.add_subcommand("repeats", "Flag inconsistent ratings on repeated items");
  add_input(repeats, o);
  repeats->add_option("--delta-threshold", o.delta_threshold, "Score difference that counts as inconsistent");
  repeats->add_option("--pairs-out", o.pairs_out, "Also write the repeat pairs");
  repeats->add_option("--dataset-name", o.dataset_name, "Row label in the prevalence table");
  add_output(repeats, o, {"jsonl", "csv", "report"});

  auto* diagnose = app.add_subcommand("diagnose", "Per-annotator consistency profiles and routing");
  add_input(diagnose, o);
  add_diagnostic_options(diagnose, o);
  add_ratio_options(diagnose, o);
  add_output(diagnose, o, {"jsonl", "csv", "report"});

  auto* classify = app.add_subcommand("classify", "Assign taxonomy labels to inconsistency flags");
  add_input(classify, o, false);
  classify->add_option("--flags", o.flags, "Flags written by pairs or repeats")->required();
  classify->add_option("--pairs", o.pairs, "Prompt pairs for the pair-category table (needs --input)");
  classify->add_option("--consistent-max", o.consistent_max, "Upper edge of the consistent band");
  classify->add_option("--marginal-max", o.marginal_max, "Upper edge of the marginal band");
  classify->add_option("--artifact-floor", o.artifact_floor, "Score above which a bad response is an artifact");
  add_output(classify, o, {"jsonl", "csv", "report"});

  auto* ratio = app.add_subcommand("ratio", "Inconsistency ratios per (annotator, theme)");
  add_input(ratio, o);
  add_ratio_options(ratio, o);
  ratio->add_flag("--exclude-theme-items", o.exclude_theme_items, "Drop theme ratings from the baseline pool");
  add_output(ratio, o, {"jsonl", "csv", "report"});

  auto* simulate = app.add_subcommand("simulate", "Majority-label flips across inconsistency pools");
  add_input(simulate, o);
  add_ratio_options(simulate, o);
  simulate->add_option("--ratios", o.ratios, "Ratios written by the ratio subcommand");
  simulate->add_option("--iterations", o.iterations, "Bootstrap iterations")->check(CLI::PositiveNumber);
  simulate->add_option("--sample-size", o.sample_size, "Annotators per draw (odd)");
  simulate->add_option("--harm-threshold", o.harm_threshold, "Ratings at or above count as harmful");
  add_output(simulate, o, {"jsonl", "report"});

  auto* weights = app.add_subcommand("weights", "Record weights and the artifact variance split");
  add_input(weights, o);
  add_diagnostic_options(weights, o);
  add_ratio_options(weights, o);
  weights->add_option("--mode", o.weight_mode, "binary, linear or sigmoid")
      ->check(CLI::IsMember({"binary", "linear", "sigmoid"}));
  weights->add_option("--annotator-threshold", o.annotator_threshold, "Binary mode annotator cut");
  weights->add_option("--item-threshold", o.item_threshold, "Binary mode item cut");
  weights->add_option("--policy", o.policy, "Export policy: weight, filter or both")
      ->check(CLI::IsMember({"weight", "filter", "both"}));
  weights->add_option("--estimator", o.estimator, "Artifact variance estimator: half_msd or mad");
  weights->add_option("--export", o.export_path, "Write weighted records here");
  add_output(weights, o, {"jsonl", "report"});

  auto* plan = app.add_subcommand("plan", "Design a tiered diagnostic campaign");
  plan->add_option("--tier", o.tier, "1, 2 or 3")->required();
  plan->add_option("--n-items", o.n_items, "Items in the campaign")->required();
  plan->add_option("--n-annotators", o.n_annotators, "Annotators")->required();
  plan->add_option("--cost", o.cost, "Cost per annotation");
  plan->add_option("--items-per-annotator", o.items_per_annotator, "Default: n_items / n_annotators");
  plan->add_option("--repeat-rate", o.repeat_rate, "Fraction of items repeated per annotator");
  plan->add_option("--framing-rate", o.framing_rate, "Fraction of items with framing variants");
  plan->add_option("--within-framing-rate", o.within_framing_rate, "Within-annotator framing fraction");
  plan->add_option("--retest-rate", o.retest_rate, "Delayed retest fraction");
  plan->add_option("--min-spacing", o.min_spacing, "Tasks between an item and its repeat");
  plan->add_option("--session-length", o.session_length, "Tasks per session");
  plan->add_option("--schedule", o.schedule_path, "Write a task schedule here");
  plan->add_option("--seed", o.seed, "Schedule seed");
  add_output(plan, o, {"jsonl", "report"});

  auto* calibrate = app.add_subcommand("calibrate", "Derive consistency thresholds");
  calibrate->add_option("--method", o.method, "empirical, scale or consequence")
      ->check(CLI::IsMember({"empirical", "scale", "consequence"}));
  calibrate->add_option("--scale", o.scale, "continuous_0_100, likert_5 or binary_pair");
  calibrate->add_option("--diffs", o.diffs, "Clear-case repeat differences");
  calibrate->add_option("--k", o.k, "SD multiplier for the empirical method");
  calibrate->add_option("--flip-margin", o.flip_margin, "Smallest difference that changes training signal");
  add_output(calibrate, o, {"jsonl", "report"});

  auto* synth = app.add_subcommand("synth", "Generate a synthetic campaign with known annotator types");
  synth->add_option("--per-type", o.per_type, "Annotators of each latent type");
  synth->add_option("--n-items", o.n_items, "Items")->required();
  synth->add_option("--items-per-annotator", o.items_per_annotator, "Default: every item");
  synth->add_option("--repeat-rate", o.repeat_rate, "Repeat fraction");
  synth->add_option("--framing-pairs", o.framing_pairs, "Within-annotator framing pairs");
  synth->add_option("--anchors", o.anchors, "Attention-check items per annotator");
  synth->add_option("--noise-sd", o.noise_sd, "Rating noise");
  synth->add_option("--framing-offset-sd", o.framing_offset_sd, "Per-variant offset of constructed raters");
  synth->add_option("--artifact-rate", o.artifact_rate, "Error rate of artifact raters");
  synth->add_option("--min-spacing", o.min_spacing, "Tasks between an item and its repeat");
  synth->add_option("--session-length", o.session_length, "Tasks per session");
  synth->add_option("--seed", o.seed, "Random seed");
  synth->add_option("--out-dir", o.out_dir, "Write records, metadata and truth here");
  synth->add_flag("--recover", o.recover, "Run diagnostics and score routing against the truth");
  add_diagnostic_options(synth, o);
  add_output(synth, o, {"jsonl", "report"});

  auto* themes_cmd = app.add_subcommand("themes", "Label prompts with themes by unanimous endpoint agreement");
  add_input(themes_cmd, o);
  themes_cmd->add_option("--labels", o.labels, "Theme names, one per line or a JSON array")->required();
  themes_cmd->add_option("--endpoints", o.endpoints, "Endpoint config JSON")->required();
  themes_cmd->add_option("--cache", o.cache, "Prompt -> labels cache file");
  themes_cmd->add_option("--concurrency", o.concurrency, "Requests in flight")->check(CLI::PositiveNumber);
  add_output(themes_cmd, o, {"jsonl"});

  auto* report_cmd = app.add_subcommand("report", "Render tables from analysis outputs");
  report_cmd->add_option("--prevalence", o.prevalence_files, "Output of pairs or repeats (repeatable)");
  report_cmd->add_option("--classification", o.classification_file, "Output of classify");
  report_cmd->add_option("--ratio", o.ratio_file, "Output of ratio");
  report_cmd->add_option("--flips", o.flips_file, "Output of simulate");
  report_cmd->add_option("-o,--output", o.output, "Output file (default: standard output)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n"
        << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kUsage;
  }
  if (const auto* c = app.get_option_no_throw("--config"); c && c->count() > 0) {
    o.config_file = c->as<std::string>();
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    Output result;
    if (name == "validate") result = cmd_validate(o, err);
    else if (name == "pairs") result = cmd_flags(o, err, true);
    else if (name == "repeats") result = cmd_flags(o, err, false);
    else if (name == "diagnose") result = cmd_diagnose(o, err);
    else if (name == "classify") result = cmd_classify(o, err);
    else if (name == "ratio") result = cmd_ratio(o, err);
    else if (name == "simulate") result = cmd_simulate(o, err);
    else if (name == "weights") result = cmd_weights(o, err);
    else if (name == "plan") result = cmd_plan(o, err);
    else if (name == "calibrate") result = cmd_calibrate(o, err);
    else if (name == "synth") result = cmd_synth(o, err);
    else if (name == "themes") result = cmd_themes(o, err);
    else result = cmd_report(o, err);

    if (o.output.empty()) {
      out << result.text;
    } else {
      std::ofstream f(o.output, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write '" + o.output + "'");
      f << result.text;
      if (!f) throw std::runtime_error("write to '" + o.output + "' failed");
    }
    return result.code;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace prefaudit::cli
