#include "prefaudit/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace prefaudit::report {

using nlohmann::json;

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

namespace {

// Display width in code points, so that "Δ" counts as one column.
std::size_t width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80 ? 1 : 0;
  return n;
}

std::string pad(const std::string& s, std::size_t w) { return s + std::string(w - width(s), ' '); }

std::string value_text(const json& v) {
  if (v.is_null()) return "-";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return fixed(v.get<double>(), 4);
  return v.dump();
}

std::string label_title(const std::string& label) {
  if (label == "non_attitude") return "Non-Attitude";
  if (label == "constructed_preference") return "Constructed Preference";
  if (label == "measurement_artifact") return "Measurement Artifact";
  if (label == "genuine_uncrystallized") return "Genuine (uncrystallized)";
  return label;
}

}  // namespace

std::string render(const Table& t) {
  std::vector<std::size_t> w(t.header.size(), 0);
  for (std::size_t c = 0; c < t.header.size(); ++c) w[c] = width(t.header[c]);
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size() && c < w.size(); ++c) w[c] = std::max(w[c], width(row[c]));
  }
  std::ostringstream out;
  if (!t.title.empty()) out << t.title << '\n';
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t c = 0; c < w.size(); ++c) {
      s += pad(c < cells.size() ? cells[c] : std::string(), w[c]);
      if (c + 1 < w.size()) s += "  ";
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    out << s << '\n';
  };
  line(t.header);
  std::size_t total = 0;
  for (std::size_t c = 0; c < w.size(); ++c) total += w[c] + (c + 1 < w.size() ? 2 : 0);
  out << std::string(total, '-') << '\n';
  for (const auto& row : t.rows) line(row);
  if (!t.note.empty()) out << t.note << '\n';
  return out.str();
}

Table prevalence_table(const std::vector<std::pair<std::string, json>>& datasets) {
  Table t{"Preference inconsistency statistics",
          {"Dataset", "Inconsistencies", "Annotators", "Mean Pref. Score Δ"},
          {},
          ""};
  for (const auto& [name, s] : datasets) {
    if (s.value("n_comparisons", 0) == 0) continue;
    const json& mean = s.at("mean_delta");
    t.rows.push_back({name,
                      std::to_string(s.at("n_inconsistent_pairs").get<std::size_t>()) + " (" +
                          fixed(s.at("pct_inconsistent").get<double>(), 2) + "%)",
                      std::to_string(s.at("n_annotators_flagged").get<std::size_t>()) + " (" +
                          fixed(s.at("pct_annotators_flagged").get<double>(), 2) + "%)",
                      mean.is_null() ? "-" : fixed(mean.get<double>(), 2)});
  }
  return t;
}

Table ladder_table(const json& ladder) {
  Table t{"Filtering ladder", {"Stage", "Remaining"}, {}, ""};
  for (const auto& row : ladder) {
    t.rows.push_back({row.at("stage").get<std::string>(), std::to_string(row.at("count").get<std::size_t>())});
  }
  return t;
}

Table classification_table(const json& rows) {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.at("count").get<std::size_t>();
  Table t{"Classification of annotation inconsistencies (n=" + std::to_string(n) + ")",
          {"Classification", "n", "%", "Mean Δ"},
          {},
          ""};
  for (const auto& r : rows) {
    t.rows.push_back({label_title(r.at("label").get<std::string>()),
                      std::to_string(r.at("count").get<std::size_t>()),
                      fixed(r.at("pct").get<double>(), 1), fixed(r.at("mean_delta").get<double>(), 1)});
  }
  return t;
}

Table pair_category_table(const json& rows) {
  Table t{"Response classifications by pair type", {"Pairs", "Consistent", "Marginal", "Inconsistent"}, {}, ""};
  for (const auto& r : rows) {
    const auto n = r.at("n").get<std::size_t>();
    auto pct = [&](const char* key) {
      return fixed(n ? 100.0 * r.at(key).get<double>() / static_cast<double>(n) : 0.0, 1) + "%";
    };
    const std::string kind =
        r.at("scheme").get<std::string>() == "equivalent_scheme" ? "Equivalent" : "Non-equivalent";
    t.rows.push_back({kind + " pairs (n=" + std::to_string(n) + ")", pct("consistent"), pct("marginal"),
                      pct("inconsistent")});
  }
  t.note = "Equivalent: inconsistent = difference above the marginal band. Non-equivalent: "
           "inconsistent = beyond tolerance in the wrong direction.";
  return t;
}

Table ratio_table(const json& p) {
  Table t{"Inconsistency ratio population statistics", {"Statistic", "Value"}, {}, ""};
  if (p.is_null()) return t;
  auto test = [](const json& r) {
    return "t(" + fixed(r.at("df").get<double>(), 2) + ") = " + fixed(r.at("statistic").get<double>(), 2) +
           ", p = " + fixed(r.at("p_value").get<double>(), 4);
  };
  t.rows = {{"Annotators", std::to_string(p.at("n_annotators").get<std::size_t>())},
            {"Mean ratio", fixed(p.at("mean_ratio").get<double>(), 4)},
            {"Mean ratio vs 1", test(p.at("ratio_vs_one"))},
            {"Median ratio", fixed(p.at("median_ratio").get<double>(), 4)},
            {"Low / high group size", std::to_string(p.at("n_low").get<std::size_t>()) + " / " +
                                          std::to_string(p.at("n_high").get<std::size_t>())},
            {"Mean rating, low inconsistency", fixed(p.at("mean_rating_low").get<double>(), 2)},
            {"Mean rating, high inconsistency", fixed(p.at("mean_rating_high").get<double>(), 2)},
            {"Mean difference (low - high)", fixed(p.at("mean_difference").get<double>(), 2)},
            {"Median split, Welch", test(p.at("median_split_welch"))},
            {"Median split, pooled", test(p.at("median_split_pooled"))},
            {"Pearson r (ratio, mean rating)", p.at("pearson_ratio_rating").is_null() ? std::string("n/a") : fixed(p.at("pearson_ratio_rating").get<double>(), 2)}};
  return t;
}

Table flip_table(const json& f) {
  Table t{"Majority-label flips relative to all annotators", {"Pool", "Prompts flipped", "% of eligible"}, {}, ""};
  if (f.is_null()) return t;
  t.rows = {{"Low inconsistency", std::to_string(f.at("n_flips_low").get<std::size_t>()),
             fixed(f.at("pct_flips_low").get<double>(), 1)},
            {"High inconsistency", std::to_string(f.at("n_flips_high").get<std::size_t>()),
             fixed(f.at("pct_flips_high").get<double>(), 1)},
            {"Either pool", "-", fixed(f.at("pct_flips").get<double>(), 1)}};
  t.note = std::to_string(f.at("n_eligible").get<std::size_t>()) + " eligible prompts, " +
           std::to_string(f.at("iterations").get<std::size_t>()) + " iterations of " +
           std::to_string(f.at("sample_size").get<std::size_t>()) + " annotators, threshold " +
           fixed(f.at("harm_threshold").get<double>(), 1);
  return t;
}

Table routing_table(const json& counts) {
  Table t{"Annotator routing", {"Routing", "Annotators", "%"}, {}, ""};
  std::size_t n = 0;
  for (const auto& [k, v] : counts.items()) n += v.get<std::size_t>();
  for (const auto& [k, v] : counts.items()) {
    const auto c = v.get<std::size_t>();
    t.rows.push_back({k, std::to_string(c), fixed(n ? 100.0 * static_cast<double>(c) / static_cast<double>(n) : 0.0, 1)});
  }
  return t;
}

Table field_table(const std::string& title, const json& object) {
  Table t{title, {"Field", "Value"}, {}, ""};
  for (const auto& [k, v] : object.items()) t.rows.push_back({k, value_text(v)});
  return t;
}

Table confusion_table(const json& recovery) {
  Table t{"Routing recovery", {"Latent type"}, {}, ""};
  if (recovery.is_null()) return t;
  const json& m = recovery.at("confusion");
  if (!m.empty()) {
    for (const auto& [routing, count] : m.begin().value().items()) t.header.push_back(routing);
  }
  for (const auto& [type, row] : m.items()) {
    std::vector<std::string> cells{type};
    for (const auto& [routing, count] : row.items()) cells.push_back(std::to_string(count.get<std::size_t>()));
    t.rows.push_back(std::move(cells));
  }
  t.note = "accuracy " + fixed(recovery.at("accuracy").get<double>(), 4) + " (" +
           std::to_string(recovery.at("n_correct").get<std::size_t>()) + "/" +
           std::to_string(recovery.at("n").get<std::size_t>()) + ")";
  return t;
}

}  // namespace prefaudit::report
