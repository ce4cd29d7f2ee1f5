#pragma once

// Plain-text tables over the JSON summaries the analysis commands emit.
// Tables with no data still print their header.

#include <string>
#include <vector>

#include <json.hpp>

namespace prefaudit::report {

struct Table {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string note;
};

/// Column-aligned text with a rule under the header.
std::string render(const Table& t);

/// Rows of (dataset name, prevalence summary). Columns: Dataset,
/// Inconsistencies, Annotators, Mean Pref. Score Δ.
Table prevalence_table(const std::vector<std::pair<std::string, nlohmann::json>>& datasets);
/// Stage, Remaining.
Table ladder_table(const nlohmann::json& ladder);
/// Summary rows, already ordered by count. Columns: Classification, n, %,
/// Mean Δ.
Table classification_table(const nlohmann::json& rows);
/// Pair-category rows. Columns: Pairs, Consistent, Marginal, Inconsistent.
Table pair_category_table(const nlohmann::json& rows);
/// Population statistics of inconsistency ratios; null gives an empty table.
Table ratio_table(const nlohmann::json& population);
/// Majority-label flips per restricted pool; null gives an empty table.
Table flip_table(const nlohmann::json& flips);
/// Annotator counts per routing decision.
Table routing_table(const nlohmann::json& counts);
/// Field / value rows of a flat object.
Table field_table(const std::string& title, const nlohmann::json& object);
/// Latent type x routing confusion matrix.
Table confusion_table(const nlohmann::json& recovery);

std::string fixed(double v, int decimals);

}  // namespace prefaudit::report
