#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "builders.hpp"
#include "prefaudit/cli.hpp"
#include "prefaudit/ingest.hpp"
#include "prefaudit/stats.hpp"

using namespace prefaudit;
using testing_support::Rec;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

std::string last_line(const std::string& s) {
  const auto end = s.find_last_not_of('\n');
  const auto start = s.rfind('\n', end);
  return s.substr(start == std::string::npos ? 0 : start + 1, end - start);
}

// Twelve annotators rating 20 themed items, two sessions each, plus
// embeddings and an equivalent-pair file.
const fs::path& fixture_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "prefaudit_cli_fixture";
    fs::create_directories(d);
    stats::SeededSampler rng(99, "cli-fixture");
    std::vector<AnnotationRecord> records;
    for (int a = 0; a < 12; ++a) {
      const std::string ann = "ann" + std::to_string(a);
      for (int i = 0; i < 20; ++i) {
        const std::string item = "item" + std::to_string(i);
        const double base = 20.0 + 3.0 * i + (a % 3) * 10.0;
        for (int s = 0; s < 2; ++s) {
          const double score = std::clamp(base + rng.normal(0, 4.0 + 4.0 * (a % 4)), 0.0, 100.0);
          records.push_back(Rec(ann + "-" + item + "-" + std::to_string(s), ann, item,
                                std::round(score))
                                .session("s" + std::to_string(s))
                                .at(s * 100 + i));
        }
      }
    }
    std::ofstream rec(d / "records.jsonl");
    write_records_jsonl(rec, records);
    std::map<std::string, ItemMetadata> meta;
    for (int i = 0; i < 20; ++i) {
      ItemMetadata m;
      m.item_id = "item" + std::to_string(i);
      m.theme_labels = std::set<std::string>{i % 2 == 0 ? "Privacy" : "Fairness"};
      m.content_type = i < 10 ? ContentType::A4_value_laden : ContentType::A1_generic;
      m.plausible_pref = i < 10 ? PlausiblePref::E3_plausible : PlausiblePref::E1_implausible;
      meta[m.item_id] = m;
    }
    std::ofstream md(d / "metadata.jsonl");
    write_metadata_jsonl(md, meta);
    std::ofstream emb(d / "embeddings.csv");
    for (int i = 0; i < 20; ++i) {
      emb << "item" << i << ',' << (i / 2) + 1 << ',' << (i % 2 == 0 ? 1.0 : 1.01) << '\n';
    }
    std::ofstream pairs(d / "pairs.jsonl");
    pairs << R"({"pair_id":"p1","item_a":"item0","item_b":"item1","similarity":0.95,"kind":"equivalent"})"
          << '\n';
    return d;
  }();
  return dir;
}

std::string path(const char* name) { return (fixture_dir() / name).string(); }

}  // namespace

TEST_CASE("usage errors exit 1") {
  const auto none = run({});
  CHECK(none.code == 1);
  const auto unknown = run({"diagnose", "--input", path("records.jsonl"), "--bogus"});
  CHECK(unknown.code == 1);
  CHECK(unknown.err.find("--bogus") != std::string::npos);
  CHECK(unknown.err.find("Usage") != std::string::npos);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"plan", "--tier", "1", "--n-items", "100", "--n-annotators", "1"}).code == 1);
  const auto help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("diagnose") != std::string::npos);
}

TEST_CASE("data errors exit 2") {
  const fs::path bad = fs::temp_directory_path() / "prefaudit_cli_bad.jsonl";
  std::ofstream(bad) << "{\"record_id\":\"r\"}\n";
  CHECK(run({"validate", "--input", bad.string()}).code == 2);
  CHECK(run({"validate", "--input", "/nonexistent/x.jsonl"}).code == 2);
}

TEST_CASE("validate reports coverage") {
  const auto r = run({"validate", "--input", path("records.jsonl"), "--metadata", path("metadata.jsonl")});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("report").at("n_records") == 480);
  CHECK(j.at("config").at("subcommand") == "validate");
}

TEST_CASE("diagnose writes profiles with a config header and summary") {
  const auto r = run({"diagnose", "--input", path("records.jsonl"), "--tau", "15"});
  REQUIRE(r.code == 0);
  const auto head = nlohmann::json::parse(first_line(r.out));
  CHECK(head.contains("_config"));
  CHECK(head.at("_config").at("thresholds").at("tau") == 15.0);
  const auto tail = nlohmann::json::parse(last_line(r.out));
  CHECK(tail.contains("_summary"));
  std::size_t profiles = 0;
  std::istringstream lines(r.out);
  for (std::string l; std::getline(lines, l);) {
    const auto j = nlohmann::json::parse(l);
    if (j.contains("annotator_id")) {
      ++profiles;
      CHECK(j.contains("routing"));
    }
  }
  CHECK(profiles == 12);

  const auto csv = run({"diagnose", "--input", path("records.jsonl"), "--format", "csv"});
  REQUIRE(csv.code == 0);
  CHECK(csv.out.rfind("# config ", 0) == 0);
}

TEST_CASE("seeded subcommands are byte-identical across runs") {
  const std::vector<std::vector<std::string>> commands{
      {"ratio", "--input", path("records.jsonl"), "--metadata", path("metadata.jsonl"), "--seed", "7"},
      {"simulate", "--input", path("records.jsonl"), "--metadata", path("metadata.jsonl"), "--seed",
       "7", "--iterations", "200", "--min-support", "5"},
      {"synth", "--per-type", "2", "--n-items", "300", "--seed", "3", "--recover"},
      {"plan", "--tier", "1", "--n-items", "400", "--n-annotators", "1", "--seed", "5"},
  };
  for (const auto& cmd : commands) {
    const auto a = run(cmd);
    const auto b = run(cmd);
    INFO(cmd[0] << ": " << a.err);
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(!a.out.empty());
  }
  auto other = commands[0];
  other.back() = "8";
  CHECK(run(other).out != run(commands[0]).out);
}

TEST_CASE("pipelines compose through intermediate files") {
  const fs::path d = fixture_dir();
  const auto flags = (d / "flags.jsonl").string();
  const auto pairs = run({"pairs", "--input", path("records.jsonl"), "--embeddings",
                          path("embeddings.csv"), "--sim-threshold", "0.99", "--output", flags,
                          "--pairs-out", (d / "found_pairs.jsonl").string(), "--dataset-name",
                          "Fixture"});
  REQUIRE(pairs.code == 0);
  const auto repeats = run({"repeats", "--input", path("records.jsonl"), "--output",
                            (d / "repeat_flags.jsonl").string()});
  REQUIRE(repeats.code == 0);

  const auto classified =
      run({"classify", "--flags", flags, "--input", path("records.jsonl"), "--metadata",
           path("metadata.jsonl"), "--pairs", (d / "found_pairs.jsonl").string(), "--output",
           (d / "classified.jsonl").string()});
  REQUIRE(classified.code == 0);

  const auto ratios = run({"ratio", "--input", path("records.jsonl"), "--metadata",
                           path("metadata.jsonl"), "--output", (d / "ratios.jsonl").string()});
  REQUIRE(ratios.code == 0);
  const auto sim = run({"simulate", "--input", path("records.jsonl"), "--ratios",
                        (d / "ratios.jsonl").string(), "--iterations", "100", "--output",
                        (d / "flips.jsonl").string()});
  INFO(sim.err);
  REQUIRE(sim.code == 0);

  const auto report =
      run({"report", "--prevalence", flags, "--prevalence", (d / "repeat_flags.jsonl").string(),
           "--classification", (d / "classified.jsonl").string(), "--ratio",
           (d / "ratios.jsonl").string(), "--flips", (d / "flips.jsonl").string()});
  REQUIRE(report.code == 0);
  CHECK(report.out.find("Inconsistencies") != std::string::npos);
  CHECK(report.out.find("Annotators") != std::string::npos);
  CHECK(report.out.find("Mean Pref. Score Δ") != std::string::npos);
  CHECK(report.out.find("Fixture") != std::string::npos);
  CHECK(report.out.find("Classification") != std::string::npos);

  const auto weights = run({"weights", "--input", path("records.jsonl"), "--mode", "binary",
                            "--policy", "filter", "--export", (d / "weighted.jsonl").string()});
  REQUIRE(weights.code == 0);
  const auto exported = slurp(d / "weighted.jsonl");
  CHECK(nlohmann::json::parse(first_line(exported)).contains("_config"));
}

TEST_CASE("report on empty outputs renders headers only") {
  const fs::path empty = fs::temp_directory_path() / "prefaudit_cli_empty_class.jsonl";
  std::ofstream(empty) << R"({"_summary":{"n":0,"classification":[]}})" << '\n';
  const auto r = run({"report", "--classification", empty.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Classification") != std::string::npos);
  CHECK(run({"report"}).code == 1);
}

TEST_CASE("plan and calibrate outputs") {
  const auto p = run({"plan", "--tier", "1", "--n-items", "10000", "--n-annotators", "5", "--cost",
                      "0.5"});
  REQUIRE(p.code == 0);
  const auto j = nlohmann::json::parse(p.out);
  CHECK(j.at("plan").at("extra_annotations") == 500);
  CHECK(j.at("plan").at("extra_cost") == 250.0);

  const auto c = run({"calibrate", "--method", "scale", "--scale", "likert_5"});
  REQUIRE(c.code == 0);
  CHECK(nlohmann::json::parse(c.out).at("calibration").at("consistent_max") == 1.0);
  CHECK(run({"calibrate", "--method", "empirical", "--diffs", "1 2 3"}).code == 2);
}

TEST_CASE("config file supplies subcommand options") {
  const fs::path cfg = fs::temp_directory_path() / "prefaudit_cli.toml";
  std::ofstream(cfg) << "[plan]\ntier = 1\nn-items = 10000\nn-annotators = 5\ncost = 0.5\n";
  const auto r = run({"--config", cfg.string(), "plan"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out).at("plan").at("extra_annotations") == 500);
  // Flags override the file.
  const auto o = run({"--config", cfg.string(), "plan", "--n-annotators", "10"});
  REQUIRE(o.code == 0);
  CHECK(nlohmann::json::parse(o.out).at("plan").at("extra_annotations") == 500);
  CHECK(nlohmann::json::parse(o.out).at("plan").at("n_annotators") == 10);
}
