// techscan: classify papers by technique evidence using analyzer bundles.
//
// Exit codes: 0 success, 1 parse/config error, 2 partial per-paper failure
// (or failing regression fixtures).

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>

#include "techscan/techscan.hpp"

#ifndef TECHSCAN_DEFAULT_ANALYZERS
#define TECHSCAN_DEFAULT_ANALYZERS "analyzers"
#endif

namespace fs = std::filesystem;
using namespace techscan;

namespace {

void add_match_options(CLI::App* cmd, RunConfig& config) {
  cmd->add_option("--support-window", config.match.support_window, "Characters searched for supports on each side")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--skip-window", config.match.skip_window, "Characters around a match scanned by skip patterns");
  cmd->add_option("--max-edits", config.match.max_edits, "Edits tolerated in long terms")->check(CLI::IsMember({0, 1}));
  cmd->add_option("--fuzzy-min-len", config.match.fuzzy_min_len, "Shortest term that is matched fuzzily");
  cmd->add_option("--short-threshold", config.short_threshold, "Documents with fewer words are skipped");
  cmd->add_option("--converter", config.converter, "Command producing text on stdout, with an {input} placeholder");
}

int cmd_classify(const std::string& manifest_path, const std::string& analyzers, const std::string& out_dir,
                 const RunConfig& config) {
  const auto manifest = load_manifest(manifest_path);
  const auto bundle = load_bundle(analyzers);
  const auto tags = tag_universe(bundle);
  const auto papers = run_corpus(manifest, bundle, config);
  write_outputs(out_dir, papers, tags);

  std::size_t failed = 0;
  std::size_t analyzed = 0;
  for (const auto& p : papers) {
    for (const auto& notice : p.notices) std::cerr << p.result.meta.paper_id << ": " << notice << "\n";
    if (p.result.status == DocStatus::error) ++failed;
    if (p.result.status == DocStatus::analyzed) ++analyzed;
  }
  std::cerr << papers.size() << " papers, " << analyzed << " analyzed, " << failed << " failed; " << bundle.size()
            << " analyzers; output in " << out_dir << "\n";
  return failed ? 2 : 0;
}

int cmd_check(const std::string& analyzers) {
  const auto bundle = load_bundle(analyzers);
  for (const auto& spec : bundle) {
    std::cout << spec.name << ": " << spec.positives.size() << " positive, " << spec.negatives.size()
              << " negative, " << spec.skips.size() << " skip, " << spec.synonyms.size() << " synonyms, tags [";
    for (std::size_t i = 0; i < spec.tags.size(); ++i) std::cout << (i ? ", " : "") << spec.tags[i];
    std::cout << "]" << (spec.mode == AnalyzerMode::exclude ? " (exclude)" : "");
    if (spec.region_fraction < 1.0) std::cout << " region prefix:" << spec.region_fraction;
    std::cout << "\n";
  }
  std::cout << bundle.size() << " analyzers OK\n";
  return 0;
}

int cmd_report(const std::string& paper, const std::string& analyzers, SourceMeta meta, const RunConfig& config) {
  const auto bundle = load_bundle(analyzers);
  config.match.validate();
  meta.path = paper;
  if (meta.paper_id.empty()) meta.paper_id = fs::path(paper).stem().string();
  auto result = classify_source(meta, bundle, config);
  std::cout << result.report;
  return result.result.status == DocStatus::error ? 2 : 0;
}

int cmd_aggregate(const std::string& results_path, const std::string& out) {
  const auto table = parse_results_csv(read_file(results_path));
  const auto text = emit_aggregates_csv(aggregate(table.results, table.tags), table.tags);
  if (out.empty())
    std::cout << text;
  else
    write_text_file(out, text);
  return 0;
}

int cmd_validate(const std::string& results_path, const std::string& truth_path, const std::string& out) {
  const auto table = parse_results_csv(read_file(results_path));
  const auto truth = parse_truth_csv(read_file(truth_path));
  const auto text = emit_confusion_csv(confusion(table.results, truth));
  if (out.empty())
    std::cout << text;
  else
    write_text_file(out, text);
  return 0;
}

int cmd_regress(const std::string& fixtures, const std::string& analyzers, const RunConfig& config) {
  const auto bundle = load_bundle(analyzers);
  const auto report = regression_check(fixtures, bundle, config);
  for (const auto& f : report.fixtures) {
    std::cout << (f.passed ? "PASS " : "FAIL ") << f.name << "\n";
    for (const auto& d : f.diffs) std::cout << "    " << d << "\n";
  }
  std::cout << report.fixtures.size() << " fixtures, " << (report.passed() ? "all passed" : "FAILURES") << "\n";
  return report.passed() ? 0 : 2;
}

int cmd_sample(const std::string& results_path, const std::string& tag, std::size_t n, std::uint64_t seed) {
  const auto table = parse_results_csv(read_file(results_path));
  for (const auto& id : stratified_sample(table.results, tag, n, seed)) std::cout << id << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rule-based detection of technique usage in full-text papers"};
  app.require_subcommand(1);

  RunConfig config;
  std::string analyzers = TECHSCAN_DEFAULT_ANALYZERS;

  auto* classify = app.add_subcommand("classify", "Classify every paper in a manifest");
  std::string manifest;
  std::string out_dir = "out";
  classify->add_option("--manifest", manifest, "CSV with paper_id,journal,year,path")->required();
  classify->add_option("--analyzers", analyzers, "Directory of *.analyzer files");
  classify->add_option("--out", out_dir, "Output directory");
  classify->add_option("--jobs", config.jobs, "Worker threads")->check(CLI::PositiveNumber);
  add_match_options(classify, config);

  auto* check = app.add_subcommand("check-analyzers", "Parse and validate an analyzer bundle");
  check->add_option("--analyzers,dir", analyzers, "Directory of *.analyzer files");

  auto* report = app.add_subcommand("report", "Print the evidence report for one paper");
  std::string paper;
  SourceMeta meta;
  report->add_option("paper", paper, "Text file (or input for --converter)")->required();
  report->add_option("--analyzers", analyzers, "Directory of *.analyzer files");
  report->add_option("--id", meta.paper_id, "Paper id shown in the report");
  report->add_option("--journal", meta.journal, "Journal shown in the report");
  report->add_option("--year", meta.year, "Year shown in the report");
  add_match_options(report, config);

  auto* aggregate_cmd = app.add_subcommand("aggregate", "Journal-year aggregates from a results.csv");
  std::string results;
  std::string out_file;
  aggregate_cmd->add_option("--results", results, "results.csv from classify")->required();
  aggregate_cmd->add_option("--out", out_file, "Write to file instead of stdout");

  auto* validate = app.add_subcommand("validate", "Confusion table against ground-truth labels");
  std::string truth;
  validate->add_option("--results", results, "results.csv from classify")->required();
  validate->add_option("--truth", truth, "CSV with paper_id,tag,label")->required();
  validate->add_option("--out", out_file, "Write to file instead of stdout");

  auto* regress = app.add_subcommand("regress", "Run regression fixtures");
  std::string fixtures;
  regress->add_option("--fixtures", fixtures, "Directory of <name>.txt + <name>.expected.csv")->required();
  regress->add_option("--analyzers", analyzers, "Directory of *.analyzer files");
  add_match_options(regress, config);

  auto* sample = app.add_subcommand("sample", "Stratified random sample of papers for manual checking");
  std::string tag;
  std::size_t n = 10;
  std::uint64_t seed = 1;
  sample->add_option("--results", results, "results.csv from classify")->required();
  sample->add_option("--tag", tag, "Tag whose verdicts define the strata")->required();
  sample->add_option("-n", n, "Sample size")->check(CLI::PositiveNumber);
  sample->add_option("--seed", seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*classify) return cmd_classify(manifest, analyzers, out_dir, config);
    if (*check) return cmd_check(analyzers);
    if (*report) return cmd_report(paper, analyzers, meta, config);
    if (*aggregate_cmd) return cmd_aggregate(results, out_file);
    if (*validate) return cmd_validate(results, truth, out_file);
    if (*regress) return cmd_regress(fixtures, analyzers, config);
    if (*sample) return cmd_sample(results, tag, n, seed);
  } catch (const BundleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DslError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
