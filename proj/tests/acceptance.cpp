// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "support/oracles.hpp"
#include "support/synthetic.hpp"
#include "techscan/techscan.hpp"

using namespace techscan;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = TECHSCAN_SOURCE_DIR;
const fs::path kAnalyzers = kSource / "analyzers";

struct Failure {
  std::string why;
};

void require(bool ok, const std::string& why) {
  if (!ok) throw Failure{why};
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const std::vector<AnalyzerSpec>& bundle() {
  static const auto b = load_bundle(kAnalyzers);
  return b;
}

const AnalyzerSpec& analyzer(const std::string& name) {
  for (const auto& s : bundle())
    if (s.name == name) return s;
  throw Failure{"analyzer " + name + " not in bundle"};
}

DocumentText paper(const std::vector<std::string>& inserts, std::size_t words, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return make_document({"acc", "J", 2015, {}}, synthetic::assemble(rng, inserts, words));
}

const TagSummary& summary(const std::vector<TagSummary>& tags, const std::string& tag) {
  for (const auto& t : tags)
    if (t.tag == tag) return t;
  throw Failure{"tag " + tag + " missing"};
}

std::string counts(const TagSummary& t) {
  return std::to_string(t.positive_count()) + "/" + std::to_string(t.negative_count());
}

// ---------------------------------------------------------------------------

std::string aggregation_exact() {
  const auto t0 = Clock::now();
  const auto doc = paper({"We used the Mann-Whitney U test to compare the two groups",
                          "a Mann-Whitney U test showed a significant difference between the treatments",
                          "We used a Student's t-test", "the t-test was applied to test hypotheses",
                          "a Welch's t-test was also reported", "We did not use a Student's t-test to",
                          "Cliff's delta was computed for each pair of treatments",
                          "the magnitude of the difference was measured with Cliff's delta", "Cliffs delta",
                          "Cliff's d"},
                         4500, 1);
  std::vector<AnalyzerEvidence> evs;
  for (const char* name : {"mann_whitney", "ttest", "cliffs_delta"}) {
    const auto& spec = analyzer(name);
    evs.push_back(resolve_analyzer(run_analyzer(doc, spec), spec));
  }
  require(evs[0].verdict == Verdict::positive && evs[0].positive_matches.size() == 2,
          "A1 expected Positive with 2 matches, got " + std::to_string(evs[0].positive_matches.size()));
  require(evs[1].verdict == Verdict::negative && evs[1].positive_matches.size() == 3 &&
              evs[1].negative_matches.size() == 1,
          "A2 expected 3 positives + 1 negative, got " + std::to_string(evs[1].positive_matches.size()) + " + " +
              std::to_string(evs[1].negative_matches.size()));
  require(evs[2].verdict == Verdict::positive && evs[2].positive_matches.size() == 4,
          "A3 expected Positive with 4 matches, got " + std::to_string(evs[2].positive_matches.size()));

  const auto tags = aggregate_tags(evs);
  const auto& qa = summary(tags, "quantitative_analysis");
  const auto& st = summary(tags, "statistical_test");
  const auto& np = summary(tags, "non_parametric_test");
  const auto& pt = summary(tags, "parametric_test");
  require(qa.classified_positive && counts(qa) == "2/1", "quantitative_analysis " + counts(qa));
  require(st.classified_positive && counts(st) == "1/1", "statistical_test " + counts(st));
  require(np.classified_positive && counts(np) == "1/0", "non_parametric_test " + counts(np));
  require(!pt.classified_positive && counts(pt) == "0/1" && tag_verdict(pt) == TagVerdict::negative,
          "parametric_test " + counts(pt));
  const double s = seconds_since(t0);
  require(s < 1.0, "took " + std::to_string(s) + " s");
  return "qa 2/1 st 1/1 np 1/0 pt 0/1 (negative)";
}

std::string skip_matcher_suite() {
  std::vector<std::string> traps;
  for (int i = 0; i < 25; ++i) traps.push_back(synthetic::trap_sentences()[i % 4]);
  const auto base = paper(traps, 5000, 2);
  require(base.word_count >= 5000, "document has only " + std::to_string(base.word_count) + " words");
  const auto& spec = analyzer("ttest");

  auto run = [&](const DocumentText& d) {
    auto out = classify_paper(d, bundle());
    return std::make_pair(out.result.tag_verdicts.at("parametric_test"), out.evidences);
  };
  const auto [verdict, evidences] = run(base);
  require(verdict == TagVerdict::none, "parametric_test is " + std::string(to_string(verdict)));
  const auto matches = run_analyzer(base, spec);
  std::size_t skipped = 0;
  for (const auto& m : matches) {
    require(m.polarity != Polarity::positive || m.skipped, "unskipped t-test primary");
    skipped += m.skipped;
  }
  require(skipped == 25, std::to_string(skipped) + " skipped primaries, expected 25");

  std::mt19937_64 rng(2);
  auto with = make_document(base.meta, base.raw + "\nWe used a Student's t-test. " + synthetic::filler(rng, 50));
  const auto flipped = run(with).first;
  require(flipped == TagVerdict::positive, "with Student's t-test: " + std::string(to_string(flipped)));
  return "25 skipped -> none; +1 sentence -> positive";
}

std::string negative_override() {
  const auto doc = paper({"we have not conducted an effect size analysis on the data and results",
                          "we report the effect size of each comparison",
                          "an effect size analysis showed a large difference"},
                         4500, 3);
  const auto& spec = analyzer("effect_size");
  const auto ev = resolve_analyzer(run_analyzer(doc, spec), spec);
  require(!ev.positive_matches.empty(), "positive phrasing did not match");
  require(ev.verdict == Verdict::negative, "verdict " + std::string(to_string(ev.verdict)));
  return "Negative with " + std::to_string(ev.positive_matches.size()) + " positive matches present";
}

std::string short_text_gate() {
  auto words = [](std::size_t n) {
    std::mt19937_64 rng(4);
    return make_document({"g", "J", 2015, {}}, synthetic::filler(rng, n));
  };
  const auto a = classify_paper(words(3999), bundle());
  const auto b = classify_paper(words(4000), bundle());
  require(a.result.word_count == 3999 && b.result.word_count == 4000, "filler word counts off");
  require(a.result.status == DocStatus::skipped_short, "3999 -> " + std::string(to_string(a.result.status)));
  require(b.result.status == DocStatus::analyzed, "4000 -> " + std::string(to_string(b.result.status)));
  return "3999 skipped_short, 4000 analyzed";
}

std::string prefix_region_rule() {
  const std::string marker = "This systematic literature review aims to summarize the evidence.";
  auto place = [&](double fraction) {
    std::mt19937_64 rng(5);
    const std::string body = synthetic::filler(rng, 6000);
    std::size_t at = static_cast<std::size_t>(fraction * static_cast<double>(body.size()));
    at = body.find(". ", at) + 2;
    std::string raw = body.substr(0, at) + marker + " " + body.substr(at);
    auto doc = make_document({"pr", "J", 2015, {}}, raw);
    const double where = static_cast<double>(doc.normalized.find("systematic literature review")) /
                         static_cast<double>(doc.normalized.size());
    return std::make_pair(classify_paper(doc, bundle()).result.status, where);
  };
  const auto [at4, pos4] = place(0.04);
  const auto [at10, pos10] = place(0.10);
  require(pos4 < 0.05 && pos10 > 0.05, "marker placement off");
  require(at4 == DocStatus::excluded_secondary, "4% -> " + std::string(to_string(at4)));
  require(at10 == DocStatus::analyzed, "10% -> " + std::string(to_string(at10)));
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.3f excluded, %.3f analyzed", pos4, pos10);
  return buf;
}

std::string fuzzy_oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(6);
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyz  ";
  std::size_t hits = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t term_len = 8 + oracle::draw(rng, 23);
    std::string term;
    for (std::size_t i = 0; i < term_len; ++i) term += alphabet[oracle::draw(rng, 26)];
    std::string doc;
    const std::size_t doc_len = oracle::draw(rng, 2001);
    // small alphabet background so near-misses occur by chance too
    for (std::size_t i = 0; i < doc_len; ++i) doc += "abte "[oracle::draw(rng, 5)];
    std::string planted = term;
    const auto edits = oracle::draw(rng, 3);
    for (std::uint64_t e = 0; e < edits && planted.size() > 1; ++e) {
      const auto at = oracle::draw(rng, planted.size() - 1);
      switch (oracle::draw(rng, 4)) {
        case 0: planted[at] = alphabet[oracle::draw(rng, 26)]; break;
        case 1: planted.erase(at, 1); break;
        case 2: planted.insert(at, 1, alphabet[oracle::draw(rng, 26)]); break;
        default: std::swap(planted[at], planted[at + 1]);
      }
    }
    if (planted.size() <= doc.size()) {
      const auto at = oracle::draw(rng, doc.size() - planted.size() + 1);
      doc.replace(at, planted.size(), planted);
    } else {
      doc = planted.substr(0, 2000);
    }
    const Region region{0, doc.size()};
    const auto got = find_term(doc, region, term, 1, 8);
    const auto want = oracle::find_term(doc, region, term, 1, 8);
    require(got.size() == want.size(), "pair " + std::to_string(iter) + ": " + std::to_string(got.size()) +
                                           " hits vs oracle " + std::to_string(want.size()));
    for (std::size_t i = 0; i < got.size(); ++i)
      require(got[i].span == want[i].span && got[i].edits == want[i].edits,
              "pair " + std::to_string(iter) + ": span mismatch");
    hits += got.size();
  }
  const double s = seconds_since(t0);
  require(s < 30.0, "took " + std::to_string(s) + " s");
  return "1000/1000 pairs agree (" + std::to_string(hits) + " spans)";
}

std::string synthetic_precision_recall() {
  const auto t0 = Clock::now();
  const auto corpus = synthetic::generate(bundle(), 200, 6000, 7);
  std::vector<CorpusResult> results;
  std::size_t typo_misses = 0;
  for (const auto& p : corpus.papers) {
    auto out = classify_paper(make_document({p.id, "J", 2015, {}}, p.text), bundle());
    for (const auto& plant : p.plants)
      if (plant.kind == synthetic::Planting::positive_typo &&
          out.result.per_analyzer.at(plant.analyzer) != Verdict::positive)
        ++typo_misses;
    results.push_back(out.result);
  }
  const auto rows = confusion(results, corpus.truth);
  std::size_t fp = 0, fn = 0, tp = 0;
  for (const auto& r : rows) {
    fp += r.FP;
    fn += r.FN;
    tp += r.P;
  }
  const double s = seconds_since(t0);
  require(fp == 0 && fn == 0, "FP=" + std::to_string(fp) + " FN=" + std::to_string(fn));
  require(typo_misses == 0, std::to_string(typo_misses) + " of " + std::to_string(corpus.typo_plantings) +
                                " typo plantings missed");
  require(corpus.typo_plantings > 0, "generator planted no typos");
  require(s < 60.0, "took " + std::to_string(s) + " s");
  char buf[160];
  std::snprintf(buf, sizeof buf, "P=%zu FP=0 FN=0 over %zu tags, %zu typo plantings found, %.1f s", tp, rows.size(),
                corpus.typo_plantings, s);
  return buf;
}

std::string slurp_tree(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += fs::relative(f, dir).string() + "\n" + read_file(f) + "\n";
  return all;
}

std::string determinism_and_throughput() {
  require(bundle().size() >= 20, "bundle has " + std::to_string(bundle().size()) + " analyzers");
  const fs::path work = fs::temp_directory_path() / "techscan_acceptance_corpus";
  fs::remove_all(work);
  fs::create_directories(work / "papers");
  const auto corpus = synthetic::generate(bundle(), 200, 6000, 8);
  std::ofstream manifest(work / "manifest.csv");
  manifest << "paper_id,journal,year,path\n";
  const char* journals[] = {"EMSE", "TSE", "IST"};
  for (std::size_t i = 0; i < corpus.papers.size(); ++i) {
    const auto& p = corpus.papers[i];
    std::ofstream(work / "papers" / (p.id + ".txt")) << p.text;
    manifest << p.id << "," << journals[i % 3] << "," << 2000 + static_cast<int>(i % 15) << ",papers/" << p.id
             << ".txt\n";
  }
  manifest.close();

  auto run = [&](int jobs, const fs::path& out) {
    const std::string cmd = std::string("\"") + TECHSCAN_CLI + "\" classify --manifest \"" +
                            (work / "manifest.csv").string() + "\" --analyzers \"" + kAnalyzers.string() +
                            "\" --out \"" + out.string() + "\" --jobs " + std::to_string(jobs) + " 2>/dev/null";
    const auto t0 = Clock::now();
    const int rc = std::system(cmd.c_str());
    require(rc == 0, "classify --jobs " + std::to_string(jobs) + " exited with " + std::to_string(rc));
    return seconds_since(t0);
  };
  const double s1 = run(1, work / "out1");
  run(8, work / "out8");
  for (const char* f : {"results.csv", "aggregates.csv"})
    require(read_file(work / "out1" / f) == read_file(work / "out8" / f), std::string(f) + " differs");
  const auto a = slurp_tree(work / "out1");
  require(a == slurp_tree(work / "out8"), "reports differ");
  std::size_t reports = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(work / "out1" / "reports")) ++reports;
  require(reports == 200, std::to_string(reports) + " reports written");
  require(s1 < 60.0, "jobs 1 took " + std::to_string(s1) + " s");
  fs::remove_all(work);
  char buf[128];
  std::snprintf(buf, sizeof buf, "byte-identical, %zu analyzers, jobs 1 in %.1f s", bundle().size(), s1);
  return buf;
}

std::string dsl_round_trip() {
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(kAnalyzers)) {
    if (e.path().extension() != ".analyzer") continue;
    const auto spec = parse_analyzer(read_file(e.path()));
    require(parse_analyzer(serialize_analyzer(spec)) == spec, e.path().filename().string() + " changed");
    ++files;
  }
  const auto& t = analyzer("ttest");
  require(t.positives.size() == 3 && t.negatives.size() == 1 && t.skips.size() == 1 && t.synonyms.size() == 12 &&
              t.tags.size() == 3,
          "ttest parses to " + std::to_string(t.positives.size()) + "/" + std::to_string(t.negatives.size()) + "/" +
              std::to_string(t.skips.size()) + "/" + std::to_string(t.synonyms.size()) + "/" +
              std::to_string(t.tags.size()));
  return std::to_string(files) + " files round-trip; ttest 3/1/1/12/3";
}

std::string confusion_arithmetic() {
  // 42 papers for multiple_testing_correction: 5 that apply a correction, one
  // that only mentions Bonferroni in related work (labeled absent), 36 without.
  const std::string tag = "multiple_testing_correction";
  std::vector<CorpusResult> results;
  std::vector<GroundTruth> truth;
  const std::vector<std::string> uses{"p values were adjusted with the Bonferroni correction",
                                      "we applied the Holm-Bonferroni method",
                                      "we applied the Benjamini-Hochberg procedure to control the false discovery rate",
                                      "p values were adjusted with the Bonferroni correction",
                                      "we applied the Holm-Bonferroni method"};
  for (int i = 0; i < 42; ++i) {
    std::vector<std::string> inserts;
    Label label = Label::absent;
    if (i < 5) {
      inserts.push_back(uses[static_cast<std::size_t>(i)]);
      label = Label::present;
    } else if (i == 5) {
      inserts.push_back("prior studies adjusted p values with the Bonferroni correction");
    }
    auto doc = paper(inserts, 4200, 100 + static_cast<std::uint64_t>(i));
    doc.meta.paper_id = "m" + std::to_string(i);
    results.push_back(classify_paper(doc, bundle()).result);
    truth.push_back({doc.meta.paper_id, tag, label});
  }
  const auto rows = confusion(results, truth);
  require(rows.size() == 1, "expected one tag row");
  const auto& r = rows[0];
  const std::string got = "P=" + std::to_string(r.P) + " FP=" + std::to_string(r.FP) + " TN=" +
                          std::to_string(r.TN) + " FN=" + std::to_string(r.FN) + " total=" +
                          std::to_string(r.total_labeled);
  require(r.P == 5 && r.FP == 1 && r.TN == 36 && r.FN == 0 && r.total_labeled == 42, got);
  return got;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<std::string()>>> criteria{
      {"aggregation exact", aggregation_exact},
      {"skip matcher suite", skip_matcher_suite},
      {"negative override", negative_override},
      {"short-text gate", short_text_gate},
      {"prefix region", prefix_region_rule},
      {"fuzzy oracle equivalence", fuzzy_oracle_equivalence},
      {"synthetic precision/recall", synthetic_precision_recall},
      {"determinism and throughput", determinism_and_throughput},
      {"DSL round trip", dsl_round_trip},
      {"confusion arithmetic", confusion_arithmetic},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& [name, run] = criteria[i];
    std::string detail;
    bool ok = false;
    try {
      detail = run();
      ok = true;
    } catch (const Failure& f) {
      detail = f.why;
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    failed += !ok;
    std::cout << (ok ? "PASS" : "FAIL") << " " << i + 1 << " " << name << ": " << detail << std::endl;
  }
  std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed ? 1 : 0;
}
