#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "techscan/corpus.hpp"
#include "techscan/csv.hpp"

namespace techscan {

enum class Label { present, absent };

struct GroundTruth {
  std::string paper_id;
  std::string tag;
  Label label = Label::absent;
};

struct ConfusionRow {
  std::string tag;
  std::size_t P = 0;
  std::size_t FP = 0;
  std::size_t TN = 0;
  std::size_t FN = 0;
  std::size_t total_labeled = 0;
  // FN split by the tool's verdict for the tag
  std::size_t fn_negative = 0;
  std::size_t fn_none = 0;

  friend bool operator==(const ConfusionRow&, const ConfusionRow&) = default;
};

/// Reads `paper_id,tag,label` rows with label `present` or `absent`.
inline std::vector<GroundTruth> parse_truth_csv(std::string_view text) {
  auto rows = csv::parse(text);
  if (rows.empty() || rows[0] != csv::Row{"paper_id", "tag", "label"})
    throw ConfigError("truth header must be 'paper_id,tag,label'");
  std::vector<GroundTruth> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "truth row " + std::to_string(r + 1);
    if (row.size() != 3) throw ConfigError(where + ": expected 3 fields");
    Label label;
    if (row[2] == "present")
      label = Label::present;
    else if (row[2] == "absent")
      label = Label::absent;
    else
      throw ConfigError(where + ": label must be 'present' or 'absent'");
    if (!seen.insert({row[0], row[1]}).second)
      throw ConfigError(where + ": duplicate (paper_id, tag) pair " + row[0] + "/" + row[1]);
    out.push_back({row[0], row[1], label});
  }
  return out;
}

/// Per-tag confusion counts of tool verdicts against labels. "Classified"
/// means tag verdict positive; negative and none both count as not
/// classified.
inline std::vector<ConfusionRow> confusion(const std::vector<CorpusResult>& results,
                                           const std::vector<GroundTruth>& truth) {
  std::map<std::string, const CorpusResult*> by_id;
  for (const auto& r : results) by_id[r.meta.paper_id] = &r;

  std::set<std::string> unknown;
  std::set<std::string> unanalyzed;
  for (const auto& t : truth) {
    auto it = by_id.find(t.paper_id);
    if (it == by_id.end())
      unknown.insert(t.paper_id);
    else if (it->second->status != DocStatus::analyzed)
      unanalyzed.insert(t.paper_id);
  }
  if (!unknown.empty() || !unanalyzed.empty()) {
    std::string msg;
    if (!unknown.empty()) {
      msg += "truth references unknown paper_id(s):";
      for (const auto& id : unknown) msg += " " + id;
    }
    if (!unanalyzed.empty()) {
      if (!msg.empty()) msg += "; ";
      msg += "truth references papers that were not analyzed:";
      for (const auto& id : unanalyzed) msg += " " + id;
    }
    throw ConfigError(msg);
  }

  std::map<std::string, ConfusionRow> rows;
  for (const auto& t : truth) {
    auto& row = rows[t.tag];
    row.tag = t.tag;
    const auto& verdicts = by_id.at(t.paper_id)->tag_verdicts;
    auto it = verdicts.find(t.tag);
    const TagVerdict v = it == verdicts.end() ? TagVerdict::none : it->second;
    const bool classified = v == TagVerdict::positive;
    const bool present = t.label == Label::present;
    if (classified && present)
      ++row.P;
    else if (classified)
      ++row.FP;
    else if (!present)
      ++row.TN;
    else {
      ++row.FN;
      ++(v == TagVerdict::negative ? row.fn_negative : row.fn_none);
    }
    ++row.total_labeled;
  }
  std::vector<ConfusionRow> out;
  for (auto& [tag, row] : rows) out.push_back(row);
  return out;
}

inline std::string emit_confusion_csv(const std::vector<ConfusionRow>& rows) {
  std::vector<csv::Row> out{{"tag", "P", "FP", "TN", "FN", "total", "FN_negative", "FN_none"}};
  for (const auto& r : rows) {
    out.push_back({r.tag, std::to_string(r.P), std::to_string(r.FP), std::to_string(r.TN), std::to_string(r.FN),
                   std::to_string(r.total_labeled), std::to_string(r.fn_negative), std::to_string(r.fn_none)});
  }
  return csv::format(out);
}

// ---------------------------------------------------------------------------
// Regression fixtures

struct FixtureOutcome {
  std::string name;
  bool passed = true;
  std::vector<std::string> diffs;
};

struct RegressionReport {
  std::vector<FixtureOutcome> fixtures;
  bool passed() const {
    return std::all_of(fixtures.begin(), fixtures.end(), [](const FixtureOutcome& f) { return f.passed; });
  }
};

/// Expected-verdict file: `tag,verdict` rows using the results.csv vocabulary
/// (positive/negative/none). A `status` row checks the paper status instead.
inline std::map<std::string, std::string> parse_expectations(std::string_view text) {
  auto rows = csv::parse(text);
  if (rows.empty() || rows[0] != csv::Row{"tag", "verdict"})
    throw ConfigError("expectation header must be 'tag,verdict'");
  std::map<std::string, std::string> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2) throw ConfigError("expectation row " + std::to_string(r + 1) + ": expected 2 fields");
    if (rows[r][0] == "status")
      (void)parse_status(rows[r][1]);
    else
      (void)parse_tag_verdict(rows[r][1]);
    out[rows[r][0]] = rows[r][1];
  }
  return out;
}

/// Diffs one classified fixture against its expectations.
inline FixtureOutcome check_fixture(const std::string& name, const CorpusResult& result,
                                    const std::map<std::string, std::string>& expected) {
  FixtureOutcome outcome{name, true, {}};
  for (const auto& [key, want] : expected) {
    std::string got;
    if (key == "status") {
      got = to_string(result.status);
    } else if (result.status != DocStatus::analyzed) {
      got = "(" + std::string(to_string(result.status)) + ")";
    } else {
      auto it = result.tag_verdicts.find(key);
      got = it == result.tag_verdicts.end() ? "(unknown tag)" : std::string(to_string(it->second));
    }
    if (got != want) {
      outcome.passed = false;
      outcome.diffs.push_back(key + ": expected " + want + ", got " + got);
    }
  }
  return outcome;
}

/// Runs the bundle over every `<name>.txt` in `dir` and compares against
/// `<name>.expected.csv`.
inline RegressionReport regression_check(const std::filesystem::path& dir, const std::vector<AnalyzerSpec>& bundle,
                                         const RunConfig& config = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError(dir.string() + ": not a directory");
  std::vector<fs::path> texts;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".txt") texts.push_back(e.path());
  std::sort(texts.begin(), texts.end());

  RegressionReport report;
  for (const auto& txt : texts) {
    const std::string name = txt.stem().string();
    const fs::path expected_path = dir / (name + ".expected.csv");
    if (!fs::exists(expected_path)) throw ConfigError("fixture " + name + ": missing " + expected_path.filename().string());
    const auto expected = parse_expectations(read_file(expected_path));
    SourceMeta meta{name, "fixture", 2000, txt};
    auto paper = classify_source(meta, bundle, config);
    report.fixtures.push_back(check_fixture(name, paper.result, expected));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Stratified sampling

namespace detail {

// Uniform draw in [0, bound) from the raw engine output, independent of the
// standard library's distribution implementations.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace detail

/// Proportional sample over the positive/negative/none strata for `tag`,
/// at least one per non-empty stratum when `n` allows. Same seed, same
/// sample.
inline std::vector<std::string> stratified_sample(const std::vector<CorpusResult>& results, const std::string& tag,
                                                  std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("sample size must be at least 1");
  const std::vector<TagVerdict> order{TagVerdict::positive, TagVerdict::negative, TagVerdict::none};
  std::map<TagVerdict, std::vector<std::string>> strata;
  std::size_t total = 0;
  for (const auto& r : results) {
    if (r.status != DocStatus::analyzed) continue;
    auto it = r.tag_verdicts.find(tag);
    strata[it == r.tag_verdicts.end() ? TagVerdict::none : it->second].push_back(r.meta.paper_id);
    ++total;
  }
  for (auto& [v, ids] : strata) std::sort(ids.begin(), ids.end());

  struct Stratum {
    TagVerdict verdict;
    std::size_t size;
    std::size_t take = 0;
  };
  std::vector<Stratum> live;
  for (auto v : order)
    if (!strata[v].empty()) live.push_back({v, strata[v].size()});

  if (n >= total) {
    for (auto& s : live) s.take = s.size;
  } else if (n < live.size()) {
    // Largest strata first; ties keep the positive/negative/none order.
    std::vector<Stratum*> by_size;
    for (auto& s : live) by_size.push_back(&s);
    std::stable_sort(by_size.begin(), by_size.end(), [](auto* a, auto* b) { return a->size > b->size; });
    for (std::size_t k = 0; k < n; ++k) by_size[k]->take = 1;
  } else {
    // One each, then the remainder by largest-remainder apportionment of
    // n * size / total.
    std::size_t remaining = n - live.size();
    std::vector<std::pair<double, Stratum*>> fractions;
    for (auto& s : live) {
      s.take = 1;
      const double quota = static_cast<double>(n) * static_cast<double>(s.size) / static_cast<double>(total);
      const double extra = std::max(0.0, quota - 1.0);
      auto whole = std::min<std::size_t>(static_cast<std::size_t>(extra), std::min(remaining, s.size - 1));
      s.take += whole;
      remaining -= whole;
      fractions.push_back({extra - static_cast<double>(whole), &s});
    }
    std::stable_sort(fractions.begin(), fractions.end(), [](auto& a, auto& b) { return a.first > b.first; });
    while (remaining > 0) {
      bool progressed = false;
      for (auto& [frac, s] : fractions) {
        if (remaining == 0) break;
        if (s->take < s->size) {
          ++s->take;
          --remaining;
          progressed = true;
        }
      }
      if (!progressed) break;
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<std::string> sample;
  for (const auto& s : live) {
    auto ids = strata[s.verdict];
    // partial Fisher-Yates
    for (std::size_t i = 0; i < s.take; ++i) {
      const auto j = i + static_cast<std::size_t>(detail::bounded_draw(rng, ids.size() - i));
      std::swap(ids[i], ids[j]);
      sample.push_back(ids[i]);
    }
  }
  return sample;
}

}  // namespace techscan
