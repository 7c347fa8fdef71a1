#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "techscan/csv.hpp"
#include "techscan/dsl.hpp"
#include "techscan/match.hpp"
#include "techscan/scoring.hpp"
#include "techscan/text.hpp"

namespace techscan {

enum class TagVerdict { positive, negative, none };

inline std::string_view to_string(TagVerdict v) {
  switch (v) {
    case TagVerdict::positive: return "positive";
    case TagVerdict::negative: return "negative";
    case TagVerdict::none: return "none";
  }
  return "none";
}

inline TagVerdict parse_tag_verdict(std::string_view s) {
  if (s == "positive") return TagVerdict::positive;
  if (s == "negative") return TagVerdict::negative;
  if (s == "none") return TagVerdict::none;
  throw ConfigError("unknown tag verdict '" + std::string(s) + "'");
}

inline TagVerdict tag_verdict(const TagSummary& s) {
  if (s.positive_count() > 0) return TagVerdict::positive;
  if (s.negative_count() > 0) return TagVerdict::negative;
  return TagVerdict::none;
}

struct CorpusResult {
  SourceMeta meta;
  DocStatus status = DocStatus::analyzed;
  std::map<std::string, TagVerdict> tag_verdicts;  // empty unless analyzed
  std::map<std::string, Verdict> per_analyzer;
  std::size_t word_count = 0;
  std::string error;
};

struct RunConfig {
  MatchConfig match;
  std::size_t short_threshold = kDefaultShortThreshold;
  std::string converter;
  unsigned jobs = 1;
};

/// Sorted union of the tags of all classify-mode analyzers.
inline std::vector<std::string> tag_universe(const std::vector<AnalyzerSpec>& bundle) {
  std::set<std::string> tags;
  for (const auto& spec : bundle)
    if (spec.mode == AnalyzerMode::classify) tags.insert(spec.tags.begin(), spec.tags.end());
  return {tags.begin(), tags.end()};
}

// ---------------------------------------------------------------------------
// Manifest

inline std::vector<SourceMeta> parse_manifest(std::string_view text, const std::filesystem::path& base_dir = {}) {
  std::vector<csv::Row> rows;
  try {
    rows = csv::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  if (rows.empty() || rows[0] != csv::Row{"paper_id", "journal", "year", "path"})
    throw ConfigError("manifest header must be 'paper_id,journal,year,path'");

  std::vector<SourceMeta> out;
  std::set<std::string> ids;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "manifest row " + std::to_string(r + 1);
    if (row.size() != 4) throw ConfigError(where + ": expected 4 fields");
    SourceMeta meta;
    meta.paper_id = row[0];
    meta.journal = row[1];
    if (meta.paper_id.empty()) throw ConfigError(where + ": empty paper_id");
    if (!ids.insert(meta.paper_id).second) throw ConfigError(where + ": duplicate paper_id '" + meta.paper_id + "'");
    try {
      std::size_t used = 0;
      meta.year = std::stoi(row[2], &used);
      if (used != row[2].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError(where + ": invalid year '" + row[2] + "'");
    }
    if (meta.year < 1900 || meta.year > 2100) throw ConfigError(where + ": year out of range [1900, 2100]");
    std::filesystem::path p = row[3];
    meta.path = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    out.push_back(std::move(meta));
  }
  return out;
}

inline std::vector<SourceMeta> load_manifest(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_manifest(text, path.parent_path());
}

// ---------------------------------------------------------------------------
// Report

namespace detail {

inline bool is_utf8_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

inline std::string flatten_whitespace(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

inline constexpr std::size_t kReportContext = 120;

/// Raw-text context around a normalized span: up to `context` raw bytes on
/// each side, the span itself delimited by » and «.
inline std::string snippet(const DocumentText& doc, Region span, std::size_t context = kReportContext) {
  if (span.start >= span.end || doc.raw.empty()) return {};
  const std::string_view raw = doc.raw;
  std::size_t begin = doc.raw_offset(span.start);
  std::size_t end = doc.raw_offset(span.end - 1) + 1;
  while (end < raw.size() && detail::is_utf8_continuation(raw[end])) ++end;

  std::size_t left = begin > context ? begin - context : 0;
  while (left < begin && detail::is_utf8_continuation(raw[left])) ++left;
  std::size_t right = std::min(raw.size(), end + context);
  while (right > end && right < raw.size() && detail::is_utf8_continuation(raw[right])) --right;

  std::string out = left > 0 ? "…" : "";
  out += detail::flatten_whitespace(raw.substr(left, begin - left));
  if (begin > left && !out.empty() && (raw[begin - 1] == ' ' || raw[begin - 1] == '\n')) out.push_back(' ');
  out += "»" + detail::flatten_whitespace(raw.substr(begin, end - begin)) + "«";
  if (end < right && (raw[end] == ' ' || raw[end] == '\n')) out.push_back(' ');
  out += detail::flatten_whitespace(raw.substr(end, right - end));
  if (right < raw.size()) out += "…";
  return out;
}

namespace detail {

inline std::string match_line(const DocumentText& doc, const EvidenceMatch& m) {
  const Region span = m.span;
  std::size_t begin = doc.raw_offset(span.start);
  std::size_t end = doc.raw_offset(span.end - 1) + 1;
  while (end < doc.raw.size() && is_utf8_continuation(doc.raw[end])) ++end;
  std::string line = "  score=" + std::to_string(m.score) + " »" +
                     flatten_whitespace(std::string_view(doc.raw).substr(begin, end - begin)) + "«";
  line += " example=" + std::to_string(m.example_index + 1);
  if (m.edits > 0) line += " edits=" + std::to_string(m.edits);
  line += " supports: [";
  for (std::size_t i = 0; i < m.supports_matched.size(); ++i)
    line += (i ? ", " : "") + m.supports_matched[i].phrase;
  line += "] (" + std::to_string(m.supports_matched.size()) + "/" + std::to_string(m.supports_total) + ")";
  if (m.skipped) line += " skipped by " + m.skipped_by;
  line += "\n    " + snippet(doc, span) + "\n";
  return line;
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

inline std::string pad_left(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

}  // namespace detail

/// Human-readable account of one paper: metadata, tag table, and for every
/// analyzer with evidence the matches that drove its verdict.
inline std::string render_report(const DocumentText& doc, DocStatus status,
                                 const std::vector<AnalyzerEvidence>& exclusion_evidences,
                                 const std::vector<AnalyzerEvidence>& evidences, const std::vector<TagSummary>& tags) {
  std::string out;
  out += "# paper " + doc.meta.paper_id + "\n";
  out += "journal: " + doc.meta.journal + "\n";
  out += "year: " + std::to_string(doc.meta.year) + "\n";
  out += "words: " + std::to_string(doc.word_count) + "\n";
  out += "status: " + std::string(to_string(status)) + "\n";
  for (const auto& notice : doc.notices) out += "note: " + notice + "\n";

  if (!exclusion_evidences.empty()) {
    out += "\n## exclusion analyzers\n";
    for (const auto& ev : exclusion_evidences) {
      out += ev.analyzer + ": " + std::string(to_string(ev.verdict)) + "\n";
      for (const auto& m : ev.positive_matches) out += detail::match_line(doc, m);
      for (const auto& m : ev.negative_matches) out += detail::match_line(doc, m);
    }
  }
  if (status == DocStatus::skipped_short) {
    out += "\nnot analyzed: fewer words than the minimum\n";
    return out;
  }
  if (status == DocStatus::excluded_secondary) {
    out += "\nnot analyzed: excluded as a secondary study\n";
    return out;
  }

  out += "\n## tags\n";
  std::size_t width = 3;
  for (const auto& t : tags) width = std::max(width, t.tag.size());
  out += detail::pad("tag", width) + "  positive  negative  verdict\n";
  for (const auto& t : tags) {
    out += detail::pad(t.tag, width) + "  " + detail::pad_left(std::to_string(t.positive_count()), 8) + "  " +
           detail::pad_left(std::to_string(t.negative_count()), 8) + "  " + std::string(to_string(tag_verdict(t))) +
           "\n";
  }

  for (const auto& ev : evidences) {
    if (ev.verdict == Verdict::no_evidence) continue;
    out += "\n## " + ev.analyzer + ": " + std::string(to_string(ev.verdict)) +
           " (positive=" + std::to_string(ev.positive_matches.size()) +
           " negative=" + std::to_string(ev.negative_matches.size()) +
           " total_score=" + std::to_string(ev.total_score) + ")\n";
    if (!ev.negative_matches.empty()) {
      out += "negative evidence:\n";
      for (const auto& m : ev.negative_matches) out += detail::match_line(doc, m);
    }
    if (!ev.positive_matches.empty()) {
      out += "positive evidence:\n";
      for (const auto& m : ev.positive_matches) out += detail::match_line(doc, m);
    }
  }

  bool any_skipped = std::any_of(evidences.begin(), evidences.end(),
                                 [](const AnalyzerEvidence& ev) { return !ev.skipped_matches.empty(); });
  if (any_skipped) {
    out += "\n## skipped matches\n";
    for (const auto& ev : evidences) {
      if (ev.skipped_matches.empty()) continue;
      out += ev.analyzer + ":\n";
      for (const auto& m : ev.skipped_matches) out += detail::match_line(doc, m);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification

struct ClassifiedPaper {
  CorpusResult result;
  std::string report;
  std::vector<AnalyzerEvidence> exclusion_evidences;
  std::vector<AnalyzerEvidence> evidences;
  std::vector<TagSummary> tags;
  std::vector<std::string> notices;
};

/// Full pipeline for one document: short-text gate, exclusion analyzers,
/// then (if still eligible) the classify analyzers and tag aggregation.
inline ClassifiedPaper classify_paper(DocumentText doc, const std::vector<AnalyzerSpec>& bundle,
                                      const RunConfig& config = {}) {
  ClassifiedPaper out;
  doc = gate_short(std::move(doc), config.short_threshold);
  out.result.meta = doc.meta;
  out.result.word_count = doc.word_count;
  out.result.status = doc.status;
  out.notices = doc.notices;

  if (doc.status == DocStatus::analyzed) {
    for (const auto& spec : bundle) {
      if (spec.mode != AnalyzerMode::exclude) continue;
      out.exclusion_evidences.push_back(resolve_analyzer(run_analyzer(doc, spec, config.match), spec));
      out.result.per_analyzer[spec.name] = out.exclusion_evidences.back().verdict;
    }
    if (decide_exclusion(out.exclusion_evidences)) out.result.status = DocStatus::excluded_secondary;
  }

  if (out.result.status == DocStatus::analyzed) {
    for (const auto& spec : bundle) {
      if (spec.mode != AnalyzerMode::classify) continue;
      out.evidences.push_back(resolve_analyzer(run_analyzer(doc, spec, config.match), spec));
      out.result.per_analyzer[spec.name] = out.evidences.back().verdict;
    }
    out.tags = aggregate_tags(out.evidences);
    for (const auto& t : out.tags) out.result.tag_verdicts[t.tag] = tag_verdict(t);
  }
  out.report = render_report(doc, out.result.status, out.exclusion_evidences, out.evidences, out.tags);
  return out;
}

/// Loads and classifies one manifest entry; I/O failures become an `error`
/// status instead of propagating.
inline ClassifiedPaper classify_source(const SourceMeta& meta, const std::vector<AnalyzerSpec>& bundle,
                                       const RunConfig& config = {}) {
  try {
    return classify_paper(load_document(meta, config.converter), bundle, config);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    ClassifiedPaper out;
    out.result.meta = meta;
    out.result.status = DocStatus::error;
    out.result.error = e.what();
    out.notices.push_back(std::string("error: ") + e.what());
    out.report = "# paper " + meta.paper_id + "\njournal: " + meta.journal + "\nyear: " + std::to_string(meta.year) +
                 "\nstatus: error\nerror: " + e.what() + "\n";
    return out;
  }
}

/// Classifies every manifest entry with up to `config.jobs` workers. Output
/// is in manifest order regardless of scheduling.
inline std::vector<ClassifiedPaper> run_corpus(const std::vector<SourceMeta>& manifest,
                                               const std::vector<AnalyzerSpec>& bundle, const RunConfig& config) {
  config.match.validate();
  if (!config.converter.empty() && config.converter.find("{input}") == std::string::npos)
    throw ConfigError("converter command lacks an {input} placeholder");

  std::vector<ClassifiedPaper> papers(manifest.size());
  const unsigned jobs = std::max(1u, std::min<unsigned>(config.jobs, static_cast<unsigned>(manifest.size())));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < manifest.size(); ++i) papers[i] = classify_source(manifest[i], bundle, config);
    return papers;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(jobs);
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (unsigned w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < manifest.size(); i = next++)
          papers[i] = classify_source(manifest[i], bundle, config);
      } catch (...) {
        failures[w] = std::current_exception();
        next = manifest.size();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
  return papers;
}

// ---------------------------------------------------------------------------
// CSV outputs

inline std::string emit_csv(const std::vector<CorpusResult>& results, const std::vector<std::string>& tags) {
  std::vector<csv::Row> rows;
  csv::Row header{"paper_id", "journal", "year", "words", "status"};
  header.insert(header.end(), tags.begin(), tags.end());
  rows.push_back(std::move(header));
  for (const auto& r : results) {
    csv::Row row{r.meta.paper_id, r.meta.journal, std::to_string(r.meta.year), std::to_string(r.word_count),
                 std::string(to_string(r.status))};
    for (const auto& tag : tags) {
      if (r.status != DocStatus::analyzed) {
        row.emplace_back();
        continue;
      }
      auto it = r.tag_verdicts.find(tag);
      row.emplace_back(to_string(it == r.tag_verdicts.end() ? TagVerdict::none : it->second));
    }
    rows.push_back(std::move(row));
  }
  return csv::format(rows);
}

struct ResultsTable {
  std::vector<std::string> tags;
  std::vector<CorpusResult> results;
};

/// Reads a results.csv produced by `emit_csv`.
inline ResultsTable parse_results_csv(std::string_view text) {
  auto rows = csv::parse(text);
  const csv::Row prefix{"paper_id", "journal", "year", "words", "status"};
  if (rows.empty() || rows[0].size() < prefix.size() || !std::equal(prefix.begin(), prefix.end(), rows[0].begin()))
    throw ConfigError("results header must start with 'paper_id,journal,year,words,status'");
  ResultsTable table;
  table.tags.assign(rows[0].begin() + 5, rows[0].end());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != rows[0].size())
      throw ConfigError("results row " + std::to_string(r + 1) + ": expected " + std::to_string(rows[0].size()) +
                        " fields");
    CorpusResult res;
    res.meta.paper_id = row[0];
    res.meta.journal = row[1];
    try {
      res.meta.year = std::stoi(row[2]);
      res.word_count = std::stoull(row[3]);
    } catch (const std::exception&) {
      throw ConfigError("results row " + std::to_string(r + 1) + ": invalid number");
    }
    res.status = parse_status(row[4]);
    if (res.status == DocStatus::analyzed) {
      for (std::size_t t = 0; t < table.tags.size(); ++t)
        res.tag_verdicts[table.tags[t]] = parse_tag_verdict(row[5 + t]);
    }
    table.results.push_back(std::move(res));
  }
  return table;
}

struct AggregateRow {
  std::string journal;
  int year = 0;
  std::size_t papers_total = 0;
  std::size_t papers_analyzed = 0;
  std::vector<std::size_t> positives;  // parallel to the tag list
  std::vector<double> normalized;
};

/// One row per (journal, year): positive counts per tag over analyzed papers,
/// and those counts divided by the number of analyzed papers.
inline std::vector<AggregateRow> aggregate(const std::vector<CorpusResult>& results,
                                           const std::vector<std::string>& tags) {
  std::map<std::pair<std::string, int>, AggregateRow> cells;
  for (const auto& r : results) {
    auto& row = cells[{r.meta.journal, r.meta.year}];
    if (row.positives.empty()) {
      row.journal = r.meta.journal;
      row.year = r.meta.year;
      row.positives.assign(tags.size(), 0);
    }
    ++row.papers_total;
    if (r.status != DocStatus::analyzed) continue;
    ++row.papers_analyzed;
    for (std::size_t t = 0; t < tags.size(); ++t) {
      auto it = r.tag_verdicts.find(tags[t]);
      if (it != r.tag_verdicts.end() && it->second == TagVerdict::positive) ++row.positives[t];
    }
  }
  std::vector<AggregateRow> out;
  for (auto& [key, row] : cells) {
    row.normalized.resize(tags.size());
    for (std::size_t t = 0; t < tags.size(); ++t)
      row.normalized[t] =
          row.papers_analyzed ? static_cast<double>(row.positives[t]) / static_cast<double>(row.papers_analyzed) : 0.0;
    out.push_back(std::move(row));
  }
  return out;
}

inline std::string emit_aggregates_csv(const std::vector<AggregateRow>& rows, const std::vector<std::string>& tags) {
  std::vector<csv::Row> out;
  csv::Row header{"journal", "year", "papers_total", "papers_analyzed"};
  for (const auto& t : tags) {
    header.push_back(t + "_positive");
    header.push_back(t + "_normalized");
  }
  out.push_back(std::move(header));
  for (const auto& r : rows) {
    csv::Row row{r.journal, std::to_string(r.year), std::to_string(r.papers_total), std::to_string(r.papers_analyzed)};
    for (std::size_t t = 0; t < tags.size(); ++t) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6f", r.normalized[t]);
      row.push_back(std::to_string(r.positives[t]));
      row.emplace_back(buf);
    }
    out.push_back(std::move(row));
  }
  return csv::format(out);
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("error writing " + path.string());
}

inline std::vector<CorpusResult> results_of(const std::vector<ClassifiedPaper>& papers) {
  std::vector<CorpusResult> out;
  out.reserve(papers.size());
  for (const auto& p : papers) out.push_back(p.result);
  return out;
}

/// File name for a paper's report; characters outside [A-Za-z0-9._-] become
/// '_' so ids like "10.1007/s10664" stay inside reports/.
inline std::string report_file_name(std::string_view paper_id) {
  std::string name;
  for (char c : paper_id) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
    name.push_back(keep ? c : '_');
  }
  if (name.empty() || name == "." || name == "..") name = "_" + name;
  return name + ".txt";
}

/// Writes results.csv, aggregates.csv and reports/<paper_id>.txt under `dir`.
inline void write_outputs(const std::filesystem::path& dir, const std::vector<ClassifiedPaper>& papers,
                          const std::vector<std::string>& tags) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "reports");
  const auto results = results_of(papers);
  write_text_file(dir / "results.csv", emit_csv(results, tags));
  write_text_file(dir / "aggregates.csv", emit_aggregates_csv(aggregate(results, tags), tags));
  for (const auto& p : papers) write_text_file(dir / "reports" / report_file_name(p.result.meta.paper_id), p.report);
}

}  // namespace techscan
