#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "techscan/dsl.hpp"
#include "techscan/match.hpp"

namespace techscan {

enum class Verdict { positive, negative, no_evidence };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::positive: return "Positive";
    case Verdict::negative: return "Negative";
    case Verdict::no_evidence: return "NoEvidence";
  }
  return "NoEvidence";
}

struct AnalyzerEvidence {
  std::string analyzer;
  AnalyzerMode mode = AnalyzerMode::classify;
  Verdict verdict = Verdict::no_evidence;
  std::vector<EvidenceMatch> positive_matches;  // unskipped, best first
  std::vector<EvidenceMatch> negative_matches;  // confirmed only
  std::vector<EvidenceMatch> skipped_matches;
  int total_score = 0;
  std::vector<std::string> tags;
};

struct TagSummary {
  std::string tag;
  std::vector<std::string> positive_analyzers;
  std::vector<std::string> negative_analyzers;
  bool classified_positive = false;

  std::size_t positive_count() const { return positive_analyzers.size(); }
  std::size_t negative_count() const { return negative_analyzers.size(); }
};

/// Turns one analyzer's matches into a verdict. A single confirmed negative
/// match makes the verdict Negative whatever the positive evidence.
inline AnalyzerEvidence resolve_analyzer(const std::vector<EvidenceMatch>& matches, const AnalyzerSpec& spec) {
  AnalyzerEvidence ev;
  ev.analyzer = spec.name;
  ev.mode = spec.mode;
  ev.tags = spec.tags;
  for (const auto& m : matches) {
    if (m.polarity == Polarity::negative) {
      if (m.confirmed()) ev.negative_matches.push_back(m);
    } else if (m.skipped) {
      ev.skipped_matches.push_back(m);
    } else {
      ev.positive_matches.push_back(m);
      ev.total_score += m.score;
    }
  }
  std::stable_sort(ev.positive_matches.begin(), ev.positive_matches.end(),
                   [](const EvidenceMatch& a, const EvidenceMatch& b) {
                     return std::make_tuple(-a.score, a.span.start, a.example_index) <
                            std::make_tuple(-b.score, b.span.start, b.example_index);
                   });
  if (!ev.negative_matches.empty())
    ev.verdict = Verdict::negative;
  else if (!ev.positive_matches.empty())
    ev.verdict = Verdict::positive;
  else
    ev.verdict = Verdict::no_evidence;
  return ev;
}

/// Per-tag tally of analyzer verdicts. A tag is classified positive when any
/// analyzer carrying it is Positive; negatives from other analyzers do not
/// veto it.
inline std::vector<TagSummary> aggregate_tags(const std::vector<AnalyzerEvidence>& evidences) {
  std::map<std::string, TagSummary> by_tag;
  for (const auto& ev : evidences) {
    for (const auto& tag : ev.tags) {
      auto& summary = by_tag[tag];
      summary.tag = tag;
      if (ev.verdict == Verdict::positive) summary.positive_analyzers.push_back(ev.analyzer);
      if (ev.verdict == Verdict::negative) summary.negative_analyzers.push_back(ev.analyzer);
    }
  }
  std::vector<TagSummary> out;
  out.reserve(by_tag.size());
  for (auto& [tag, summary] : by_tag) {
    std::sort(summary.positive_analyzers.begin(), summary.positive_analyzers.end());
    std::sort(summary.negative_analyzers.begin(), summary.negative_analyzers.end());
    summary.classified_positive = !summary.positive_analyzers.empty();
    out.push_back(std::move(summary));
  }
  return out;
}

/// A paper is excluded when any exclusion analyzer is Positive.
inline bool decide_exclusion(const std::vector<AnalyzerEvidence>& exclusion_evidences) {
  return std::any_of(exclusion_evidences.begin(), exclusion_evidences.end(),
                     [](const AnalyzerEvidence& ev) { return ev.verdict == Verdict::positive; });
}

}  // namespace techscan
