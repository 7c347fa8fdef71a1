#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <regex>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "techscan/dsl.hpp"
#include "techscan/text.hpp"

namespace techscan {

struct MatchConfig {
  std::size_t support_window = 500;
  std::size_t skip_window = 20;
  int max_edits = 1;
  std::size_t fuzzy_min_len = 8;

  void validate() const {
    if (support_window == 0) throw ConfigError("support window must be positive");
    if (max_edits < 0 || max_edits > 1) throw ConfigError("max edits must be 0 or 1");
  }
};

struct TermHit {
  Region span;
  int edits = 0;
  friend bool operator==(const TermHit&, const TermHit&) = default;
};

/// True when `a` and `b` are within one insertion, deletion, substitution or
/// adjacent transposition of each other.
inline bool within_one_edit(std::string_view a, std::string_view b) {
  if (a.size() > b.size()) std::swap(a, b);
  if (b.size() - a.size() > 1) return false;
  std::size_t i = 0;
  while (i < a.size() && a[i] == b[i]) ++i;
  if (i == a.size()) return true;
  if (a.size() == b.size()) {
    if (a.substr(i + 1) == b.substr(i + 1)) return true;
    return i + 1 < a.size() && a[i] == b[i + 1] && a[i + 1] == b[i] && a.substr(i + 2) == b.substr(i + 2);
  }
  return a.substr(i) == b.substr(i + 1);
}

namespace detail {

inline void find_all(std::string_view text, Region region, std::string_view needle,
                     std::vector<std::size_t>& out) {
  if (needle.empty() || region.length() < needle.size()) return;
  std::size_t pos = region.start;
  while (true) {
    pos = text.find(needle, pos);
    if (pos == std::string_view::npos || pos + needle.size() > region.end) return;
    out.push_back(pos);
    ++pos;
  }
}

// Neighbouring starts around one occurrence usually also lie within one
// edit (" students t tes"). Keeps the best of each overlapping group: fewest
// edits, then longest, then leftmost.
inline std::vector<TermHit> best_disjoint(std::vector<TermHit> hits) {
  if (hits.size() < 2) return hits;
  std::vector<TermHit> ranked = hits;
  std::sort(ranked.begin(), ranked.end(), [](const TermHit& a, const TermHit& b) {
    if (a.edits != b.edits) return a.edits < b.edits;
    if (a.span.length() != b.span.length()) return a.span.length() > b.span.length();
    return a.span.start < b.span.start;
  });
  std::vector<TermHit> kept;
  for (const auto& h : ranked) {
    bool clash = false;
    for (const auto& k : kept) clash = clash || h.span.overlaps(k.span);
    if (!clash) kept.push_back(h);
  }
  std::sort(kept.begin(), kept.end(), [](const TermHit& a, const TermHit& b) { return a.span.start < b.span.start; });
  return kept;
}

}  // namespace detail

/// Locates `term` inside `region` of normalized `text`. Terms of at least
/// `fuzzy_min_len` characters tolerate one Damerau-Levenshtein edit when
/// `max_edits` is 1. Matching is by substring. Overlapping candidates
/// collapse to the one with fewest edits, then the longest, then the
/// leftmost; hits are ordered by start.
inline std::vector<TermHit> find_term(std::string_view text, Region region, std::string_view term,
                                      int max_edits = 1, std::size_t fuzzy_min_len = 8) {
  std::vector<TermHit> hits;
  region.end = std::min(region.end, text.size());
  if (term.empty() || region.start >= region.end) return hits;
  const std::size_t n = term.size();

  if (max_edits < 1 || n < fuzzy_min_len || n < 2) {
    std::vector<std::size_t> starts;
    detail::find_all(text, region, term, starts);
    for (auto s : starts) hits.push_back({{s, s + n}, 0});
    return hits;
  }

  // One edit leaves the left half or the right half intact, except for a
  // transposition across the split point, which is searched for directly.
  const std::size_t half = n / 2;
  const std::string_view left = term.substr(0, half);
  const std::string_view right = term.substr(half);
  std::string swapped(term);
  std::swap(swapped[half - 1], swapped[half]);

  std::vector<std::size_t> starts;
  detail::find_all(text, region, left, starts);
  detail::find_all(text, region, swapped, starts);
  std::vector<std::size_t> right_hits;
  detail::find_all(text, region, right, right_hits);
  for (auto q : right_hits) {
    for (std::size_t left_len : {half - 1, half, half + 1}) {
      if (q >= left_len) starts.push_back(q - left_len);
    }
  }
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());

  for (auto s : starts) {
    if (s < region.start) continue;
    const std::size_t room = region.end - s;
    if (room >= n && text.compare(s, n, term) == 0) {
      hits.push_back({{s, s + n}, 0});
      continue;
    }
    for (std::size_t len : {n + 1, n, n - 1}) {
      if (len > room) continue;
      if (within_one_edit(term, text.substr(s, len))) {
        hits.push_back({{s, s + len}, 1});
        break;
      }
    }
  }
  return detail::best_disjoint(std::move(hits));
}

struct SupportHit {
  std::string phrase;
  Region span;
  friend bool operator==(const SupportHit&, const SupportHit&) = default;
};

/// Exact occurrences of each support phrase in the vicinity of `primary`.
/// Each phrase counts once, at its leftmost occurrence in the window.
inline std::vector<SupportHit> find_supports(std::string_view text, Region primary,
                                             const std::vector<std::string>& supports, std::size_t window) {
  std::vector<SupportHit> found;
  const std::size_t lo = primary.start > window ? primary.start - window : 0;
  const std::size_t hi = std::min(text.size(), primary.end + window);
  for (const auto& phrase : supports) {
    if (phrase.empty()) continue;
    auto pos = text.find(phrase, lo);
    if (pos != std::string_view::npos && pos + phrase.size() <= hi) found.push_back({phrase, {pos, pos + phrase.size()}});
  }
  return found;
}

struct EvidenceMatch {
  std::string analyzer;
  std::size_t example_index = 0;
  Polarity polarity = Polarity::positive;
  std::string matched_term;
  Region span;
  int edits = 0;
  std::vector<SupportHit> supports_matched;
  std::size_t supports_total = 0;
  bool skipped = false;
  std::string skipped_by;
  int score = 0;

  bool confirmed() const { return supports_matched.size() == supports_total; }
  friend bool operator==(const EvidenceMatch&, const EvidenceMatch&) = default;
};

/// Flags positive matches that a skip pattern hits. Each pattern runs over
/// the span widened by `skip_window` on both sides; a regex match that
/// overlaps the primary span skips it.
inline std::vector<EvidenceMatch> apply_skips(std::vector<EvidenceMatch> matches, const std::vector<SkipMatcher>& skips,
                                              std::string_view text, std::size_t skip_window = 20) {
  if (skips.empty()) return matches;
  std::vector<std::regex> compiled;
  compiled.reserve(skips.size());
  for (const auto& s : skips) compiled.push_back(s.compile());

  for (auto& m : matches) {
    if (m.polarity != Polarity::positive || m.skipped) continue;
    const std::size_t lo = m.span.start > skip_window ? m.span.start - skip_window : 0;
    const std::size_t hi = std::min(text.size(), m.span.end + skip_window);
    const char* base = text.data();
    for (std::size_t k = 0; k < compiled.size() && !m.skipped; ++k) {
      const char* from = base + lo;
      std::cmatch found;
      while (from < base + hi && std::regex_search(from, base + hi, found, compiled[k])) {
        const std::size_t at = static_cast<std::size_t>(found[0].first - base);
        const Region hit{at, at + static_cast<std::size_t>(found.length(0))};
        if (hit.overlaps(m.span)) {
          m.skipped = true;
          m.skipped_by = skips[k].pattern;
          break;
        }
        if (at >= m.span.end) break;
        from = base + at + 1;
      }
    }
  }
  return matches;
}

namespace detail {

// Picks one match per location: overlapping candidates collapse to the one
// with the fewest edits, then highest score, then longest span.
inline std::vector<EvidenceMatch> collapse_overlaps(std::vector<EvidenceMatch> candidates) {
  std::sort(candidates.begin(), candidates.end(), [](const EvidenceMatch& a, const EvidenceMatch& b) {
    return std::make_tuple(a.edits, -a.score, -static_cast<long long>(a.span.length()), a.span.start, a.example_index,
                           a.matched_term) <
           std::make_tuple(b.edits, -b.score, -static_cast<long long>(b.span.length()), b.span.start, b.example_index,
                           b.matched_term);
  });
  std::vector<EvidenceMatch> kept;
  std::map<std::size_t, Region> taken;  // start -> span, non-overlapping
  for (auto& c : candidates) {
    auto it = taken.upper_bound(c.span.start);
    bool clash = it != taken.end() && it->second.overlaps(c.span);
    if (!clash && it != taken.begin()) clash = std::prev(it)->second.overlaps(c.span);
    if (clash) continue;
    taken.emplace(c.span.start, c.span);
    kept.push_back(std::move(c));
  }
  return kept;
}

}  // namespace detail

/// Runs every example of `spec` over the document. Positives carry their
/// support hits and skip status; negatives are kept only when all their
/// supports are present. A positive located where a negative is confirmed
/// is dropped. Output is ordered by (polarity, span start, example index).
inline std::vector<EvidenceMatch> run_analyzer(const DocumentText& doc, const AnalyzerSpec& spec,
                                               const MatchConfig& config = {}) {
  std::vector<EvidenceMatch> result;
  if (doc.normalized.empty()) return result;
  const std::string_view text = doc.normalized;
  const Region region = prefix_region(doc, spec.region_fraction);

  std::map<std::string, std::vector<TermHit>, std::less<>> hits_by_term;
  auto hits_for = [&](const std::string& term) -> const std::vector<TermHit>& {
    auto it = hits_by_term.find(term);
    if (it == hits_by_term.end())
      it = hits_by_term.emplace(term, find_term(text, region, term, config.max_edits, config.fuzzy_min_len)).first;
    return it->second;
  };

  auto candidates_for = [&](const std::vector<ExampleTemplate>& examples, Polarity polarity) {
    std::vector<EvidenceMatch> candidates;
    for (std::size_t idx = 0; idx < examples.size(); ++idx) {
      const auto& ex = examples[idx];
      std::vector<const std::string*> terms{&ex.primary_norm};
      for (const auto& syn : spec.synonym_terms)
        if (syn != ex.primary_norm) terms.push_back(&syn);
      for (const auto* term : terms) {
        for (const auto& hit : hits_for(*term)) {
          EvidenceMatch m;
          m.analyzer = spec.name;
          m.example_index = idx;
          m.polarity = polarity;
          m.matched_term = *term;
          m.span = hit.span;
          m.edits = hit.edits;
          m.supports_matched = find_supports(text, hit.span, ex.supports_norm, config.support_window);
          m.supports_total = ex.supports_norm.size();
          if (polarity == Polarity::negative && !m.confirmed()) continue;
          m.score = 1 + static_cast<int>(m.supports_matched.size());
          candidates.push_back(std::move(m));
        }
      }
    }
    return detail::collapse_overlaps(std::move(candidates));
  };

  auto negatives = candidates_for(spec.negatives, Polarity::negative);
  auto positives = candidates_for(spec.positives, Polarity::positive);
  std::erase_if(positives, [&](const EvidenceMatch& p) {
    return std::any_of(negatives.begin(), negatives.end(),
                       [&](const EvidenceMatch& n) { return n.span.overlaps(p.span); });
  });

  auto by_position = [](const EvidenceMatch& a, const EvidenceMatch& b) {
    return std::tie(a.span.start, a.example_index) < std::tie(b.span.start, b.example_index);
  };
  std::sort(positives.begin(), positives.end(), by_position);
  std::sort(negatives.begin(), negatives.end(), by_position);
  positives = apply_skips(std::move(positives), spec.skips, text, config.skip_window);

  result = std::move(positives);
  result.insert(result.end(), std::make_move_iterator(negatives.begin()), std::make_move_iterator(negatives.end()));
  return result;
}

}  // namespace techscan
