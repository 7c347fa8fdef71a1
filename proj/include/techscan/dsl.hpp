#pragma once

// Analyzer definition files.
//
//   analyzer: ttest
//   tags: parametric_test, statistical_test
//   region: full | prefix:<fraction>
//   mode: classify | exclude
//   [positive]
//   We __used__ a [[[Student's t-test]]]
//   [negative]
//   We __did not use__ a [[[Student's t-test]]] to
//   [skip]
//   #RegexpMatcher(r"[a-zA-Z]{1}t(\s+|-)test"i)#
//   [synonyms]
//   "Student's t test", "t test",
//
// Lines starting with '#' are comments, except skip tokens inside [skip].

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <map>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "techscan/text.hpp"

namespace techscan {

class DslError : public std::runtime_error {
 public:
  DslError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line), message_(message) {}

  std::size_t line() const { return line_; }
  const std::string& message() const { return message_; }

 private:
  std::size_t line_;
  std::string message_;
};

/// Aggregated failure of a bundle load; one entry per problem.
class BundleError : public std::runtime_error {
 public:
  explicit BundleError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string s = "analyzer bundle has " + std::to_string(problems.size()) + " error(s)";
    for (const auto& p : problems) s += "\n  " + p;
    return s;
  }
  std::vector<std::string> problems_;
};

enum class Polarity { positive, negative };

inline std::string_view to_string(Polarity p) {
  return p == Polarity::positive ? "positive" : "negative";
}

struct ExampleTemplate {
  std::string raw_line;
  std::string primary;
  std::vector<std::string> supports;
  Polarity polarity = Polarity::positive;
  std::string primary_norm;
  std::vector<std::string> supports_norm;

  friend bool operator==(const ExampleTemplate&, const ExampleTemplate&) = default;
};

struct SkipMatcher {
  std::string pattern;
  bool case_insensitive = false;

  std::regex compile() const {
    auto flags = std::regex::ECMAScript | std::regex::optimize;
    if (case_insensitive) flags |= std::regex::icase;
    return std::regex(pattern, flags);
  }
  std::string token() const {
    return "#RegexpMatcher(r\"" + pattern + "\"" + (case_insensitive ? "i" : "") + ")#";
  }
  friend bool operator==(const SkipMatcher& a, const SkipMatcher& b) {
    return a.pattern == b.pattern && a.case_insensitive == b.case_insensitive;
  }
};

enum class AnalyzerMode { classify, exclude };

struct AnalyzerSpec {
  std::string name;
  std::vector<ExampleTemplate> positives;
  std::vector<ExampleTemplate> negatives;
  std::vector<SkipMatcher> skips;
  /// Verbatim synonym phrases, in file order, without exact duplicates.
  std::vector<std::string> synonyms;
  /// Normalized synonyms with duplicates (after normalization) removed.
  std::vector<std::string> synonym_terms;
  std::vector<std::string> tags;
  double region_fraction = 1.0;
  AnalyzerMode mode = AnalyzerMode::classify;

  friend bool operator==(const AnalyzerSpec&, const AnalyzerSpec&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto first = static_cast<unsigned char>(s[0]);
  if (!(std::isalpha(first) || first == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char ch) {
    auto c = static_cast<unsigned char>(ch);
    return std::isalnum(c) || c == '_' || c == '-';
  });
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto comma = s.find(',', pos);
    if (comma == std::string_view::npos) comma = s.size();
    auto item = trim(s.substr(pos, comma - pos));
    if (!item.empty()) out.emplace_back(item);
    pos = comma + 1;
  }
  return out;
}

inline std::string format_fraction(double f) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, f);
  return std::string(buf, res.ptr);
}

inline double parse_fraction(std::string_view s, std::size_t line) {
  double value = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DslError(line, "invalid region fraction '" + std::string(s) + "'");
  if (!(value > 0.0 && value <= 1.0)) throw DslError(line, "region fraction must lie in (0, 1]");
  return value;
}

}  // namespace detail

/// Parses one `#RegexpMatcher(r"PATTERN"FLAGS)#` token.
inline SkipMatcher parse_skip_matcher(std::string_view token, std::size_t line = 0) {
  token = detail::trim(token);
  constexpr std::string_view head = "#RegexpMatcher(r\"";
  constexpr std::string_view tail = ")#";
  if (!token.starts_with(head) || !token.ends_with(tail) || token.size() < head.size() + tail.size() + 1)
    throw DslError(line, "malformed skip matcher");
  auto body = token.substr(head.size(), token.size() - head.size() - tail.size());
  const auto close = body.rfind('"');
  if (close == std::string_view::npos) throw DslError(line, "malformed skip matcher");
  auto flags = body.substr(close + 1);
  if (flags.find_first_not_of('i') != std::string_view::npos)
    throw DslError(line, "malformed skip matcher: unknown flag in '" + std::string(flags) + "'");

  SkipMatcher skip{std::string(body.substr(0, close)), !flags.empty()};
  if (skip.pattern.empty()) throw DslError(line, "malformed skip matcher: empty pattern");
  try {
    (void)skip.compile();
  } catch (const std::regex_error& e) {
    throw DslError(line, "skip matcher pattern does not compile: " + std::string(e.what()));
  }
  return skip;
}

/// Splits an annotated example into its `[[[primary]]]` and `__support__`
/// phrases.
inline ExampleTemplate parse_example(std::string_view text, Polarity polarity, std::size_t line = 0) {
  ExampleTemplate ex;
  ex.raw_line = std::string(detail::trim(text));
  ex.polarity = polarity;
  std::string_view s = ex.raw_line;

  std::size_t markers = 0;
  for (auto at = s.find("__"); at != std::string_view::npos; at = s.find("__", at + 2)) ++markers;
  if (markers % 2 != 0) throw DslError(line, "odd number of __ support markers");

  bool in_primary = false;
  bool in_support = false;
  bool seen_primary = false;
  std::size_t open_at = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s.compare(i, 3, "[[[") == 0) {
      if (in_primary) throw DslError(line, "nested primary marker");
      if (in_support) throw DslError(line, "primary marker inside a support phrase");
      if (seen_primary) throw DslError(line, "more than one primary marker in example");
      in_primary = true;
      open_at = i + 3;
      i += 3;
    } else if (s.compare(i, 3, "]]]") == 0) {
      if (!in_primary) throw DslError(line, "unopened primary marker");
      ex.primary = std::string(s.substr(open_at, i - open_at));
      in_primary = false;
      seen_primary = true;
      i += 3;
    } else if (s.compare(i, 2, "__") == 0) {
      if (in_primary) throw DslError(line, "support marker inside the primary phrase");
      if (!in_support) {
        in_support = true;
        open_at = i + 2;
      } else {
        ex.supports.emplace_back(s.substr(open_at, i - open_at));
        in_support = false;
      }
      i += 2;
    } else {
      ++i;
    }
  }
  if (in_primary) throw DslError(line, "unclosed primary marker");
  if (in_support) throw DslError(line, "odd number of __ support markers");
  if (!seen_primary) throw DslError(line, "example has no [[[primary]]] marker");

  ex.primary_norm = normalize_phrase(ex.primary);
  if (ex.primary_norm.empty()) throw DslError(line, "primary phrase is empty after normalization");
  for (const auto& support : ex.supports) {
    auto norm = normalize_phrase(support);
    if (norm.empty()) throw DslError(line, "support phrase is empty after normalization");
    ex.supports_norm.push_back(std::move(norm));
  }
  return ex;
}

namespace detail {

// Reads `"a", "b",` lists that may wrap across lines. Quotes inside a phrase
// are written as \" and backslashes as \\.
inline void parse_synonym_line(std::string_view s, std::size_t line, std::vector<std::string>& out) {
  std::size_t i = 0;
  auto skip_separators = [&] {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == ',' || s[i] == '\r')) ++i;
  };
  skip_separators();
  while (i < s.size()) {
    if (s[i] != '"') throw DslError(line, "synonyms must be double-quoted phrases");
    ++i;
    std::string phrase;
    bool closed = false;
    while (i < s.size()) {
      char c = s[i++];
      if (c == '\\' && i < s.size()) {
        phrase.push_back(s[i++]);
      } else if (c == '"') {
        closed = true;
        break;
      } else {
        phrase.push_back(c);
      }
    }
    if (!closed) throw DslError(line, "unterminated synonym phrase");
    out.push_back(std::move(phrase));
    skip_separators();
  }
}

inline std::string quote_phrase(std::string_view phrase) {
  std::string q = "\"";
  for (char c : phrase) {
    if (c == '"' || c == '\\') q.push_back('\\');
    q.push_back(c);
  }
  q.push_back('"');
  return q;
}

}  // namespace detail

inline AnalyzerSpec parse_analyzer(std::string_view source) {
  AnalyzerSpec spec;
  enum class Section { header, positive, negative, skip, synonyms };
  Section section = Section::header;
  bool have_name = false;
  bool have_tags = false;
  std::size_t positive_header_line = 0;
  std::vector<std::string> raw_synonyms;
  std::size_t last_line = 0;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < source.size()) {
    auto nl = source.find('\n', pos);
    if (nl == std::string_view::npos) nl = source.size();
    std::string_view line = detail::trim(source.substr(pos, nl - pos));
    pos = nl + 1;
    last_line = ++line_no;

    if (line.empty()) continue;
    const bool skip_token = section == Section::skip && line.starts_with("#RegexpMatcher");
    if (line.front() == '#' && !skip_token) continue;

    if (line.front() == '[' && line.back() == ']' && !line.starts_with("[[[")) {
      auto name = line.substr(1, line.size() - 2);
      if (!have_name) throw DslError(line_no, "missing analyzer: header before sections");
      if (name == "positive") {
        section = Section::positive;
        positive_header_line = line_no;
      } else if (name == "negative") {
        section = Section::negative;
      } else if (name == "skip") {
        section = Section::skip;
      } else if (name == "synonyms") {
        section = Section::synonyms;
      } else {
        throw DslError(line_no, "unknown section name [" + std::string(name) + "]");
      }
      continue;
    }

    switch (section) {
      case Section::header: {
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) throw DslError(line_no, "expected 'key: value' header line");
        auto key = detail::trim(line.substr(0, colon));
        auto value = detail::trim(line.substr(colon + 1));
        if (key == "analyzer") {
          if (have_name) throw DslError(line_no, "duplicate analyzer: header");
          if (!detail::is_identifier(value)) throw DslError(line_no, "invalid analyzer name '" + std::string(value) + "'");
          spec.name = std::string(value);
          have_name = true;
        } else if (!have_name) {
          throw DslError(line_no, "missing analyzer: header");
        } else if (key == "tags") {
          spec.tags = detail::split_list(value);
          for (const auto& t : spec.tags)
            if (!detail::is_identifier(t)) throw DslError(line_no, "invalid tag '" + t + "'");
          have_tags = true;
        } else if (key == "region") {
          if (value == "full") {
            spec.region_fraction = 1.0;
          } else if (value.starts_with("prefix:")) {
            spec.region_fraction = detail::parse_fraction(detail::trim(value.substr(7)), line_no);
          } else {
            throw DslError(line_no, "region must be 'full' or 'prefix:<fraction>'");
          }
        } else if (key == "mode") {
          if (value == "classify")
            spec.mode = AnalyzerMode::classify;
          else if (value == "exclude")
            spec.mode = AnalyzerMode::exclude;
          else
            throw DslError(line_no, "mode must be 'classify' or 'exclude'");
        } else {
          throw DslError(line_no, "unknown header key '" + std::string(key) + "'");
        }
        break;
      }
      case Section::positive:
        spec.positives.push_back(parse_example(line, Polarity::positive, line_no));
        break;
      case Section::negative:
        spec.negatives.push_back(parse_example(line, Polarity::negative, line_no));
        break;
      case Section::skip:
        spec.skips.push_back(parse_skip_matcher(line, line_no));
        break;
      case Section::synonyms:
        detail::parse_synonym_line(line, line_no, raw_synonyms);
        break;
    }
  }

  if (!have_name) throw DslError(std::max<std::size_t>(last_line, 1), "missing analyzer: header");
  if (spec.positives.empty())
    throw DslError(positive_header_line ? positive_header_line : std::max<std::size_t>(last_line, 1),
                   "no positive examples");
  if (spec.mode == AnalyzerMode::classify && (!have_tags || spec.tags.empty()))
    throw DslError(1, "classify analyzer '" + spec.name + "' declares no tags");

  std::set<std::string> seen_verbatim;
  std::set<std::string> seen_norm;
  for (auto& syn : raw_synonyms) {
    auto norm = normalize_phrase(syn);
    if (norm.empty()) throw DslError(last_line, "synonym \"" + syn + "\" is empty after normalization");
    if (seen_norm.insert(norm).second) spec.synonym_terms.push_back(norm);
    if (seen_verbatim.insert(syn).second) spec.synonyms.push_back(std::move(syn));
  }
  return spec;
}

/// Writes a spec back out in the file format `parse_analyzer` reads.
inline std::string serialize_analyzer(const AnalyzerSpec& spec) {
  std::string out = "analyzer: " + spec.name + "\n";
  if (!spec.tags.empty()) {
    out += "tags: ";
    for (std::size_t i = 0; i < spec.tags.size(); ++i) out += (i ? ", " : "") + spec.tags[i];
    out += "\n";
  }
  out += "region: " + (spec.region_fraction == 1.0 ? std::string("full")
                                                   : "prefix:" + detail::format_fraction(spec.region_fraction));
  out += "\n";
  out += spec.mode == AnalyzerMode::classify ? "mode: classify\n" : "mode: exclude\n";
  out += "[positive]\n";
  for (const auto& ex : spec.positives) out += ex.raw_line + "\n";
  out += "[negative]\n";
  for (const auto& ex : spec.negatives) out += ex.raw_line + "\n";
  out += "[skip]\n";
  for (const auto& skip : spec.skips) out += skip.token() + "\n";
  out += "[synonyms]\n";
  for (const auto& syn : spec.synonyms) out += detail::quote_phrase(syn) + ",\n";
  return out;
}

/// Loads every `*.analyzer` file in `dir`, sorted by analyzer name. Any parse
/// failure or duplicate name aborts the whole bundle.
inline std::vector<AnalyzerSpec> load_bundle(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw BundleError({dir.string() + ": not a directory"});

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".analyzer") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<std::string> problems;
  std::vector<AnalyzerSpec> specs;
  std::map<std::string, fs::path> origin;
  for (const auto& file : files) {
    try {
      auto spec = parse_analyzer(read_file(file));
      auto [it, inserted] = origin.emplace(spec.name, file);
      if (!inserted) {
        problems.push_back(file.filename().string() + ": duplicate analyzer name '" + spec.name + "' (also in " +
                           it->second.filename().string() + ")");
        continue;
      }
      specs.push_back(std::move(spec));
    } catch (const DslError& e) {
      problems.push_back(file.filename().string() + ":" + std::to_string(e.line()) + ": " + e.message());
    } catch (const std::exception& e) {
      problems.push_back(file.filename().string() + ": " + e.what());
    }
  }
  if (!problems.empty()) throw BundleError(std::move(problems));
  std::sort(specs.begin(), specs.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return specs;
}

}  // namespace techscan
