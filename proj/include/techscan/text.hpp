#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace techscan {

/// Thrown for invalid user-supplied configuration (fractions, thresholds,
/// manifests). The CLI maps it to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SourceMeta {
  std::string paper_id;
  std::string journal;
  int year = 0;
  std::filesystem::path path;
};

enum class DocStatus { analyzed, skipped_short, excluded_secondary, error };

inline std::string_view to_string(DocStatus s) {
  switch (s) {
    case DocStatus::analyzed: return "analyzed";
    case DocStatus::skipped_short: return "skipped_short";
    case DocStatus::excluded_secondary: return "excluded_secondary";
    case DocStatus::error: return "error";
  }
  return "error";
}

inline DocStatus parse_status(std::string_view s) {
  if (s == "analyzed") return DocStatus::analyzed;
  if (s == "skipped_short") return DocStatus::skipped_short;
  if (s == "excluded_secondary") return DocStatus::excluded_secondary;
  if (s == "error") return DocStatus::error;
  throw ConfigError("unknown status '" + std::string(s) + "'");
}

/// Half-open span [start, end) of normalized text.
struct Region {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool contains(Region other) const {
    return other.start >= start && other.end <= end;
  }
  bool overlaps(Region other) const {
    return start < other.end && other.start < end;
  }
  friend bool operator==(const Region&, const Region&) = default;
};

struct Normalized {
  std::string text;
  /// offset_map[i] is the raw byte index the i-th normalized byte derives from.
  std::vector<std::size_t> offset_map;
};

namespace detail {

inline bool is_ascii_letter(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

enum class CharClass { other, space, line_break, hyphen, apostrophe, soft_hyphen };

struct Classified {
  CharClass cls;
  std::size_t len;
};

inline bool starts_with_at(std::string_view s, std::size_t i, std::string_view p) {
  return s.size() - i >= p.size() && s.compare(i, p.size(), p) == 0;
}

inline Classified classify(std::string_view raw, std::size_t i) {
  const auto c = static_cast<unsigned char>(raw[i]);
  switch (c) {
    case ' ': case '\t': case '\f': case '\v':
      return {CharClass::space, 1};
    case '\n':
      return {CharClass::line_break, 1};
    case '\r':
      return {CharClass::line_break, starts_with_at(raw, i, "\r\n") ? 2u : 1u};
    case '-':
      return {CharClass::hyphen, 1};
    case '\'':
      return {CharClass::apostrophe, 1};
    default:
      break;
  }
  if (c == 0xC2) {
    if (starts_with_at(raw, i, "\xC2\xA0")) return {CharClass::space, 2};
    if (starts_with_at(raw, i, "\xC2\xAD")) return {CharClass::soft_hyphen, 2};
  } else if (c == 0xCA) {
    if (starts_with_at(raw, i, "\xCA\xBC")) return {CharClass::apostrophe, 2};
  } else if (c == 0xE2) {
    // U+2010 hyphen, U+2011 non-breaking hyphen, U+2013 en dash
    if (starts_with_at(raw, i, "\xE2\x80\x90") || starts_with_at(raw, i, "\xE2\x80\x91") ||
        starts_with_at(raw, i, "\xE2\x80\x93"))
      return {CharClass::hyphen, 3};
    // U+2212 minus sign
    if (starts_with_at(raw, i, "\xE2\x88\x92")) return {CharClass::hyphen, 3};
    // U+2018, U+2019 typographic apostrophes
    if (starts_with_at(raw, i, "\xE2\x80\x98") || starts_with_at(raw, i, "\xE2\x80\x99"))
      return {CharClass::apostrophe, 3};
    // U+2028 line separator
    if (starts_with_at(raw, i, "\xE2\x80\xA8")) return {CharClass::line_break, 3};
  }
  return {CharClass::other, 1};
}

// If the hyphen at `i` (of byte length `len`) ends a line inside a word,
// returns the raw index of the continuation letter. A lowercase continuation
// is a split word; an uppercase one is a real compound ("Mann-\nWhitney")
// and is left to the ordinary hyphen rule.
inline std::size_t line_end_hyphen(std::string_view raw, std::size_t i, std::size_t len) {
  if (i == 0 || !is_ascii_letter(static_cast<unsigned char>(raw[i - 1]))) return 0;
  std::size_t j = i + len;
  auto skip_spaces = [&] {
    while (j < raw.size() && (raw[j] == ' ' || raw[j] == '\t')) ++j;
  };
  skip_spaces();
  if (j >= raw.size()) return 0;
  if (raw[j] == '\r') {
    j += starts_with_at(raw, j, "\r\n") ? 2 : 1;
  } else if (raw[j] == '\n') {
    ++j;
  } else {
    return 0;
  }
  skip_spaces();
  if (j >= raw.size()) return 0;
  const auto next = static_cast<unsigned char>(raw[j]);
  if (next >= 'a' && next <= 'z') return j;
  return 0;
}

}  // namespace detail

/// Canonical matching form of extracted text: line-end hyphenation joined,
/// whitespace collapsed to single spaces, ASCII lowercased, apostrophes
/// dropped, remaining hyphens turned into spaces.
inline Normalized normalize(std::string_view raw) {
  using detail::CharClass;
  Normalized out;
  out.text.reserve(raw.size());
  out.offset_map.reserve(raw.size());

  bool pending_space = false;
  std::size_t pending_at = 0;
  std::size_t i = 0;
  while (i < raw.size()) {
    const auto [cls, len] = detail::classify(raw, i);
    switch (cls) {
      case CharClass::hyphen:
        if (std::size_t next = detail::line_end_hyphen(raw, i, len); next != 0) {
          i = next;
          continue;
        }
        [[fallthrough]];
      case CharClass::space:
      case CharClass::line_break:
        if (!pending_space) {
          pending_space = true;
          pending_at = i;
        }
        i += len;
        continue;
      case CharClass::apostrophe:
      case CharClass::soft_hyphen:
        i += len;
        continue;
      case CharClass::other:
        break;
    }
    if (pending_space) {
      out.text.push_back(' ');
      out.offset_map.push_back(pending_at);
      pending_space = false;
    }
    char c = raw[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.text.push_back(c);
    out.offset_map.push_back(i);
    ++i;
  }
  if (pending_space) {
    out.text.push_back(' ');
    out.offset_map.push_back(pending_at);
  }
  return out;
}

/// Normalized phrase with the leading/trailing space trimmed. Used for
/// analyzer terms so that " t-test " and "t-test" search identically.
inline std::string normalize_phrase(std::string_view phrase) {
  std::string s = normalize(phrase).text;
  if (!s.empty() && s.front() == ' ') s.erase(0, 1);
  if (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

inline std::size_t count_words(std::string_view normalized) {
  std::size_t words = 0;
  bool in_word = false;
  for (char c : normalized) {
    if (c == ' ') {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++words;
    }
  }
  return words;
}

struct DocumentText {
  SourceMeta meta;
  std::string raw;
  std::string normalized;
  std::vector<std::size_t> offset_map;
  std::size_t word_count = 0;
  DocStatus status = DocStatus::analyzed;
  std::vector<std::string> notices;

  /// Raw byte offset for a normalized index; `len(normalized)` maps to
  /// `len(raw)`.
  std::size_t raw_offset(std::size_t normalized_index) const {
    return normalized_index < offset_map.size() ? offset_map[normalized_index] : raw.size();
  }
};

inline DocumentText make_document(SourceMeta meta, std::string raw) {
  DocumentText doc;
  doc.meta = std::move(meta);
  doc.raw = std::move(raw);
  auto norm = normalize(doc.raw);
  doc.normalized = std::move(norm.text);
  doc.offset_map = std::move(norm.offset_map);
  doc.word_count = count_words(doc.normalized);
  return doc;
}

inline constexpr std::size_t kDefaultShortThreshold = 4000;

/// Marks documents under `short_threshold` words as skipped. Text is untouched.
inline DocumentText gate_short(DocumentText doc, std::size_t short_threshold = kDefaultShortThreshold) {
  if (doc.word_count < short_threshold) {
    doc.status = DocStatus::skipped_short;
    doc.notices.push_back("skipped: " + std::to_string(doc.word_count) + " words is below the " +
                          std::to_string(short_threshold) + "-word minimum");
  }
  return doc;
}

inline void check_fraction(double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("region fraction must lie in (0, 1], got " + std::to_string(fraction));
}

/// The leading `fraction` of the normalized text, measured in characters.
inline Region prefix_region(std::size_t normalized_length, double fraction) {
  check_fraction(fraction);
  if (fraction == 1.0) return {0, normalized_length};
  // 1e-9 absorbs products like 0.29 * 100 = 28.999999999999996
  const double exact = fraction * static_cast<double>(normalized_length);
  auto end = static_cast<std::size_t>(std::floor(exact + 1e-9 * std::max(1.0, exact)));
  return {0, std::min(end, normalized_length)};
}

inline Region prefix_region(const DocumentText& doc, double fraction) {
  return prefix_region(doc.normalized.size(), fraction);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw std::runtime_error("error reading " + path.string());
  return ss.str();
}

namespace detail {

inline std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'')
      q += "'\\''";
    else
      q += c;
  }
  q += "'";
  return q;
}

}  // namespace detail

/// Runs an external text extractor. `command_template` must contain
/// `{input}`, which is replaced by the shell-quoted path; stdout is the text.
inline std::string run_converter(const std::string& command_template, const std::filesystem::path& input) {
  const auto at = command_template.find("{input}");
  if (at == std::string::npos) throw ConfigError("converter command lacks an {input} placeholder");
  std::string cmd = command_template;
  cmd.replace(at, 7, detail::shell_quote(input.string()));

  struct PipeCloser {
    void operator()(FILE* f) const {
      if (f) pclose(f);
    }
  };
  FILE* raw_pipe = popen(cmd.c_str(), "r");
  if (!raw_pipe) throw std::runtime_error("cannot start converter for " + input.string());
  std::unique_ptr<FILE, PipeCloser> pipe(raw_pipe);
  std::string text;
  char buf[8192];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe.get())) > 0) text.append(buf, n);
  int rc = pclose(pipe.release());
  if (rc != 0) throw std::runtime_error("converter failed for " + input.string());
  return text;
}

/// Loads a paper's text, either directly or through the converter.
inline DocumentText load_document(const SourceMeta& meta, const std::string& converter = {}) {
  std::string raw = converter.empty() ? read_file(meta.path) : run_converter(converter, meta.path);
  return make_document(meta, std::move(raw));
}

}  // namespace techscan
