#pragma once

// Minimal RFC 4180 reader/writer.

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace techscan::csv {

using Row = std::vector<std::string>;

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string format_row(const Row& row) {
  std::string line;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) line.push_back(',');
    line += quote(row[i]);
  }
  line += "\r\n";
  return line;
}

inline std::string format(const std::vector<Row>& rows) {
  std::string out;
  for (const auto& r : rows) out += format_row(r);
  return out;
}

/// Parses CSV text. Accepts CRLF or LF line ends; a trailing newline does not
/// produce an empty row. Blank lines are skipped.
inline std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;

  auto end_row = [&] {
    if (field_started || !row.empty()) {
      row.push_back(std::move(field));
      rows.push_back(std::move(row));
    }
    row.clear();
    field.clear();
    field_started = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) throw std::runtime_error("csv line " + std::to_string(line) + ": stray quote");
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        ++line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw std::runtime_error("csv: unterminated quoted field");
  end_row();
  return rows;
}

}  // namespace techscan::csv
