#pragma once

// Tabular output as CSV or JSON lines.
//
// Both formats are byte-deterministic: columns keep the declared order, reals
// are printed with 17 significant digits, lines end with LF. Missing values
// are empty CSV fields and JSON nulls; non-finite reals are written as
// nan / inf / -inf in CSV and as null in JSON.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "distunlearn/io.hpp"

namespace distunlearn {

using Cell = std::variant<std::monostate, std::string, double, std::int64_t, bool>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row) {
    if (row.size() != columns.size()) {
      throw std::invalid_argument("table: row has " + std::to_string(row.size()) + " cells, expected " +
                                  std::to_string(columns.size()));
    }
    rows.push_back(std::move(row));
  }
};

enum class OutputFormat { Csv, JsonLines };

inline OutputFormat parse_format(std::string_view s) {
  if (s == "csv") return OutputFormat::Csv;
  if (s == "jsonl" || s == "json-lines" || s == "jsonlines") return OutputFormat::JsonLines;
  throw std::invalid_argument("unknown output format '" + std::string(s) + "' (csv or jsonl)");
}

inline std::string cell_text(const Cell& c) {
  struct V {
    std::string operator()(std::monostate) const { return ""; }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(double d) const { return format_double(d); }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
  };
  return std::visit(V{}, c);
}

inline std::string json_string(std::string_view s) {
  std::string out = "\"";
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          static constexpr char hex[] = "0123456789abcdef";
          out += "\\u00";
          out.push_back(hex[c >> 4]);
          out.push_back(hex[c & 15]);
        } else {
          out.push_back(ch);
        }
    }
  }
  out.push_back('"');
  return out;
}

inline std::string cell_json(const Cell& c) {
  if (std::holds_alternative<std::monostate>(c)) return "null";
  if (const auto* s = std::get_if<std::string>(&c)) return json_string(*s);
  if (const auto* d = std::get_if<double>(&c)) return std::isfinite(*d) ? format_double(*d) : "null";
  return cell_text(c);
}

inline std::string to_csv(const Table& t) {
  std::string out = csv_line(t.columns);
  std::vector<std::string> fields;
  for (const auto& row : t.rows) {
    fields.clear();
    for (const auto& c : row) fields.push_back(cell_text(c));
    out += csv_line(fields);
  }
  return out;
}

inline std::string to_jsonl(const Table& t) {
  std::string out;
  for (const auto& row : t.rows) {
    out.push_back('{');
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out.push_back(',');
      out += json_string(t.columns[j]);
      out.push_back(':');
      out += cell_json(row[j]);
    }
    out += "}\n";
  }
  return out;
}

inline std::string render(const Table& t, OutputFormat format) {
  return format == OutputFormat::Csv ? to_csv(t) : to_jsonl(t);
}

/// Writes the table to `path`, or to stdout when path is "-" or empty.
inline void emit(const Table& t, OutputFormat format, const std::string& path) {
  const auto text = render(t, format);
  if (path.empty() || path == "-") {
    std::cout << text << std::flush;
    return;
  }
  write_text_file(path, text);
}

}  // namespace distunlearn
