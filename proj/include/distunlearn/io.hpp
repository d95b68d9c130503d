#pragma once

// File formats.
//
// Feature CSV: a header row, comma separated, RFC 4180 quoting. Column roles
// come from a sidecar schema of key = value lines:
//   label_col   = <name>          required
//   group_col   = <name>          cells "p1" / "p2" (case-insensitive)
//   p1_labels   = 1,3             alternative to group_col: label -> p1, others p2
//   id_col      = <name>          optional; row ids default to the 0-based data row
//   num_classes = <int>           optional; default max label + 1 (at least 2)
// Every column not named above is a feature. Numbers use '.' as decimal
// separator regardless of locale.
//
// Text corpus TSV: id <TAB> label <TAB> text, one document per line, with
// backslash escapes \t \n \r \\ inside the text. An optional first line
// "id<TAB>label<TAB>text" is a header.
//
// Raw SMS collection: "<ham|spam><TAB><message>" per line; spam -> label 1.
//
// Output floats use the shortest-round-trip-safe 17 significant digits and
// LF line endings.

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "distunlearn/dataset.hpp"

namespace distunlearn {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Locale-independent parse of the whole field; throws naming `context`.
inline double parse_double(std::string_view s, const std::string& context) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument(context + ": not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline long parse_int(std::string_view s, const std::string& context) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument(context + ": not an integer: '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw std::invalid_argument("csv: unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += csv_field(fields[i]);
  }
  out.push_back('\n');
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    const auto stop = end == std::string_view::npos ? text.size() : end;
    auto line = text.substr(start, stop - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = stop + 1;
  }
  return lines;
}

/// key = value lines; '#' and ';' start comments.
inline std::map<std::string, std::string> parse_key_values(std::string_view text,
                                                          const std::string& source) {
  std::map<std::string, std::string> out;
  int lineno = 0;
  for (auto line : split_lines(text)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": expected key = value");
    }
    out[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

struct ColumnSchema {
  std::string label_col;
  std::string group_col;
  std::string id_col;
  std::set<int> p1_labels;
  std::optional<int> num_classes;

  static ColumnSchema from_key_values(const std::map<std::string, std::string>& kv,
                                      const std::string& source = "schema") {
    ColumnSchema s;
    for (const auto& [key, value] : kv) {
      if (key == "label_col") {
        s.label_col = value;
      } else if (key == "group_col") {
        s.group_col = value;
      } else if (key == "id_col") {
        s.id_col = value;
      } else if (key == "num_classes") {
        s.num_classes = static_cast<int>(parse_int(value, source + " num_classes"));
      } else if (key == "p1_labels") {
        std::string_view rest = value;
        while (!rest.empty()) {
          const auto comma = rest.find(',');
          const auto item = rest.substr(0, comma);
          if (!trim(item).empty()) s.p1_labels.insert(static_cast<int>(parse_int(item, source + " p1_labels")));
          if (comma == std::string_view::npos) break;
          rest.remove_prefix(comma + 1);
        }
      } else {
        throw std::invalid_argument(source + ": unknown key '" + key + "'");
      }
    }
    if (s.label_col.empty()) throw std::invalid_argument(source + ": label_col is required");
    if (s.group_col.empty() && s.p1_labels.empty()) {
      throw std::invalid_argument(source + ": need group_col or p1_labels");
    }
    return s;
  }
};

inline ColumnSchema load_schema(const std::string& path) {
  return ColumnSchema::from_key_values(parse_key_values(read_text_file(path), path), path);
}

inline Group parse_group(std::string_view cell, const std::string& row_id) {
  std::string s(trim(cell));
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "p1") return Group::P1;
  if (s == "p2") return Group::P2;
  throw std::invalid_argument("row " + row_id + ": unknown group tag '" + std::string(cell) + "'");
}

inline std::vector<Group> groups_from_labels(const std::vector<int>& labels, const std::set<int>& p1_labels) {
  std::vector<Group> out;
  out.reserve(labels.size());
  for (int y : labels) out.push_back(p1_labels.count(y) ? Group::P1 : Group::P2);
  return out;
}

inline int infer_num_classes(const std::vector<int>& labels, std::optional<int> declared) {
  if (declared) return *declared;
  int mx = 0;
  for (int y : labels) mx = std::max(mx, y);
  return std::max(2, mx + 1);
}

/// Parses feature CSV text; `source` names it in error messages.
inline DenseDataset parse_features_csv(std::string_view text, const ColumnSchema& schema,
                                       const std::string& source = "csv",
                                       std::vector<std::string>* feature_names = nullptr) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw std::invalid_argument(source + ": missing header row");
  const auto header = split_csv_line(lines[0]);
  auto column = [&](const std::string& name, bool required) -> std::ptrdiff_t {
    if (name.empty()) return -1;
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required) throw std::invalid_argument(source + ": missing column '" + name + "'");
      return -1;
    }
    return it - header.begin();
  };
  const auto label_idx = column(schema.label_col, true);
  const auto group_idx = column(schema.group_col, true);
  const auto id_idx = column(schema.id_col, true);
  std::vector<std::size_t> feature_cols;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const auto sj = static_cast<std::ptrdiff_t>(j);
    if (sj != label_idx && sj != group_idx && sj != id_idx) feature_cols.push_back(j);
  }
  if (feature_names) {
    feature_names->clear();
    for (auto j : feature_cols) feature_names->push_back(header[j]);
  }

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) {
      if (i + 1 == lines.size()) break;
      throw std::invalid_argument(source + ": empty line " + std::to_string(i + 1));
    }
    rows.push_back(split_csv_line(lines[i]));
    if (rows.back().size() != header.size()) {
      throw std::invalid_argument(source + ": line " + std::to_string(i + 1) + " has " +
                                  std::to_string(rows.back().size()) + " fields, header has " +
                                  std::to_string(header.size()));
    }
  }
  if (rows.empty()) throw std::invalid_argument(source + ": no data rows");

  DenseDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feature_cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    ds.row_ids.push_back(id_idx >= 0 ? r[static_cast<std::size_t>(id_idx)] : std::to_string(i));
    const auto& id = ds.row_ids.back();
    const long y = parse_int(r[static_cast<std::size_t>(label_idx)], source + " row " + id + " label");
    if (y < 0) throw std::invalid_argument(source + " row " + id + ": negative label");
    ds.labels.push_back(static_cast<int>(y));
    if (group_idx >= 0) ds.groups.push_back(parse_group(r[static_cast<std::size_t>(group_idx)], id));
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          parse_double(r[feature_cols[k]], source + " row " + id + " column '" + header[feature_cols[k]] + "'");
    }
  }
  if (group_idx < 0) ds.groups = groups_from_labels(ds.labels, schema.p1_labels);
  ds.num_classes = infer_num_classes(ds.labels, schema.num_classes);
  ds.validate();
  return ds;
}

inline DenseDataset load_features_csv(const std::string& path, const ColumnSchema& schema,
                                      std::vector<std::string>* feature_names = nullptr) {
  return parse_features_csv(read_text_file(path), schema, path, feature_names);
}

/// Writes id, label, group, then features f0..f{d-1} (or the given names).
inline std::string features_csv(const DenseDataset& ds, const std::vector<std::string>& feature_names = {}) {
  std::vector<std::string> header = {"id", "label", "group"};
  for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
    header.push_back(feature_names.empty() ? "f" + std::to_string(j) : feature_names[static_cast<std::size_t>(j)]);
  }
  std::string out = csv_line(header);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::vector<std::string> row = {ds.row_ids[i], std::to_string(ds.labels[i]), to_string(ds.groups[i])};
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
      row.push_back(format_double(ds.features(static_cast<Eigen::Index>(i), j)));
    }
    out += csv_line(row);
  }
  return out;
}

/// Schema matching features_csv output.
inline ColumnSchema features_csv_schema() {
  ColumnSchema s;
  s.label_col = "label";
  s.group_col = "group";
  s.id_col = "id";
  return s;
}

struct TextCorpus {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<std::string> texts;

  std::size_t size() const { return texts.size(); }
};

inline std::string unescape_tsv(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char n = s[++i];
      out.push_back(n == 't' ? '\t' : n == 'n' ? '\n' : n == 'r' ? '\r' : n);
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

inline std::string escape_tsv(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline TextCorpus parse_corpus_tsv(std::string_view text, const std::string& source = "tsv") {
  TextCorpus c;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = lines[i];
    if (line.empty()) {
      if (i + 1 == lines.size()) break;
      throw std::invalid_argument(source + ": empty line " + std::to_string(i + 1));
    }
    if (i == 0 && line == "id\tlabel\ttext") continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos) {
      throw std::invalid_argument(source + ": line " + std::to_string(i + 1) + " needs exactly 3 tab-separated fields");
    }
    c.ids.emplace_back(line.substr(0, t1));
    const long y = parse_int(line.substr(t1 + 1, t2 - t1 - 1), source + " row " + c.ids.back() + " label");
    if (y < 0) throw std::invalid_argument(source + " row " + c.ids.back() + ": negative label");
    c.labels.push_back(static_cast<int>(y));
    c.texts.push_back(unescape_tsv(line.substr(t2 + 1)));
  }
  if (c.size() == 0) throw std::invalid_argument(source + ": no documents");
  return c;
}

inline TextCorpus load_corpus_tsv(const std::string& path) {
  return parse_corpus_tsv(read_text_file(path), path);
}

inline std::string corpus_tsv(const TextCorpus& c) {
  std::string out = "id\tlabel\ttext\n";
  for (std::size_t i = 0; i < c.size(); ++i) {
    out += escape_tsv(c.ids[i]) + '\t' + std::to_string(c.labels[i]) + '\t' + escape_tsv(c.texts[i]) + '\n';
  }
  return out;
}

/// The UCI SMS Spam Collection file: ham -> 0, spam -> 1, ids "sms<line>".
inline TextCorpus parse_sms_collection(std::string_view text, const std::string& source = "sms") {
  TextCorpus c;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = lines[i];
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const auto tag = tab == std::string_view::npos ? line : line.substr(0, tab);
    if (tag != "ham" && tag != "spam") {
      throw std::invalid_argument(source + ": line " + std::to_string(i + 1) + ": expected ham or spam tag");
    }
    c.ids.push_back("sms" + std::to_string(i + 1));
    c.labels.push_back(tag == "spam" ? 1 : 0);
    c.texts.emplace_back(tab == std::string_view::npos ? std::string_view{} : line.substr(tab + 1));
  }
  if (c.size() == 0) throw std::invalid_argument(source + ": no messages");
  return c;
}

inline TextCorpus load_sms_collection(const std::string& path) {
  return parse_sms_collection(read_text_file(path), path);
}

}  // namespace distunlearn
