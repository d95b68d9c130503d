#pragma once

// Sectioned key = value configuration files (INI syntax, ';' or '#' comments).
// The recognised sections and keys are listed in kConfigKeys; anything else is
// rejected so that typos do not silently fall back to defaults.
//
// Value syntax:
//   lists      comma separated: "random, lr-cos"
//   integer ranges  "0..19" (inclusive), usable inside lists: "0..4, 10"
//   real grids      "start:stop:step", e.g. "0:1:0.05" (inclusive of stop)
//   booleans   true/false, yes/no, 1/0

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "distunlearn/io.hpp"
#include "distunlearn/sweep.hpp"
#include "distunlearn/synthetic.hpp"
#include "distunlearn/tfidf.hpp"

namespace distunlearn {

inline const std::map<std::string, std::set<std::string>>& config_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"sweep", {"rules", "budgets", "seeds", "master_seed", "metrics", "output", "format", "summary_output",
                 "targets_output"}},
      {"scoring", {"k", "bandwidth", "bandwidth_sample_limit", "ridge_scale"}},
      {"gaussian", {"mu2", "n1", "n2"}},
      {"dataset", {"source", "path", "schema", "p1_labels", "train_fraction", "downsample_ratio", "l2", "max_iter",
                   "tol", "recall_mode", "positive_label", "synthetic_seed"}},
      {"tfidf", {"max_features", "ngram_min", "ngram_max", "sublinear_tf", "min_df", "lowercase", "stopword_removal"}},
      {"frontier", {"mode", "family", "divergence", "mu1", "mu2", "sigma", "q1", "q2", "alphas", "alpha_multipliers",
                    "mu_grid", "output", "format"}},
      {"bounds", {"mode", "mechanisms", "n1", "n2", "delta", "divergence", "f", "f_fractions", "alphas", "epsilons",
                  "output", "format"}},
      {"score", {"rules", "master_seed", "output", "format"}},
  };
  return keys;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    const auto t = trim(cur);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline bool parse_bool(const std::string& s, const std::string& context) {
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw std::invalid_argument(context + ": expected a boolean, got '" + s + "'");
}

/// Integer list with inclusive "a..b" ranges.
inline std::vector<std::uint64_t> parse_int_list(const std::string& s, const std::string& context) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(s)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      const long v = parse_int(item, context);
      if (v < 0) throw std::invalid_argument(context + ": negative value");
      out.push_back(static_cast<std::uint64_t>(v));
      continue;
    }
    const long a = parse_int(item.substr(0, dots), context);
    const long b = parse_int(item.substr(dots + 2), context);
    if (a < 0 || b < a) throw std::invalid_argument(context + ": bad range '" + item + "'");
    for (long v = a; v <= b; ++v) out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

/// Real list; a single "start:stop:step" item expands to an inclusive grid
/// whose points are rounded to 12 decimals (so 0:1:0.05 gives 0.15, not
/// 0.15000000000000002).
inline std::vector<double> parse_real_list(const std::string& s, const std::string& context) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    const auto c1 = item.find(':');
    if (c1 == std::string::npos) {
      out.push_back(parse_double(item, context));
      continue;
    }
    const auto c2 = item.find(':', c1 + 1);
    if (c2 == std::string::npos) throw std::invalid_argument(context + ": grid needs start:stop:step");
    const double start = parse_double(item.substr(0, c1), context);
    const double stop = parse_double(item.substr(c1 + 1, c2 - c1 - 1), context);
    const double step = parse_double(item.substr(c2 + 1), context);
    if (!(step > 0.0) || stop < start) throw std::invalid_argument(context + ": bad grid '" + item + "'");
    const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long k = 0; k <= count; ++k) out.push_back(std::round((start + k * step) * 1e12) / 1e12);
  }
  return out;
}

class Config {
 public:
  Config() = default;

  static Config from_text(const std::string& text, const std::string& source = "config") {
    Config c;
    c.source_ = source;
    std::istringstream in(text);
    try {
      boost::property_tree::ini_parser::read_ini(in, c.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw std::invalid_argument(source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    c.check_keys();
    return c;
  }

  static Config from_file(const std::string& path) { return from_text(read_text_file(path), path); }

  /// Applies "section.key=value" overrides.
  void set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw std::invalid_argument("override '" + assignment + "' must look like section.key=value");
    }
    const std::string section = std::string(trim(assignment.substr(0, dot)));
    const std::string key = std::string(trim(assignment.substr(dot + 1, eq - dot - 1)));
    check_key(section, key);
    tree_.put(boost::property_tree::ptree::path_type(section + "." + key, '.'),
              std::string(trim(assignment.substr(eq + 1))));
  }

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto v = sec->get_optional<std::string>(boost::property_tree::ptree::path_type(key, '\0'));
    if (!v || trim(*v).empty()) return std::nullopt;
    return std::string(trim(*v));
  }

  bool has_section(const std::string& section) const { return tree_.get_child_optional(section).has_value(); }

  std::string str(const std::string& section, const std::string& key, const std::string& fallback) const {
    return get(section, key).value_or(fallback);
  }
  double real(const std::string& section, const std::string& key, double fallback) const {
    const auto v = get(section, key);
    return v ? parse_double(*v, where(section, key)) : fallback;
  }
  long integer(const std::string& section, const std::string& key, long fallback) const {
    const auto v = get(section, key);
    return v ? parse_int(*v, where(section, key)) : fallback;
  }
  bool boolean(const std::string& section, const std::string& key, bool fallback) const {
    const auto v = get(section, key);
    return v ? parse_bool(*v, where(section, key)) : fallback;
  }
  std::string require(const std::string& section, const std::string& key) const {
    const auto v = get(section, key);
    if (!v) throw std::invalid_argument(source_ + ": missing [" + section + "] " + key);
    return *v;
  }
  std::string where(const std::string& section, const std::string& key) const {
    return source_ + " [" + section + "] " + key;
  }

 private:
  void check_key(const std::string& section, const std::string& key) const {
    const auto& keys = config_keys();
    const auto it = keys.find(section);
    if (it == keys.end()) throw std::invalid_argument(source_ + ": unknown section [" + section + "]");
    if (!it->second.count(key)) {
      throw std::invalid_argument(source_ + ": unknown key '" + key + "' in [" + section + "]");
    }
  }
  void check_keys() const {
    for (const auto& [section, child] : tree_) {
      if (child.empty() && !child.data().empty()) {
        throw std::invalid_argument(source_ + ": key '" + section + "' outside any section");
      }
      for (const auto& kv : child) check_key(section, kv.first);
    }
  }

  boost::property_tree::ptree tree_;
  std::string source_ = "config";
};

inline ScoringParams scoring_params_from(const Config& c) {
  ScoringParams p;
  p.k = static_cast<int>(c.integer("scoring", "k", p.k));
  if (const auto bw = c.get("scoring", "bandwidth")) p.bandwidth = parse_double(*bw, c.where("scoring", "bandwidth"));
  p.bandwidth_sample_limit =
      static_cast<std::size_t>(c.integer("scoring", "bandwidth_sample_limit", static_cast<long>(p.bandwidth_sample_limit)));
  p.ridge_scale = c.real("scoring", "ridge_scale", p.ridge_scale);
  return p;
}

/// [sweep] section; budgets default to 0:1:0.05 and seeds to 0..19.
inline SweepConfig sweep_config_from(const Config& c, const std::string& default_rules) {
  SweepConfig s;
  s.rules = split_list(c.str("sweep", "rules", default_rules));
  s.budget_fractions = parse_real_list(c.str("sweep", "budgets", "0:1:0.05"), c.where("sweep", "budgets"));
  s.seeds = parse_int_list(c.str("sweep", "seeds", "0..19"), c.where("sweep", "seeds"));
  s.master_seed = static_cast<std::uint64_t>(c.integer("sweep", "master_seed", 0));
  s.metrics = split_list(c.str("sweep", "metrics", ""));
  s.output = c.str("sweep", "output", "-");
  s.format = parse_format(c.str("sweep", "format", "csv"));
  s.scoring = scoring_params_from(c);
  s.validate();
  return s;
}

inline TfidfConfig tfidf_config_from(const Config& c) {
  TfidfConfig t;
  t.max_features = static_cast<int>(c.integer("tfidf", "max_features", t.max_features));
  t.ngram_min = static_cast<int>(c.integer("tfidf", "ngram_min", t.ngram_min));
  t.ngram_max = static_cast<int>(c.integer("tfidf", "ngram_max", t.ngram_max));
  t.sublinear_tf = c.boolean("tfidf", "sublinear_tf", t.sublinear_tf);
  t.min_df = static_cast<int>(c.integer("tfidf", "min_df", t.min_df));
  t.lowercase = c.boolean("tfidf", "lowercase", t.lowercase);
  t.stopword_removal = c.boolean("tfidf", "stopword_removal", t.stopword_removal);
  t.validate();
  return t;
}

inline PipelineConfig pipeline_config_from(const Config& c) {
  PipelineConfig p;
  p.train_fraction = c.real("dataset", "train_fraction", p.train_fraction);
  p.downsample_ratio = c.real("dataset", "downsample_ratio", p.downsample_ratio);
  const auto l2 = c.str("dataset", "l2", "auto");
  if (l2 != "auto") p.l2_strength = parse_double(l2, c.where("dataset", "l2"));
  p.max_iter = static_cast<int>(c.integer("dataset", "max_iter", p.max_iter));
  p.tol = c.real("dataset", "tol", p.tol);
  const auto mode = c.str("dataset", "recall_mode", "label");
  if (mode == "label") {
    p.eval.recall_mode = RecallMode::Label;
  } else if (mode == "group") {
    p.eval.recall_mode = RecallMode::Group;
  } else {
    throw std::invalid_argument(c.where("dataset", "recall_mode") + ": expected label or group");
  }
  p.eval.positive_label = static_cast<int>(c.integer("dataset", "positive_label", 1));
  return p;
}

using AnyDataset = std::variant<DenseDataset, SparseDataset>;

/// [dataset] source = synthetic | sms | tsv | csv. Text sources are featurized
/// with [tfidf]; p1_labels (default 1) selects the p1 group for text and for
/// CSV files whose schema has no group column.
inline AnyDataset load_dataset_from(const Config& c, std::vector<std::size_t>* zero_rows = nullptr) {
  const auto source = c.str("dataset", "source", "synthetic");
  std::set<int> p1;
  for (auto v : parse_int_list(c.str("dataset", "p1_labels", "1"), c.where("dataset", "p1_labels"))) {
    p1.insert(static_cast<int>(v));
  }
  if (source == "csv") {
    auto schema = load_schema(c.require("dataset", "schema"));
    if (schema.group_col.empty() && schema.p1_labels.empty()) schema.p1_labels = p1;
    return load_features_csv(c.require("dataset", "path"), schema);
  }
  TextCorpus corpus;
  if (source == "synthetic") {
    SyntheticCorpusConfig sc;
    sc.seed = static_cast<std::uint64_t>(c.integer("dataset", "synthetic_seed", static_cast<long>(sc.seed)));
    corpus = synthetic_two_cluster_corpus(sc);
  } else if (source == "sms") {
    corpus = load_sms_collection(c.require("dataset", "path"));
  } else if (source == "tsv") {
    corpus = load_corpus_tsv(c.require("dataset", "path"));
  } else {
    throw std::invalid_argument(c.where("dataset", "source") + ": expected synthetic, sms, tsv or csv");
  }
  return text_dataset(corpus, tfidf_config_from(c), p1, zero_rows);
}

}  // namespace distunlearn
