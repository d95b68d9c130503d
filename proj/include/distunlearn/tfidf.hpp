#pragma once

// TF-IDF featurization of a text corpus.
//
// Conventions:
//   * tokens: maximal runs of ASCII letters/digits or bytes >= 0x80 (so UTF-8
//     sequences stay inside words); everything else separates. Lowercasing is
//     ASCII only.
//   * stopwords are removed before n-grams are formed; n-grams join tokens
//     with a single space.
//   * vocabulary: terms with document frequency >= min_df, then the
//     max_features with the largest corpus term count (ties broken by the
//     lexicographically smaller term), finally ordered lexicographically.
//   * weight = tf' * idf, tf' = 1 + ln(tf) if sublinear_tf else tf,
//     idf = ln((1 + N) / (1 + df)) + 1, rows scaled to unit l2 norm.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "distunlearn/dataset.hpp"

namespace distunlearn {

struct TfidfConfig {
  int max_features = 40000;
  int ngram_min = 1;
  int ngram_max = 2;
  bool sublinear_tf = true;
  int min_df = 1;
  bool lowercase = true;
  bool stopword_removal = false;

  void validate() const {
    if (ngram_min < 1 || ngram_min > ngram_max || ngram_max > 2) {
      throw std::invalid_argument("TfidfConfig: need 1 <= ngram_min <= ngram_max <= 2");
    }
    if (max_features < 1) throw std::invalid_argument("TfidfConfig: max_features must be >= 1");
    if (min_df < 1) throw std::invalid_argument("TfidfConfig: min_df must be >= 1");
  }
};

/// Built-in English stopword list, version "en-179-v1" (179 entries).
inline constexpr std::string_view kStopwordsVersion = "en-179-v1";
inline constexpr std::array<std::string_view, 179> kStopwords = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've",
    "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself",
    "she", "she's", "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them",
    "their", "theirs", "themselves", "what", "which", "who", "whom", "this", "that", "that'll",
    "these", "those", "am", "is", "are", "was", "were", "be", "been", "being", "have", "has",
    "had", "having", "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or",
    "because", "as", "until", "while", "of", "at", "by", "for", "with", "about", "against",
    "between", "into", "through", "during", "before", "after", "above", "below", "to", "from",
    "up", "down", "in", "out", "on", "off", "over", "under", "again", "further", "then", "once",
    "here", "there", "when", "where", "why", "how", "all", "any", "both", "each", "few", "more",
    "most", "other", "some", "such", "no", "nor", "not", "only", "own", "same", "so", "than",
    "too", "very", "s", "t", "can", "will", "just", "don", "don't", "should", "should've", "now",
    "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't", "didn",
    "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn",
    "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan",
    "shan't", "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't",
    "wouldn", "wouldn't"};

inline bool is_stopword(std::string_view token) {
  static const std::unordered_set<std::string_view> set(kStopwords.begin(), kStopwords.end());
  return set.count(token) > 0;
}

inline std::vector<std::string> tokenize(std::string_view text, bool lowercase = true) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool word = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
    if (word) {
      cur.push_back(lowercase && c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// n-grams of one document for ngram_min..ngram_max, stopwords already applied.
inline std::vector<std::string> document_terms(std::string_view text, const TfidfConfig& config) {
  auto tokens = tokenize(text, config.lowercase);
  if (config.stopword_removal) {
    std::erase_if(tokens, [](const std::string& t) { return is_stopword(t); });
  }
  std::vector<std::string> terms;
  for (int n = config.ngram_min; n <= config.ngram_max; ++n) {
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
      std::string term = tokens[i];
      for (int k = 1; k < n; ++k) {
        term += ' ';
        term += tokens[i + static_cast<std::size_t>(k)];
      }
      terms.push_back(std::move(term));
    }
  }
  return terms;
}

class TfidfVectorizer {
 public:
  explicit TfidfVectorizer(TfidfConfig config = {}) : config_(std::move(config)) { config_.validate(); }

  const TfidfConfig& config() const { return config_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const Eigen::VectorXd& idf() const { return idf_; }

  /// Learns vocabulary and idf. Throws if the corpus is empty or no term survives pruning.
  void fit(const std::vector<std::string>& corpus) {
    if (corpus.empty()) throw std::invalid_argument("tfidf: empty corpus");
    std::unordered_map<std::string, std::pair<long, long>> stats;  // term -> (df, total count)
    for (const auto& doc : corpus) {
      auto terms = document_terms(doc, config_);
      std::sort(terms.begin(), terms.end());
      for (std::size_t i = 0; i < terms.size();) {
        std::size_t j = i;
        while (j < terms.size() && terms[j] == terms[i]) ++j;
        auto& s = stats[terms[i]];
        s.first += 1;
        s.second += static_cast<long>(j - i);
        i = j;
      }
    }
    std::vector<std::pair<std::string, std::pair<long, long>>> kept;
    for (auto& [term, s] : stats) {
      if (s.first >= config_.min_df) kept.emplace_back(term, s);
    }
    if (kept.empty()) {
      throw std::invalid_argument("tfidf: vocabulary empty after min_df = " +
                                  std::to_string(config_.min_df) + " pruning");
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      return a.second.second != b.second.second ? a.second.second > b.second.second : a.first < b.first;
    });
    if (kept.size() > static_cast<std::size_t>(config_.max_features)) {
      kept.resize(static_cast<std::size_t>(config_.max_features));
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    const double n = static_cast<double>(corpus.size());
    vocabulary_.clear();
    index_.clear();
    idf_.resize(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) {
      vocabulary_.push_back(kept[k].first);
      index_.emplace(kept[k].first, static_cast<int>(k));
      idf_(static_cast<Eigen::Index>(k)) =
          std::log((1.0 + n) / (1.0 + static_cast<double>(kept[k].second.first))) + 1.0;
    }
  }

  /// Row-normalized tf-idf matrix; rows with no in-vocabulary term stay zero
  /// and are listed in `zero_rows` when given.
  SparseMatrix transform(const std::vector<std::string>& corpus,
                         std::vector<std::size_t>* zero_rows = nullptr) const {
    if (vocabulary_.empty()) throw std::logic_error("tfidf: transform before fit");
    std::vector<Eigen::Triplet<double>> triplets;
    if (zero_rows) zero_rows->clear();
    for (std::size_t r = 0; r < corpus.size(); ++r) {
      std::map<int, double> counts;
      for (const auto& term : document_terms(corpus[r], config_)) {
        const auto it = index_.find(term);
        if (it != index_.end()) counts[it->second] += 1.0;
      }
      double norm2 = 0.0;
      for (auto& [col, tf] : counts) {
        const double w = (config_.sublinear_tf ? 1.0 + std::log(tf) : tf) * idf_(col);
        tf = w;
        norm2 += w * w;
      }
      if (counts.empty()) {
        if (zero_rows) zero_rows->push_back(r);
        continue;
      }
      const double inv = 1.0 / std::sqrt(norm2);
      for (const auto& [col, w] : counts) {
        triplets.emplace_back(static_cast<int>(r), col, w * inv);
      }
    }
    SparseMatrix out(static_cast<Eigen::Index>(corpus.size()),
                     static_cast<Eigen::Index>(vocabulary_.size()));
    out.setFromTriplets(triplets.begin(), triplets.end());
    out.makeCompressed();
    return out;
  }

 private:
  TfidfConfig config_;
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, int> index_;
  Eigen::VectorXd idf_;
};

struct TfidfResult {
  SparseMatrix matrix;
  std::vector<std::string> vocabulary;
  Eigen::VectorXd idf;
  std::vector<std::size_t> zero_rows;
};

inline TfidfResult tfidf_fit_transform(const std::vector<std::string>& corpus,
                                       const TfidfConfig& config) {
  TfidfVectorizer vec(config);
  vec.fit(corpus);
  TfidfResult out;
  out.matrix = vec.transform(corpus, &out.zero_rows);
  out.vocabulary = vec.vocabulary();
  out.idf = vec.idf();
  return out;
}

}  // namespace distunlearn
