#pragma once

// A synthetic two-cluster text corpus shaped like an SMS spam collection.
//
// Label 0 ("ham", the class to preserve) mixes everyday words with
// conversational vocabulary. Label 1 ("spam", the class to forget) is a
// mixture of two kinds of message:
//   * typical: dominated by promotional words, far from ham;
//   * subtle: conversational text carrying a few weak marker words.
// Deleting the typical spam first leaves only the subtle kind behind, which
// is what lets a scoring rule outpace random deletion on this corpus.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "distunlearn/io.hpp"
#include "distunlearn/rng.hpp"

namespace distunlearn {

struct SyntheticCorpusConfig {
  std::size_t n_ham = 2000;
  std::size_t n_spam = 400;
  double subtle_fraction = 0.35;
  std::size_t min_tokens = 6;
  std::size_t max_tokens = 18;
  std::uint64_t seed = 20240501;
};

namespace detail {

inline constexpr std::array<std::string_view, 40> kCommonWords = {
    "call", "text", "now", "today", "get", "got", "know", "time", "day", "ok",
    "good", "see", "home", "back", "send", "phone", "number", "week", "going", "tell",
    "later", "one", "want", "need", "like", "come", "well", "still", "reply", "message",
    "love", "meet", "night", "tomorrow", "work", "sorry", "great", "lol", "yeah", "sure"};

inline constexpr std::array<std::string_view, 40> kHamWords = {
    "dinner", "lunch", "mom", "class", "movie", "sleep", "bus", "pick", "office", "coffee",
    "gonna", "wait", "miss", "fine", "party", "watch", "friend", "house", "room", "late",
    "soon", "cool", "thanks", "happy", "birthday", "exam", "car", "food", "leave", "school",
    "weekend", "hungry", "tired", "play", "walk", "shop", "cook", "dad", "brother", "sister"};

inline constexpr std::array<std::string_view, 30> kPromoWords = {
    "free", "win", "won", "prize", "cash", "claim", "urgent", "award", "guaranteed", "winner",
    "offer", "bonus", "voucher", "entry", "draw", "selected", "txt", "mobile", "rate", "pounds",
    "ringtone", "subscription", "unsubscribe", "landline", "delivery", "customer", "service",
    "tone", "chat", "pobox"};

inline constexpr std::array<std::string_view, 15> kMarkerWords = {
    "www", "com", "uk", "150p", "18", "cost", "per", "min", "stop", "apply",
    "mins", "nokia", "camera", "latest", "contact"};

inline std::string_view pick(Rng& rng, std::span<const std::string_view> words) {
  return words[rng.uniform_index(words.size())];
}

}  // namespace detail

/// Ham rows first, then spam; ids "syn00000", "syn00001", ...
inline TextCorpus synthetic_two_cluster_corpus(const SyntheticCorpusConfig& cfg = {}) {
  using namespace detail;
  if (cfg.min_tokens < 1 || cfg.max_tokens < cfg.min_tokens) {
    throw std::invalid_argument("synthetic corpus: need 1 <= min_tokens <= max_tokens");
  }
  Rng rng(derive_seed(cfg.seed, "synthetic-corpus"));
  TextCorpus c;
  // (common, ham, promo) cut points on a uniform draw; the rest are markers
  auto message = [&](double p_common, double p_ham, double p_promo) {
    const std::size_t len = cfg.min_tokens + rng.uniform_index(cfg.max_tokens - cfg.min_tokens + 1);
    std::string text;
    for (std::size_t t = 0; t < len; ++t) {
      const double u = rng.uniform01();
      std::string_view w = u < p_common                     ? pick(rng, kCommonWords)
                           : u < p_common + p_ham           ? pick(rng, kHamWords)
                           : u < p_common + p_ham + p_promo ? pick(rng, kPromoWords)
                                                            : pick(rng, kMarkerWords);
      if (!text.empty()) text.push_back(' ');
      text += w;
    }
    return text;
  };
  const std::size_t total = cfg.n_ham + cfg.n_spam;
  for (std::size_t i = 0; i < total; ++i) {
    std::string id = std::to_string(i);
    c.ids.push_back("syn" + std::string(id.size() < 5 ? 5 - id.size() : 0, '0') + id);
    if (i < cfg.n_ham) {
      c.labels.push_back(0);
      c.texts.push_back(message(0.45, 0.55, 0.0));
    } else {
      c.labels.push_back(1);
      const bool subtle = rng.uniform01() < cfg.subtle_fraction;
      c.texts.push_back(subtle ? message(0.40, 0.25, 0.0) : message(0.35, 0.0, 0.62));
    }
  }
  return c;
}

}  // namespace distunlearn
