#pragma once

// Keyword-list classifier used by the earlier keyword-based ethics index.

#include <set>
#include <string>
#include <string_view>
#include <utility>

#include "ethidx/corpus.hpp"

namespace ethidx {

enum class KeywordMode : std::uint8_t { raw, lemmatized };

std::string_view to_string(KeywordMode m);
KeywordMode keyword_mode_from_string(std::string_view s);

struct KeywordList {
  std::set<std::string> unigrams;
  std::set<std::pair<std::string, std::string>> bigrams;
  KeywordMode mode = KeywordMode::raw;

  // The original surface-form list: 27 words plus "machine bias".
  static KeywordList builtin_raw();
  // The same list reduced to lemmas: 24 words plus "machine bias".
  static KeywordList builtin_lemmatized();
  static KeywordList builtin(KeywordMode mode);

  // One term per line; a line with two words is a bigram. Blank lines and
  // lines starting with '#' are skipped.
  static KeywordList load(const std::string& path, KeywordMode mode);

  std::size_t size() const { return unigrams.size() + bigrams.size(); }
};

// Ethics iff a token equals a unigram or two adjacent tokens equal a bigram.
// Lemmatized lists compare against lemmatized tokens.
Label keyword_classify(std::string_view text, const KeywordList& list);

}  // namespace ethidx
