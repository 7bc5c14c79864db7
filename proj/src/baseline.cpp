#include "ethidx/baseline.hpp"

#include <fstream>

#include <fmt/format.h>

#include "ethidx/errors.hpp"
#include "ethidx/text.hpp"

namespace ethidx {

namespace {

KeywordList from_terms(std::initializer_list<std::string_view> terms, KeywordMode mode) {
  KeywordList list;
  list.mode = mode;
  for (auto t : terms) {
    const auto toks = tokenize(t);
    if (toks.size() == 1)
      list.unigrams.insert(toks[0]);
    else if (toks.size() == 2)
      list.bigrams.insert({toks[0], toks[1]});
  }
  return list;
}

}  // namespace

std::string_view to_string(KeywordMode m) { return m == KeywordMode::raw ? "raw" : "lemmatized"; }

KeywordMode keyword_mode_from_string(std::string_view s) {
  if (s == "raw") return KeywordMode::raw;
  if (s == "lemmatized") return KeywordMode::lemmatized;
  throw ParseError(fmt::format("unknown keyword mode '{}'", s));
}

KeywordList KeywordList::builtin_raw() {
  return from_terms({"accountability", "accountable", "employment", "ethic", "ethical", "ethics", "fool", "fooled",
                     "fooling", "humane", "humanity", "law", "machine bias", "moral", "morality", "privacy", "racism",
                     "racist", "responsibility", "rights", "secure", "security", "sentience", "sentient", "society",
                     "sustainability", "unemployment", "workforce"},
                    KeywordMode::raw);
}

KeywordList KeywordList::builtin_lemmatized() {
  return from_terms({"accountability", "accountable", "employment", "ethic", "ethical", "fool", "humane", "humanity",
                     "law", "machine bias", "moral", "morality", "privacy", "racism", "racist", "responsibility",
                     "right", "secure", "security", "sentience", "sentient", "society", "sustainability",
                     "unemployment", "workforce"},
                    KeywordMode::lemmatized);
}

KeywordList KeywordList::builtin(KeywordMode mode) {
  return mode == KeywordMode::raw ? builtin_raw() : builtin_lemmatized();
}

KeywordList KeywordList::load(const std::string& path, KeywordMode mode) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  KeywordList list;
  list.mode = mode;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    auto toks = tokenize(line);
    if (mode == KeywordMode::lemmatized)
      for (auto& t : toks) t = lemmatize(t);
    if (toks.size() == 1)
      list.unigrams.insert(toks[0]);
    else if (toks.size() == 2)
      list.bigrams.insert({toks[0], toks[1]});
    else
      throw ParseError(fmt::format("keyword entry '{}' must be one or two words", line), lineno);
  }
  return list;
}

Label keyword_classify(std::string_view text, const KeywordList& list) {
  auto toks = tokenize(text);
  if (list.mode == KeywordMode::lemmatized)
    for (auto& t : toks) t = lemmatize(t);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (list.unigrams.count(toks[i])) return Label::ethics;
    if (i + 1 < toks.size() && list.bigrams.count({toks[i], toks[i + 1]})) return Label::ethics;
  }
  return Label::not_ethics;
}

}  // namespace ethidx
