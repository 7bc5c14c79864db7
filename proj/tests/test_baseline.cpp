#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "ethidx/baseline.hpp"
#include "ethidx/errors.hpp"
#include "ethidx/text.hpp"

using namespace ethidx;

TEST_CASE("builtin lists have the published sizes") {
  const auto raw = KeywordList::builtin_raw();
  CHECK(raw.unigrams.size() == 27);
  CHECK(raw.bigrams.size() == 1);
  CHECK(raw.bigrams.count({"machine", "bias"}) == 1);
  const auto lem = KeywordList::builtin_lemmatized();
  CHECK(lem.unigrams.size() == 24);
  CHECK(lem.bigrams.size() == 1);
}

TEST_CASE("lemmatizing the raw list gives the lemma list") {
  std::set<std::string> lemmas;
  for (const auto& w : KeywordList::builtin_raw().unigrams) lemmas.insert(lemmatize(w));
  CHECK(lemmas == KeywordList::builtin_lemmatized().unigrams);
}

TEST_CASE("keyword_classify worked examples") {
  const auto raw = KeywordList::builtin_raw();
  CHECK(keyword_classify("Privacy-preserving federated learning", raw) == Label::ethics);
  CHECK(keyword_classify("A study of Machine Bias in hiring", raw) == Label::ethics);
  CHECK(keyword_classify("machine learning bias", raw) == Label::not_ethics);
  CHECK(keyword_classify("Deep residual networks for image recognition", raw) == Label::not_ethics);
  // Whole-token matching: "lawn" does not contain the token "law".
  CHECK(keyword_classify("lawn mowing robots", raw) == Label::not_ethics);
  CHECK(keyword_classify("", raw) == Label::not_ethics);
}

TEST_CASE("lemmatized mode matches inflected forms") {
  const auto raw = KeywordList::builtin_raw();
  const auto lem = KeywordList::builtin_lemmatized();
  CHECK(keyword_classify("laws of robotics", raw) == Label::not_ethics);
  CHECK(keyword_classify("laws of robotics", lem) == Label::ethics);
  CHECK(keyword_classify("fooling classifiers", lem) == Label::ethics);
  CHECK(keyword_classify("ethics boards", lem) == Label::ethics);
}

TEST_CASE("adding a keyword never removes a positive (property)") {
  const std::vector<std::string> texts{"privacy of graph data", "graph neural networks", "security of cars",
                                       "robot planning", "learning fairness constraints"};
  auto list = KeywordList::builtin_raw();
  std::vector<Label> before;
  for (const auto& t : texts) before.push_back(keyword_classify(t, list));
  list.unigrams.insert("graph");
  for (std::size_t i = 0; i < texts.size(); ++i)
    if (before[i] == Label::ethics) CHECK(keyword_classify(texts[i], list) == Label::ethics);
}

TEST_CASE("keyword files") {
  const std::string path = "test_baseline_keywords.txt";
  {
    std::ofstream f(path);
    f << "# custom list\nfairness\n\nMachine Bias\nLaws\n";
  }
  const auto raw = KeywordList::load(path, KeywordMode::raw);
  CHECK(raw.unigrams == std::set<std::string>{"fairness", "laws"});
  CHECK(raw.bigrams.count({"machine", "bias"}) == 1);
  const auto lem = KeywordList::load(path, KeywordMode::lemmatized);
  CHECK(lem.unigrams.count("law") == 1);
  {
    std::ofstream f(path);
    f << "one two three\n";
  }
  CHECK_THROWS_AS(KeywordList::load(path, KeywordMode::raw), ParseError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(KeywordList::load("does/not/exist.txt", KeywordMode::raw), IoError);
}

TEST_CASE("keyword mode strings") {
  CHECK(keyword_mode_from_string("raw") == KeywordMode::raw);
  CHECK(keyword_mode_from_string(to_string(KeywordMode::lemmatized)) == KeywordMode::lemmatized);
  CHECK_THROWS_AS(keyword_mode_from_string("stemmed"), ParseError);
}

TEST_CASE("titles discussed for the keyword index") {
  const auto raw = KeywordList::builtin_raw();
  CHECK(keyword_classify("Efficient Methods for Privacy Preserving Face Detection.", raw) == Label::ethics);
  CHECK(keyword_classify("Secure program partitioning.", raw) == Label::ethics);
  CHECK(keyword_classify(
            "Artificial Intelligence-Based Computer Modeling Tools for Controlling Slag Foaming in Electric Furnaces",
            raw) == Label::not_ethics);
  CHECK(keyword_classify("On machine bias in hiring", raw) == Label::ethics);
  CHECK(keyword_classify("Machine-bias audits", raw) == Label::ethics);
}
