#pragma once

// Tokenization, rule-based lemmatization and TF-IDF vectorization.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ethidx {

// Lowercased maximal runs of ASCII letters/digits (bytes >= 0x80 count as
// letters so UTF-8 words stay whole); runs shorter than 2 bytes are dropped.
std::vector<std::string> tokenize(std::string_view text);

// Exception dictionary first, then ordered suffix rules until a fixed point,
// so lemmatize(lemmatize(t)) == lemmatize(t).
std::string lemmatize(std::string_view token);

struct TextOptions {
  bool lemmatize = true;
  std::set<std::string> stopwords;  // matched against the final term

  bool operator==(const TextOptions&) const = default;
};

// tokenize -> (lemmatize) -> drop stopwords.
std::vector<std::string> analyze(std::string_view text, const TextOptions& opts);

using FeatureIndex = std::uint32_t;

struct SparseEntry {
  FeatureIndex index;
  double value;

  bool operator==(const SparseEntry&) const = default;
};

// Entries sorted by index, no explicit zeros.
class SparseVector {
 public:
  SparseVector() = default;
  // Sorts, merges duplicate indices by summing, drops zeros.
  static SparseVector from_entries(std::vector<SparseEntry> entries);

  const std::vector<SparseEntry>& entries() const { return entries_; }
  std::size_t nnz() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  double value_at(FeatureIndex i) const;
  double l1_norm() const;
  // One past the largest index, 0 when empty.
  std::size_t dimension_bound() const { return entries_.empty() ? 0 : entries_.back().index + 1; }

  bool operator==(const SparseVector&) const = default;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<SparseEntry> entries_;
};

class Vocabulary {
 public:
  Vocabulary() = default;

  std::size_t size() const { return terms_.size(); }
  std::size_t n_docs() const { return n_docs_; }
  const TextOptions& options() const { return options_; }

  std::optional<FeatureIndex> index_of(std::string_view term) const;
  const std::string& term(FeatureIndex i) const { return terms_.at(i); }
  std::size_t df(FeatureIndex i) const { return df_.at(i); }
  double idf(FeatureIndex i) const { return idf_.at(i); }
  const std::vector<std::string>& terms() const { return terms_; }

  // Raw count * idf for in-vocabulary terms, then scaled to unit L1 norm.
  SparseVector vectorize(std::string_view text) const;

  // Columnar text: "#" metadata lines, then term, index, df, idf.
  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in);

  bool operator==(const Vocabulary& o) const {
    return terms_ == o.terms_ && df_ == o.df_ && idf_ == o.idf_ && n_docs_ == o.n_docs_ &&
           options_ == o.options_;
  }

  friend Vocabulary fit_vocabulary(const std::vector<std::string>& corpus, std::size_t min_df,
                                   const TextOptions& opts);

 private:
  void add_term(std::string term, std::size_t df);
  void rebuild_index();

  std::vector<std::string> terms_;
  std::vector<std::size_t> df_;
  std::vector<double> idf_;
  std::unordered_map<std::string, FeatureIndex> index_;
  std::size_t n_docs_ = 0;
  TextOptions options_;
};

// ln((1 + n_docs) / (1 + df)) + 1
double smoothed_idf(std::size_t n_docs, std::size_t df);

// Terms in first-occurrence order; those with df < min_df are dropped.
// Throws PreconditionError on an empty corpus.
Vocabulary fit_vocabulary(const std::vector<std::string>& corpus, std::size_t min_df = 1,
                          const TextOptions& opts = {});

std::set<std::string> load_word_list(const std::string& path);

}  // namespace ethidx
