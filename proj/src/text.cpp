#include "ethidx/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "ethidx/errors.hpp"

namespace ethidx {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

// Irregular forms and words the suffix rules would damage. Every value must
// itself be a fixed point of the rules.
const std::unordered_map<std::string_view, std::string_view>& exceptions() {
  static const std::unordered_map<std::string_view, std::string_view> table = {
      {"data", "datum"},          {"ethics", "ethic"},       {"fooled", "fool"},
      {"fooling", "fool"},        {"morality", "morality"},  {"rights", "right"},
      {"media", "medium"},        {"bias", "bias"},          {"biases", "bias"},
      {"use", "use"},             {"used", "use"},           {"uses", "use"},
      {"using", "use"},           {"during", "during"},      {"this", "this"},
      {"thus", "thus"},           {"news", "news"},          {"series", "series"},
      {"species", "species"},     {"does", "do"},            {"criteria", "criterion"},
      {"phenomena", "phenomenon"}, {"children", "child"},    {"women", "woman"},
      {"men", "man"},             {"people", "people"},      {"analyses", "analysis"},
      {"hypotheses", "hypothesis"}, {"was", "was"},          {"has", "has"},
      {"is", "is"},               {"as", "as"},              {"less", "less"},
      {"always", "always"},       {"perhaps", "perhaps"},    {"towards", "towards"},
      {"thing", "thing"},         {"things", "thing"},       {"something", "something"},
      {"nothing", "nothing"},     {"anything", "anything"},  {"everything", "everything"},
      {"morning", "morning"},     {"evening", "evening"},
  };
  return table;
}

bool is_consonant(std::string_view w, std::size_t i) {
  switch (w[i]) {
    case 'a': case 'e': case 'i': case 'o': case 'u': return false;
    case 'y': return i == 0 || !is_consonant(w, i - 1);
    default: return true;
  }
}

bool has_vowel(std::string_view w) {
  for (std::size_t i = 0; i < w.size(); ++i)
    if (!is_consonant(w, i)) return true;
  return false;
}

// Number of vowel-consonant sequences, as in [C](VC)^m[V].
int measure(std::string_view w) {
  int m = 0;
  std::size_t i = 0;
  const std::size_t n = w.size();
  while (i < n && is_consonant(w, i)) ++i;
  while (i < n) {
    while (i < n && !is_consonant(w, i)) ++i;
    if (i >= n) break;
    while (i < n && is_consonant(w, i)) ++i;
    ++m;
  }
  return m;
}

bool ends_cvc(std::string_view w) {
  const std::size_t n = w.size();
  if (n < 3) return false;
  if (!is_consonant(w, n - 3) || is_consonant(w, n - 2) || !is_consonant(w, n - 1)) return false;
  const char last = w[n - 1];
  return last != 'w' && last != 'x' && last != 'y';
}

bool ends_with(std::string_view w, std::string_view suffix) {
  return w.size() >= suffix.size() && w.substr(w.size() - suffix.size()) == suffix;
}

// Repairs a stem after -ed/-ing removal.
std::string restore_stem(std::string stem) {
  if (ends_with(stem, "at") || ends_with(stem, "bl") || ends_with(stem, "iz")) return stem + "e";
  const std::size_t n = stem.size();
  if (n >= 2 && stem[n - 1] == stem[n - 2] && is_consonant(stem, n - 1)) {
    const char c = stem[n - 1];
    if (c == 'l') {
      if (measure(stem) > 1) stem.pop_back();
      return stem;
    }
    if (c != 's' && c != 'z') stem.pop_back();
    return stem;
  }
  if (ends_with(stem, "s")) {
    if (ends_with(stem, "ss") || ends_with(stem, "us") || ends_with(stem, "is") || ends_with(stem, "as"))
      return stem;
    return stem + "e";
  }
  if (measure(stem) == 1 && ends_cvc(stem)) return stem + "e";
  return stem;
}

std::string lemma_step(std::string_view w) {
  if (auto it = exceptions().find(w); it != exceptions().end()) return std::string(it->second);
  if (w.size() <= 3) return std::string(w);

  if (ends_with(w, "sses")) return std::string(w.substr(0, w.size() - 2));
  if (ends_with(w, "ies") || ends_with(w, "ied")) {
    const auto stem = w.substr(0, w.size() - 3);
    return stem.size() >= 2 ? std::string(stem) + "y" : std::string(stem) + "ie";
  }
  if (ends_with(w, "ing")) {
    const auto stem = w.substr(0, w.size() - 3);
    if (stem.size() >= 3 && has_vowel(stem)) return restore_stem(std::string(stem));
    return std::string(w);
  }
  if (ends_with(w, "ed") && !ends_with(w, "eed")) {
    const auto stem = w.substr(0, w.size() - 2);
    if (stem.size() >= 3 && has_vowel(stem)) return restore_stem(std::string(stem));
    return std::string(w);
  }
  if (ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") && !ends_with(w, "is")) {
    const auto stem = w.substr(0, w.size() - 1);
    if (stem.size() >= 3) return std::string(stem);
  }
  return std::string(w);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i - start >= 2) {
      std::string tok(text.substr(start, i - start));
      for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      tokens.push_back(std::move(tok));
    }
  }
  return tokens;
}

std::string lemmatize(std::string_view token) {
  std::string current(token);
  // Each step either shortens the word or lands on an exception value,
  // which is itself a fixed point.
  for (;;) {
    std::string next = lemma_step(current);
    if (next == current) return current;
    current = std::move(next);
  }
}

std::vector<std::string> analyze(std::string_view text, const TextOptions& opts) {
  auto tokens = tokenize(text);
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (auto& t : tokens) {
    std::string term = opts.lemmatize ? lemmatize(t) : std::move(t);
    if (!opts.stopwords.empty() && opts.stopwords.count(term)) continue;
    out.push_back(std::move(term));
  }
  return out;
}

SparseVector SparseVector::from_entries(std::vector<SparseEntry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; });
  SparseVector v;
  for (const auto& e : entries) {
    if (!v.entries_.empty() && v.entries_.back().index == e.index)
      v.entries_.back().value += e.value;
    else
      v.entries_.push_back(e);
  }
  std::erase_if(v.entries_, [](const SparseEntry& e) { return e.value == 0.0; });
  return v;
}

double SparseVector::value_at(FeatureIndex i) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), i,
                             [](const SparseEntry& e, FeatureIndex idx) { return e.index < idx; });
  return it != entries_.end() && it->index == i ? it->value : 0.0;
}

double SparseVector::l1_norm() const {
  double s = 0.0;
  for (const auto& e : entries_) s += std::abs(e.value);
  return s;
}

double smoothed_idf(std::size_t n_docs, std::size_t df) {
  return std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(df))) + 1.0;
}

std::optional<FeatureIndex> Vocabulary::index_of(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Vocabulary::add_term(std::string term, std::size_t df) {
  terms_.push_back(std::move(term));
  df_.push_back(df);
  idf_.push_back(smoothed_idf(n_docs_, df));
}

void Vocabulary::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < terms_.size(); ++i) index_.emplace(terms_[i], static_cast<FeatureIndex>(i));
}

SparseVector Vocabulary::vectorize(std::string_view text) const {
  std::vector<SparseEntry> counts;
  for (const auto& term : analyze(text, options_)) {
    if (auto idx = index_of(term)) counts.push_back({*idx, 1.0});
  }
  auto v = SparseVector::from_entries(std::move(counts));
  std::vector<SparseEntry> weighted;
  weighted.reserve(v.nnz());
  double total = 0.0;
  for (const auto& e : v) {
    const double w = e.value * idf_[e.index];
    weighted.push_back({e.index, w});
    total += w;
  }
  if (total > 0.0)
    for (auto& e : weighted) e.value /= total;
  return SparseVector::from_entries(std::move(weighted));
}

Vocabulary fit_vocabulary(const std::vector<std::string>& corpus, std::size_t min_df,
                          const TextOptions& opts) {
  if (corpus.empty()) throw PreconditionError("cannot fit a vocabulary on an empty corpus");
  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : corpus) {
    auto terms = analyze(doc, opts);
    std::unordered_map<std::string, bool> seen;
    for (auto& t : terms) {
      if (!seen.emplace(t, true).second) continue;
      auto [it, inserted] = df.emplace(t, 0);
      if (inserted) order.push_back(t);
      ++it->second;
    }
  }
  Vocabulary v;
  v.n_docs_ = corpus.size();
  v.options_ = opts;
  for (auto& t : order) {
    const std::size_t d = df.at(t);
    if (d >= min_df) v.add_term(std::move(t), d);
  }
  v.rebuild_index();
  return v;
}

void Vocabulary::save(std::ostream& out) const {
  out << "#ethidx-vocabulary 1\n";
  out << "#n_docs " << n_docs_ << '\n';
  out << "#lemmatize " << (options_.lemmatize ? 1 : 0) << '\n';
  out << "#stopwords";
  for (const auto& s : options_.stopwords) out << ' ' << s;
  out << '\n';
  out << "term\tindex\tdf\tidf\n";
  for (std::size_t i = 0; i < terms_.size(); ++i)
    out << fmt::format("{}\t{}\t{}\t{:.17g}\n", terms_[i], i, df_[i], idf_[i]);
}

Vocabulary Vocabulary::load(std::istream& in) {
  Vocabulary v;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  bool magic = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) break;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string key;
      ss >> key;
      if (key == "ethidx-vocabulary") {
        magic = true;
      } else if (key == "n_docs") {
        ss >> v.n_docs_;
      } else if (key == "lemmatize") {
        int flag = 1;
        ss >> flag;
        v.options_.lemmatize = flag != 0;
      } else if (key == "stopwords") {
        for (std::string w; ss >> w;) v.options_.stopwords.insert(w);
      }
      continue;
    }
    if (!header) {
      if (line != "term\tindex\tdf\tidf") throw ParseError("expected vocabulary column header", lineno);
      header = true;
      continue;
    }
    std::istringstream ss(line);
    std::string term;
    std::size_t index = 0, df = 0;
    double idf = 0.0;
    if (!std::getline(ss, term, '\t') || !(ss >> index >> df >> idf))
      throw ParseError("malformed vocabulary row", lineno);
    if (index != v.terms_.size()) throw ParseError("vocabulary indices must be contiguous", lineno);
    if (df < 1 || !(idf > 0.0)) throw ParseError("vocabulary row has invalid df/idf", lineno);
    v.terms_.push_back(term);
    v.df_.push_back(df);
    v.idf_.push_back(idf);
  }
  if (!magic || !header) throw ParseError("not a vocabulary file");
  v.rebuild_index();
  return v;
}

std::set<std::string> load_word_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  std::set<std::string> words;
  for (std::string line; std::getline(in, line);) {
    auto toks = tokenize(line);
    for (auto& t : toks) words.insert(std::move(t));
  }
  return words;
}

}  // namespace ethidx
