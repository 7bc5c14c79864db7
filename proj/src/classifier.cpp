#include "ethidx/classifier.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "ethidx/errors.hpp"

namespace ethidx {

namespace {

constexpr std::string_view kMagic = "#ethidx-classifier 1";

// Stream 0 feeds oversampling so it never collides with per-fold seeds.
constexpr std::uint64_t kOversampleStream = 0x5eed0001;

}  // namespace

std::string_view to_string(ModelKind k) { return k == ModelKind::logistic ? "logistic" : "forest"; }

ModelKind model_kind_from_string(std::string_view s) {
  if (s == "logistic") return ModelKind::logistic;
  if (s == "forest") return ModelKind::forest;
  throw ParseError(fmt::format("unknown model kind '{}'", s));
}

std::vector<TrainingRow> training_rows(std::span<const TrainingDoc> docs) {
  std::vector<TrainingRow> rows;
  rows.reserve(2 * docs.size());
  for (const auto& d : docs) {
    if (!d.abstract.empty()) rows.push_back({d.title + " " + d.abstract, d.label});
    rows.push_back({d.title, d.label});
  }
  return rows;
}

std::vector<TrainingDoc> human_training_docs(const Dataset& ds) {
  std::vector<TrainingDoc> out;
  for (const auto& ex : ds)
    if (ex.provenance == Provenance::human && ex.label) out.push_back({ex.doc.title, ex.doc.abstract, *ex.label});
  return out;
}

TextClassifier::TextClassifier(Vocabulary vocab, std::variant<LogisticModel, ForestModel> model)
    : vocab_(std::move(vocab)), model_(std::move(model)) {}

double TextClassifier::predict_text(std::string_view text) const {
  const auto x = vocab_.vectorize(text);
  return std::visit([&](const auto& m) { return predict_proba(m, x); }, model_);
}

void TextClassifier::save(std::ostream& out) const {
  out << kMagic << '\n' << "kind " << to_string(kind()) << "\n\n";
  vocab_.save(out);
  out << '\n';
  if (kind() == ModelKind::logistic)
    save_logistic(out, logistic(), vocab_);
  else
    save_forest(out, forest());
  if (!out) throw IoError("error while writing model");
}

void TextClassifier::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path));
  save(out);
}

TextClassifier TextClassifier::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw ParseError("not a classifier file", 1);
  if (!std::getline(in, line) || line.rfind("kind ", 0) != 0) throw ParseError("missing model kind", 2);
  const auto kind = model_kind_from_string(line.substr(5));
  if (!std::getline(in, line) || !line.empty()) throw ParseError("expected blank line after header", 3);
  auto vocab = Vocabulary::load(in);
  if (kind == ModelKind::logistic) {
    auto m = load_logistic(in);
    if (m.weights.size() != vocab.size()) throw ValidationError("logistic model and vocabulary dimensions differ");
    return {std::move(vocab), std::move(m)};
  }
  auto f = load_forest(in);
  if (f.n_features != vocab.size()) throw ValidationError("forest and vocabulary dimensions differ");
  return {std::move(vocab), std::move(f)};
}

TextClassifier TextClassifier::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  return load(in);
}

TextClassifier fit_classifier_on(std::span<const TrainingDoc> docs, std::span<const std::size_t> indices,
                                 const ClassifierConfig& cfg, std::uint64_t seed) {
  if (indices.empty()) throw PreconditionError("cannot fit a classifier on zero documents");
  std::vector<TrainingDoc> distinct;
  std::set<std::size_t> seen;
  std::vector<TrainingDoc> picked;
  picked.reserve(indices.size());
  for (auto i : indices) {
    if (i >= docs.size()) throw PreconditionError("training index out of range");
    picked.push_back(docs[i]);
    if (seen.insert(i).second) distinct.push_back(docs[i]);
  }

  std::vector<std::string> corpus;
  for (auto& r : training_rows(distinct)) corpus.push_back(std::move(r.text));
  auto vocab = fit_vocabulary(corpus, cfg.min_df, cfg.text);

  const auto rows = training_rows(picked);
  std::vector<SparseVector> X;
  std::vector<Label> y;
  X.reserve(rows.size());
  y.reserve(rows.size());
  for (const auto& r : rows) {
    X.push_back(vocab.vectorize(r.text));
    y.push_back(r.label);
  }

  if (cfg.kind == ModelKind::logistic) {
    auto tc = cfg.logistic;
    tc.seed = seed;
    auto m = train_logistic_l1(X, y, tc, vocab.size());
    return {std::move(vocab), std::move(m)};
  }
  auto fc = cfg.forest;
  fc.seed = seed;
  auto m = train_forest(X, y, fc, vocab.size());
  return {std::move(vocab), std::move(m)};
}

TextClassifier fit_classifier(std::span<const TrainingDoc> docs, const ClassifierConfig& cfg, std::uint64_t seed) {
  std::vector<std::size_t> indices;
  if (cfg.oversample) {
    std::vector<Label> labels;
    for (const auto& d : docs) labels.push_back(d.label);
    indices = random_oversample(labels, derive_seed(seed, kOversampleStream));
  } else {
    indices.resize(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) indices[i] = i;
  }
  return fit_classifier_on(docs, indices, cfg, seed);
}

MetricsReport cross_validate_classifier(std::span<const TrainingDoc> docs, const ClassifierConfig& cfg, std::size_t k,
                                        std::uint64_t seed, std::size_t n_threads) {
  std::vector<Label> labels;
  labels.reserve(docs.size());
  for (const auto& d : docs) labels.push_back(d.label);
  FitAndScore fit = [&](std::span<const std::size_t> train, std::span<const std::size_t> validate,
                        std::uint64_t fold_seed) {
    const auto model = fit_classifier_on(docs, train, cfg, fold_seed);
    std::vector<double> scores;
    scores.reserve(validate.size());
    for (auto i : validate) {
      const auto& d = docs[i];
      scores.push_back(model.predict_text(d.abstract.empty() ? d.title : d.title + " " + d.abstract));
    }
    return scores;
  };
  return cross_validate(labels, fit, k, seed, 0.5, n_threads);
}

LambdaChoice select_lambda(std::span<const TrainingDoc> docs, const ClassifierConfig& cfg,
                           const std::vector<double>& grid, std::size_t k, std::uint64_t seed) {
  if (grid.empty()) throw PreconditionError("empty lambda grid");
  LambdaChoice choice;
  double best_auc = -1.0;
  for (double lambda : grid) {
    auto c = cfg;
    c.kind = ModelKind::logistic;
    c.logistic.lambda = lambda;
    auto report = cross_validate_classifier(docs, c, k, seed);
    if (report.roc_auc > best_auc || (report.roc_auc == best_auc && lambda > choice.lambda)) {
      best_auc = report.roc_auc;
      choice.lambda = lambda;
    }
    choice.tried.emplace_back(lambda, std::move(report));
  }
  return choice;
}

std::uint64_t fingerprint(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace ethidx
