#pragma once

// Text classifier = fitted vocabulary + logistic or forest model, with the
// training-row scheme, cross-validation and persistence used by the CLI and
// the annotation server.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ethidx/corpus.hpp"
#include "ethidx/eval.hpp"
#include "ethidx/forest.hpp"
#include "ethidx/linear.hpp"
#include "ethidx/text.hpp"

namespace ethidx {

enum class ModelKind : std::uint8_t { logistic, forest };

std::string_view to_string(ModelKind k);
ModelKind model_kind_from_string(std::string_view s);

struct ClassifierConfig {
  ModelKind kind = ModelKind::forest;
  TextOptions text;
  std::size_t min_df = 1;
  TrainConfig logistic;
  ForestConfig forest;
  bool oversample = true;  // balance classes before fitting
};

struct TrainingDoc {
  std::string title;
  std::string abstract;
  Label label = Label::not_ethics;
};

struct TrainingRow {
  std::string text;
  Label label = Label::not_ethics;
};

// Each document gives a title+abstract row and a title-only row; documents
// without an abstract give the title row once.
std::vector<TrainingRow> training_rows(std::span<const TrainingDoc> docs);

// Human-labeled examples of a dataset, in dataset order.
std::vector<TrainingDoc> human_training_docs(const Dataset& ds);

class TextClassifier {
 public:
  TextClassifier() = default;
  TextClassifier(Vocabulary vocab, std::variant<LogisticModel, ForestModel> model);

  ModelKind kind() const { return model_.index() == 0 ? ModelKind::logistic : ModelKind::forest; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const LogisticModel& logistic() const { return std::get<LogisticModel>(model_); }
  const ForestModel& forest() const { return std::get<ForestModel>(model_); }

  double predict_text(std::string_view text) const;
  // Scores title + abstract, or the title alone when there is no abstract.
  double predict(const DocumentRecord& doc) const { return predict_text(doc.full_text()); }

  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  static TextClassifier load(std::istream& in);
  static TextClassifier load(const std::string& path);

  bool operator==(const TextClassifier& o) const { return vocab_ == o.vocab_ && model_ == o.model_; }

 private:
  Vocabulary vocab_;
  std::variant<LogisticModel, ForestModel> model_;
};

// Fits on docs[indices] (repeats allowed); the vocabulary sees each distinct
// document once.
TextClassifier fit_classifier_on(std::span<const TrainingDoc> docs, std::span<const std::size_t> indices,
                                 const ClassifierConfig& cfg, std::uint64_t seed);

// Oversamples (when cfg.oversample) and fits on all docs.
TextClassifier fit_classifier(std::span<const TrainingDoc> docs, const ClassifierConfig& cfg, std::uint64_t seed);

// k-fold CV with oversampling inside each training fold; validation
// documents are scored on their full text.
MetricsReport cross_validate_classifier(std::span<const TrainingDoc> docs, const ClassifierConfig& cfg, std::size_t k,
                                        std::uint64_t seed, std::size_t n_threads = 1);

struct LambdaChoice {
  double lambda = 0.0;
  std::vector<std::pair<double, MetricsReport>> tried;
};

inline const std::vector<double> kDefaultLambdaGrid{0.001, 0.01, 0.1, 1.0};

// Highest mean CV ROC-AUC wins; ties go to the larger (sparser) lambda.
LambdaChoice select_lambda(std::span<const TrainingDoc> docs, const ClassifierConfig& cfg,
                           const std::vector<double>& grid, std::size_t k, std::uint64_t seed);

// Stable 64-bit FNV-1a digest, used to fingerprint serialized models.
std::uint64_t fingerprint(std::string_view bytes);

}  // namespace ethidx
