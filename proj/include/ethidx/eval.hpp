#pragma once

// Resampling and metrics: stratified k-fold, random oversampling, ROC-AUC,
// precision/recall, and the cross-validation loop that ties them together.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "ethidx/corpus.hpp"

namespace ethidx {

struct FoldAssignment {
  std::size_t k = 0;
  std::vector<std::size_t> fold_of;

  std::vector<std::size_t> members(std::size_t fold) const;
  std::vector<std::size_t> complement(std::size_t fold) const;
};

// Each class is shuffled with `seed` and dealt round-robin to the folds.
// Throws PreconditionError when k < 2 or a class has fewer than k members.
FoldAssignment stratified_kfold(std::span<const Label> labels, std::size_t k, std::uint64_t seed);

// Returns example indices: every original once, in order, followed by
// minority-class draws (uniform, with replacement) until the classes balance.
std::vector<std::size_t> random_oversample(std::span<const Label> labels, std::uint64_t seed);

// P(score+ > score-) + 1/2 P(score+ = score-) over all positive/negative pairs.
double roc_auc(std::span<const double> scores, std::span<const Label> labels);

struct PrecisionRecall {
  std::optional<double> precision;  // absent without positive predictions
  std::optional<double> recall;     // absent without positive labels
};

PrecisionRecall precision_recall(std::span<const Label> predictions, std::span<const Label> labels);

struct FoldMetrics {
  double roc_auc = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
};

struct MetricsReport {
  double roc_auc = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  double threshold = 0.5;
  std::vector<FoldMetrics> per_fold;
};

// Metrics on one scored set; hard decisions are score >= threshold.
FoldMetrics score_predictions(std::span<const double> scores, std::span<const Label> labels, double threshold = 0.5);

// Fits on `train` (indices, oversampled duplicates included) and returns one
// score per entry of `validate`.
using FitAndScore = std::function<std::vector<double>(std::span<const std::size_t> train,
                                                      std::span<const std::size_t> validate, std::uint64_t fold_seed)>;

// Per fold: oversample the training part, fit, score the untouched validation
// fold. Folds run on up to `n_threads` threads; results do not depend on it.
MetricsReport cross_validate(std::span<const Label> labels, const FitAndScore& fit, std::size_t k, std::uint64_t seed,
                             double threshold = 0.5, std::size_t n_threads = 1);

// Deterministic per-fold seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// fold, roc_auc, precision, recall rows, then a "mean" row. Absent values print "NA".
void write_metrics(std::ostream& out, const MetricsReport& report);

}  // namespace ethidx
