#pragma once

// L1-regularized logistic regression fitted by proximal gradient descent.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ethidx/corpus.hpp"
#include "ethidx/text.hpp"

namespace ethidx {

struct LogisticModel {
  std::vector<double> weights;
  double intercept = 0.0;
  double lambda = 0.0;

  bool operator==(const LogisticModel&) const = default;

  double decision(const SparseVector& x) const;
  std::size_t nonzero_count() const;
};

struct TrainConfig {
  double lambda = 0.01;
  std::size_t max_iters = 5000;
  double tolerance = 1e-6;  // on the largest absolute parameter change
  std::uint64_t seed = 0;   // unused by the full-batch solver; kept for a uniform model interface
};

// Per-run diagnostics.
struct TrainTrace {
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective;  // penalized objective after each accepted step (index 0 = start)
};

// sign(x) * max(|x| - t, 0)
double soft_threshold(double x, double t);

// Mean logistic loss over the rows, without the penalty.
double logistic_loss(std::span<const SparseVector> X, std::span<const Label> y,
                     std::span<const double> weights, double intercept);

struct LossGradient {
  std::vector<double> weights;
  double intercept = 0.0;
};

LossGradient logistic_loss_gradient(std::span<const SparseVector> X, std::span<const Label> y,
                                    std::span<const double> weights, double intercept);

// logistic_loss + lambda * sum |w|; the intercept is not penalized.
double penalized_objective(std::span<const SparseVector> X, std::span<const Label> y,
                           const LogisticModel& m);

// Rows are put in a canonical order first, so any permutation of the input
// yields the same model bit for bit. `n_features` = 0 infers the dimension.
LogisticModel train_logistic_l1(std::span<const SparseVector> X, std::span<const Label> y,
                                const TrainConfig& cfg, std::size_t n_features = 0,
                                TrainTrace* trace = nullptr);

double predict_proba(const LogisticModel& m, const SparseVector& x);

struct SignedKeywords {
  std::vector<std::string> positives;  // descending weight
  std::vector<std::string> negatives;  // ascending weight (most negative first)
};

SignedKeywords extract_signed_keywords(const LogisticModel& m, const Vocabulary& v);

// lambda, intercept, dimension, then term/index/weight rows for nonzero weights.
void save_logistic(std::ostream& out, const LogisticModel& m, const Vocabulary& v);
LogisticModel load_logistic(std::istream& in);

}  // namespace ethidx
