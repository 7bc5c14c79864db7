#include "ethidx/eval.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "ethidx/errors.hpp"
#include "ethidx/forest.hpp"

namespace ethidx {

namespace {

void require_both_classes(std::span<const Label> labels, const char* what) {
  const bool pos = std::any_of(labels.begin(), labels.end(), [](Label l) { return l == Label::ethics; });
  const bool neg = std::any_of(labels.begin(), labels.end(), [](Label l) { return l == Label::not_ethics; });
  if (!pos || !neg) throw PreconditionError(fmt::format("{} needs both classes", what));
}

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_below(rng, i)]);
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : "NA"; }

std::optional<double> mean_present(const std::vector<FoldMetrics>& folds, std::optional<double> FoldMetrics::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& f : folds)
    if (f.*field) {
      sum += *(f.*field);
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<std::size_t> FoldAssignment::members(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldAssignment::complement(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != fold) out.push_back(i);
  return out;
}

FoldAssignment stratified_kfold(std::span<const Label> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw PreconditionError("k-fold needs k >= 2");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == Label::ethics ? pos : neg).push_back(i);
  if (pos.size() < k || neg.size() < k)
    throw PreconditionError(
        fmt::format("{}-fold split needs at least {} examples per class (have {} ethics, {} not_ethics)", k, k,
                    pos.size(), neg.size()));
  std::mt19937_64 rng(seed);
  FoldAssignment out;
  out.k = k;
  out.fold_of.assign(labels.size(), 0);
  // Negatives continue the round-robin where positives stopped so fold sizes stay within one.
  std::size_t next = 0;
  for (auto* cls : {&pos, &neg}) {
    shuffle(*cls, rng);
    for (auto i : *cls) out.fold_of[i] = next++ % k;
  }
  return out;
}

std::vector<std::size_t> random_oversample(std::span<const Label> labels, std::uint64_t seed) {
  require_both_classes(labels, "oversampling");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == Label::ethics ? pos : neg).push_back(i);
  std::vector<std::size_t> out(labels.size());
  std::iota(out.begin(), out.end(), 0);
  const auto& minority = pos.size() < neg.size() ? pos : neg;
  const std::size_t deficit = std::max(pos.size(), neg.size()) - minority.size();
  std::mt19937_64 rng(seed);
  for (std::size_t d = 0; d < deficit; ++d) out.push_back(minority[uniform_below(rng, minority.size())]);
  return out;
}

double roc_auc(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size())
    throw PreconditionError(fmt::format("{} scores but {} labels", scores.size(), labels.size()));
  require_both_classes(labels, "ROC-AUC");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the pairwise count, kept integral: 2 per win, 1 per tie.
  std::uint64_t doubled = 0, negatives_below = 0, n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t gp = 0, gn = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == Label::ethics ? gp : gn) += 1;
      ++j;
    }
    doubled += 2 * gp * negatives_below + gp * gn;
    negatives_below += gn;
    n_pos += gp;
    n_neg += gn;
    i = j;
  }
  return static_cast<double>(doubled) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

PrecisionRecall precision_recall(std::span<const Label> predictions, std::span<const Label> labels) {
  if (predictions.size() != labels.size())
    throw PreconditionError(fmt::format("{} predictions but {} labels", predictions.size(), labels.size()));
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] == Label::ethics, t = labels[i] == Label::ethics;
    if (p && t) ++tp;
    if (p && !t) ++fp;
    if (!p && t) ++fn;
  }
  PrecisionRecall out;
  if (tp + fp > 0) out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return out;
}

FoldMetrics score_predictions(std::span<const double> scores, std::span<const Label> labels, double threshold) {
  FoldMetrics m;
  m.roc_auc = roc_auc(scores, labels);
  std::vector<Label> hard;
  hard.reserve(scores.size());
  for (double s : scores) hard.push_back(s >= threshold ? Label::ethics : Label::not_ethics);
  const auto pr = precision_recall(hard, labels);
  m.precision = pr.precision;
  m.recall = pr.recall;
  return m;
}

MetricsReport cross_validate(std::span<const Label> labels, const FitAndScore& fit, std::size_t k, std::uint64_t seed,
                             double threshold, std::size_t n_threads) {
  const auto folds = stratified_kfold(labels, k, seed);
  MetricsReport report;
  report.threshold = threshold;
  report.per_fold.resize(k);

  auto run_fold = [&](std::size_t f) {
    const auto fold_seed = derive_seed(seed, f);
    const auto validate = folds.members(f);
    const auto train_pool = folds.complement(f);
    std::vector<Label> train_labels;
    train_labels.reserve(train_pool.size());
    for (auto i : train_pool) train_labels.push_back(labels[i]);
    std::vector<std::size_t> train;
    for (auto local : random_oversample(train_labels, fold_seed)) train.push_back(train_pool[local]);

    const auto scores = fit(train, validate, fold_seed);
    if (scores.size() != validate.size())
      throw Error(fmt::format("model returned {} scores for {} validation examples", scores.size(), validate.size()));
    std::vector<Label> truth;
    truth.reserve(validate.size());
    for (auto i : validate) truth.push_back(labels[i]);
    report.per_fold[f] = score_predictions(scores, truth, threshold);
  };

  const std::size_t threads = std::min(n_threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : n_threads, k);
  if (threads <= 1) {
    for (std::size_t f = 0; f < k; ++f) run_fold(f);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(k);
    {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
          for (std::size_t f = next++; f < k; f = next++) {
            try {
              run_fold(f);
            } catch (...) {
              errors[f] = std::current_exception();
            }
          }
        });
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  double auc = 0.0;
  for (const auto& f : report.per_fold) auc += f.roc_auc;
  report.roc_auc = auc / static_cast<double>(k);
  report.precision = mean_present(report.per_fold, &FoldMetrics::precision);
  report.recall = mean_present(report.per_fold, &FoldMetrics::recall);
  return report;
}

void write_metrics(std::ostream& out, const MetricsReport& report) {
  out << "fold\troc_auc\tprecision\trecall\n";
  for (std::size_t f = 0; f < report.per_fold.size(); ++f) {
    const auto& m = report.per_fold[f];
    out << fmt::format("{}\t{:.6f}\t{}\t{}\n", f, m.roc_auc, fmt_opt(m.precision), fmt_opt(m.recall));
  }
  out << fmt::format("mean\t{:.6f}\t{}\t{}\n", report.roc_auc, fmt_opt(report.precision), fmt_opt(report.recall));
}

}  // namespace ethidx
