#pragma once

// Seeded random forest: bootstrap samples, per-node feature subsets, Gini splits.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ethidx/corpus.hpp"
#include "ethidx/text.hpp"

namespace ethidx {

// Flat node. Internal nodes send value <= threshold to `left`.
struct TreeNode {
  static constexpr std::uint32_t kNone = 0xffffffffu;

  FeatureIndex feature = 0;
  double threshold = 0.0;
  std::uint32_t left = kNone;
  std::uint32_t right = kNone;
  double positive_fraction = 0.0;  // leaves only
  double n_samples = 0.0;          // leaves only; bootstrap multiplicities included

  bool is_leaf() const { return left == kNone; }
  bool operator==(const TreeNode&) const = default;
};

// Nodes in preorder; index 0 is the root.
struct DecisionTree {
  std::vector<TreeNode> nodes;

  double predict(const SparseVector& x) const;
  std::size_t depth() const;  // edges on the longest root-to-leaf path

  bool operator==(const DecisionTree&) const = default;
};

struct FeatureRule {
  enum class Kind : std::uint8_t { sqrt, all, fixed };
  Kind kind = Kind::sqrt;
  std::size_t count = 0;  // used by Kind::fixed

  std::size_t resolve(std::size_t n_features) const;
  bool operator==(const FeatureRule&) const = default;
};

struct ForestConfig {
  static constexpr std::size_t kUnlimitedDepth = 1u << 20;

  std::size_t n_estimators = 512;
  std::size_t max_depth = 8;
  FeatureRule features_per_split{};
  std::size_t min_samples_split = 2;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::size_t n_threads = 1;  // 0 = hardware concurrency; does not affect the result

  bool operator==(const ForestConfig& o) const {
    return n_estimators == o.n_estimators && max_depth == o.max_depth &&
           features_per_split == o.features_per_split && min_samples_split == o.min_samples_split &&
           bootstrap == o.bootstrap && seed == o.seed;
  }
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  ForestConfig config;
  std::size_t n_features = 0;

  bool operator==(const ForestModel&) const = default;
};

// 1 - sum (c_i / n)^2. Throws PreconditionError when all counts are zero.
double gini(std::span<const double> counts);

struct Split {
  FeatureIndex feature = 0;
  double threshold = 0.0;
  double impurity_decrease = 0.0;
};

// A weighted row set for split search.
struct SplitRows {
  std::span<const SparseVector> X;
  std::span<const Label> y;
  std::span<const std::size_t> rows;
  std::span<const double> weights;  // same length as rows; empty = all 1
};

// Best (feature, midpoint) by weighted Gini decrease among `candidates`;
// ties go to the lowest feature, then the lowest threshold. nullopt when no
// split lowers impurity.
std::optional<Split> best_split(const SplitRows& rows, std::span<const FeatureIndex> candidates);

// Throws PreconditionError on mismatched sizes, fewer than two rows or a single class.
// `n_features` = 0 infers the dimension from X.
ForestModel train_forest(std::span<const SparseVector> X, std::span<const Label> y, const ForestConfig& cfg,
                         std::size_t n_features = 0);

// Mean of the reached leaves' positive fractions.
double predict_proba(const ForestModel& m, const SparseVector& x);

void save_forest(std::ostream& out, const ForestModel& m);
ForestModel load_forest(std::istream& in);

// Uniform integer in [0, n) from a 64-bit engine, identical on every platform.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

}  // namespace ethidx
