#include "ethidx/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "ethidx/errors.hpp"

namespace ethidx {

namespace {

// One distinct feature value inside a node with the class weight it carries.
struct ValueBin {
  double value;
  double neg;
  double pos;
};

double gini2(double neg, double pos) {
  const double n = neg + pos;
  if (n <= 0.0) return 0.0;
  const double a = neg / n, b = pos / n;
  return 1.0 - (a * a + b * b);
}

double midpoint(double a, double b) {
  const double m = a + (b - a) / 2.0;
  return m < b ? m : a;
}

// `bins` must be sorted by value with unique values. Returns the best split on
// this feature (lowest threshold among equals) or nullopt if constant/no gain.
std::optional<Split> scan_bins(FeatureIndex feature, const std::vector<ValueBin>& bins, double neg,
                               double pos) {
  if (bins.size() < 2) return std::nullopt;
  const double total = neg + pos;
  const double parent = gini2(neg, pos);
  std::optional<Split> best;
  double left_neg = 0.0, left_pos = 0.0;
  for (std::size_t k = 0; k + 1 < bins.size(); ++k) {
    left_neg += bins[k].neg;
    left_pos += bins[k].pos;
    const double right_neg = neg - left_neg, right_pos = pos - left_pos;
    const double wl = left_neg + left_pos, wr = right_neg + right_pos;
    const double decrease = parent - (wl / total) * gini2(left_neg, left_pos) - (wr / total) * gini2(right_neg, right_pos);
    if (!best || decrease > best->impurity_decrease)
      best = Split{feature, midpoint(bins[k].value, bins[k + 1].value), decrease};
  }
  return best;
}

void sort_and_merge(std::vector<ValueBin>& bins) {
  std::sort(bins.begin(), bins.end(), [](const ValueBin& a, const ValueBin& b) { return a.value < b.value; });
  std::size_t out = 0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (out > 0 && bins[out - 1].value == bins[i].value) {
      bins[out - 1].neg += bins[i].neg;
      bins[out - 1].pos += bins[i].pos;
    } else {
      bins[out++] = bins[i];
    }
  }
  bins.resize(out);
}

// Picks the best of per-feature winners: largest decrease, then lowest feature.
bool better(const Split& a, const std::optional<Split>& b) {
  if (!b) return true;
  if (a.impurity_decrease != b->impurity_decrease) return a.impurity_decrease > b->impurity_decrease;
  if (a.feature != b->feature) return a.feature < b->feature;
  return a.threshold < b->threshold;
}

// Splits that only move rounding noise are not splits.
constexpr double kMinDecrease = 1e-12;

void check_training_inputs(std::span<const SparseVector> X, std::span<const Label> y) {
  if (X.size() != y.size()) throw PreconditionError(fmt::format("{} rows but {} labels", X.size(), y.size()));
  if (X.size() < 2) throw PreconditionError("need at least two rows");
  if (std::all_of(y.begin(), y.end(), [&](Label l) { return l == y.front(); }))
    throw PreconditionError("training labels contain a single class");
}

class TreeBuilder {
 public:
  TreeBuilder(std::span<const SparseVector> X, std::span<const Label> y, std::size_t n_features,
              const ForestConfig& cfg, std::uint64_t seed)
      : X_(X), y_(y), n_features_(n_features), cfg_(cfg), rng_(seed), buckets_(n_features) {
    k_ = cfg.features_per_split.resolve(n_features);
  }

  DecisionTree build() {
    std::vector<std::size_t> rows;
    std::vector<double> weights;
    const std::size_t n = X_.size();
    if (cfg_.bootstrap) {
      std::vector<double> counts(n, 0.0);
      for (std::size_t draw = 0; draw < n; ++draw) counts[uniform_below(rng_, n)] += 1.0;
      for (std::size_t i = 0; i < n; ++i)
        if (counts[i] > 0.0) {
          rows.push_back(i);
          weights.push_back(counts[i]);
        }
    } else {
      rows.resize(n);
      for (std::size_t i = 0; i < n; ++i) rows[i] = i;
      weights.assign(n, 1.0);
    }
    grow(rows, weights, 0);
    return std::move(tree_);
  }

 private:
  std::uint32_t grow(const std::vector<std::size_t>& rows, const std::vector<double>& weights, std::size_t depth) {
    double neg = 0.0, pos = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) (y_[rows[i]] == Label::ethics ? pos : neg) += weights[i];

    const auto self = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    std::optional<Split> split;
    const double total = neg + pos;
    if (depth < cfg_.max_depth && total >= static_cast<double>(cfg_.min_samples_split) && neg > 0.0 && pos > 0.0)
      split = find_split(rows, weights, neg, pos);

    if (!split) {
      auto& leaf = tree_.nodes[self];
      leaf.positive_fraction = pos / total;
      leaf.n_samples = total;
      return self;
    }

    std::vector<std::size_t> lrows, rrows;
    std::vector<double> lw, rw;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (X_[rows[i]].value_at(split->feature) <= split->threshold) {
        lrows.push_back(rows[i]);
        lw.push_back(weights[i]);
      } else {
        rrows.push_back(rows[i]);
        rw.push_back(weights[i]);
      }
    }
    tree_.nodes[self].feature = split->feature;
    tree_.nodes[self].threshold = split->threshold;
    const auto l = grow(lrows, lw, depth + 1);
    const auto r = grow(rrows, rw, depth + 1);
    tree_.nodes[self].left = l;
    tree_.nodes[self].right = r;
    return self;
  }

  // Features absent from every row in the node are constant zero and never
  // split, so sampling walks a random order of the node's active features and
  // keeps the first k that vary.
  std::optional<Split> find_split(const std::vector<std::size_t>& rows, const std::vector<double>& weights,
                                  double neg, double pos) {
    touched_.clear();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const bool positive = y_[rows[i]] == Label::ethics;
      for (const auto& e : X_[rows[i]]) {
        auto& bucket = buckets_[e.index];
        if (bucket.empty()) touched_.push_back(e.index);
        bucket.push_back({e.value, positive ? 0.0 : weights[i], positive ? weights[i] : 0.0});
      }
    }
    std::sort(touched_.begin(), touched_.end());

    std::optional<Split> best;
    std::size_t evaluated = 0;
    for (std::size_t i = 0; i < touched_.size() && evaluated < k_; ++i) {
      const std::size_t j = i + uniform_below(rng_, touched_.size() - i);
      std::swap(touched_[i], touched_[j]);
      const FeatureIndex f = touched_[i];
      auto& bins = buckets_[f];
      double nz_neg = 0.0, nz_pos = 0.0;
      for (const auto& b : bins) {
        nz_neg += b.neg;
        nz_pos += b.pos;
      }
      const double zero_neg = neg - nz_neg, zero_pos = pos - nz_pos;
      if (zero_neg > 0.0 || zero_pos > 0.0) bins.push_back({0.0, zero_neg, zero_pos});
      sort_and_merge(bins);
      if (bins.size() < 2) continue;
      ++evaluated;
      if (auto s = scan_bins(f, bins, neg, pos); s && better(*s, best)) best = s;
    }
    for (auto f : touched_) buckets_[f].clear();
    if (best && best->impurity_decrease > kMinDecrease) return best;
    return std::nullopt;
  }

  std::span<const SparseVector> X_;
  std::span<const Label> y_;
  std::size_t n_features_;
  const ForestConfig& cfg_;
  std::mt19937_64 rng_;
  std::size_t k_ = 1;
  std::vector<std::vector<ValueBin>> buckets_;
  std::vector<FeatureIndex> touched_;
  DecisionTree tree_;
};

std::string rule_to_string(const FeatureRule& r) {
  switch (r.kind) {
    case FeatureRule::Kind::sqrt: return "sqrt";
    case FeatureRule::Kind::all: return "all";
    case FeatureRule::Kind::fixed: return fmt::format("fixed:{}", r.count);
  }
  return "sqrt";
}

FeatureRule rule_from_string(const std::string& s) {
  if (s == "sqrt") return {FeatureRule::Kind::sqrt, 0};
  if (s == "all") return {FeatureRule::Kind::all, 0};
  if (s.rfind("fixed:", 0) == 0) return {FeatureRule::Kind::fixed, std::stoul(s.substr(6))};
  throw ParseError(fmt::format("unknown feature rule '{}'", s));
}

}  // namespace

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw PreconditionError("uniform_below(0)");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  for (;;) {
    const std::uint64_t v = rng();
    if (v < limit) return v % n;
  }
}

std::size_t FeatureRule::resolve(std::size_t n_features) const {
  std::size_t k = n_features;
  switch (kind) {
    case Kind::sqrt: {
      k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_features))));
      break;
    }
    case Kind::all: break;
    case Kind::fixed: k = std::min(count, n_features); break;
  }
  return std::max<std::size_t>(k, 1);
}

double DecisionTree::predict(const SparseVector& x) const {
  std::uint32_t i = 0;
  while (!nodes[i].is_leaf()) i = x.value_at(nodes[i].feature) <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  return nodes[i].positive_fraction;
}

std::size_t DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::size_t deepest = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes[i].is_leaf()) {
      stack.push_back({nodes[i].left, d + 1});
      stack.push_back({nodes[i].right, d + 1});
    }
  }
  return deepest;
}

double gini(std::span<const double> counts) {
  double n = 0.0;
  for (double c : counts) {
    if (c < 0.0) throw PreconditionError("negative class count");
    n += c;
  }
  if (n <= 0.0) throw PreconditionError("gini of an empty node");
  double s = 0.0;
  for (double c : counts) s += (c / n) * (c / n);
  return 1.0 - s;
}

std::optional<Split> best_split(const SplitRows& in, std::span<const FeatureIndex> candidates) {
  if (in.rows.empty()) throw PreconditionError("best_split over zero rows");
  if (!in.weights.empty() && in.weights.size() != in.rows.size())
    throw PreconditionError("weights and rows differ in length");
  auto weight = [&](std::size_t i) { return in.weights.empty() ? 1.0 : in.weights[i]; };

  double neg = 0.0, pos = 0.0;
  for (std::size_t i = 0; i < in.rows.size(); ++i) (in.y[in.rows[i]] == Label::ethics ? pos : neg) += weight(i);
  if (neg == 0.0 || pos == 0.0) return std::nullopt;

  std::vector<FeatureIndex> order(candidates.begin(), candidates.end());
  std::sort(order.begin(), order.end());
  std::optional<Split> best;
  std::vector<ValueBin> bins;
  for (auto f : order) {
    bins.clear();
    for (std::size_t i = 0; i < in.rows.size(); ++i) {
      const bool positive = in.y[in.rows[i]] == Label::ethics;
      bins.push_back({in.X[in.rows[i]].value_at(f), positive ? 0.0 : weight(i), positive ? weight(i) : 0.0});
    }
    sort_and_merge(bins);
    if (auto s = scan_bins(f, bins, neg, pos); s && better(*s, best)) best = s;
  }
  if (best && best->impurity_decrease > kMinDecrease) return best;
  return std::nullopt;
}

ForestModel train_forest(std::span<const SparseVector> X, std::span<const Label> y, const ForestConfig& cfg,
                         std::size_t n_features) {
  check_training_inputs(X, y);
  if (cfg.n_estimators < 1 || cfg.max_depth < 1)
    throw PreconditionError("forest needs n_estimators >= 1 and max_depth >= 1");
  for (const auto& x : X) n_features = std::max(n_features, x.dimension_bound());

  ForestModel model;
  model.config = cfg;
  model.n_features = n_features;
  model.trees.resize(cfg.n_estimators);

  std::size_t threads = cfg.n_threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.n_threads;
  threads = std::min(threads, cfg.n_estimators);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.n_estimators; i = next++)
      model.trees[i] = TreeBuilder(X, y, n_features, cfg, cfg.seed + i).build();
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return model;
}

double predict_proba(const ForestModel& m, const SparseVector& x) {
  if (m.trees.empty()) throw PreconditionError("forest has no trees");
  double s = 0.0;
  for (const auto& t : m.trees) s += t.predict(x);
  return s / static_cast<double>(m.trees.size());
}

void save_forest(std::ostream& out, const ForestModel& m) {
  const auto& c = m.config;
  out << "#ethidx-forest 1\n";
  out << "n_estimators " << c.n_estimators << '\n';
  out << "max_depth " << c.max_depth << '\n';
  out << "features_per_split " << rule_to_string(c.features_per_split) << '\n';
  out << "min_samples_split " << c.min_samples_split << '\n';
  out << "bootstrap " << (c.bootstrap ? 1 : 0) << '\n';
  out << "seed " << c.seed << '\n';
  out << "n_features " << m.n_features << '\n';
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    const auto& nodes = m.trees[t].nodes;
    out << "tree " << t << ' ' << nodes.size() << '\n';
    for (const auto& n : nodes) {
      if (n.is_leaf())
        out << fmt::format("L {:.17g} {:.17g}\n", n.positive_fraction, n.n_samples);
      else
        out << fmt::format("I {} {:.17g}\n", n.feature, n.threshold);
    }
  }
}

namespace {

// Rebuilds child links of a preorder node list; returns one past the subtree.
std::uint32_t link_preorder(std::vector<TreeNode>& nodes, std::uint32_t i, std::size_t lineno) {
  if (i >= nodes.size()) throw ParseError("truncated tree", lineno);
  if (nodes[i].is_leaf() && nodes[i].right == TreeNode::kNone && nodes[i].left == TreeNode::kNone &&
      nodes[i].feature == TreeNode::kNone)
    return i + 1;
  nodes[i].left = i + 1;
  const auto after_left = link_preorder(nodes, i + 1, lineno);
  nodes[i].right = after_left;
  return link_preorder(nodes, after_left, lineno);
}

}  // namespace

ForestModel load_forest(std::istream& in) {
  ForestModel m;
  std::string line;
  std::size_t lineno = 0;
  bool magic = false;
  std::size_t declared_trees = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line) || line.empty()) return false;
    ++lineno;
    return true;
  };
  while (next_line()) {
    if (line == "#ethidx-forest 1") {
      magic = true;
      continue;
    }
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    auto& c = m.config;
    if (key == "n_estimators") {
      ss >> declared_trees;
      c.n_estimators = declared_trees;
    } else if (key == "max_depth") {
      ss >> c.max_depth;
    } else if (key == "features_per_split") {
      std::string r;
      ss >> r;
      c.features_per_split = rule_from_string(r);
    } else if (key == "min_samples_split") {
      ss >> c.min_samples_split;
    } else if (key == "bootstrap") {
      int b = 1;
      ss >> b;
      c.bootstrap = b != 0;
    } else if (key == "seed") {
      ss >> c.seed;
    } else if (key == "n_features") {
      ss >> m.n_features;
    } else if (key == "tree") {
      std::size_t index = 0, count = 0;
      ss >> index >> count;
      if (ss.fail() || index != m.trees.size() || count == 0) throw ParseError("bad tree header", lineno);
      const std::size_t header_line = lineno;
      DecisionTree tree;
      tree.nodes.resize(count);
      for (std::size_t k = 0; k < count; ++k) {
        if (!next_line()) throw ParseError("truncated tree", lineno);
        std::istringstream ns(line);
        char kind = 0;
        ns >> kind;
        auto& node = tree.nodes[k];
        if (kind == 'L') {
          ns >> node.positive_fraction >> node.n_samples;
          node.feature = TreeNode::kNone;
          if (!(node.positive_fraction >= 0.0 && node.positive_fraction <= 1.0))
            throw ParseError("leaf fraction outside [0,1]", lineno);
        } else if (kind == 'I') {
          ns >> node.feature >> node.threshold;
          if (node.feature >= m.n_features) throw ParseError("split feature out of range", lineno);
        } else {
          throw ParseError("unknown node kind", lineno);
        }
        if (ns.fail()) throw ParseError("malformed node", lineno);
      }
      if (link_preorder(tree.nodes, 0, header_line) != count)
        throw ParseError("tree node count does not match its structure", header_line);
      for (auto& node : tree.nodes)
        if (node.is_leaf()) node.feature = 0;
      m.trees.push_back(std::move(tree));
      continue;
    } else {
      throw ParseError(fmt::format("unexpected key '{}'", key), lineno);
    }
    if (ss.fail()) throw ParseError("malformed header value", lineno);
  }
  if (!magic) throw ParseError("not a forest model file");
  if (m.trees.size() != declared_trees) throw ParseError("tree count does not match n_estimators");
  return m;
}

}  // namespace ethidx
