#include "ethidx/linear.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "ethidx/errors.hpp"

namespace ethidx {

namespace {

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// log(1 + e^s) without overflow.
double softplus(double s) { return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

double dot(std::span<const double> w, const SparseVector& x) {
  double s = 0.0;
  for (const auto& e : x) s += w[e.index] * e.value;
  return s;
}

double l1(std::span<const double> w) {
  double s = 0.0;
  for (double v : w) s += std::abs(v);
  return s;
}

void check_inputs(std::span<const SparseVector> X, std::span<const Label> y, std::size_t n_features) {
  if (X.size() != y.size())
    throw PreconditionError(fmt::format("{} rows but {} labels", X.size(), y.size()));
  for (const auto& x : X)
    if (x.dimension_bound() > n_features)
      throw PreconditionError("row references a feature beyond the model dimension");
}

bool row_less(const SparseVector& a, Label la, const SparseVector& b, Label lb) {
  if (la != lb) return la < lb;
  const auto& ea = a.entries();
  const auto& eb = b.entries();
  return std::lexicographical_compare(ea.begin(), ea.end(), eb.begin(), eb.end(),
                                      [](const SparseEntry& p, const SparseEntry& q) {
                                        if (p.index != q.index) return p.index < q.index;
                                        return p.value < q.value;
                                      });
}

}  // namespace

double LogisticModel::decision(const SparseVector& x) const { return dot(weights, x) + intercept; }

std::size_t LogisticModel::nonzero_count() const {
  return static_cast<std::size_t>(std::count_if(weights.begin(), weights.end(), [](double w) { return w != 0.0; }));
}

double soft_threshold(double x, double t) {
  if (t < 0.0) throw PreconditionError("soft threshold needs t >= 0");
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

double logistic_loss(std::span<const SparseVector> X, std::span<const Label> y,
                     std::span<const double> weights, double intercept) {
  check_inputs(X, y, weights.size());
  if (X.empty()) throw PreconditionError("logistic loss over zero rows");
  double total = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double s = dot(weights, X[i]) + intercept;
    total += softplus(s) - to_int(y[i]) * s;
  }
  return total / static_cast<double>(X.size());
}

LossGradient logistic_loss_gradient(std::span<const SparseVector> X, std::span<const Label> y,
                                    std::span<const double> weights, double intercept) {
  check_inputs(X, y, weights.size());
  if (X.empty()) throw PreconditionError("logistic gradient over zero rows");
  LossGradient g;
  g.weights.assign(weights.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double r = sigmoid(dot(weights, X[i]) + intercept) - to_int(y[i]);
    for (const auto& e : X[i]) g.weights[e.index] += r * e.value;
    g.intercept += r;
  }
  for (auto& v : g.weights) v *= inv_n;
  g.intercept *= inv_n;
  return g;
}

double penalized_objective(std::span<const SparseVector> X, std::span<const Label> y,
                           const LogisticModel& m) {
  return logistic_loss(X, y, m.weights, m.intercept) + m.lambda * l1(m.weights);
}

LogisticModel train_logistic_l1(std::span<const SparseVector> X_in, std::span<const Label> y_in,
                                const TrainConfig& cfg, std::size_t n_features, TrainTrace* trace) {
  if (X_in.empty()) throw PreconditionError("cannot train on zero rows");
  if (X_in.size() != y_in.size())
    throw PreconditionError(fmt::format("{} rows but {} labels", X_in.size(), y_in.size()));
  if (X_in.size() < 2) throw PreconditionError("need at least two rows");
  if (std::all_of(y_in.begin(), y_in.end(), [&](Label l) { return l == y_in.front(); }))
    throw PreconditionError("training labels contain a single class");
  if (!(cfg.lambda >= 0.0) || cfg.max_iters < 1 || !(cfg.tolerance > 0.0))
    throw PreconditionError("invalid logistic training configuration");

  for (const auto& x : X_in) n_features = std::max(n_features, x.dimension_bound());

  std::vector<std::size_t> order(X_in.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return row_less(X_in[a], y_in[a], X_in[b], y_in[b]);
  });
  std::vector<SparseVector> X;
  std::vector<Label> y;
  X.reserve(order.size());
  y.reserve(order.size());
  for (auto i : order) {
    X.push_back(X_in[i]);
    y.push_back(y_in[i]);
  }

  LogisticModel m;
  m.weights.assign(n_features, 0.0);
  m.lambda = cfg.lambda;

  double loss = logistic_loss(X, y, m.weights, m.intercept);
  double objective = loss + cfg.lambda * l1(m.weights);
  if (trace) {
    *trace = {};
    trace->objective.push_back(objective);
  }

  double step = 1.0;
  std::vector<double> cand(n_features);
  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    const auto grad = logistic_loss_gradient(X, y, m.weights, m.intercept);
    double cand_b = 0.0, cand_loss = 0.0, cand_obj = 0.0, max_change = 0.0;
    for (;;) {
      double lin = 0.0, sq = 0.0;
      max_change = 0.0;
      for (std::size_t j = 0; j < n_features; ++j) {
        cand[j] = soft_threshold(m.weights[j] - step * grad.weights[j], step * cfg.lambda);
        const double d = cand[j] - m.weights[j];
        lin += grad.weights[j] * d;
        sq += d * d;
        max_change = std::max(max_change, std::abs(d));
      }
      cand_b = m.intercept - step * grad.intercept;
      const double db = cand_b - m.intercept;
      lin += grad.intercept * db;
      sq += db * db;
      max_change = std::max(max_change, std::abs(db));

      cand_loss = logistic_loss(X, y, cand, cand_b);
      cand_obj = cand_loss + cfg.lambda * l1(cand);
      const bool sufficient = cand_loss <= loss + lin + sq / (2.0 * step);
      if ((sufficient && cand_obj <= objective) || max_change == 0.0) break;
      step *= 0.5;
    }
    if (max_change == 0.0) {
      if (trace) trace->converged = true;
      break;
    }
    m.weights.swap(cand);
    m.intercept = cand_b;
    loss = cand_loss;
    objective = cand_obj;
    if (trace) {
      trace->iterations = iter + 1;
      trace->objective.push_back(objective);
    }
    if (max_change < cfg.tolerance) {
      if (trace) trace->converged = true;
      break;
    }
    step *= 2.0;
  }
  return m;
}

double predict_proba(const LogisticModel& m, const SparseVector& x) {
  if (x.dimension_bound() > m.weights.size())
    throw PreconditionError("vector references a feature beyond the model dimension");
  return sigmoid(m.decision(x));
}

SignedKeywords extract_signed_keywords(const LogisticModel& m, const Vocabulary& v) {
  if (m.weights.size() != v.size())
    throw PreconditionError(
        fmt::format("model has {} weights but vocabulary has {} terms", m.weights.size(), v.size()));
  std::vector<FeatureIndex> pos, neg;
  for (FeatureIndex i = 0; i < m.weights.size(); ++i) {
    if (m.weights[i] > 0.0) pos.push_back(i);
    if (m.weights[i] < 0.0) neg.push_back(i);
  }
  std::stable_sort(pos.begin(), pos.end(), [&](auto a, auto b) { return m.weights[a] > m.weights[b]; });
  std::stable_sort(neg.begin(), neg.end(), [&](auto a, auto b) { return m.weights[a] < m.weights[b]; });
  SignedKeywords out;
  for (auto i : pos) out.positives.push_back(v.term(i));
  for (auto i : neg) out.negatives.push_back(v.term(i));
  return out;
}

void save_logistic(std::ostream& out, const LogisticModel& m, const Vocabulary& v) {
  if (m.weights.size() != v.size()) throw PreconditionError("model and vocabulary dimensions differ");
  out << "#ethidx-logistic 1\n";
  out << fmt::format("lambda\t{:.17g}\n", m.lambda);
  out << fmt::format("intercept\t{:.17g}\n", m.intercept);
  out << fmt::format("n_features\t{}\n", m.weights.size());
  out << "term\tindex\tweight\n";
  for (std::size_t i = 0; i < m.weights.size(); ++i)
    if (m.weights[i] != 0.0) out << fmt::format("{}\t{}\t{:.17g}\n", v.term(i), i, m.weights[i]);
}

LogisticModel load_logistic(std::istream& in) {
  LogisticModel m;
  std::string line;
  std::size_t lineno = 0;
  bool magic = false, columns = false, have_dim = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) break;
    if (line == "#ethidx-logistic 1") {
      magic = true;
      continue;
    }
    std::istringstream ss(line);
    std::string key;
    std::getline(ss, key, '\t');
    if (!columns) {
      if (key == "lambda") {
        ss >> m.lambda;
      } else if (key == "intercept") {
        ss >> m.intercept;
      } else if (key == "n_features") {
        std::size_t d = 0;
        ss >> d;
        m.weights.assign(d, 0.0);
        have_dim = true;
      } else if (line == "term\tindex\tweight") {
        columns = true;
      } else {
        throw ParseError("unexpected line in logistic model", lineno);
      }
      if (ss.fail()) throw ParseError("malformed value in logistic model", lineno);
      continue;
    }
    std::size_t index = 0;
    double w = 0.0;
    if (!(ss >> index >> w)) throw ParseError("malformed weight row", lineno);
    if (index >= m.weights.size()) throw ParseError("weight index out of range", lineno);
    if (!std::isfinite(w)) throw ParseError("non-finite weight", lineno);
    m.weights[index] = w;
  }
  if (!magic || !columns || !have_dim) throw ParseError("not a logistic model file");
  return m;
}

}  // namespace ethidx
