#include "ethidx/active.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "ethidx/errors.hpp"

namespace ethidx {

UncertaintyBand::UncertaintyBand(double lo, double hi) : low(lo), high(hi) {
  if (!(lo >= 0.0 && lo < hi && hi <= 1.0))
    throw PreconditionError(fmt::format("uncertainty band needs 0 <= low < high <= 1, got [{}, {}]", lo, hi));
}

bool more_uncertain(const ScoredId& a, const ScoredId& b) {
  const double da = std::abs(a.probability - 0.5), db = std::abs(b.probability - 0.5);
  if (da != db) return da < db;
  return a.id < b.id;
}

std::vector<ScoredId> select_uncertain(const std::vector<ScoredId>& probs, const UncertaintyBand& band) {
  std::vector<ScoredId> out;
  std::copy_if(probs.begin(), probs.end(), std::back_inserter(out),
               [&](const ScoredId& s) { return band.contains(s.probability); });
  std::sort(out.begin(), out.end(), more_uncertain);
  return out;
}

std::string_view to_string(AnnotationStatus s) {
  switch (s) {
    case AnnotationStatus::human_labeled: return "human_labeled";
    case AnnotationStatus::still_queued: return "still_queued";
    case AnnotationStatus::tie: return "tie";
    case AnnotationStatus::already_labeled: return "already_labeled";
    case AnnotationStatus::unknown_id: return "unknown_id";
  }
  return "still_queued";
}

std::optional<Label> resolve_votes(const std::vector<AnnotationVote>& votes, const VotePolicy& policy) {
  if (votes.empty()) return std::nullopt;
  const auto winner = majority_vote(votes);
  if (!winner) return std::nullopt;
  const auto support = static_cast<std::size_t>(
      std::count_if(votes.begin(), votes.end(), [&](const AnnotationVote& v) { return v.label == *winner; }));
  if (support < policy.majority()) return std::nullopt;
  return winner;
}

namespace {

std::vector<AnnotationOutcome> apply_impl(Dataset& ds, const std::vector<Annotation>& batch,
                                          const VotePolicy& policy, bool strict) {
  if (strict)
    for (const auto& a : batch)
      if (!ds.contains(a.doc_id)) throw ValidationError(fmt::format("unknown document id '{}'", a.doc_id));

  // Group per document in first-seen order so each is resolved once.
  std::vector<std::string> order;
  std::map<std::string, std::vector<AnnotationVote>> grouped;
  std::vector<AnnotationOutcome> out;
  std::map<std::string, bool> unknown_reported;
  for (const auto& a : batch) {
    if (!ds.contains(a.doc_id)) {
      if (!unknown_reported[a.doc_id]) {
        out.push_back({a.doc_id, AnnotationStatus::unknown_id});
        unknown_reported[a.doc_id] = true;
      }
      continue;
    }
    auto [it, inserted] = grouped.try_emplace(a.doc_id);
    if (inserted) order.push_back(a.doc_id);
    merge_vote(it->second, a.vote);
  }

  for (const auto& id : order) {
    auto& ex = ds.at(*ds.find(id));
    if (ex.provenance == Provenance::human) {
      out.push_back({id, AnnotationStatus::already_labeled});
      continue;
    }
    for (const auto& v : grouped[id]) merge_vote(ex.votes, v);
    if (const auto label = resolve_votes(ex.votes, policy)) {
      ex.label = *label;
      ex.provenance = Provenance::human;
      out.push_back({id, AnnotationStatus::human_labeled});
      continue;
    }
    const auto ethics = std::count_if(ex.votes.begin(), ex.votes.end(),
                                      [](const AnnotationVote& v) { return v.label == Label::ethics; });
    const bool tied = 2 * static_cast<std::size_t>(ethics) == ex.votes.size();
    out.push_back({id, tied ? AnnotationStatus::tie : AnnotationStatus::still_queued});
  }
  return out;
}

}  // namespace

std::vector<AnnotationOutcome> apply_labels(Dataset& ds, const std::vector<Annotation>& batch,
                                            const VotePolicy& policy) {
  return apply_impl(ds, batch, policy, true);
}

std::vector<AnnotationOutcome> apply_labels_lenient(Dataset& ds, const std::vector<Annotation>& batch,
                                                    const VotePolicy& policy) {
  return apply_impl(ds, batch, policy, false);
}

void machine_label_remainder(Dataset& ds, const DocumentScorer& score) {
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto& ex = ds.at(i);
    if (ex.provenance == Provenance::human) continue;
    const double p = round_probability(score(ex.doc));
    if (!(p >= 0.0 && p <= 1.0)) throw Error(fmt::format("scorer returned {} for '{}'", p, ex.doc.id));
    ex.machine_probability = p;
    ex.label = label_from_probability(p);
    ex.provenance = Provenance::machine;
  }
}

double agreement_rate(const std::vector<Label>& a, const std::vector<Label>& b) {
  if (a.size() != b.size())
    throw PreconditionError(fmt::format("agreement over sequences of length {} and {}", a.size(), b.size()));
  if (a.empty()) throw PreconditionError("agreement over empty sequences");
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] == b[i]) ++same;
  return static_cast<double>(same) / static_cast<double>(a.size());
}

std::vector<ScoredId> build_queue(const Dataset& ds, const std::vector<double>& probs, const UncertaintyBand& band) {
  if (probs.size() != ds.size())
    throw PreconditionError(fmt::format("{} probabilities for {} documents", probs.size(), ds.size()));
  std::vector<ScoredId> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& ex = ds.at(i);
    if (ex.provenance == Provenance::human) continue;
    if (band.contains(probs[i]) || !ex.votes.empty()) out.push_back({ex.doc.id, probs[i]});
  }
  std::sort(out.begin(), out.end(), more_uncertain);
  return out;
}

}  // namespace ethidx
