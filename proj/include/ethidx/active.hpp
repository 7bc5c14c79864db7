#pragma once

// Uncertainty sampling and the human/machine labeling rounds.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ethidx/corpus.hpp"

namespace ethidx {

struct UncertaintyBand {
  double low = 1.0 / 3.0;
  double high = 2.0 / 3.0;

  UncertaintyBand() = default;
  UncertaintyBand(double lo, double hi);  // throws PreconditionError unless 0 <= lo < hi <= 1

  // Endpoints are inside the band.
  bool contains(double p) const { return p >= low && p <= high; }
};

struct ScoredId {
  std::string id;
  double probability = 0.0;
};

// Most uncertain first: ascending |p - 0.5|, ties by id.
bool more_uncertain(const ScoredId& a, const ScoredId& b);

// Exactly the entries with low <= p <= high, most uncertain first.
std::vector<ScoredId> select_uncertain(const std::vector<ScoredId>& probs, const UncertaintyBand& band = {});

// A document leaves the queue once one label holds a strict majority of its
// votes and at least required_votes / 2 + 1 of them.
struct VotePolicy {
  std::size_t required_votes = 1;

  std::size_t majority() const { return required_votes / 2 + 1; }
};

struct Annotation {
  std::string doc_id;
  AnnotationVote vote;
};

enum class AnnotationStatus : std::uint8_t { human_labeled, still_queued, tie, already_labeled, unknown_id };

std::string_view to_string(AnnotationStatus s);

struct AnnotationOutcome {
  std::string doc_id;
  AnnotationStatus status = AnnotationStatus::still_queued;
};

// Resolved label under `policy`, nullopt while the document stays queued.
std::optional<Label> resolve_votes(const std::vector<AnnotationVote>& votes, const VotePolicy& policy);

// Merges the batch (a later vote by the same annotator replaces the earlier
// one), then resolves each touched document once. Human labels are final:
// votes for them are ignored and reported as already_labeled. Unknown ids
// throw ValidationError naming them; the dataset is untouched in that case.
std::vector<AnnotationOutcome> apply_labels(Dataset& ds, const std::vector<Annotation>& batch,
                                            const VotePolicy& policy = {});

// Like apply_labels but unknown ids are reported per item instead of thrown.
std::vector<AnnotationOutcome> apply_labels_lenient(Dataset& ds, const std::vector<Annotation>& batch,
                                                    const VotePolicy& policy = {});

using DocumentScorer = std::function<double(const DocumentRecord&)>;

// Every non-human example gets provenance machine, the rounded probability
// and the label it implies (p >= 0.5 -> ethics). Pending votes are kept.
void machine_label_remainder(Dataset& ds, const DocumentScorer& score);

// Fraction of positions with equal labels. Throws on length mismatch or empty input.
double agreement_rate(const std::vector<Label>& a, const std::vector<Label>& b);

// Non-human documents whose probability is in the band, plus documents with
// unresolved votes, most uncertain first. `probs` is aligned with the dataset.
std::vector<ScoredId> build_queue(const Dataset& ds, const std::vector<double>& probs,
                                  const UncertaintyBand& band = {});

}  // namespace ethidx
