#pragma once

// Paper metadata ingestion, candidate filtering and the labeled dataset.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ethidx {

struct DocumentRecord {
  std::string id;
  std::string title;
  std::string abstract;  // may be empty for title-only venues
  std::vector<std::string> categories;
  std::optional<std::string> venue;
  std::optional<int> year;

  bool operator==(const DocumentRecord&) const = default;

  bool has_abstract() const { return !abstract.empty(); }
  // Title and abstract joined by a space, or the title alone when there is no abstract.
  std::string full_text() const;
};

enum class Label : std::uint8_t { not_ethics = 0, ethics = 1 };

std::string_view to_string(Label l);
Label label_from_string(std::string_view s);  // throws ParseError
inline int to_int(Label l) { return l == Label::ethics ? 1 : 0; }
inline Label label_from_probability(double p) { return p >= 0.5 ? Label::ethics : Label::not_ethics; }

enum class Provenance : std::uint8_t { unlabeled, human, machine };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

using Timestamp = std::chrono::sys_seconds;

// ISO-8601 UTC with second precision, e.g. "2019-10-23T12:00:00Z".
std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(std::string_view s);

struct AnnotationVote {
  std::string annotator_id;
  Label label = Label::not_ethics;
  Timestamp timestamp{};

  bool operator==(const AnnotationVote&) const = default;
};

struct LabeledExample {
  DocumentRecord doc;
  std::optional<Label> label;
  Provenance provenance = Provenance::unlabeled;
  std::vector<AnnotationVote> votes;
  std::optional<double> machine_probability;

  bool operator==(const LabeledExample&) const = default;
};

// Throws ValidationError describing the first broken invariant.
void validate(const LabeledExample& ex);

// ---------------------------------------------------------------------------
// Ingestion

struct ParseIssue {
  std::size_t line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<DocumentRecord> records;
  std::vector<ParseIssue> issues;  // malformed lines and skipped records
};

// One JSON object per line with id, title, abstract, categories and optional
// venue/year. `categories` may be an array or a whitespace-separated string.
// Blank lines are ignored. Duplicate ids throw ParseError naming both lines.
ParseResult parse_metadata(std::istream& in);
ParseResult parse_metadata_file(const std::string& path);

// Serializes in the ingestion format (round-trips through parse_metadata).
void write_metadata(std::ostream& out, const std::vector<DocumentRecord>& docs);

// ---------------------------------------------------------------------------
// Candidate filtering

struct CategoryFilter {
  std::vector<std::string> ethics_tags;
  std::vector<std::string> ai_tags;

  static CategoryFilter defaults();
};

// Keeps docs that carry an ethics tag and an AI tag. A filter term matches a
// category when it occurs inside it, ignoring case.
std::vector<DocumentRecord> filter_candidates(const std::vector<DocumentRecord>& docs,
                                              const CategoryFilter& f);

bool matches_any(const std::vector<std::string>& categories, const std::vector<std::string>& terms);

// ---------------------------------------------------------------------------
// Voting

// Label held by strictly more than half of the votes; nullopt on an exact tie.
// Throws PreconditionError on empty input or a repeated annotator.
std::optional<Label> majority_vote(const std::vector<AnnotationVote>& votes);

// Adds `v`, replacing an earlier vote by the same annotator.
void merge_vote(std::vector<AnnotationVote>& votes, const AnnotationVote& v);

// ---------------------------------------------------------------------------
// Dataset

struct ProvenanceCounts {
  std::size_t human = 0;
  std::size_t machine = 0;
  std::size_t unlabeled = 0;
  std::size_t ethics = 0;
  std::size_t not_ethics = 0;

  std::size_t total() const { return human + machine + unlabeled; }
};

// Ordered collection of labeled examples with id lookup. Owned by a single
// writer; copies are cheap snapshots for readers.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<LabeledExample> examples);

  static Dataset from_documents(std::vector<DocumentRecord> docs);

  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }

  const std::vector<LabeledExample>& examples() const { return examples_; }
  const LabeledExample& at(std::size_t i) const { return examples_.at(i); }
  LabeledExample& at(std::size_t i) { return examples_.at(i); }

  std::optional<std::size_t> find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id).has_value(); }

  void push_back(LabeledExample ex);

  ProvenanceCounts counts() const;

  bool operator==(const Dataset& o) const { return examples_ == o.examples_; }

  auto begin() const { return examples_.begin(); }
  auto end() const { return examples_.end(); }

 private:
  std::vector<LabeledExample> examples_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Machine probabilities are stored with 6 decimals.
double round_probability(double p);

// First line is a header object; each following line one example.
void save_dataset(std::ostream& out, const Dataset& ds);
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(std::istream& in);
Dataset load_dataset(const std::string& path);

}  // namespace ethidx
