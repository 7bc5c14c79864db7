#pragma once

// Per-venue, per-year ethics counts under the learned model and the keyword
// baseline, plus the documents on which the two disagree.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ethidx/baseline.hpp"
#include "ethidx/corpus.hpp"

namespace ethidx {

struct DocDecision {
  std::string id;
  std::string title;
  std::optional<std::string> venue;
  std::optional<int> year;
  Label model = Label::not_ethics;
  Label keyword = Label::not_ethics;
};

// Model decision: score(doc) >= threshold on title + abstract (title alone when
// the abstract is empty). Keyword decision on the same text.
std::vector<DocDecision> classify_corpus(const std::vector<DocumentRecord>& docs,
                                         const std::function<double(const DocumentRecord&)>& score,
                                         const KeywordList& keywords, double threshold = 0.5);

struct VenueYearCell {
  std::string venue;
  int year = 0;
  std::size_t n_docs = 0;
  std::size_t n_ethics_model = 0;
  std::size_t n_ethics_keyword = 0;

  double proportion_model() const { return n_docs ? static_cast<double>(n_ethics_model) / n_docs : 0.0; }
  double proportion_keyword() const { return n_docs ? static_cast<double>(n_ethics_keyword) / n_docs : 0.0; }
  bool operator==(const VenueYearCell&) const = default;
};

struct IndexReport {
  std::vector<VenueYearCell> cells;       // sorted by (venue, year)
  std::vector<DocDecision> disagreements;  // sorted by (venue, year, id)
};

// One cell per observed (venue, year). Throws ValidationError naming the
// first document without venue or year.
IndexReport aggregate_index(const std::vector<DocDecision>& decisions);

inline constexpr std::string_view kCellsHeader =
    "venue,year,n_docs,n_ethics_model,n_ethics_keyword,proportion_model,proportion_keyword";
inline constexpr std::string_view kDisagreementsHeader = "venue,year,id,title,model_decision,keyword_decision";

// RFC 4180 quoting when the field holds a comma, quote or newline.
std::string csv_field(std::string_view s);

void write_cells(std::ostream& out, const IndexReport& report);
void write_disagreements(std::ostream& out, const IndexReport& report);
void export_report(const IndexReport& report, const std::string& cells_path, const std::string& disagreements_path);

// Standalone SVG line chart of ethics counts per year for one venue, with a
// model series and a keyword series.
std::string render_venue_svg(const IndexReport& report, const std::string& venue);

// Writes one <venue>.svg per venue into `dir`; returns the paths written.
std::vector<std::string> export_plots(const IndexReport& report, const std::string& dir);

}  // namespace ethidx
