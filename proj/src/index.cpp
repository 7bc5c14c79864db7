#include "ethidx/index.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "ethidx/errors.hpp"

namespace ethidx {

namespace {

bool decision_less(const DocDecision& a, const DocDecision& b) {
  if (*a.venue != *b.venue) return *a.venue < *b.venue;
  if (*a.year != *b.year) return *a.year < *b.year;
  return a.id < b.id;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string file_stem(std::string_view venue) {
  std::string out;
  for (unsigned char c : venue) out += std::isalnum(c) ? static_cast<char>(c) : '_';
  return out.empty() ? "venue" : out;
}

}  // namespace

std::vector<DocDecision> classify_corpus(const std::vector<DocumentRecord>& docs,
                                         const std::function<double(const DocumentRecord&)>& score,
                                         const KeywordList& keywords, double threshold) {
  std::vector<DocDecision> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    const auto text = d.full_text();
    out.push_back({d.id, d.title, d.venue, d.year, score(d) >= threshold ? Label::ethics : Label::not_ethics,
                   keyword_classify(text, keywords)});
  }
  return out;
}

IndexReport aggregate_index(const std::vector<DocDecision>& decisions) {
  std::map<std::pair<std::string, int>, VenueYearCell> cells;
  IndexReport report;
  for (const auto& d : decisions) {
    if (!d.venue || d.venue->empty() || !d.year)
      throw ValidationError(fmt::format("document '{}' has no venue/year", d.id));
    auto& cell = cells[{*d.venue, *d.year}];
    cell.venue = *d.venue;
    cell.year = *d.year;
    ++cell.n_docs;
    if (d.model == Label::ethics) ++cell.n_ethics_model;
    if (d.keyword == Label::ethics) ++cell.n_ethics_keyword;
    if (d.model != d.keyword) report.disagreements.push_back(d);
  }
  for (auto& [key, cell] : cells) report.cells.push_back(std::move(cell));
  std::sort(report.disagreements.begin(), report.disagreements.end(), decision_less);
  return report;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_cells(std::ostream& out, const IndexReport& report) {
  out << kCellsHeader << '\n';
  for (const auto& c : report.cells)
    out << fmt::format("{},{},{},{},{},{:.4f},{:.4f}\n", csv_field(c.venue), c.year, c.n_docs, c.n_ethics_model,
                       c.n_ethics_keyword, c.proportion_model(), c.proportion_keyword());
}

void write_disagreements(std::ostream& out, const IndexReport& report) {
  out << kDisagreementsHeader << '\n';
  for (const auto& d : report.disagreements)
    out << fmt::format("{},{},{},{},{},{}\n", csv_field(*d.venue), *d.year, csv_field(d.id), csv_field(d.title),
                       to_string(d.model), to_string(d.keyword));
}

void export_report(const IndexReport& report, const std::string& cells_path, const std::string& disagreements_path) {
  std::ofstream cells(cells_path, std::ios::trunc | std::ios::binary);
  if (!cells) throw IoError(fmt::format("cannot write '{}'", cells_path));
  write_cells(cells, report);
  std::ofstream dis(disagreements_path, std::ios::trunc | std::ios::binary);
  if (!dis) throw IoError(fmt::format("cannot write '{}'", disagreements_path));
  write_disagreements(dis, report);
  if (!cells || !dis) throw IoError("error while writing index report");
}

std::string render_venue_svg(const IndexReport& report, const std::string& venue) {
  std::vector<const VenueYearCell*> cells;
  for (const auto& c : report.cells)
    if (c.venue == venue) cells.push_back(&c);
  if (cells.empty()) throw PreconditionError(fmt::format("no cells for venue '{}'", venue));

  constexpr double W = 640, H = 360, left = 56, right = 16, top = 40, bottom = 48;
  const int y0 = cells.front()->year, y1 = cells.back()->year;
  std::size_t ymax = 1;
  for (auto* c : cells) ymax = std::max({ymax, c->n_ethics_model, c->n_ethics_keyword});
  auto px = [&](int year) {
    return y1 == y0 ? left + (W - left - right) / 2 : left + (W - left - right) * (year - y0) / double(y1 - y0);
  };
  auto py = [&](std::size_t v) { return H - bottom - (H - top - bottom) * double(v) / double(ymax); };

  std::ostringstream s;
  s << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">)", W, H,
                   W, H)
    << '\n';
  s << fmt::format(R"(<rect width="{}" height="{}" fill="white"/>)", W, H) << '\n';
  s << fmt::format(R"(<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>)",
                   W / 2, xml_escape(venue))
    << '\n';
  s << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>)", left, H - bottom, W - right,
                   H - bottom)
    << '\n';
  s << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>)", left, top, left, H - bottom) << '\n';
  for (auto* c : cells)
    s << fmt::format(
             R"(<text x="{:.1f}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>)",
             px(c->year), H - bottom + 16, c->year)
      << '\n';
  for (std::size_t v : {std::size_t{0}, ymax})
    s << fmt::format(
             R"(<text x="{}" y="{:.1f}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>)",
             left - 6, py(v) + 3, v)
      << '\n';

  auto series = [&](std::size_t VenueYearCell::*field, const char* color, const char* name, int slot) {
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < cells.size(); ++i)
      s << fmt::format("{}{:.1f},{:.1f}", i ? " " : "", px(cells[i]->year), py(cells[i]->*field));
    s << "\"/>\n";
    for (auto* c : cells)
      s << fmt::format(R"(<circle cx="{:.1f}" cy="{:.1f}" r="3" fill="{}"/>)", px(c->year), py(c->*field), color)
        << '\n';
    const double lx = left + 10 + 140 * slot;
    s << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="2"/>)", lx, H - 12, lx + 20,
                     H - 12, color)
      << '\n';
    s << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>)", lx + 26, H - 8, name)
      << '\n';
  };
  series(&VenueYearCell::n_ethics_model, "#1f77b4", "model", 0);
  series(&VenueYearCell::n_ethics_keyword, "#d62728", "keyword", 1);
  s << "</svg>\n";
  return s.str();
}

std::vector<std::string> export_plots(const IndexReport& report, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir, ec.message()));
  std::set<std::string> venues;
  for (const auto& c : report.cells) venues.insert(c.venue);
  std::vector<std::string> written;
  for (const auto& v : venues) {
    const auto path = (std::filesystem::path(dir) / (file_stem(v) + ".svg")).string();
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path));
    out << render_venue_svg(report, v);
    written.push_back(path);
  }
  return written;
}

}  // namespace ethidx
