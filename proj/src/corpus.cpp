#include "ethidx/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "ethidx/errors.hpp"

namespace ethidx {

using json = nlohmann::json;

namespace {

constexpr std::string_view kDatasetFormat = "ethidx-dataset";
constexpr int kDatasetVersion = 1;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string string_field(const json& obj, const char* key, bool required) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (required) throw std::invalid_argument(fmt::format("missing field '{}'", key));
    return {};
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number()) return it->dump();
  throw std::invalid_argument(fmt::format("field '{}' must be a string", key));
}

std::optional<int> year_field(const json& obj) {
  auto it = obj.find("year");
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (it->is_number_integer()) return it->get<int>();
  if (it->is_string()) {
    const auto s = it->get<std::string>();
    if (!s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
      return std::stoi(s);
  }
  throw std::invalid_argument("field 'year' must be an integer");
}

std::optional<std::string> venue_field(const json& obj) {
  auto it = obj.find("venue");
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw std::invalid_argument("field 'venue' must be a string");
  return it->get<std::string>();
}

std::vector<std::string> categories_field(const json& obj) {
  std::vector<std::string> out;
  auto it = obj.find("categories");
  if (it == obj.end() || it->is_null()) return out;
  if (it->is_string()) {
    std::istringstream ss(it->get<std::string>());
    for (std::string tag; ss >> tag;) out.push_back(tag);
    return out;
  }
  if (!it->is_array()) throw std::invalid_argument("field 'categories' must be an array of strings");
  for (const auto& c : *it) {
    if (!c.is_string()) throw std::invalid_argument("field 'categories' must be an array of strings");
    out.push_back(c.get<std::string>());
  }
  return out;
}

json doc_fields(const DocumentRecord& d) {
  json j;
  j["id"] = d.id;
  j["title"] = d.title;
  j["abstract"] = d.abstract;
  j["categories"] = d.categories;
  j["venue"] = d.venue ? json(*d.venue) : json(nullptr);
  j["year"] = d.year ? json(*d.year) : json(nullptr);
  return j;
}

DocumentRecord doc_from_json(const json& obj) {
  DocumentRecord d;
  d.id = string_field(obj, "id", true);
  d.title = string_field(obj, "title", true);
  d.abstract = string_field(obj, "abstract", false);
  d.categories = categories_field(obj);
  d.venue = venue_field(obj);
  d.year = year_field(obj);
  return d;
}

}  // namespace

std::string DocumentRecord::full_text() const {
  if (abstract.empty()) return title;
  return title + " " + abstract;
}

std::string_view to_string(Label l) { return l == Label::ethics ? "ethics" : "not_ethics"; }

Label label_from_string(std::string_view s) {
  if (s == "ethics") return Label::ethics;
  if (s == "not_ethics") return Label::not_ethics;
  throw ParseError(fmt::format("unknown label '{}'", s));
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::human: return "human";
    case Provenance::machine: return "machine";
    case Provenance::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Provenance provenance_from_string(std::string_view s) {
  if (s == "human") return Provenance::human;
  if (s == "machine") return Provenance::machine;
  if (s == "unlabeled") return Provenance::unlabeled;
  throw ParseError(fmt::format("unknown provenance '{}'", s));
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                     hms.hours().count(), hms.minutes().count(), hms.seconds().count());
}

Timestamp parse_timestamp(std::string_view s) {
  using namespace std::chrono;
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  char z = 0;
  const std::string str(s);
  if (std::sscanf(str.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u%c", &y, &mo, &d, &h, &mi, &sec, &z) != 7 ||
      z != 'Z' || str.size() != 20)
    throw ParseError(fmt::format("bad timestamp '{}'", s));
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 59) throw ParseError(fmt::format("bad timestamp '{}'", s));
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec};
}

void validate(const LabeledExample& ex) {
  const auto& id = ex.doc.id;
  if (id.empty()) throw ValidationError("document id is empty");
  if (ex.doc.title.empty()) throw ValidationError(fmt::format("document '{}' has an empty title", id));
  for (std::size_t i = 0; i < ex.votes.size(); ++i)
    for (std::size_t j = i + 1; j < ex.votes.size(); ++j)
      if (ex.votes[i].annotator_id == ex.votes[j].annotator_id)
        throw ValidationError(fmt::format("document '{}' has two votes from annotator '{}'", id,
                                          ex.votes[i].annotator_id));
  if (ex.machine_probability) {
    const double p = *ex.machine_probability;
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError(fmt::format("document '{}' has machine_probability {} outside [0,1]", id, p));
  }
  switch (ex.provenance) {
    case Provenance::human: {
      if (ex.votes.empty()) throw ValidationError(fmt::format("human-labeled document '{}' has no votes", id));
      const auto majority = majority_vote(ex.votes);
      if (!majority || !ex.label || *majority != *ex.label)
        throw ValidationError(fmt::format("human label of '{}' disagrees with its votes", id));
      break;
    }
    case Provenance::machine:
      if (!ex.machine_probability)
        throw ValidationError(fmt::format("machine-labeled document '{}' has no probability", id));
      if (!ex.label || *ex.label != label_from_probability(*ex.machine_probability))
        throw ValidationError(fmt::format("machine label of '{}' disagrees with its probability", id));
      break;
    case Provenance::unlabeled:
      if (ex.label) throw ValidationError(fmt::format("unlabeled document '{}' carries a label", id));
      break;
  }
}

ParseResult parse_metadata(std::istream& in) {
  ParseResult result;
  std::unordered_map<std::string, std::size_t> first_line;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    DocumentRecord d;
    try {
      const json obj = json::parse(line);
      if (!obj.is_object()) throw std::invalid_argument("record is not an object");
      d = doc_from_json(obj);
    } catch (const json::exception& e) {
      result.issues.push_back({lineno, fmt::format("malformed record: {}", e.what())});
      continue;
    } catch (const std::invalid_argument& e) {
      result.issues.push_back({lineno, fmt::format("malformed record: {}", e.what())});
      continue;
    }
    if (d.id.empty()) {
      result.issues.push_back({lineno, "malformed record: empty id"});
      continue;
    }
    if (d.title.empty()) {
      result.issues.push_back({lineno, fmt::format("record '{}' skipped: empty title", d.id)});
      continue;
    }
    auto [it, inserted] = first_line.emplace(d.id, lineno);
    if (!inserted)
      throw ParseError(fmt::format("duplicate id '{}' (first seen on line {})", d.id, it->second), lineno);
    result.records.push_back(std::move(d));
  }
  if (in.bad()) throw IoError("error while reading metadata stream");
  return result;
}

ParseResult parse_metadata_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  return parse_metadata(in);
}

void write_metadata(std::ostream& out, const std::vector<DocumentRecord>& docs) {
  for (const auto& d : docs) out << doc_fields(d).dump() << '\n';
  if (!out) throw IoError("error while writing metadata");
}

CategoryFilter CategoryFilter::defaults() {
  return {
      {"cs.cy", "Computers and Society"},
      {"cs.AI", "Artificial Intelligence", "cs.CL", "Computation and Language", "cs.CV", "Computer Vision",
       "Pattern Recognition", "cs.MA", "Multiagent Systems", "cs.LG", "Learning", "cs.NE",
       "Neural and Evolutionary Computing", "stat.ML", "Machine Learning"},
  };
}

bool matches_any(const std::vector<std::string>& categories, const std::vector<std::string>& terms) {
  for (const auto& cat : categories) {
    const auto c = lower(cat);
    for (const auto& term : terms)
      if (c.find(lower(term)) != std::string::npos) return true;
  }
  return false;
}

std::vector<DocumentRecord> filter_candidates(const std::vector<DocumentRecord>& docs,
                                              const CategoryFilter& f) {
  if (f.ethics_tags.empty() || f.ai_tags.empty())
    throw PreconditionError("category filter needs at least one ethics tag and one AI tag");
  std::vector<DocumentRecord> out;
  std::copy_if(docs.begin(), docs.end(), std::back_inserter(out), [&](const DocumentRecord& d) {
    return matches_any(d.categories, f.ethics_tags) && matches_any(d.categories, f.ai_tags);
  });
  return out;
}

std::optional<Label> majority_vote(const std::vector<AnnotationVote>& votes) {
  if (votes.empty()) throw PreconditionError("majority vote over zero votes");
  std::size_t ethics = 0;
  for (std::size_t i = 0; i < votes.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j)
      if (votes[i].annotator_id == votes[j].annotator_id)
        throw PreconditionError(fmt::format("annotator '{}' voted twice", votes[i].annotator_id));
    if (votes[i].label == Label::ethics) ++ethics;
  }
  const std::size_t others = votes.size() - ethics;
  if (ethics > others) return Label::ethics;
  if (others > ethics) return Label::not_ethics;
  return std::nullopt;
}

void merge_vote(std::vector<AnnotationVote>& votes, const AnnotationVote& v) {
  auto it = std::find_if(votes.begin(), votes.end(),
                         [&](const AnnotationVote& o) { return o.annotator_id == v.annotator_id; });
  if (it == votes.end())
    votes.push_back(v);
  else
    *it = v;
}

Dataset::Dataset(std::vector<LabeledExample> examples) {
  examples_.reserve(examples.size());
  for (auto& ex : examples) push_back(std::move(ex));
}

Dataset Dataset::from_documents(std::vector<DocumentRecord> docs) {
  Dataset ds;
  for (auto& d : docs) {
    LabeledExample ex;
    ex.doc = std::move(d);
    ds.push_back(std::move(ex));
  }
  return ds;
}

std::optional<std::size_t> Dataset::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Dataset::push_back(LabeledExample ex) {
  auto [it, inserted] = index_.emplace(ex.doc.id, examples_.size());
  if (!inserted) throw ValidationError(fmt::format("duplicate document id '{}'", ex.doc.id));
  examples_.push_back(std::move(ex));
}

ProvenanceCounts Dataset::counts() const {
  ProvenanceCounts c;
  for (const auto& ex : examples_) {
    switch (ex.provenance) {
      case Provenance::human: ++c.human; break;
      case Provenance::machine: ++c.machine; break;
      case Provenance::unlabeled: ++c.unlabeled; break;
    }
    if (ex.label) (*ex.label == Label::ethics ? c.ethics : c.not_ethics) += 1;
  }
  return c;
}

double round_probability(double p) { return std::round(p * 1e6) / 1e6; }

void save_dataset(std::ostream& out, const Dataset& ds) {
  out << json{{"format", kDatasetFormat}, {"version", kDatasetVersion}}.dump() << '\n';
  for (const auto& ex : ds) {
    validate(ex);
    json j = doc_fields(ex.doc);
    j["label"] = ex.label ? json(to_string(*ex.label)) : json(nullptr);
    j["provenance"] = to_string(ex.provenance);
    j["machine_probability"] =
        ex.machine_probability ? json(round_probability(*ex.machine_probability)) : json(nullptr);
    json votes = json::array();
    for (const auto& v : ex.votes)
      votes.push_back({{"annotator_id", v.annotator_id},
                       {"label", to_string(v.label)},
                       {"timestamp", format_timestamp(v.timestamp)}});
    j["votes"] = std::move(votes);
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("error while writing dataset");
}

void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path));
  save_dataset(out, ds);
}

Dataset load_dataset(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  Dataset ds;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("malformed JSON: {}", e.what()), lineno);
    }
    if (!obj.is_object()) throw ParseError("record is not an object", lineno);
    if (!header_seen) {
      if (obj.value("format", "") != kDatasetFormat) throw ParseError("missing dataset header", lineno);
      if (obj.value("version", 0) != kDatasetVersion)
        throw ParseError(fmt::format("unsupported dataset version {}", obj.value("version", 0)), lineno);
      header_seen = true;
      continue;
    }
    LabeledExample ex;
    try {
      ex.doc = doc_from_json(obj);
      const auto label = obj.find("label");
      if (label != obj.end() && !label->is_null()) ex.label = label_from_string(label->get<std::string>());
      ex.provenance = provenance_from_string(obj.at("provenance").get<std::string>());
      const auto prob = obj.find("machine_probability");
      if (prob != obj.end() && !prob->is_null()) ex.machine_probability = prob->get<double>();
      const auto votes = obj.find("votes");
      if (votes != obj.end() && !votes->is_null()) {
        for (const auto& v : *votes)
          ex.votes.push_back({v.at("annotator_id").get<std::string>(),
                              label_from_string(v.at("label").get<std::string>()),
                              parse_timestamp(v.at("timestamp").get<std::string>())});
      }
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("bad field: {}", e.what()), lineno);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), lineno);
    }
    try {
      validate(ex);
      ds.push_back(std::move(ex));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("line {}: {}", lineno, e.what()));
    }
  }
  if (in.bad()) throw IoError("error while reading dataset");
  if (!header_seen) throw ParseError("missing dataset header");
  return ds;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  return load_dataset(in);
}

}  // namespace ethidx
