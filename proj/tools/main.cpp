// ethidx command-line entry point.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "ethidx/active.hpp"
#include "ethidx/annotation_server.hpp"
#include "ethidx/baseline.hpp"
#include "ethidx/classifier.hpp"
#include "ethidx/corpus.hpp"
#include "ethidx/errors.hpp"
#include "ethidx/eval.hpp"
#include "ethidx/index.hpp"
#include "ethidx/text.hpp"

namespace fs = std::filesystem;
using namespace ethidx;

namespace {

// Bad invocation detected after parsing (exit 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check_distinct(const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  for (const auto& out : outputs) {
    if (out.empty()) continue;
    for (const auto& in : inputs) {
      if (in.empty()) continue;
      std::error_code ec;
      if (fs::weakly_canonical(in, ec) == fs::weakly_canonical(out, ec))
        throw UsageError(fmt::format("output '{}' would overwrite input '{}'", out, in));
    }
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError(fmt::format("cannot write '{}'", path));
  return f;
}

struct ModelOptions {
  std::string kind = "forest";
  std::optional<double> lambda;
  std::size_t trees = 512;
  std::size_t max_depth = 8;
  std::size_t threads = 1;
  std::size_t min_df = 1;
  bool no_lemmatize = false;
  std::string stopwords;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--model", kind, "Model family")->check(CLI::IsMember({"forest", "logistic"}))->capture_default_str();
    cmd->add_option("--lambda", lambda, "L1 strength for logistic (default: chosen by 4-fold CV)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--trees", trees, "Forest size")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--max-depth", max_depth, "Forest tree depth")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--threads", threads, "Worker threads, 0 = all cores")->capture_default_str();
    cmd->add_option("--min-df", min_df, "Drop terms in fewer documents")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_flag("--no-lemmatize", no_lemmatize, "Use raw tokens as features");
    cmd->add_option("--stopwords", stopwords, "File with one stopword per line")->check(CLI::ExistingFile);
  }

  ClassifierConfig config() const {
    ClassifierConfig cfg;
    cfg.kind = model_kind_from_string(kind);
    cfg.min_df = min_df;
    cfg.text.lemmatize = !no_lemmatize;
    if (!stopwords.empty())
      for (auto& w : load_word_list(stopwords)) cfg.text.stopwords.insert(std::move(w));
    if (lambda) cfg.logistic.lambda = *lambda;
    cfg.forest.n_estimators = trees;
    cfg.forest.max_depth = max_depth;
    cfg.forest.n_threads = threads;
    return cfg;
  }
};

std::vector<TrainingDoc> load_training_docs(const std::string& path) {
  const auto docs = human_training_docs(load_dataset(path));
  if (docs.empty()) throw PreconditionError(fmt::format("'{}' has no human-labeled documents", path));
  return docs;
}

// doc id, annotator id, label[, timestamp]; '#' lines and blank lines are skipped.
std::vector<Annotation> load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  std::vector<Annotation> out;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, '\t');) f.push_back(cell);
    if (f.size() < 3 || f.size() > 4)
      throw ParseError(fmt::format("{}: expected id, annotator, label[, timestamp]", path), lineno);
    try {
      out.push_back({f[0], {f[1], label_from_string(f[2]), f.size() == 4 ? parse_timestamp(f[3]) : now}});
    } catch (const ParseError& e) {
      throw ParseError(fmt::format("{}: {}", path, e.what()), lineno);
    }
  }
  return out;
}

std::atomic<bool> g_stop{false};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ethidx: learned ethics index for AI research papers"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every verb");

  // ingest
  std::string ingest_in, ingest_out;
  auto* ingest = app.add_subcommand("ingest", "Parse a metadata dump (JSON lines) into an unlabeled dataset");
  ingest->add_option("--input", ingest_in, "Metadata file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", ingest_out, "Dataset file to write")->required();

  // filter
  std::string filter_in, filter_out;
  std::vector<std::string> ethics_tags, ai_tags;
  bool require_abstract = false;
  auto* filter = app.add_subcommand("filter", "Keep documents carrying an ethics tag and an AI tag");
  filter->add_option("--dataset", filter_in, "Dataset file")->required()->check(CLI::ExistingFile);
  filter->add_option("--out", filter_out, "Filtered dataset file")->required();
  filter->add_option("--ethics-tag", ethics_tags, "Replaces the default ethics tags (repeatable)");
  filter->add_option("--ai-tag", ai_tags, "Replaces the default AI tags (repeatable)");
  filter->add_flag("--require-abstract", require_abstract, "Also drop documents without an abstract");

  // train
  std::string train_in, train_out, train_keywords;
  std::uint64_t train_seed = 0;
  ModelOptions train_opts;
  auto* train = app.add_subcommand("train", "Fit a classifier on the human labels of a dataset");
  train->add_option("--dataset", train_in, "Dataset file")->required()->check(CLI::ExistingFile);
  train->add_option("--model-out", train_out, "Classifier file to write")->required();
  train->add_option("--seed", train_seed, "Random seed")->required();
  train->add_option("--keywords-out", train_keywords, "Logistic only: write signed keywords here");
  train_opts.add_to(train);

  // cv
  std::string cv_in, cv_out;
  std::uint64_t cv_seed = 0;
  std::size_t cv_k = 4;
  ModelOptions cv_opts;
  auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation on the human labels");
  cv->add_option("--dataset", cv_in, "Dataset file")->required()->check(CLI::ExistingFile);
  cv->add_option("--out", cv_out, "Metrics file (TSV); stdout when omitted");
  cv->add_option("--k", cv_k, "Folds")->check(CLI::Range(2, 100))->capture_default_str();
  cv->add_option("--seed", cv_seed, "Random seed")->required();
  cv_opts.add_to(cv);

  // select
  std::string select_in, select_model, select_out;
  double low = 1.0 / 3.0, high = 2.0 / 3.0;
  std::optional<std::uint64_t> select_seed;
  auto* select = app.add_subcommand("select", "Write the uncertainty queue for the next labeling round");
  select->add_option("--dataset", select_in, "Dataset file")->required()->check(CLI::ExistingFile);
  select->add_option("--model", select_model, "Classifier file")->required()->check(CLI::ExistingFile);
  select->add_option("--out", select_out, "Queue file (TSV); stdout when omitted");
  select->add_option("--low", low, "Lower band edge")->check(CLI::Range(0.0, 1.0));
  select->add_option("--high", high, "Upper band edge")->check(CLI::Range(0.0, 1.0));
  select->add_option("--seed", select_seed, "Accepted for uniformity; selection is deterministic");

  // label
  std::string label_in, label_batch, label_out;
  std::size_t required_votes = 1;
  auto* label = app.add_subcommand("label", "Apply a batch of human votes");
  label->add_option("--dataset", label_in, "Dataset file")->required()->check(CLI::ExistingFile);
  label->add_option("--annotations", label_batch, "TSV: doc id, annotator id, label[, timestamp]")
      ->required()
      ->check(CLI::ExistingFile);
  label->add_option("--out", label_out, "Updated dataset file")->required();
  label->add_option("--required-votes", required_votes, "Votes a document needs before it resolves")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // propagate
  std::string prop_in, prop_model, prop_out;
  auto* propagate = app.add_subcommand("propagate", "Machine-label every document without a human label");
  propagate->add_option("--dataset", prop_in, "Dataset file")->required()->check(CLI::ExistingFile);
  propagate->add_option("--model", prop_model, "Classifier file")->required()->check(CLI::ExistingFile);
  propagate->add_option("--out", prop_out, "Updated dataset file")->required();

  // baseline
  std::string base_in, base_out, base_keywords, base_mode = "raw";
  auto* baseline = app.add_subcommand("baseline", "Score the keyword classifier against human labels");
  baseline->add_option("--dataset", base_in, "Dataset file")->required()->check(CLI::ExistingFile);
  baseline->add_option("--out", base_out, "Metrics file (TSV); stdout when omitted");
  baseline->add_option("--keyword-mode", base_mode, "Keyword list form")
      ->check(CLI::IsMember({"raw", "lemmatized"}))
      ->capture_default_str();
  baseline->add_option("--keywords", base_keywords, "Custom keyword list")->check(CLI::ExistingFile);

  // index
  std::string index_in, index_model, cells_out, dis_out, plot_dir, index_keywords, index_mode = "raw";
  double index_threshold = 0.5;
  auto* index = app.add_subcommand("index", "Per-venue, per-year ethics counts: model vs keywords");
  index->add_option("--input", index_in, "Metadata file with venue and year")->required()->check(CLI::ExistingFile);
  index->add_option("--model", index_model, "Classifier file")->required()->check(CLI::ExistingFile);
  index->add_option("--cells-out", cells_out, "Cells CSV")->required();
  index->add_option("--disagreements-out", dis_out, "Disagreements CSV")->required();
  index->add_option("--plot", plot_dir, "Directory for per-venue SVG charts");
  index->add_option("--keyword-mode", index_mode, "Keyword list form")
      ->check(CLI::IsMember({"raw", "lemmatized"}))
      ->capture_default_str();
  index->add_option("--keywords", index_keywords, "Custom keyword list")->check(CLI::ExistingFile);
  index->add_option("--threshold", index_threshold, "Model decision threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  // serve
  std::string serve_in, serve_model, serve_out, host = "127.0.0.1";
  int port = 8080;
  std::size_t serve_votes = 3;
  ModelOptions serve_opts;
  auto* serve = app.add_subcommand("serve", "Run the annotation HTTP service");
  serve->add_option("--dataset", serve_in, "Dataset file")->required()->check(CLI::ExistingFile);
  serve->add_option("--model-file", serve_model, "Initial classifier file (otherwise retrain first)")->check(CLI::ExistingFile);
  serve->add_option("--out", serve_out, "Dataset file written on shutdown");
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port")->check(CLI::Range(0, 65535))->capture_default_str();
  serve->add_option("--required-votes", serve_votes, "Votes a document needs before it resolves")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  serve->add_option("--low", low, "Lower band edge")->check(CLI::Range(0.0, 1.0));
  serve->add_option("--high", high, "Upper band edge")->check(CLI::Range(0.0, 1.0));
  serve_opts.add_to(serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ingest) {
      check_distinct({ingest_in}, {ingest_out});
      auto parsed = parse_metadata_file(ingest_in);
      for (const auto& issue : parsed.issues) fmt::print(stderr, "{}:{}: {}\n", ingest_in, issue.line, issue.message);
      const auto n = parsed.records.size();
      save_dataset(ingest_out, Dataset::from_documents(std::move(parsed.records)));
      fmt::print("{} documents, {} skipped lines\n", n, parsed.issues.size());
    } else if (*filter) {
      check_distinct({filter_in}, {filter_out});
      auto f = CategoryFilter::defaults();
      if (!ethics_tags.empty()) f.ethics_tags = ethics_tags;
      if (!ai_tags.empty()) f.ai_tags = ai_tags;
      const auto ds = load_dataset(filter_in);
      std::vector<LabeledExample> kept;
      for (const auto& ex : ds) {
        if (require_abstract && !ex.doc.has_abstract()) continue;
        if (matches_any(ex.doc.categories, f.ethics_tags) && matches_any(ex.doc.categories, f.ai_tags))
          kept.push_back(ex);
      }
      const auto n = kept.size();
      save_dataset(filter_out, Dataset(std::move(kept)));
      fmt::print("{} of {} documents kept\n", n, ds.size());
    } else if (*train) {
      check_distinct({train_in}, {train_out, train_keywords});
      if (!train_keywords.empty() && train_opts.kind != "logistic")
        throw UsageError("--keywords-out needs --model logistic");
      const auto docs = load_training_docs(train_in);
      auto cfg = train_opts.config();
      if (cfg.kind == ModelKind::logistic && !train_opts.lambda) {
        const auto choice = select_lambda(docs, cfg, kDefaultLambdaGrid, 4, train_seed);
        for (const auto& [l, r] : choice.tried) fmt::print("lambda {:g}: mean roc_auc {:.4f}\n", l, r.roc_auc);
        cfg.logistic.lambda = choice.lambda;
        fmt::print("chose lambda {:g}\n", choice.lambda);
      }
      const auto model = fit_classifier(docs, cfg, train_seed);
      model.save(train_out);
      if (!train_keywords.empty()) {
        const auto kw = extract_signed_keywords(model.logistic(), model.vocabulary());
        auto out = open_out(train_keywords);
        for (const auto& t : kw.positives)
          fmt::print(out, "+\t{}\t{:.6g}\n", t, model.logistic().weights[*model.vocabulary().index_of(t)]);
        for (const auto& t : kw.negatives)
          fmt::print(out, "-\t{}\t{:.6g}\n", t, model.logistic().weights[*model.vocabulary().index_of(t)]);
      }
      fmt::print("trained {} on {} documents\n", to_string(cfg.kind), docs.size());
    } else if (*cv) {
      check_distinct({cv_in}, {cv_out});
      const auto docs = load_training_docs(cv_in);
      const auto cfg = cv_opts.config();
      if (cfg.kind == ModelKind::logistic && !cv_opts.lambda)
        fmt::print(stderr, "note: using lambda {:g}\n", cfg.logistic.lambda);
      const auto report = cross_validate_classifier(docs, cfg, cv_k, cv_seed);
      if (cv_out.empty()) {
        write_metrics(std::cout, report);
      } else {
        auto out = open_out(cv_out);
        write_metrics(out, report);
      }
    } else if (*select) {
      check_distinct({select_in, select_model}, {select_out});
      const UncertaintyBand band(low, high);
      const auto ds = load_dataset(select_in);
      const auto model = TextClassifier::load(select_model);
      std::vector<double> probs;
      for (const auto& ex : ds) probs.push_back(model.predict(ex.doc));
      const auto queue = build_queue(ds, probs, band);
      auto write = [&](std::ostream& out) {
        out << "id\tprobability\ttitle\n";
        for (const auto& q : queue)
          fmt::print(out, "{}\t{:.6f}\t{}\n", q.id, q.probability, ds.at(*ds.find(q.id)).doc.title);
      };
      if (select_out.empty()) {
        write(std::cout);
      } else {
        auto out = open_out(select_out);
        write(out);
        fmt::print("{} documents queued\n", queue.size());
      }
    } else if (*label) {
      check_distinct({label_in, label_batch}, {label_out});
      auto ds = load_dataset(label_in);
      const auto outcomes = apply_labels(ds, load_annotations(label_batch), VotePolicy{required_votes});
      std::map<std::string_view, std::size_t> tally;
      for (const auto& o : outcomes) ++tally[to_string(o.status)];
      save_dataset(label_out, ds);
      for (const auto& [status, n] : tally) fmt::print("{}: {}\n", status, n);
    } else if (*propagate) {
      check_distinct({prop_in, prop_model}, {prop_out});
      auto ds = load_dataset(prop_in);
      const auto model = TextClassifier::load(prop_model);
      machine_label_remainder(ds, [&](const DocumentRecord& d) { return model.predict(d); });
      save_dataset(prop_out, ds);
      const auto c = ds.counts();
      fmt::print("{} human, {} machine; {} ethics, {} not_ethics\n", c.human, c.machine, c.ethics, c.not_ethics);
    } else if (*baseline) {
      check_distinct({base_in, base_keywords}, {base_out});
      const auto mode = keyword_mode_from_string(base_mode);
      const auto list = base_keywords.empty() ? KeywordList::builtin(mode) : KeywordList::load(base_keywords, mode);
      std::vector<Label> truth, predicted;
      std::vector<double> scores;
      for (const auto& ex : load_dataset(base_in)) {
        if (ex.provenance != Provenance::human) continue;
        truth.push_back(*ex.label);
        predicted.push_back(keyword_classify(ex.doc.full_text(), list));
        scores.push_back(to_int(predicted.back()));
      }
      if (truth.empty()) throw PreconditionError(fmt::format("'{}' has no human-labeled documents", base_in));
      MetricsReport report;
      const auto m = score_predictions(scores, truth);
      report.roc_auc = m.roc_auc;
      report.precision = m.precision;
      report.recall = m.recall;
      report.per_fold = {m};
      if (base_out.empty()) {
        write_metrics(std::cout, report);
      } else {
        auto out = open_out(base_out);
        write_metrics(out, report);
      }
      fmt::print(stderr, "agreement with human labels: {:.4f}\n", agreement_rate(predicted, truth));
    } else if (*index) {
      check_distinct({index_in, index_model, index_keywords}, {cells_out, dis_out});
      const auto mode = keyword_mode_from_string(index_mode);
      const auto list = index_keywords.empty() ? KeywordList::builtin(mode) : KeywordList::load(index_keywords, mode);
      const auto parsed = parse_metadata_file(index_in);
      for (const auto& issue : parsed.issues) fmt::print(stderr, "{}:{}: {}\n", index_in, issue.line, issue.message);
      const auto model = TextClassifier::load(index_model);
      const auto decisions = classify_corpus(
          parsed.records, [&](const DocumentRecord& d) { return model.predict(d); }, list, index_threshold);
      const auto report = aggregate_index(decisions);
      export_report(report, cells_out, dis_out);
      if (!plot_dir.empty())
        for (const auto& p : export_plots(report, plot_dir)) fmt::print("wrote {}\n", p);
      fmt::print("{} cells, {} disagreements\n", report.cells.size(), report.disagreements.size());
    } else if (*serve) {
      check_distinct({serve_in, serve_model}, {serve_out});
      ServiceConfig cfg;
      cfg.classifier = serve_opts.config();
      cfg.policy = VotePolicy{serve_votes};
      cfg.band = UncertaintyBand(low, high);
      std::optional<TextClassifier> model;
      if (!serve_model.empty()) model = TextClassifier::load(serve_model);
      AnnotationService service(load_dataset(serve_in), cfg, std::move(model));
      AnnotationHttpServer server(service);

      // Signals are taken by a dedicated thread so shutdown runs outside a handler.
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);
      std::jthread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        g_stop = true;
        server.stop();
      });

      int bound = port;
      if (port == 0) {
        bound = server.bind_any_port(host);
        if (bound < 0) throw IoError(fmt::format("cannot bind {}", host));
      }
      fmt::print("listening on http://{}:{}\n", host, bound);
      std::fflush(stdout);
      const bool ok = port == 0 ? server.listen_after_bind() : server.listen(host, port);
      if (!g_stop) {
        // The listener failed on its own; release the signal thread.
        pthread_kill(waiter.native_handle(), SIGTERM);
        if (!ok) throw IoError(fmt::format("cannot listen on {}:{}", host, port));
      }
      if (!serve_out.empty()) save_dataset(serve_out, service.snapshot());
    }
  } catch (const UsageError& e) {
    fmt::print(stderr, "usage error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
