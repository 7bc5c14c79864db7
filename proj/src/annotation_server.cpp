#include "ethidx/annotation_server.hpp"

#include <algorithm>
#include <sstream>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

namespace ethidx {

using json = nlohmann::json;

AnnotationService::AnnotationService(Dataset ds, ServiceConfig cfg, std::optional<TextClassifier> model)
    : cfg_(std::move(cfg)), ds_(std::move(ds)) {
  if (model) {
    std::ostringstream bytes;
    model->save(bytes);
    fingerprint_ = fingerprint(bytes.str());
    model_ = std::make_shared<const TextClassifier>(std::move(*model));
    version_ = 1;
    rescore_locked();
  }
}

void AnnotationService::rescore_locked() {
  probs_.assign(ds_.size(), 0.5);
  if (!model_) return;
  for (std::size_t i = 0; i < ds_.size(); ++i) probs_[i] = model_->predict(ds_.at(i).doc);
}

std::vector<QueueItem> AnnotationService::get_queue(std::size_t limit, const std::string& annotator_id) const {
  std::shared_lock lock(mu_);
  if (!model_) throw ServiceStateError("no model loaded; POST /api/retrain first");
  std::vector<QueueItem> out;
  if (limit == 0) return out;
  for (const auto& item : build_queue(ds_, probs_, cfg_.band)) {
    const auto& ex = ds_.at(*ds_.find(item.id));
    const bool voted = std::any_of(ex.votes.begin(), ex.votes.end(),
                                   [&](const AnnotationVote& v) { return v.annotator_id == annotator_id; });
    if (voted) continue;
    out.push_back({ex.doc.id, ex.doc.title, ex.doc.abstract, item.probability, ex.votes.size()});
    if (out.size() == limit) break;
  }
  return out;
}

std::vector<SubmissionResult> AnnotationService::post_labels(const std::vector<LabelSubmission>& batch) {
  std::vector<SubmissionResult> results(batch.size());
  std::vector<Annotation> valid;
  std::vector<std::size_t> valid_pos;
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i];
    results[i].doc_id = s.doc_id;
    if (s.annotator_id.empty() || (s.label != "ethics" && s.label != "not_ethics")) {
      results[i].status = "invalid";
      continue;
    }
    valid.push_back({s.doc_id, {s.annotator_id, label_from_string(s.label), s.timestamp.value_or(now)}});
    valid_pos.push_back(i);
  }

  std::unique_lock lock(mu_);
  const auto outcomes = apply_labels_lenient(ds_, valid, cfg_.policy);
  for (std::size_t j = 0; j < valid.size(); ++j) {
    const auto it = std::find_if(outcomes.begin(), outcomes.end(),
                                 [&](const AnnotationOutcome& o) { return o.doc_id == valid[j].doc_id; });
    auto& r = results[valid_pos[j]];
    r.status = std::string(to_string(it->status));
    r.accepted = it->status != AnnotationStatus::unknown_id && it->status != AnnotationStatus::already_labeled;
  }
  return results;
}

RetrainSummary AnnotationService::retrain(std::uint64_t seed) {
  std::lock_guard retrain_lock(retrain_mu_);
  Dataset snap = snapshot();
  const auto docs = human_training_docs(snap);
  const auto ethics = std::count_if(docs.begin(), docs.end(), [](const TrainingDoc& d) { return d.label == Label::ethics; });
  if (ethics == 0 || static_cast<std::size_t>(ethics) == docs.size())
    throw ServiceStateError(fmt::format("retraining needs human labels of both classes ({} ethics, {} not_ethics)",
                                        ethics, docs.size() - static_cast<std::size_t>(ethics)));

  RetrainSummary summary;
  summary.training_docs = docs.size();
  const auto k = cfg_.cv_folds;
  if (k >= 2 && static_cast<std::size_t>(ethics) >= k && docs.size() - static_cast<std::size_t>(ethics) >= k)
    summary.cv = cross_validate_classifier(docs, cfg_.classifier, k, seed);

  auto model = std::make_shared<const TextClassifier>(fit_classifier(docs, cfg_.classifier, seed));
  std::ostringstream bytes;
  model->save(bytes);
  const auto fp = fingerprint(bytes.str());

  std::vector<double> probs(snap.size());
  for (std::size_t i = 0; i < snap.size(); ++i) probs[i] = model->predict(snap.at(i).doc);

  std::unique_lock lock(mu_);
  // Documents are never added while serving, so indices still line up.
  model_ = std::move(model);
  probs_ = std::move(probs);
  fingerprint_ = fp;
  summary.model_version = ++version_;
  summary.model_fingerprint = fp;
  summary.queue_size = build_queue(ds_, probs_, cfg_.band).size();
  return summary;
}

ServiceStatus AnnotationService::status() const {
  std::shared_lock lock(mu_);
  ServiceStatus s;
  s.model_version = version_;
  s.model_fingerprint = fingerprint_;
  s.counts = ds_.counts();
  if (model_) s.queue_size = build_queue(ds_, probs_, cfg_.band).size();
  return s;
}

std::string AnnotationService::export_dataset() const {
  std::ostringstream out;
  save_dataset(out, snapshot());
  return out.str();
}

Dataset AnnotationService::snapshot() const {
  std::shared_lock lock(mu_);
  return ds_;
}

// ---------------------------------------------------------------------------
// HTTP binding

namespace {

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply_json(res, status, json{{"error", message}});
}

json metrics_json(const MetricsReport& m) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json folds = json::array();
  for (const auto& f : m.per_fold)
    folds.push_back({{"roc_auc", f.roc_auc}, {"precision", opt(f.precision)}, {"recall", opt(f.recall)}});
  return {{"roc_auc", m.roc_auc},
          {"precision", opt(m.precision)},
          {"recall", opt(m.recall)},
          {"threshold", m.threshold},
          {"per_fold", folds}};
}

std::string hex(std::uint64_t v) { return fmt::format("{:016x}", v); }

}  // namespace

AnnotationHttpServer::AnnotationHttpServer(AnnotationService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

AnnotationHttpServer::~AnnotationHttpServer() { stop(); }

void AnnotationHttpServer::install_routes() {
  auto& svc = service_;

  server_->Get("/api/queue", [&svc](const httplib::Request& req, httplib::Response& res) {
    std::size_t limit = 20;
    if (req.has_param("limit")) {
      try {
        limit = std::stoul(req.get_param_value("limit"));
      } catch (const std::exception&) {
        return reply_error(res, 400, "limit must be a nonnegative integer");
      }
    }
    const auto annotator = req.get_param_value("annotator");
    if (annotator.empty()) return reply_error(res, 400, "annotator is required");
    try {
      json items = json::array();
      for (const auto& q : svc.get_queue(limit, annotator))
        items.push_back({{"id", q.id},
                         {"title", q.title},
                         {"abstract", q.abstract},
                         {"machine_probability", q.machine_probability},
                         {"votes_so_far", q.votes_so_far}});
      reply_json(res, 200, items);
    } catch (const ServiceStateError& e) {
      reply_error(res, 409, e.what());
    }
  });

  server_->Post("/api/labels", [&svc](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      return reply_error(res, 400, fmt::format("malformed JSON: {}", e.what()));
    }
    const json* items = &body;
    if (body.is_object() && body.contains("labels")) items = &body["labels"];
    if (!items->is_array()) return reply_error(res, 400, "expected an array of labels");

    std::vector<LabelSubmission> batch;
    for (const auto& it : *items) {
      LabelSubmission s;
      if (it.is_object()) {
        if (it.contains("id") && it["id"].is_string()) s.doc_id = it["id"].get<std::string>();
        if (it.contains("annotator_id") && it["annotator_id"].is_string())
          s.annotator_id = it["annotator_id"].get<std::string>();
        if (it.contains("label") && it["label"].is_string()) s.label = it["label"].get<std::string>();
        if (it.contains("timestamp") && it["timestamp"].is_string()) {
          try {
            s.timestamp = parse_timestamp(it["timestamp"].get<std::string>());
          } catch (const ParseError&) {
            s.label.clear();  // reported as invalid
          }
        }
      }
      batch.push_back(std::move(s));
    }
    const auto results = svc.post_labels(batch);
    json out = json::array();
    bool all_ok = true;
    for (const auto& r : results) {
      out.push_back({{"id", r.doc_id}, {"status", r.status}, {"accepted", r.accepted}});
      all_ok = all_ok && r.accepted;
    }
    reply_json(res, all_ok ? 200 : 207, json{{"results", out}});
  });

  server_->Post("/api/retrain", [&svc](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::uint64_t> seed;
    if (req.has_param("seed")) {
      try {
        seed = std::stoull(req.get_param_value("seed"));
      } catch (const std::exception&) {
        return reply_error(res, 400, "seed must be an unsigned integer");
      }
    } else if (!req.body.empty()) {
      try {
        const auto body = json::parse(req.body);
        if (body.contains("seed") && body["seed"].is_number_unsigned()) seed = body["seed"].get<std::uint64_t>();
      } catch (const json::exception&) {
        return reply_error(res, 400, "malformed JSON");
      }
    }
    if (!seed) return reply_error(res, 400, "seed is required");
    try {
      const auto s = svc.retrain(*seed);
      json body{{"model_version", s.model_version},
                {"model_fingerprint", hex(s.model_fingerprint)},
                {"training_docs", s.training_docs},
                {"queue_size", s.queue_size},
                {"cv", s.cv ? metrics_json(*s.cv) : json(nullptr)}};
      reply_json(res, 200, body);
    } catch (const ServiceStateError& e) {
      reply_error(res, 409, e.what());
    } catch (const Error& e) {
      reply_error(res, 500, e.what());
    }
  });

  server_->Get("/api/status", [&svc](const httplib::Request&, httplib::Response& res) {
    const auto s = svc.status();
    const auto labeled = s.counts.ethics + s.counts.not_ethics;
    json body{{"model_version", s.model_version},
              {"model_fingerprint", s.model_fingerprint ? json(hex(*s.model_fingerprint)) : json(nullptr)},
              {"counts",
               {{"human", s.counts.human},
                {"machine", s.counts.machine},
                {"unlabeled", s.counts.unlabeled},
                {"total", s.counts.total()}}},
              {"class_balance", {{"ethics", s.counts.ethics}, {"not_ethics", s.counts.not_ethics}}},
              {"ethics_proportion", labeled ? json(double(s.counts.ethics) / double(labeled)) : json(nullptr)},
              {"queue_size", s.queue_size}};
    reply_json(res, 200, body);
  });

  server_->Get("/api/export", [&svc](const httplib::Request&, httplib::Response& res) {
    res.status = 200;
    res.set_content(svc.export_dataset(), "application/x-ndjson");
  });
}

bool AnnotationHttpServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

int AnnotationHttpServer::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool AnnotationHttpServer::listen_after_bind() { return server_->listen_after_bind(); }

void AnnotationHttpServer::stop() {
  if (server_) server_->stop();
}

void AnnotationHttpServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace ethidx
