#pragma once

// Annotation service: queue, vote submission and retraining rounds, shared
// between concurrent HTTP handlers. AnnotationService holds the logic;
// AnnotationHttpServer maps it onto the JSON endpoints.

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "ethidx/active.hpp"
#include "ethidx/classifier.hpp"
#include "ethidx/corpus.hpp"
#include "ethidx/errors.hpp"

namespace httplib {
class Server;
}

namespace ethidx {

// The request is valid but the service is not in a state to serve it (HTTP 409).
class ServiceStateError : public Error {
 public:
  using Error::Error;
};

struct ServiceConfig {
  ClassifierConfig classifier;
  VotePolicy policy{3};
  UncertaintyBand band;
  std::size_t cv_folds = 4;
};

struct QueueItem {
  std::string id;
  std::string title;
  std::string abstract;
  double machine_probability = 0.0;
  std::size_t votes_so_far = 0;
};

struct LabelSubmission {
  std::string doc_id;
  std::string annotator_id;
  std::string label;  // validated on submission
  std::optional<Timestamp> timestamp;
};

struct SubmissionResult {
  std::string doc_id;
  std::string status;  // an AnnotationStatus name, or "invalid"
  bool accepted = false;
};

struct RetrainSummary {
  std::uint64_t model_version = 0;
  std::uint64_t model_fingerprint = 0;
  std::size_t training_docs = 0;
  std::size_t queue_size = 0;
  std::optional<MetricsReport> cv;  // absent when a class has fewer members than folds
};

struct ServiceStatus {
  std::uint64_t model_version = 0;
  std::optional<std::uint64_t> model_fingerprint;
  ProvenanceCounts counts;
  std::size_t queue_size = 0;
};

class AnnotationService {
 public:
  explicit AnnotationService(Dataset ds, ServiceConfig cfg = {}, std::optional<TextClassifier> model = std::nullopt);

  // Throws ServiceStateError when no model is loaded.
  std::vector<QueueItem> get_queue(std::size_t limit, const std::string& annotator_id) const;

  // Each document's votes are merged and resolved atomically.
  std::vector<SubmissionResult> post_labels(const std::vector<LabelSubmission>& batch);

  // Retrains on all human labels and recomputes queue probabilities.
  // Throws ServiceStateError unless both classes have human labels.
  RetrainSummary retrain(std::uint64_t seed);

  ServiceStatus status() const;
  std::string export_dataset() const;
  Dataset snapshot() const;

 private:
  void rescore_locked();

  ServiceConfig cfg_;
  mutable std::shared_mutex mu_;
  std::mutex retrain_mu_;
  Dataset ds_;
  std::shared_ptr<const TextClassifier> model_;
  std::vector<double> probs_;  // aligned with ds_
  std::uint64_t version_ = 0;
  std::optional<std::uint64_t> fingerprint_;
};

class AnnotationHttpServer {
 public:
  explicit AnnotationHttpServer(AnnotationService& service);
  ~AnnotationHttpServer();

  AnnotationHttpServer(const AnnotationHttpServer&) = delete;
  AnnotationHttpServer& operator=(const AnnotationHttpServer&) = delete;

  // Blocks until stop().
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and returns it; serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  void install_routes();

  AnnotationService& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace ethidx
