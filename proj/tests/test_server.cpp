#include <doctest.h>

#include <httplib.h>
#include <json.hpp>

#include <sstream>
#include <thread>

#include "ethidx/annotation_server.hpp"
#include "oracles.hpp"

using namespace ethidx;
using json = nlohmann::json;

namespace {

Dataset planted_dataset(std::size_t n, std::uint64_t seed) {
  std::vector<DocumentRecord> docs;
  for (const auto& d : oracle::planted_corpus(n, 0.25, seed)) docs.push_back({d.id, d.title, d.abstract, {}, {}, {}});
  return Dataset::from_documents(std::move(docs));
}

std::vector<oracle::PlantedDoc> truth(std::size_t n, std::uint64_t seed) { return oracle::planted_corpus(n, 0.25, seed); }

ServiceConfig fast_config() {
  ServiceConfig cfg;
  cfg.classifier.forest.n_estimators = 16;
  cfg.policy = VotePolicy{1};
  return cfg;
}

// Labels the first `count` documents of each class with one annotator.
std::vector<LabelSubmission> seed_labels(const std::vector<oracle::PlantedDoc>& docs, std::size_t count) {
  std::vector<LabelSubmission> out;
  std::size_t pos = 0, neg = 0;
  for (const auto& d : docs) {
    auto& c = d.label == Label::ethics ? pos : neg;
    if (c == count) continue;
    ++c;
    out.push_back({d.id, "seed", std::string(to_string(d.label)), std::nullopt});
  }
  return out;
}

}  // namespace

TEST_CASE("service: no model means no queue") {
  AnnotationService svc(planted_dataset(20, 1), fast_config());
  CHECK_THROWS_AS(svc.get_queue(5, "alice"), ServiceStateError);
  CHECK(svc.status().model_version == 0);
  CHECK_FALSE(svc.status().model_fingerprint);
}

TEST_CASE("service: retrain needs both classes") {
  const auto docs = truth(20, 2);
  AnnotationService svc(planted_dataset(20, 2), fast_config());
  std::vector<LabelSubmission> only_neg;
  for (const auto& d : docs)
    if (d.label == Label::not_ethics) only_neg.push_back({d.id, "a", "not_ethics", std::nullopt});
  svc.post_labels(only_neg);
  CHECK_THROWS_AS(svc.retrain(1), ServiceStateError);
}

TEST_CASE("service: label, retrain, queue") {
  const auto docs = truth(40, 3);
  AnnotationService svc(planted_dataset(40, 3), fast_config());
  const auto results = svc.post_labels(seed_labels(docs, 5));
  for (const auto& r : results) {
    CHECK(r.accepted);
    CHECK(r.status == "human_labeled");
  }
  const auto s1 = svc.retrain(42);
  CHECK(s1.model_version == 1);
  CHECK(s1.training_docs == 10);
  REQUIRE(s1.cv);
  CHECK(s1.cv->per_fold.size() == 4);

  const auto s2 = svc.retrain(42);
  CHECK(s2.model_version == 2);
  CHECK(s2.model_fingerprint == s1.model_fingerprint);

  const auto q = svc.get_queue(100, "alice");
  CHECK(q.size() == s2.queue_size);
  for (const auto& item : q) {
    CHECK(item.machine_probability >= 1.0 / 3.0);
    CHECK(item.machine_probability <= 2.0 / 3.0);
  }
  CHECK(svc.get_queue(0, "alice").empty());

  const auto st = svc.status();
  CHECK(st.counts.human == 10);
  CHECK(st.counts.unlabeled == 30);
}

TEST_CASE("service: invalid and repeated submissions") {
  AnnotationService svc(planted_dataset(10, 4), fast_config());
  const auto r = svc.post_labels({{"doc0", "a", "maybe", std::nullopt},
                                  {"doc0", "", "ethics", std::nullopt},
                                  {"missing", "a", "ethics", std::nullopt},
                                  {"doc1", "a", "ethics", std::nullopt}});
  CHECK(r[0].status == "invalid");
  CHECK(r[1].status == "invalid");
  CHECK(r[2].status == "unknown_id");
  CHECK(r[3].status == "human_labeled");
  CHECK(r[3].accepted);
  const auto again = svc.post_labels({{"doc1", "b", "not_ethics", std::nullopt}});
  CHECK(again[0].status == "already_labeled");
  CHECK_FALSE(again[0].accepted);
}

TEST_CASE("service: concurrent votes are all recorded") {
  const auto docs = truth(30, 5);
  auto cfg = fast_config();
  cfg.policy = VotePolicy{9};  // majority 5; split 4/4 votes never resolve
  AnnotationService svc(planted_dataset(30, 5), cfg);
  std::vector<std::jthread> workers;
  for (int t = 0; t < 8; ++t)
    workers.emplace_back([&, t] {
      const std::string label = t % 2 ? "ethics" : "not_ethics";
      for (const auto& d : docs) svc.post_labels({{d.id, "ann" + std::to_string(t), label, std::nullopt}});
    });
  workers.clear();
  const auto snap = svc.snapshot();
  for (const auto& ex : snap) {
    CHECK(ex.votes.size() == 8);
    validate(ex);
  }
}

TEST_CASE("service: retrain while votes arrive") {
  const auto docs = truth(40, 6);
  AnnotationService svc(planted_dataset(40, 6), fast_config());
  svc.post_labels(seed_labels(docs, 4));
  std::jthread voter([&] {
    for (const auto& d : docs) svc.post_labels({{d.id, "late", std::string(to_string(d.label)), std::nullopt}});
  });
  const auto s = svc.retrain(9);
  voter.join();
  CHECK(s.model_version == 1);
  const auto snap = svc.snapshot();
  CHECK(snap.counts().human == 40);
  for (const auto& ex : snap) validate(ex);
}

TEST_CASE("http endpoints") {
  const auto docs = truth(40, 7);
  AnnotationService svc(planted_dataset(40, 7), fast_config());
  AnnotationHttpServer server(svc);
  const int port = server.bind_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread loop([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  auto res = cli.Get("/api/queue?limit=5&annotator=alice");
  REQUIRE(res);
  CHECK(res->status == 409);
  res = cli.Get("/api/queue?limit=5");
  REQUIRE(res);
  CHECK(res->status == 400);

  json labels = json::array();
  for (const auto& s : seed_labels(docs, 5)) labels.push_back({{"id", s.doc_id}, {"annotator_id", "bob"}, {"label", s.label}});
  res = cli.Post("/api/labels", labels.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto body = json::parse(res->body);
  CHECK(body["results"].size() == 10);
  CHECK(body["results"][0]["accepted"] == true);

  res = cli.Post("/api/labels", json{{"labels", {{{"id", "nope"}, {"annotator_id", "bob"}, {"label", "ethics"}}}}}.dump(),
                 "application/json");
  REQUIRE(res);
  CHECK(res->status == 207);
  CHECK(json::parse(res->body)["results"][0]["status"] == "unknown_id");

  res = cli.Post("/api/labels", "{not json", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);

  res = cli.Post("/api/retrain", "", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  res = cli.Post("/api/retrain", json{{"seed", 3}}.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto retrain = json::parse(res->body);
  CHECK(retrain["model_version"] == 1);
  CHECK(retrain["training_docs"] == 10);
  CHECK(retrain["model_fingerprint"].get<std::string>().size() == 16);
  CHECK(retrain["cv"].is_object());

  res = cli.Get("/api/queue?limit=3&annotator=alice");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto queue = json::parse(res->body);
  CHECK(queue.is_array());
  CHECK(queue.size() <= 3);
  for (const auto& item : queue) {
    CHECK(item.contains("title"));
    CHECK(item["votes_so_far"] == 0);
  }

  res = cli.Get("/api/status");
  REQUIRE(res);
  const auto status = json::parse(res->body);
  CHECK(status["model_version"] == 1);
  CHECK(status["counts"]["human"] == 10);
  CHECK(status["counts"]["total"] == 40);
  CHECK(status["class_balance"]["ethics"] == 5);
  CHECK(status["ethics_proportion"] == 0.5);

  res = cli.Get("/api/export");
  REQUIRE(res);
  CHECK(res->status == 200);
  std::istringstream exported(res->body);
  const auto ds = load_dataset(exported);
  CHECK(ds.size() == 40);
  CHECK(ds.counts().human == 10);

  server.stop();
  loop.join();
}

TEST_CASE("service: an annotator never sees documents they voted on") {
  const auto docs = truth(40, 8);
  auto cfg = fast_config();
  AnnotationService svc(planted_dataset(40, 8), cfg);
  svc.post_labels(seed_labels(docs, 5));
  svc.retrain(1);

  // Switch to a three-vote rule so alice's votes stay pending.
  AnnotationService three(svc.snapshot(), [&] {
    auto c = cfg;
    c.policy = VotePolicy{3};
    return c;
  }());
  three.retrain(1);
  const auto before = three.get_queue(1000, "alice");
  REQUIRE(before.size() >= 2);
  three.post_labels({{before[0].id, "alice", "ethics", std::nullopt}, {before[1].id, "alice", "not_ethics", std::nullopt}});
  const auto alice = three.get_queue(1000, "alice");
  const auto bob = three.get_queue(1000, "bob");
  CHECK(alice.size() == before.size() - 2);
  CHECK(bob.size() == before.size());
  for (const auto& q : alice) {
    CHECK(q.id != before[0].id);
    CHECK(q.id != before[1].id);
  }
  for (const auto& q : bob)
    if (q.id == before[0].id) CHECK(q.votes_so_far == 1);
}

TEST_CASE("service: queue order and limit") {
  const auto docs = truth(120, 9);
  AnnotationService svc(planted_dataset(120, 9), fast_config());
  svc.post_labels(seed_labels(docs, 3));
  svc.retrain(2);
  const auto all = svc.get_queue(1000, "carol");
  const auto top = svc.get_queue(10, "carol");
  REQUIRE(top.size() == std::min<std::size_t>(10, all.size()));
  for (std::size_t i = 0; i < top.size(); ++i) CHECK(top[i].id == all[i].id);
  for (std::size_t i = 1; i < all.size(); ++i)
    CHECK(std::abs(all[i - 1].machine_probability - 0.5) <= std::abs(all[i].machine_probability - 0.5));
}

TEST_CASE("service: queue after retrain equals the recomputed band membership") {
  const auto docs = truth(60, 10);
  const auto cfg = fast_config();
  AnnotationService svc(planted_dataset(60, 10), cfg);
  svc.post_labels(seed_labels(docs, 4));
  svc.retrain(3);
  svc.post_labels(seed_labels(docs, 8));
  const auto s = svc.retrain(3);

  const auto snap = svc.snapshot();
  const auto model = fit_classifier(human_training_docs(snap), cfg.classifier, 3);
  std::size_t expected = 0;
  for (const auto& ex : snap)
    if (ex.provenance != Provenance::human && (cfg.band.contains(model.predict(ex.doc)) || !ex.votes.empty())) ++expected;
  CHECK(s.queue_size == expected);
  CHECK(svc.get_queue(1000, "nobody").size() == expected);
}
