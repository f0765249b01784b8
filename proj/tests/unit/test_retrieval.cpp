#include "hornet/retrieval.hpp"
#include "hornet/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>

using namespace hornet;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
  return m;
}

RetrievalRun random_run(std::size_t Q, std::size_t G, std::size_t ids, std::size_t cams, Rng& rng,
                        bool quantize = false) {
  RetrievalRun run;
  for (std::size_t q = 0; q < Q; ++q) {
    run.query_ids.push_back(rng.below(ids));
    run.query_cams.push_back(rng.below(cams));
  }
  for (std::size_t g = 0; g < G; ++g) {
    run.gallery_ids.push_back(rng.below(ids));
    run.gallery_cams.push_back(rng.below(cams));
  }
  run.distances.resize(Q, G);
  for (std::size_t q = 0; q < Q; ++q)
    for (std::size_t g = 0; g < G; ++g) {
      const double d = rng.uniform(0.0, 2.0);
      // Coarse values force ties so the index tie-break is exercised.
      run.distances(q, g) = quantize ? std::floor(d * 4.0) / 4.0 : d;
    }
  return run;
}

void check_against_oracle(const RetrievalRun& run) {
  const auto brute = oracle::brute_force_metrics(run.distances, run.query_ids, run.query_cams,
                                                 run.gallery_ids, run.gallery_cams);
  const auto curve = cmc(run);
  const auto ap = mean_ap(run);
  CHECK(curve.num_queries == brute.valid);
  CHECK(curve.excluded_queries == brute.excluded);
  CHECK(ap.excluded_queries == brute.excluded);
  REQUIRE(curve.curve.size() == brute.cmc.size());
  for (std::size_t k = 0; k < brute.cmc.size(); ++k) CHECK(curve.curve[k] == brute.cmc[k]);
  CHECK(std::abs(ap.map - brute.map) <= 1e-12);
}

}  // namespace

TEST_CASE("euclidean distance of a set to itself has a zero diagonal") {
  Rng rng(1);
  const auto X = random_matrix(6, 4, rng);
  const auto D = distance_matrix(X, X, DistanceMetric::euclidean);
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(D(i, i) == 0.0);
  CHECK((D.array() >= 0.0).all());
}

TEST_CASE("1-D points 0 and 3 are 9 apart squared") {
  Eigen::MatrixXd a(1, 1), b(1, 1);
  a << 0.0;
  b << 3.0;
  CHECK(distance_matrix(a, b, DistanceMetric::squared_euclidean)(0, 0) == 9.0);
  CHECK(distance_matrix(a, b, DistanceMetric::euclidean)(0, 0) == 3.0);
}

TEST_CASE("random 5x7 distances match a per-pair scalar computation") {
  Rng rng(2);
  const auto Q = random_matrix(5, 3, rng), G = random_matrix(7, 3, rng);
  const auto De = distance_matrix(Q, G, DistanceMetric::euclidean);
  const auto Dc = distance_matrix(Q, G, DistanceMetric::cosine);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 7; ++j) {
      double ss = 0.0, dot = 0.0, nq = 0.0, ng = 0.0;
      for (int k = 0; k < 3; ++k) {
        ss += (Q(i, k) - G(j, k)) * (Q(i, k) - G(j, k));
        dot += Q(i, k) * G(j, k);
        nq += Q(i, k) * Q(i, k);
        ng += G(j, k) * G(j, k);
      }
      CHECK(De(i, j) == doctest::Approx(std::sqrt(ss)).epsilon(1e-14));
      CHECK(Dc(i, j) == doctest::Approx(1.0 - dot / std::sqrt(nq * ng)).epsilon(1e-12));
    }
}

TEST_CASE("cosine rejects a zero vector; mismatched dimensions are rejected") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(1, 3), b = Eigen::MatrixXd::Ones(2, 3);
  CHECK_THROWS(distance_matrix(a, b, DistanceMetric::cosine));
  CHECK_THROWS(distance_matrix(b, Eigen::MatrixXd::Ones(2, 4), DistanceMetric::euclidean));
}

TEST_CASE("metric names round-trip") {
  for (auto m : {DistanceMetric::euclidean, DistanceMetric::squared_euclidean, DistanceMetric::cosine})
    CHECK(distance_metric_from_string(to_string(m)) == m);
  CHECK_THROWS(distance_metric_from_string("manhattan"));
}

TEST_CASE("perfect embeddings give CMC@1 = 1 and mAP = 1") {
  RetrievalRun run;
  run.query_ids = {0, 1};
  run.query_cams = {0, 0};
  run.gallery_ids = {0, 1, 0, 1};
  run.gallery_cams = {1, 1, 2, 2};
  run.distances.resize(2, 4);
  run.distances << 0, 5, 0, 5, 5, 0, 5, 0;
  CHECK(cmc(run).at(1) == 1.0);
  CHECK(mean_ap(run).map == 1.0);
}

TEST_CASE("adversarial instance: true match always second of three") {
  RetrievalRun run;
  run.query_ids = {0, 1};
  run.query_cams = {0, 0};
  run.gallery_ids = {0, 1, 2};
  run.gallery_cams = {1, 1, 1};
  run.distances.resize(2, 3);
  run.distances << 0.5, 0.2, 0.9,  // id 0 behind id 1
      0.3, 0.6, 0.9;              // id 1 behind id 0
  const auto c = cmc(run);
  CHECK(c.at(1) == 0.0);
  CHECK(c.at(2) == 1.0);
  CHECK(mean_ap(run).map == 0.5);
}

TEST_CASE("single positive at rank 2 gives AP 0.5") {
  RetrievalRun run;
  run.query_ids = {7};
  run.query_cams = {0};
  run.gallery_ids = {3, 7, 4};
  run.gallery_cams = {1, 1, 1};
  run.distances.resize(1, 3);
  run.distances << 0.1, 0.2, 0.3;
  CHECK(mean_ap(run).map == 0.5);
}

TEST_CASE("ties are broken by gallery index") {
  RetrievalRun run;
  run.query_ids = {0};
  run.query_cams = {0};
  run.gallery_ids = {1, 0};
  run.gallery_cams = {1, 1};
  run.distances = Eigen::MatrixXd::Constant(1, 2, 0.4);
  CHECK(ranked_gallery(run, 0) == std::vector<std::size_t>{0, 1});
  CHECK(cmc(run).at(1) == 0.0);
}

TEST_CASE("queries without a cross-camera positive are excluded and counted") {
  RetrievalRun run;
  run.query_ids = {0, 1};
  run.query_cams = {0, 0};
  run.gallery_ids = {0, 1};
  run.gallery_cams = {0, 1};  // query 0's only match shares its camera
  run.distances.resize(2, 2);
  run.distances << 1.0, 2.0, 2.0, 1.0;
  const auto report = evaluate_run(run);
  CHECK(report.num_queries == 1);
  CHECK(report.excluded_queries == 1);
  CHECK(report.map == 1.0);
}

TEST_CASE("random 20x50 instances match the exhaustive oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) check_against_oracle(random_run(20, 50, 6, 3, rng, trial % 2));
}

TEST_CASE("property: CMC is non-decreasing and reaches 1 at G") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto run = random_run(10, 30, 5, 3, rng);
    const auto c = cmc(run);
    for (std::size_t k = 1; k < c.curve.size(); ++k) CHECK(c.curve[k] >= c.curve[k - 1]);
    CHECK(c.at(30) == 1.0);
    const double m = mean_ap(run).map;
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
  }
}

TEST_CASE("property: metrics are invariant under d -> d^2 + 1") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto run = random_run(15, 40, 6, 3, rng);
    const auto before = evaluate_run(run);
    run.distances = (run.distances.array().square() + 1.0).matrix();
    const auto after = evaluate_run(run);
    CHECK(before.map == after.map);
    CHECK(before.cmc == after.cmc);
  }
}

TEST_CASE("property: a same-camera duplicate of the query changes nothing") {
  Rng rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    auto run = random_run(1, 25, 5, 3, rng);
    const auto before = evaluate_run(run);
    run.gallery_ids.push_back(run.query_ids[0]);
    run.gallery_cams.push_back(run.query_cams[0]);
    run.distances.conservativeResize(Eigen::NoChange, run.distances.cols() + 1);
    run.distances(0, run.distances.cols() - 1) = 0.0;
    const auto after = evaluate_run(run);
    CHECK(before.num_queries == after.num_queries);
    CHECK(before.map == after.map);
    CHECK(before.cmc == after.cmc);
  }
}

TEST_CASE("metrics report JSON round-trip uses the documented keys") {
  Rng rng(7);
  const auto r = evaluate_run(random_run(10, 30, 5, 3, rng));
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j.contains("mAP"));
  CHECK(j.at("cmc").contains("1"));
  CHECK(j.at("cmc").contains("20"));
  CHECK(j.contains("num_queries"));
  CHECK(j.contains("excluded_queries"));
  const auto back = MetricsReport::from_json(r.to_json());
  CHECK(back.map == r.map);
  CHECK(back.cmc == r.cmc);
}

TEST_CASE("rerank with lambda 1 returns the input matrix") {
  Rng rng(8);
  RetrievalRun run;
  run.query = random_matrix(6, 4, rng);
  run.gallery = random_matrix(25, 4, rng);
  run.compute_distances(DistanceMetric::euclidean);
  const auto out = k_reciprocal_rerank(run, DistanceMetric::euclidean, RerankOptions{20, 6, 1.0});
  CHECK(out == run.distances);
}

TEST_CASE("rerank is deterministic and keeps the shape") {
  Rng rng(9);
  RetrievalRun run;
  run.query = random_matrix(5, 3, rng);
  run.gallery = random_matrix(30, 3, rng);
  run.compute_distances(DistanceMetric::euclidean);
  const auto a = k_reciprocal_rerank(run, DistanceMetric::euclidean, RerankOptions{});
  const auto b = k_reciprocal_rerank(run, DistanceMetric::euclidean, RerankOptions{});
  CHECK(a == b);
  CHECK(a.rows() == 5);
  CHECK(a.cols() == 30);
  CHECK((a.array() >= 0.0).all());
}

TEST_CASE("rerank keeps top-1 neighbours on a well separated instance") {
  // Five tight clusters far apart; every query's nearest gallery entry is in its cluster.
  Rng rng(10);
  RetrievalRun run;
  const int clusters = 5, per = 6;
  run.gallery.resize(clusters * per, 2);
  run.query.resize(clusters, 2);
  for (int c = 0; c < clusters; ++c) {
    for (int k = 0; k < per; ++k) {
      run.gallery(c * per + k, 0) = 100.0 * c + rng.uniform(-0.1, 0.1);
      run.gallery(c * per + k, 1) = rng.uniform(-0.1, 0.1);
      run.gallery_ids.push_back(c);
      run.gallery_cams.push_back(1);
    }
    run.query(c, 0) = 100.0 * c;
    run.query(c, 1) = 0.0;
    run.query_ids.push_back(c);
    run.query_cams.push_back(0);
  }
  run.compute_distances(DistanceMetric::euclidean);
  const auto before = evaluate_run(run);
  auto reranked = run;
  reranked.distances =
      k_reciprocal_rerank(run, DistanceMetric::euclidean, RerankOptions{4, 2, 0.3});
  const auto after = evaluate_run(reranked);
  CHECK(before.map == 1.0);
  CHECK(after.map == 1.0);
  CHECK(after.cmc.at(1) == 1.0);
}

TEST_CASE("rerank parameter validation") {
  const Eigen::MatrixXd qg = Eigen::MatrixXd::Ones(2, 10), qq = Eigen::MatrixXd::Zero(2, 2),
                        gg = Eigen::MatrixXd::Zero(10, 10);
  CHECK_THROWS(k_reciprocal_rerank(qg, qq, gg, RerankOptions{10, 2, 0.3}));  // k1 >= G
  CHECK_THROWS(k_reciprocal_rerank(qg, qq, gg, RerankOptions{3, 3, 0.3}));   // k1 <= k2
  CHECK_THROWS(k_reciprocal_rerank(qg, qq, gg, RerankOptions{3, 0, 0.3}));   // k2 < 1
  CHECK_THROWS(k_reciprocal_rerank(qg, qq, gg, RerankOptions{3, 1, 1.5}));   // lambda > 1
  CHECK_NOTHROW(k_reciprocal_rerank(qg, qq, gg, RerankOptions{3, 1, 0.0}));
}
