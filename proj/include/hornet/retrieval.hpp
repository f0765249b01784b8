#pragma once

// Retrieval evaluation under the cross-camera protocol: gallery entries that
// share both identity and camera with the query are dropped before ranking.

#include <Eigen/Core>

#include <map>
#include <string>
#include <vector>

namespace hornet {

enum class DistanceMetric { euclidean, squared_euclidean, cosine };

std::string to_string(DistanceMetric metric);
DistanceMetric distance_metric_from_string(const std::string& name);

// Rows of `query` and `gallery` are embeddings.
Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& query, const Eigen::MatrixXd& gallery,
                                DistanceMetric metric);

struct RetrievalRun {
  Eigen::MatrixXd query;
  Eigen::MatrixXd gallery;
  std::vector<std::size_t> query_ids, query_cams;
  std::vector<std::size_t> gallery_ids, gallery_cams;
  Eigen::MatrixXd distances;  // (Q, G)

  void compute_distances(DistanceMetric metric);
  void validate() const;
};

// Gallery indices that survive the same-id/same-camera filter, ordered by
// (distance, gallery index).
std::vector<std::size_t> ranked_gallery(const RetrievalRun& run, std::size_t query);

struct CmcCurve {
  std::vector<double> curve;  // curve[k-1] = CMC@k
  std::size_t num_queries = 0;
  std::size_t excluded_queries = 0;

  double at(std::size_t k) const;
};

CmcCurve cmc(const RetrievalRun& run);

struct MapResult {
  double map = 0.0;
  std::size_t num_queries = 0;
  std::size_t excluded_queries = 0;
};

MapResult mean_ap(const RetrievalRun& run);

struct MetricsReport {
  double map = 0.0;
  std::map<std::size_t, double> cmc;  // keys 1, 5, 10, 20
  std::size_t num_queries = 0;
  std::size_t excluded_queries = 0;

  std::string to_json(int indent = 2) const;
  static MetricsReport from_json(const std::string& text);
};

MetricsReport evaluate_run(const RetrievalRun& run);

struct RerankOptions {
  std::size_t k1 = 20;
  std::size_t k2 = 6;
  double lambda = 0.3;
};

// k-reciprocal re-ranking. Jaccard distances over expanded k-reciprocal
// neighbour sets are blended with the input query-gallery distances:
// (1 - lambda) * jaccard + lambda * q_g.
Eigen::MatrixXd k_reciprocal_rerank(const Eigen::MatrixXd& q_g, const Eigen::MatrixXd& q_q,
                                    const Eigen::MatrixXd& g_g, const RerankOptions& options);

// Uses the run's embeddings for the query-query and gallery-gallery blocks.
Eigen::MatrixXd k_reciprocal_rerank(const RetrievalRun& run, DistanceMetric metric,
                                    const RerankOptions& options);

}  // namespace hornet
