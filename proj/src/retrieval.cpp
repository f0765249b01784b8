#include "hornet/retrieval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hornet {

std::string to_string(DistanceMetric metric) {
  switch (metric) {
    case DistanceMetric::euclidean: return "euclidean";
    case DistanceMetric::squared_euclidean: return "squared_euclidean";
    case DistanceMetric::cosine: return "cosine";
  }
  return "?";
}

DistanceMetric distance_metric_from_string(const std::string& name) {
  if (name == "euclidean") return DistanceMetric::euclidean;
  if (name == "squared_euclidean") return DistanceMetric::squared_euclidean;
  if (name == "cosine") return DistanceMetric::cosine;
  throw std::invalid_argument("unknown distance metric '" + name + "'");
}

Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& query, const Eigen::MatrixXd& gallery,
                                DistanceMetric metric) {
  if (query.cols() != gallery.cols())
    throw std::invalid_argument("distance_matrix: embedding dimensions differ (" +
                                std::to_string(query.cols()) + " vs " +
                                std::to_string(gallery.cols()) + ")");
  Eigen::MatrixXd d(query.rows(), gallery.rows());
  if (metric == DistanceMetric::cosine) {
    const Eigen::VectorXd qn = query.rowwise().norm();
    const Eigen::VectorXd gn = gallery.rowwise().norm();
    if ((qn.array() == 0.0).any() || (gn.array() == 0.0).any())
      throw std::invalid_argument("distance_matrix: zero vector under cosine metric");
    for (Eigen::Index i = 0; i < query.rows(); ++i)
      for (Eigen::Index j = 0; j < gallery.rows(); ++j)
        d(i, j) = 1.0 - query.row(i).dot(gallery.row(j)) / (qn[i] * gn[j]);
    return d;
  }
  // Direct differences rather than the |q|^2 + |g|^2 - 2qg expansion, so
  // identical rows give exactly zero.
  for (Eigen::Index i = 0; i < query.rows(); ++i)
    for (Eigen::Index j = 0; j < gallery.rows(); ++j) {
      const double sq = (query.row(i) - gallery.row(j)).squaredNorm();
      d(i, j) = metric == DistanceMetric::euclidean ? std::sqrt(sq) : sq;
    }
  return d;
}

void RetrievalRun::compute_distances(DistanceMetric metric) {
  distances = distance_matrix(query, gallery, metric);
}

void RetrievalRun::validate() const {
  const auto q = static_cast<std::size_t>(distances.rows());
  const auto g = static_cast<std::size_t>(distances.cols());
  if (query_ids.size() != q || query_cams.size() != q || gallery_ids.size() != g ||
      gallery_cams.size() != g)
    throw std::invalid_argument("RetrievalRun: label arrays do not match the distance matrix");
}

std::vector<std::size_t> ranked_gallery(const RetrievalRun& run, std::size_t query) {
  const auto qi = static_cast<Eigen::Index>(query);
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < run.gallery_ids.size(); ++j)
    if (!(run.gallery_ids[j] == run.query_ids[query] &&
          run.gallery_cams[j] == run.query_cams[query]))
      order.push_back(j);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return run.distances(qi, static_cast<Eigen::Index>(a)) <
           run.distances(qi, static_cast<Eigen::Index>(b));
  });
  return order;
}

double CmcCurve::at(std::size_t k) const {
  if (curve.empty() || k == 0) return 0.0;
  return curve[std::min(k, curve.size()) - 1];
}

CmcCurve cmc(const RetrievalRun& run) {
  run.validate();
  const std::size_t g = run.gallery_ids.size();
  CmcCurve out;
  std::vector<double> hits(g, 0.0);
  for (std::size_t q = 0; q < run.query_ids.size(); ++q) {
    const auto order = ranked_gallery(run, q);
    std::size_t first = order.size();
    for (std::size_t r = 0; r < order.size(); ++r)
      if (run.gallery_ids[order[r]] == run.query_ids[q]) {
        first = r;
        break;
      }
    if (first == order.size()) {
      ++out.excluded_queries;
      continue;
    }
    ++out.num_queries;
    for (std::size_t k = first; k < g; ++k) hits[k] += 1.0;
  }
  out.curve.assign(g, 0.0);
  if (out.num_queries > 0)
    for (std::size_t k = 0; k < g; ++k) out.curve[k] = hits[k] / static_cast<double>(out.num_queries);
  return out;
}

MapResult mean_ap(const RetrievalRun& run) {
  run.validate();
  MapResult out;
  double total = 0.0;
  for (std::size_t q = 0; q < run.query_ids.size(); ++q) {
    const auto order = ranked_gallery(run, q);
    double ap = 0.0;
    std::size_t found = 0;
    for (std::size_t r = 0; r < order.size(); ++r)
      if (run.gallery_ids[order[r]] == run.query_ids[q]) {
        ++found;
        ap += static_cast<double>(found) / static_cast<double>(r + 1);
      }
    if (found == 0) {
      ++out.excluded_queries;
      continue;
    }
    ++out.num_queries;
    total += ap / static_cast<double>(found);
  }
  out.map = out.num_queries > 0 ? total / static_cast<double>(out.num_queries) : 0.0;
  return out;
}

std::string MetricsReport::to_json(int indent) const {
  nlohmann::ordered_json j;
  j["mAP"] = map;
  nlohmann::ordered_json c = nlohmann::ordered_json::object();
  for (const auto& [k, v] : cmc) c[std::to_string(k)] = v;
  j["cmc"] = c;
  j["num_queries"] = num_queries;
  j["excluded_queries"] = excluded_queries;
  return j.dump(indent);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MetricsReport r;
  r.map = j.at("mAP").get<double>();
  for (const auto& [k, v] : j.at("cmc").items()) r.cmc[std::stoul(k)] = v.get<double>();
  r.num_queries = j.at("num_queries").get<std::size_t>();
  r.excluded_queries = j.at("excluded_queries").get<std::size_t>();
  return r;
}

MetricsReport evaluate_run(const RetrievalRun& run) {
  const CmcCurve curve = cmc(run);
  const MapResult ap = mean_ap(run);
  MetricsReport r;
  r.map = ap.map;
  for (std::size_t k : {1, 5, 10, 20}) r.cmc[k] = curve.at(k);
  r.num_queries = ap.num_queries;
  r.excluded_queries = ap.excluded_queries;
  return r;
}

namespace {

using Index = Eigen::Index;

std::vector<Index> k_reciprocal_neighbours(const std::vector<std::vector<Index>>& rank, Index i,
                                           std::size_t k) {
  std::vector<Index> out;
  for (std::size_t a = 0; a <= k && a < rank[i].size(); ++a) {
    const Index cand = rank[i][a];
    const auto& back = rank[cand];
    const auto end = back.begin() + static_cast<std::ptrdiff_t>(std::min(k + 1, back.size()));
    if (std::find(back.begin(), end, i) != end) out.push_back(cand);
  }
  return out;
}

}  // namespace

Eigen::MatrixXd k_reciprocal_rerank(const Eigen::MatrixXd& q_g, const Eigen::MatrixXd& q_q,
                                    const Eigen::MatrixXd& g_g, const RerankOptions& opt) {
  const Index nq = q_g.rows(), ng = q_g.cols();
  if (q_q.rows() != nq || q_q.cols() != nq || g_g.rows() != ng || g_g.cols() != ng)
    throw std::invalid_argument("k_reciprocal_rerank: distance blocks have inconsistent shapes");
  if (!(opt.k2 >= 1 && opt.k1 > opt.k2))
    throw std::invalid_argument("k_reciprocal_rerank: require k1 > k2 >= 1");
  if (!(opt.lambda >= 0.0 && opt.lambda <= 1.0))
    throw std::invalid_argument("k_reciprocal_rerank: lambda must lie in [0, 1]");
  if (opt.k1 >= static_cast<std::size_t>(ng))
    throw std::invalid_argument("k_reciprocal_rerank: k1 = " + std::to_string(opt.k1) +
                                " must be smaller than the gallery size " + std::to_string(ng));

  const Index n = nq + ng;
  Eigen::MatrixXd dist(n, n);
  dist.topLeftCorner(nq, nq) = q_q;
  dist.topRightCorner(nq, ng) = q_g;
  dist.bottomLeftCorner(ng, nq) = q_g.transpose();
  dist.bottomRightCorner(ng, ng) = g_g;
  dist = dist.array().square();
  for (Index i = 0; i < n; ++i) {
    const double m = dist.row(i).maxCoeff();
    if (m > 0.0) dist.row(i) /= m;
  }

  std::vector<std::vector<Index>> rank(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    auto& r = rank[static_cast<std::size_t>(i)];
    r.resize(static_cast<std::size_t>(n));
    std::iota(r.begin(), r.end(), Index{0});
    std::stable_sort(r.begin(), r.end(), [&](Index a, Index b) { return dist(i, a) < dist(i, b); });
  }

  const auto half_k = static_cast<std::size_t>(std::nearbyint(static_cast<double>(opt.k1) / 2.0));
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto base = k_reciprocal_neighbours(rank, i, opt.k1);
    std::vector<Index> expanded = base;
    for (Index cand : base) {
      const auto cand_set = k_reciprocal_neighbours(rank, cand, half_k);
      std::size_t overlap = 0;
      for (Index c : cand_set)
        if (std::find(base.begin(), base.end(), c) != base.end()) ++overlap;
      if (static_cast<double>(overlap) > 2.0 / 3.0 * static_cast<double>(cand_set.size()))
        expanded.insert(expanded.end(), cand_set.begin(), cand_set.end());
    }
    std::sort(expanded.begin(), expanded.end());
    expanded.erase(std::unique(expanded.begin(), expanded.end()), expanded.end());
    double total = 0.0;
    for (Index j : expanded) total += std::exp(-dist(i, j));
    for (Index j : expanded) v(i, j) = std::exp(-dist(i, j)) / total;
  }

  if (opt.k2 != 1) {
    Eigen::MatrixXd qe(n, n);
    for (Index i = 0; i < n; ++i) {
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(n);
      for (std::size_t a = 0; a < opt.k2; ++a) acc += v.row(rank[static_cast<std::size_t>(i)][a]);
      qe.row(i) = acc / static_cast<double>(opt.k2);
    }
    v = std::move(qe);
  }

  Eigen::MatrixXd out(nq, ng);
  for (Index i = 0; i < nq; ++i)
    for (Index j = 0; j < ng; ++j) {
      const Index gj = nq + j;
      double inter = 0.0;
      for (Index c = 0; c < n; ++c) inter += std::min(v(i, c), v(gj, c));
      const double jaccard = 1.0 - inter / (2.0 - inter);
      out(i, j) = (1.0 - opt.lambda) * jaccard + opt.lambda * q_g(i, j);
    }
  return out;
}

Eigen::MatrixXd k_reciprocal_rerank(const RetrievalRun& run, DistanceMetric metric,
                                    const RerankOptions& options) {
  return k_reciprocal_rerank(run.distances, distance_matrix(run.query, run.query, metric),
                             distance_matrix(run.gallery, run.gallery, metric), options);
}

}  // namespace hornet
