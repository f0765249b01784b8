#include "hornet/fusion.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace hornet {

FusionParams FusionParams::init(std::size_t hidden_dim, std::size_t reduced_dim,
                                std::size_t visual_dim, std::size_t num_classes, Rng& rng) {
  auto uniform = [&rng](ad::Shape shape, double bound) {
    std::vector<double> v(ad::shape_size(shape));
    for (double& x : v) x = rng.uniform(-bound, bound);
    return ad::Tensor::parameter(std::move(shape), std::move(v));
  };
  FusionParams p;
  p.w_fc = uniform({reduced_dim, hidden_dim}, 1.0 / std::sqrt(static_cast<double>(hidden_dim)));
  p.b_fc = ad::Tensor::zeros({reduced_dim}, true);
  const std::size_t fused = reduced_dim + visual_dim;
  p.theta = uniform({num_classes, fused}, 1.0 / std::sqrt(static_cast<double>(fused)));
  return p;
}

std::vector<ad::NamedTensor> FusionParams::named() const {
  return {{"fusion.w_fc", w_fc}, {"fusion.b_fc", b_fc}, {"fusion.theta", theta}};
}

ad::Tensor fuse(const ad::Tensor& h_final, const ad::Tensor& visual, const FusionParams& params) {
  if (visual.rank() != 1) throw ad::ShapeError("fuse: visual feature must be rank-1, got " +
                                               ad::shape_str(visual.shape()));
  if (params.theta.defined() && params.fused_dim(visual.size()) != params.theta.shape()[1])
    throw ad::ShapeError("fuse: visual feature " + ad::shape_str(visual.shape()) +
                         " does not fit classifier " + ad::shape_str(params.theta.shape()));
  return ad::concat(ad::affine(params.w_fc, h_final, params.b_fc), visual);
}

ad::Tensor id_loss(const ad::Tensor& f, std::size_t label, const ad::Tensor& theta) {
  return ad::softmax_cross_entropy(ad::matmul(theta, f), label);
}

ad::Tensor triplet_loss(const ad::Tensor& anchor, const ad::Tensor& positive,
                        const ad::Tensor& negative, double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("triplet_loss: alpha must be >= 0");
  const ad::Tensor gap =
      ad::sub(ad::squared_euclidean(anchor, positive), ad::squared_euclidean(anchor, negative));
  return ad::max_with_zero(ad::add_constant(gap, alpha));
}

namespace {

double squared_distance(const ad::Tensor& a, const ad::Tensor& b) {
  const auto x = a.data(), y = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return s;
}

}  // namespace

std::vector<MinedTriplet> mine_batch_hard(std::span<const ad::Tensor> embeddings,
                                          std::span<const std::size_t> labels) {
  const std::size_t n = embeddings.size();
  if (labels.size() != n) throw std::invalid_argument("mine_batch_hard: label count mismatch");
  std::vector<MinedTriplet> out;
  out.reserve(n);
  for (std::size_t a = 0; a < n; ++a) {
    std::size_t pos = n, neg = n;
    double pos_d = -1.0, neg_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      const double d = squared_distance(embeddings[a], embeddings[j]);
      if (labels[j] == labels[a]) {
        if (d > pos_d) pos_d = d, pos = j;
      } else if (d < neg_d) {
        neg_d = d, neg = j;
      }
    }
    if (pos == n || neg == n)
      throw std::invalid_argument("mine_batch_hard: identity " + std::to_string(labels[a]) +
                                  " has no " + (pos == n ? "positive" : "negative") +
                                  " in the batch");
    out.push_back({a, pos, neg});
  }
  return out;
}

LossTerms total_loss(std::span<const ad::Tensor> embeddings, std::span<const std::size_t> labels,
                     const ad::Tensor& theta, const LossOptions& options) {
  if (embeddings.empty()) throw std::invalid_argument("total_loss: empty batch");
  if (labels.size() != embeddings.size())
    throw std::invalid_argument("total_loss: label count mismatch");
  const double inv_n = 1.0 / static_cast<double>(embeddings.size());

  std::vector<ad::Tensor> ids;
  ids.reserve(embeddings.size());
  for (std::size_t i = 0; i < embeddings.size(); ++i)
    ids.push_back(id_loss(embeddings[i], labels[i], theta));
  const ad::Tensor id_mean = ad::scale(ad::add_n(ids), inv_n);

  LossTerms terms;
  terms.id = id_mean.item();
  if (!options.use_triplet) {
    terms.total = id_mean;
    return terms;
  }

  std::vector<ad::Tensor> metric(embeddings.begin(), embeddings.end());
  if (options.normalize_triplet)
    for (auto& f : metric) f = ad::l2_normalize(f);
  const auto mined = mine_batch_hard(metric, labels);
  std::vector<ad::Tensor> trips;
  trips.reserve(mined.size());
  for (const auto& t : mined)
    trips.push_back(triplet_loss(metric[t.anchor], metric[t.positive], metric[t.negative],
                                 options.alpha));
  const ad::Tensor trip_mean = ad::scale(ad::add_n(trips), 1.0 / static_cast<double>(trips.size()));
  terms.triplet = trip_mean.item();
  terms.total = ad::add(id_mean, trip_mean);
  return terms;
}

}  // namespace hornet
