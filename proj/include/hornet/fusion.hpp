#pragma once

#include "hornet/autodiff.hpp"
#include "hornet/rng.hpp"

#include <span>
#include <vector>

namespace hornet {

struct FusionParams {
  ad::Tensor w_fc;   // (r, h)
  ad::Tensor b_fc;   // (r)
  ad::Tensor theta;  // (K, r + dim F)

  std::size_t reduced_dim() const { return w_fc.shape()[0]; }
  std::size_t fused_dim(std::size_t visual_dim) const { return reduced_dim() + visual_dim; }
  std::size_t num_classes() const { return theta.shape()[0]; }

  static FusionParams init(std::size_t hidden_dim, std::size_t reduced_dim,
                           std::size_t visual_dim, std::size_t num_classes, Rng& rng);
  std::vector<ad::NamedTensor> named() const;
};

// f = [W_fc h + b_fc, F]. The visual half is F verbatim.
ad::Tensor fuse(const ad::Tensor& h_final, const ad::Tensor& visual, const FusionParams& params);

// K-way softmax cross-entropy of theta f against the true identity.
ad::Tensor id_loss(const ad::Tensor& f, std::size_t label, const ad::Tensor& theta);

// max(||a - p||^2 - ||a - n||^2 + alpha, 0)
ad::Tensor triplet_loss(const ad::Tensor& anchor, const ad::Tensor& positive,
                        const ad::Tensor& negative, double alpha);

struct LossOptions {
  double alpha = 0.3;
  bool use_triplet = true;
  // L2-normalize embeddings before the triplet distance.
  bool normalize_triplet = false;
};

struct MinedTriplet {
  std::size_t anchor, positive, negative;
};

// Batch-hard mining on embedding values: farthest positive, nearest negative.
// Ties resolve to the lowest index.
std::vector<MinedTriplet> mine_batch_hard(std::span<const ad::Tensor> embeddings,
                                          std::span<const std::size_t> labels);

struct LossTerms {
  ad::Tensor total;
  double id = 0.0;
  double triplet = 0.0;
};

// mean id_loss + mean batch-hard triplet_loss, unweighted.
LossTerms total_loss(std::span<const ad::Tensor> embeddings, std::span<const std::size_t> labels,
                     const ad::Tensor& theta, const LossOptions& options);

}  // namespace hornet
