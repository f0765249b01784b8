#pragma once

#include "hornet/autodiff.hpp"

#include <cstdint>
#include <string>

namespace hornet {

// Finite-difference check of the whole training objective: embedding ->
// gated encoder (soft gates, replayed noise) -> fusion -> id + triplet loss,
// on a random small configuration drawn from `seed`.
struct PipelineCheck {
  std::uint64_t seed = 0;
  std::size_t embedding_dim = 0, hidden_dim = 0, reduced_dim = 0, visual_dim = 0;
  std::size_t vocab_size = 0, max_length = 0;
  ad::GradCheckReport report;
  std::string worst_tensor;

  std::string describe() const;
};

struct PipelineCheckOptions {
  std::size_t max_dim = 8;
  std::size_t max_length = 5;
  double epsilon = 1e-6;
  double tolerance = 1e-4;
};

PipelineCheck pipeline_grad_check(std::uint64_t seed, const PipelineCheckOptions& options = {});

}  // namespace hornet
