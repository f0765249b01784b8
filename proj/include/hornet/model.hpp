#pragma once

#include "hornet/autodiff.hpp"
#include "hornet/encoder.hpp"
#include "hornet/fusion.hpp"
#include "hornet/rng.hpp"
#include "hornet/text.hpp"

#include <span>
#include <vector>

namespace hornet {

struct ModelDims {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t reduced_dim = 32;
  std::size_t visual_dim = 64;
  std::size_t num_classes = 0;
  std::size_t gate_projection = 0;
};

// Embedding, gated two-layer encoder, fusion projection and classifier.
struct HornetModel {
  ad::Tensor embedding;  // (V, d)
  EncoderParams encoder;
  FusionParams fusion;

  static HornetModel init(const ModelDims& dims, Rng& rng);

  ModelDims dims() const;
  std::size_t fused_dim() const { return fusion.fused_dim(visual_dim()); }
  std::size_t visual_dim() const { return fusion.theta.shape()[1] - fusion.reduced_dim(); }

  std::vector<ad::NamedTensor> named() const;
  void zero_grad();

  struct Output {
    ad::Tensor embedding;  // fused f
    std::vector<ad::Tensor> gates;
  };

  Output forward(const TokenSequence& caption, std::span<const double> visual,
                 GateNoise& noise) const;

  // Same weights, different gate behaviour.
  HornetModel with_gate_mode(GateMode mode) const;
};

}  // namespace hornet
