#include "hornet/model.hpp"

#include <cmath>
#include <stdexcept>

namespace hornet {

HornetModel HornetModel::init(const ModelDims& d, Rng& rng) {
  if (d.vocab_size < 2 || d.embedding_dim == 0 || d.hidden_dim == 0 || d.reduced_dim == 0 ||
      d.visual_dim == 0 || d.num_classes == 0)
    throw std::invalid_argument("HornetModel::init: all dimensions must be positive");
  HornetModel m;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d.hidden_dim));
  std::vector<double> emb(d.vocab_size * d.embedding_dim);
  for (double& x : emb) x = rng.uniform(-bound, bound);
  m.embedding = ad::Tensor::parameter({d.vocab_size, d.embedding_dim}, std::move(emb));
  m.encoder.lower = LstmParams::init(d.embedding_dim, d.hidden_dim, rng);
  m.encoder.upper = LstmParams::init(d.hidden_dim, d.hidden_dim, rng);
  m.encoder.gate = GateParams::init(d.hidden_dim, d.visual_dim, d.gate_projection, rng);
  m.fusion = FusionParams::init(d.hidden_dim, d.reduced_dim, d.visual_dim, d.num_classes, rng);
  return m;
}

ModelDims HornetModel::dims() const {
  ModelDims d;
  d.vocab_size = embedding.shape()[0];
  d.embedding_dim = embedding.shape()[1];
  d.hidden_dim = encoder.lower.hidden_dim();
  d.reduced_dim = fusion.reduced_dim();
  d.visual_dim = visual_dim();
  d.num_classes = fusion.num_classes();
  d.gate_projection = encoder.gate.w_visual.defined() ? encoder.gate.w_visual.shape()[0] : 0;
  return d;
}

std::vector<ad::NamedTensor> HornetModel::named() const {
  std::vector<ad::NamedTensor> out{{"embedding", embedding}};
  for (auto& t : encoder.named()) out.push_back(std::move(t));
  for (auto& t : fusion.named()) out.push_back(std::move(t));
  return out;
}

void HornetModel::zero_grad() {
  for (auto& t : named()) t.tensor.zero_grad();
}

HornetModel::Output HornetModel::forward(const TokenSequence& caption,
                                         std::span<const double> visual, GateNoise& noise) const {
  if (visual.size() != visual_dim())
    throw ad::ShapeError("forward: visual feature has dimension " + std::to_string(visual.size()) +
                         ", model expects " + std::to_string(visual_dim()));
  const ad::Tensor f_visual =
      ad::Tensor::constant({visual.size()}, std::vector<double>(visual.begin(), visual.end()));
  const auto embedded = embed(caption, embedding);
  auto enc = encode_sequence(embedded, f_visual, encoder, noise);
  return {fuse(enc.h_final, f_visual, fusion), std::move(enc.gates)};
}

HornetModel HornetModel::with_gate_mode(GateMode mode) const {
  HornetModel m = *this;
  m.encoder.gate.mode = mode;
  return m;
}

}  // namespace hornet
