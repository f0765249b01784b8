#pragma once

// Two-layer recurrent text encoder with per-timestep binary boundary gates.
//
// The lower LSTM reads the embedded caption. At each step a scalar gate
// z_t = GumbelSigmoid(w_z . [h_t^lower, F] + b_z) decides how much of
// h_t^lower reaches the upper LSTM, which consumes h_t^lower * z_t.

#include "hornet/autodiff.hpp"
#include "hornet/rng.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hornet {

enum class CandidateActivation { tanh, sigmoid };

struct LstmParams {
  ad::Tensor w_xi, w_xf, w_xo, w_xc;  // (h, d)
  ad::Tensor u_hi, u_hf, u_ho, u_hc;  // (h, h)
  ad::Tensor b_i, b_f, b_o, b_c;      // (h)

  std::size_t input_dim() const { return w_xi.shape()[1]; }
  std::size_t hidden_dim() const { return w_xi.shape()[0]; }

  // Weights uniform in [-1/sqrt(h), 1/sqrt(h)], b_f = 1, other biases 0.
  static LstmParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
  std::vector<ad::NamedTensor> named(const std::string& prefix) const;
};

struct LstmState {
  ad::Tensor h;
  ad::Tensor c;

  static LstmState zeros(std::size_t hidden_dim);
};

LstmState lstm_cell_step(const ad::Tensor& x, const LstmState& prev, const LstmParams& params,
                         CandidateActivation candidate = CandidateActivation::tanh);

enum class GateMode { soft, hard, forced_open, forced_closed };

std::string to_string(GateMode mode);
GateMode gate_mode_from_string(const std::string& name);

// Source of the logistic perturbation g_1 - g_2 (g_i ~ Gumbel(0,1)) used by
// each gate draw. Draws from a sampled source are recorded so a forward pass
// can be replayed exactly.
class GateNoise {
 public:
  static GateNoise disabled() { return GateNoise(Kind::disabled, nullptr, {}); }
  static GateNoise sampled(Rng& rng) { return GateNoise(Kind::sampled, &rng, {}); }
  static GateNoise replay(std::vector<double> diffs) {
    return GateNoise(Kind::replay, nullptr, std::move(diffs));
  }

  // nullopt when noise is disabled.
  std::optional<double> next();
  const std::vector<double>& draws() const { return draws_; }
  void rewind() { cursor_ = 0; }

 private:
  enum class Kind { disabled, sampled, replay };
  GateNoise(Kind kind, Rng* rng, std::vector<double> draws)
      : kind_(kind), rng_(rng), draws_(std::move(draws)) {}

  Kind kind_;
  Rng* rng_;
  std::vector<double> draws_;
  std::size_t cursor_ = 0;
};

// Scalar sampler: soft z = sigmoid((a + g1 - g2) / tau); hard thresholds at 0.5.
double gumbel_sigmoid(double logit, double tau, Rng& rng, bool hard);

// Differentiable version on a scalar logit. Hard mode is straight-through.
ad::Tensor gumbel_sigmoid(const ad::Tensor& logit, double tau, GateNoise& noise, bool hard);

struct GateParams {
  ad::Tensor w_z;  // (1, h + dim(F_gate))
  ad::Tensor b_z;  // (1)
  // Optional learned projection of F before it enters the gate; (p, dim F).
  ad::Tensor w_visual;
  double tau = 0.3;
  GateMode mode = GateMode::hard;

  static GateParams init(std::size_t hidden_dim, std::size_t visual_dim,
                         std::size_t visual_projection, Rng& rng);
  std::vector<ad::NamedTensor> named() const;
};

ad::Tensor boundary_gate(const ad::Tensor& h_lower, const ad::Tensor& visual,
                         const GateParams& params, GateNoise& noise);

struct EncoderParams {
  LstmParams lower;
  LstmParams upper;
  GateParams gate;
  CandidateActivation candidate = CandidateActivation::tanh;

  std::vector<ad::NamedTensor> named() const;
};

struct EncodedSequence {
  ad::Tensor h_final;
  std::vector<ad::Tensor> gates;

  std::vector<double> gate_values() const;
};

EncodedSequence encode_sequence(std::span<const ad::Tensor> embedded, const ad::Tensor& visual,
                                const EncoderParams& params, GateNoise& noise);

// Reference two-layer stacked LSTM without gates.
ad::Tensor stacked_lstm(std::span<const ad::Tensor> embedded, const EncoderParams& params);

}  // namespace hornet
