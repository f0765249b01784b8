#include "hornet/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace hornet {

namespace {

ad::Tensor uniform_param(ad::Shape shape, double bound, Rng& rng) {
  std::vector<double> v(ad::shape_size(shape));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return ad::Tensor::parameter(std::move(shape), std::move(v));
}

ad::Tensor filled_param(std::size_t n, double value) {
  return ad::Tensor::parameter({n}, std::vector<double>(n, value));
}

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

LstmParams LstmParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  LstmParams p;
  p.w_xi = uniform_param({hidden_dim, input_dim}, bound, rng);
  p.w_xf = uniform_param({hidden_dim, input_dim}, bound, rng);
  p.w_xo = uniform_param({hidden_dim, input_dim}, bound, rng);
  p.w_xc = uniform_param({hidden_dim, input_dim}, bound, rng);
  p.u_hi = uniform_param({hidden_dim, hidden_dim}, bound, rng);
  p.u_hf = uniform_param({hidden_dim, hidden_dim}, bound, rng);
  p.u_ho = uniform_param({hidden_dim, hidden_dim}, bound, rng);
  p.u_hc = uniform_param({hidden_dim, hidden_dim}, bound, rng);
  p.b_i = filled_param(hidden_dim, 0.0);
  p.b_f = filled_param(hidden_dim, 1.0);
  p.b_o = filled_param(hidden_dim, 0.0);
  p.b_c = filled_param(hidden_dim, 0.0);
  return p;
}

std::vector<ad::NamedTensor> LstmParams::named(const std::string& prefix) const {
  return {{prefix + "w_xi", w_xi}, {prefix + "w_xf", w_xf}, {prefix + "w_xo", w_xo},
          {prefix + "w_xc", w_xc}, {prefix + "u_hi", u_hi}, {prefix + "u_hf", u_hf},
          {prefix + "u_ho", u_ho}, {prefix + "u_hc", u_hc}, {prefix + "b_i", b_i},
          {prefix + "b_f", b_f},   {prefix + "b_o", b_o},   {prefix + "b_c", b_c}};
}

LstmState LstmState::zeros(std::size_t hidden_dim) {
  return {ad::Tensor::zeros({hidden_dim}), ad::Tensor::zeros({hidden_dim})};
}

LstmState lstm_cell_step(const ad::Tensor& x, const LstmState& prev, const LstmParams& p,
                         CandidateActivation candidate) {
  if (x.rank() != 1 || x.shape()[0] != p.input_dim())
    throw ad::ShapeError("lstm_cell_step: input " + ad::shape_str(x.shape()) +
                         " does not match W " + ad::shape_str(p.w_xi.shape()));
  if (prev.h.shape() != ad::Shape{p.hidden_dim()} || prev.c.shape() != ad::Shape{p.hidden_dim()})
    throw ad::ShapeError("lstm_cell_step: state " + ad::shape_str(prev.h.shape()) +
                         " does not match U " + ad::shape_str(p.u_hi.shape()));
  // W x + (U h + b), as two affine nodes.
  auto pre = [&](const ad::Tensor& w, const ad::Tensor& u, const ad::Tensor& b) {
    return ad::affine(w, x, ad::affine(u, prev.h, b));
  };
  const ad::Tensor i = ad::sigmoid(pre(p.w_xi, p.u_hi, p.b_i));
  const ad::Tensor f = ad::sigmoid(pre(p.w_xf, p.u_hf, p.b_f));
  const ad::Tensor o = ad::sigmoid(pre(p.w_xo, p.u_ho, p.b_o));
  const ad::Tensor g_pre = pre(p.w_xc, p.u_hc, p.b_c);
  const ad::Tensor g =
      candidate == CandidateActivation::tanh ? ad::tanh(g_pre) : ad::sigmoid(g_pre);
  const ad::Tensor c = ad::add(ad::hadamard(f, prev.c), ad::hadamard(i, g));
  const ad::Tensor h = ad::hadamard(o, ad::tanh(c));
  return {h, c};
}

std::string to_string(GateMode mode) {
  switch (mode) {
    case GateMode::soft: return "soft";
    case GateMode::hard: return "hard";
    case GateMode::forced_open: return "forced_open";
    case GateMode::forced_closed: return "forced_closed";
  }
  return "?";
}

GateMode gate_mode_from_string(const std::string& name) {
  if (name == "soft") return GateMode::soft;
  if (name == "hard") return GateMode::hard;
  if (name == "forced_open") return GateMode::forced_open;
  if (name == "forced_closed") return GateMode::forced_closed;
  throw std::invalid_argument("unknown gate mode '" + name + "'");
}

std::optional<double> GateNoise::next() {
  switch (kind_) {
    case Kind::disabled:
      return std::nullopt;
    case Kind::sampled: {
      const double g1 = rng_->gumbel();
      const double g2 = rng_->gumbel();
      draws_.push_back(g1 - g2);
      return draws_.back();
    }
    case Kind::replay:
      if (cursor_ >= draws_.size()) throw std::out_of_range("GateNoise: replay exhausted");
      return draws_[cursor_++];
  }
  return std::nullopt;
}

double gumbel_sigmoid(double logit, double tau, Rng& rng, bool hard) {
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel_sigmoid: tau must be positive");
  const double g1 = rng.gumbel();
  const double g2 = rng.gumbel();
  const double z = sigmoid((logit + g1 - g2) / tau);
  return hard ? (z >= 0.5 ? 1.0 : 0.0) : z;
}

ad::Tensor gumbel_sigmoid(const ad::Tensor& logit, double tau, GateNoise& noise, bool hard) {
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel_sigmoid: tau must be positive");
  if (logit.size() != 1)
    throw ad::ShapeError("gumbel_sigmoid: logit must be scalar, got " + ad::shape_str(logit.shape()));
  ad::Tensor x = logit;
  if (const auto diff = noise.next()) x = ad::add_constant(x, *diff);
  const ad::Tensor soft = ad::sigmoid(ad::scale(x, 1.0 / tau));
  return hard ? ad::straight_through_step(soft, 0.5) : soft;
}

GateParams GateParams::init(std::size_t hidden_dim, std::size_t visual_dim,
                            std::size_t visual_projection, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  GateParams p;
  std::size_t gate_visual = visual_dim;
  if (visual_projection > 0) {
    p.w_visual = uniform_param({visual_projection, visual_dim}, bound, rng);
    gate_visual = visual_projection;
  }
  p.w_z = uniform_param({1, hidden_dim + gate_visual}, bound, rng);
  p.b_z = filled_param(1, 2.0);
  return p;
}

std::vector<ad::NamedTensor> GateParams::named() const {
  std::vector<ad::NamedTensor> out{{"gate.w_z", w_z}, {"gate.b_z", b_z}};
  if (w_visual.defined()) out.push_back({"gate.w_visual", w_visual});
  return out;
}

ad::Tensor boundary_gate(const ad::Tensor& h_lower, const ad::Tensor& visual,
                         const GateParams& params, GateNoise& noise) {
  const ad::Tensor gate_visual =
      params.w_visual.defined() ? ad::matmul(params.w_visual, visual) : visual;
  if (h_lower.rank() != 1 || gate_visual.rank() != 1 ||
      h_lower.size() + gate_visual.size() != params.w_z.shape()[1])
    throw ad::ShapeError("boundary_gate: concat of " + ad::shape_str(h_lower.shape()) + " and " +
                         ad::shape_str(gate_visual.shape()) + " does not match w_z " +
                         ad::shape_str(params.w_z.shape()));
  switch (params.mode) {
    case GateMode::forced_open: return ad::Tensor::scalar(1.0);
    case GateMode::forced_closed: return ad::Tensor::scalar(0.0);
    default: break;
  }
  const ad::Tensor logit = ad::affine(params.w_z, ad::concat(h_lower, gate_visual), params.b_z);
  return gumbel_sigmoid(logit, params.tau, noise, params.mode == GateMode::hard);
}

std::vector<ad::NamedTensor> EncoderParams::named() const {
  auto out = lower.named("lower.");
  for (auto& t : upper.named("upper.")) out.push_back(std::move(t));
  for (auto& t : gate.named()) out.push_back(std::move(t));
  return out;
}

std::vector<double> EncodedSequence::gate_values() const {
  std::vector<double> out;
  out.reserve(gates.size());
  for (const auto& z : gates) out.push_back(z.item());
  return out;
}

EncodedSequence encode_sequence(std::span<const ad::Tensor> embedded, const ad::Tensor& visual,
                                const EncoderParams& params, GateNoise& noise) {
  if (embedded.empty()) throw std::invalid_argument("encode_sequence: empty sequence");
  LstmState lower = LstmState::zeros(params.lower.hidden_dim());
  LstmState upper = LstmState::zeros(params.upper.hidden_dim());
  EncodedSequence out;
  out.gates.reserve(embedded.size());
  for (const auto& e : embedded) {
    lower = lstm_cell_step(e, lower, params.lower, params.candidate);
    ad::Tensor z = boundary_gate(lower.h, visual, params.gate, noise);
    upper = lstm_cell_step(ad::hadamard(lower.h, z), upper, params.upper, params.candidate);
    out.gates.push_back(std::move(z));
  }
  out.h_final = upper.h;
  return out;
}

ad::Tensor stacked_lstm(std::span<const ad::Tensor> embedded, const EncoderParams& params) {
  if (embedded.empty()) throw std::invalid_argument("stacked_lstm: empty sequence");
  LstmState lower = LstmState::zeros(params.lower.hidden_dim());
  LstmState upper = LstmState::zeros(params.upper.hidden_dim());
  for (const auto& e : embedded) {
    lower = lstm_cell_step(e, lower, params.lower, params.candidate);
    upper = lstm_cell_step(lower.h, upper, params.upper, params.candidate);
  }
  return upper.h;
}

}  // namespace hornet
