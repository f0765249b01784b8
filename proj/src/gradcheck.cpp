#include "hornet/gradcheck.hpp"

#include "hornet/model.hpp"
#include "hornet/rng.hpp"

#include <sstream>

namespace hornet {

std::string PipelineCheck::describe() const {
  std::ostringstream os;
  os << "seed=" << seed << " d=" << embedding_dim << " h=" << hidden_dim << " r=" << reduced_dim
     << " F=" << visual_dim << " V=" << vocab_size << " n<=" << max_length
     << " max_rel_err=" << report.max_rel_error << " worst=" << worst_tensor;
  return os.str();
}

PipelineCheck pipeline_grad_check(std::uint64_t seed, const PipelineCheckOptions& options) {
  Rng rng(seed);
  auto dim = [&](std::size_t lo) { return lo + rng.below(options.max_dim - lo + 1); };

  PipelineCheck check;
  check.seed = seed;
  ModelDims dims;
  dims.embedding_dim = check.embedding_dim = dim(1);
  dims.hidden_dim = check.hidden_dim = dim(1);
  dims.reduced_dim = check.reduced_dim = dim(1);
  dims.visual_dim = check.visual_dim = dim(1);
  dims.vocab_size = check.vocab_size = dim(3);
  dims.num_classes = 2;
  dims.gate_projection = rng.bernoulli(0.25) ? dim(1) : 0;
  check.max_length = options.max_length;

  HornetModel model = HornetModel::init(dims, rng);
  model.encoder.gate.mode = GateMode::soft;
  model.encoder.gate.tau = rng.bernoulli(0.5) ? 0.3 : rng.uniform(0.3, 2.0);
  model.encoder.candidate =
      rng.bernoulli(0.5) ? CandidateActivation::tanh : CandidateActivation::sigmoid;
  // Open the gate bias up so both regimes of the sigmoid are exercised.
  model.encoder.gate.b_z.mutable_data()[0] = rng.uniform(-1.0, 1.0);

  // Two identities x two observations.
  struct Sample {
    TokenSequence caption;
    std::vector<double> visual;
    std::size_t label;
  };
  std::vector<Sample> batch;
  for (std::size_t i = 0; i < 4; ++i) {
    Sample s;
    const std::size_t n = 1 + rng.below(options.max_length);
    for (std::size_t t = 0; t < n; ++t) s.caption.ids.push_back(rng.below(dims.vocab_size));
    for (std::size_t k = 0; k < dims.visual_dim; ++k) s.visual.push_back(rng.uniform(-1.0, 1.0));
    s.label = i / 2;
    batch.push_back(std::move(s));
  }
  LossOptions loss_options;
  loss_options.alpha = rng.uniform(0.5, 2.0);
  loss_options.normalize_triplet = rng.bernoulli(0.25);

  // Fix one noise sample per gate for every evaluation.
  std::vector<double> noise_draws;
  {
    Rng noise_rng = rng.split();
    GateNoise noise = GateNoise::sampled(noise_rng);
    for (const auto& s : batch) model.forward(s.caption, s.visual, noise);
    noise_draws = noise.draws();
  }

  auto objective = [&]() {
    GateNoise noise = GateNoise::replay(noise_draws);
    std::vector<ad::Tensor> embeddings;
    std::vector<std::size_t> labels;
    for (const auto& s : batch) {
      embeddings.push_back(model.forward(s.caption, s.visual, noise).embedding);
      labels.push_back(s.label);
    }
    return total_loss(embeddings, labels, model.fusion.theta, loss_options).total;
  };

  ad::GradCheckOptions gc;
  gc.epsilon = options.epsilon;
  gc.tolerance = options.tolerance;
  check.report = ad::grad_check(objective, model.named(), gc);
  double worst = -1.0;
  for (const auto& e : check.report.entries)
    if (e.max_rel_error > worst) worst = e.max_rel_error, check.worst_tensor = e.name;
  return check;
}

}  // namespace hornet
