#pragma once

#include "hornet/encoder.hpp"
#include "hornet/fusion.hpp"
#include "hornet/retrieval.hpp"
#include "hornet/visual.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace hornet {

struct ModelConfig {
  std::size_t embedding_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t reduced_dim = 32;
  // 0 = take the dimension from the data.
  std::size_t visual_dim = 0;
  std::size_t gate_projection = 0;
};

struct GateConfig {
  double tau = 0.3;
  // Mode used while training; inference always uses noise-free hard gates.
  GateMode train_mode = GateMode::hard;
  // false = gates forced open (plain stacked LSTM).
  bool enabled = true;
  // Candidate activation sigmoid instead of tanh.
  bool literal_paper_cell = false;
};

struct LossConfig {
  double alpha = 0.3;
  bool triplet = true;
  bool normalize = false;
};

struct OptimizerConfig {
  std::string type = "adam";
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  std::size_t epochs = 60;
};

struct SamplerConfig {
  std::size_t identities = 8;  // P
  std::size_t samples = 4;     // K
};

struct SyntheticConfig {
  std::size_t identities = 50;
  std::size_t observations = 8;
  std::size_t attributes = 16;
  std::size_t visual_dim = 64;
  std::size_t cameras = 4;
  double sigma_vis = 0.3;
  double p_token_err = 0.15;
  double p_distractor = 0.3;
  std::uint64_t world_seed = 7;
  std::uint64_t train_seed = 11;
  std::uint64_t eval_seed = 13;

  CaptionChannel channel() const;
};

struct DataConfig {
  std::string source = "synthetic";  // or "files"
  SyntheticConfig synthetic;
  std::string train_features, train_captions;
  std::string eval_features, eval_captions;
};

struct EvalConfig {
  DistanceMetric metric = DistanceMetric::euclidean;
  bool rerank = false;
  RerankOptions rerank_options;
};

struct ExperimentConfig {
  ModelConfig model;
  GateConfig gate;
  LossConfig loss;
  OptimizerConfig optimizer;
  SamplerConfig sampler;
  DataConfig data;
  EvalConfig eval;
  std::uint64_t seed = 1;

  void validate() const;

  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
};

// Train and evaluation datasets described by the config.
struct DataSplit {
  Dataset train;
  Dataset eval;
};

DataSplit load_data(const DataConfig& config);

}  // namespace hornet
