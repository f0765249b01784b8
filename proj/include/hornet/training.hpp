#pragma once

#include "hornet/config.hpp"
#include "hornet/model.hpp"
#include "hornet/retrieval.hpp"
#include "hornet/text.hpp"
#include "hornet/visual.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hornet {

// ---- PK sampling ----------------------------------------------------------

// One batch: P distinct identities, K observations each (record indices).
std::vector<std::size_t> pk_sample(const Dataset& data, std::size_t P, std::size_t K, Rng& rng);

// Epoch-level sampler. Each epoch visits every eligible identity at least
// once; observations are drawn without replacement from a per-identity pool
// that is reshuffled when exhausted.
class PkSampler {
 public:
  PkSampler(const Dataset& data, std::size_t P, std::size_t K);

  std::vector<std::vector<std::size_t>> epoch(Rng& rng);
  std::size_t num_identities() const { return identities_.size(); }

 private:
  std::vector<std::size_t> draw(std::size_t identity_slot, Rng& rng);

  std::size_t p_, k_;
  std::vector<std::size_t> identities_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::vector<std::size_t>> pools_;
};

// ---- optimisation ---------------------------------------------------------

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, std::vector<ad::NamedTensor> params);
  void step();
  std::size_t steps() const { return t_; }

 private:
  OptimizerConfig config_;
  std::vector<ad::NamedTensor> params_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

// ---- checkpoint -----------------------------------------------------------

struct Checkpoint {
  ExperimentConfig config;
  std::vector<std::string> vocabulary;
  std::vector<std::size_t> class_identities;  // classifier row -> identity label
  HornetModel model;
  std::size_t step = 0;
  std::string rng_state;

  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& j);
  // Writes to a temporary sibling and renames over `path`.
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

// ---- training -------------------------------------------------------------

struct EpochLoss {
  std::size_t epoch = 0;
  double id_loss = 0.0;
  double triplet_loss = 0.0;
  double total = 0.0;
};

std::string loss_trace_csv(const std::vector<EpochLoss>& trace);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainOptions {
  // Where to drop a diagnostic checkpoint if the loss goes non-finite.
  std::optional<std::filesystem::path> diagnostic_path;
  std::function<void(const EpochLoss&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLoss> trace;
};

TrainResult train(const ExperimentConfig& config, const Dataset& train_set,
                  const TrainOptions& options = {});
TrainResult train(const ExperimentConfig& config, const TrainOptions& options = {});

// ---- evaluation -----------------------------------------------------------

struct GateStats {
  double attribute_mean = 0.0;
  double distractor_mean = 0.0;
  double other_mean = 0.0;
  std::size_t attribute_count = 0;
  std::size_t distractor_count = 0;
  std::size_t other_count = 0;
  double open_rate = 0.0;

  nlohmann::json to_json() const;
};

struct EvalOptions {
  DistanceMetric metric = DistanceMetric::euclidean;
  bool rerank = false;
  RerankOptions rerank_options;
};

struct EvalResult {
  MetricsReport metrics;
  GateStats gates;
  RetrievalRun run;

  nlohmann::json to_json() const;
};

// First observation of every (identity, camera) pair is a query; the rest
// form the gallery. Returns (query indices, gallery indices).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> query_gallery_split(
    const Dataset& data);

EvalResult evaluate(const Checkpoint& checkpoint, const Dataset& data, const EvalOptions& options);

// Raw visual features as embeddings.
EvalResult evaluate_visual_only(const Dataset& data, const EvalOptions& options);

// Runs stored as JSON so `rerank` can post-process a previous evaluation.
nlohmann::json run_to_json(const RetrievalRun& run);
RetrievalRun run_from_json(const nlohmann::json& j);

// ---- ablation -------------------------------------------------------------

struct AblationRow {
  std::string name;
  MetricsReport metrics;
  GateStats gates;
  double final_loss = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  AblationRow visual_only;

  nlohmann::json to_json() const;
  std::string to_text() const;
  const AblationRow& row(const std::string& name) const;
};

AblationTable ablation(const ExperimentConfig& config,
                       const std::function<void(const std::string&)>& progress = {});

}  // namespace hornet
