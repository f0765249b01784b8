#include "hornet/config.hpp"

#include <fstream>
#include <stdexcept>

namespace hornet {

using nlohmann::json;

CaptionChannel SyntheticConfig::channel() const {
  CaptionChannel c;
  c.sigma_vis = sigma_vis;
  c.p_token_err = p_token_err;
  c.p_distractor = p_distractor;
  return c;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (model.embedding_dim == 0 || model.hidden_dim == 0 || model.reduced_dim == 0)
    fail("model dimensions must be positive");
  if (!(gate.tau > 0.0)) fail("gate.tau must be positive");
  if (gate.train_mode == GateMode::forced_open || gate.train_mode == GateMode::forced_closed)
    if (gate.enabled) fail("gate.train_mode must be soft or hard; use gate.enabled=false for open gates");
  if (!(loss.alpha >= 0.0)) fail("loss.alpha must be >= 0");
  if (optimizer.type != "adam" && optimizer.type != "sgd")
    fail("optimizer.type must be 'adam' or 'sgd'");
  if (!(optimizer.learning_rate >= 0.0)) fail("optimizer.learning_rate must be >= 0");
  if (!(optimizer.weight_decay >= 0.0)) fail("optimizer.weight_decay must be >= 0");
  if (sampler.identities == 0 || sampler.samples == 0) fail("sampler sizes must be positive");
  if (loss.triplet && (sampler.identities < 2 || sampler.samples < 2))
    fail("triplet loss needs sampler.identities >= 2 and sampler.samples >= 2");
  if (data.source != "synthetic" && data.source != "files")
    fail("data.source must be 'synthetic' or 'files'");
  if (data.source == "files" && (data.train_features.empty() || data.train_captions.empty()))
    fail("data.train_features and data.train_captions are required for file data");
}

json ExperimentConfig::to_json() const {
  const auto& s = data.synthetic;
  return json{
      {"model",
       {{"embedding_dim", model.embedding_dim},
        {"hidden_dim", model.hidden_dim},
        {"reduced_dim", model.reduced_dim},
        {"visual_dim", model.visual_dim},
        {"gate_projection", model.gate_projection}}},
      {"gate",
       {{"tau", gate.tau},
        {"train_mode", to_string(gate.train_mode)},
        {"enabled", gate.enabled},
        {"literal_paper_cell", gate.literal_paper_cell}}},
      {"loss", {{"alpha", loss.alpha}, {"triplet", loss.triplet}, {"normalize", loss.normalize}}},
      {"optimizer",
       {{"type", optimizer.type},
        {"learning_rate", optimizer.learning_rate},
        {"beta1", optimizer.beta1},
        {"beta2", optimizer.beta2},
        {"epsilon", optimizer.epsilon},
        {"weight_decay", optimizer.weight_decay},
        {"epochs", optimizer.epochs}}},
      {"sampler", {{"identities", sampler.identities}, {"samples", sampler.samples}}},
      {"data",
       {{"source", data.source},
        {"synthetic",
         {{"identities", s.identities},
          {"observations", s.observations},
          {"attributes", s.attributes},
          {"visual_dim", s.visual_dim},
          {"cameras", s.cameras},
          {"sigma_vis", s.sigma_vis},
          {"p_token_err", s.p_token_err},
          {"p_distractor", s.p_distractor},
          {"world_seed", s.world_seed},
          {"train_seed", s.train_seed},
          {"eval_seed", s.eval_seed}}},
        {"train_features", data.train_features},
        {"train_captions", data.train_captions},
        {"eval_features", data.eval_features},
        {"eval_captions", data.eval_captions}}},
      {"eval",
       {{"metric", to_string(eval.metric)},
        {"rerank", eval.rerank},
        {"k1", eval.rerank_options.k1},
        {"k2", eval.rerank_options.k2},
        {"lambda", eval.rerank_options.lambda}}},
      {"seed", seed}};
}

namespace {

// Copies known keys from `src` into `dst`, rejecting anything unexpected.
void merge_strict(json& dst, const json& src, const std::string& path) {
  if (!src.is_object()) throw std::invalid_argument("config: '" + path + "' must be an object");
  for (const auto& [key, value] : src.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!dst.contains(key)) throw std::invalid_argument("config: unknown key '" + where + "'");
    if (dst[key].is_object())
      merge_strict(dst[key], value, where);
    else
      dst[key] = value;
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  json merged = ExperimentConfig{}.to_json();
  merge_strict(merged, j, "");
  ExperimentConfig c;
  try {
    const auto& m = merged["model"];
    c.model.embedding_dim = m["embedding_dim"].get<std::size_t>();
    c.model.hidden_dim = m["hidden_dim"].get<std::size_t>();
    c.model.reduced_dim = m["reduced_dim"].get<std::size_t>();
    c.model.visual_dim = m["visual_dim"].get<std::size_t>();
    c.model.gate_projection = m["gate_projection"].get<std::size_t>();
    const auto& g = merged["gate"];
    c.gate.tau = g["tau"].get<double>();
    c.gate.train_mode = gate_mode_from_string(g["train_mode"].get<std::string>());
    c.gate.enabled = g["enabled"].get<bool>();
    c.gate.literal_paper_cell = g["literal_paper_cell"].get<bool>();
    const auto& l = merged["loss"];
    c.loss.alpha = l["alpha"].get<double>();
    c.loss.triplet = l["triplet"].get<bool>();
    c.loss.normalize = l["normalize"].get<bool>();
    const auto& o = merged["optimizer"];
    c.optimizer.type = o["type"].get<std::string>();
    c.optimizer.learning_rate = o["learning_rate"].get<double>();
    c.optimizer.beta1 = o["beta1"].get<double>();
    c.optimizer.beta2 = o["beta2"].get<double>();
    c.optimizer.epsilon = o["epsilon"].get<double>();
    c.optimizer.weight_decay = o["weight_decay"].get<double>();
    c.optimizer.epochs = o["epochs"].get<std::size_t>();
    const auto& sp = merged["sampler"];
    c.sampler.identities = sp["identities"].get<std::size_t>();
    c.sampler.samples = sp["samples"].get<std::size_t>();
    const auto& d = merged["data"];
    c.data.source = d["source"].get<std::string>();
    const auto& s = d["synthetic"];
    auto& cs = c.data.synthetic;
    cs.identities = s["identities"].get<std::size_t>();
    cs.observations = s["observations"].get<std::size_t>();
    cs.attributes = s["attributes"].get<std::size_t>();
    cs.visual_dim = s["visual_dim"].get<std::size_t>();
    cs.cameras = s["cameras"].get<std::size_t>();
    cs.sigma_vis = s["sigma_vis"].get<double>();
    cs.p_token_err = s["p_token_err"].get<double>();
    cs.p_distractor = s["p_distractor"].get<double>();
    cs.world_seed = s["world_seed"].get<std::uint64_t>();
    cs.train_seed = s["train_seed"].get<std::uint64_t>();
    cs.eval_seed = s["eval_seed"].get<std::uint64_t>();
    c.data.train_features = d["train_features"].get<std::string>();
    c.data.train_captions = d["train_captions"].get<std::string>();
    c.data.eval_features = d["eval_features"].get<std::string>();
    c.data.eval_captions = d["eval_captions"].get<std::string>();
    const auto& e = merged["eval"];
    c.eval.metric = distance_metric_from_string(e["metric"].get<std::string>());
    c.eval.rerank = e["rerank"].get<bool>();
    c.eval.rerank_options.k1 = e["k1"].get<std::size_t>();
    c.eval.rerank_options.k2 = e["k2"].get<std::size_t>();
    c.eval.rerank_options.lambda = e["lambda"].get<double>();
    c.seed = merged["seed"].get<std::uint64_t>();
  } catch (const json::exception& ex) {
    throw std::invalid_argument(std::string("config: ") + ex.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& ex) {
    throw std::invalid_argument("config: " + path.string() + ": " + ex.what());
  }
  return from_json(j);
}

DataSplit load_data(const DataConfig& config) {
  DataSplit split;
  if (config.source == "files") {
    split.train = load_dataset(config.train_features, config.train_captions);
    if (!config.eval_features.empty())
      split.eval = load_dataset(config.eval_features,
                                config.eval_captions.empty() ? config.train_captions
                                                             : config.eval_captions);
    else
      split.eval = split.train;
    return split;
  }
  const auto& s = config.synthetic;
  const IdentityBank bank =
      synth_identity_bank(s.identities, s.attributes, s.visual_dim, s.world_seed, s.channel());
  Rng train_rng(s.train_seed);
  Rng eval_rng(s.eval_seed);
  split.train = synth_dataset(bank, s.observations, s.cameras, train_rng, "train");
  split.eval = synth_dataset(bank, s.observations, s.cameras, eval_rng, "eval");
  return split;
}

}  // namespace hornet
