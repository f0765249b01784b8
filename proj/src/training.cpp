#include "hornet/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace hornet {

using nlohmann::json;

namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

std::map<std::size_t, std::vector<std::size_t>> group_by_identity(const Dataset& data) {
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.size(); ++i) groups[data[i].identity].push_back(i);
  return groups;
}

}  // namespace

// ---- PK sampling ----------------------------------------------------------

std::vector<std::size_t> pk_sample(const Dataset& data, std::size_t P, std::size_t K, Rng& rng) {
  if (P == 0 || K == 0) throw std::invalid_argument("pk_sample: P and K must be positive");
  std::vector<std::vector<std::size_t>> eligible;
  for (auto& [id, members] : group_by_identity(data))
    if (members.size() >= K) eligible.push_back(members);
  if (eligible.size() < P)
    throw std::invalid_argument("pk_sample: only " + std::to_string(eligible.size()) +
                                " identities have >= " + std::to_string(K) +
                                " observations, need " + std::to_string(P));
  // Partial Fisher-Yates for both levels.
  std::vector<std::size_t> batch;
  batch.reserve(P * K);
  for (std::size_t p = 0; p < P; ++p) {
    std::swap(eligible[p], eligible[p + rng.below(eligible.size() - p)]);
    auto& members = eligible[p];
    for (std::size_t k = 0; k < K; ++k) {
      std::swap(members[k], members[k + rng.below(members.size() - k)]);
      batch.push_back(members[k]);
    }
  }
  return batch;
}

PkSampler::PkSampler(const Dataset& data, std::size_t P, std::size_t K) : p_(P), k_(K) {
  if (P == 0 || K == 0) throw std::invalid_argument("PkSampler: P and K must be positive");
  for (auto& [id, members] : group_by_identity(data)) {
    if (members.size() < K) continue;
    identities_.push_back(id);
    members_.push_back(members);
  }
  if (identities_.size() < P)
    throw std::invalid_argument("PkSampler: only " + std::to_string(identities_.size()) +
                                " identities have >= " + std::to_string(K) +
                                " observations, need " + std::to_string(P));
  pools_.resize(identities_.size());
}

std::vector<std::size_t> PkSampler::draw(std::size_t slot, Rng& rng) {
  auto& pool = pools_[slot];
  std::vector<std::size_t> out;
  while (out.size() < k_ && !pool.empty()) {
    out.push_back(pool.back());
    pool.pop_back();
  }
  if (out.size() < k_) {
    std::vector<std::size_t> fresh;
    for (std::size_t m : members_[slot])
      if (std::find(out.begin(), out.end(), m) == out.end()) fresh.push_back(m);
    shuffle(fresh, rng);
    while (out.size() < k_) {
      out.push_back(fresh.back());
      fresh.pop_back();
    }
    // Everything drawn this round goes back in the next pool.
    pool = members_[slot];
    shuffle(pool, rng);
    pool.erase(std::remove_if(pool.begin(), pool.end(),
                              [&](std::size_t m) {
                                return std::find(out.begin(), out.end(), m) != out.end();
                              }),
               pool.end());
  }
  return out;
}

std::vector<std::vector<std::size_t>> PkSampler::epoch(Rng& rng) {
  std::vector<std::size_t> order(identities_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += p_) {
    std::vector<std::size_t> slots(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(start + p_, order.size())));
    while (slots.size() < p_) {
      const std::size_t extra = rng.below(identities_.size());
      if (std::find(slots.begin(), slots.end(), extra) == slots.end()) slots.push_back(extra);
    }
    std::vector<std::size_t> batch;
    for (std::size_t s : slots)
      for (std::size_t idx : draw(s, rng)) batch.push_back(idx);
    batches.push_back(std::move(batch));
  }
  return batches;
}

// ---- optimisation ---------------------------------------------------------

Optimizer::Optimizer(const OptimizerConfig& config, std::vector<ad::NamedTensor> params)
    : config_(config), params_(std::move(params)) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

void Optimizer::step() {
  ++t_;
  const double lr = config_.learning_rate;
  const bool adam = config_.type == "adam";
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k].tensor;
    const auto g = p.grad();
    if (g.empty()) continue;
    auto w = p.mutable_data();
    // Decoupled decay: shrink before the gradient step.
    if (config_.weight_decay > 0.0)
      for (double& x : w) x *= 1.0 - lr * config_.weight_decay;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!adam) {
        w[i] -= lr * g[i];
        continue;
      }
      m_[k][i] = config_.beta1 * m_[k][i] + (1.0 - config_.beta1) * g[i];
      v_[k][i] = config_.beta2 * v_[k][i] + (1.0 - config_.beta2) * g[i] * g[i];
      w[i] -= lr * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + config_.epsilon);
    }
  }
}

// ---- checkpoint -----------------------------------------------------------

json Checkpoint::to_json() const {
  json tensors = json::object();
  for (const auto& [name, t] : model.named())
    tensors[name] = json{{"shape", t.shape()}, {"data", std::vector<double>(t.data().begin(), t.data().end())}};
  return json{{"format", "hornet-checkpoint"},
              {"version", 1},
              {"config", config.to_json()},
              {"step", step},
              {"rng_state", rng_state},
              {"vocabulary", vocabulary},
              {"class_identities", class_identities},
              {"model",
               {{"gate_mode", to_string(model.encoder.gate.mode)},
                {"tau", model.encoder.gate.tau},
                {"candidate",
                 model.encoder.candidate == CandidateActivation::tanh ? "tanh" : "sigmoid"},
                {"tensors", tensors}}}};
}

Checkpoint Checkpoint::from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "hornet-checkpoint")
      throw std::invalid_argument("checkpoint: unrecognised format");
    Checkpoint c;
    c.config = ExperimentConfig::from_json(j.at("config"));
    c.step = j.at("step").get<std::size_t>();
    c.rng_state = j.at("rng_state").get<std::string>();
    c.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    c.class_identities = j.at("class_identities").get<std::vector<std::size_t>>();
    const auto& m = j.at("model");
    const auto& tensors = m.at("tensors");
    auto shape_of = [&](const char* name) {
      return tensors.at(name).at("shape").get<std::vector<std::size_t>>();
    };
    ModelDims d;
    const auto emb = shape_of("embedding");
    const auto fc = shape_of("fusion.w_fc");
    const auto theta = shape_of("fusion.theta");
    d.vocab_size = emb.at(0);
    d.embedding_dim = emb.at(1);
    d.hidden_dim = fc.at(1);
    d.reduced_dim = fc.at(0);
    d.num_classes = theta.at(0);
    d.visual_dim = theta.at(1) - fc.at(0);
    if (tensors.contains("gate.w_visual")) d.gate_projection = shape_of("gate.w_visual").at(0);
    Rng scratch(0);
    c.model = HornetModel::init(d, scratch);
    c.model.encoder.gate.mode = gate_mode_from_string(m.at("gate_mode").get<std::string>());
    c.model.encoder.gate.tau = m.at("tau").get<double>();
    c.model.encoder.candidate = m.at("candidate").get<std::string>() == "sigmoid"
                                    ? CandidateActivation::sigmoid
                                    : CandidateActivation::tanh;
    auto named = c.model.named();
    if (named.size() != tensors.size())
      throw std::invalid_argument("checkpoint: expected " + std::to_string(named.size()) +
                                  " tensors, found " + std::to_string(tensors.size()));
    for (auto& [name, t] : named) {
      const auto& entry = tensors.at(name);
      if (entry.at("shape").get<ad::Shape>() != t.shape())
        throw std::invalid_argument("checkpoint: tensor '" + name + "' has shape " +
                                    ad::shape_str(entry.at("shape").get<ad::Shape>()) +
                                    ", expected " + ad::shape_str(t.shape()));
      const auto data = entry.at("data").get<std::vector<double>>();
      if (data.size() != t.size())
        throw std::invalid_argument("checkpoint: tensor '" + name + "' payload size mismatch");
      std::copy(data.begin(), data.end(), t.mutable_data().begin());
    }
    return c;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("checkpoint: ") + e.what());
  }
}

void Checkpoint::save(const std::filesystem::path& path) const {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + tmp.string());
    out << to_json().dump() << '\n';
    if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("checkpoint: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("checkpoint: " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

// ---- training -------------------------------------------------------------

std::string loss_trace_csv(const std::vector<EpochLoss>& trace) {
  std::ostringstream os;
  os << "epoch,id_loss,triplet_loss,total\n";
  os << std::setprecision(17);
  for (const auto& e : trace)
    os << e.epoch << ',' << e.id_loss << ',' << e.triplet_loss << ',' << e.total << '\n';
  return os.str();
}

TrainResult train(const ExperimentConfig& config, const Dataset& train_set,
                  const TrainOptions& options) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  const std::size_t visual_dim = train_set.front().features.size();
  if (config.model.visual_dim != 0 && config.model.visual_dim != visual_dim)
    throw std::invalid_argument("train: config visual_dim " + std::to_string(config.model.visual_dim) +
                                " does not match data dimension " + std::to_string(visual_dim));

  std::vector<std::string> corpus;
  corpus.reserve(train_set.size());
  for (const auto& r : train_set) corpus.push_back(r.caption);
  const Vocabulary vocab = build_vocab(corpus, 1);

  std::map<std::size_t, std::size_t> class_of;
  for (const auto& r : train_set) class_of.emplace(r.identity, 0);
  std::vector<std::size_t> class_identities;
  for (auto& [id, cls] : class_of) {
    cls = class_identities.size();
    class_identities.push_back(id);
  }

  Rng rng(config.seed);
  Rng init_rng = rng.split();
  Rng sample_rng = rng.split();
  Rng noise_rng = rng.split();

  ModelDims dims;
  dims.vocab_size = vocab.size();
  dims.embedding_dim = config.model.embedding_dim;
  dims.hidden_dim = config.model.hidden_dim;
  dims.reduced_dim = config.model.reduced_dim;
  dims.visual_dim = visual_dim;
  dims.num_classes = class_identities.size();
  dims.gate_projection = config.model.gate_projection;
  HornetModel model = HornetModel::init(dims, init_rng);
  model.encoder.gate.tau = config.gate.tau;
  model.encoder.gate.mode = config.gate.enabled ? config.gate.train_mode : GateMode::forced_open;
  model.encoder.candidate = config.gate.literal_paper_cell ? CandidateActivation::sigmoid
                                                           : CandidateActivation::tanh;

  std::vector<TokenSequence> captions;
  captions.reserve(train_set.size());
  for (const auto& r : train_set) {
    if (r.features.size() != visual_dim)
      throw std::invalid_argument("train: record '" + r.image_key + "' has inconsistent feature dimension");
    captions.push_back(vocab.encode(r.caption));
  }

  TrainResult result;
  auto& ckpt = result.checkpoint;
  ckpt.config = config;
  ckpt.vocabulary = vocab.tokens();
  ckpt.class_identities = class_identities;

  PkSampler sampler(train_set, config.sampler.identities, config.sampler.samples);
  Optimizer optimizer(config.optimizer, model.named());
  const LossOptions loss_options{config.loss.alpha, config.loss.triplet, config.loss.normalize};

  for (std::size_t epoch = 1; epoch <= config.optimizer.epochs; ++epoch) {
    EpochLoss sums{epoch};
    const auto batches = sampler.epoch(sample_rng);
    for (const auto& batch : batches) {
      model.zero_grad();
      GateNoise noise = GateNoise::sampled(noise_rng);
      std::vector<ad::Tensor> embeddings;
      std::vector<std::size_t> labels;
      embeddings.reserve(batch.size());
      for (std::size_t idx : batch) {
        embeddings.push_back(model.forward(captions[idx], train_set[idx].features, noise).embedding);
        labels.push_back(class_of.at(train_set[idx].identity));
      }
      auto finite = [](const ad::Tensor& t) {
        for (double x : t.data())
          if (!std::isfinite(x)) return false;
        return true;
      };
      // A non-finite embedding would break mining before the loss is formed.
      const bool embeddings_ok = std::all_of(embeddings.begin(), embeddings.end(), finite);
      LossTerms terms;
      if (embeddings_ok) terms = total_loss(embeddings, labels, model.fusion.theta, loss_options);
      const double total = embeddings_ok ? terms.total.item() : std::nan("");
      if (!std::isfinite(total)) {
        ckpt.model = model;
        ckpt.step = optimizer.steps();
        if (options.diagnostic_path) ckpt.save(*options.diagnostic_path);
        throw TrainingDiverged("train: non-finite loss at epoch " + std::to_string(epoch) +
                               ", step " + std::to_string(optimizer.steps()) +
                               (options.diagnostic_path
                                    ? "; diagnostic checkpoint at " + options.diagnostic_path->string()
                                    : std::string()));
      }
      ad::backward(terms.total);
      optimizer.step();
      sums.id_loss += terms.id;
      sums.triplet_loss += terms.triplet;
      sums.total += total;
    }
    const double n = static_cast<double>(batches.size());
    sums.id_loss /= n;
    sums.triplet_loss /= n;
    sums.total /= n;
    result.trace.push_back(sums);
    if (options.on_epoch) options.on_epoch(sums);
  }

  ckpt.model = model;
  ckpt.step = optimizer.steps();
  ckpt.rng_state = sample_rng.state() + "\n" + noise_rng.state();
  return result;
}

TrainResult train(const ExperimentConfig& config, const TrainOptions& options) {
  const DataSplit split = load_data(config.data);
  return train(config, split.train, options);
}

// ---- evaluation -----------------------------------------------------------

json GateStats::to_json() const {
  return json{{"attribute_mean", attribute_mean},   {"distractor_mean", distractor_mean},
              {"other_mean", other_mean},           {"attribute_count", attribute_count},
              {"distractor_count", distractor_count}, {"other_count", other_count},
              {"open_rate", open_rate}};
}

json EvalResult::to_json() const {
  return json{{"metrics", json::parse(metrics.to_json())}, {"gates", gates.to_json()}};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> query_gallery_split(
    const Dataset& data) {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<std::size_t> query, gallery;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (seen.emplace(data[i].identity, data[i].camera).second)
      query.push_back(i);
    else
      gallery.push_back(i);
  }
  return {query, gallery};
}

namespace {

RetrievalRun build_run(const Dataset& data, const Eigen::MatrixXd& embeddings) {
  const auto [query, gallery] = query_gallery_split(data);
  if (gallery.empty()) throw std::invalid_argument("evaluate: dataset yields an empty gallery");
  RetrievalRun run;
  run.query.resize(static_cast<Eigen::Index>(query.size()), embeddings.cols());
  run.gallery.resize(static_cast<Eigen::Index>(gallery.size()), embeddings.cols());
  for (std::size_t i = 0; i < query.size(); ++i) {
    run.query.row(static_cast<Eigen::Index>(i)) = embeddings.row(static_cast<Eigen::Index>(query[i]));
    run.query_ids.push_back(data[query[i]].identity);
    run.query_cams.push_back(data[query[i]].camera);
  }
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    run.gallery.row(static_cast<Eigen::Index>(i)) =
        embeddings.row(static_cast<Eigen::Index>(gallery[i]));
    run.gallery_ids.push_back(data[gallery[i]].identity);
    run.gallery_cams.push_back(data[gallery[i]].camera);
  }
  return run;
}

void score_run(EvalResult& result, const EvalOptions& options) {
  result.run.compute_distances(options.metric);
  if (options.rerank)
    result.run.distances = k_reciprocal_rerank(result.run, options.metric, options.rerank_options);
  result.metrics = evaluate_run(result.run);
}

}  // namespace

EvalResult evaluate(const Checkpoint& checkpoint, const Dataset& data, const EvalOptions& options) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const Vocabulary vocab = Vocabulary::from_tokens(checkpoint.vocabulary);
  const HornetModel model = checkpoint.model.with_gate_mode(
      checkpoint.config.gate.enabled ? GateMode::hard : GateMode::forced_open);
  const std::size_t fused = model.fused_dim();

  Eigen::MatrixXd embeddings(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(fused));
  double sums[3] = {0, 0, 0};
  std::size_t counts[3] = {0, 0, 0};
  std::size_t open = 0, total = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& rec = data[i];
    if (rec.features.size() != model.visual_dim())
      throw std::invalid_argument("evaluate: record '" + rec.image_key + "' has feature dimension " +
                                  std::to_string(rec.features.size()) + ", checkpoint expects " +
                                  std::to_string(model.visual_dim()));
    GateNoise noise = GateNoise::disabled();
    const auto out = model.forward(vocab.encode(rec.caption), rec.features, noise);
    const auto f = out.embedding.data();
    for (std::size_t c = 0; c < fused; ++c)
      embeddings(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = f[c];
    auto tokens = tokenize(rec.caption);
    for (std::size_t t = 0; t < out.gates.size(); ++t) {
      const double z = out.gates[t].item();
      const auto cls = t < tokens.size() ? classify_token(tokens[t]) : TokenClass::other;
      sums[static_cast<int>(cls)] += z;
      counts[static_cast<int>(cls)] += 1;
      open += z >= 0.5 ? 1 : 0;
      ++total;
    }
  }

  EvalResult result;
  auto mean = [&](int k) { return counts[k] ? sums[k] / static_cast<double>(counts[k]) : 0.0; };
  result.gates.attribute_mean = mean(0);
  result.gates.distractor_mean = mean(1);
  result.gates.other_mean = mean(2);
  result.gates.attribute_count = counts[0];
  result.gates.distractor_count = counts[1];
  result.gates.other_count = counts[2];
  result.gates.open_rate = total ? static_cast<double>(open) / static_cast<double>(total) : 0.0;
  result.run = build_run(data, embeddings);
  score_run(result, options);
  return result;
}

EvalResult evaluate_visual_only(const Dataset& data, const EvalOptions& options) {
  if (data.empty()) throw std::invalid_argument("evaluate_visual_only: empty dataset");
  const std::size_t dim = data.front().features.size();
  Eigen::MatrixXd embeddings(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].features.size() != dim)
      throw std::invalid_argument("evaluate_visual_only: inconsistent feature dimension");
    for (std::size_t c = 0; c < dim; ++c)
      embeddings(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = data[i].features[c];
  }
  EvalResult result;
  result.run = build_run(data, embeddings);
  score_run(result, options);
  return result;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw std::invalid_argument("run: ragged matrix");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

}  // namespace

json run_to_json(const RetrievalRun& run) {
  return json{{"query", matrix_to_json(run.query)},
              {"query_ids", run.query_ids},
              {"query_cams", run.query_cams},
              {"gallery", matrix_to_json(run.gallery)},
              {"gallery_ids", run.gallery_ids},
              {"gallery_cams", run.gallery_cams},
              {"distances", matrix_to_json(run.distances)}};
}

RetrievalRun run_from_json(const json& j) {
  try {
    RetrievalRun run;
    run.query = matrix_from_json(j.at("query"));
    run.gallery = matrix_from_json(j.at("gallery"));
    run.query_ids = j.at("query_ids").get<std::vector<std::size_t>>();
    run.query_cams = j.at("query_cams").get<std::vector<std::size_t>>();
    run.gallery_ids = j.at("gallery_ids").get<std::vector<std::size_t>>();
    run.gallery_cams = j.at("gallery_cams").get<std::vector<std::size_t>>();
    run.distances = matrix_from_json(j.at("distances"));
    run.validate();
    return run;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("run: ") + e.what());
  }
}

// ---- ablation -------------------------------------------------------------

json AblationTable::to_json() const {
  auto row_json = [](const AblationRow& r) {
    return json{{"name", r.name},
                {"metrics", json::parse(r.metrics.to_json())},
                {"gates", r.gates.to_json()},
                {"final_loss", r.final_loss}};
  };
  json out{{"rows", json::array()}, {"visual_only", row_json(visual_only)}};
  for (const auto& r : rows) out["rows"].push_back(row_json(r));
  return out;
}

std::string AblationTable::to_text() const {
  std::ostringstream os;
  os << std::left << std::setw(28) << "variant" << std::right << std::setw(8) << "mAP"
     << std::setw(8) << "top-1" << std::setw(8) << "top-5" << std::setw(8) << "top-10"
     << std::setw(8) << "top-20" << '\n';
  auto line = [&](const AblationRow& r) {
    os << std::left << std::setw(28) << r.name << std::right << std::fixed << std::setprecision(4)
       << std::setw(8) << r.metrics.map;
    for (std::size_t k : {1, 5, 10, 20}) os << std::setw(8) << r.metrics.cmc.at(k);
    os << '\n';
  };
  line(visual_only);
  for (const auto& r : rows) line(r);
  return os.str();
}

const AblationRow& AblationTable::row(const std::string& name) const {
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw std::out_of_range("ablation: no row named '" + name + "'");
}

AblationTable ablation(const ExperimentConfig& config,
                       const std::function<void(const std::string&)>& progress) {
  config.validate();
  const DataSplit split = load_data(config.data);
  const EvalOptions options{config.eval.metric, false, config.eval.rerank_options};

  struct Variant {
    const char* name;
    bool gates;
    bool triplet;
  };
  const Variant variants[] = {{"ID loss", false, false},
                              {"ID+Triplet", false, true},
                              {"ID+HorNet", true, false},
                              {"ID+Triplet+HorNet", true, true}};

  AblationTable table;
  table.visual_only.name = "visual only";
  table.visual_only.metrics = evaluate_visual_only(split.eval, options).metrics;

  RetrievalRun full_run;
  GateStats full_gates;
  for (const auto& v : variants) {
    if (progress) progress(std::string("training ") + v.name);
    ExperimentConfig c = config;
    c.gate.enabled = v.gates;
    c.loss.triplet = v.triplet;
    const TrainResult trained = train(c, split.train);
    EvalResult eval = evaluate(trained.checkpoint, split.eval, options);
    table.rows.push_back({v.name, eval.metrics, eval.gates,
                          trained.trace.empty() ? 0.0 : trained.trace.back().total});
    full_run = std::move(eval.run);
    full_gates = eval.gates;
  }

  if (progress) progress("re-ranking ID+Triplet+HorNet");
  full_run.distances = k_reciprocal_rerank(full_run, config.eval.metric, config.eval.rerank_options);
  table.rows.push_back({"ID+Triplet+HorNet+Rerank", evaluate_run(full_run), full_gates,
                        table.rows.back().final_loss});
  return table;
}

}  // namespace hornet
