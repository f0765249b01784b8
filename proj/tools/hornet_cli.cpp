// hornet: train, evaluate and ablate the gated caption encoder on synthetic
// or file-backed re-identification data.

#include "hornet/config.hpp"
#include "hornet/gradcheck.hpp"
#include "hornet/training.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate;
  std::optional<std::string> gate_mode;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Training seed (overrides config.seed)");
    cmd->add_option("--epochs", epochs, "Overrides optimizer.epochs");
    cmd->add_option("--lr", learning_rate, "Overrides optimizer.learning_rate");
    cmd->add_option("--gate-mode", gate_mode, "Overrides gate.train_mode (soft|hard)");
  }

  void apply(hornet::ExperimentConfig& c) const {
    if (seed) c.seed = *seed;
    if (epochs) c.optimizer.epochs = *epochs;
    if (learning_rate) c.optimizer.learning_rate = *learning_rate;
    if (gate_mode) c.gate.train_mode = hornet::gate_mode_from_string(*gate_mode);
    c.validate();
  }
};

hornet::ExperimentConfig load_config(const std::string& path) {
  return path.empty() ? hornet::ExperimentConfig{} : hornet::ExperimentConfig::load(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hornet: visually gated caption encoder for re-identification"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  std::string train_config, train_out = ".";
  Overrides train_overrides;
  train_cmd->add_option("--config", train_config, "Experiment config JSON")->required();
  train_cmd->add_option("--out", train_out, "Output directory");
  train_overrides.add_to(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_captions, eval_out, eval_metric;
  bool eval_synthetic = false, eval_rerank = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint JSON")->required();
  auto* data_opt = eval_cmd->add_option(
      "--data", eval_data, "Feature file (JSON Lines) or directory written by gen-data");
  auto* synth_opt = eval_cmd->add_flag("--synthetic", eval_synthetic,
                                       "Regenerate the evaluation split from the checkpoint config");
  data_opt->excludes(synth_opt);
  eval_cmd->add_option("--captions", eval_captions, "Captions file (default: alongside --data)");
  eval_cmd->add_option("--metric", eval_metric, "euclidean | squared_euclidean | cosine");
  eval_cmd->add_flag("--rerank", eval_rerank, "Apply k-reciprocal re-ranking");
  eval_cmd->add_option("--out", eval_out, "Directory for metrics.json and run.json");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and compare the ablation variants");
  std::string ablate_config, ablate_out;
  Overrides ablate_overrides;
  ablate_cmd->add_option("--config", ablate_config, "Experiment config JSON")->required();
  ablate_cmd->add_option("--out", ablate_out, "Directory for ablation.json");
  ablate_overrides.add_to(ablate_cmd);

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the full objective");
  std::size_t grad_trials = 10;
  std::uint64_t grad_seed = 1;
  grad_cmd->add_option("--trials", grad_trials, "Number of random configurations");
  grad_cmd->add_option("--seed", grad_seed, "First seed");

  // gen-data
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic dataset as JSON Lines");
  std::string gen_out, gen_config;
  std::optional<std::size_t> gen_ids, gen_obs;
  std::optional<std::uint64_t> gen_seed;
  gen_cmd->add_option("--out", gen_out, "Output directory")->required();
  gen_cmd->add_option("--ids", gen_ids, "Number of identities");
  gen_cmd->add_option("--obs", gen_obs, "Observations per identity");
  gen_cmd->add_option("--seed", gen_seed, "World seed");
  gen_cmd->add_option("--config", gen_config, "Take synthetic parameters from a config");

  // rerank
  auto* rerank_cmd = app.add_subcommand("rerank", "Re-rank a stored retrieval run");
  std::string rerank_report, rerank_metric = "euclidean";
  hornet::RerankOptions rerank_opts;
  rerank_cmd->add_option("--report", rerank_report, "run.json written by eval --out")->required();
  rerank_cmd->add_option("--k1", rerank_opts.k1, "k1 (default 20)");
  rerank_cmd->add_option("--k2", rerank_opts.k2, "k2 (default 6)");
  rerank_cmd->add_option("--lambda", rerank_opts.lambda, "lambda (default 0.3)");
  rerank_cmd->add_option("--metric", rerank_metric, "Metric for the query/gallery blocks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      auto config = load_config(train_config);
      train_overrides.apply(config);
      fs::create_directories(train_out);
      hornet::TrainOptions opts;
      opts.diagnostic_path = fs::path(train_out) / "diverged_checkpoint.json";
      opts.on_epoch = [](const hornet::EpochLoss& e) {
        std::cout << "epoch " << e.epoch << " id=" << e.id_loss << " triplet=" << e.triplet_loss
                  << " total=" << e.total << std::endl;
      };
      const auto result = hornet::train(config, opts);
      result.checkpoint.save(fs::path(train_out) / "checkpoint.json");
      write_text(fs::path(train_out) / "loss_trace.csv", hornet::loss_trace_csv(result.trace));
      std::cout << "wrote " << (fs::path(train_out) / "checkpoint.json").string() << '\n';
    } else if (*eval_cmd) {
      const auto ckpt = hornet::Checkpoint::load(eval_ckpt);
      hornet::Dataset data;
      if (eval_synthetic || eval_data.empty()) {
        data = hornet::load_data(ckpt.config.data).eval;
      } else {
        fs::path features = eval_data, captions = eval_captions;
        if (fs::is_directory(features)) {
          if (captions.empty()) captions = features / "eval_captions.jsonl";
          features /= "eval_features.jsonl";
        } else if (captions.empty()) {
          throw std::invalid_argument("--captions is required when --data is a file");
        }
        data = hornet::load_dataset(features, captions);
      }
      hornet::EvalOptions opts{ckpt.config.eval.metric, eval_rerank || ckpt.config.eval.rerank,
                               ckpt.config.eval.rerank_options};
      if (!eval_metric.empty()) opts.metric = hornet::distance_metric_from_string(eval_metric);
      const auto result = hornet::evaluate(ckpt, data, opts);
      std::cout << result.metrics.to_json() << '\n'
                << "gates " << result.gates.to_json().dump() << '\n';
      if (!eval_out.empty()) {
        fs::create_directories(eval_out);
        write_text(fs::path(eval_out) / "metrics.json", result.metrics.to_json() + "\n");
        write_text(fs::path(eval_out) / "gates.json", result.gates.to_json().dump(2) + "\n");
        write_text(fs::path(eval_out) / "run.json", hornet::run_to_json(result.run).dump() + "\n");
      }
    } else if (*ablate_cmd) {
      auto config = load_config(ablate_config);
      ablate_overrides.apply(config);
      const auto table = hornet::ablation(
          config, [](const std::string& msg) { std::cerr << msg << std::endl; });
      std::cout << table.to_text();
      if (!ablate_out.empty()) {
        fs::create_directories(ablate_out);
        write_text(fs::path(ablate_out) / "ablation.json", table.to_json().dump(2) + "\n");
        write_text(fs::path(ablate_out) / "ablation.txt", table.to_text());
      }
    } else if (*grad_cmd) {
      bool ok = true;
      double worst = 0.0;
      for (std::size_t t = 0; t < grad_trials; ++t) {
        const auto check = hornet::pipeline_grad_check(grad_seed + t);
        worst = std::max(worst, check.report.max_rel_error);
        ok = ok && check.report.pass;
        std::cout << (check.report.pass ? "ok   " : "FAIL ") << check.describe() << '\n';
      }
      std::cout << "max relative error " << worst << (ok ? " (pass)" : " (FAIL)") << '\n';
      return ok ? 0 : 1;
    } else if (*gen_cmd) {
      auto config = load_config(gen_config);
      auto& s = config.data.synthetic;
      if (gen_ids) s.identities = *gen_ids;
      if (gen_obs) s.observations = *gen_obs;
      if (gen_seed) s.world_seed = *gen_seed;
      config.data.source = "synthetic";
      const auto split = hornet::load_data(config.data);
      fs::create_directories(gen_out);
      const fs::path out(gen_out);
      hornet::write_features(out / "features.jsonl", split.train);
      hornet::write_captions(out / "captions.jsonl", split.train);
      hornet::write_features(out / "eval_features.jsonl", split.eval);
      hornet::write_captions(out / "eval_captions.jsonl", split.eval);
      std::cout << "wrote " << split.train.size() << " training and " << split.eval.size()
                << " evaluation records to " << out.string() << '\n';
    } else if (*rerank_cmd) {
      auto run = hornet::run_from_json(read_json(rerank_report));
      run.distances = hornet::k_reciprocal_rerank(
          run, hornet::distance_metric_from_string(rerank_metric), rerank_opts);
      std::cout << hornet::evaluate_run(run).to_json() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
