// Python bindings. Structured values (configs, metrics, runs) cross the
// boundary as JSON text; the package wrapper turns them into dicts.

#include "hornet/config.hpp"
#include "hornet/encoder.hpp"
#include "hornet/gradcheck.hpp"
#include "hornet/retrieval.hpp"
#include "hornet/text.hpp"
#include "hornet/training.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace hornet;

namespace {

ExperimentConfig parse_config(const std::string& text) {
  auto config = ExperimentConfig::from_json(nlohmann::json::parse(text));
  config.validate();
  return config;
}

RetrievalRun make_run(const Eigen::MatrixXd& distances, std::vector<std::size_t> query_ids,
                      std::vector<std::size_t> query_cams, std::vector<std::size_t> gallery_ids,
                      std::vector<std::size_t> gallery_cams) {
  RetrievalRun run;
  run.distances = distances;
  run.query_ids = std::move(query_ids);
  run.query_cams = std::move(query_cams);
  run.gallery_ids = std::move(gallery_ids);
  run.gallery_cams = std::move(gallery_cams);
  run.validate();
  return run;
}

py::dict dataset_to_dict(const Dataset& data) {
  const std::size_t dim = data.empty() ? 0 : data.front().features.size();
  Eigen::MatrixXd features(data.size(), dim);
  std::vector<std::size_t> ids, cams;
  std::vector<std::string> captions, keys;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) features(i, j) = data[i].features[j];
    ids.push_back(data[i].identity);
    cams.push_back(data[i].camera);
    captions.push_back(data[i].caption);
    keys.push_back(data[i].image_key);
  }
  py::dict d;
  d["features"] = features;
  d["identities"] = ids;
  d["cameras"] = cams;
  d["captions"] = captions;
  d["image_keys"] = keys;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "HorNet core: gated text encoder, fusion losses and retrieval evaluation";

  py::register_exception<ad::ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_RuntimeError);

  m.def("default_config", [] { return ExperimentConfig{}.to_json().dump(); });
  m.def("normalize_config", [](const std::string& text) { return parse_config(text).to_json().dump(); },
        "Fill in defaults and validate a JSON config.");

  m.def("tokenize", [](const std::string& caption) { return tokenize(caption); });
  m.def(
      "build_vocab",
      [](const std::vector<std::string>& corpus, std::size_t min_freq) {
        return build_vocab(corpus, min_freq).tokens();
      },
      py::arg("corpus"), py::arg("min_freq") = 1, "Id-ordered token list; 0 and 1 are PAD and UNK.");
  m.def(
      "encode",
      [](const std::vector<std::string>& tokens, const std::string& caption) {
        return Vocabulary::from_tokens(tokens).encode(caption).ids;
      },
      py::arg("vocabulary"), py::arg("caption"));

  m.def(
      "gumbel_sigmoid_samples",
      [](double logit, double tau, std::size_t n, std::uint64_t seed, bool hard) {
        Rng rng(seed);
        std::vector<double> out(n);
        for (double& z : out) z = gumbel_sigmoid(logit, tau, rng, hard);
        return out;
      },
      py::arg("logit"), py::arg("tau") = 0.3, py::arg("n") = 1, py::arg("seed") = 0,
      py::arg("hard") = false);

  m.def(
      "distance_matrix",
      [](const Eigen::MatrixXd& q, const Eigen::MatrixXd& g, const std::string& metric) {
        return distance_matrix(q, g, distance_metric_from_string(metric));
      },
      py::arg("query"), py::arg("gallery"), py::arg("metric") = "euclidean");
  m.def(
      "evaluate_distances",
      [](const Eigen::MatrixXd& d, std::vector<std::size_t> qid, std::vector<std::size_t> qcam,
         std::vector<std::size_t> gid, std::vector<std::size_t> gcam) {
        return evaluate_run(make_run(d, std::move(qid), std::move(qcam), std::move(gid), std::move(gcam)))
            .to_json();
      },
      py::arg("distances"), py::arg("query_ids"), py::arg("query_cams"), py::arg("gallery_ids"),
      py::arg("gallery_cams"));
  m.def(
      "cmc_curve",
      [](const Eigen::MatrixXd& d, std::vector<std::size_t> qid, std::vector<std::size_t> qcam,
         std::vector<std::size_t> gid, std::vector<std::size_t> gcam) {
        return cmc(make_run(d, std::move(qid), std::move(qcam), std::move(gid), std::move(gcam))).curve;
      },
      py::arg("distances"), py::arg("query_ids"), py::arg("query_cams"), py::arg("gallery_ids"),
      py::arg("gallery_cams"));
  m.def(
      "rerank",
      [](const Eigen::MatrixXd& q_g, const Eigen::MatrixXd& q_q, const Eigen::MatrixXd& g_g,
         std::size_t k1, std::size_t k2, double lambda) {
        return k_reciprocal_rerank(q_g, q_q, g_g, RerankOptions{k1, k2, lambda});
      },
      py::arg("q_g"), py::arg("q_q"), py::arg("g_g"), py::arg("k1") = 20, py::arg("k2") = 6,
      py::arg("lambda_") = 0.3);

  m.def(
      "load_data",
      [](const std::string& config) {
        const auto split = load_data(parse_config(config).data);
        return py::make_tuple(dataset_to_dict(split.train), dataset_to_dict(split.eval));
      },
      "(train, eval) datasets described by a JSON config.");

  m.def(
      "pipeline_grad_check",
      [](std::uint64_t seed) {
        const auto check = pipeline_grad_check(seed);
        py::dict d;
        d["pass"] = check.report.pass;
        d["max_rel_error"] = check.report.max_rel_error;
        d["worst_tensor"] = check.worst_tensor;
        d["description"] = check.describe();
        return d;
      },
      py::arg("seed"));

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_static("load", &Checkpoint::load, py::arg("path"))
      .def("save", &Checkpoint::save, py::arg("path"))
      .def_readonly("step", &Checkpoint::step)
      .def_readonly("vocabulary", &Checkpoint::vocabulary)
      .def("config_json", [](const Checkpoint& c) { return c.config.to_json().dump(); })
      .def("to_json", [](const Checkpoint& c) { return c.to_json().dump(); });

  m.def(
      "train",
      [](const std::string& config) {
        const auto cfg = parse_config(config);
        TrainResult result;
        {
          py::gil_scoped_release release;
          result = train(cfg);
        }
        std::vector<py::dict> trace;
        for (const auto& e : result.trace) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["id_loss"] = e.id_loss;
          d["triplet_loss"] = e.triplet_loss;
          d["total"] = e.total;
          trace.push_back(d);
        }
        return py::make_tuple(std::move(result.checkpoint), trace);
      },
      py::arg("config"), "Train on the config's data; returns (checkpoint, per-epoch losses).");

  m.def(
      "evaluate",
      [](const Checkpoint& checkpoint, const std::string& metric, bool rerank) {
        const auto split = load_data(checkpoint.config.data);
        EvalOptions opts;
        opts.metric = distance_metric_from_string(metric);
        opts.rerank = rerank;
        opts.rerank_options = checkpoint.config.eval.rerank_options;
        return evaluate(checkpoint, split.eval, opts).to_json().dump();
      },
      py::arg("checkpoint"), py::arg("metric") = "euclidean", py::arg("rerank") = false,
      "Metrics and gate statistics on the checkpoint's evaluation split, as JSON.");

  m.def(
      "ablation",
      [](const std::string& config) {
        const auto cfg = parse_config(config);
        py::gil_scoped_release release;
        return ablation(cfg).to_json().dump();
      },
      py::arg("config"));
}
