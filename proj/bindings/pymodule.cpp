// Python bindings for the main operations: data generation, training,
// evaluation, prediction and the small numeric utilities.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "anticipate/checkpoint.hpp"
#include "anticipate/datagen.hpp"
#include "anticipate/evalmoc.hpp"
#include "anticipate/harness.hpp"
#include "anticipate/recognition.hpp"

namespace py = pybind11;
using namespace anticipate;

namespace {

ModelConfig make_model_config(int hidden_dim, int heads, int tcn_layers,
                              int tcn_filters, const std::string& ablation) {
  ModelConfig m;
  m.hidden_dim = hidden_dim;
  m.heads = heads;
  m.tcn_layers = tcn_layers;
  m.tcn_filters = tcn_filters;
  m.ablation = ablation_from_name(ablation);
  if (!m.use_tcn()) m.encoder_input = EncoderInput::RawFeatures;
  return m;
}

}  // namespace

PYBIND11_MODULE(_anticipate, m) {
  m.doc() = "Long-horizon activity anticipation on synthetic grammar data";

  m.def("write_default_grammar", [](const std::string& path) {
    write_grammar(path, default_grammar());
  });

  m.def(
      "generate_dataset",
      [](const std::string& grammar_path, const std::string& out_dir, int videos,
         std::uint64_t seed) {
        Grammar g = parse_grammar(grammar_path);
        GeneratedDataset ds = generate_dataset(g, videos, seed);
        std::vector<std::string> names;
        for (const auto& c : g.classes) names.push_back(c.name);
        write_dataset(ds.videos, ds.train_ids, ds.test_ids, names, out_dir);
        return py::make_tuple(ds.train_ids, ds.test_ids);
      },
      py::arg("grammar_path"), py::arg("out_dir"), py::arg("videos") = 250,
      py::arg("seed") = 1);

  m.def(
      "train",
      [](const std::string& data_dir, const std::string& out_ckpt, int epochs,
         const std::string& ablation, std::uint64_t seed, int hidden_dim, int heads,
         int tcn_layers, int tcn_filters, double lr, bool two_step) {
        RunConfig cfg;
        cfg.data_dir = data_dir;
        cfg.epochs = epochs;
        cfg.seed = seed;
        cfg.lr = lr;
        cfg.two_step = two_step;
        cfg.model = make_model_config(hidden_dim, heads, tcn_layers, tcn_filters, ablation);
        Dataset ds = load_dataset(data_dir);
        cfg.model.num_classes = ds.num_classes();
        cfg.model.feature_dim = ds.feature_dim;
        TrainResult res = two_step ? train_two_step(ds, cfg) : train(ds, cfg);
        save_model(out_ckpt, cfg.model, res.params);
        std::vector<std::vector<double>> log;
        for (const auto& row : res.loss_log)
          log.push_back({row[0], row[1], row[2], row[3]});
        return log;
      },
      py::arg("data_dir"), py::arg("out_ckpt"), py::arg("epochs") = 80,
      py::arg("ablation") = "full", py::arg("seed") = 1, py::arg("hidden_dim") = 64,
      py::arg("heads") = 2, py::arg("tcn_layers") = 6, py::arg("tcn_filters") = 32,
      py::arg("lr") = 1e-3, py::arg("two_step") = false);

  m.def(
      "evaluate",
      [](const std::string& ckpt, const std::string& data_dir, bool video_level,
         const std::string& subset) {
        auto [cfg, params] = load_model(ckpt);
        Dataset ds = load_dataset(data_dir);
        Predictor pred(cfg, std::move(params));
        std::vector<std::string> prefixes;
        {
          std::istringstream ss(subset);
          std::string p;
          while (std::getline(ss, p, ',')) prefixes.push_back(p);
        }
        std::vector<const VideoSample*> test;
        for (const auto& id : ds.test_ids) {
          bool keep = prefixes.empty();
          for (const auto& p : prefixes) keep = keep || id.rfind(p, 0) == 0;
          if (keep) test.push_back(&ds.find(id));
        }
        if (test.empty()) throw InputError("evaluate: empty test set");
        EvalGrid grid = evaluate(pred.decode_fn(), test, ds.num_classes(), {}, video_level);
        std::vector<py::tuple> out;
        for (const auto& c : grid.cells)
          out.push_back(py::make_tuple(c.obs_frac, c.pred_frac, c.moc));
        return out;
      },
      py::arg("ckpt"), py::arg("data_dir"), py::arg("video_level") = false,
      py::arg("subset") = "");

  m.def(
      "predict",
      [](const std::string& ckpt, const std::string& data_dir,
         const std::string& video_id, double obs, double pred_frac) {
        auto [cfg, params] = load_model(ckpt);
        Dataset ds = load_dataset(data_dir);
        Predictor pred(cfg, std::move(params));
        PredictOutput out = predict_video(pred, ds.find(video_id), obs, pred_frac);
        std::vector<std::string> seg_names, frame_names;
        for (int c : out.segments.labels)
          seg_names.push_back(ds.class_names[static_cast<std::size_t>(c)]);
        for (int c : out.frame_labels)
          frame_names.push_back(ds.class_names[static_cast<std::size_t>(c)]);
        return py::make_tuple(seg_names, out.segments.rel_durations, frame_names);
      },
      py::arg("ckpt"), py::arg("data_dir"), py::arg("video_id"), py::arg("obs") = 0.2,
      py::arg("pred") = 0.5);

  m.def("segments_to_frames",
        [](const std::vector<int>& labels, const std::vector<double>& durations,
           int horizon) {
          SegmentSeq s;
          s.labels = labels;
          s.rel_durations = durations;
          return segments_to_frames(s, horizon);
        });
  m.def("moc_accuracy", &moc_accuracy);
  m.def("tcn_receptive_field", &tcn_receptive_field);
  m.def("softmax", [](const std::vector<double>& v) { return softmax(v); });

  py::register_exception<DimensionError>(m, "DimensionError");
  py::register_exception<InputError>(m, "InputError");
  py::register_exception<IoError>(m, "IoError");
  py::register_exception<NumericError>(m, "NumericError");
}
