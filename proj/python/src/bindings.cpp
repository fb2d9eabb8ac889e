#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tailmask/corruption.hpp"
#include "tailmask/error.hpp"
#include "tailmask/experiment.hpp"
#include "tailmask/io.hpp"
#include "tailmask/loss.hpp"
#include "tailmask/maskgen.hpp"
#include "tailmask/metrics.hpp"
#include "tailmask/report.hpp"
#include "tailmask/synth.hpp"

namespace py = pybind11;
using namespace tailmask;

namespace {

py::tuple value_grad(const ValueGrad& vg) { return py::make_tuple(vg.value, vg.grad); }

py::dict metric_rows(const MetricTable& table) {
  py::dict out;
  for (const auto& row : table.rows) {
    py::dict cell;
    cell["R"] = row.recall;
    cell["mR"] = row.mean_recall;
    out[py::make_tuple(std::string(to_string(row.strategy)), row.k)] = cell;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "C++ core of tailmask";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConsistencyError>(m, "ConsistencyError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("n_videos", &SynthConfig::n_videos)
      .def_readwrite("frames_per_video", &SynthConfig::frames_per_video)
      .def_readwrite("pairs_per_frame", &SynthConfig::pairs_per_frame)
      .def_readwrite("zipf_exponent", &SynthConfig::zipf_exponent)
      .def_readwrite("classes_per_category", &SynthConfig::classes_per_category)
      .def_readwrite("label_rate", &SynthConfig::label_rate)
      .def_readwrite("label_persistence", &SynthConfig::label_persistence)
      .def_readwrite("num_object_categories", &SynthConfig::num_object_categories)
      .def_readwrite("seed", &SynthConfig::seed);

  py::class_<DatasetAnnotations>(m, "Dataset")
      .def_property_readonly("num_labels", &DatasetAnnotations::num_labels)
      .def_property_readonly("num_frames", &DatasetAnnotations::num_frames)
      .def_property_readonly("num_videos", [](const DatasetAnnotations& d) { return d.videos.size(); })
      .def_property_readonly("num_classes", [](const DatasetAnnotations& d) { return d.ontology.num_predicates(); })
      .def("class_counts", [](const DatasetAnnotations& d) { return count_predicates(d).counts; })
      .def("violations",
           [](const DatasetAnnotations& d) {
             std::vector<std::string> out;
             for (const auto& v : validate_annotations(d)) out.push_back(v.to_string());
             return out;
           })
      .def("to_json", &annotations_to_json)
      .def("__eq__", [](const DatasetAnnotations& a, const DatasetAnnotations& b) { return a == b; });

  m.def("synth_longtail_dataset", &synth_longtail_dataset, py::arg("config"));
  m.def("annotations_from_json", &annotations_from_json, py::arg("text"));
  m.def("zipf_probabilities", &zipf_probabilities, py::arg("n"), py::arg("exponent"));
  m.def("entropy", [](const std::vector<std::int64_t>& counts) { return entropy(counts); }, py::arg("counts"));

  py::class_<MaskSchedule>(m, "MaskSchedule")
      .def_static("linear", &MaskSchedule::linear, py::arg("sampling_ratio"), py::arg("max_ratio") = 1.0)
      .def_static("fixed", &MaskSchedule::fixed, py::arg("ratio"));
  m.def("masking_ratio", &masking_ratio, py::arg("epoch"), py::arg("schedule"));
  m.def(
      "sample_target_counts",
      [](std::int64_t n, const std::vector<double>& probs, std::uint64_t seed) {
        return sample_target_counts(n, probs, seed).per_class;
      },
      py::arg("n_target"), py::arg("probs"), py::arg("seed"));

  py::class_<MaskSet>(m, "MaskSet")
      .def_property_readonly("epoch", &MaskSet::epoch)
      .def_property_readonly("ratio", &MaskSet::ratio)
      .def("count_masked", &MaskSet::count_masked)
      .def("__len__", &MaskSet::size)
      .def("to_json", [](const MaskSet& masks, const DatasetAnnotations& data) { return masks_to_json(masks, data); });
  m.def(
      "generate_epoch_masks",
      [](int epoch, const MaskSchedule& schedule, const DatasetAnnotations& data, std::uint64_t seed,
         const std::string& target_mode) {
        MaskGenOptions options;
        if (target_mode == "mask_literal") options.target_mode = TargetMode::mask_literal;
        else if (target_mode != "keep_balanced") throw ConfigError("unknown target mode '" + target_mode + "'");
        return generate_epoch_masks(epoch, schedule, data, seed, options);
      },
      py::arg("epoch"), py::arg("schedule"), py::arg("data"), py::arg("seed"),
      py::arg("target_mode") = "keep_balanced");

  m.def(
      "multilabel_margin_with_grad",
      [](const std::vector<double>& scores, const std::vector<int>& positives) {
        return value_grad(multilabel_margin_with_grad(scores, positives));
      },
      py::arg("scores"), py::arg("positives"));
  m.def(
      "masked_predicate_loss",
      [](const std::vector<double>& scores, const std::vector<int>& positives, const std::vector<std::uint8_t>& mask) {
        return value_grad(masked_predicate_loss(scores, positives, mask));
      },
      py::arg("scores"), py::arg("positives"), py::arg("mask"));
  m.def(
      "cross_entropy_with_grad",
      [](const std::vector<double>& probs, int label) { return value_grad(cross_entropy_with_grad(probs, label)); },
      py::arg("probs"), py::arg("label"));
  m.def(
      "smooth_l1_with_grad",
      [](const std::vector<double>& a, const std::vector<double>& b) { return value_grad(smooth_l1_with_grad(a, b)); },
      py::arg("a"), py::arg("b"));

  m.def(
      "evaluate_frames",
      [](const std::vector<std::vector<std::tuple<int, int, std::vector<double>>>>& frames,
         const std::vector<std::vector<std::tuple<int, int, int>>>& ground_truth, std::size_t num_classes,
         std::vector<int> ks) {
        if (frames.size() != ground_truth.size()) throw ConfigError("frames and ground truth differ in length");
        const std::vector<int> one_category{static_cast<int>(num_classes)};
        const auto ontology = PredicateOntology::with_counts(one_category, 2);
        std::vector<ScoredFrame> scored(frames.size());
        for (std::size_t f = 0; f < frames.size(); ++f) {
          scored[f].ground_truth.frame_index = static_cast<int>(f);
          for (const auto& [s, o, scores] : frames[f]) scored[f].pairs.push_back({s, o, scores});
          int slot = 0;
          for (const auto& [s, o, p] : ground_truth[f]) {
            scored[f].ground_truth.relations.push_back({s, o, p, slot++});
          }
        }
        EvalSpec spec;
        spec.ks = std::move(ks);
        return metric_rows(evaluate_frames(scored, ontology, spec));
      },
      py::arg("frames"), py::arg("ground_truth"), py::arg("num_classes"), py::arg("ks") = std::vector<int>{10, 20, 50},
      "Single-category evaluation by pair identity. frames[f] = [(sub, obj, scores)], "
      "ground_truth[f] = [(sub, obj, pred)]. Returns {(strategy, K): {'R', 'mR'}}.");

  m.def("format_delta", &format_delta, py::arg("value"), py::arg("baseline"));
  m.def(
      "corrupt_severity_parameter",
      [](const std::string& kind, int severity) { return severity_parameter(parse_corruption(kind), severity); },
      py::arg("kind"), py::arg("severity"));

  m.def("default_config_json", [] { return experiment_config_to_json(default_experiment_config()); });
  m.def(
      "run_train",
      [](const std::string& config_json) {
        const auto result = run_train(experiment_config_from_json(config_json));
        return py::make_tuple(checkpoint_to_json(result.params), train_report_json(result.report));
      },
      py::arg("config_json"), "Returns (checkpoint JSON, training report JSON).");
  m.def(
      "run_eval",
      [](const std::string& config_json, const std::string& checkpoint_json) {
        return metric_table_csv(run_eval(experiment_config_from_json(config_json), checkpoint_from_json(checkpoint_json)));
      },
      py::arg("config_json"), py::arg("checkpoint_json"), "Returns the metric CSV.");
  m.def(
      "run_robust",
      [](const std::string& config_json, const std::string& checkpoint_json) {
        return sweep_table_csv(run_robust(experiment_config_from_json(config_json), checkpoint_from_json(checkpoint_json)));
      },
      py::arg("config_json"), py::arg("checkpoint_json"), "Returns the robustness CSV.");
}
