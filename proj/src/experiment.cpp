#include "tailmask/experiment.hpp"

#include <set>

#include "json.hpp"
#include "tailmask/error.hpp"
#include "tailmask/io.hpp"
#include "tailmask/rng.hpp"

namespace tailmask {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and rejects whatever is left unread.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    if (!node_.contains(key)) return;
    seen_.insert(key);
    try {
      out = node_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    if (!node_.contains(key)) return nullptr;
    seen_.insert(key);
    return &node_.at(key);
  }

  std::string where(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& item : node_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown config key '" + where(item.key().c_str()) + "'");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

json synth_to_json(const SynthConfig& s) {
  return {{"n_videos", s.n_videos},
          {"frames_per_video", s.frames_per_video},
          {"pairs_per_frame", s.pairs_per_frame},
          {"zipf_exponent", s.zipf_exponent},
          {"classes_per_category", s.classes_per_category},
          {"label_rate", s.label_rate},
          {"label_persistence", s.label_persistence},
          {"num_object_categories", s.num_object_categories}};
}

void synth_from_json(const json& node, const std::string& path, SynthConfig& s) {
  Section sec(node, path);
  sec.read("n_videos", s.n_videos);
  sec.read("frames_per_video", s.frames_per_video);
  sec.read("pairs_per_frame", s.pairs_per_frame);
  sec.read("zipf_exponent", s.zipf_exponent);
  sec.read("classes_per_category", s.classes_per_category);
  sec.read("label_rate", s.label_rate);
  sec.read("label_persistence", s.label_persistence);
  sec.read("num_object_categories", s.num_object_categories);
  sec.finish();
}

json source_to_json(const DataSource& d) {
  json out = {{"synth", synth_to_json(d.synth)}};
  out["annotations"] = d.annotations ? json(d.annotations->string()) : json(nullptr);
  return out;
}

void source_from_json(const json& node, const std::string& path, DataSource& d) {
  Section sec(node, path);
  if (const json* a = sec.child("annotations")) {
    if (a->is_null()) d.annotations.reset();
    else if (a->is_string()) d.annotations = a->get<std::string>();
    else throw ConfigError(sec.where("annotations") + " must be a path or null");
  }
  if (const json* s = sec.child("synth")) synth_from_json(*s, sec.where("synth"), d.synth);
  sec.finish();
}

std::string target_mode_name(TargetMode mode) {
  return mode == TargetMode::mask_literal ? "mask_literal" : "keep_balanced";
}

std::string matching_name(Matching m) { return m == Matching::iou ? "iou" : "pair_identity"; }

void check_synth(const SynthConfig& s, const char* name) {
  const std::string p = name;
  if (s.n_videos < 0) throw ConfigError(p + ".n_videos must be >= 0");
  if (s.frames_per_video < 1) throw ConfigError(p + ".frames_per_video must be >= 1");
  if (s.pairs_per_frame < 1) throw ConfigError(p + ".pairs_per_frame must be >= 1");
  if (!(s.zipf_exponent >= 0.0)) throw ConfigError(p + ".zipf_exponent must be >= 0");
  if (s.classes_per_category.empty()) throw ConfigError(p + ".classes_per_category must not be empty");
  for (int c : s.classes_per_category) {
    if (c < 1) throw ConfigError(p + ".classes_per_category entries must be >= 1");
  }
  if (!(s.label_rate >= 0.0 && s.label_rate <= 1.0)) throw ConfigError(p + ".label_rate must be in [0, 1]");
  if (!(s.label_persistence >= 0.0 && s.label_persistence <= 1.0)) {
    throw ConfigError(p + ".label_persistence must be in [0, 1]");
  }
  if (s.num_object_categories < 2) throw ConfigError(p + ".num_object_categories must be >= 2");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!train_data.annotations) check_synth(train_data.synth, "train_data.synth");
  if (!test_data.annotations) check_synth(test_data.synth, "test_data.synth");
  train.validate();
  if (train.features.dim < 1) throw ConfigError("train.features.dim must be >= 1");
  if (!(train.features.noise_std >= 0.0)) throw ConfigError("train.features.noise_std must be >= 0");
  if (!(train.features.ar_coefficient >= 0.0 && train.features.ar_coefficient < 1.0)) {
    throw ConfigError("train.features.ar_coefficient must be in [0, 1)");
  }
  eval.validate();
  for (const auto& c : corruptions) c.validate();
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig config;
  config.train_data.synth.n_videos = 40;
  config.test_data.synth.n_videos = 20;
  config.train.schedule = MaskSchedule::fixed(0.5);
  for (CorruptionKind kind : kAllCorruptions) {
    for (int s = 1; s <= 5; ++s) config.corruptions.push_back({kind, s, 0, std::nullopt});
  }
  return config;
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  const auto& t = c.train;
  json strategies = json::array();
  for (Strategy s : c.eval.strategies) strategies.push_back(std::string(to_string(s)));
  json corruptions = json::array();
  for (const auto& spec : c.corruptions) {
    json item = {{"kind", std::string(to_string(spec.kind))}, {"severity", spec.severity}};
    if (spec.parameter) item["parameter"] = *spec.parameter;
    corruptions.push_back(item);
  }
  json doc = {
      {"seed", c.seed},
      {"train_data", source_to_json(c.train_data)},
      {"test_data", source_to_json(c.test_data)},
      {"train",
       {{"mode", std::string(to_string(t.mode))},
        {"epochs", t.epochs},
        {"learning_rate", t.learning_rate},
        {"clip_norm", t.clip_norm},
        {"weights",
         {{"gen", t.weights.gen},
          {"obj", t.weights.obj},
          {"ant", t.weights.ant},
          {"boxes", t.weights.boxes},
          {"recon", t.weights.recon}}},
        {"schedule",
         {{"mode", t.schedule.mode == ScheduleMode::linear ? "linear" : "fixed"},
          {"sampling_ratio", t.schedule.sampling_ratio},
          {"fixed_ratio", t.schedule.fixed_ratio},
          {"max_ratio", t.schedule.max_ratio}}},
        {"masking_enabled", t.masking_enabled},
        {"target_mode", target_mode_name(t.mask_options.target_mode)},
        {"target_probs", t.mask_options.probs_override},
        {"horizon", t.horizon},
        {"hidden", t.hidden},
        {"features",
         {{"dim", t.features.dim},
          {"noise_std", t.features.noise_std},
          {"ar_coefficient", t.features.ar_coefficient},
          {"prototype_seed", t.features.prototype_seed}}}}},
      {"eval",
       {{"ks", c.eval.ks},
        {"strategies", strategies},
        {"matching", matching_name(c.eval.matching)},
        {"iou_threshold", c.eval.iou_threshold},
        {"semi_threshold", c.eval.semi_threshold},
        {"observed_fraction", c.eval.observed_fraction ? json(*c.eval.observed_fraction) : json(nullptr)}}},
      {"corruptions", corruptions},
  };
  return doc.dump(2);
}

ExperimentConfig experiment_config_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  ExperimentConfig c = default_experiment_config();
  Section root(doc, "");
  root.read("seed", c.seed);
  if (const json* n = root.child("train_data")) source_from_json(*n, "train_data", c.train_data);
  if (const json* n = root.child("test_data")) source_from_json(*n, "test_data", c.test_data);

  if (const json* n = root.child("train")) {
    auto& t = c.train;
    Section sec(*n, "train");
    std::string mode = std::string(to_string(t.mode));
    sec.read("mode", mode);
    t.mode = parse_train_mode(mode);
    sec.read("epochs", t.epochs);
    sec.read("learning_rate", t.learning_rate);
    sec.read("clip_norm", t.clip_norm);
    if (const json* w = sec.child("weights")) {
      Section ws(*w, "train.weights");
      ws.read("gen", t.weights.gen);
      ws.read("obj", t.weights.obj);
      ws.read("ant", t.weights.ant);
      ws.read("boxes", t.weights.boxes);
      ws.read("recon", t.weights.recon);
      ws.finish();
    }
    if (const json* s = sec.child("schedule")) {
      Section ss(*s, "train.schedule");
      std::string smode = t.schedule.mode == ScheduleMode::linear ? "linear" : "fixed";
      ss.read("mode", smode);
      if (smode == "linear") t.schedule.mode = ScheduleMode::linear;
      else if (smode == "fixed") t.schedule.mode = ScheduleMode::fixed;
      else throw ConfigError("train.schedule.mode must be 'linear' or 'fixed'");
      ss.read("sampling_ratio", t.schedule.sampling_ratio);
      ss.read("fixed_ratio", t.schedule.fixed_ratio);
      ss.read("max_ratio", t.schedule.max_ratio);
      ss.finish();
    }
    sec.read("masking_enabled", t.masking_enabled);
    std::string target = target_mode_name(t.mask_options.target_mode);
    sec.read("target_mode", target);
    if (target == "keep_balanced") t.mask_options.target_mode = TargetMode::keep_balanced;
    else if (target == "mask_literal") t.mask_options.target_mode = TargetMode::mask_literal;
    else throw ConfigError("train.target_mode must be 'keep_balanced' or 'mask_literal'");
    sec.read("target_probs", t.mask_options.probs_override);
    sec.read("horizon", t.horizon);
    sec.read("hidden", t.hidden);
    if (const json* f = sec.child("features")) {
      Section fs(*f, "train.features");
      fs.read("dim", t.features.dim);
      fs.read("noise_std", t.features.noise_std);
      fs.read("ar_coefficient", t.features.ar_coefficient);
      fs.read("prototype_seed", t.features.prototype_seed);
      fs.finish();
    }
    sec.finish();
  }

  if (const json* n = root.child("eval")) {
    Section sec(*n, "eval");
    sec.read("ks", c.eval.ks);
    if (const json* s = sec.child("strategies")) {
      std::vector<std::string> names;
      try {
        names = s->get<std::vector<std::string>>();
      } catch (const json::exception&) {
        throw ConfigError("eval.strategies must be a list of names");
      }
      c.eval.strategies.clear();
      for (const auto& name : names) c.eval.strategies.push_back(parse_strategy(name));
    }
    std::string matching = matching_name(c.eval.matching);
    sec.read("matching", matching);
    if (matching == "pair_identity") c.eval.matching = Matching::pair_identity;
    else if (matching == "iou") c.eval.matching = Matching::iou;
    else throw ConfigError("eval.matching must be 'pair_identity' or 'iou'");
    sec.read("iou_threshold", c.eval.iou_threshold);
    sec.read("semi_threshold", c.eval.semi_threshold);
    if (const json* f = sec.child("observed_fraction")) {
      if (f->is_null()) c.eval.observed_fraction.reset();
      else if (f->is_number()) c.eval.observed_fraction = f->get<double>();
      else throw ConfigError("eval.observed_fraction must be a number or null");
    }
    sec.finish();
  }

  if (const json* n = root.child("corruptions")) {
    if (!n->is_array()) throw ConfigError("corruptions must be a list");
    c.corruptions.clear();
    for (std::size_t i = 0; i < n->size(); ++i) {
      Section sec((*n)[i], "corruptions[" + std::to_string(i) + "]");
      std::string kind;
      sec.read("kind", kind);
      CorruptionSpec spec;
      spec.kind = parse_corruption(kind);
      sec.read("severity", spec.severity);
      if (const json* p = sec.child("parameter")) {
        if (!p->is_number()) throw ConfigError(sec.where("parameter") + " must be a number");
        spec.parameter = p->get<double>();
      }
      sec.finish();
      c.corruptions.push_back(spec);
    }
  }
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return experiment_config_from_json(text);
}

TrainConfig seeded_train_config(const ExperimentConfig& config) {
  TrainConfig t = config.train;
  t.init_seed = derive_seed(config.seed, "init");
  t.order_seed = derive_seed(config.seed, "order");
  t.mask_seed = derive_seed(config.seed, "masks");
  t.feature_seed = derive_seed(config.seed, "features", 0);
  return t;
}

DatasetAnnotations load_split(const ExperimentConfig& config, bool test_split) {
  const DataSource& source = test_split ? config.test_data : config.train_data;
  if (source.annotations) return load_annotations(*source.annotations);
  SynthConfig synth = source.synth;
  synth.seed = derive_seed(config.seed, "data", test_split ? 1 : 0);
  return synth_longtail_dataset(synth);
}

std::uint64_t test_feature_seed(const ExperimentConfig& config) {
  return derive_seed(config.seed, "features", 1);
}

std::vector<CorruptionSpec> seeded_corruptions(const ExperimentConfig& config) {
  auto specs = config.corruptions;
  for (std::size_t i = 0; i < specs.size(); ++i) specs[i].seed = derive_seed(config.seed, "corruption", i);
  return specs;
}

TrainResult run_train(const ExperimentConfig& config) {
  config.validate();
  return train(load_split(config, false), seeded_train_config(config));
}

MetricTable run_eval(const ExperimentConfig& config, const ModelParams& params) {
  config.validate();
  const auto data = load_split(config, true);
  const auto features = generate_synthetic_video_batch(data, config.train.features, test_feature_seed(config));
  return evaluate_model(params, data, features, config.eval);
}

SweepTable run_robust(const ExperimentConfig& config, const ModelParams& params) {
  config.validate();
  const auto data = load_split(config, true);
  const auto specs = seeded_corruptions(config);
  return robustness_sweep(params, data, config.train.features, test_feature_seed(config), specs, config.eval);
}

}  // namespace tailmask
