#include "tailmask/io.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <type_traits>

#include "json.hpp"

#include "tailmask/error.hpp"

namespace tailmask {

using nlohmann::json;

namespace {

std::string fmt(double x) {
  std::ostringstream out;
  out.precision(17);
  out << x;
  return out.str();
}

std::string opt_fmt(const std::optional<double>& x) { return x ? fmt(*x) : std::string(); }

json parse_document(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("malformed ") + what + ": " + e.what());
  }
}

// Throws IoError with a location prefix when the lookup or conversion fails.
template <class T>
T get_at(const json& node, const char* key, const std::string& where) {
  if (!node.is_object() || !node.contains(key)) throw IoError(where + ": missing '" + key + "'");
  try {
    return node.at(key).get<T>();
  } catch (const json::exception&) {
    throw IoError(where + ": '" + key + "' has the wrong type");
  }
}

const json& array_at(const json& node, const char* key, const std::string& where) {
  if (!node.is_object() || !node.contains(key) || !node.at(key).is_array()) {
    throw IoError(where + ": '" + key + "' must be an array");
  }
  return node.at(key);
}

std::string predicate_label(const PredicateOntology& ontology, ClassId id) {
  const auto& name = ontology.class_name(id);
  int matches = 0;
  for (std::size_t c = 0; c < ontology.num_categories(); ++c) {
    if (ontology.find_class(ontology.category_name(c), name) >= 0) ++matches;
  }
  if (matches == 1) return name;
  return ontology.category_name(ontology.category_of(id)) + "/" + name;
}

ClassId parse_predicate(const PredicateOntology& ontology, const std::string& label, const std::string& where) {
  const auto slash = label.find('/');
  if (slash != std::string::npos) {
    const ClassId id = ontology.find_class(label.substr(0, slash), label.substr(slash + 1));
    if (id < 0) throw IoError(where + ": unknown predicate '" + label + "'");
    return id;
  }
  ClassId found = -1;
  for (std::size_t c = 0; c < ontology.num_categories(); ++c) {
    const ClassId id = ontology.find_class(ontology.category_name(c), label);
    if (id < 0) continue;
    if (found >= 0) throw IoError(where + ": ambiguous predicate '" + label + "', qualify it as <category>/<class>");
    found = id;
  }
  if (found < 0) throw IoError(where + ": unknown predicate '" + label + "'");
  return found;
}

}  // namespace

std::string annotations_to_json(const DatasetAnnotations& data) {
  const auto& ontology = data.ontology;
  json categories = json::array();
  for (std::size_t c = 0; c < ontology.num_categories(); ++c) {
    json classes = json::array();
    for (ClassId id : ontology.category_classes(c)) classes.push_back(ontology.class_name(id));
    categories.push_back({{"name", ontology.category_name(c)}, {"classes", classes}});
  }
  json objects = json::array();
  for (const auto& name : ontology.object_names()) objects.push_back(name);

  json videos = json::array();
  for (const auto& video : data.videos) {
    json frames = json::array();
    for (const auto& frame : video.frames) {
      json objs = json::array();
      for (const auto& o : frame.objects) {
        objs.push_back({{"id", o.id},
                        {"cat", ontology.object_name(o.category)},
                        {"box", {o.box.x0, o.box.y0, o.box.x1, o.box.y1}}});
      }
      json rels = json::array();
      for (const auto& r : frame.relations) {
        rels.push_back({{"sub", r.subject_id}, {"obj", r.object_id}, {"pred", predicate_label(ontology, r.predicate_id)}});
      }
      frames.push_back({{"t", frame.frame_index}, {"objects", objs}, {"relations", rels}});
    }
    videos.push_back({{"id", video.id}, {"frames", frames}});
  }
  json doc = {{"ontology", {{"categories", categories}, {"objects", objects}}}, {"videos", videos}};
  return doc.dump();
}

DatasetAnnotations annotations_from_json(std::string_view text) {
  const json doc = parse_document(text, "annotation document");
  if (!doc.is_object() || !doc.contains("ontology")) throw IoError("annotations: missing 'ontology'");
  const json& onto = doc.at("ontology");

  std::vector<PredicateCategory> categories;
  for (const auto& cat : array_at(onto, "categories", "ontology")) {
    const std::string where = "ontology.categories[" + std::to_string(categories.size()) + "]";
    categories.push_back({get_at<std::string>(cat, "name", where), get_at<std::vector<std::string>>(cat, "classes", where)});
  }
  const auto objects = get_at<std::vector<std::string>>(onto, "objects", "ontology");

  DatasetAnnotations data;
  try {
    data.ontology = PredicateOntology::create(std::move(categories), objects);
  } catch (const ConfigError& e) {
    throw IoError(std::string("ontology: ") + e.what());
  }

  const auto& videos = array_at(doc, "videos", "annotations");
  for (std::size_t v = 0; v < videos.size(); ++v) {
    const std::string vwhere = "videos[" + std::to_string(v) + "]";
    VideoAnnotations video;
    video.id = get_at<std::string>(videos[v], "id", vwhere);
    const auto& frames = array_at(videos[v], "frames", vwhere);
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const std::string fwhere = vwhere + ".frames[" + std::to_string(f) + "]";
      FrameAnnotations frame;
      frame.frame_index = get_at<int>(frames[f], "t", fwhere);
      const auto& objs = array_at(frames[f], "objects", fwhere);
      for (std::size_t i = 0; i < objs.size(); ++i) {
        const std::string owhere = fwhere + ".objects[" + std::to_string(i) + "]";
        ObjectInstance o;
        o.id = get_at<int>(objs[i], "id", owhere);
        if (objs[i].contains("cat") && objs[i].at("cat").is_number_integer()) {
          o.category = objs[i].at("cat").get<int>();
        } else {
          const auto name = get_at<std::string>(objs[i], "cat", owhere);
          o.category = data.ontology.find_object(name);
          if (o.category < 0) throw IoError(owhere + ": unknown object category '" + name + "'");
        }
        const auto box = get_at<std::vector<double>>(objs[i], "box", owhere);
        if (box.size() != 4) throw IoError(owhere + ": 'box' must have 4 coordinates");
        o.box = {box[0], box[1], box[2], box[3]};
        frame.objects.push_back(o);
      }
      const auto& rels = array_at(frames[f], "relations", fwhere);
      for (std::size_t i = 0; i < rels.size(); ++i) {
        const std::string rwhere = fwhere + ".relations[" + std::to_string(i) + "]";
        RelationInstance r;
        r.subject_id = get_at<int>(rels[i], "sub", rwhere);
        r.object_id = get_at<int>(rels[i], "obj", rwhere);
        r.predicate_id = parse_predicate(data.ontology, get_at<std::string>(rels[i], "pred", rwhere), rwhere);
        r.slot = static_cast<int>(i);
        frame.relations.push_back(r);
      }
      video.frames.push_back(std::move(frame));
    }
    data.videos.push_back(std::move(video));
  }

  const auto violations = validate_annotations(data);
  if (!violations.empty()) throw IoError("invalid annotations: " + violations.front().to_string());
  return data;
}

void save_annotations(const DatasetAnnotations& data, const std::filesystem::path& path) {
  write_text(path, annotations_to_json(data));
}

DatasetAnnotations load_annotations(const std::filesystem::path& path) {
  return annotations_from_json(read_text(path));
}

std::string masks_to_json(const MaskSet& masks, const DatasetAnnotations& data) {
  if (masks.num_videos() != data.videos.size()) throw ConsistencyError("mask set does not match the dataset");
  json entries = json::array();
  for (std::size_t v = 0; v < data.videos.size(); ++v) {
    const auto& video = data.videos[v];
    for (std::size_t f = 0; f < video.frames.size(); ++f) {
      const auto bits = masks.frame_bits(v, f);
      for (const auto& r : video.frames[f].relations) {
        entries.push_back({{"video", video.id},
                           {"frame", video.frames[f].frame_index},
                           {"slot", r.slot},
                           {"m", static_cast<int>(bits[static_cast<std::size_t>(r.slot)])}});
      }
    }
  }
  json doc = {{"epoch", masks.epoch()}, {"ratio", masks.ratio()}, {"seed", masks.seed()}, {"masks", entries}};
  return doc.dump();
}

MaskSet masks_from_json(std::string_view text, const DatasetAnnotations& data) {
  const json doc = parse_document(text, "mask document");
  const int epoch = get_at<int>(doc, "epoch", "masks");
  const double ratio = get_at<double>(doc, "ratio", "masks");
  const auto seed = get_at<std::uint64_t>(doc, "seed", "masks");

  std::map<std::string, std::size_t> video_of;
  std::vector<std::map<int, std::size_t>> frame_of(data.videos.size());
  std::vector<std::vector<MaskSet::FrameMask>> videos(data.videos.size());
  std::vector<std::vector<std::vector<std::uint8_t>>> seen(data.videos.size());
  for (std::size_t v = 0; v < data.videos.size(); ++v) {
    video_of[data.videos[v].id] = v;
    for (std::size_t f = 0; f < data.videos[v].frames.size(); ++f) {
      const auto& frame = data.videos[v].frames[f];
      frame_of[v][frame.frame_index] = f;
      videos[v].push_back({frame.frame_index, std::vector<std::uint8_t>(frame.relations.size(), 0)});
      seen[v].emplace_back(frame.relations.size(), 0);
    }
  }

  const auto& entries = array_at(doc, "masks", "masks");
  std::size_t count = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string where = "masks[" + std::to_string(i) + "]";
    const auto id = get_at<std::string>(entries[i], "video", where);
    const int t = get_at<int>(entries[i], "frame", where);
    const int slot = get_at<int>(entries[i], "slot", where);
    const int m = get_at<int>(entries[i], "m", where);
    const auto vit = video_of.find(id);
    if (vit == video_of.end()) throw IoError(where + ": unknown video '" + id + "'");
    const auto fit = frame_of[vit->second].find(t);
    if (fit == frame_of[vit->second].end()) throw IoError(where + ": unknown frame " + std::to_string(t));
    auto& bits = videos[vit->second][fit->second].bits;
    if (slot < 0 || static_cast<std::size_t>(slot) >= bits.size()) {
      throw IoError(where + ": slot " + std::to_string(slot) + " out of range");
    }
    if (m != 0 && m != 1) throw IoError(where + ": 'm' must be 0 or 1");
    auto& mark = seen[vit->second][fit->second][static_cast<std::size_t>(slot)];
    if (mark) throw IoError(where + ": duplicate mask entry");
    mark = 1;
    bits[static_cast<std::size_t>(slot)] = static_cast<std::uint8_t>(m);
    ++count;
  }
  if (count != data.num_labels()) {
    throw IoError("masks: " + std::to_string(count) + " entries for " + std::to_string(data.num_labels()) + " labels");
  }
  MaskSet out(epoch, std::move(videos));
  out.set_provenance(ratio, seed);
  return out;
}

std::string checkpoint_to_json(const ModelParams& params) {
  json tensors = json::array();
  for_each_tensor(params, [&](const char* name, std::size_t rows, std::size_t cols, const std::vector<double>& data) {
    tensors.push_back({{"name", name}, {"shape", {rows, cols}}, {"data", data}});
  });
  json doc = {{"format", "tailmask-checkpoint"}, {"version", kCheckpointVersion}, {"tensors", tensors}};
  return doc.dump();
}

ModelParams checkpoint_from_json(std::string_view text) {
  const json doc = parse_document(text, "checkpoint");
  if (get_at<std::string>(doc, "format", "checkpoint") != "tailmask-checkpoint") {
    throw IoError("checkpoint: unrecognised format");
  }
  const int version = get_at<int>(doc, "version", "checkpoint");
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto& tensors = array_at(doc, "tensors", "checkpoint");
  ModelParams params;
  std::size_t index = 0;
  for_each_tensor(params, [&](const char* name, auto&& rows, auto&& cols, std::vector<double>& data) {
    const std::string where = "checkpoint.tensors[" + std::to_string(index) + "]";
    if (index >= tensors.size()) throw IoError("checkpoint: missing tensor '" + std::string(name) + "'");
    const auto& t = tensors[index++];
    if (get_at<std::string>(t, "name", where) != name) {
      throw IoError(where + ": expected tensor '" + std::string(name) + "'");
    }
    const auto shape = get_at<std::vector<std::size_t>>(t, "shape", where);
    data = get_at<std::vector<double>>(t, "data", where);
    if (shape.size() != 2 || shape[0] * shape[1] != data.size()) throw IoError(where + ": shape does not match data");
    if constexpr (!std::is_const_v<std::remove_reference_t<decltype(rows)>> &&
                  std::is_lvalue_reference_v<decltype(rows)>) {
      rows = shape[0];
      cols = shape[1];
    } else if (shape[1] != 1) {
      throw IoError(where + ": bias tensors must have one column");
    }
  });
  if (index != tensors.size()) throw IoError("checkpoint: unexpected extra tensors");

  const std::size_t dim = params.observed.w1.cols;
  const bool consistent =
      params.observed.b1.size() == params.observed.w1.rows && params.observed.w2.cols == params.observed.w1.rows &&
      params.observed.b2.size() == params.observed.w2.rows && params.anticipated.w1.cols == dim &&
      params.anticipated.b1.size() == params.anticipated.w1.rows &&
      params.anticipated.w2.cols == params.anticipated.w1.rows &&
      params.anticipated.b2.size() == params.anticipated.w2.rows && params.object_w.cols == dim &&
      params.object_b.size() == params.object_w.rows && params.anticip_a.rows == dim &&
      params.anticip_a.cols == dim && params.anticip_c.size() == dim && params.box_w.rows == 4 &&
      params.box_w.cols == dim && params.box_b.size() == 4;
  if (!consistent) throw IoError("checkpoint: tensor shapes are inconsistent");
  return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  write_text(path, checkpoint_to_json(params));
}

ModelParams load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_text(path)); }

std::string scene_graphs_to_jsonl(std::span<const SceneGraph> graphs) {
  std::string out;
  for (const auto& g : graphs) {
    json triplets = json::array();
    for (const auto& t : g.triplets) {
      triplets.push_back({{"sub", t.subject_id}, {"obj", t.object_id}, {"pred", t.predicate_id}, {"conf", t.confidence}});
    }
    out += json({{"t", g.frame_index}, {"triplets", triplets}}).dump();
    out += '\n';
  }
  return out;
}

std::string metric_table_csv(const MetricTable& table) {
  std::string out = "strategy,K,R,mR\n";
  for (const auto& row : table.rows) {
    out += std::string(to_string(row.strategy)) + ',' + std::to_string(row.k) + ',' + opt_fmt(row.recall) + ',' +
           opt_fmt(row.mean_recall) + '\n';
  }
  return out;
}

std::string per_class_csv(const MetricTable& table, const PredicateOntology& ontology) {
  std::string out = "strategy,K,class,recall\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.per_class.size(); ++c) {
      if (!row.per_class[c]) continue;
      out += std::string(to_string(row.strategy)) + ',' + std::to_string(row.k) + ',' +
             predicate_label(ontology, static_cast<ClassId>(c)) + ',' + fmt(*row.per_class[c]) + '\n';
    }
  }
  return out;
}

std::string sweep_table_csv(const SweepTable& table) {
  std::string out = "corruption,severity,strategy,K,R,mR,delta_vs_clean_percent\n";
  for (const auto& row : table.rows) {
    out += row.corruption + ',' + std::to_string(row.severity) + ',' + std::string(to_string(row.strategy)) + ',' +
           std::to_string(row.k) + ',' + opt_fmt(row.recall) + ',' + opt_fmt(row.mean_recall) + ',' +
           opt_fmt(row.delta_vs_clean_percent) + '\n';
  }
  return out;
}

std::string train_report_json(const TrainReport& report) {
  json epochs = json::array();
  for (const auto& e : report.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"mask_ratio", e.mask_ratio},
                      {"masked_labels", e.masked_labels},
                      {"gen", e.gen},
                      {"obj", e.obj},
                      {"ant", e.ant},
                      {"boxes", e.boxes},
                      {"recon", e.recon},
                      {"total", e.total}});
  }
  json doc = {{"mode", std::string(to_string(report.mode))},
              {"skipped_videos", report.skipped_videos},
              {"epochs", epochs}};
  return doc.dump(2);
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace tailmask
