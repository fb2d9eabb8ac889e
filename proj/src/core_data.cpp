#include "tailmask/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include "tailmask/error.hpp"

namespace tailmask {

PredicateOntology PredicateOntology::create(std::vector<PredicateCategory> categories,
                                            std::vector<std::string> object_categories) {
  PredicateOntology ontology;
  std::set<std::string> category_names;
  for (auto& category : categories) {
    if (category.classes.empty()) {
      throw ConfigError("predicate category '" + category.name + "' has no classes");
    }
    if (!category_names.insert(category.name).second) {
      throw ConfigError("duplicate predicate category '" + category.name + "'");
    }
    std::set<std::string> names(category.classes.begin(), category.classes.end());
    if (names.size() != category.classes.size()) {
      throw ConfigError("duplicate class name in category '" + category.name + "'");
    }
    Category entry{category.name, {}};
    for (auto& name : category.classes) {
      entry.class_ids.push_back(static_cast<ClassId>(ontology.class_names_.size()));
      ontology.category_of_.push_back(ontology.categories_.size());
      ontology.class_names_.push_back(std::move(name));
    }
    ontology.categories_.push_back(std::move(entry));
  }
  std::set<std::string> object_names(object_categories.begin(), object_categories.end());
  if (object_names.size() != object_categories.size()) {
    throw ConfigError("duplicate object category name");
  }
  ontology.object_names_ = std::move(object_categories);
  return ontology;
}

PredicateOntology PredicateOntology::with_counts(std::span<const int> classes_per_category,
                                                 int num_object_categories) {
  std::vector<PredicateCategory> categories;
  for (std::size_t c = 0; c < classes_per_category.size(); ++c) {
    if (classes_per_category[c] < 1) {
      throw ConfigError("category " + std::to_string(c) + " has zero classes");
    }
    PredicateCategory category{"cat" + std::to_string(c), {}};
    for (int k = 0; k < classes_per_category[c]; ++k) {
      category.classes.push_back("c" + std::to_string(c) + "_p" + std::to_string(k));
    }
    categories.push_back(std::move(category));
  }
  if (num_object_categories < 2) throw ConfigError("need at least two object categories");
  std::vector<std::string> objects{"person"};
  for (int k = 1; k < num_object_categories; ++k) objects.push_back("object" + std::to_string(k));
  return create(std::move(categories), std::move(objects));
}

PredicateOntology PredicateOntology::action_genome() {
  return create(
      {
          {"attention", {"looking_at", "not_looking_at", "unsure"}},
          {"spatial", {"in_front_of", "behind", "on_the_side_of", "above", "beneath", "in"}},
          {"contacting",
           {"holding", "touching", "sitting_on", "leaning_on", "lying_on", "not_contacting",
            "carrying", "drinking_from", "eating", "have_it_on_the_back", "wearing", "wiping",
            "writing_on", "twisting", "standing_on", "covered_by", "other_relationship"}},
      },
      {"person",   "bag",        "bed",    "blanket", "book",   "box",     "broom",   "chair",
       "closet",   "cup",        "dish",   "door",    "doorknob", "doorway", "floor", "food",
       "groceries", "laptop",    "light",  "medicine", "mirror", "paper",   "phone",   "picture",
       "pillow",   "refrigerator", "sandwich", "shelf", "shoe",   "sofa",    "table",   "television",
       "towel",    "vacuum",     "window", "clothes"});
}

ClassId PredicateOntology::find_class(std::string_view category, std::string_view name) const {
  for (const auto& entry : categories_) {
    if (!category.empty() && entry.name != category) continue;
    for (ClassId id : entry.class_ids) {
      if (class_names_[static_cast<std::size_t>(id)] == name) return id;
    }
  }
  return -1;
}

int PredicateOntology::find_object(std::string_view name) const {
  auto it = std::find(object_names_.begin(), object_names_.end(), name);
  return it == object_names_.end() ? -1 : static_cast<int>(it - object_names_.begin());
}

bool BoundingBox::valid() const {
  auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  return in_unit(x0) && in_unit(y0) && in_unit(x1) && in_unit(y1) && x0 <= x1 && y0 <= y1;
}

const ObjectInstance* FrameAnnotations::find_object(ObjectId id) const {
  for (const auto& object : objects) {
    if (object.id == id) return &object;
  }
  return nullptr;
}

std::size_t DatasetAnnotations::num_labels() const {
  std::size_t n = 0;
  for (const auto& video : videos) {
    for (const auto& frame : video.frames) n += frame.relations.size();
  }
  return n;
}

std::size_t DatasetAnnotations::num_frames() const {
  std::size_t n = 0;
  for (const auto& video : videos) n += video.frames.size();
  return n;
}

int FramePairs::find(ObjectId subject, ObjectId object) const {
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (pairs[p].first == subject && pairs[p].second == object) return static_cast<int>(p);
  }
  return -1;
}

FramePairs frame_pairs(const FrameAnnotations& frame) {
  FramePairs out;
  for (const auto& relation : frame.relations) {
    int p = out.find(relation.subject_id, relation.object_id);
    if (p < 0) {
      p = static_cast<int>(out.pairs.size());
      out.pairs.emplace_back(relation.subject_id, relation.object_id);
      out.positives.emplace_back();
      out.slots.emplace_back();
    }
    out.positives[static_cast<std::size_t>(p)].push_back(relation.predicate_id);
    out.slots[static_cast<std::size_t>(p)].push_back(relation.slot);
  }
  return out;
}

ClassCountTable count_predicates(const DatasetAnnotations& data) {
  ClassCountTable table;
  table.counts.assign(data.ontology.num_predicates(), 0);
  for (const auto& video : data.videos) {
    for (const auto& frame : video.frames) {
      for (const auto& relation : frame.relations) {
        ++table.counts[static_cast<std::size_t>(relation.predicate_id)];
        ++table.total;
      }
    }
  }
  return table;
}

double entropy(std::span<const std::int64_t> counts) {
  std::int64_t total = 0;
  for (auto c : counts) total += c;
  if (total <= 0) return 0.0;
  double h = 0.0;
  for (auto c : counts) {
    if (c <= 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

std::string Violation::to_string() const {
  std::ostringstream out;
  out << "video '" << video << "'";
  if (frame >= 0) out << ", frame " << frame;
  if (slot >= 0) out << ", relation " << slot;
  out << ": " << message;
  return out.str();
}

std::vector<Violation> validate_annotations(const DatasetAnnotations& data) {
  std::vector<Violation> out;
  const auto& ontology = data.ontology;
  std::unordered_set<std::string> video_ids;
  for (const auto& video : data.videos) {
    if (!video_ids.insert(video.id).second) {
      out.push_back({video.id, -1, -1, "duplicate video id"});
    }
    bool first = true;
    int previous = 0;
    for (const auto& frame : video.frames) {
      const int t = frame.frame_index;
      if (!first && t <= previous) {
        out.push_back({video.id, t, -1, "frame indices not strictly increasing"});
      }
      first = false;
      previous = t;

      std::unordered_set<ObjectId> ids;
      for (const auto& object : frame.objects) {
        if (!ids.insert(object.id).second) {
          out.push_back({video.id, t, -1, "duplicate object id " + std::to_string(object.id)});
        }
        if (object.category < 0 ||
            static_cast<std::size_t>(object.category) >= ontology.num_object_categories()) {
          out.push_back({video.id, t, -1,
                         "object " + std::to_string(object.id) + " has unknown category " +
                             std::to_string(object.category)});
        }
        if (!object.box.valid()) {
          out.push_back({video.id, t, -1, "object " + std::to_string(object.id) + " has an invalid box"});
        }
      }

      std::set<std::tuple<ObjectId, ObjectId, ClassId>> seen;
      for (std::size_t i = 0; i < frame.relations.size(); ++i) {
        const auto& relation = frame.relations[i];
        const int slot = static_cast<int>(i);
        if (relation.slot != slot) {
          out.push_back({video.id, t, slot, "slot " + std::to_string(relation.slot) + " does not match position"});
        }
        if (!ids.contains(relation.subject_id)) {
          out.push_back({video.id, t, slot, "missing subject object id " + std::to_string(relation.subject_id)});
        }
        if (!ids.contains(relation.object_id)) {
          out.push_back({video.id, t, slot, "missing object id " + std::to_string(relation.object_id)});
        }
        if (relation.subject_id == relation.object_id) {
          out.push_back({video.id, t, slot, "subject and object are the same object"});
        }
        if (!ontology.contains(relation.predicate_id)) {
          out.push_back({video.id, t, slot, "unknown predicate id " + std::to_string(relation.predicate_id)});
        }
        if (!seen.emplace(relation.subject_id, relation.object_id, relation.predicate_id).second) {
          out.push_back({video.id, t, slot, "duplicate (subject, object, predicate) triplet"});
        }
      }
    }
  }
  return out;
}

}  // namespace tailmask
