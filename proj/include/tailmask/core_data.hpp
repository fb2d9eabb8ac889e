#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tailmask {

using ClassId = int;
using ObjectId = int;

/// A named group of predicate classes (e.g. attention / spatial / contacting).
struct PredicateCategory {
  std::string name;
  std::vector<std::string> classes;
};

/**
 * Predicate and object vocabulary.
 *
 * Predicate class ids are dense in [0, num_predicates()) and assigned in
 * category order; object category ids are dense in [0, num_object_categories()).
 */
class PredicateOntology {
 public:
  PredicateOntology() = default;

  /// Throws ConfigError when a category is empty or names are duplicated.
  static PredicateOntology create(std::vector<PredicateCategory> categories,
                                  std::vector<std::string> object_categories);

  /// Anonymous ontology with `classes_per_category[c]` classes in category c.
  static PredicateOntology with_counts(std::span<const int> classes_per_category,
                                       int num_object_categories);

  /// Attention (3) / spatial (6) / contacting (17) predicate split with 36 object classes.
  static PredicateOntology action_genome();

  std::size_t num_predicates() const { return class_names_.size(); }
  std::size_t num_categories() const { return categories_.size(); }
  std::size_t num_object_categories() const { return object_names_.size(); }

  const std::string& category_name(std::size_t category) const { return categories_[category].name; }
  /// Class ids belonging to `category`, ascending.
  std::span<const ClassId> category_classes(std::size_t category) const {
    return categories_[category].class_ids;
  }
  std::size_t category_of(ClassId id) const { return category_of_[static_cast<std::size_t>(id)]; }
  const std::string& class_name(ClassId id) const { return class_names_[static_cast<std::size_t>(id)]; }
  const std::string& object_name(int id) const { return object_names_[static_cast<std::size_t>(id)]; }
  std::span<const std::string> object_names() const { return object_names_; }

  bool contains(ClassId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < class_names_.size();
  }

  /// Lookups by name; return -1 when absent.
  ClassId find_class(std::string_view category, std::string_view name) const;
  int find_object(std::string_view name) const;

  bool operator==(const PredicateOntology&) const = default;

 private:
  struct Category {
    std::string name;
    std::vector<ClassId> class_ids;
    bool operator==(const Category&) const = default;
  };
  std::vector<Category> categories_;
  std::vector<std::string> class_names_;
  std::vector<std::size_t> category_of_;
  std::vector<std::string> object_names_;
};

/// Normalized box, x0 <= x1 and y0 <= y1, all coordinates in [0, 1].
struct BoundingBox {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  bool valid() const;
  double area() const { return (x1 - x0) * (y1 - y0); }
  bool operator==(const BoundingBox&) const = default;
};

struct ObjectInstance {
  ObjectId id = 0;
  int category = 0;
  BoundingBox box;
  bool operator==(const ObjectInstance&) const = default;
};

/// One (subject, predicate, object) label. `slot` is its index in the frame's relation list.
struct RelationInstance {
  ObjectId subject_id = 0;
  ObjectId object_id = 0;
  ClassId predicate_id = 0;
  int slot = 0;
  bool operator==(const RelationInstance&) const = default;
};

struct FrameAnnotations {
  int frame_index = 0;
  std::vector<ObjectInstance> objects;
  std::vector<RelationInstance> relations;

  const ObjectInstance* find_object(ObjectId id) const;
  bool operator==(const FrameAnnotations&) const = default;
};

struct VideoAnnotations {
  std::string id;
  std::vector<FrameAnnotations> frames;
  bool operator==(const VideoAnnotations&) const = default;
};

struct DatasetAnnotations {
  PredicateOntology ontology;
  std::vector<VideoAnnotations> videos;

  /// Total number of relation labels N.
  std::size_t num_labels() const;
  std::size_t num_frames() const;
  bool operator==(const DatasetAnnotations&) const = default;
};

/// Interacting object pairs of a frame, in order of first appearance in the relation list.
struct FramePairs {
  std::vector<std::pair<ObjectId, ObjectId>> pairs;
  /// positives[p]: predicate ids of pair p in slot order.
  std::vector<std::vector<ClassId>> positives;
  /// slots[p]: relation slots of pair p, aligned with positives[p].
  std::vector<std::vector<int>> slots;

  /// Index of (subject, object) in `pairs`, or -1.
  int find(ObjectId subject, ObjectId object) const;
};

FramePairs frame_pairs(const FrameAnnotations& frame);

struct ClassCountTable {
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;
  bool operator==(const ClassCountTable&) const = default;
};

ClassCountTable count_predicates(const DatasetAnnotations& data);

/// Shannon entropy (nats) of the empirical distribution given by `counts`; 0 when empty.
double entropy(std::span<const std::int64_t> counts);

/// One broken invariant. `frame` and `slot` are -1 when not applicable.
struct Violation {
  std::string video;
  int frame = -1;
  int slot = -1;
  std::string message;

  std::string to_string() const;
};

/// Returns an empty list iff every annotation invariant holds.
std::vector<Violation> validate_annotations(const DatasetAnnotations& data);

}  // namespace tailmask
