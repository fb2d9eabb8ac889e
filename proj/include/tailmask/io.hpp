#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "tailmask/core_data.hpp"
#include "tailmask/corruption.hpp"
#include "tailmask/graphbuild.hpp"
#include "tailmask/maskgen.hpp"
#include "tailmask/metrics.hpp"
#include "tailmask/model.hpp"
#include "tailmask/train.hpp"

namespace tailmask {

// Annotation document:
//   {"ontology": {"categories": [{"name", "classes": [str]}], "objects": [str]},
//    "videos": [{"id", "frames": [{"t", "objects": [{"id", "cat", "box": [x0,y0,x1,y1]}],
//                                  "relations": [{"sub", "obj", "pred"}]}]}]}
// Relations name their category-qualified predicate as "pred": "<class>" or
// "<category>/<class>" when the class name is ambiguous. Slots follow array order.

std::string annotations_to_json(const DatasetAnnotations& data);

/// Parses and validates; throws IoError naming the offending location or violation.
DatasetAnnotations annotations_from_json(std::string_view text);

void save_annotations(const DatasetAnnotations& data, const std::filesystem::path& path);
DatasetAnnotations load_annotations(const std::filesystem::path& path);

// Mask document: {"epoch", "ratio", "seed", "masks": [{"video", "frame", "slot", "m"}]}
// with positions in dataset order.
std::string masks_to_json(const MaskSet& masks, const DatasetAnnotations& data);
MaskSet masks_from_json(std::string_view text, const DatasetAnnotations& data);

// Checkpoint document: {"format": "tailmask-checkpoint", "version": 1,
//   "tensors": [{"name", "shape": [rows, cols], "data": [...]}]}
inline constexpr int kCheckpointVersion = 1;
std::string checkpoint_to_json(const ModelParams& params);
ModelParams checkpoint_from_json(std::string_view text);
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

/// One JSON object per line: {"t", "triplets": [{"sub", "obj", "pred", "conf"}]}.
std::string scene_graphs_to_jsonl(std::span<const SceneGraph> graphs);

/// strategy,K,R,mR
std::string metric_table_csv(const MetricTable& table);
/// strategy,K,class,recall
std::string per_class_csv(const MetricTable& table, const PredicateOntology& ontology);
/// corruption,severity,strategy,K,R,mR,delta_vs_clean_percent
std::string sweep_table_csv(const SweepTable& table);
std::string train_report_json(const TrainReport& report);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace tailmask
