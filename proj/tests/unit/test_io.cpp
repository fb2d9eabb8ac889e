#include <gtest/gtest.h>

#include <filesystem>

#include "test_support.hpp"
#include "tailmask/error.hpp"
#include "tailmask/experiment.hpp"
#include "tailmask/io.hpp"
#include "tailmask/synth.hpp"

using namespace tailmask;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("tailmask_io_" + name); }

DatasetAnnotations ag_synth(int videos, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_videos = videos;
  cfg.label_rate = 0.8;
  cfg.seed = seed;
  return synth_longtail_dataset(cfg);
}

}  // namespace

TEST(Annotations, RoundTrip) {
  const auto data = ag_synth(3, 1);
  const auto path = temp_file("ann.json");
  save_annotations(data, path);
  EXPECT_EQ(load_annotations(path), data);
  fs::remove(path);
}

TEST(Annotations, AmbiguousNamesAreQualified) {
  DatasetAnnotations data;
  data.ontology = PredicateOntology::create({{"attention", {"not", "looking"}}, {"spatial", {"not", "near"}}},
                                            {"person", "cup"});
  data.videos.push_back({"v", {tailmask::testing::make_frame(0, 2, {{0, 1, 0}, {0, 1, 2}, {0, 1, 3}})}});
  const auto text = annotations_to_json(data);
  EXPECT_NE(text.find("\"attention/not\""), std::string::npos);
  EXPECT_NE(text.find("\"near\""), std::string::npos);
  EXPECT_EQ(annotations_from_json(text), data);
}

TEST(Annotations, DuplicateRelationRejectedWithFrame) {
  const std::string text = R"({"ontology": {"categories": [{"name": "a", "classes": ["x", "y"]}], "objects": ["person", "cup"]},
    "videos": [{"id": "clip", "frames": [{"t": 4, "objects": [{"id": 0, "cat": "person", "box": [0, 0, 0.5, 0.5]},
                                                             {"id": 1, "cat": "cup", "box": [0.2, 0.2, 0.6, 0.6]}],
                                          "relations": [{"sub": 0, "obj": 1, "pred": "x"}, {"sub": 0, "obj": 1, "pred": "x"}]}]}]})";
  try {
    annotations_from_json(text);
    FAIL() << "expected rejection";
  } catch (const IoError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("clip"), std::string::npos) << msg;
    EXPECT_NE(msg.find("frame 4"), std::string::npos) << msg;
  }
}

TEST(Annotations, MalformedDocumentsNameLocation) {
  EXPECT_THROW(annotations_from_json("{not json"), IoError);
  const std::string bad_box = R"({"ontology": {"categories": [{"name": "a", "classes": ["x"]}], "objects": ["p", "q"]},
    "videos": [{"id": "v", "frames": [{"t": 0, "objects": [{"id": 0, "cat": "p", "box": [0, 0, 1]}], "relations": []}]}]})";
  try {
    annotations_from_json(bad_box);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("videos[0].frames[0].objects[0]"), std::string::npos) << e.what();
  }
  const std::string unknown_pred = R"({"ontology": {"categories": [{"name": "a", "classes": ["x"]}], "objects": ["p", "q"]},
    "videos": [{"id": "v", "frames": [{"t": 0, "objects": [{"id": 0, "cat": "p", "box": [0, 0, 1, 1]}, {"id": 1, "cat": "q", "box": [0, 0, 1, 1]}],
                                       "relations": [{"sub": 0, "obj": 1, "pred": "z"}]}]}]})";
  EXPECT_THROW(annotations_from_json(unknown_pred), IoError);
  EXPECT_THROW(load_annotations("/nonexistent/annotations.json"), IoError);
}

TEST(Annotations, TenMegabyteFileCountsMatchGenerator) {
  SynthConfig cfg;
  cfg.n_videos = 1100;
  cfg.frames_per_video = 10;
  cfg.pairs_per_frame = 4;
  cfg.seed = 12;
  const auto data = synth_longtail_dataset(cfg);
  const auto path = temp_file("large.json");
  save_annotations(data, path);
  EXPECT_GT(fs::file_size(path), 10u * 1000u * 1000u);
  const auto loaded = load_annotations(path);
  EXPECT_EQ(count_predicates(loaded), count_predicates(data));
  EXPECT_EQ(loaded.num_labels(), static_cast<std::size_t>(1100 * 10 * 4 * 3));
  fs::remove(path);
}

TEST(Masks, RoundTripAndCoverage) {
  const auto data = ag_synth(3, 2);
  auto masks = generate_epoch_masks(2, MaskSchedule::fixed(0.4), data, 7);
  const auto text = masks_to_json(masks, data);
  const auto back = masks_from_json(text, data);
  EXPECT_EQ(back, masks);
  EXPECT_EQ(back.ratio(), 0.4);
  auto other = data;
  other.videos[0].frames[0].relations.pop_back();
  EXPECT_THROW(masks_from_json(text, other), IoError);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  const ModelShape shape{7, 5, 26, 36};
  auto params = init_params(shape, 3);
  params.observed.b1[0] = 0.1 + 0.2;
  params.box_b[3] = -1e-300;
  EXPECT_EQ(checkpoint_from_json(checkpoint_to_json(params)), params);
  const auto path = temp_file("ckpt.json");
  save_checkpoint(params, path);
  EXPECT_EQ(load_checkpoint(path), params);
  fs::remove(path);
}

TEST(Checkpoint, RejectsWrongVersionAndShapes) {
  const ModelShape shape{4, 3, 5, 2};
  auto text = checkpoint_to_json(init_params(shape, 1));
  auto bumped = text;
  bumped.replace(bumped.find("\"version\":1"), 11, "\"version\":2");
  EXPECT_THROW(checkpoint_from_json(bumped), IoError);
  EXPECT_THROW(checkpoint_from_json(R"({"format": "other", "version": 1, "tensors": []})"), IoError);
  EXPECT_THROW(checkpoint_from_json(R"({"format": "tailmask-checkpoint", "version": 1, "tensors": []})"), IoError);
}

TEST(Csv, MetricAndSweepTables) {
  MetricTable table;
  table.rows.push_back({Strategy::with_constraint, 10, 0.5, 0.25, {0.5, std::nullopt}});
  table.rows.push_back({Strategy::semi_constraint, 20, std::nullopt, std::nullopt, {}});
  EXPECT_EQ(metric_table_csv(table), "strategy,K,R,mR\nwith,10,0.5,0.25\nsemi,20,,\n");
  const auto o = PredicateOntology::with_counts(std::vector<int>{2}, 2);
  EXPECT_EQ(per_class_csv(table, o), "strategy,K,class,recall\nwith,10,c0_p0,0.5\n");
  SweepTable sweep;
  sweep.rows.push_back({"gaussian_noise", 3, Strategy::no_constraint, 50, 0.75, 0.5, -12.5});
  EXPECT_EQ(sweep_table_csv(sweep),
            "corruption,severity,strategy,K,R,mR,delta_vs_clean_percent\ngaussian_noise,3,no,50,0.75,0.5,-12.5\n");
}

TEST(Config, DefaultsRoundTrip) {
  const auto config = default_experiment_config();
  const auto text = experiment_config_to_json(config);
  EXPECT_EQ(experiment_config_to_json(experiment_config_from_json(text)), text);
}

TEST(Config, PartialDocumentsKeepDefaults) {
  const auto c = experiment_config_from_json(R"({"seed": 11, "train": {"epochs": 2, "schedule": {"mode": "linear", "sampling_ratio": 0.1}}})");
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.train.epochs, 2);
  EXPECT_EQ(c.train.schedule.mode, ScheduleMode::linear);
  EXPECT_EQ(c.train.learning_rate, default_experiment_config().train.learning_rate);
}

TEST(Config, Errors) {
  EXPECT_THROW(experiment_config_from_json(R"({"sed": 1})"), ConfigError);
  EXPECT_THROW(experiment_config_from_json(R"({"train": {"epochz": 1}})"), ConfigError);
  EXPECT_THROW(experiment_config_from_json(R"({"train": {"epochs": "five"}})"), ConfigError);
  EXPECT_THROW(experiment_config_from_json(R"({"train": {"epochs": 0}})"), ConfigError);
  EXPECT_THROW(experiment_config_from_json(R"({"eval": {"strategies": ["sometimes"]}})"), ConfigError);
  EXPECT_THROW(experiment_config_from_json(R"({"corruptions": [{"kind": "fog", "severity": 1}]})"), ConfigError);
  EXPECT_THROW(experiment_config_from_json("[1, 2"), ConfigError);
  EXPECT_THROW(load_experiment_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, SeedFanOutIsIndependent) {
  auto c = default_experiment_config();
  const auto t = seeded_train_config(c);
  EXPECT_NE(t.init_seed, t.order_seed);
  EXPECT_NE(t.mask_seed, t.feature_seed);
  EXPECT_NE(test_feature_seed(c), t.feature_seed);
  EXPECT_NE(load_split(c, false), load_split(c, true));
  const auto specs = seeded_corruptions(c);
  EXPECT_NE(specs[0].seed, specs[1].seed);
  c.seed = 8;
  EXPECT_NE(seeded_train_config(c).init_seed, t.init_seed);
}
