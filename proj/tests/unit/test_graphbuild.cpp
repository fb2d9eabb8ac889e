#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "tailmask/error.hpp"
#include "tailmask/graphbuild.hpp"
#include "tailmask/rng.hpp"

using namespace tailmask;

namespace {

PredicateOntology three_categories() {
  const std::vector<int> counts{3, 6, 17};
  return PredicateOntology::with_counts(counts, 5);
}

std::vector<PairScores> random_pairs(Rng& rng, const PredicateOntology& o) {
  std::vector<PairScores> pairs;
  const std::size_t n = 1 + rng.uniform_index(4);
  for (std::size_t p = 0; p < n; ++p) {
    PairScores ps{0, static_cast<ObjectId>(p + 1), {}};
    for (std::size_t k = 0; k < o.num_predicates(); ++k) {
      // Coarse grid so exact ties appear regularly.
      ps.scores.push_back(std::round(4.0 * rng.normal()) / 2.0);
    }
    pairs.push_back(std::move(ps));
  }
  return pairs;
}

using Key = std::tuple<ObjectId, ObjectId, ClassId>;

std::map<Key, double> as_map(const SceneGraph& g) {
  std::map<Key, double> out;
  for (const auto& t : g.triplets) out[{t.subject_id, t.object_id, t.predicate_id}] = t.confidence;
  return out;
}

bool sorted_descending(const SceneGraph& g) {
  return std::is_sorted(g.triplets.begin(), g.triplets.end(),
                        [](const Triplet& a, const Triplet& b) { return a.confidence > b.confidence; });
}

}  // namespace

TEST(Confidences, SoftmaxPerCategory) {
  const auto o = three_categories();
  Rng rng(1);
  std::vector<double> scores(o.num_predicates());
  for (double& s : scores) s = rng.normal();
  const auto conf = category_confidences(scores, o);
  for (std::size_t c = 0; c < o.num_categories(); ++c) {
    double sum = 0.0, denom = 0.0;
    for (ClassId id : o.category_classes(c)) {
      sum += conf[static_cast<std::size_t>(id)];
      denom += std::exp(scores[static_cast<std::size_t>(id)]);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const ClassId first = o.category_classes(c).front();
    EXPECT_NEAR(conf[static_cast<std::size_t>(first)], std::exp(scores[static_cast<std::size_t>(first)]) / denom, 1e-12);
  }
  EXPECT_THROW(category_confidences(std::vector<double>(3, 0.0), o), DomainError);
}

TEST(Strategies, LawsOnRandomFrames) {
  const auto o = three_categories();
  Rng rng(2);
  const auto thresholds = SemiConstraintThresholds::uniform(o.num_predicates(), 0.3);
  for (int frame = 0; frame < 500; ++frame) {
    const auto pairs = random_pairs(rng, o);
    const auto with = assemble_with_constraint(frame, pairs, o);
    const auto no = assemble_no_constraint(frame, pairs, o);
    const auto semi = assemble_semi_constraint(frame, pairs, o, thresholds);
    ASSERT_TRUE(sorted_descending(with) && sorted_descending(no) && sorted_descending(semi));

    const auto no_map = as_map(no);
    EXPECT_EQ(no.triplets.size(), pairs.size() * o.num_predicates());
    for (const auto& [key, conf] : as_map(with)) {
      ASSERT_TRUE(no_map.count(key));
      EXPECT_EQ(no_map.at(key), conf);
    }

    // Exactly one triplet per (pair, category), and it is the raw-score argmax (lowest id on ties).
    std::map<std::pair<ObjectId, std::size_t>, int> per_category;
    for (const auto& t : with.triplets) ++per_category[{t.object_id, o.category_of(t.predicate_id)}];
    EXPECT_EQ(per_category.size(), pairs.size() * o.num_categories());
    for (const auto& [key, n] : per_category) EXPECT_EQ(n, 1);
    for (const auto& t : with.triplets) {
      const auto& scores = pairs[static_cast<std::size_t>(t.object_id - 1)].scores;
      for (ClassId id : o.category_classes(o.category_of(t.predicate_id))) {
        const double s = scores[static_cast<std::size_t>(id)];
        const double chosen = scores[static_cast<std::size_t>(t.predicate_id)];
        EXPECT_TRUE(s < chosen || (s == chosen && id >= t.predicate_id));
      }
    }

    // semi = no-constraint filtered by confidence > theta, same order.
    std::vector<Triplet> filtered;
    for (const auto& t : no.triplets)
      if (t.confidence > 0.3) filtered.push_back(t);
    EXPECT_EQ(semi.triplets, filtered);
  }
}

TEST(Strategies, TiesKeepCandidateOrder) {
  const auto o = PredicateOntology::with_counts(std::vector<int>{2}, 3);
  const std::vector<PairScores> pairs{{0, 1, {0.0, 0.0}}, {0, 2, {0.0, 0.0}}};
  const auto no = assemble_no_constraint(7, pairs, o);
  ASSERT_EQ(no.triplets.size(), 4u);
  EXPECT_EQ(no.frame_index, 7);
  EXPECT_EQ(no.triplets[0], (Triplet{0, 1, 0, 0.5}));
  EXPECT_EQ(no.triplets[1], (Triplet{0, 1, 1, 0.5}));
  EXPECT_EQ(no.triplets[2], (Triplet{0, 2, 0, 0.5}));
  const auto with = assemble_with_constraint(7, pairs, o);
  ASSERT_EQ(with.triplets.size(), 2u);
  EXPECT_EQ(with.triplets[0].predicate_id, 0);
}

TEST(Strategies, SemiThresholdSizeChecked) {
  const auto o = three_categories();
  const std::vector<PairScores> pairs{{0, 1, std::vector<double>(o.num_predicates(), 0.0)}};
  EXPECT_THROW(assemble_semi_constraint(0, pairs, o, SemiConstraintThresholds::uniform(3)), ConfigError);
}

TEST(Strategies, ParseNames) {
  EXPECT_EQ(parse_strategy("with"), Strategy::with_constraint);
  EXPECT_EQ(parse_strategy("semi_constraint"), Strategy::semi_constraint);
  EXPECT_EQ(to_string(Strategy::no_constraint), "no");
  EXPECT_THROW(parse_strategy("maybe"), ConfigError);
}
