#include <gtest/gtest.h>

#include <cmath>

#include "prowl/evaluate.hpp"
#include "prowl/rng.hpp"

using namespace prowl;

namespace {

ExtractionResult result(const std::string& entity, const std::string& rel,
                        std::vector<std::pair<std::string, double>> retrieved,
                        std::set<std::string> gold) {
  ExtractionResult r;
  r.entity = entity;
  r.relation = rel;
  for (auto& [np, s] : retrieved) r.add_retrieved(np, s);
  r.gold = std::move(gold);
  return r;
}

}  // namespace

TEST(Accuracy, Ratios) {
  std::unordered_map<std::string, std::string> gold = {
      {"a", "x"}, {"b", "x"}, {"c", "y"}, {"d", "y"}};
  std::vector<Prediction> preds = {{"a", "x", 1}, {"b", "x", 1}, {"c", "y", 1}, {"d", "x", 1}};
  EXPECT_DOUBLE_EQ(accuracy(preds, gold), 0.75);

  preds[3].label = "y";
  EXPECT_DOUBLE_EQ(accuracy(preds, gold), 1.0);

  EXPECT_THROW(accuracy({}, {}), std::runtime_error);  // empty test set
  preds.pop_back();
  EXPECT_THROW(accuracy(preds, gold), std::runtime_error);  // missing prediction
}

TEST(Accuracy, ArgmaxInvariantUnderMonotoneScores) {
  // accuracy reads labels only, so any strictly monotone transform of the
  // scores leaves it unchanged.
  std::unordered_map<std::string, std::string> gold = {{"a", "x"}, {"b", "y"}};
  std::vector<Prediction> p1 = {{"a", "x", 0.9}, {"b", "x", 0.2}};
  std::vector<Prediction> p2 = p1;
  for (Prediction& p : p2) p.score = std::exp(10 * p.score);
  EXPECT_DOUBLE_EQ(accuracy(p1, gold), accuracy(p2, gold));
}

TEST(Prf, SingleQueryHalfRight) {
  auto rs = {result("aspirin", "sideEffects", {{"a", 0.9}, {"c", 0.8}}, {"a", "b"})};
  PrfResult p = prf(rs, 0.0);
  EXPECT_DOUBLE_EQ(p.precision, 0.5);
  EXPECT_DOUBLE_EQ(p.recall, 0.5);
  EXPECT_DOUBLE_EQ(p.f1, 0.5);
}

TEST(Prf, EmptyConventions) {
  auto none = {result("e", "r", {}, {"a"})};
  PrfResult p = prf(none, 0.0);
  EXPECT_DOUBLE_EQ(p.precision, 0.0);
  EXPECT_DOUBLE_EQ(p.recall, 0.0);
  EXPECT_DOUBLE_EQ(p.f1, 0.0);

  auto both_empty = {result("e", "r", {}, {})};
  p = prf(both_empty, 0.0);
  EXPECT_DOUBLE_EQ(p.f1, 0.0);
  EXPECT_EQ(p.tp + p.fp + p.fn, 0);
}

TEST(Prf, ThresholdFiltersRetrieved) {
  auto rs = {result("e", "r", {{"a", 0.9}, {"b", 0.1}}, {"a", "b"})};
  PrfResult lo = prf(rs, 0.0);
  EXPECT_DOUBLE_EQ(lo.recall, 1.0);
  PrfResult hi = prf(rs, 0.5);
  EXPECT_DOUBLE_EQ(hi.recall, 0.5);
  EXPECT_DOUBLE_EQ(hi.precision, 1.0);
}

TEST(Prf, F1ZeroIffNoTruePositives) {
  auto wrong = {result("e", "r", {{"z", 0.9}}, {"a"})};
  PrfResult p = prf(wrong, 0.0);
  EXPECT_EQ(p.tp, 0);
  EXPECT_DOUBLE_EQ(p.f1, 0.0);

  auto right = {result("e", "r", {{"a", 0.9}, {"z", 0.8}}, {"a", "b", "c"})};
  p = prf(right, 0.0);
  EXPECT_GT(p.tp, 0);
  EXPECT_GT(p.f1, 0.0);
  EXPECT_LE(p.f1, 1.0);
}

TEST(PrCurve, AllCorrectPinsPrecisionOne) {
  auto rs = {result("e", "r", {{"a", 0.9}, {"b", 0.5}}, {"a", "b"})};
  auto curve = pr_curve(rs);
  ASSERT_EQ(curve.size(), 2u);
  for (const auto& [recall, precision] : curve) EXPECT_DOUBLE_EQ(precision, 1.0);
  EXPECT_DOUBLE_EQ(curve.back().first, 1.0);
}

TEST(PrCurve, WrongTopPredictionDipsThenRecovers) {
  auto rs = {result("e", "r", {{"z", 0.9}, {"a", 0.5}, {"b", 0.4}}, {"a", "b"})};
  auto curve = pr_curve(rs);
  ASSERT_EQ(curve.size(), 3u);
  EXPECT_DOUBLE_EQ(curve[0].second, 0.0);  // only the wrong NP above threshold
  EXPECT_GT(curve[1].second, 0.0);
  EXPECT_DOUBLE_EQ(curve[2].first, 1.0);
}

TEST(PrCurve, RecallMonotoneAndMatchesEnumerationOracle) {
  rng::Stream rng(808);
  std::vector<ExtractionResult> rs;
  for (int q = 0; q < 6; ++q) {
    ExtractionResult r;
    r.entity = "e" + std::to_string(q);
    r.relation = "rel";
    for (int i = 0; i < 5; ++i) {
      std::string np = "np" + std::to_string(rng.below(8));
      r.add_retrieved(np, rng.uniform());
      if (rng.below(2)) r.gold.insert("np" + std::to_string(rng.below(8)));
    }
    rs.push_back(std::move(r));
  }

  auto curve = pr_curve(rs);
  for (size_t i = 1; i < curve.size(); ++i) EXPECT_GE(curve[i].first, curve[i - 1].first);

  // Independent enumeration: count decisions per threshold directly.
  std::set<double> scores;
  for (const auto& r : rs)
    for (const auto& [np, s] : r.retrieved) scores.insert(s);
  size_t idx = 0;
  for (auto it = scores.rbegin(); it != scores.rend(); ++it, ++idx) {
    long tp = 0, fp = 0, fn = 0;
    for (const auto& r : rs) {
      for (const auto& [np, s] : r.retrieved) {
        if (s >= *it)
          r.gold.count(np) ? ++tp : ++fp;
      }
      for (const std::string& g : r.gold) {
        bool hit = false;
        for (const auto& [np, s] : r.retrieved) hit |= (np == g && s >= *it);
        if (!hit) ++fn;
      }
    }
    double precision = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
    double recall = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
    EXPECT_DOUBLE_EQ(curve[idx].first, recall);
    EXPECT_DOUBLE_EQ(curve[idx].second, precision);
  }

  // The curve's rightmost point agrees with prf at threshold -inf.
  PrfResult all = prf(rs, -1e300);
  EXPECT_DOUBLE_EQ(curve.back().first, all.recall);
  EXPECT_DOUBLE_EQ(curve.back().second, all.precision);
}

TEST(Retrieved, DeduplicationKeepsBestScore) {
  ExtractionResult r;
  r.add_retrieved("a", 0.3);
  r.add_retrieved("a", 0.7);
  r.add_retrieved("a", 0.5);
  ASSERT_EQ(r.retrieved.size(), 1u);
  EXPECT_DOUBLE_EQ(r.retrieved[0].second, 0.7);
}
