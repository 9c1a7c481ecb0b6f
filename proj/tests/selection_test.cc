#include <gtest/gtest.h>

#include <algorithm>

#include "psd/cache.h"
#include "psd/errors.h"
#include "psd/evaluation.h"
#include "psd/selection.h"
#include "test_util.h"

namespace psd {
namespace {

using testing::LayeredFixture;
using testing::MakeLayeredFixture;
using testing::TempDir;

constexpr char kFp[] = "synthetic-fp";

TrainConfig FastConfig() {
  TrainConfig c;
  c.hidden_size = 16;
  c.learning_rate = 1e-2;
  return c;
}

LayerFeatures Features(const LayeredFixture& f, Split split) {
  LayerFeatures out;
  for (size_t i = 0; i < f.instances.size(); ++i) {
    if (f.instances[i].split == split) {
      out.matrices.push_back(f.matrices[i]);
      out.labels.push_back(*f.instances[i].sense);
    }
  }
  return out;
}

// Best accuracy of any single-coordinate threshold rule at `layer`.
double BestStumpAccuracy(const LayerFeatures& f, int layer) {
  double best = 0;
  const RowMatrixF x = f.AtLayer(layer);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      for (int dir : {1, -1}) {
        size_t ok = 0;
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
          const bool first = dir * (x(r, c) - x(t, c)) >= 0;
          ok += first == (f.labels[static_cast<size_t>(r)].raw() == "1(1)");
        }
        best = std::max(best, static_cast<double>(ok) / static_cast<double>(x.rows()));
      }
    }
  }
  return best;
}

TEST(SelectLayerTest, FindsTheInformativeLayer) {
  const auto f = MakeLayeredFixture("on", 5, 4, 3, 40, 20, 20, kFp);
  const auto train = Features(f, Split::kTrain);
  const auto dev = Features(f, Split::kDev);
  // Brute force: only row 3 admits a perfect single-coordinate rule.
  LayerFeatures all = train;
  all.matrices.insert(all.matrices.end(), dev.matrices.begin(), dev.matrices.end());
  all.labels.insert(all.labels.end(), dev.labels.begin(), dev.labels.end());
  for (int j = 0; j < 5; ++j) {
    if (j == 3) EXPECT_DOUBLE_EQ(BestStumpAccuracy(all, j), 1.0);
    else EXPECT_LT(BestStumpAccuracy(all, j), 1.0);
  }

  const LayerChoice choice = SelectLayer("on", train, dev, FastConfig());
  EXPECT_EQ(choice.chosen_layer, 3);
  ASSERT_EQ(choice.dev_accuracy_per_layer.size(), 5u);
  EXPECT_DOUBLE_EQ(choice.dev_accuracy_per_layer[3], 1.0);
  EXPECT_EQ(*std::max_element(choice.dev_accuracy_per_layer.begin(),
                              choice.dev_accuracy_per_layer.end()),
            choice.dev_accuracy_per_layer[static_cast<size_t>(choice.chosen_layer)]);
  EXPECT_EQ(choice.num_layers, 4);
  EXPECT_GE(choice.best_epoch, 1);
}

TEST(SelectLayerTest, IdenticalLayersTieToZero) {
  auto f = MakeLayeredFixture("on", 4, 3, 2, 20, 10, 0, kFp);
  for (auto& m : f.matrices) {
    for (int r = 1; r < m.num_rows(); ++r) m.values.row(r) = m.values.row(2);
    m.values.row(0) = m.values.row(2);
  }
  const LayerChoice choice = SelectLayer("on", Features(f, Split::kTrain), Features(f, Split::kDev), FastConfig());
  EXPECT_EQ(choice.chosen_layer, 0);
  for (double a : choice.dev_accuracy_per_layer) EXPECT_DOUBLE_EQ(a, choice.dev_accuracy_per_layer[0]);
}

TEST(SelectLayerTest, SingleDevInstance) {
  const auto f = MakeLayeredFixture("on", 4, 3, 1, 20, 1, 0, kFp);
  const LayerChoice choice = SelectLayer("on", Features(f, Split::kTrain), Features(f, Split::kDev), FastConfig());
  for (double a : choice.dev_accuracy_per_layer) EXPECT_TRUE(a == 0.0 || a == 1.0);
  const auto first_max = std::max_element(choice.dev_accuracy_per_layer.begin(),
                                          choice.dev_accuracy_per_layer.end());
  EXPECT_EQ(choice.chosen_layer, static_cast<int>(first_max - choice.dev_accuracy_per_layer.begin()));
}

TEST(SelectLayerTest, EmptyDevFallsBackToLastLayer) {
  const auto f = MakeLayeredFixture("on", 4, 3, 1, 20, 0, 0, kFp);
  const LayerChoice choice = SelectLayer("on", Features(f, Split::kTrain), LayerFeatures(), FastConfig());
  EXPECT_EQ(choice.chosen_layer, 3);
}

TEST(SelectLayerTest, Reproducible) {
  const auto f = MakeLayeredFixture("on", 4, 3, 2, 20, 10, 0, kFp);
  const auto a = SelectLayer("on", Features(f, Split::kTrain), Features(f, Split::kDev), FastConfig());
  const auto b = SelectLayer("on", Features(f, Split::kTrain), Features(f, Split::kDev), FastConfig());
  EXPECT_EQ(a.ToJson(), b.ToJson());
}

TEST(SelectLayerTest, ChosenLayerDominatesLastLayer) {
  const auto f = MakeLayeredFixture("on", 5, 4, 2, 40, 20, 0, kFp);
  const auto train = Features(f, Split::kTrain);
  const auto dev = Features(f, Split::kDev);
  const LayerChoice choice = SelectLayer("on", train, dev, FastConfig());
  const auto chosen = TrainFinalModel(choice, train, dev, FastConfig(), false);
  LayerChoice last = choice;
  last.chosen_layer = 4;
  const auto at_last = TrainFinalModel(last, train, dev, FastConfig(), false);
  EXPECT_GE(Accuracy(chosen, dev.AtLayer(choice.chosen_layer), dev.labels),
            Accuracy(at_last, dev.AtLayer(4), dev.labels));
}

TEST(SweepTest, EndToEndOnSyntheticCache) {
  TempDir dir;
  const auto f = MakeLayeredFixture("on", 5, 4, 3, 40, 20, 20, kFp);
  CacheStore cache(dir / "cache");
  testing::PutAll(cache, f.matrices);
  const Dataset data(f.instances, InferInventory(f.instances));
  SweepOptions opts{FastConfig(), true, 2, false};
  const auto choices = SelectAllLayers(data, cache, kFp, opts);
  ASSERT_EQ(choices.size(), 1u);
  EXPECT_EQ(choices[0].chosen_layer, 3);
  WriteChoices(choices, dir / "choices.jsonl");
  const auto back = ReadChoices(dir / "choices.jsonl");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].ToJson(), choices[0].ToJson());
  const auto models = TrainAllModels(data, cache, back, opts);
  ASSERT_EQ(models.size(), 1u);
  EXPECT_EQ(models.at("on").chosen_layer(), 3);
  EXPECT_EQ(models.at("on").encoder_fingerprint(), kFp);
  const auto report = Evaluate(models, data, cache);
  EXPECT_DOUBLE_EQ(report.macro_accuracy, 1.0);
}

TEST(SweepTest, MissingCacheEntryIsStageError) {
  TempDir dir;
  const auto f = MakeLayeredFixture("on", 3, 2, 1, 6, 2, 0, kFp);
  CacheStore cache(dir / "cache");
  testing::PutAll(cache, std::vector<LayerMatrix>(f.matrices.begin() + 1, f.matrices.end()));
  const Dataset data(f.instances, InferInventory(f.instances));
  EXPECT_THROW(SelectAllLayers(data, cache, kFp, SweepOptions{FastConfig()}), StageError);
}

TEST(ParallelForTest, VisitsEveryIndexOnce) {
  std::vector<int> hits(100, 0);
  ParallelFor(hits.size(), 4, [&](size_t i) { hits[i]++; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(ParallelFor(10, 3, [](size_t i) { if (i == 7) throw StageError("boom"); }),
               StageError);
}

}  // namespace
}  // namespace psd
