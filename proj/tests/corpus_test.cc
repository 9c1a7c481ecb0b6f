#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "psd/corpus.h"
#include "psd/errors.h"
#include "psd/sense_id.h"
#include "psd/text.h"
#include "test_util.h"

namespace psd {
namespace {

using testing::MakeInstance;
using testing::TempDir;
using testing::WriteFile;

TEST(SenseIdTest, ParsesDocumentedExamples) {
  const SenseId means = SenseId::Parse("4(3)");
  EXPECT_EQ(means.super_sense(), 4);
  EXPECT_EQ(means.sub_label(), "3");
  const SenseId accompanier = SenseId::Parse("1(1)");
  EXPECT_EQ(accompanier.super_sense(), 1);
  EXPECT_EQ(accompanier.sub_label(), "1");
  const SenseId lettered = SenseId::Parse("3(1b)");
  EXPECT_EQ(lettered.super_sense(), 3);
  EXPECT_EQ(lettered.sub_label(), "1b");
}

TEST(SenseIdTest, RejectsMalformed) {
  for (const char* raw : {"(3)", "", "4", "4()", "0(1)", "4(3", "4(b)", "a(1)", "4(3)x"}) {
    EXPECT_THROW(SenseId::Parse(raw), ParseError) << raw;
  }
  try {
    SenseId::Parse("(3)");
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("(3)"), std::string::npos);
  }
}

TEST(SenseIdTest, RoundTripsAfterWhitespaceNormalization) {
  for (const char* raw : {"4(3)", "1(1)", "3(1b)", "12(10a)", "6(3)"}) {
    EXPECT_EQ(SenseId::Parse(raw).Render(), raw);
    EXPECT_EQ(SenseId::Parse(std::string("  ") + raw + "\t").Render(), raw);
  }
}

TEST(SenseIdTest, OrdersNumerically) {
  std::vector<SenseId> ids = {SenseId::Parse("10(1)"), SenseId::Parse("2(10)"),
                              SenseId::Parse("2(2)"), SenseId::Parse("2(1b)"),
                              SenseId::Parse("2(1)")};
  std::sort(ids.begin(), ids.end());
  std::vector<std::string> raw;
  for (const auto& s : ids) raw.push_back(s.raw());
  EXPECT_EQ(raw, (std::vector<std::string>{"2(1)", "2(1b)", "2(2)", "2(10)", "10(1)"}));
}

TEST(TextTest, TokenizesOnWhitespaceAndPunctuation) {
  EXPECT_EQ(TokenizeText("John ate rice, with a spoon."),
            (std::vector<std::string>{"John", "ate", "rice", ",", "with", "a", "spoon", "."}));
  EXPECT_TRUE(TokenizeText("  \t\n").empty());
  EXPECT_EQ(JoinLower({"In", "Front", "Of"}, 0, 2), "in front of");
}

TEST(InstanceTest, ValidatesHeadAgainstPreposition) {
  auto inst = MakeInstance("a", {"sat", "on", "it"}, 1, "on", "1(1)");
  EXPECT_NO_THROW(inst.Validate());
  inst.head = {0, 0};
  EXPECT_THROW(inst.Validate(), ValidationError);
  inst.head = {1, 3};
  EXPECT_THROW(inst.Validate(), ValidationError);
  auto unlabeled = MakeInstance("b", {"sat", "on", "it"}, 1, "on", std::nullopt);
  EXPECT_THROW(unlabeled.Validate(), ValidationError);
  unlabeled.split.reset();
  EXPECT_NO_THROW(unlabeled.Validate());

  auto phrasal = MakeInstance("c", {"in", "front", "of", "us"}, 0, "in front of", "1(1)");
  phrasal.head = {0, 2};
  EXPECT_NO_THROW(phrasal.Validate());
}

TEST(DatasetTest, RejectsDuplicateIdsAndUnknownSenses) {
  SenseInventory inv;
  inv.Add("on", {SenseId::Parse("1(1)"), std::nullopt});
  const auto a = MakeInstance("a", {"on"}, 0, "on", "1(1)");
  EXPECT_THROW(Dataset({a, a}, inv), ValidationError);
  const auto b = MakeInstance("b", {"on"}, 0, "on", "2(1)");
  EXPECT_THROW(Dataset({a, b}, inv), ValidationError);
  EXPECT_THROW(inv.Add("on", {SenseId::Parse("1(1)"), std::nullopt}), ValidationError);
}

constexpr char kThreeRecords[] =
    R"j({"id": "s1", "tokens": ["John", "ate", "rice", "with", "a", "spoon"], "head": [3, 3], "prep": "with", "sense": "4(3)", "split": "train"}
{"id": "s2", "tokens": ["John", "ate", "rice", "with", "friends"], "head": [3, 3], "prep": "with", "sense": "1(1)", "split": "train"}
{"id": "s3", "tokens": ["he", "stood", "in", "front", "of", "us"], "head": [2, 4], "prep": "in front of", "sense": "1(1)", "split": "test"}
)j";

TEST(IngestTest, ThreeRecordFixturePreservesIds) {
  TempDir dir;
  WriteFile(dir / "fixture.jsonl", kThreeRecords);
  const Dataset data = Ingest(dir / "fixture.jsonl", SourceFormat::kNativeJsonl);
  ASSERT_EQ(data.size(), 3u);
  EXPECT_EQ(data.instances()[0].id, "s1");
  EXPECT_EQ(data.instances()[1].id, "s2");
  EXPECT_EQ(data.instances()[2].id, "s3");
  EXPECT_EQ(data.instances()[2].head, (HeadSpan{2, 4}));
  EXPECT_TRUE(data.inventory().inferred());
  EXPECT_EQ(data.Prepositions(), (std::vector<std::string>{"in front of", "with"}));
}

TEST(IngestTest, EmptyDirectoryIsAnError) {
  TempDir dir;
  EXPECT_THROW(Ingest(dir.path(), SourceFormat::kNativeJsonl), ValidationError);
  EXPECT_THROW(Ingest(dir / "missing", SourceFormat::kNativeJsonl), ValidationError);
}

TEST(IngestTest, ReportsLineOfBadRecord) {
  TempDir dir;
  WriteFile(dir / "bad.jsonl",
            std::string(kThreeRecords) +
                R"j({"id": "s4", "tokens": ["on"], "head": [0, 0], "prep": "on", "sense": "(3)", "split": "train"})j"
                "\n");
  try {
    Ingest(dir / "bad.jsonl", SourceFormat::kNativeJsonl);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(":4"), std::string::npos) << e.what();
  }
}

TEST(IngestTest, InventoryFileGovernsMembership) {
  TempDir dir;
  WriteFile(dir / "data.jsonl", kThreeRecords);
  WriteFile(dir / "inv.jsonl",
            R"j({"prep": "with", "senses": [{"id": "1(1)", "gloss": "accompanier"}, {"id": "4(3)", "gloss": null}, {"id": "9(7)"}]})j"
            "\n"
            R"j({"prep": "in front of", "senses": [{"id": "1(1)"}]})j"
            "\n");
  const Dataset data =
      Ingest(dir / "data.jsonl", SourceFormat::kNativeJsonl, dir / "inv.jsonl");
  EXPECT_FALSE(data.inventory().inferred());
  EXPECT_EQ(data.inventory().Senses("with").size(), 3u);
  EXPECT_EQ(data.inventory().Senses("with")[0].gloss, "accompanier");

  WriteFile(dir / "small.jsonl", R"j({"prep": "with", "senses": [{"id": "1(1)"}]})j"
                                 "\n");
  EXPECT_THROW(Ingest(dir / "data.jsonl", SourceFormat::kNativeJsonl, dir / "small.jsonl"),
               ValidationError);
}

TEST(IngestTest, SaveLoadRoundTrip) {
  TempDir dir;
  WriteFile(dir / "data.jsonl", kThreeRecords);
  const Dataset data = Ingest(dir / "data.jsonl", SourceFormat::kNativeJsonl);
  SaveDataset(data, dir / "out" / "dataset.jsonl");
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "dataset.inventory.jsonl"));
  const Dataset back = LoadDataset(dir / "out" / "dataset.jsonl");
  ASSERT_EQ(back.size(), data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(InstanceToJson(back.instances()[i]), InstanceToJson(data.instances()[i]));
  }
  EXPECT_TRUE(back.inventory() == data.inventory());
  EXPECT_TRUE(back.inventory().inferred());
}

Dataset SixtyForty(const std::string& prep = "on") {
  std::vector<LabeledInstance> xs;
  for (int i = 0; i < 100; ++i) {
    xs.push_back(MakeInstance(prep + std::to_string(i), {prep}, 0, prep, i < 60 ? "1(1)" : "2(1)"));
  }
  return Dataset(xs, InferInventory(xs));
}

std::map<std::string, size_t> DevCountsBySense(const Dataset& d) {
  std::map<std::string, size_t> out;
  for (const auto& inst : d.instances()) {
    if (inst.split == Split::kDev) ++out[inst.sense->raw()];
  }
  return out;
}

TEST(CarveDevTest, StratifiedCounts) {
  const Dataset carved = CarveDev(SixtyForty(), 0.2, 7);
  const auto counts = DevCountsBySense(carved);
  // Oracle: a fraction 0.2 of each sense stratum, 60 and 40 items.
  EXPECT_EQ(counts.at("1(1)"), static_cast<size_t>(0.2 * 60 + 0.5));
  EXPECT_EQ(counts.at("2(1)"), static_cast<size_t>(0.2 * 40 + 0.5));
  EXPECT_EQ(counts.at("1(1)"), 12u);
  EXPECT_EQ(counts.at("2(1)"), 8u);
}

TEST(CarveDevTest, SingletonSenseStaysInTrain) {
  std::vector<LabeledInstance> xs;
  for (int i = 0; i < 10; ++i) xs.push_back(MakeInstance("a" + std::to_string(i), {"on"}, 0, "on", "1(1)"));
  xs.push_back(MakeInstance("lonely", {"on"}, 0, "on", "3(1)"));
  const Dataset carved = CarveDev(Dataset(xs, InferInventory(xs)), 0.2, 13);
  for (const auto& inst : carved.instances()) {
    if (inst.id == "lonely") EXPECT_EQ(inst.split, Split::kTrain);
  }
}

TEST(CarveDevTest, DeterministicAndPartitioning) {
  const Dataset original = SixtyForty();
  const Dataset a = CarveDev(original, 0.2, 7);
  const Dataset b = CarveDev(original, 0.2, 7);
  const Dataset c = CarveDev(original, 0.2, 8);
  std::set<std::string> dev_a, dev_b, dev_c, train_a;
  for (const auto& i : a.instances()) (i.split == Split::kDev ? dev_a : train_a).insert(i.id);
  for (const auto& i : b.instances()) if (i.split == Split::kDev) dev_b.insert(i.id);
  for (const auto& i : c.instances()) if (i.split == Split::kDev) dev_c.insert(i.id);
  EXPECT_EQ(dev_a, dev_b);
  EXPECT_NE(dev_a, dev_c);

  // train' ∪ dev == train and train' ∩ dev == ∅.
  std::set<std::string> original_train;
  for (const auto& i : original.instances()) original_train.insert(i.id);
  std::set<std::string> joined = train_a;
  joined.insert(dev_a.begin(), dev_a.end());
  EXPECT_EQ(joined, original_train);
  EXPECT_EQ(train_a.size() + dev_a.size(), original_train.size());
  for (const auto& id : dev_a) EXPECT_FALSE(train_a.contains(id));
}

TEST(CarveDevTest, RejectsBadRatioAndMissingTrain) {
  EXPECT_THROW(CarveDev(SixtyForty(), 0.0, 1), ValidationError);
  EXPECT_THROW(CarveDev(SixtyForty(), 1.0, 1), ValidationError);
  std::vector<LabeledInstance> xs = {MakeInstance("t", {"on"}, 0, "on", "1(1)", Split::kTest)};
  EXPECT_THROW(CarveDev(Dataset(xs, InferInventory(xs)), 0.2, 1), ValidationError);
}

TEST(StatsTest, CountsAndIdentities) {
  std::vector<LabeledInstance> xs;
  for (int i = 0; i < 6; ++i) xs.push_back(MakeInstance("w" + std::to_string(i), {"with"}, 0, "with", i < 4 ? "1(1)" : "4(3)"));
  for (int i = 0; i < 3; ++i) xs.push_back(MakeInstance("o" + std::to_string(i), {"on"}, 0, "on", "2(1)", Split::kTest));
  SenseInventory inv;
  inv.Add("with", {SenseId::Parse("1(1)"), std::nullopt});
  inv.Add("with", {SenseId::Parse("4(3)"), std::nullopt});
  inv.Add("with", {SenseId::Parse("9(7)"), std::nullopt});
  inv.Add("on", {SenseId::Parse("2(1)"), std::nullopt});
  const StatsReport s = ComputeStats(Dataset(xs, inv));
  EXPECT_EQ(s.total_instances, 9u);
  EXPECT_EQ(s.prepositions, 2u);
  EXPECT_EQ(s.inventory_senses, 4u);
  EXPECT_EQ(s.attested_senses, 3u);
  size_t sum = 0;
  for (const auto& p : s.per_preposition) sum += p.instances;
  EXPECT_EQ(sum, s.total_instances);
  ASSERT_EQ(s.zero_data_senses.size(), 1u);
  EXPECT_EQ(s.zero_data_senses[0].second.raw(), "9(7)");
  const auto with = std::find_if(s.per_preposition.begin(), s.per_preposition.end(),
                                 [](const auto& p) { return p.preposition == "with"; });
  ASSERT_NE(with, s.per_preposition.end());
  EXPECT_DOUBLE_EQ(with->most_frequent_sense_share, 4.0 / 6.0);
  EXPECT_EQ(with->inventory_senses, 3u);
  EXPECT_EQ(with->attested_senses, 2u);
}

TEST(StatsTest, EmptyDatasetIsAllZero) {
  const StatsReport s = ComputeStats(Dataset());
  EXPECT_EQ(s.total_instances, 0u);
  EXPECT_EQ(s.prepositions, 0u);
  EXPECT_EQ(s.inventory_senses, 0u);
  EXPECT_TRUE(s.per_preposition.empty());
}

}  // namespace
}  // namespace psd
